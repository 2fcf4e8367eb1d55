//! Orthonormal bases of `L2(sigma)` made of generalized Haar functions on
//! the equal-measure dyadic tree of a working domain.
//!
//! Every basis function is a sigma-step function, constant on the `2^depth`
//! leaf cells of the tree, so all inner products reduce to finite sums of
//! leaf measures. The basis is ordered breadth-first: index 0 is the
//! normalized constant, index `2^l + j` is the Haar function of node `j` on
//! level `l`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::MeasureSpace;
use crate::set::MeasurableSet;

/// One sigma-step function of the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFunction {
    index: usize,
    pieces: Vec<(MeasurableSet, f64)>,
    // leaf range [lo, mid) carries `left`, [mid, hi) carries `right`
    lo: usize,
    mid: usize,
    hi: usize,
    left: f64,
    right: f64,
}

impl BasisFunction {
    pub fn index(&self) -> usize {
        self.index
    }

    /// Support cells with their constant values.
    pub fn pieces(&self) -> &[(MeasurableSet, f64)] {
        &self.pieces
    }

    /// Value on leaf `leaf`.
    pub fn leaf_value(&self, leaf: usize) -> f64 {
        if leaf < self.lo || leaf >= self.hi {
            0.0
        } else if leaf < self.mid {
            self.left
        } else {
            self.right
        }
    }

    pub fn leaf_range(&self) -> std::ops::Range<usize> {
        self.lo..self.hi
    }
}

/// A sigma-orthonormal family on `domain`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis {
    domain: MeasurableSet,
    depth: u32,
    leaves: Vec<MeasurableSet>,
    leaf_measures: Vec<f64>,
    functions: Vec<BasisFunction>,
}

/// Entry of the basis dump format `{k, cells: [[a, b, coeff]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDumpEntry {
    pub k: usize,
    pub cells: Vec<[f64; 3]>,
}

impl OrthoBasis {
    /// Builds the `2^depth` Haar functions of the equal-measure dyadic
    /// tree of `domain`. The constant is `1/sqrt(sigma(domain))`; the Haar
    /// function of a node with children `L`, `R` is `+1/sqrt(2 sigma(L))` on
    /// `L` and `-1/sqrt(2 sigma(R))` on `R`.
    pub fn build_haar(space: &MeasureSpace, domain: &MeasurableSet, depth: u32) -> Result<Self> {
        if depth > 24 {
            return Err(Error::InvalidInput(format!("basis depth {depth} is too large")));
        }
        let n = 1usize << depth;
        let partition = space.equal_measure_partition(domain, n)?;
        let leaves = partition.cells().to_vec();
        let leaf_measures = partition.cell_measures().to_vec();
        if leaf_measures.iter().any(|&m| m <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "depth {depth} produced an empty leaf in {domain}"
            )));
        }
        let mut prefix = vec![0.0; n + 1];
        for (k, m) in leaf_measures.iter().enumerate() {
            prefix[k + 1] = prefix[k] + m;
        }
        let union = |lo: usize, hi: usize| {
            MeasurableSet::from_intervals(leaves[lo..hi].iter().flat_map(|c| c.intervals().iter().copied()))
                .expect("leaves have finite endpoints")
        };

        let mut functions = Vec::with_capacity(n);
        let total = prefix[n];
        let c0 = 1.0 / total.sqrt();
        functions.push(BasisFunction {
            index: 0,
            pieces: vec![(domain.clone(), c0)],
            lo: 0,
            mid: n,
            hi: n,
            left: c0,
            right: 0.0,
        });
        for level in 0..depth {
            let width = n >> level;
            for j in 0..(1usize << level) {
                let lo = j * width;
                let mid = lo + width / 2;
                let hi = lo + width;
                let left = 1.0 / (2.0 * (prefix[mid] - prefix[lo])).sqrt();
                let right = -1.0 / (2.0 * (prefix[hi] - prefix[mid])).sqrt();
                functions.push(BasisFunction {
                    index: (1usize << level) + j,
                    pieces: vec![(union(lo, mid), left), (union(mid, hi), right)],
                    lo,
                    mid,
                    hi,
                    left,
                    right,
                });
            }
        }
        Ok(Self {
            domain: domain.clone(),
            depth,
            leaves,
            leaf_measures,
            functions,
        })
    }

    pub fn domain(&self) -> &MeasurableSet {
        &self.domain
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    pub fn leaves(&self) -> &[MeasurableSet] {
        &self.leaves
    }

    pub fn leaf_measures(&self) -> &[f64] {
        &self.leaf_measures
    }

    /// Index range of leaves whose bounds overlap `[lo, hi)`.
    fn candidate_leaves(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self
            .leaves
            .partition_point(|leaf| leaf.bounds().map(|(_, b)| b <= lo).unwrap_or(true));
        let end = self
            .leaves
            .partition_point(|leaf| leaf.bounds().map(|(a, _)| a < hi).unwrap_or(false));
        start..end.max(start)
    }

    /// Sparse leaf integrals `(leaf, sigma(A ∩ leaf))` of an indicator.
    pub fn leaf_weights_of_set(&self, space: &MeasureSpace, set: &MeasurableSet) -> Result<Vec<(usize, f64)>> {
        if !set.is_subset(&self.domain) {
            return Err(Error::Domain(set.to_string()));
        }
        let mut out = Vec::new();
        for &(a, b) in set.intervals() {
            for leaf in self.candidate_leaves(a, b) {
                let piece = self.leaves[leaf].clip(a, b);
                if piece.is_empty() {
                    continue;
                }
                let m = if piece == self.leaves[leaf] {
                    self.leaf_measures[leaf]
                } else {
                    space.measure_of(&piece)?
                };
                if m != 0.0 {
                    out.push((leaf, m));
                }
            }
        }
        // a leaf split across several intervals of `set` shows up twice
        out.sort_by_key(|&(leaf, _)| leaf);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(out.len());
        for (leaf, m) in out {
            match merged.last_mut() {
                Some(last) if last.0 == leaf => last.1 += m,
                _ => merged.push((leaf, m)),
            }
        }
        Ok(merged)
    }

    /// Dense leaf integrals `int_leaf f dsigma`.
    pub fn leaf_weights_of_fn<F: Fn(f64) -> f64>(&self, space: &MeasureSpace, f: F) -> Result<Vec<f64>> {
        self.leaves.iter().map(|leaf| space.integrate_over(&f, leaf)).collect()
    }

    /// Leaf integrals of a step function given as `(set, coefficient)` cells.
    pub fn leaf_weights_of_step(&self, space: &MeasureSpace, cells: &[(MeasurableSet, f64)]) -> Result<Vec<(usize, f64)>> {
        let mut dense = vec![0.0; self.leaves.len()];
        let mut touched = vec![false; self.leaves.len()];
        for (set, c) in cells {
            for (leaf, m) in self.leaf_weights_of_set(space, set)? {
                dense[leaf] += c * m;
                touched[leaf] = true;
            }
        }
        Ok(dense
            .into_iter()
            .enumerate()
            .filter(|(k, _)| touched[*k])
            .collect())
    }

    /// `c_k = sum_leaf phi_k(leaf) a_leaf` for sparse leaf integrals `a`.
    pub fn coefficients_from_leaf_weights(&self, weights: &[(usize, f64)]) -> Vec<f64> {
        let n = self.leaves.len();
        let mut dense = vec![0.0; n];
        for &(leaf, w) in weights {
            dense[leaf] += w;
        }
        self.coefficients_from_dense(&dense)
    }

    pub fn coefficients_from_dense(&self, dense: &[f64]) -> Vec<f64> {
        let n = self.leaves.len();
        let mut prefix = vec![0.0; n + 1];
        for k in 0..n {
            prefix[k + 1] = prefix[k] + dense[k];
        }
        self.functions
            .iter()
            .map(|f| f.left * (prefix[f.mid] - prefix[f.lo]) + f.right * (prefix[f.hi] - prefix[f.mid]))
            .collect()
    }

    /// Coefficients `<chi_A, phi_k>_sigma`.
    pub fn project_set(&self, space: &MeasureSpace, set: &MeasurableSet) -> Result<Vec<f64>> {
        Ok(self.coefficients_from_leaf_weights(&self.leaf_weights_of_set(space, set)?))
    }

    /// Coefficients `<f, phi_k>_sigma` of a callable `f`.
    pub fn project_fn<F: Fn(f64) -> f64>(&self, space: &MeasureSpace, f: F) -> Result<Vec<f64>> {
        Ok(self.coefficients_from_dense(&self.leaf_weights_of_fn(space, f)?))
    }

    /// Coefficients of a step function.
    pub fn project_step(&self, space: &MeasureSpace, cells: &[(MeasurableSet, f64)]) -> Result<Vec<f64>> {
        Ok(self.coefficients_from_leaf_weights(&self.leaf_weights_of_step(space, cells)?))
    }

    /// `sigma(A) - sum_k <chi_A, phi_k>^2`, the truncation error of the
    /// expansion of `W_A`.
    pub fn parseval_residual(&self, space: &MeasureSpace, set: &MeasurableSet) -> Result<f64> {
        let coeffs = self.project_set(space, set)?;
        let captured: f64 = coeffs.iter().map(|c| c * c).sum();
        Ok(space.measure_of(set)? - captured)
    }

    /// `v_leaf = sum_k phi_k(leaf) z_k` in `O(2^depth)`, walking the tree
    /// from the root.
    pub fn synthesize(&self, z: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        let n = self.leaves.len();
        debug_assert_eq!(z.len(), n);
        debug_assert_eq!(out.len(), n);
        out[0] = z[0] * self.functions[0].left;
        let mut width = 1;
        for level in 0..self.depth {
            scratch.clear();
            scratch.extend_from_slice(&out[..width]);
            let base = 1usize << level;
            for j in 0..width {
                let f = &self.functions[base + j];
                let parent = scratch[j];
                out[2 * j] = parent + f.left * z[base + j];
                out[2 * j + 1] = parent + f.right * z[base + j];
            }
            width *= 2;
        }
    }

    /// Gram matrix entry `<phi_j, phi_k>_sigma` from the leaf measures.
    pub fn inner_product(&self, j: usize, k: usize) -> f64 {
        let (fj, fk) = (&self.functions[j], &self.functions[k]);
        let lo = fj.lo.max(fk.lo);
        let hi = fj.hi.min(fk.hi);
        (lo..hi)
            .map(|leaf| fj.leaf_value(leaf) * fk.leaf_value(leaf) * self.leaf_measures[leaf])
            .sum()
    }

    /// `max_{j,k} |G_jk - delta_jk|`.
    pub fn gram_deviation(&self) -> f64 {
        let n = self.functions.len();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in j..n {
                let (fj, fk) = (&self.functions[j], &self.functions[k]);
                if fj.hi <= fk.lo || fk.hi <= fj.lo {
                    continue;
                }
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((self.inner_product(j, k) - target).abs());
            }
        }
        worst
    }

    /// Serializable dump `[{k, cells: [[a, b, coeff]]}]`.
    pub fn dump(&self) -> Vec<BasisDumpEntry> {
        self.functions
            .iter()
            .map(|f| BasisDumpEntry {
                k: f.index,
                cells: f
                    .pieces
                    .iter()
                    .flat_map(|(set, c)| set.intervals().iter().map(move |&(a, b)| [a, b, *c]))
                    .collect(),
            })
            .collect()
    }
}
