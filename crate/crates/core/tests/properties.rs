use proptest::prelude::*;

use sigmafield::calculus::{simple_integral, StepFunction};
use sigmafield::equivalence::{gelfand_pairing, PairingEvaluator, SmoothTest};
use sigmafield::hermite::{bracket_transform, mehler_moment, rkhs_kernel_eval, HermiteSeries};
use sigmafield::measure::PolySegment;
use sigmafield::quadrature::QuadratureConfig;
use sigmafield::spectral::{covariance_min_eigenvalue, SpectralMeasure, VarianceFunction};
use sigmafield::{stats, Atom, Density, FieldSimulator, MeasurableSet, MeasureSpace, OrthoBasis, Partition};

fn density_measures() -> Vec<MeasureSpace> {
    vec![
        MeasureSpace::lebesgue(),
        MeasureSpace::with_density(Density::Power { alpha: 0.5, scale: 1.0 }),
        MeasureSpace::with_density(Density::CauchyLike { p: 1.0, scale: 2.0 }),
        MeasureSpace::with_density(Density::Piecewise(vec![
            PolySegment {
                a: -1.0,
                b: 0.5,
                coeffs: vec![1.0, 0.0, 1.0],
            },
            PolySegment {
                a: 0.5,
                b: 3.0,
                coeffs: vec![0.25],
            },
        ])),
    ]
}

fn with_atoms(space: &MeasureSpace) -> MeasureSpace {
    let atoms = vec![
        Atom {
            location: 0.3,
            mass: 0.7,
        },
        Atom {
            location: 1.1,
            mass: 0.2,
        },
    ];
    MeasureSpace::new(space.density().clone(), atoms, QuadratureConfig::default()).unwrap()
}

/// A union of up to three intervals inside `[-1, 3)`.
fn arb_set() -> impl Strategy<Value = MeasurableSet> {
    prop::collection::vec((-1.0f64..2.5, 0.05f64..0.5), 1..4).prop_map(|parts| {
        MeasurableSet::from_intervals(parts.into_iter().map(|(a, w)| (a, (a + w).min(3.0)))).unwrap()
    })
}

fn spectral_measures() -> Vec<VarianceFunction> {
    vec![
        MeasureSpace::normalized_lebesgue(),
        MeasureSpace::with_density(Density::CauchyLike { p: 1.0, scale: 1.0 }),
        MeasureSpace::with_density(Density::Power { alpha: 0.4, scale: 0.3 }),
    ]
    .into_iter()
    .map(|m| VarianceFunction::new(SpectralMeasure::new(m).unwrap()))
    .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn measure_is_additive_over_partitions(set in arb_set(), cuts in prop::collection::vec(0.0f64..1.0, 1..6), k in 0usize..4) {
        let base = &density_measures()[k];
        for space in [base.clone(), with_atoms(base)] {
            let (lo, hi) = set.bounds().unwrap();
            let mut points: Vec<f64> = cuts.iter().map(|c| lo + c * (hi - lo)).collect();
            points.push(lo);
            points.push(hi);
            points.sort_by(f64::total_cmp);
            let cells: Vec<MeasurableSet> = points
                .windows(2)
                .map(|w| set.intersect(&MeasurableSet::interval(w[0], w[1]).unwrap()))
                .filter(|c| !c.is_empty())
                .collect();
            let total = space.measure_of(&set).unwrap();
            let sum: f64 = cells.iter().map(|c| space.measure_of(c).unwrap()).sum();
            prop_assert!((sum - total).abs() <= 1e-9 * total.max(1.0));
            Partition::new(&space, set.clone(), cells).unwrap();
        }
    }

    #[test]
    fn equal_split_is_exact(set in arb_set(), log_n in 1u32..11, k in 0usize..4) {
        let space = &density_measures()[k];
        let n = 1usize << log_n;
        let sigma = space.measure_of(&set).unwrap();
        let p = space.equal_measure_partition(&set, n).unwrap();
        let worst = p.cell_measures().iter().map(|m| (m - sigma / n as f64).abs()).fold(0.0, f64::max);
        prop_assert!(worst / sigma <= 1e-8);
        let lv = p.lower_variation();
        prop_assert!((lv - sigma * sigma / n as f64).abs() <= 1e-7 * sigma * sigma / n as f64);
    }

    #[test]
    fn intersection_measure_is_symmetric(a in arb_set(), b in arb_set(), k in 0usize..4) {
        let space = with_atoms(&density_measures()[k]);
        prop_assert_eq!(space.measure_of(&a.intersect(&b)).unwrap(), space.measure_of(&b.intersect(&a)).unwrap());
    }

    #[test]
    fn step_functions_are_reconstructed(depth in 0u32..9, seed in any::<u64>(), k in 0usize..4) {
        let space = &density_measures()[k];
        let basis = OrthoBasis::build_haar(space, &MeasurableSet::interval(-1.0, 3.0).unwrap(), depth).unwrap();
        let mut rng = sigmafield::rng::replica_rng(seed, 0);
        use rand::Rng;
        let values: Vec<f64> = (0..basis.leaves().len()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let dense: Vec<f64> = values.iter().zip(basis.leaf_measures()).map(|(v, m)| v * m).collect();
        let coeffs = basis.coefficients_from_dense(&dense);
        let mut rebuilt = vec![0.0; values.len()];
        basis.synthesize(&coeffs, &mut rebuilt, &mut Vec::new());
        let err: f64 = rebuilt
            .iter()
            .zip(&values)
            .zip(basis.leaf_measures())
            .map(|((r, v), m)| (r - v).powi(2) * m)
            .sum::<f64>()
            .sqrt();
        prop_assert!(err <= 1e-8);
    }

    #[test]
    fn parseval_residual_is_non_increasing(set in arb_set(), k in 0usize..4) {
        let space = &density_measures()[k];
        let domain = MeasurableSet::interval(-1.0, 3.0).unwrap();
        let mut prev = f64::INFINITY;
        for depth in 0..=8 {
            let r = OrthoBasis::build_haar(space, &domain, depth).unwrap().parseval_residual(space, &set).unwrap();
            prop_assert!(r <= prev + 1e-12);
            prop_assert!(r >= -1e-10);
            prev = r;
        }
    }

    #[test]
    fn wiener_integral_is_bilinear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in any::<u64>()) {
        let sim = FieldSimulator::build(MeasureSpace::lebesgue(), &MeasurableSet::interval(0.0, 1.0).unwrap(), 3, seed, 64).unwrap();
        let leaves = sim.basis().leaves().to_vec();
        let f = StepFunction::new(leaves.iter().enumerate().map(|(i, l)| (l.clone(), i as f64 - 3.0)).collect()).unwrap();
        let g = StepFunction::new(leaves.iter().enumerate().map(|(i, l)| (l.clone(), ((i * 5) % 7) as f64)).collect()).unwrap();
        let h = StepFunction::new(
            leaves
                .iter()
                .map(|l| (l.clone(), alpha * f.eval(l.intervals()[0].0) + beta * g.eval(l.intervals()[0].0)))
                .collect(),
        )
        .unwrap();
        let (wf, wg, wh) = (simple_integral(&sim, &f).unwrap(), simple_integral(&sim, &g).unwrap(), simple_integral(&sim, &h).unwrap());
        for i in 0..wf.len() {
            prop_assert!((wh[i] - alpha * wf[i] - beta * wg[i]).abs() <= 1e-10 * (1.0 + wh[i].abs()));
        }
    }

    #[test]
    fn wiener_isometry_for_random_steps(values in prop::collection::vec(-2.0f64..2.0, 8), seed in any::<u64>()) {
        let r = 4000;
        let sim = FieldSimulator::build(MeasureSpace::lebesgue(), &MeasurableSet::interval(0.0, 2.0).unwrap(), 3, seed, r).unwrap();
        let f = StepFunction::new(sim.basis().leaves().iter().cloned().zip(values).collect()).unwrap();
        let norm = f.norm_sq(sim.space()).unwrap();
        let w = simple_integral(&sim, &f).unwrap();
        let second = w.iter().map(|x| x * x).sum::<f64>() / r as f64;
        prop_assert!((second - norm).abs() <= 5.0 * 2f64.sqrt() * norm / (r as f64).sqrt() + 1e-12);
    }

    #[test]
    fn same_seed_same_sample(seed in any::<u64>(), set in arb_set()) {
        let domain = MeasurableSet::interval(-1.0, 3.0).unwrap();
        let make = || FieldSimulator::build(MeasureSpace::lebesgue(), &domain, 4, seed, 300).unwrap();
        prop_assert_eq!(make().sample_field(std::slice::from_ref(&set)).unwrap(), make().sample_field(&[set]).unwrap());
    }

    #[test]
    fn r_is_even_nonnegative_and_psd(times in prop::collection::vec(0.01f64..3.0, 2..7), k in 0usize..3) {
        let vf = &spectral_measures()[k];
        prop_assert_eq!(vf.r(0.0).unwrap(), 0.0);
        for &t in &times {
            let r = vf.r(t).unwrap();
            prop_assert!(r >= 0.0);
            prop_assert!((vf.r(-t).unwrap() - r).abs() <= 1e-12 * r.max(1.0));
        }
        let trace: f64 = times.iter().map(|t| vf.r(*t).unwrap()).sum();
        prop_assert!(covariance_min_eigenvalue(vf, &times).unwrap() >= -1e-10 * trace);
    }

    #[test]
    fn pairing_is_linear_in_the_path(a in prop::collection::vec(-1.0f64..1.0, 40), b in prop::collection::vec(-1.0f64..1.0, 40), t in 0.5f64..1.2) {
        let grid: Vec<f64> = (0..=40).map(|k| k as f64 * 0.05).collect();
        let mut pa = vec![0.0];
        pa.extend(&a);
        let mut pb = vec![0.0];
        pb.extend(&b);
        let sum: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x + y).collect();
        let phi = SmoothTest::mollified_indicator(t, 0.3).unwrap();
        let p = |path: &[f64]| gelfand_pairing(&PairingEvaluator::new(&grid, path).unwrap(), &phi).unwrap();
        prop_assert!((p(&sum) - p(&pa) - p(&pb)).abs() <= 1e-12);
    }

    #[test]
    fn kernel_is_symmetric_and_bounded(a in arb_set(), b in arb_set(), k in 0usize..4) {
        let space = with_atoms(&density_measures()[k]);
        let kab = rkhs_kernel_eval(&space, &a, &b).unwrap();
        prop_assert_eq!(kab, rkhs_kernel_eval(&space, &b, &a).unwrap());
        prop_assert!(kab > 0.0 && kab <= 1.0);
        prop_assert!((rkhs_kernel_eval(&space, &a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mehler_moment_matches_closed_form(n in 0usize..=8, k in 0usize..=8, c in -0.95f64..0.95) {
        let exact = if n == k { stats::factorial(n as u32) * c.powi(n as i32) } else { 0.0 };
        prop_assert!((mehler_moment(n, k, c).unwrap() - exact).abs() <= 1e-8);
    }

    #[test]
    fn bracket_at_one_is_the_norm(coeffs in prop::collection::vec(-1.0f64..1.0, 1..9)) {
        let psi = HermiteSeries::new(coeffs).unwrap();
        let at_one = bracket_transform(&psi).eval(1.0);
        prop_assert!((at_one - psi.norm_sq()).abs() <= 1e-12 * at_one.max(1.0));
        prop_assert!((bracket_transform(&psi).eval(0.0) - psi.coeffs()[0].powi(2)).abs() <= 1e-15);
    }
}
