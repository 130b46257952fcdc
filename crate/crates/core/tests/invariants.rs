mod common;

use common::*;
use mhr::dataset::{
    load_dataset, make_synthetic, save_dataset, split_labels, GeneratorKind, GeneratorSpec, Label,
    MultiviewDataset,
};
use mhr::eval::{average_precision, holdout_split, run_sweep, RankedPredictions, SweepConfig};
use mhr::kernels::{combine_kernels, gram, KernelSpec};
use mhr::manifold::{hessian_energy, knn};
use mhr::solvers::{fit_kls, hinge_objective, smoothed_objective, Loss, ObjectiveConfig};
use mhr::SimplexWeights;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn moons(n: usize, seed: u64) -> MultiviewDataset {
    make_synthetic(&GeneratorSpec {
        kind: GeneratorKind::TwoMoonsViews,
        n,
        noise: 0.1,
        seed,
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dataset_survives_disk(seed in 0u64..1000, fraction in 0.1f64..1.0) {
        let data = moons(40, seed);
        let masked = data.apply_mask(&split_labels(&data, fraction, seed).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&masked, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        prop_assert_eq!(back.n(), masked.n());
        prop_assert_eq!(back.view_names(), masked.view_names());
        prop_assert_eq!(back.content_hash(), masked.content_hash());
        for v in 0..masked.n_views() {
            prop_assert_eq!(back.view(v), masked.view(v));
        }
    }

    #[test]
    fn masks_are_reproducible(seed in 0u64..1000, fraction in 0.05f64..1.0) {
        let data = moons(60, 1);
        let a = split_labels(&data, fraction, seed).unwrap();
        prop_assert_eq!(&a, &split_labels(&data, fraction, seed).unwrap());
        prop_assert_eq!(a.labeled_indices.len(), ((fraction * 60.0).round() as usize).max(1));
        prop_assert!(a.labeled_indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn kernel_combination_is_linear(seed in 0u64..1000, nv in 1usize..4) {
        let mut rng = rng(seed);
        let views: Vec<DMatrix<f64>> =
            (0..nv).map(|_| DMatrix::from_fn(15, 3, |_, _| rng.random::<f64>())).collect();
        let grams: Vec<_> = views.iter().map(|v| gram(v, &KernelSpec::gaussian(0.7)).unwrap()).collect();
        let theta = random_simplex(nv, &mut rng);
        let combined = combine_kernels(&grams, &SimplexWeights::new(theta.clone()).unwrap()).unwrap();
        let mut direct = DMatrix::zeros(15, 15);
        for (g, t) in grams.iter().zip(&theta) {
            direct += g.matrix() * *t;
        }
        prop_assert!((combined.matrix() - direct).amax() < 1e-12);
    }

    #[test]
    fn duplicated_rows_have_equal_kernel_rows(seed in 0u64..1000) {
        let mut rng = rng(seed);
        let mut view = DMatrix::from_fn(12, 4, |_, _| rng.random::<f64>());
        let row = view.row(3).into_owned();
        view.set_row(7, &row);
        for spec in [KernelSpec::gaussian(0.5), KernelSpec::linear(), KernelSpec::polynomial(3, 1.0)] {
            let k = gram(&view, &spec).unwrap();
            prop_assert!((k.matrix().row(3) - k.matrix().row(7)).amax() < 1e-12);
        }
    }

    #[test]
    fn hessian_ignores_translation(seed in 0u64..1000, shift in -5.0f64..5.0) {
        let mut rng = rng(seed);
        let view = DMatrix::from_fn(40, 3, |_, _| rng.random::<f64>());
        let moved = view.map(|x| x + shift);
        let h = hessian_energy(&view, &knn(&view, 10).unwrap(), 2).unwrap();
        let g = hessian_energy(&moved, &knn(&moved, 10).unwrap(), 2).unwrap();
        prop_assert!((h.matrix() - g.matrix()).amax() < 1e-8 * h.matrix().amax().max(1.0));
    }

    #[test]
    fn hessian_is_local(seed in 0u64..1000) {
        let mut rng = rng(seed);
        let view = DMatrix::from_fn(40, 2, |_, _| rng.random::<f64>());
        let graph = knn(&view, 8).unwrap();
        let h = hessian_energy(&view, &graph, 2).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let shared = (0..40).any(|c| {
                    let hood = &graph.neighbors[c];
                    hood.contains(&i) && hood.contains(&j)
                });
                if !shared {
                    prop_assert_eq!(h.matrix()[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn ap_matches_threshold_sweep(seed in 0u64..10_000, n in 2usize..40) {
        let mut rng = rng(seed);
        let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 8.0).floor()).collect();
        let mut truth: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        truth[n - 1] = true;
        let got = average_precision(&RankedPredictions::new(scores.clone(), truth.clone()).unwrap()).unwrap();
        prop_assert!((got - brute_force_ap(&scores, &truth)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn kls_without_manifold_is_kernel_ridge(seed in 0u64..1000, l in 2usize..10, gamma in 1e-3f64..1.0) {
        let mut rng = rng(seed);
        let n = l + 6;
        let k = random_psd(n, &mut rng) + DMatrix::identity(n, n) * 0.05;
        let y = labels(l, &mut rng);
        let config = ObjectiveConfig { gamma_a: gamma, gamma_i: 0.0, ..ObjectiveConfig::default() };
        let alpha = fit_kls(&k, &DMatrix::zeros(n, n), &y, &config).unwrap();
        let fitted = (&k * alpha).rows(0, l).into_owned();
        let kll = k.view((0, 0), (l, l)).into_owned();
        let ridge = &kll
            * (&kll + DMatrix::identity(l, l) * (gamma * l as f64)).lu().solve(&DVector::from_column_slice(&y)).unwrap();
        prop_assert!((fitted - ridge).amax() < 1e-7);
    }

    #[test]
    fn smoothing_gap_shrinks_with_mu(seed in 0u64..1000) {
        let mut rng = rng(seed);
        let n = 8;
        let k = random_psd(n, &mut rng);
        let h = random_psd(n, &mut rng);
        let y = labels(5, &mut rng);
        let alpha = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        let mut config = ObjectiveConfig { loss: Loss::Hinge, ..ObjectiveConfig::default() };
        let exact = hinge_objective(&k, &h, &y, &alpha, &config);
        let mut last = f64::INFINITY;
        for mu in [1.0, 0.3, 0.1, 0.03, 0.01, 0.001] {
            config.mu = mu;
            let gap = exact - smoothed_objective(&k, &h, &y, &alpha, &config).unwrap();
            prop_assert!(gap >= -1e-12);
            prop_assert!(gap <= last + 1e-12);
            last = gap;
        }
    }
}

#[test]
fn sweeps_are_reproducible() {
    let data = moons(80, 5);
    let (train, test) = holdout_split(&data, 30, 5).unwrap();
    let config = SweepConfig {
        methods: ["mHesLS", "LapALS", "SVM@moons_b"]
            .iter()
            .map(|m| m.parse().unwrap())
            .collect(),
        fractions: vec![0.2],
        repeats: 2,
        base_seed: 3,
        ..SweepConfig::default()
    };
    let strip = |reports: Vec<mhr::eval::EvalReport>| -> Vec<mhr::eval::EvalReport> {
        reports
            .into_iter()
            .map(|mut r| {
                r.seconds = 0.0;
                r
            })
            .collect()
    };
    let first = strip(run_sweep(&train, &test, &config).unwrap());
    let second = strip(run_sweep(&train, &test, &config).unwrap());
    assert_eq!(first.len(), 6);
    assert_eq!(first, second);
}

#[test]
fn holdout_keeps_every_example_once() {
    let data = moons(50, 2);
    let (train, test) = holdout_split(&data, 20, 9).unwrap();
    assert_eq!((train.n(), test.n()), (30, 20));
    assert!(test.ground_truth().iter().all(|l| *l != Label::Unlabeled));
}
