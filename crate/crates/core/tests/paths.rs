use occlab_core::linalg::Matrix;
use occlab_core::paths::{fold_paths, simulate_path, simulate_paths};
use occlab_core::qv::{eta_from_tensor, tensor_psd_margin};
use occlab_core::stats::mean_stderr;
use occlab_core::{PathEnsemble, PathSource, QuadraticVariationModel, SdeModel, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn grid_is_uniform_and_closed() {
    let g = TimeGrid::new(2.0, 8).unwrap();
    let t = g.times();
    assert_eq!(t.len(), 9);
    assert_eq!(t[0], 0.0);
    assert_eq!(t[8], 2.0);
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    assert!(TimeGrid::new(1.0, 0).is_err());
}

#[test]
fn single_step_increment_has_unit_variance() {
    let model = SdeModel::standard_bm(vec![0.0]);
    let grid = TimeGrid::new(1.0, 1).unwrap();
    let paths = simulate_paths(&model, &grid, 20_000, 5).unwrap();
    let sq: Vec<f64> = paths
        .iter()
        .map(|p| {
            let d = p.state(1)[0] - p.state(0)[0];
            d * d
        })
        .collect();
    let (m, se) = mean_stderr(&sq);
    assert!((m - 1.0).abs() < 4.0 * se, "{m} +- {se}");
}

#[test]
fn frozen_dynamics_stay_put() {
    let model = SdeModel::frozen(vec![3.0, 4.0]);
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let p = simulate_path(&model, &grid, 1, 0, false).unwrap();
    for k in 0..=1000 {
        assert_eq!(p.state(k), &[3.0, 4.0]);
    }
}

#[test]
fn mean_square_endpoint_is_dimension_times_horizon() {
    let model = SdeModel::standard_bm(vec![0.0, 0.0]);
    let grid = TimeGrid::new(1.0, 10_000).unwrap();
    let ens = PathEnsemble::new(model, grid, 10_000, 17).unwrap();
    let vals = fold_paths(
        &ens,
        Vec::new(),
        |_, p| {
            let x = p.final_state();
            Ok(x[0] * x[0] + x[1] * x[1])
        },
        |mut v, _, r| {
            v.push(r);
            v
        },
    )
    .unwrap();
    let (m, se) = mean_stderr(&vals);
    assert!((m - 2.0).abs() < 3.0 * se, "{m} +- {se}");
}

#[test]
fn regeneration_is_bit_identical() {
    let model = SdeModel::standard_bm(vec![0.5, -0.5]);
    let grid = TimeGrid::new(1.0, 500).unwrap();
    let a = simulate_path(&model, &grid, 99, 7, false).unwrap();
    let b = simulate_path(&model, &grid, 99, 7, false).unwrap();
    assert_eq!(a.states, b.states);
    let ens = PathEnsemble::new(model, grid, 10, 99).unwrap();
    assert_eq!(ens.path(7).unwrap().states, a.states);
    let c = simulate_path(&ens.model, &grid, 99, 8, false).unwrap();
    assert_ne!(c.states, a.states);
}

#[test]
fn analytic_and_realized_quadratic_variation() {
    let model = SdeModel::standard_bm(vec![0.0, 0.0]);
    let grid = TimeGrid::new(1.0, 100_000).unwrap();
    let p = simulate_path(&model, &grid, 3, 0, false).unwrap();
    let an = QuadraticVariationModel::analytic(&model);
    assert_eq!(an.increment(&p, 10, 0, 0).unwrap(), grid.dt());
    assert_eq!(an.increment(&p, 10, 0, 1).unwrap(), 0.0);
    let realized: f64 = (0..grid.n_steps())
        .map(|k| {
            QuadraticVariationModel::Realized
                .increment(&p, k, 0, 0)
                .unwrap()
        })
        .sum();
    assert!((realized - 1.0).abs() < 0.02, "{realized}");
    assert!(an.increment(&p, 0, 0, 2).is_err());

    let grid = TimeGrid::new(1.0, 10_000).unwrap();
    let p = simulate_path(&model, &grid, 4, 0, false).unwrap();
    for i in 0..2 {
        let r = *QuadraticVariationModel::Realized
            .cumulative(&p, i, i)
            .unwrap()
            .last()
            .unwrap();
        let a = *an.cumulative(&p, i, i).unwrap().last().unwrap();
        assert!(((r - a) / a).abs() < 0.05);
    }
}

#[test]
fn eta_expansion() {
    let dt = 1e-3;
    // N = 1: <X> + <2X> = 5 dt
    assert!((eta_from_tensor(&[dt], 1) - 5.0 * dt).abs() < 1e-18);
    // N = 2: 2 dt + (4 + 2 + 2 + 4) dt
    assert!((eta_from_tensor(&[dt, 0.0, 0.0, dt], 2) - 14.0 * dt).abs() < 1e-18);
    assert_eq!(eta_from_tensor(&[0.0; 4], 2), 0.0);
}

#[test]
fn diffusion_tensor_is_symmetric_psd_for_catalog_models() {
    let sigma = Matrix::from_rows(&[vec![1.0, 0.5], vec![-0.3, 2.0]]).unwrap();
    let models = [
        SdeModel::standard_bm(vec![0.0, 0.0]),
        SdeModel::frozen(vec![0.0, 0.0]),
        SdeModel::drifted_bm(vec![0.0, 0.0], vec![1.0, -1.0], sigma.clone()).unwrap(),
        SdeModel::linear(
            vec![0.0, 0.0],
            Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.2, -0.5]]).unwrap(),
            vec![0.0, 1.0],
            sigma,
        )
        .unwrap(),
        SdeModel::singular_radial_drift(vec![1.0, 0.0]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for m in &models {
        for _ in 0..1000 {
            let x = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let (min_ev, asym) = tensor_psd_margin(m, 0.3, &x);
            assert!(min_ev >= -1e-12, "{}: {min_ev}", m.tag());
            assert!(asym < 1e-15);
        }
    }
}

#[test]
fn singular_drift_clamp_events_are_recorded() {
    let model = SdeModel::singular_radial_drift(vec![0.0, 0.0]);
    let grid = TimeGrid::new(1.0, 10_000).unwrap();
    let p = simulate_path(&model, &grid, 2, 0, false).unwrap();
    assert!(!p.is_exploded());
    assert!(p.clamp_events < grid.n_steps());
}
