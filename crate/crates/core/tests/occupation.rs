use std::f64::consts::PI;

use occlab_core::occupation::{
    disintegrate, exponent_comparison, integrability_check, level_set_mass_fraction,
    occupation_formula_residual, occupation_integral, transversal_density, DensityOptions,
    LevelGrid, OccupationMeasure, Profile, SingularFunction,
};
use occlab_core::quadrature::integrate;
use occlab_core::stats::pooled_stderr;
use occlab_core::{
    Error, Foliation, LevelFunction, Manifold, PathEnsemble, QuadraticVariationModel, Region,
    SdeModel, TimeGrid,
};

fn bm(dim: usize, x0: Vec<f64>, n_steps: usize, n_paths: usize, seed: u64) -> PathEnsemble {
    assert_eq!(x0.len(), dim);
    let grid = TimeGrid::new(1.0, n_steps).unwrap();
    PathEnsemble::new(SdeModel::standard_bm(x0), grid, n_paths, seed).unwrap()
}

/// `E L^a_1` of standard BM from 0: `E|B_1 - a| - |a|`.
fn bm_local_time_mean(a: f64) -> f64 {
    let pdf = (-0.5 * a * a).exp() / (2.0 * PI).sqrt();
    a * libm::erf(a / 2f64.sqrt()) + 2.0 * pdf - a.abs()
}

/// The band estimator's target at finite `eps`: the level average of `E L^a`.
fn smoothed_local_time_mean(a: f64, eps: f64) -> f64 {
    let r = integrate(
        &|u| bm_local_time_mean(u),
        a - eps,
        a + eps,
        1e-14,
        1e-13,
        200,
    );
    r.value / (2.0 * eps)
}

#[test]
fn constant_integrand_integrates_to_the_horizon() {
    let ens = bm(2, vec![0.0, 0.0], 1000, 20, 1);
    let an = QuadraticVariationModel::analytic(&ens.model);
    let full = Foliation::new(LevelFunction::Coordinate { index: 1, dim: 2 }, Region::Full);
    let r = occupation_integral(&ens, &an, &full, 0, &|_| 1.0, None).unwrap();
    for v in &r.estimate.per_path {
        assert!((v - 1.0).abs() < 1e-12);
    }
    let empty = Foliation::new(
        LevelFunction::Coordinate { index: 1, dim: 2 },
        Region::Empty,
    );
    let r = occupation_integral(&ens, &an, &empty, 0, &|_| 1.0, None).unwrap();
    assert_eq!(r.estimate.mean, 0.0);
}

#[test]
fn time_above_zero_is_half_the_horizon() {
    let ens = bm(1, vec![0.0], 1000, 10_000, 2);
    let an = QuadraticVariationModel::analytic(&ens.model);
    let fol = Foliation::coordinate(0, 1);
    let f = |x: &[f64]| if x[0] >= 0.0 { 1.0 } else { 0.0 };
    let r = occupation_integral(&ens, &an, &fol, 0, &f, None).unwrap();
    assert!((r.estimate.mean - 0.5).abs() < 3.0 * r.estimate.stderr);
}

#[test]
fn non_finite_integrand_is_an_error_unless_declared_singular() {
    let ens = bm(1, vec![0.0], 100, 2, 3);
    let an = QuadraticVariationModel::analytic(&ens.model);
    let fol = Foliation::coordinate(0, 1);
    let f = |x: &[f64]| 1.0 / x[0].abs().sqrt();
    assert!(matches!(
        occupation_integral(&ens, &an, &fol, 0, &f, None),
        Err(Error::NonFiniteIntegrand { .. })
    ));
    let on_zero = |x: &[f64]| x[0] == 0.0;
    let r = occupation_integral(&ens, &an, &fol, 0, &f, Some(&on_zero)).unwrap();
    assert_eq!(r.skipped, 2);
}

#[test]
fn one_dimensional_mass_conservation() {
    let eps = 0.01;
    let ens = bm(1, vec![0.0], 10_000, 1000, 4);
    let an = QuadraticVariationModel::analytic(&ens.model);
    // Levels sit half a spacing off the starting point.
    let grid = LevelGrid::new(-6.0 + 0.5 * eps, eps, 1200).unwrap();
    let d = transversal_density(
        &ens,
        &an,
        &Foliation::coordinate(0, 1),
        &grid,
        DensityOptions::new(0, eps),
    )
    .unwrap();
    assert!(
        ((d.integral() - 1.0) / 1.0).abs() < 1e-6,
        "{}",
        d.integral()
    );
    assert!(((d.integral() - d.mass.mean) / d.mass.mean).abs() < 1e-6);
    assert!(d.values.iter().all(|v| *v >= 0.0));
    let (lo, hi) = d.support.unwrap();
    for (a, v) in d.levels.iter().zip(&d.values) {
        if *a <= lo || *a >= hi {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn coverage_gap_is_rejected() {
    let ens = bm(1, vec![0.0], 10, 1, 0);
    let an = QuadraticVariationModel::analytic(&ens.model);
    let grid = LevelGrid::new(0.0, 0.02, 10).unwrap();
    let r = transversal_density(
        &ens,
        &an,
        &Foliation::coordinate(0, 1),
        &grid,
        DensityOptions::new(0, 0.01),
    );
    assert!(matches!(r, Err(Error::CoverageGap { .. })));
}

#[test]
fn frozen_path_has_zero_density() {
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let ens = PathEnsemble::new(SdeModel::frozen(vec![0.0, 0.0]), grid, 3, 0).unwrap();
    let an = QuadraticVariationModel::analytic(&ens.model);
    let lg = LevelGrid::covering(-1.0, 1.0, 0.1).unwrap();
    let d = transversal_density(
        &ens,
        &an,
        &Foliation::coordinate(1, 2),
        &lg,
        DensityOptions::new(0, 0.1),
    )
    .unwrap();
    assert!(d.values.iter().all(|v| *v == 0.0));
}

/// `L^a` of `phi = x_2` with `d<X^1>` weights is the local time of the
/// second coordinate; checked against the exact band-averaged Gaussian mean.
#[test]
fn hyperplane_density_matches_gaussian_local_time() {
    let eps = 0.05;
    let ens = bm(2, vec![0.0, 0.0], 10_000, 4000, 5);
    let an = QuadraticVariationModel::analytic(&ens.model);
    let grid = LevelGrid::new(-0.3, 0.05, 13).unwrap();
    let d = transversal_density(
        &ens,
        &an,
        &Foliation::coordinate(1, 2),
        &grid,
        DensityOptions::new(0, eps),
    )
    .unwrap();
    for a in [0.0, 0.3] {
        let (v, se) = d.at(a).unwrap();
        let oracle = smoothed_local_time_mean(a, eps);
        assert!(
            (v - oracle).abs() < 3.5 * se,
            "a={a}: {v} +- {se} vs {oracle}"
        );
    }
}

#[test]
fn bandwidth_halving_is_consistent() {
    let ens = bm(1, vec![0.0], 10_000, 10_000, 6);
    let an = QuadraticVariationModel::analytic(&ens.model);
    let grid = LevelGrid::new(-0.5, 0.02, 51).unwrap();
    let opts = DensityOptions::new(0, 0.02).with_richardson();
    let d = transversal_density(&ens, &an, &Foliation::coordinate(0, 1), &grid, opts).unwrap();
    let r = d.richardson.as_ref().unwrap();
    for m in 0..grid.len() {
        let pooled = pooled_stderr(d.stderr[m], r.half_stderr[m]);
        assert!((d.values[m] - r.half_values[m]).abs() < 3.0 * pooled);
    }
}

#[test]
fn disintegration_regroups_the_occupation_measure() {
    let ens = bm(2, vec![1.0, 0.0], 2000, 200, 7);
    let an = QuadraticVariationModel::analytic(&ens.model);
    let fol = Foliation::new(
        LevelFunction::SignedDistance(Manifold::unit_circle()),
        Region::ComplementOfBall {
            center: vec![0.0, 0.0],
            radius: 0.1,
        },
    );
    let mu = OccupationMeasure::build(&ens, &an, &fol, 0).unwrap();
    let f = |x: &[f64]| x[0];
    let direct = occupation_integral(&ens, &an, &fol, 0, &f, None)
        .unwrap()
        .estimate
        .mean;
    let dis = disintegrate(&mu, &fol, 0.0, 0.05).unwrap();
    let rec = dis.reconstruct(f);
    assert!(((rec - direct) / direct).abs() < 1e-12, "{rec} vs {direct}");
    assert!(((dis.reconstruct(|_| 1.0) - mu.total_mass()) / mu.total_mass()).abs() < 1e-12);
    let shifted = disintegrate(&mu, &fol, 0.025, 0.05).unwrap().reconstruct(f);
    assert!(((shifted - rec) / rec).abs() < 0.02);

    // Indicator of one slab recovers its nu-weight.
    let (m, slab) = dis.slabs.iter().find(|(_, s)| s.nu > 0.0).unwrap();
    let (origin, da) = (dis.origin, dis.spacing);
    let ind = |x: &[f64]| {
        let y = Manifold::unit_circle().signed_distance_global(x).unwrap();
        if occlab_core::occupation::slab_index(y, origin, da) == *m {
            1.0
        } else {
            0.0
        }
    };
    assert!(((dis.reconstruct(ind) - slab.nu) / slab.nu).abs() < 1e-12);
}

#[test]
fn occupation_formula_residuals() {
    let ens = bm(1, vec![0.0], 10_000, 500, 8);
    let an = QuadraticVariationModel::analytic(&ens.model);
    let fol = Foliation::coordinate(0, 1);
    let grid = LevelGrid::new(-6.0 + 0.005, 0.01, 1200).unwrap();
    let r = occupation_formula_residual(&ens, &an, &fol, 0, &|_| 1.0, 0.01, &grid, 0.013).unwrap();
    assert!(r.residual < 0.02, "{}", r.residual);
    let r = occupation_formula_residual(&ens, &an, &fol, 0, &|_| 0.0, 0.01, &grid, 0.013).unwrap();
    assert_eq!(r.residual, 0.0);
}

#[test]
fn sphere_foliation_residual_and_finer_step_oracle() {
    let fol = Foliation::new(
        LevelFunction::SquaredNorm {
            center: vec![0.0, 0.0],
        },
        Region::Full,
    );
    let f = |x: &[f64]| (x[0] * x[0] + x[1] * x[1]).sqrt();
    let grid = LevelGrid::new(0.005, 0.01, 1500).unwrap();
    let coarse = bm(2, vec![1.0, 0.0], 2500, 1000, 9);
    let an = QuadraticVariationModel::analytic(&coarse.model);
    let r = occupation_formula_residual(&coarse, &an, &fol, 0, &f, 0.01, &grid, 0.017).unwrap();
    assert!(r.residual < 0.05, "{}", r.residual);
    let fine = bm(2, vec![1.0, 0.0], 10_000, 1000, 10);
    let lhs_fine = occupation_integral(&fine, &an, &fol, 0, &f, None)
        .unwrap()
        .estimate;
    let pooled = pooled_stderr(r.lhs.stderr, lhs_fine.stderr);
    assert!((r.lhs.mean - lhs_fine.mean).abs() < 3.0 * pooled);
}

#[test]
fn zero_level_set_mass_vanishes_linearly() {
    let ens = bm(1, vec![0.0], 10_000, 1000, 11);
    let an = QuadraticVariationModel::analytic(&ens.model);
    let deltas = [1e-1, 1e-2, 1e-3];
    let fr = level_set_mass_fraction(&ens, &an, &Foliation::coordinate(0, 1), 0, &deltas).unwrap();
    for k in 0..2 {
        let ratio = (fr[k] / deltas[k]) / (fr[k + 1] / deltas[k + 1]);
        assert!((0.3..=3.0).contains(&ratio), "{fr:?}");
    }
}

#[test]
fn integrability_certificates() {
    let c = Manifold::unit_circle();
    let half = integrability_check(
        &SingularFunction::transversal(c.clone(), Profile::Power { p: 0.5 }),
        1.0,
    );
    assert!(half.pass);
    assert!((half.integral - 2.0).abs() < 1e-8);
    let one = integrability_check(
        &SingularFunction::transversal(c.clone(), Profile::Power { p: 1.0 }),
        1.0,
    );
    assert!(!one.pass);
    let log = integrability_check(&SingularFunction::transversal(c, Profile::LogAbs), 1.0);
    assert!(log.pass);
    assert!((log.integral - 1.0).abs() < 1e-8);
    for p in [0.1, 0.5, 0.9, 0.99, 1.0, 1.5] {
        let cert = integrability_check(
            &SingularFunction::transversal(Manifold::unit_circle(), Profile::Power { p }),
            1.0,
        );
        assert_eq!(cert.pass, p < 1.0, "p={p}");
    }
}

#[test]
fn exponent_table_for_sphere_in_three_dimensions() {
    let e = exponent_comparison(0.9, 3);
    assert!(e.transversal_pass);
    assert!((e.q_required_above - 1.5).abs() < 1e-12);
    assert!((e.q_integrable_below - 1.0 / 0.9).abs() < 1e-12);
    assert!(!e.lq_route_available);
}
