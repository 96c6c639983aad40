//! Scenario pipelines and their gates.
//!
//! Each experiment kind runs its estimators, fills a JSON `estimates` object
//! and plot-ready tables, then evaluates the gates listed in the scenario.
//! Tolerances always come from the scenario.

use std::f64::consts::PI;
use std::time::Instant;

use occlab_core::localtime::{
    conjecture_probe, geometric_local_time, local_time_1d, path_geometric_band, path_graph_band,
    verify_l_equals_symmetric, LocalTimeKind, LocalTimeOptions, Scalar,
};
use occlab_core::occupation::{
    exponent_comparison, integrability_check, occupation_formula_residual, occupation_integral,
    transversal_density, DensityOptions, Profile, SingularFunction,
};
use occlab_core::paths::fold_paths;
use occlab_core::quadrature::integrate;
use occlab_core::stats::{mean_stderr, pooled_stderr, EnsembleEstimate};
use occlab_core::{
    localtime, Foliation, GoodExtension, GraphSurface, Manifold, PathEnsemble,
    QuadraticVariationModel, SdeModel, TimeGrid,
};
use serde_json::{json, Value};

use crate::config::{
    ExperimentConfig, GateConfig, GateName, LevelConfig, QvMode, ScenarioConfig, TestFunction,
};
use crate::report::{gates_table, input_hash, GateOutcome, RunReport, Table};
use crate::validate::{validate, Violation};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("scenario `{scenario}` failed validation:\n{}", list(.violations))]
    Invalid {
        scenario: String,
        violations: Vec<Violation>,
    },
    #[error("scenario `{scenario}`: {stage}: {source}")]
    Estimator {
        scenario: String,
        stage: String,
        source: occlab_core::Error,
    },
    #[error("scenario `{scenario}`: {message}")]
    Setup { scenario: String, message: String },
}

fn list(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A finished run: the report plus the CSV tables (gates table included).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub tables: Vec<Table>,
}

struct Outcome {
    estimates: Value,
    gates: Vec<GateOutcome>,
    tables: Vec<Table>,
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    model: SdeModel,
    ens: PathEnsemble,
}

impl Ctx<'_> {
    fn qv(&self) -> QuadraticVariationModel<'_> {
        match self.cfg.sim.qv {
            QvMode::Analytic => QuadraticVariationModel::analytic(&self.model),
            QvMode::Realized => QuadraticVariationModel::Realized,
        }
    }

    fn err(&self, stage: impl Into<String>) -> impl FnOnce(occlab_core::Error) -> RunError {
        let scenario = self.cfg.name.clone();
        let stage = stage.into();
        move |source| RunError::Estimator {
            scenario,
            stage,
            source,
        }
    }

    fn setup(&self, message: impl Into<String>) -> RunError {
        RunError::Setup {
            scenario: self.cfg.name.clone(),
            message: message.into(),
        }
    }

    fn manifold(&self) -> Result<Manifold, RunError> {
        self.cfg
            .build_manifold()
            .map_err(self.err("manifold"))?
            .ok_or_else(|| self.setup("missing [manifold]"))
    }

    /// An independent ensemble for reference runs.
    fn ensemble(&self, model: SdeModel, dt: f64, stream: u64) -> Result<PathEnsemble, RunError> {
        let grid = TimeGrid::from_step(self.cfg.sim.horizon, dt).map_err(self.err("time grid"))?;
        PathEnsemble::new(
            model,
            grid,
            self.cfg.sim.n_paths,
            derived_seed(self.cfg.sim.seed, stream),
        )
        .map_err(self.err("reference ensemble"))
    }
}

/// Seed of the `stream`-th auxiliary ensemble of a run.
pub fn derived_seed(seed: u64, stream: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream)
}

/// Validates, runs and gates one scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    let violations = validate(cfg);
    if !violations.is_empty() {
        return Err(RunError::Invalid {
            scenario: cfg.name.clone(),
            violations,
        });
    }
    let start = Instant::now();
    let model = cfg.model.build().map_err(|source| RunError::Estimator {
        scenario: cfg.name.clone(),
        stage: "model".into(),
        source,
    })?;
    let grid =
        TimeGrid::from_step(cfg.sim.horizon, cfg.sim.dt).map_err(|source| RunError::Estimator {
            scenario: cfg.name.clone(),
            stage: "time grid".into(),
            source,
        })?;
    let ens = PathEnsemble::new(model.clone(), grid, cfg.sim.n_paths, cfg.sim.seed).map_err(
        |source| RunError::Estimator {
            scenario: cfg.name.clone(),
            stage: "ensemble".into(),
            source,
        },
    )?;
    let ctx = Ctx { cfg, model, ens };
    let outcome = match &cfg.experiment {
        ExperimentConfig::Density {
            probe_levels,
            test_function,
            bin_spacing,
            refine,
            windows,
        } => density(
            &ctx,
            probe_levels,
            test_function.as_ref(),
            *bin_spacing,
            *refine,
            *windows,
        )?,
        ExperimentConfig::LEqualsL { levels, inner } => l_equals_l(&ctx, levels, *inner)?,
        ExperimentConfig::GraphScaling { slopes } => graph_scaling(&ctx, slopes)?,
        ExperimentConfig::Conjecture => conjecture(&ctx)?,
        ExperimentConfig::SingularSde {
            deltas,
            reference_refine,
            checkpoints,
        } => singular_sde(&ctx, deltas, *reference_refine, *checkpoints)?,
        ExperimentConfig::Integrability {
            profile,
            radius,
            exponent_dims,
        } => integrability(&ctx, *profile, *radius, exponent_dims)?,
    };
    let mut tables = outcome.tables;
    tables.push(gates_table(&outcome.gates));
    let report = RunReport {
        scenario: cfg.name.clone(),
        config: cfg.clone(),
        estimates: outcome.estimates,
        gates: outcome.gates,
        seed: cfg.sim.seed,
        input_hash: input_hash(cfg),
        wallclock_s: start.elapsed().as_secs_f64(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    Ok(RunOutput { report, tables })
}

fn est(e: &EnsembleEstimate) -> Value {
    json!({ "mean": e.mean, "stderr": e.stderr, "n": e.n })
}

/// `|diff| / se`, with `0/0 = 0`.
fn zscore(diff: f64, se: f64) -> f64 {
    let d = diff.abs();
    if d == 0.0 {
        0.0
    } else if se > 0.0 {
        d / se
    } else {
        f64::INFINITY
    }
}

/// Running maximum with the detail of its arg-max.
#[derive(Default)]
struct Worst {
    value: f64,
    detail: String,
    pass: bool,
    seen: bool,
}

impl Worst {
    fn new() -> Self {
        Self {
            pass: true,
            ..Self::default()
        }
    }

    fn add(&mut self, value: f64, ok: bool, detail: impl FnOnce() -> String) {
        self.pass &= ok;
        if !self.seen || value > self.value || value.is_nan() {
            self.value = value;
            self.detail = detail();
        }
        self.seen = true;
    }

    fn outcome(self, gate: &GateConfig) -> GateOutcome {
        if !self.seen {
            return GateOutcome::skipped(
                gate.name.as_str(),
                gate.tolerance,
                "nothing to compare".into(),
            );
        }
        GateOutcome::check(
            gate.name.as_str(),
            self.value,
            gate.tolerance,
            self.pass,
            self.detail,
        )
    }
}

fn tolerance(cfg: &ScenarioConfig, name: GateName) -> Option<f64> {
    cfg.gate(name).map(|g| g.tolerance)
}

/// `E L^a_T` of a standard Brownian coordinate started at `x0`:
/// `E|B_T - a| - |x0 - a|`.
pub fn bm_local_time_mean(a: f64, x0: f64, t: f64) -> f64 {
    let s = t.sqrt();
    let u = (a - x0) / s;
    let pdf = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
    s * (u * libm::erf(u / 2f64.sqrt()) + 2.0 * pdf - u.abs())
}

/// The band estimator's target: `E L^u_T` averaged over `u` in `(a - eps, a + eps)`.
pub fn bm_band_local_time_mean(a: f64, eps: f64, x0: f64, t: f64) -> f64 {
    let f = |u: f64| bm_local_time_mean(u, x0, t);
    // The kink at u = x0 is split off so the quadrature sees smooth pieces.
    let (lo, hi) = (a - eps, a + eps);
    let v = if lo < x0 && x0 < hi {
        integrate(&f, lo, x0, 1e-15, 1e-13, 200).value
            + integrate(&f, x0, hi, 1e-15, 1e-13, 200).value
    } else {
        integrate(&f, lo, hi, 1e-15, 1e-13, 200).value
    };
    v / (2.0 * eps)
}

fn density(
    ctx: &Ctx<'_>,
    probe_levels: &[f64],
    test_function: Option<&TestFunction>,
    bin_spacing: Option<f64>,
    refine: Option<usize>,
    windows: Option<usize>,
) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let fol = cfg.build_foliation().map_err(|m| ctx.setup(m))?;
    let qv = ctx.qv();
    let x0 = cfg.model.x0();
    let phi0 = fol.value(x0).unwrap_or(0.0);
    let comp = cfg.estimator.component;
    let horizon = ctx.ens.grid.horizon();
    let oracle_x0 = match cfg.foliation.as_ref().map(|f| &f.level) {
        Some(LevelConfig::Coordinate { index }) => Some(x0[*index]),
        _ => None,
    };

    let mut dens_t = Table::new(
        "density.csv",
        &[
            "bandwidth",
            "level",
            "value",
            "stderr",
            "half_value",
            "half_stderr",
        ],
    );
    let mut lt_t = Table::new(
        "local_time.csv",
        &[
            "kind",
            "level",
            "value",
            "stderr",
            "bandwidth",
            "crosscheck",
        ],
    );
    let mut mass_w = Worst::new();
    let mut oracle_w = Worst::new();
    let mut bw_w = Worst::new();
    let mut zero_w = Worst::new();
    let mut per_eps = Vec::new();
    let k_oracle = tolerance(cfg, GateName::LocalTimeOracle);
    let k_bw = tolerance(cfg, GateName::BandwidthConsistency);
    let mass_tol = tolerance(cfg, GateName::MassConservation).unwrap_or(0.0);
    let zero_tol = tolerance(cfg, GateName::AllZero).unwrap_or(0.0);

    for &eps in &cfg.estimator.eps {
        let grid = cfg.level_grid(eps, phi0).map_err(ctx.err("level grid"))?;
        let d = transversal_density(
            &ctx.ens,
            &qv,
            &fol,
            &grid,
            DensityOptions::new(comp, eps).with_richardson(),
        )
        .map_err(ctx.err(format!("transversal density at ε = {eps}")))?;
        let rich = d.richardson.as_ref().expect("richardson requested");
        for m in 0..d.levels.len() {
            dens_t.push(vec![
                eps.into(),
                d.levels[m].into(),
                d.values[m].into(),
                d.stderr[m].into(),
                rich.half_values[m].into(),
                rich.half_stderr[m].into(),
            ]);
        }
        let integral = d.integral();
        let mass = d.mass.mean;
        let rel = if mass == 0.0 {
            if integral == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (integral - mass).abs() / mass.abs()
        };
        mass_w.add(rel, rel <= mass_tol, || {
            format!("ε = {eps}: integral {integral:.12} vs in-region mass {mass:.12}")
        });
        let max_abs = d
            .values
            .iter()
            .chain([&mass, &integral])
            .fold(0.0f64, |m, v| m.max(v.abs()));
        zero_w.add(max_abs, max_abs <= zero_tol, || {
            format!("ε = {eps}: largest density or mass {max_abs}")
        });

        let mut probes = Vec::new();
        for &a in probe_levels {
            let m =
                (((a - grid.start) / grid.spacing).round().max(0.0) as usize).min(grid.len() - 1);
            let level_m = d.levels[m];
            lt_t.push(vec![
                "transversal".into(),
                level_m.into(),
                d.values[m].into(),
                d.stderr[m].into(),
                eps.into(),
                crate::report::Cell::Empty,
            ]);
            let lt = local_time_1d(
                &ctx.ens,
                &qv,
                Scalar::Level(&fol.level),
                a,
                eps,
                LocalTimeOptions {
                    kind: LocalTimeKind::Symmetric1d,
                    tanaka: true,
                    keep_per_path: false,
                },
            )
            .map_err(ctx.err(format!("local time at level {a}, ε = {eps}")))?;
            let tan = lt.crosscheck.clone().expect("tanaka requested");
            lt_t.push(vec![
                LocalTimeKind::Symmetric1d.name().into(),
                a.into(),
                lt.estimate.mean.into(),
                lt.estimate.stderr.into(),
                eps.into(),
                tan.mean.into(),
            ]);
            let lt_abs = lt.estimate.mean.abs().max(tan.mean.abs());
            zero_w.add(lt_abs, lt_abs <= zero_tol, || {
                format!("ε = {eps}: local time at {a} is {}", lt.estimate.mean)
            });

            let mut probe = json!({
                "level": a,
                "nearest_grid_level": level_m,
                "transversal": { "mean": d.values[m], "stderr": d.stderr[m] },
                "transversal_half_bandwidth": { "mean": rich.half_values[m], "stderr": rich.half_stderr[m] },
                "symmetric_local_time": est(&lt.estimate),
                "tanaka": est(&tan),
                "band_tanaka_mean_abs_diff": lt.crosscheck_mean_abs_diff,
            });
            if let (Some(k), Some(x0i)) = (k_oracle, oracle_x0) {
                let exact = bm_local_time_mean(a, x0i, horizon);
                let band = bm_band_local_time_mean(a, eps, x0i, horizon);
                let band_m = bm_band_local_time_mean(level_m, eps, x0i, horizon);
                let pooled = pooled_stderr(lt.estimate.stderr, tan.stderr);
                let checks = [
                    (
                        "band estimate vs band-averaged oracle",
                        lt.estimate.mean,
                        band,
                        lt.estimate.stderr,
                    ),
                    ("Tanaka vs exact oracle", tan.mean, exact, tan.stderr),
                    (
                        "band estimate vs exact oracle, pooled s.e.",
                        lt.estimate.mean,
                        exact,
                        pooled,
                    ),
                    (
                        "transversal density vs band-averaged oracle",
                        d.values[m],
                        band_m,
                        d.stderr[m],
                    ),
                ];
                for (what, v, o, se) in checks {
                    let z = zscore(v - o, se);
                    oracle_w.add(z, z <= k, || {
                        format!("ε = {eps}, a = {a}: {what}: {v:.6} vs {o:.6} ({z:.2} s.e.)")
                    });
                }
                probe["oracle"] =
                    json!({ "exact": exact, "band_averaged": band, "pooled_stderr": pooled });
            }
            if let Some(k) = k_bw {
                let pooled = pooled_stderr(d.stderr[m], rich.half_stderr[m]);
                let z = zscore(d.values[m] - rich.half_values[m], pooled);
                bw_w.add(z, z <= k, || {
                    format!(
                        "level {level_m}: ε = {eps} gives {:.6}, ε/2 gives {:.6} ({z:.2} s.e.)",
                        d.values[m], rich.half_values[m]
                    )
                });
            }
            probes.push(probe);
        }
        per_eps.push(json!({
            "bandwidth": eps,
            "levels": { "start": grid.start, "spacing": grid.spacing, "count": grid.len() },
            "integral": integral,
            "mass": est(&d.mass),
            "relative_mass_error": rel,
            "support": d.support.map(|(lo, hi)| vec![lo, hi]),
            "probes": probes,
        }));
    }

    let mut estimates = json!({
        "horizon": horizon,
        "phi_at_x0": phi0,
        "component": comp,
        "densities": per_eps,
    });

    let mut residual_value = None;
    if let (Some(tf), Some(bin)) = (test_function, bin_spacing) {
        let eps = cfg.estimator.eps[0];
        let grid = cfg.level_grid(eps, phi0).map_err(ctx.err("level grid"))?;
        let f = |x: &[f64]| tf.eval(x);
        let r = occupation_formula_residual(&ctx.ens, &qv, &fol, comp, &f, eps, &grid, bin)
            .map_err(ctx.err("occupation formula residual"))?;
        let mut entry = json!({
            "lhs": est(&r.lhs),
            "rhs": r.rhs,
            "residual": r.residual,
            "bandwidth": r.bandwidth,
            "density_spacing": r.density_spacing,
            "bin_spacing": r.bin_spacing,
        });
        if let Some(refine) = refine {
            let fine = ctx.ensemble(ctx.model.clone(), cfg.sim.dt / refine as f64, 1)?;
            let fine_qv = match cfg.sim.qv {
                QvMode::Analytic => QuadraticVariationModel::analytic(&ctx.model),
                QvMode::Realized => QuadraticVariationModel::Realized,
            };
            let lhs_fine = occupation_integral(&fine, &fine_qv, &fol, comp, &f, None)
                .map_err(ctx.err("finer-step left-hand side"))?
                .estimate
                .strip();
            let pooled = pooled_stderr(r.lhs.stderr, lhs_fine.stderr);
            entry["finer_step_lhs"] = json!({
                "refine": refine,
                "lhs": est(&lhs_fine),
                "difference_in_pooled_stderr": zscore(r.lhs.mean - lhs_fine.mean, pooled),
            });
        }
        residual_value = Some(r.residual);
        estimates["occupation_formula"] = entry;
    }

    let mut control = None;
    if windows.is_some() || cfg.gate(GateName::Nondegeneracy).is_some() {
        let c = localtime::control_diagnostics(&ctx.ens, &qv, &fol, windows.unwrap_or(10))
            .map_err(ctx.err("control diagnostics"))?;
        estimates["control"] = serde_json::to_value(&c).expect("serializable");
        control = Some(c);
    }

    let mut gates = Vec::new();
    for g in &cfg.gates {
        gates.push(match g.name {
            GateName::MassConservation => std::mem::replace(&mut mass_w, Worst::new()).outcome(g),
            GateName::AllZero => std::mem::replace(&mut zero_w, Worst::new()).outcome(g),
            GateName::LocalTimeOracle => std::mem::replace(&mut oracle_w, Worst::new()).outcome(g),
            GateName::BandwidthConsistency => std::mem::replace(&mut bw_w, Worst::new()).outcome(g),
            GateName::OccupationResidual => {
                let r = residual_value.expect("validated");
                GateOutcome::check(
                    g.name.as_str(),
                    r,
                    g.tolerance,
                    r < g.tolerance,
                    format!("relative residual |LHS - RHS| / |LHS| = {r:.3e}"),
                )
            }
            GateName::Nondegeneracy => {
                let c = control.as_ref().expect("computed");
                GateOutcome::check(
                    g.name.as_str(),
                    c.floor,
                    g.tolerance,
                    !c.violation && c.floor > g.tolerance,
                    format!(
                        "inf grad phi^T g grad phi / dt = {} over {} in-region steps",
                        c.floor, c.in_region_steps
                    ),
                )
            }
            _ => unreachable!("validated gate {}", g.name),
        });
    }
    Ok(Outcome {
        estimates,
        gates,
        tables: vec![dens_t, lt_t],
    })
}

fn l_equals_l(ctx: &Ctx<'_>, levels: &[f64], inner: f64) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let manifold = ctx.manifold()?;
    let ext = GoodExtension::new(manifold.clone(), inner).map_err(ctx.err("good extension"))?;
    let qv = QuadraticVariationModel::analytic(&ctx.model);
    let mut lt_t = Table::new(
        "local_time.csv",
        &[
            "kind",
            "level",
            "value",
            "stderr",
            "bandwidth",
            "crosscheck",
        ],
    );
    let mut cmp_t = Table::new(
        "comparisons.csv",
        &[
            "bandwidth",
            "level",
            "transversal",
            "transversal_stderr",
            "symmetric",
            "symmetric_stderr",
            "tanaka",
            "mean_abs_diff",
            "pooled_stderr",
            "half_transversal",
            "half_symmetric",
            "geometric",
            "geometric_stderr",
            "both_zero",
        ],
    );
    let mut sym_w = Worst::new();
    let mut neg_w = Worst::new();
    let mut geo_w = Worst::new();
    let k_sym = tolerance(cfg, GateName::LEqualsSymmetric).unwrap_or(f64::INFINITY);
    let neg_tol = tolerance(cfg, GateName::NegativeLevelsZero).unwrap_or(0.0);
    let k_geo = tolerance(cfg, GateName::LEqualsGeometric).unwrap_or(f64::INFINITY);
    let mut per_eps = Vec::new();

    for &eps in &cfg.estimator.eps {
        let rep = verify_l_equals_symmetric(&ctx.ens, &qv, &ext, levels, eps)
            .map_err(ctx.err(format!("transversal vs symmetric local time at ε = {eps}")))?;
        let mut entries = Vec::new();
        for c in &rep.levels {
            let a = c.level;
            let geo = if a == 0.0 {
                Some(geometric_local_time(&ctx.ens, &qv, &manifold, eps, false))
            } else if a > 0.0 {
                let leaf = Manifold::distance_level(manifold.clone(), a)
                    .map_err(ctx.err(format!("level set at {a}")))?;
                Some(geometric_local_time(&ctx.ens, &qv, &leaf, eps, false))
            } else {
                None
            }
            .transpose()
            .map_err(ctx.err(format!("geometric local time at level {a}, ε = {eps}")))?;

            lt_t.push(vec![
                "transversal".into(),
                a.into(),
                c.transversal.mean.into(),
                c.transversal.stderr.into(),
                eps.into(),
                c.tanaka.mean.into(),
            ]);
            lt_t.push(vec![
                LocalTimeKind::Symmetric1d.name().into(),
                a.into(),
                c.symmetric.mean.into(),
                c.symmetric.stderr.into(),
                eps.into(),
                c.tanaka.mean.into(),
            ]);
            if let Some(g) = &geo {
                lt_t.push(vec![
                    LocalTimeKind::Geometric.name().into(),
                    a.into(),
                    g.estimate.mean.into(),
                    g.estimate.stderr.into(),
                    eps.into(),
                    g.crosscheck.as_ref().map(|e| e.mean).into(),
                ]);
            }
            cmp_t.push(vec![
                eps.into(),
                a.into(),
                c.transversal.mean.into(),
                c.transversal.stderr.into(),
                c.symmetric.mean.into(),
                c.symmetric.stderr.into(),
                c.tanaka.mean.into(),
                c.mean_abs_diff.into(),
                c.pooled_stderr.into(),
                c.half_transversal.mean.into(),
                c.half_symmetric.mean.into(),
                geo.as_ref().map(|g| g.estimate.mean).into(),
                geo.as_ref().map(|g| g.estimate.stderr).into(),
                c.both_zero.into(),
            ]);

            if a > 0.0 {
                let z = zscore(c.mean_abs_diff, c.pooled_stderr);
                sym_w.add(z, c.agrees_within(k_sym), || {
                    format!("ε = {eps}, a = {a}: per-path mean |difference| {:.3e} ({z:.3} pooled s.e.)", c.mean_abs_diff)
                });
                if let Some(g) = &geo {
                    let pooled = pooled_stderr(c.transversal.stderr, g.estimate.stderr);
                    let z = zscore(c.transversal.mean - g.estimate.mean, pooled);
                    geo_w.add(z, z <= k_geo, || {
                        format!(
                            "ε = {eps}, a = {a}: transversal {:.6} vs geometric {:.6} ({z:.3} pooled s.e.)",
                            c.transversal.mean, g.estimate.mean
                        )
                    });
                }
            } else if a < 0.0 {
                let m = c.transversal.mean.abs().max(c.symmetric.mean.abs());
                neg_w.add(m, c.both_zero || m <= neg_tol, || {
                    format!(
                        "ε = {eps}, a = {a}: both estimators identically zero: {}",
                        c.both_zero
                    )
                });
            }
            entries.push(json!({
                "level": a,
                "gated": a != 0.0,
                "transversal": est(&c.transversal),
                "symmetric": est(&c.symmetric),
                "tanaka": est(&c.tanaka),
                "mean_abs_diff": c.mean_abs_diff,
                "pooled_stderr": c.pooled_stderr,
                "half_transversal": est(&c.half_transversal),
                "half_symmetric": est(&c.half_symmetric),
                "both_zero": c.both_zero,
                "geometric": geo.as_ref().map(|g| json!({
                    "estimate": est(&g.estimate),
                    "dt_form": g.crosscheck.as_ref().map(est),
                    "mean_abs_diff_to_dt_form": g.crosscheck_mean_abs_diff,
                })),
            }));
        }
        per_eps.push(json!({
            "bandwidth": eps,
            "band": rep.band,
            "paths_exiting_band": rep.paths_exiting_band,
            "n_paths": rep.n_paths,
            "levels": entries,
        }));
    }

    let mut gates = Vec::new();
    for g in &cfg.gates {
        let w = match g.name {
            GateName::LEqualsSymmetric => &mut sym_w,
            GateName::NegativeLevelsZero => &mut neg_w,
            GateName::LEqualsGeometric => &mut geo_w,
            _ => unreachable!("validated gate {}", g.name),
        };
        gates.push(std::mem::replace(w, Worst::new()).outcome(g));
    }
    Ok(Outcome {
        estimates: json!({ "inner_band": inner, "comparisons": per_eps }),
        gates,
        tables: vec![lt_t, cmp_t],
    })
}

/// Ratio of means with its delta-method standard error.
fn ratio_of_means(num: &[f64], den: &[f64]) -> (f64, f64) {
    let n = num.len() as f64;
    let (mn, _) = mean_stderr(num);
    let (md, _) = mean_stderr(den);
    let r = mn / md;
    if num.len() < 2 {
        return (r, f64::INFINITY);
    }
    let mut s = 0.0;
    for (a, b) in num.iter().zip(den) {
        let e = (a - mn) - r * (b - md);
        s += e * e;
    }
    let var = s / (n - 1.0);
    (r, (var / n).sqrt() / md.abs())
}

fn graph_scaling(ctx: &Ctx<'_>, slopes: &[Vec<f64>]) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let qv = ctx.qv();
    let graphs: Vec<Manifold> = slopes
        .iter()
        .map(|s| Manifold::graph(GraphSurface::linear(s.clone(), 0.0)))
        .collect();
    let mut lt_t = Table::new(
        "local_time.csv",
        &[
            "kind",
            "level",
            "value",
            "stderr",
            "bandwidth",
            "crosscheck",
        ],
    );
    let mut gs_t = Table::new(
        "graph_scaling.csv",
        &[
            "bandwidth",
            "slope_norm",
            "geometric",
            "geometric_stderr",
            "graph",
            "graph_stderr",
            "ratio",
            "ratio_stderr",
            "expected",
            "relative_error",
        ],
    );
    let tol = tolerance(cfg, GateName::GraphScaling).unwrap_or(f64::INFINITY);
    let mut w = Worst::new();
    let mut per_eps = Vec::new();
    for &eps in &cfg.estimator.eps {
        let ns = graphs.len();
        let (geo, gr) = fold_paths(
            &ctx.ens,
            (vec![Vec::new(); ns], vec![Vec::new(); ns]),
            |_, p| {
                graphs
                    .iter()
                    .map(|m| {
                        let (g, _) = path_geometric_band(p, &qv, m, eps)?;
                        let (plain, _) = path_graph_band(p, &qv, m, eps)?;
                        Ok((g / (2.0 * eps), plain / (2.0 * eps)))
                    })
                    .collect::<occlab_core::Result<Vec<_>>>()
            },
            |(mut geo, mut gr), _, vals| {
                for (k, (g, l)) in vals.into_iter().enumerate() {
                    geo[k].push(g);
                    gr[k].push(l);
                }
                (geo, gr)
            },
        )
        .map_err(ctx.err(format!("graph and geometric local times at ε = {eps}")))?;
        let mut entries = Vec::new();
        for (k, slope) in slopes.iter().enumerate() {
            let norm = slope.iter().map(|v| v * v).sum::<f64>().sqrt();
            let g = EnsembleEstimate::summary(&geo[k]);
            let l = EnsembleEstimate::summary(&gr[k]);
            let (r, r_se) = ratio_of_means(&gr[k], &geo[k]);
            let expected = (1.0 + norm * norm).sqrt();
            let rel = (r / expected - 1.0).abs();
            w.add(rel, rel < tol, || {
                format!("ε = {eps}, |a| = {norm}: ratio {r:.5} ± {r_se:.5}, expected {expected:.5}")
            });
            lt_t.push(vec![
                LocalTimeKind::Geometric.name().into(),
                0.0.into(),
                g.mean.into(),
                g.stderr.into(),
                eps.into(),
                crate::report::Cell::Empty,
            ]);
            lt_t.push(vec![
                LocalTimeKind::Graph.name().into(),
                0.0.into(),
                l.mean.into(),
                l.stderr.into(),
                eps.into(),
                crate::report::Cell::Empty,
            ]);
            gs_t.push(vec![
                eps.into(),
                norm.into(),
                g.mean.into(),
                g.stderr.into(),
                l.mean.into(),
                l.stderr.into(),
                r.into(),
                r_se.into(),
                expected.into(),
                rel.into(),
            ]);
            entries.push(json!({
                "slope": slope,
                "slope_norm": norm,
                "geometric": est(&g),
                "graph": est(&l),
                "ratio": r,
                "ratio_stderr": r_se,
                "expected": expected,
                "relative_error": rel,
            }));
        }
        per_eps.push(json!({ "bandwidth": eps, "slopes": entries }));
    }
    let gates = cfg
        .gates
        .iter()
        .map(|g| std::mem::replace(&mut w, Worst::new()).outcome(g))
        .collect();
    Ok(Outcome {
        estimates: json!({ "n_paths": cfg.sim.n_paths, "scaling": per_eps }),
        gates,
        tables: vec![lt_t, gs_t],
    })
}

fn conjecture(ctx: &Ctx<'_>) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let manifold = ctx.manifold()?;
    let qv = ctx.qv();
    let mut lt_t = Table::new(
        "local_time.csv",
        &[
            "kind",
            "level",
            "value",
            "stderr",
            "bandwidth",
            "crosscheck",
        ],
    );
    let mut per_eps = Vec::new();
    for &eps in &cfg.estimator.eps {
        let r = conjecture_probe(&ctx.ens, &qv, &manifold, eps)
            .map_err(ctx.err(format!("conjecture probe at ε = {eps}")))?;
        for (kind, e) in [
            (LocalTimeKind::Geometric.name(), &r.geometric),
            ("graph-weighted", &r.weighted_graph),
            (LocalTimeKind::Graph.name(), &r.graph),
        ] {
            lt_t.push(vec![
                kind.into(),
                0.0.into(),
                e.mean.into(),
                e.stderr.into(),
                eps.into(),
                crate::report::Cell::Empty,
            ]);
        }
        per_eps.push(json!({
            "bandwidth": eps,
            "geometric": est(&r.geometric),
            "weighted_graph": est(&r.weighted_graph),
            "graph": est(&r.graph),
            "discrepancy": r.discrepancy,
            "pooled_stderr": r.pooled_stderr,
        }));
    }
    Ok(Outcome {
        estimates: json!({ "exploratory": true, "probes": per_eps }),
        gates: Vec::new(),
        tables: vec![lt_t],
    })
}

struct SingularPath {
    occupation: Vec<f64>,
    residual: Vec<f64>,
    qv: Vec<f64>,
    clamps: usize,
    steps: usize,
    exploded: bool,
}

/// Fractions of `[0, T]` spent in `{|x| < delta}`, one per delta.
fn ball_occupation(p: &occlab_core::SamplePath, deltas: &[f64]) -> Vec<f64> {
    let steps = p.valid_steps();
    let mut occ = vec![0.0; deltas.len()];
    for k in 0..steps {
        let r = p.state(k).iter().map(|v| v * v).sum::<f64>().sqrt();
        for (o, d) in occ.iter_mut().zip(deltas) {
            if r < *d {
                *o += 1.0;
            }
        }
    }
    let n = p.n_steps() as f64;
    occ.iter_mut().for_each(|o| *o /= n);
    occ
}

fn singular_sde(
    ctx: &Ctx<'_>,
    deltas: &[f64],
    refine: usize,
    checkpoints: usize,
) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let ens = ctx.ens.clone().with_noise();
    let n = ctx.model.dim();
    let n_steps = ens.grid.n_steps();
    let dt = ens.grid.dt();
    let horizon = ens.grid.horizon();
    let marks: Vec<usize> = (1..=checkpoints)
        .map(|m| m * n_steps / checkpoints)
        .collect();

    let outs = fold_paths(
        &ens,
        Vec::with_capacity(cfg.sim.n_paths),
        |_, p| {
            let steps = p.valid_steps();
            let x0 = p.state(0);
            let r0: f64 = x0.iter().map(|v| v * v).sum();
            let mut mart = 0.0;
            let mut residual = Vec::with_capacity(marks.len());
            let mut qv = vec![0.0; n * n];
            let mut next = 0;
            for k in 0..=steps {
                let x = p.state(k);
                while next < marks.len() && marks[next] == k {
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    residual.push(r2 - r0 - mart);
                    next += 1;
                }
                if k == steps {
                    break;
                }
                let dw = p.noise_increment(k).expect("noise recorded");
                mart += 2.0 * x.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>();
                let y = p.state(k + 1);
                for i in 0..n {
                    for j in 0..n {
                        qv[i * n + j] += (y[i] - x[i]) * (y[j] - x[j]);
                    }
                }
            }
            qv.iter_mut().for_each(|v| *v /= steps.max(1) as f64 * dt);
            Ok(SingularPath {
                occupation: ball_occupation(p, deltas),
                residual,
                qv,
                clamps: p.clamp_events,
                steps,
                exploded: p.is_exploded(),
            })
        },
        |mut v, _, o| {
            v.push(o);
            v
        },
    )
    .map_err(ctx.err("singular SDE paths"))?;

    let reference = ctx.ensemble(
        SdeModel::standard_bm(cfg.model.x0().to_vec()),
        cfg.sim.dt / refine as f64,
        1,
    )?;
    let ref_occ = fold_paths(
        &reference,
        Vec::with_capacity(cfg.sim.n_paths),
        |_, p| Ok(ball_occupation(p, deltas)),
        |mut v, _, o| {
            v.push(o);
            v
        },
    )
    .map_err(ctx.err("Brownian reference paths"))?;

    let good: Vec<&SingularPath> = outs.iter().filter(|o| !o.exploded).collect();
    let exploded = outs.len() - good.len();
    let total_steps: usize = outs.iter().map(|o| o.steps).sum();
    let total_clamps: usize = outs.iter().map(|o| o.clamps).sum();
    let clamp_rate = total_clamps as f64 / total_steps.max(1) as f64;
    let unreliable = clamp_rate > 0.5;

    let mut occ_t = Table::new(
        "occupation.csv",
        &[
            "delta",
            "occupation",
            "stderr",
            "reference",
            "reference_stderr",
        ],
    );
    let mut occ_json = Vec::new();
    let mut occ_means = Vec::new();
    for (j, d) in deltas.iter().enumerate() {
        let e =
            EnsembleEstimate::summary(&good.iter().map(|o| o.occupation[j]).collect::<Vec<_>>());
        let r = EnsembleEstimate::summary(&ref_occ.iter().map(|o| o[j]).collect::<Vec<_>>());
        occ_t.push(vec![
            (*d).into(),
            e.mean.into(),
            e.stderr.into(),
            r.mean.into(),
            r.stderr.into(),
        ]);
        occ_json.push(json!({ "delta": d, "occupation": est(&e), "reference": est(&r) }));
        occ_means.push((*d, e.mean));
    }

    let mut mart_t = Table::new(
        "martingale.csv",
        &["time", "residual_mean", "residual_stderr", "ito_drift"],
    );
    let mut mart_json = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    for (m, k) in marks.iter().enumerate() {
        let t = *k as f64 * dt;
        let e = EnsembleEstimate::summary(&good.iter().map(|o| o.residual[m]).collect::<Vec<_>>());
        let drift = (n as f64 - 1.0) * t;
        mart_t.push(vec![t.into(), e.mean.into(), e.stderr.into(), drift.into()]);
        mart_json.push(json!({ "time": t, "residual": est(&e), "ito_drift": drift }));
        num += t * e.mean;
        den += t * t;
    }
    let slope = if den > 0.0 { num / den } else { 0.0 };

    let mut qv_mean = vec![0.0; n * n];
    let mut qv_dev = 0.0f64;
    for i in 0..n * n {
        let (m, _) = mean_stderr(&good.iter().map(|o| o.qv[i]).collect::<Vec<_>>());
        qv_mean[i] = m;
        let target = if i / n == i % n { 1.0 } else { 0.0 };
        qv_dev = qv_dev.max((m - target).abs());
    }
    let qv_rows: Vec<Vec<f64>> = qv_mean.chunks(n).map(<[f64]>::to_vec).collect();

    let flag = if unreliable {
        format!(" [unreliable: clamp rate {clamp_rate:.3}]")
    } else {
        String::new()
    };
    let mut gates = Vec::new();
    for g in &cfg.gates {
        gates.push(match g.name {
            GateName::ZeroOccupation => {
                let (d, v) = occ_means
                    .iter()
                    .copied()
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .expect("validated");
                GateOutcome::check(
                    g.name.as_str(),
                    v,
                    g.tolerance,
                    v < g.tolerance,
                    format!("fraction of T in |x| < {d}: {v:.3e}{flag}"),
                )
            }
            GateName::QvIdentity => GateOutcome::check(
                g.name.as_str(),
                qv_dev,
                g.tolerance,
                qv_dev < g.tolerance,
                format!("max |<X^i,X^j>_T / T - δ_ij| = {qv_dev:.3e}{flag}"),
            ),
            GateName::MonotoneOccupation => {
                let mut sorted = occ_means.clone();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let breaks = sorted.windows(2).filter(|w| w[1].1 < w[0].1).count();
                GateOutcome::check(
                    g.name.as_str(),
                    breaks as f64,
                    g.tolerance,
                    breaks == 0,
                    format!("{breaks} decreases of the occupation as δ grows{flag}"),
                )
            }
            _ => unreachable!("validated gate {}", g.name),
        });
    }
    Ok(Outcome {
        estimates: json!({
            "horizon": horizon,
            "ball_occupation": occ_json,
            "reference": { "model": "standard-bm", "dt": cfg.sim.dt / refine as f64 },
            "martingale_residual": mart_json,
            "martingale_residual_slope": slope,
            "ito_drift_slope": n as f64 - 1.0,
            "realized_covariation_over_t": qv_rows,
            "clamp_rate": clamp_rate,
            "clamp_events": total_clamps,
            "exploded_paths": exploded,
            "unreliable": unreliable,
        }),
        gates,
        tables: vec![occ_t, mart_t],
    })
}

/// `(pass, int_0^1 |f2(a)| da)` in closed form.
pub fn closed_form_certificate(profile: Profile) -> (bool, f64) {
    match profile {
        Profile::Power { p } => {
            if p < 1.0 {
                (true, 1.0 / (1.0 - p))
            } else {
                (false, f64::INFINITY)
            }
        }
        Profile::LogAbs => (true, 1.0),
        Profile::Constant { value } => (true, value.abs()),
    }
}

const EXPONENT_GRID: [f64; 8] = [0.25, 0.5, 0.75, 0.9, 0.99, 1.0, 1.25, 2.0];

fn integrability(
    ctx: &Ctx<'_>,
    profile: Profile,
    radius: f64,
    dims: &[usize],
) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let manifold = ctx.manifold()?;
    let f = SingularFunction::transversal(manifold.clone(), profile);
    let cert = integrability_check(&f, radius);
    let (closed_pass, closed_integral) = closed_form_certificate(profile);

    let mut paths = None;
    if cert.pass {
        let qv = ctx.qv();
        let fol = Foliation::coordinate(0, ctx.model.dim());
        let abs_f = |x: &[f64]| f.value(x).abs();
        let singular = |x: &[f64]| f.is_singular_point(x);
        let r = occupation_integral(&ctx.ens, &qv, &fol, 0, &abs_f, Some(&singular))
            .map_err(ctx.err("occupation integral of |f|"))?;
        paths = Some(r);
    }

    let mut exp_t = Table::new(
        "exponents.csv",
        &[
            "p",
            "dim",
            "certificate_pass",
            "certificate_integral",
            "closed_form_integral",
            "q_required_above",
            "q_integrable_below",
            "lq_route_available",
        ],
    );
    let mut exps = Vec::new();
    let mut grid: Vec<f64> = EXPONENT_GRID.to_vec();
    if let Profile::Power { p } = profile {
        if !grid.contains(&p) {
            grid.push(p);
            grid.sort_by(f64::total_cmp);
        }
    }
    for &dim in dims {
        for &p in &grid {
            let c = integrability_check(
                &SingularFunction::transversal(manifold.clone(), Profile::Power { p }),
                radius,
            );
            let e = exponent_comparison(p, dim);
            let (_, closed) = closed_form_certificate(Profile::Power { p });
            exp_t.push(vec![
                p.into(),
                dim.into(),
                c.pass.into(),
                c.integral.into(),
                closed.into(),
                e.q_required_above.into(),
                e.q_integrable_below.into(),
                e.lq_route_available.into(),
            ]);
            exps.push(json!({
                "p": p,
                "dim": dim,
                "certificate_pass": c.pass,
                "certificate_integral": c.integral,
                "closed_form_integral": closed,
                "transversal_pass": e.transversal_pass,
                "q_required_above": e.q_required_above,
                "q_integrable_below": e.q_integrable_below,
                "lq_route_available": e.lq_route_available,
            }));
        }
    }

    let mut gates = Vec::new();
    for g in &cfg.gates {
        gates.push(match g.name {
            GateName::CertificateClosedForm => {
                let (value, pass) = if cert.pass != closed_pass {
                    (f64::INFINITY, false)
                } else if closed_pass {
                    let rel = (cert.integral - closed_integral).abs() / closed_integral.abs().max(1e-300);
                    (rel, rel <= g.tolerance)
                } else {
                    (0.0, true)
                };
                GateOutcome::check(
                    g.name.as_str(),
                    value,
                    g.tolerance,
                    pass,
                    format!(
                        "certificate {} (integral {}), closed form {} (integral {})",
                        if cert.pass { "passes" } else { "fails" },
                        cert.integral,
                        if closed_pass { "passes" } else { "fails" },
                        closed_integral
                    ),
                )
            }
            GateName::FinitePathIntegrals => match &paths {
                None => GateOutcome::skipped(
                    g.name.as_str(),
                    g.tolerance,
                    "certificate failed: the envelope integral diverges, no path integrals run".into(),
                ),
                Some(r) => {
                    let bad = r.estimate.per_path.iter().filter(|v| !v.is_finite()).count();
                    GateOutcome::check(
                        g.name.as_str(),
                        bad as f64,
                        g.tolerance,
                        bad == 0 && r.estimate.n == cfg.sim.n_paths,
                        format!(
                            "{} of {} path integrals finite, {} samples on the singular set skipped",
                            r.estimate.n - bad,
                            r.estimate.n,
                            r.skipped
                        ),
                    )
                }
            },
            _ => unreachable!("validated gate {}", g.name),
        });
    }
    let path_json = paths.as_ref().map(|r| {
        let max = r.estimate.per_path.iter().copied().fold(0.0f64, f64::max);
        json!({
            "integral": est(&r.estimate),
            "max": max,
            "all_finite": r.estimate.per_path.iter().all(|v| v.is_finite()),
            "skipped_singular_samples": r.skipped,
        })
    });
    Ok(Outcome {
        estimates: json!({
            "profile": profile,
            "certificate": cert,
            "closed_form": { "pass": closed_pass, "integral": closed_integral },
            "path_integrals": path_json,
            "exponents": exps,
        }),
        gates,
        tables: vec![exp_t],
    })
}
