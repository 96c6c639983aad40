//! Preconditions checked before any simulation.

use std::collections::HashSet;
use std::fmt;

use occlab_core::{Manifold, TimeGrid};
use serde::Serialize;

use crate::config::{
    ExperimentConfig, GateName, LevelConfig, ModelConfig, QvMode, RegionConfig, ScenarioConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Dotted path of the offending setting.
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Default)]
struct Report(Vec<Violation>);

impl Report {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

/// Every violated precondition of `cfg`; empty when the scenario can run.
pub fn validate(cfg: &ScenarioConfig) -> Vec<Violation> {
    let mut r = Report::default();
    if cfg.version != crate::config::FORMAT_VERSION {
        r.push("version", format!("unsupported version {}", cfg.version));
    }
    if cfg.name.trim().is_empty() {
        r.push("name", "scenario name is empty");
    }
    let dim = check_model(cfg, &mut r);
    check_sim(cfg, &mut r);
    let manifold = check_manifold(cfg, dim, &mut r);
    check_estimator(cfg, dim, &mut r);
    check_foliation(cfg, dim, manifold.as_ref(), &mut r);
    check_experiment(cfg, dim, manifold.as_ref(), &mut r);
    check_gates(cfg, &mut r);
    r.0
}

fn check_model(cfg: &ScenarioConfig, r: &mut Report) -> usize {
    let dim = cfg.model.dim();
    if dim == 0 {
        r.push("model.x0", "initial point is empty");
        return 0;
    }
    if cfg.model.x0().iter().any(|v| !v.is_finite()) {
        r.push("model.x0", "initial point must be finite");
    }
    let square = |field: &str, m: &Vec<Vec<f64>>, r: &mut Report| {
        if m.len() != dim || m.iter().any(|row| row.len() != dim) {
            r.push(field, format!("must be a {dim}x{dim} matrix"));
        }
    };
    match &cfg.model {
        ModelConfig::DriftedBm { drift, sigma, .. } => {
            if drift.len() != dim {
                r.push(
                    "model.drift",
                    format!("expected {dim} entries, got {}", drift.len()),
                );
            }
            square("model.sigma", sigma, r);
        }
        ModelConfig::Linear {
            drift_matrix,
            drift_offset,
            sigma,
            ..
        } => {
            square("model.drift_matrix", drift_matrix, r);
            square("model.sigma", sigma, r);
            if drift_offset.len() != dim {
                r.push("model.drift_offset", format!("expected {dim} entries"));
            }
        }
        _ => {}
    }
    dim
}

fn check_sim(cfg: &ScenarioConfig, r: &mut Report) {
    let s = &cfg.sim;
    if s.n_paths == 0 {
        r.push("sim.n_paths", "at least one path is required");
    }
    if !positive(s.horizon) {
        r.push("sim.horizon", "horizon must be finite and positive");
    }
    if !positive(s.dt) {
        r.push("sim.dt", "time step must be finite and positive");
    } else if positive(s.horizon) {
        if s.dt > s.horizon {
            r.push("sim.dt", "time step exceeds the horizon");
        } else if let Err(e) = TimeGrid::from_step(s.horizon, s.dt) {
            r.push("sim.dt", e.to_string());
        }
    }
}

fn check_manifold(cfg: &ScenarioConfig, dim: usize, r: &mut Report) -> Option<Manifold> {
    cfg.manifold.as_ref()?;
    match cfg.build_manifold() {
        Ok(Some(m)) => {
            if m.dim() != dim {
                r.push(
                    "manifold",
                    format!("manifold lives in R^{} but the model in R^{dim}", m.dim()),
                );
                return None;
            }
            Some(m)
        }
        Ok(None) => None,
        Err(e) => {
            r.push("manifold", e.to_string());
            None
        }
    }
}

fn check_estimator(cfg: &ScenarioConfig, dim: usize, r: &mut Report) {
    let e = &cfg.estimator;
    if e.eps.is_empty() {
        r.push("estimator.eps", "at least one bandwidth is required");
    }
    for (k, eps) in e.eps.iter().enumerate() {
        if !positive(*eps) {
            r.push(
                format!("estimator.eps[{k}]"),
                "bandwidth must be finite and positive",
            );
        }
    }
    if e.component >= dim.max(1) {
        r.push(
            "estimator.component",
            format!("component {} out of range for R^{dim}", e.component),
        );
    }
    if let Some(g) = e.levels {
        if g.count == 0 {
            r.push("estimator.levels.count", "level grid is empty");
        }
        if !positive(g.spacing) {
            r.push(
                "estimator.levels.spacing",
                "level spacing must be finite and positive",
            );
        } else if g.count > 1 {
            for eps in e.eps.iter().filter(|v| positive(**v)) {
                if g.spacing > *eps {
                    r.push(
                        "estimator.levels.spacing",
                        format!(
                            "coverage gap: level spacing {} exceeds bandwidth ε = {eps}",
                            g.spacing
                        ),
                    );
                }
            }
        }
    }
    if let Some([lo, hi]) = e.level_range {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            r.push("estimator.level_range", "range must be finite with lo < hi");
        }
    }
}

fn check_foliation(cfg: &ScenarioConfig, dim: usize, manifold: Option<&Manifold>, r: &mut Report) {
    let Some(f) = &cfg.foliation else { return };
    let reach = manifold.map(|m| m.reach().reach);
    match &f.level {
        LevelConfig::Coordinate { index } if *index >= dim => {
            r.push(
                "foliation.level.index",
                format!("coordinate {index} out of range for R^{dim}"),
            );
        }
        LevelConfig::SquaredNorm { center } if center.len() != dim => {
            r.push("foliation.level.center", format!("expected {dim} entries"));
        }
        LevelConfig::GraphDifference => {
            if !matches!(manifold, Some(Manifold::Graph(_))) {
                r.push("foliation.level", "graph-difference needs a graph manifold");
            }
        }
        LevelConfig::SignedDistance => match manifold {
            None => r.push(
                "foliation.level",
                "signed-distance needs a [manifold] table",
            ),
            Some(m) if !m.is_leaf() => r.push(
                "foliation.level",
                format!("missing orientation: {} has no signed distance", m.tag()),
            ),
            _ => {}
        },
        LevelConfig::GoodExtension { inner } => match (manifold, reach) {
            (Some(m), Some(reach)) if m.is_leaf() => {
                if !(*inner > 0.0 && *inner < reach) {
                    r.push(
                        "foliation.level.inner",
                        format!("ε must be < reach: band width {inner}, reach {reach}"),
                    );
                }
            }
            (Some(m), _) => r.push(
                "foliation.level",
                format!("missing orientation: {} has no good extension", m.tag()),
            ),
            (None, _) => r.push("foliation.level", "good-extension needs a [manifold] table"),
        },
        LevelConfig::SquareCorner
        | LevelConfig::CrossingLines
        | LevelConfig::CrossingSignedDistance
            if dim != 2 =>
        {
            r.push("foliation.level", "piecewise foliations live in R^2");
        }
        _ => {}
    }
    match &f.region {
        RegionConfig::TubularBand { width } => match reach {
            None => r.push("foliation.region", "tubular-band needs a [manifold] table"),
            Some(reach) if !(*width > 0.0 && *width < reach) => r.push(
                "foliation.region.width",
                format!("ε must be < reach: band width {width}, reach {reach}"),
            ),
            _ => {}
        },
        RegionConfig::LevelBand { lo, hi } if !(lo < hi) => {
            r.push("foliation.region", "level band needs lo < hi");
        }
        RegionConfig::ComplementOfBall { center, .. } if center.len() != dim => {
            r.push("foliation.region.center", format!("expected {dim} entries"));
        }
        RegionConfig::Box { lo, hi } => {
            if lo.len() != dim || hi.len() != dim {
                r.push(
                    "foliation.region",
                    format!("box corners need {dim} entries"),
                );
            }
        }
        _ => {}
    }
    if let Err(e) = cfg.build_foliation() {
        if !r
            .0
            .iter()
            .any(|v| v.field.starts_with("foliation") || v.field == "manifold")
        {
            r.push("foliation", e);
        }
    }
}

/// Bandwidths must stay inside the reach of the configured manifold.
fn check_reach(cfg: &ScenarioConfig, manifold: &Manifold, r: &mut Report) {
    let reach = manifold.reach().reach;
    if !manifold.is_leaf() {
        return;
    }
    for eps in &cfg.estimator.eps {
        if *eps >= reach {
            r.push(
                "estimator.eps",
                format!(
                    "ε must be < reach: ε = {eps}, reach of the {} = {reach}",
                    manifold.tag()
                ),
            );
        }
    }
}

fn check_experiment(cfg: &ScenarioConfig, dim: usize, manifold: Option<&Manifold>, r: &mut Report) {
    if let Some(m) = manifold {
        check_reach(cfg, m, r);
    }
    let need_manifold = |r: &mut Report| {
        if cfg.manifold.is_none() {
            r.push(
                "manifold",
                format!(
                    "the {} experiment needs a [manifold] table",
                    cfg.experiment.kind()
                ),
            );
        }
    };
    match &cfg.experiment {
        ExperimentConfig::Density {
            test_function,
            bin_spacing,
            refine,
            windows,
            probe_levels,
        } => {
            if cfg.foliation.is_none() {
                r.push(
                    "foliation",
                    "the density experiment needs a [foliation] table",
                );
            }
            if probe_levels.iter().any(|a| !a.is_finite()) {
                r.push("experiment.probe_levels", "levels must be finite");
            }
            if let Some(b) = bin_spacing {
                if !positive(*b) {
                    r.push(
                        "experiment.bin_spacing",
                        "bin spacing must be finite and positive",
                    );
                }
            }
            if let Some(crate::config::TestFunction::Coordinate { index }) = test_function {
                if *index >= dim {
                    r.push("experiment.test_function.index", "coordinate out of range");
                }
            }
            if *refine == Some(0) {
                r.push("experiment.refine", "refinement must be at least 1");
            }
            if *windows == Some(0) {
                r.push("experiment.windows", "at least one window is required");
            }
            let has = |g| cfg.gate(g).is_some();
            if has(GateName::OccupationResidual)
                && (test_function.is_none() || bin_spacing.is_none())
            {
                r.push(
                    "gates",
                    "occupation-residual needs experiment.test_function and experiment.bin_spacing",
                );
            }
            if has(GateName::BandwidthConsistency) && probe_levels.is_empty() {
                r.push(
                    "gates",
                    "bandwidth-consistency needs experiment.probe_levels",
                );
            }
            if has(GateName::LocalTimeOracle) {
                let brownian = matches!(cfg.model, ModelConfig::StandardBm { .. });
                let coordinate = matches!(
                    cfg.foliation.as_ref().map(|f| &f.level),
                    Some(LevelConfig::Coordinate { .. })
                );
                let full = matches!(
                    cfg.foliation.as_ref().map(|f| &f.region),
                    Some(RegionConfig::Full)
                );
                if !(brownian && coordinate && full) {
                    r.push(
                        "gates",
                        "local-time-oracle needs standard-bm, a coordinate level and the full region",
                    );
                }
                if probe_levels.is_empty() {
                    r.push("gates", "local-time-oracle needs experiment.probe_levels");
                }
            }
        }
        ExperimentConfig::LEqualsL { levels, inner } => {
            need_manifold(r);
            if cfg.sim.qv != QvMode::Analytic {
                r.push(
                    "sim.qv",
                    "the identity check uses analytic quadratic variation",
                );
            }
            if !cfg.model.build().is_ok_and(|m| m.is_brownian()) {
                r.push("model", "the identity check needs standard Brownian motion");
            }
            if levels.is_empty() {
                r.push("experiment.levels", "at least one level is required");
            }
            if let Some(m) = manifold {
                if !m.is_leaf() {
                    r.push(
                        "manifold",
                        format!("missing orientation: {} is not a leaf", m.tag()),
                    );
                } else {
                    let reach = m.reach().reach;
                    if !(*inner > 0.0 && *inner < reach) {
                        r.push(
                            "experiment.inner",
                            format!("ε must be < reach: band width {inner}, reach {reach}"),
                        );
                    }
                    for eps in cfg.estimator.eps.iter().filter(|v| positive(**v)) {
                        for a in levels {
                            if a.abs() + eps >= *inner {
                                r.push(
                                    "experiment.levels",
                                    format!("level {a} with ε = {eps} leaves the band d < {inner}"),
                                );
                            }
                            if *a > 0.0 && *a < reach {
                                let lr = a.min(reach - a);
                                if *eps >= lr {
                                    r.push(
                                        "experiment.levels",
                                        format!("ε must be < reach: ε = {eps}, reach of the level set at {a} = {lr}"),
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
        ExperimentConfig::GraphScaling { slopes } => {
            if slopes.is_empty() {
                r.push("experiment.slopes", "at least one slope is required");
            }
            for (k, s) in slopes.iter().enumerate() {
                if s.len() + 1 != dim {
                    r.push(
                        format!("experiment.slopes[{k}]"),
                        format!("expected {} entries", dim.saturating_sub(1)),
                    );
                }
            }
        }
        ExperimentConfig::Conjecture => {
            need_manifold(r);
            if manifold.is_some_and(|m| !matches!(m, Manifold::Graph(_))) {
                r.push("manifold", "the conjecture probe needs a graph manifold");
            }
            if !cfg.exploratory {
                r.push(
                    "exploratory",
                    "the conjecture probe must be marked exploratory",
                );
            }
        }
        ExperimentConfig::SingularSde {
            deltas,
            reference_refine,
            checkpoints,
        } => {
            if !matches!(cfg.model, ModelConfig::SingularRadialDrift { .. }) {
                r.push(
                    "model",
                    "the singular-sde experiment needs the singular-radial-drift model",
                );
            }
            if deltas.is_empty() || deltas.iter().any(|d| !positive(*d)) {
                r.push("experiment.deltas", "radii must be finite and positive");
            }
            if *reference_refine == 0 {
                r.push(
                    "experiment.reference_refine",
                    "refinement must be at least 1",
                );
            }
            if *checkpoints == 0 {
                r.push(
                    "experiment.checkpoints",
                    "at least one checkpoint is required",
                );
            }
        }
        ExperimentConfig::Integrability {
            profile,
            radius,
            exponent_dims,
        } => {
            need_manifold(r);
            if manifold.is_some_and(|m| !m.is_leaf()) {
                r.push("manifold", "integrability needs a smooth leaf manifold");
            }
            if !positive(*radius) {
                r.push("experiment.radius", "radius must be finite and positive");
            }
            if let occlab_core::occupation::Profile::Power { p } = profile {
                if !p.is_finite() {
                    r.push("experiment.profile.p", "exponent must be finite");
                }
            }
            if exponent_dims.contains(&0) {
                r.push("experiment.exponent_dims", "dimensions must be positive");
            }
        }
    }
}

fn check_gates(cfg: &ScenarioConfig, r: &mut Report) {
    if cfg.exploratory && !cfg.gates.is_empty() {
        r.push("gates", "exploratory scenarios have no gates");
    }
    let kind = cfg.experiment.kind();
    let mut seen = HashSet::new();
    for (k, g) in cfg.gates.iter().enumerate() {
        if !seen.insert(g.name) {
            r.push(
                format!("gates[{k}]"),
                format!("gate `{}` listed twice", g.name),
            );
        }
        if g.name.experiment() != kind {
            r.push(
                format!("gates[{k}]"),
                format!(
                    "gate `{}` is implemented by the {} experiment, not {kind}",
                    g.name,
                    g.name.experiment()
                ),
            );
        }
        if !(g.tolerance >= 0.0 && g.tolerance.is_finite()) {
            r.push(
                format!("gates[{k}].tolerance"),
                "tolerance must be finite and non-negative",
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_scenario, LevelGridConfig};
    use crate::scenarios;

    fn builtin(name: &str) -> ScenarioConfig {
        parse_scenario(name, scenarios::builtin_source(name).unwrap()).unwrap()
    }

    #[test]
    fn builtins_are_valid() {
        for name in scenarios::builtin_names() {
            let v = validate(&builtin(name));
            assert!(v.is_empty(), "{name}: {v:?}");
        }
    }

    #[test]
    fn bandwidth_at_the_reach_is_rejected() {
        let mut cfg = builtin("circle-L=L=L");
        cfg.estimator.eps = vec![1.0];
        let v = validate(&cfg);
        assert!(
            v.iter().any(|v| v.message.contains("ε must be < reach")),
            "{v:?}"
        );
    }

    #[test]
    fn coverage_gap_is_reported() {
        let mut cfg = builtin("hyperplane-foliation");
        cfg.estimator.eps = vec![0.01];
        cfg.estimator.levels = Some(LevelGridConfig {
            start: -1.0,
            spacing: 0.02,
            count: 101,
        });
        let v = validate(&cfg);
        assert!(
            v.iter().any(|v| v.message.contains("coverage gap")),
            "{v:?}"
        );
    }

    #[test]
    fn gates_must_match_the_experiment() {
        let mut cfg = builtin("frozen");
        cfg.gates.push(crate::config::GateConfig {
            name: GateName::GraphScaling,
            tolerance: 0.05,
        });
        assert!(!validate(&cfg).is_empty());
        let mut cfg = builtin("graph-conjecture");
        cfg.gates.push(crate::config::GateConfig {
            name: GateName::GraphScaling,
            tolerance: 0.05,
        });
        assert!(validate(&cfg)
            .iter()
            .any(|v| v.message.contains("exploratory")));
    }

    #[test]
    fn signed_distance_needs_an_orientation() {
        let mut cfg = builtin("crossing-lines");
        cfg.foliation.as_mut().unwrap().level = LevelConfig::SignedDistance;
        assert!(validate(&cfg)
            .iter()
            .any(|v| v.message.contains("missing orientation")));
    }
}
