//! Band estimators of one-dimensional, geometric and graph local times, the
//! comparison of the transversal density with the symmetric local time of
//! `phi(X)`, and control / non-degeneracy diagnostics.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Foliation, GoodExtension, LevelFunction, Manifold, Region};
use crate::linalg;
use crate::paths::{fold_paths, PathSource, SamplePath};
use crate::qv::{eta_from_tensor, QuadraticVariationModel};
use crate::stats::{pooled_stderr, Accumulator, EnsembleEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalTimeKind {
    Symmetric1d,
    Right1d,
    Left1d,
    Geometric,
    Graph,
}

impl LocalTimeKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Symmetric1d => "symmetric-1d",
            Self::Right1d => "right-1d",
            Self::Left1d => "left-1d",
            Self::Geometric => "geometric",
            Self::Graph => "graph",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeEstimate {
    pub kind: LocalTimeKind,
    pub level: f64,
    pub bandwidth: f64,
    pub estimate: EnsembleEstimate,
    /// Independent estimate of the same quantity (Tanaka, or the `dt` form
    /// of the geometric local time).
    pub crosscheck: Option<EnsembleEstimate>,
    /// Mean over paths of `|value - crosscheck|`.
    pub crosscheck_mean_abs_diff: Option<f64>,
    pub qv_mode: String,
}

fn qv_mode(qv: &QuadraticVariationModel) -> String {
    String::from(if qv.is_analytic() {
        "analytic"
    } else {
        "realized"
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(eps))
    }
}

/// Band sum over a scalar series `y_0..y_n` with increments `dqv_0..dqv_{n-1}`.
///
/// Symmetric: `(1/2eps) sum 1_{(a-eps, a+eps)}(y_k) dqv_k`;
/// right: `(1/eps) sum 1_{[a, a+eps)}`; left: `(1/eps) sum 1_{(a-eps, a]}`.
pub fn band_local_time(y: &[f64], dqv: &[f64], a: f64, eps: f64, kind: LocalTimeKind) -> f64 {
    let mut s = 0.0;
    for (yk, w) in y.iter().zip(dqv) {
        let z = yk - a;
        let inside = match kind {
            LocalTimeKind::Right1d => (0.0..eps).contains(&z),
            LocalTimeKind::Left1d => -eps < z && z <= 0.0,
            _ => z.abs() < eps,
        };
        if inside {
            s += w;
        }
    }
    match kind {
        LocalTimeKind::Right1d | LocalTimeKind::Left1d => s / eps,
        _ => s / (2.0 * eps),
    }
}

/// Discrete Tanaka estimate `|Y_T - a| - |Y_0 - a| - sum sgn(Y_k - a) dY_k`
/// of the symmetric local time (with `sgn(0) = 0`).
pub fn tanaka_local_time(y: &[f64], a: f64) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let mut stoch = 0.0;
    for k in 0..n - 1 {
        let z = y[k] - a;
        let sgn = if z > 0.0 {
            1.0
        } else if z < 0.0 {
            -1.0
        } else {
            0.0
        };
        stoch += sgn * (y[k + 1] - y[k]);
    }
    (y[n - 1] - a).abs() - (y[0] - a).abs() - stoch
}

/// The scalar process whose local time is estimated.
#[derive(Debug, Clone, Copy)]
pub enum Scalar<'f> {
    /// `Y = X^i` (zero-based).
    Coordinate(usize),
    /// `Y = phi(X)`; analytic `d<Y> = grad phi^T g grad phi dt`.
    Level(&'f LevelFunction),
}

/// `Y_k` for `k = 0..=valid_steps` and `d<Y>_k` for `k < valid_steps`.
pub fn scalar_series(
    path: &SamplePath,
    qv: &QuadraticVariationModel,
    scalar: Scalar<'_>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = path.dim;
    let steps = path.valid_steps();
    let mut scratch = vec![0.0; n * n];
    let mut y = Vec::with_capacity(steps + 1);
    let mut dqv = Vec::with_capacity(steps);
    match scalar {
        Scalar::Coordinate(i) => {
            qv.check(n, i)?;
            for k in 0..=steps {
                y.push(path.state(k)[i]);
            }
            for k in 0..steps {
                dqv.push(qv.component_weight_at(path, k, i, &mut scratch));
            }
        }
        Scalar::Level(phi) => {
            qv.check(n, 0)?;
            let mut grad = vec![0.0; n];
            for k in 0..=steps {
                y.push(phi.value(path.state(k))?);
            }
            for k in 0..steps {
                if qv.is_analytic() {
                    phi.gradient(path.state(k), &mut grad)?;
                    dqv.push(qv.directional_weight_at(path, k, &grad, &mut scratch));
                } else {
                    let d = y[k + 1] - y[k];
                    dqv.push(d * d);
                }
            }
        }
    }
    Ok((y, dqv))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTimeOptions {
    pub kind: LocalTimeKind,
    pub tanaka: bool,
    pub keep_per_path: bool,
}

impl Default for LocalTimeOptions {
    fn default() -> Self {
        Self {
            kind: LocalTimeKind::Symmetric1d,
            tanaka: false,
            keep_per_path: false,
        }
    }
}

fn finish(values: Vec<f64>, keep: bool) -> EnsembleEstimate {
    let e = EnsembleEstimate::from_values(values);
    if keep {
        e
    } else {
        e.strip()
    }
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// One-dimensional band local time of a scalar process at level `a`.
pub fn local_time_1d<S: PathSource + ?Sized>(
    source: &S,
    qv: &QuadraticVariationModel,
    scalar: Scalar<'_>,
    a: f64,
    eps: f64,
    opts: LocalTimeOptions,
) -> Result<LocalTimeEstimate> {
    check_eps(eps)?;
    if matches!(opts.kind, LocalTimeKind::Geometric | LocalTimeKind::Graph) {
        return Err(Error::invalid(
            "local_time_1d needs a one-dimensional band kind",
        ));
    }
    let (vals, tan) = fold_paths(
        source,
        (Vec::new(), Vec::new()),
        |_, p| {
            let (y, dqv) = scalar_series(p, qv, scalar)?;
            let v = band_local_time(&y, &dqv, a, eps, opts.kind);
            let t = opts.tanaka.then(|| tanaka_local_time(&y, a));
            Ok((v, t))
        },
        |(mut vs, mut ts), _, (v, t)| {
            vs.push(v);
            if let Some(t) = t {
                ts.push(t);
            }
            (vs, ts)
        },
    )?;
    let diff = opts.tanaka.then(|| mean_abs_diff(&vals, &tan));
    Ok(LocalTimeEstimate {
        kind: opts.kind,
        level: a,
        bandwidth: eps,
        crosscheck: opts.tanaka.then(|| finish(tan, opts.keep_per_path)),
        crosscheck_mean_abs_diff: diff,
        estimate: finish(vals, opts.keep_per_path),
        qv_mode: qv_mode(qv),
    })
}

/// Per-path geometric band sums `(weighted, dt form)` before the `1/2eps`.
pub fn path_geometric_band(
    path: &SamplePath,
    qv: &QuadraticVariationModel,
    manifold: &Manifold,
    eps: f64,
) -> Result<(f64, f64)> {
    let n = path.dim;
    qv.check(n, 0)?;
    let dt = path.grid.dt();
    let mut scratch = vec![0.0; n * n];
    let (mut weighted, mut plain) = (0.0, 0.0);
    for k in 0..path.valid_steps() {
        let x = path.state(k);
        if let Manifold::Graph(g) = manifold {
            if g.certainly_farther_than(x, eps) {
                continue;
            }
        }
        if manifold.distance(x)? < eps {
            let grad = manifold.gradient_signed_distance(x)?;
            weighted += qv.directional_weight_at(path, k, &grad, &mut scratch);
            plain += dt;
        }
    }
    Ok((weighted, plain))
}

/// Geometric local time `(1/2eps) sum_{ij} int 1_{[0,eps)}(d) d_i delta
/// d_j delta d<X^i, X^j>`, with the `dt` form as cross-check.
pub fn geometric_local_time<S: PathSource + ?Sized>(
    source: &S,
    qv: &QuadraticVariationModel,
    manifold: &Manifold,
    eps: f64,
    keep_per_path: bool,
) -> Result<LocalTimeEstimate> {
    check_eps(eps)?;
    if !manifold.is_leaf() {
        return Err(Error::PiecewiseUnsupported("geometric local time"));
    }
    let reach = manifold.reach().reach;
    if eps >= reach {
        return Err(Error::BandExceedsReach { width: eps, reach });
    }
    let (w, b) = fold_paths(
        source,
        (Vec::new(), Vec::new()),
        |_, p| path_geometric_band(p, qv, manifold, eps),
        |(mut ws, mut bs), _, (w, b)| {
            ws.push(w / (2.0 * eps));
            bs.push(b / (2.0 * eps));
            (ws, bs)
        },
    )?;
    let diff = mean_abs_diff(&w, &b);
    Ok(LocalTimeEstimate {
        kind: LocalTimeKind::Geometric,
        level: 0.0,
        bandwidth: eps,
        estimate: finish(w, keep_per_path),
        crosscheck: Some(finish(b, keep_per_path)),
        crosscheck_mean_abs_diff: Some(diff),
        qv_mode: qv_mode(qv),
    })
}

/// Per-path graph band sums `(plain, weighted)` before the `1/2eps`; the
/// weighted sum multiplies each step by `(1 + |grad g|^2)^{-1/2}`.
pub fn path_graph_band(
    path: &SamplePath,
    qv: &QuadraticVariationModel,
    manifold: &Manifold,
    eps: f64,
) -> Result<(f64, f64)> {
    let Manifold::Graph(g) = manifold else {
        return Err(Error::NotAGraph);
    };
    let n = path.dim;
    qv.check(n, 0)?;
    let mut scratch = vec![0.0; n * n];
    let mut grad = vec![0.0; n];
    let (mut plain, mut weighted) = (0.0, 0.0);
    for k in 0..path.valid_steps() {
        let x = path.state(k);
        if g.height_gap(x).abs() >= eps {
            continue;
        }
        g.height_gap_gradient(x, &mut grad);
        let w = if qv.is_analytic() {
            qv.directional_weight_at(path, k, &grad, &mut scratch)
        } else {
            let d = g.height_gap(path.state(k + 1)) - g.height_gap(x);
            d * d
        };
        plain += w;
        weighted += w / linalg::norm(&grad);
    }
    Ok((plain, weighted))
}

/// Graph local time of `Y = X^N - g(X_bar)`: `(1/2eps) int 1_{[0,eps)}(|Y|) d<Y>`.
pub fn graph_local_time<S: PathSource + ?Sized>(
    source: &S,
    qv: &QuadraticVariationModel,
    manifold: &Manifold,
    eps: f64,
    keep_per_path: bool,
) -> Result<LocalTimeEstimate> {
    check_eps(eps)?;
    if !matches!(manifold, Manifold::Graph(_)) {
        return Err(Error::NotAGraph);
    }
    let vals = fold_paths(
        source,
        Vec::new(),
        |_, p| path_graph_band(p, qv, manifold, eps),
        |mut vs, _, (plain, _)| {
            vs.push(plain / (2.0 * eps));
            vs
        },
    )?;
    Ok(LocalTimeEstimate {
        kind: LocalTimeKind::Graph,
        level: 0.0,
        bandwidth: eps,
        estimate: finish(vals, keep_per_path),
        crosscheck: None,
        crosscheck_mean_abs_diff: None,
        qv_mode: qv_mode(qv),
    })
}

/// Transversal density against symmetric local time of `phi(X)` at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelComparison {
    pub level: f64,
    pub transversal: EnsembleEstimate,
    pub symmetric: EnsembleEstimate,
    /// Discrete Tanaka estimate on `phi(X)`, for reference.
    pub tanaka: EnsembleEstimate,
    pub mean_abs_diff: f64,
    pub pooled_stderr: f64,
    /// Both estimators rerun at `eps / 2`.
    pub half_transversal: EnsembleEstimate,
    pub half_symmetric: EnsembleEstimate,
    /// Both estimators are identically zero on every path.
    pub both_zero: bool,
}

impl LevelComparison {
    /// Per-path agreement within `k` pooled standard errors; a level where
    /// both sides vanish identically passes.
    pub fn agrees_within(&self, k: f64) -> bool {
        self.both_zero || self.mean_abs_diff < k * self.pooled_stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlReport {
    pub bandwidth: f64,
    pub band: f64,
    pub levels: Vec<LevelComparison>,
    /// Paths that leave the band `{d < inner}` at some time.
    pub paths_exiting_band: usize,
    pub n_paths: usize,
}

/// Per path and level: `L^a_{A,phi}` with `A = {d < inner}` and `dt` weights,
/// against `L~^a(phi(X))` with analytic `d<phi(X)>`.
pub fn verify_l_equals_symmetric<S: PathSource + ?Sized>(
    source: &S,
    qv: &QuadraticVariationModel,
    extension: &GoodExtension,
    levels: &[f64],
    eps: f64,
) -> Result<LlReport> {
    check_eps(eps)?;
    if !qv.is_analytic() {
        return Err(Error::invalid(
            "the identity check uses analytic quadratic variation",
        ));
    }
    let phi = LevelFunction::GoodExtension(extension.clone());
    let region = Region::TubularBand {
        manifold: extension.manifold().clone(),
        width: extension.inner(),
    };
    let foliation = Foliation::new(phi.clone(), region);
    let nl = levels.len();
    struct PathOut {
        trans: Vec<f64>,
        sym: Vec<f64>,
        tan: Vec<f64>,
        trans_h: Vec<f64>,
        sym_h: Vec<f64>,
        exits: bool,
    }
    let outs = fold_paths(
        source,
        Vec::new(),
        |_, p| {
            let n = p.dim;
            let steps = p.valid_steps();
            let mut scratch = vec![0.0; n * n];
            let mut grad = vec![0.0; n];
            let mut o = PathOut {
                trans: vec![0.0; nl],
                sym: vec![0.0; nl],
                tan: vec![0.0; nl],
                trans_h: vec![0.0; nl],
                sym_h: vec![0.0; nl],
                exits: false,
            };
            let mut y = Vec::with_capacity(steps + 1);
            for k in 0..=steps {
                let x = p.state(k);
                let in_a = foliation.contains(x)?;
                o.exits |= !in_a;
                let v = phi.value(x)?;
                y.push(v);
                if k == steps {
                    break;
                }
                let dt = qv.component_weight_at(p, k, 0, &mut scratch);
                phi.gradient(x, &mut grad)?;
                let dphi = qv.directional_weight_at(p, k, &grad, &mut scratch);
                for (j, a) in levels.iter().enumerate() {
                    let z = (v - a).abs();
                    if z < eps {
                        if in_a {
                            o.trans[j] += dt;
                        }
                        o.sym[j] += dphi;
                    }
                    if z < 0.5 * eps {
                        if in_a {
                            o.trans_h[j] += dt;
                        }
                        o.sym_h[j] += dphi;
                    }
                }
            }
            for (j, a) in levels.iter().enumerate() {
                o.trans[j] /= 2.0 * eps;
                o.sym[j] /= 2.0 * eps;
                o.trans_h[j] /= eps;
                o.sym_h[j] /= eps;
                o.tan[j] = tanaka_local_time(&y, *a);
            }
            Ok(o)
        },
        |mut v, _, o| {
            v.push(o);
            v
        },
    )?;
    let column = |f: &dyn Fn(&PathOut) -> f64| -> Vec<f64> { outs.iter().map(f).collect() };
    let mut comparisons = Vec::with_capacity(nl);
    for (j, a) in levels.iter().enumerate() {
        let t = column(&|o| o.trans[j]);
        let s = column(&|o| o.sym[j]);
        let diff = mean_abs_diff(&t, &s);
        let both_zero = t.iter().chain(&s).all(|v| *v == 0.0);
        let te = EnsembleEstimate::summary(&t);
        let se = EnsembleEstimate::summary(&s);
        comparisons.push(LevelComparison {
            level: *a,
            pooled_stderr: pooled_stderr(te.stderr, se.stderr),
            transversal: te,
            symmetric: se,
            tanaka: EnsembleEstimate::summary(&column(&|o| o.tan[j])),
            mean_abs_diff: diff,
            half_transversal: EnsembleEstimate::summary(&column(&|o| o.trans_h[j])),
            half_symmetric: EnsembleEstimate::summary(&column(&|o| o.sym_h[j])),
            both_zero,
        });
    }
    Ok(LlReport {
        bandwidth: eps,
        band: extension.inner(),
        levels: comparisons,
        paths_exiting_band: outs.iter().filter(|o| o.exits).count(),
        n_paths: outs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlDiagnostic {
    /// Largest over paths of the window ratio `sup_w int_w 1_A eta / int_w 1_A d<phi(X)>`;
    /// `None` when the floor is violated.
    pub ratio_max: Option<f64>,
    pub ratio_mean: Option<f64>,
    /// Largest per-step ratio `eta_k / d<phi(X)>_k` in A.
    pub pointwise_max: Option<f64>,
    /// `inf grad phi^T g grad phi` over in-A steps of all paths.
    pub floor: f64,
    pub violation: bool,
    pub windows: usize,
    pub in_region_steps: usize,
}

/// Floor below which the foliation is flagged degenerate.
pub const DEGENERACY_FLOOR: f64 = 1e-8;

/// Realized control constant over `windows` equal time windows and the
/// non-degeneracy floor, both restricted to the region of `foliation`.
pub fn control_diagnostics<S: PathSource + ?Sized>(
    source: &S,
    qv: &QuadraticVariationModel,
    foliation: &Foliation,
    windows: usize,
) -> Result<ControlDiagnostic> {
    if windows == 0 {
        return Err(Error::invalid("at least one test window is required"));
    }
    struct PathOut {
        ratio: Option<f64>,
        pointwise: f64,
        floor: f64,
        steps: usize,
    }
    let outs = fold_paths(
        source,
        Vec::new(),
        |_, p| {
            let n = p.dim;
            qv.check(n, 0)?;
            let steps = p.valid_steps();
            let dt = p.grid.dt();
            let mut tensor = vec![0.0; n * n];
            let mut grad = vec![0.0; n];
            let mut eta_w = vec![0.0; windows];
            let mut q_w = vec![0.0; windows];
            let mut o = PathOut {
                ratio: None,
                pointwise: 0.0,
                floor: f64::INFINITY,
                steps: 0,
            };
            for k in 0..steps {
                let x = p.state(k);
                if !foliation.contains(x)? {
                    continue;
                }
                o.steps += 1;
                qv.step_tensor(p, k, &mut tensor)?;
                let eta = eta_from_tensor(&tensor, n);
                foliation.gradient(x, &mut grad)?;
                let mut q = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        q += grad[a] * tensor[a * n + b] * grad[b];
                    }
                }
                o.floor = o.floor.min(q / dt);
                if q > 0.0 {
                    o.pointwise = o.pointwise.max(eta / q);
                }
                let w = (k * windows / p.n_steps()).min(windows - 1);
                eta_w[w] += eta;
                q_w[w] += q;
            }
            let mut ratio: Option<f64> = None;
            for (e, q) in eta_w.iter().zip(&q_w) {
                if *q > 0.0 {
                    let r = e / q;
                    ratio = Some(ratio.map_or(r, |m| m.max(r)));
                }
            }
            o.ratio = ratio;
            Ok(o)
        },
        |mut v, _, o| {
            v.push(o);
            v
        },
    )?;
    let floor = outs.iter().map(|o| o.floor).fold(f64::INFINITY, f64::min);
    let in_region_steps: usize = outs.iter().map(|o| o.steps).sum();
    let violation = in_region_steps > 0 && floor <= DEGENERACY_FLOOR;
    let ratios: Vec<f64> = outs.iter().filter_map(|o| o.ratio).collect();
    let (ratio_max, ratio_mean, pointwise_max) = if violation || ratios.is_empty() {
        (None, None, None)
    } else {
        let mut acc = Accumulator::new();
        ratios.iter().for_each(|r| acc.push(*r));
        (
            Some(ratios.iter().copied().fold(0.0, f64::max)),
            Some(acc.mean()),
            Some(outs.iter().map(|o| o.pointwise).fold(0.0, f64::max)),
        )
    };
    Ok(ControlDiagnostic {
        ratio_max,
        ratio_mean,
        pointwise_max,
        floor: if in_region_steps == 0 { 0.0 } else { floor },
        violation: violation || in_region_steps == 0,
        windows,
        in_region_steps,
    })
}

/// Both sides of the conjectured weighting identity for a curved graph.
/// Exploratory: nothing here is asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureReport {
    pub bandwidth: f64,
    pub geometric: EnsembleEstimate,
    pub weighted_graph: EnsembleEstimate,
    pub graph: EnsembleEstimate,
    pub discrepancy: f64,
    pub pooled_stderr: f64,
    pub exploratory: bool,
}

pub fn conjecture_probe<S: PathSource + ?Sized>(
    source: &S,
    qv: &QuadraticVariationModel,
    manifold: &Manifold,
    eps: f64,
) -> Result<ConjectureReport> {
    check_eps(eps)?;
    if !matches!(manifold, Manifold::Graph(_)) {
        return Err(Error::NotAGraph);
    }
    let reach = manifold.reach().reach;
    if eps >= reach {
        return Err(Error::BandExceedsReach { width: eps, reach });
    }
    let (geo, wg, gr) = fold_paths(
        source,
        (Vec::new(), Vec::new(), Vec::new()),
        |_, p| {
            let (g, _) = path_geometric_band(p, qv, manifold, eps)?;
            let (plain, weighted) = path_graph_band(p, qv, manifold, eps)?;
            Ok((g, weighted, plain))
        },
        |(mut a, mut b, mut c), _, (g, w, pl)| {
            a.push(g / (2.0 * eps));
            b.push(w / (2.0 * eps));
            c.push(pl / (2.0 * eps));
            (a, b, c)
        },
    )?;
    let geometric = EnsembleEstimate::summary(&geo);
    let weighted_graph = EnsembleEstimate::summary(&wg);
    Ok(ConjectureReport {
        bandwidth: eps,
        discrepancy: weighted_graph.mean - geometric.mean,
        pooled_stderr: pooled_stderr(geometric.stderr, weighted_graph.stderr),
        geometric,
        weighted_graph,
        graph: EnsembleEstimate::summary(&gr),
        exploratory: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_path_has_no_local_time_off_level() {
        let y = vec![0.5; 11];
        let dqv = vec![0.1; 10];
        assert_eq!(
            band_local_time(&y, &dqv, 0.0, 0.1, LocalTimeKind::Symmetric1d),
            0.0
        );
        assert_eq!(tanaka_local_time(&y, 0.0), 0.0);
    }

    #[test]
    fn band_kinds() {
        let y = [0.0, 0.05, -0.05, 0.2];
        let dqv = [1.0, 1.0, 1.0];
        assert_eq!(
            band_local_time(&y, &dqv, 0.0, 0.1, LocalTimeKind::Symmetric1d),
            15.0
        );
        assert_eq!(
            band_local_time(&y, &dqv, 0.0, 0.1, LocalTimeKind::Right1d),
            20.0
        );
        assert_eq!(
            band_local_time(&y, &dqv, 0.0, 0.1, LocalTimeKind::Left1d),
            20.0
        );
    }

    #[test]
    fn tanaka_of_a_crossing() {
        // 1 -> -1: |-1| - |1| - (+1)(-2) = 2
        assert_eq!(tanaka_local_time(&[1.0, -1.0], 0.0), 2.0);
        // monotone path above the level accumulates nothing
        assert_eq!(tanaka_local_time(&[1.0, 2.0, 3.0], 0.0), 0.0);
    }
}
