//! Occupation measures `mu_i(f) = int_0^T f(X_t) d<X^i>_t`, their push-forward
//! through a foliation `phi`, the transversal density `L^a`, and the empirical
//! disintegration `Q(a, dx)`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Foliation, Manifold};
use crate::paths::{fold_paths, PathSource, SamplePath};
use crate::quadrature::integrate_singular_at_zero;
use crate::qv::QuadraticVariationModel;
use crate::stats::{compensated_sum, Accumulator, EnsembleEstimate, VecAccumulator};

/// Uniform levels `a_m = start + m * spacing`, `m = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelGrid {
    pub start: f64,
    pub spacing: f64,
    pub count: usize,
}

impl LevelGrid {
    pub fn new(start: f64, spacing: f64, count: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) || !start.is_finite() {
            return Err(Error::invalid(
                "level grid needs a finite start and positive spacing",
            ));
        }
        if count == 0 {
            return Err(Error::invalid("level grid is empty"));
        }
        Ok(Self {
            start,
            spacing,
            count,
        })
    }

    /// Smallest grid with the given spacing starting at `lo` and reaching `hi`.
    pub fn covering(lo: f64, hi: f64, spacing: f64) -> Result<Self> {
        if !(hi >= lo) {
            return Err(Error::invalid("level grid bounds are reversed"));
        }
        let count = libm::ceil((hi - lo) / spacing - 1e-9) as usize + 1;
        Self::new(lo, spacing, count)
    }

    /// A single level.
    pub fn single(level: f64) -> Self {
        Self {
            start: level,
            spacing: 1.0,
            count: 1,
        }
    }

    #[inline]
    pub fn level(&self, m: usize) -> f64 {
        self.start + m as f64 * self.spacing
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.count).map(|m| self.level(m)).collect()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Index range of levels with `|y - a_m| < eps`.
    #[inline]
    fn band_range(&self, y: f64, eps: f64) -> core::ops::Range<usize> {
        let lo = libm::ceil((y - eps - self.start) / self.spacing);
        let hi = libm::floor((y + eps - self.start) / self.spacing);
        let lo = if lo < 0.0 { 0 } else { lo as usize };
        if hi < 0.0 {
            return 0..0;
        }
        let hi = (hi as usize).min(self.count - 1);
        lo..hi.saturating_add(1).max(lo)
    }

    fn check_coverage(&self, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidBandwidth(eps));
        }
        if self.count > 1 && self.spacing > eps {
            return Err(Error::CoverageGap {
                spacing: self.spacing,
                eps,
            });
        }
        Ok(())
    }
}

/// Adds `w / (2 eps)` to every level whose band `(a - eps, a + eps)` holds `y`.
#[inline]
fn deposit(grid: &LevelGrid, y: f64, eps: f64, w: f64, out: &mut [f64]) -> bool {
    let mut hit = false;
    let scale = w / (2.0 * eps);
    for m in grid.band_range(y, eps) {
        if (y - grid.level(m)).abs() < eps {
            out[m] += scale;
            hit = true;
        }
    }
    hit
}

/// Per-path band sums.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBands {
    /// `L^{a_m}` estimates at bandwidth `eps`.
    pub values: Vec<f64>,
    /// The same at `eps / 2`, when requested.
    pub half: Option<Vec<f64>>,
    /// In-A `d<X^i>` mass.
    pub mass: f64,
    /// `phi` range of the in-A samples with positive weight.
    pub phi_range: Option<(f64, f64)>,
}

/// Band sums of one path: `(1/2eps) sum_k 1_A 1_{|phi - a_m| < eps} d<X^i>_k`.
pub fn path_band_sums(
    path: &SamplePath,
    qv: &QuadraticVariationModel,
    foliation: &Foliation,
    component: usize,
    eps: f64,
    grid: &LevelGrid,
    with_half: bool,
) -> Result<PathBands> {
    qv.check(path.dim, component)?;
    let n = path.dim;
    let mut scratch = vec![0.0; n * n];
    let mut values = vec![0.0; grid.len()];
    let mut half = with_half.then(|| vec![0.0; grid.len()]);
    let mut mass = 0.0;
    let mut range: Option<(f64, f64)> = None;
    for k in 0..path.valid_steps() {
        let x = path.state(k);
        let Some(y) = foliation.eval_in_region(x)? else {
            continue;
        };
        let w = qv.component_weight_at(path, k, component, &mut scratch);
        if w == 0.0 {
            continue;
        }
        mass += w;
        range = Some(match range {
            None => (y, y),
            Some((lo, hi)) => (lo.min(y), hi.max(y)),
        });
        deposit(grid, y, eps, w, &mut values);
        if let Some(h) = half.as_mut() {
            deposit(grid, y, 0.5 * eps, w, h);
        }
    }
    Ok(PathBands {
        values,
        half,
        mass,
        phi_range: range,
    })
}

/// `2 L(eps/2) - L(eps)` next to the two inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardsonPair {
    pub half_bandwidth: f64,
    pub half_values: Vec<f64>,
    pub half_stderr: Vec<f64>,
    pub extrapolated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub bandwidth: f64,
    pub spacing: f64,
    /// `[min phi - eps, max phi + eps]` over all in-A samples.
    pub support: Option<(f64, f64)>,
    pub component: usize,
    /// Mean in-A `d<X^i>` mass per path.
    pub mass: EnsembleEstimate,
    pub richardson: Option<RichardsonPair>,
    /// Per-path values, kept on request.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_path: Vec<Vec<f64>>,
}

impl DensityEstimate {
    /// Trapezoid rule `int L^a da` over the level grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.spacing)
    }

    /// Value at the level closest to `a`.
    pub fn at(&self, a: f64) -> Option<(f64, f64)> {
        let m = self
            .levels
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 - a).abs().total_cmp(&(y.1 - a).abs()))?
            .0;
        Some((self.values[m], self.stderr[m]))
    }
}

pub fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => 0.0,
        n => spacing * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityOptions {
    pub component: usize,
    pub bandwidth: f64,
    /// Also compute the `eps / 2` estimate and the extrapolation.
    pub richardson: bool,
    pub keep_per_path: bool,
}

impl DensityOptions {
    pub fn new(component: usize, bandwidth: f64) -> Self {
        Self {
            component,
            bandwidth,
            richardson: false,
            keep_per_path: false,
        }
    }

    pub fn with_richardson(mut self) -> Self {
        self.richardson = true;
        self
    }

    pub fn keep_per_path(mut self) -> Self {
        self.keep_per_path = true;
        self
    }
}

/// Ensemble estimate of the transversal density `L^{a_m}_{i,A,phi}`.
pub fn transversal_density<S: PathSource + ?Sized>(
    source: &S,
    qv: &QuadraticVariationModel,
    foliation: &Foliation,
    grid: &LevelGrid,
    opts: DensityOptions,
) -> Result<DensityEstimate> {
    let eps = opts.bandwidth;
    grid.check_coverage(eps)?;
    struct Acc {
        full: VecAccumulator,
        half: VecAccumulator,
        mass: Accumulator,
        range: Option<(f64, f64)>,
        per_path: Vec<Vec<f64>>,
    }
    let init = Acc {
        full: VecAccumulator::new(grid.len()),
        half: VecAccumulator::new(if opts.richardson { grid.len() } else { 0 }),
        mass: Accumulator::new(),
        range: None,
        per_path: Vec::new(),
    };
    let acc = fold_paths(
        source,
        init,
        |_, p| path_band_sums(p, qv, foliation, opts.component, eps, grid, opts.richardson),
        |mut acc, _, b| {
            acc.full.push(&b.values);
            if let Some(h) = &b.half {
                acc.half.push(h);
            }
            acc.mass.push(b.mass);
            if let Some((lo, hi)) = b.phi_range {
                acc.range = Some(match acc.range {
                    None => (lo, hi),
                    Some((a, c)) => (a.min(lo), c.max(hi)),
                });
            }
            if opts.keep_per_path {
                acc.per_path.push(b.values);
            }
            acc
        },
    )?;
    let values = acc.full.means().to_vec();
    let richardson = opts.richardson.then(|| {
        let half_values = acc.half.means().to_vec();
        RichardsonPair {
            half_bandwidth: 0.5 * eps,
            extrapolated: half_values
                .iter()
                .zip(&values)
                .map(|(h, f)| 2.0 * h - f)
                .collect(),
            half_stderr: acc.half.stderrs(),
            half_values,
        }
    });
    Ok(DensityEstimate {
        levels: grid.levels(),
        stderr: acc.full.stderrs(),
        values,
        bandwidth: eps,
        spacing: grid.spacing,
        support: acc.range.map(|(lo, hi)| (lo - eps, hi + eps)),
        component: opts.component,
        mass: acc.mass.estimate(),
        richardson,
        per_path: acc.per_path,
    })
}

/// Result of an occupation integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationIntegral {
    pub estimate: EnsembleEstimate,
    /// In-A samples dropped because they lie on the declared singular set.
    pub skipped: usize,
}

/// `int_0^T 1_A(X_t) f(X_t) d<X^i>_t` of one path.
///
/// Samples where `f` is not finite are skipped when `singular` flags them,
/// and are an error otherwise.
pub fn path_occupation_integral(
    path: &SamplePath,
    qv: &QuadraticVariationModel,
    foliation: &Foliation,
    component: usize,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    singular: Option<&(dyn Fn(&[f64]) -> bool + Sync)>,
) -> Result<(f64, usize)> {
    qv.check(path.dim, component)?;
    let n = path.dim;
    let mut scratch = vec![0.0; n * n];
    let mut sum = 0.0;
    let mut skipped = 0;
    for k in 0..path.valid_steps() {
        let x = path.state(k);
        if !foliation.contains(x)? {
            continue;
        }
        let w = qv.component_weight_at(path, k, component, &mut scratch);
        let v = f(x);
        if !v.is_finite() {
            if singular.is_some_and(|s| s(x)) {
                skipped += 1;
                continue;
            }
            return Err(Error::NonFiniteIntegrand {
                path: path.index as usize,
                step: k,
                value: v,
            });
        }
        sum += v * w;
    }
    Ok((sum, skipped))
}

/// Monte-Carlo occupation integral over the region of `foliation`.
pub fn occupation_integral<S: PathSource + ?Sized>(
    source: &S,
    qv: &QuadraticVariationModel,
    foliation: &Foliation,
    component: usize,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    singular: Option<&(dyn Fn(&[f64]) -> bool + Sync)>,
) -> Result<OccupationIntegral> {
    let (values, skipped) = fold_paths(
        source,
        (Vec::with_capacity(source.n_paths()), 0usize),
        |_, p| path_occupation_integral(p, qv, foliation, component, f, singular),
        |(mut vals, sk), _, (v, s)| {
            vals.push(v);
            (vals, sk + s)
        },
    )?;
    Ok(OccupationIntegral {
        estimate: EnsembleEstimate::from_values(values),
        skipped,
    })
}

/// Weighted sample cloud `{(X_{t_k}, w_k)}` of in-A states, pooled over paths
/// with weights divided by the number of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    pub dim: usize,
    pub component: usize,
    /// Flat `len * dim` sample points.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub n_paths: usize,
}

impl OccupationMeasure {
    pub fn build<S: PathSource + ?Sized>(
        source: &S,
        qv: &QuadraticVariationModel,
        foliation: &Foliation,
        component: usize,
    ) -> Result<Self> {
        let n_paths = source.n_paths();
        let scale = 1.0 / n_paths.max(1) as f64;
        let (points, weights, dim) = fold_paths(
            source,
            (Vec::new(), Vec::new(), 0usize),
            |_, p| {
                qv.check(p.dim, component)?;
                let mut scratch = vec![0.0; p.dim * p.dim];
                let mut pts = Vec::new();
                let mut ws = Vec::new();
                for k in 0..p.valid_steps() {
                    let x = p.state(k);
                    if !foliation.contains(x)? {
                        continue;
                    }
                    let w = qv.component_weight_at(p, k, component, &mut scratch);
                    if w > 0.0 {
                        pts.extend_from_slice(x);
                        ws.push(w * scale);
                    }
                }
                Ok((pts, ws, p.dim))
            },
            |(mut pts, mut ws, _), _, (p, w, d)| {
                pts.extend(p);
                ws.extend(w);
                (pts, ws, d)
            },
        )?;
        Ok(Self {
            dim,
            component,
            points,
            weights,
            n_paths,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// `mu(f)` with the same pooling as the weights.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        compensated_sum((0..self.len()).map(|j| self.weights[j] * f(self.point(j))))
    }
}

/// One level slab `[a_m - da/2, a_m + da/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slab {
    pub level: f64,
    /// Estimated `nu`-weight of the slab.
    pub nu: f64,
    pub points: Vec<f64>,
    /// Conditional probabilities; they sum to one when `nu > 0`.
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Disintegration {
    pub dim: usize,
    pub origin: f64,
    pub spacing: f64,
    pub slabs: BTreeMap<i64, Slab>,
}

/// Slab index with `y in [origin + (m - 1/2) da, origin + (m + 1/2) da)`.
#[inline]
pub fn slab_index(y: f64, origin: f64, spacing: f64) -> i64 {
    let mut m = libm::floor((y - origin) / spacing + 0.5) as i64;
    let center = |m: i64| origin + m as f64 * spacing;
    if y < center(m) - 0.5 * spacing {
        m -= 1;
    } else if y >= center(m) + 0.5 * spacing {
        m += 1;
    }
    m
}

impl Disintegration {
    pub fn level(&self, m: i64) -> f64 {
        self.origin + m as f64 * self.spacing
    }

    /// `sum_m nu_m int f dQ(a_m)`.
    pub fn reconstruct(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        compensated_sum(self.slabs.values().map(|s| {
            let inner = compensated_sum(
                s.probs
                    .iter()
                    .enumerate()
                    .map(|(j, q)| q * f(&s.points[j * self.dim..(j + 1) * self.dim])),
            );
            s.nu * inner
        }))
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.slabs.values().map(|s| s.nu))
    }
}

/// Bins the occupation measure by `phi` into slabs centred on `origin + m da`.
pub fn disintegrate(
    measure: &OccupationMeasure,
    foliation: &Foliation,
    origin: f64,
    spacing: f64,
) -> Result<Disintegration> {
    if measure.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if !(spacing > 0.0) {
        return Err(Error::invalid("slab spacing must be positive"));
    }
    let mut slabs: BTreeMap<i64, Slab> = BTreeMap::new();
    for j in 0..measure.len() {
        let x = measure.point(j);
        let y = foliation.value(x)?;
        let m = slab_index(y, origin, spacing);
        let slab = slabs.entry(m).or_insert_with(|| Slab {
            level: origin + m as f64 * spacing,
            nu: 0.0,
            points: Vec::new(),
            probs: Vec::new(),
        });
        slab.points.extend_from_slice(x);
        slab.probs.push(measure.weights[j]);
    }
    for s in slabs.values_mut() {
        s.nu = compensated_sum(s.probs.iter().copied());
        if s.nu > 0.0 {
            let nu = s.nu;
            s.probs.iter_mut().for_each(|q| *q /= nu);
        }
    }
    Ok(Disintegration {
        dim: measure.dim,
        origin,
        spacing,
        slabs,
    })
}

/// Both sides of the occupation time formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaResidual {
    pub lhs: EnsembleEstimate,
    pub rhs: f64,
    pub residual: f64,
    pub bandwidth: f64,
    pub density_spacing: f64,
    pub bin_spacing: f64,
}

/// `|LHS - RHS| / max(|LHS|, 1e-12)` with `LHS = mu_i(f)` and
/// `RHS = sum_m (int f dQ(a_m)) L^{a_m} da`. The density uses the band
/// estimator on `grid`; `Q` is a binning of the same samples at `bin_spacing`.
pub fn occupation_formula_residual<S: PathSource + ?Sized>(
    source: &S,
    qv: &QuadraticVariationModel,
    foliation: &Foliation,
    component: usize,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    eps: f64,
    grid: &LevelGrid,
    bin_spacing: f64,
) -> Result<FormulaResidual> {
    grid.check_coverage(eps)?;
    if !(bin_spacing > 0.0) {
        return Err(Error::invalid("bin spacing must be positive"));
    }
    let origin = grid.start;
    struct Acc {
        lhs: Vec<f64>,
        density: VecAccumulator,
        bins: BTreeMap<i64, (f64, f64)>,
    }
    let init = Acc {
        lhs: Vec::new(),
        density: VecAccumulator::new(grid.len()),
        bins: BTreeMap::new(),
    };
    let acc = fold_paths(
        source,
        init,
        |_, p| {
            qv.check(p.dim, component)?;
            let mut scratch = vec![0.0; p.dim * p.dim];
            let mut values = vec![0.0; grid.len()];
            let mut bins: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
            let mut lhs = 0.0;
            for k in 0..p.valid_steps() {
                let x = p.state(k);
                let Some(y) = foliation.eval_in_region(x)? else {
                    continue;
                };
                let w = qv.component_weight_at(p, k, component, &mut scratch);
                if w == 0.0 {
                    continue;
                }
                let v = f(x);
                if !v.is_finite() {
                    return Err(Error::NonFiniteIntegrand {
                        path: p.index as usize,
                        step: k,
                        value: v,
                    });
                }
                lhs += v * w;
                deposit(grid, y, eps, w, &mut values);
                let e = bins
                    .entry(slab_index(y, origin, bin_spacing))
                    .or_insert((0.0, 0.0));
                e.0 += w;
                e.1 += w * v;
            }
            Ok((lhs, values, bins))
        },
        |mut acc, _, (lhs, values, bins)| {
            acc.lhs.push(lhs);
            acc.density.push(&values);
            for (m, (w, wf)) in bins {
                let e = acc.bins.entry(m).or_insert((0.0, 0.0));
                e.0 += w;
                e.1 += wf;
            }
            acc
        },
    )?;
    let density = acc.density.means();
    let mut rhs = 0.0;
    for (m, l) in density.iter().enumerate() {
        if *l == 0.0 {
            continue;
        }
        let b = slab_index(grid.level(m), origin, bin_spacing);
        if let Some((w, wf)) = acc.bins.get(&b) {
            if *w > 0.0 {
                rhs += wf / w * l * grid.spacing;
            }
        }
    }
    let lhs = EnsembleEstimate::from_values(acc.lhs).strip();
    let residual = (lhs.mean - rhs).abs() / lhs.mean.abs().max(1e-12);
    Ok(FormulaResidual {
        lhs,
        rhs,
        residual,
        bandwidth: eps,
        density_spacing: grid.spacing,
        bin_spacing,
    })
}

/// Fraction of in-A `d<X^i>` mass carried by `{|phi(X)| < delta}`, per delta.
pub fn level_set_mass_fraction<S: PathSource + ?Sized>(
    source: &S,
    qv: &QuadraticVariationModel,
    foliation: &Foliation,
    component: usize,
    deltas: &[f64],
) -> Result<Vec<f64>> {
    let (near, total) = fold_paths(
        source,
        (vec![0.0; deltas.len()], 0.0),
        |_, p| {
            qv.check(p.dim, component)?;
            let mut scratch = vec![0.0; p.dim * p.dim];
            let mut near = vec![0.0; deltas.len()];
            let mut total = 0.0;
            for k in 0..p.valid_steps() {
                let Some(y) = foliation.eval_in_region(p.state(k))? else {
                    continue;
                };
                let w = qv.component_weight_at(p, k, component, &mut scratch);
                total += w;
                for (nd, d) in near.iter_mut().zip(deltas) {
                    if y.abs() < *d {
                        *nd += w;
                    }
                }
            }
            Ok((near, total))
        },
        |(mut near, total), _, (n, t)| {
            near.iter_mut().zip(&n).for_each(|(a, b)| *a += b);
            (near, total + t)
        },
    )?;
    if total == 0.0 {
        return Err(Error::EmptyMeasure);
    }
    Ok(near.into_iter().map(|n| n / total).collect())
}

/// One-dimensional transversal profile `f2(a)`, `a = d(x, Gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// `a^{-p}`.
    Power {
        p: f64,
    },
    /// `|log a|`.
    LogAbs,
    Constant {
        value: f64,
    },
}

impl Profile {
    pub fn eval(&self, a: f64) -> f64 {
        match self {
            Self::Power { p } => libm::pow(a, -p),
            Self::LogAbs => libm::log(a).abs(),
            Self::Constant { value } => *value,
        }
    }
}

/// How the profile enters `f`.
#[derive(Debug, Clone, Copy)]
pub enum SingularForm {
    /// `f(x) = f1(x) f2(d(x, Gamma))` with `|f1| <= f1_bound` on the ball.
    Product {
        f1: fn(&[f64]) -> f64,
        f1_bound: f64,
    },
    /// `f2(d)` on the band `{d < width}` and the constant `outside` off it.
    Banded { width: f64, outside: f64 },
    /// `f(x) = f2(d(x, Gamma))`.
    Transversal,
}

#[derive(Debug, Clone)]
pub struct SingularFunction {
    pub manifold: Manifold,
    pub profile: Profile,
    pub form: SingularForm,
}

impl SingularFunction {
    pub fn transversal(manifold: Manifold, profile: Profile) -> Self {
        Self {
            manifold,
            profile,
            form: SingularForm::Transversal,
        }
    }

    /// `f(x)`; infinite or NaN on the singular set.
    pub fn value(&self, x: &[f64]) -> f64 {
        let Ok(d) = self.manifold.distance(x) else {
            return f64::NAN;
        };
        match self.form {
            SingularForm::Product { f1, .. } => f1(x) * self.profile.eval(d),
            SingularForm::Banded { width, outside } => {
                if d < width {
                    self.profile.eval(d)
                } else {
                    outside
                }
            }
            SingularForm::Transversal => self.profile.eval(d),
        }
    }

    /// The declared singular set: points on `Gamma`.
    pub fn is_singular_point(&self, x: &[f64]) -> bool {
        self.manifold.distance(x).map_or(true, |d| d == 0.0)
    }

    /// `M_{a,R}(|f|)`, the sup of `|f|` over `{d(x, Gamma) = a, |x| <= R}`.
    pub fn envelope(&self, a: f64) -> f64 {
        match self.form {
            SingularForm::Product { f1_bound, .. } => f1_bound * self.profile.eval(a).abs(),
            SingularForm::Banded { width, outside } => {
                if a < width {
                    self.profile.eval(a).abs()
                } else {
                    outside.abs()
                }
            }
            SingularForm::Transversal => self.profile.eval(a).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityCertificate {
    pub pass: bool,
    /// `int_0^1 M_{a,R}(|f|) da`, infinite on failure.
    pub integral: f64,
    pub tail_ratio: f64,
    pub quadrature_converged: bool,
    pub radius: f64,
}

/// Certifies `int_0^1 M_{a,R}(|f|) da < inf` by dyadic adaptive quadrature.
pub fn integrability_check(f: &SingularFunction, radius: f64) -> IntegrabilityCertificate {
    let r = integrate_singular_at_zero(&|a: f64| f.envelope(a), 60);
    IntegrabilityCertificate {
        pass: r.convergent && r.quadrature_converged,
        integral: r.value,
        tail_ratio: r.tail_ratio,
        quadrature_converged: r.quadrature_converged,
        radius,
    }
}

/// Exponents for `f = d(., Gamma)^{-p}` in `R^N`: the transversal criterion
/// against the `L^q_loc` route, which needs `q > max(N/2, 1)` while
/// `d^{-p}` is in `L^q_loc` near `Gamma` only for `q < 1/p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentComparison {
    pub p: f64,
    pub dim: usize,
    pub transversal_pass: bool,
    pub q_required_above: f64,
    pub q_integrable_below: f64,
    pub lq_route_available: bool,
}

pub fn exponent_comparison(p: f64, dim: usize) -> ExponentComparison {
    let q_req = (dim as f64 / 2.0).max(1.0);
    let q_max = if p <= 0.0 { f64::INFINITY } else { 1.0 / p };
    ExponentComparison {
        p,
        dim,
        transversal_pass: p < 1.0,
        q_required_above: q_req,
        q_integrable_below: q_max,
        lq_route_available: q_req < q_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{LevelFunction, Region};
    use crate::paths::{PathEnsemble, SdeModel, TimeGrid};

    #[test]
    fn band_range_is_exact() {
        let g = LevelGrid::new(-1.0, 0.1, 21).unwrap();
        let mut out = vec![0.0; 21];
        assert!(deposit(&g, 0.05, 0.1, 0.2, &mut out));
        let hit: Vec<usize> = (0..21).filter(|m| out[*m] > 0.0).collect();
        assert_eq!(hit, vec![10, 11]);
        assert!(!deposit(&g, 5.0, 0.1, 1.0, &mut out));
    }

    #[test]
    fn coverage_gap_rejected() {
        let g = LevelGrid::new(0.0, 0.2, 5).unwrap();
        assert!(matches!(
            g.check_coverage(0.1),
            Err(Error::CoverageGap { .. })
        ));
        assert!(g.check_coverage(0.2).is_ok());
    }

    #[test]
    fn slab_index_half_open() {
        assert_eq!(slab_index(0.05, 0.0, 0.1), 1);
        assert_eq!(slab_index(0.0499, 0.0, 0.1), 0);
        assert_eq!(slab_index(-0.05, 0.0, 0.1), 0);
    }

    #[test]
    fn frozen_density_vanishes() {
        let model = SdeModel::frozen(vec![0.3]);
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let ens = PathEnsemble::new(model.clone(), grid, 3, 1).unwrap();
        let qv = QuadraticVariationModel::analytic(&model);
        let fol = Foliation::coordinate(0, 1);
        let lg = LevelGrid::new(-1.0, 0.1, 21).unwrap();
        let d = transversal_density(&ens, &qv, &fol, &lg, DensityOptions::new(0, 0.1)).unwrap();
        assert!(d.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_region_integral_is_zero() {
        let model = SdeModel::standard_bm(vec![0.0]);
        let ens = PathEnsemble::new(model.clone(), TimeGrid::new(1.0, 50).unwrap(), 2, 0).unwrap();
        let qv = QuadraticVariationModel::analytic(&model);
        let fol = Foliation::new(
            LevelFunction::Coordinate { index: 0, dim: 1 },
            Region::Empty,
        );
        let r = occupation_integral(&ens, &qv, &fol, 0, &|_| 1.0, None).unwrap();
        assert_eq!(r.estimate.mean, 0.0);
    }

    #[test]
    fn exponent_table() {
        let c = exponent_comparison(0.9, 3);
        assert!(c.transversal_pass);
        assert_eq!(c.q_required_above, 1.5);
        assert!((c.q_integrable_below - 1.0 / 0.9).abs() < 1e-15);
        assert!(!c.lq_route_available);
        assert!(!exponent_comparison(1.0, 2).transversal_pass);
    }
}
