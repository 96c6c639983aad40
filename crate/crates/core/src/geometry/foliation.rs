//! Level functions `phi`, region masks `A`, and the good extension of the
//! distance function.

use alloc::vec::Vec;

use super::{GraphSurface, Manifold};
use crate::error::{Error, Result};
use crate::linalg;

/// Quintic smoothstep `6u^5 - 15u^4 + 10u^3` on `[0, 1]`, clamped outside.
pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (u * (6.0 * u - 15.0) + 10.0)
}

fn smoothstep_deriv(u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    30.0 * u * u * (u - 1.0) * (u - 1.0)
}

/// `int_0^u (1 - smoothstep)`; reaches 1/2 at `u = 1`.
fn saturating_integral(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let u4 = u * u * u * u;
    u - (u4 * u * u - 3.0 * u4 * u + 2.5 * u4)
}

/// `phi = theta d + (1 - theta) d_tilde` with `phi = d` on `{d <= inner}`.
///
/// With `u = (d - inner) / (outer - inner)`, the cut-off is
/// `theta = 1 - S(min(2u, 1))` and `d_tilde = inner + (outer - inner) q(u)`,
/// `q(u) = int_0^u (1 - S)`, is a C² saturating profile of the distance.
/// Beyond `outer` the function is the constant `inner + (outer - inner) / 2`,
/// which is larger than every band value. The profile is increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodExtension {
    manifold: Manifold,
    inner: f64,
    outer: f64,
}

impl GoodExtension {
    /// `outer` is the reach, or `2 * inner` when the reach is infinite.
    pub fn new(manifold: Manifold, inner: f64) -> Result<Self> {
        if !manifold.is_leaf() {
            return Err(Error::PiecewiseUnsupported("good extension"));
        }
        let reach = manifold.reach().reach;
        if !(reach > 0.0) {
            return Err(Error::invalid("good extension needs a positive reach"));
        }
        if !(inner > 0.0 && inner < reach) {
            return Err(Error::BandExceedsReach {
                width: inner,
                reach,
            });
        }
        let outer = if reach.is_finite() {
            reach
        } else {
            2.0 * inner
        };
        Ok(Self {
            manifold,
            inner,
            outer,
        })
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    /// Radial profile `G` with `phi = G(d(x, Gamma))`.
    pub fn profile(&self, d: f64) -> f64 {
        if d <= self.inner {
            return d;
        }
        let w = self.outer - self.inner;
        let u = (d - self.inner) / w;
        let theta = 1.0 - smoothstep(2.0 * u);
        let tilde = self.inner + w * saturating_integral(u);
        theta * d + (1.0 - theta) * tilde
    }

    pub fn profile_deriv(&self, d: f64) -> f64 {
        if d <= self.inner {
            return 1.0;
        }
        let w = self.outer - self.inner;
        let u = (d - self.inner) / w;
        let theta = 1.0 - smoothstep(2.0 * u);
        let dtheta = -2.0 * smoothstep_deriv(2.0 * u) / w;
        let tilde = self.inner + w * saturating_integral(u);
        let dtilde = 1.0 - smoothstep(u);
        dtheta * (d - tilde) + theta + (1.0 - theta) * dtilde
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.profile(self.manifold.distance(x)?))
    }

    /// `G'(d) grad d`; zero beyond `outer`. On the manifold the one-sided
    /// gradient along the orientation normal is returned.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.manifold.distance(x)?;
        if d >= self.outer {
            out.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        let s = self.manifold.signed_distance(x)?;
        let n = self.manifold.gradient_signed_distance(x)?;
        let g = self.profile_deriv(d) * if s < 0.0 { -1.0 } else { 1.0 };
        for (o, ni) in out.iter_mut().zip(&n) {
            *o = g * ni;
        }
        Ok(())
    }
}

/// The scalar field `phi` of a foliation.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelFunction {
    /// `phi(x) = x^index` (zero-based).
    Coordinate {
        index: usize,
        dim: usize,
    },
    /// `phi(x) = |x - center|^2`.
    SquaredNorm {
        center: Vec<f64>,
    },
    /// `phi(x) = x^N - g(x_bar)`.
    GraphDifference(GraphSurface),
    SignedDistance(Manifold),
    GoodExtension(GoodExtension),
    /// `x1+ - (x1+ - x2+)+ - ((-x1)+ - ((-x1)+ - (-x2)+)+)` at a square corner.
    SquareCorner,
    /// `x1+ - (x1+ - x2+)+ - |((-x1)+, (-x2)+)|` for the crossing lines.
    CrossingLines,
    /// `d(x, Gamma)` on `D1 u D3`, `-d(x, Gamma)` on `D2 u D4`.
    CrossingSignedDistance,
}

/// Value and gradient in two variables.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    g: [f64; 2],
}

impl Dual {
    fn var(v: f64, i: usize) -> Self {
        let mut g = [0.0; 2];
        g[i] = 1.0;
        Self { v, g }
    }

    fn pos(self) -> Self {
        if self.v > 0.0 {
            self
        } else {
            Self {
                v: 0.0,
                g: [0.0; 2],
            }
        }
    }

    fn neg(self) -> Self {
        Self {
            v: -self.v,
            g: [-self.g[0], -self.g[1]],
        }
    }

    fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            g: [self.g[0] - o.g[0], self.g[1] - o.g[1]],
        }
    }

    fn hypot(a: Self, b: Self) -> Self {
        let r = libm::sqrt(a.v * a.v + b.v * b.v);
        if r == 0.0 {
            return Self {
                v: 0.0,
                g: [0.0; 2],
            };
        }
        Self {
            v: r,
            g: [
                (a.v * a.g[0] + b.v * b.g[0]) / r,
                (a.v * a.g[1] + b.v * b.g[1]) / r,
            ],
        }
    }
}

fn square_corner(x: &[f64]) -> Dual {
    let (x1, x2) = (Dual::var(x[0], 0), Dual::var(x[1], 1));
    let (p1, p2) = (x1.pos(), x2.pos());
    let (m1, m2) = (x1.neg().pos(), x2.neg().pos());
    p1.sub(p1.sub(p2).pos()).sub(m1.sub(m1.sub(m2).pos()))
}

fn crossing_lines(x: &[f64]) -> Dual {
    let (x1, x2) = (Dual::var(x[0], 0), Dual::var(x[1], 1));
    let (p1, p2) = (x1.pos(), x2.pos());
    let psi = Dual::hypot(x1.neg().pos(), x2.neg().pos()).neg();
    p1.sub(p1.sub(p2).pos()).sub(psi.neg())
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl LevelFunction {
    pub fn provenance(&self) -> &'static str {
        match self {
            Self::Coordinate { .. } => "coordinate",
            Self::SquaredNorm { .. } => "squared-norm",
            Self::GraphDifference(_) => "graph-difference",
            Self::SignedDistance(_) => "signed-distance",
            Self::GoodExtension(_) => "good-extension-of-distance",
            Self::SquareCorner | Self::CrossingLines | Self::CrossingSignedDistance => {
                "explicit-piecewise"
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Coordinate { dim, .. } => *dim,
            Self::SquaredNorm { center } => center.len(),
            Self::GraphDifference(g) => g.dim(),
            Self::SignedDistance(m) => m.dim(),
            Self::GoodExtension(e) => e.manifold().dim(),
            Self::SquareCorner | Self::CrossingLines | Self::CrossingSignedDistance => 2,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(match self {
            Self::Coordinate { index, .. } => x[*index],
            Self::SquaredNorm { center } => {
                let d = linalg::dist(x, center);
                d * d
            }
            Self::GraphDifference(g) => g.height_gap(x),
            Self::SignedDistance(m) => m.signed_distance_global(x)?,
            Self::GoodExtension(e) => e.value(x)?,
            Self::SquareCorner => square_corner(x).v,
            Self::CrossingLines => crossing_lines(x).v,
            Self::CrossingSignedDistance => {
                (x[0].abs() - x[1].abs()) * core::f64::consts::FRAC_1_SQRT_2
            }
        })
    }

    /// Gradient of `phi`; for the piecewise formulas the almost-everywhere
    /// gradient with the convention `(0)+' = 0`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() || out.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len().min(out.len()),
            });
        }
        match self {
            Self::Coordinate { index, .. } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[*index] = 1.0;
            }
            Self::SquaredNorm { center } => {
                for ((o, xi), c) in out.iter_mut().zip(x).zip(center) {
                    *o = 2.0 * (xi - c);
                }
            }
            Self::GraphDifference(g) => g.height_gap_gradient(x, out),
            Self::SignedDistance(m) => {
                let n = m.gradient_signed_distance(x)?;
                out.copy_from_slice(&n);
            }
            Self::GoodExtension(e) => e.gradient(x, out)?,
            Self::SquareCorner => out.copy_from_slice(&square_corner(x).g),
            Self::CrossingLines => out.copy_from_slice(&crossing_lines(x).g),
            Self::CrossingSignedDistance => {
                let s = core::f64::consts::FRAC_1_SQRT_2;
                out[0] = s * sgn(x[0]);
                out[1] = -s * sgn(x[1]);
            }
        }
        Ok(())
    }
}

/// The region mask `A`.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Full,
    Empty,
    /// `{d(x, Gamma) < width}`.
    TubularBand {
        manifold: Manifold,
        width: f64,
    },
    /// `{lo < phi(x) < hi}`.
    LevelBand {
        lo: f64,
        hi: f64,
    },
    /// `{|x - center| > radius}`.
    ComplementOfBall {
        center: Vec<f64>,
        radius: f64,
    },
    /// Open box `prod (lo_i, hi_i)`.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl Region {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Empty => "empty",
            Self::TubularBand { .. } => "tubular-band",
            Self::LevelBand { .. } => "level-band",
            Self::ComplementOfBall { .. } => "complement-of-ball",
            Self::Box { .. } => "box",
        }
    }
}

/// A scalar field `phi` together with the region `A` it foliates.
#[derive(Debug, Clone, PartialEq)]
pub struct Foliation {
    pub level: LevelFunction,
    pub region: Region,
}

impl Foliation {
    pub fn new(level: LevelFunction, region: Region) -> Self {
        Self { level, region }
    }

    /// `phi(x) = x^index` on all of `R^dim`.
    pub fn coordinate(index: usize, dim: usize) -> Self {
        Self::new(LevelFunction::Coordinate { index, dim }, Region::Full)
    }

    pub fn dim(&self) -> usize {
        self.level.dim()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.level.value(x)
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.level.gradient(x, out)
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.eval_in_region(x)?.is_some())
    }

    /// `Some(phi(x))` when `x` lies in `A`, `None` otherwise.
    pub fn eval_in_region(&self, x: &[f64]) -> Result<Option<f64>> {
        let inside = match &self.region {
            Region::Full => true,
            Region::Empty => false,
            Region::TubularBand { manifold, width } => manifold.distance(x)? < *width,
            Region::LevelBand { lo, hi } => {
                let v = self.level.value(x)?;
                return Ok((*lo < v && v < *hi).then_some(v));
            }
            Region::ComplementOfBall { center, radius } => linalg::dist(x, center) > *radius,
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(xi, (l, h))| l < xi && xi < h),
        };
        if inside {
            self.level.value(x).map(Some)
        } else {
            Ok(None)
        }
    }
}

/// Returns `(d(x, Gamma_a) < eps, d(x, Gamma) in (a - eps, a + eps))`, where
/// `Gamma_a = {d(., Gamma) = a}`. The first distance is computed from the
/// level set's own geometry.
pub fn level_set_distance_equivalence(
    manifold: &Manifold,
    a: f64,
    eps: f64,
    x: &[f64],
) -> Result<(bool, bool)> {
    if !manifold.is_leaf() {
        return Err(Error::PiecewiseUnsupported("distance level sets"));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidBandwidth(eps));
    }
    let reach = manifold.reach().reach;
    if !(a + eps < reach) {
        return Err(Error::BandExceedsReach {
            width: a + eps,
            reach,
        });
    }
    let level = Manifold::distance_level(manifold.clone(), a)?;
    let d_level = level.distance(x)?;
    let d = manifold.distance(x)?;
    Ok((d_level < eps, a - eps < d && d < a + eps))
}
