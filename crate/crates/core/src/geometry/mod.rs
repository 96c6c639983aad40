//! Catalog manifolds, their distance geometry, and level-set foliations.
//!
//! Orientation conventions for the signed distance `delta`:
//! hyperplanes are positive on `v . x > offset`, spheres outside,
//! graphs where `x^N > g(x_bar)`. A [`Manifold::DistanceLevel`] is the full
//! distance level set `{d(., base) = a}` and is positive away from the base.

mod foliation;
mod graph;

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;

pub use foliation::{
    level_set_distance_equivalence, smoothstep, Foliation, GoodExtension, LevelFunction, Region,
};
pub use graph::{GraphFunction, GraphSurface};

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachInfo {
    /// `+inf` for hyperplanes, `0` for piecewise shapes.
    pub reach: f64,
}

impl ReachInfo {
    pub fn is_infinite(&self) -> bool {
        self.reach.is_infinite()
    }

    /// Unique projection is guaranteed strictly inside the reach.
    pub fn admits(&self, distance: f64) -> bool {
        distance < self.reach
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    /// Several nearest points exist; `point` is one of them.
    pub multiple: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Manifold {
    Hyperplane {
        normal: Vec<f64>,
        offset: f64,
    },
    Sphere {
        center: Vec<f64>,
        radius: f64,
    },
    Graph(GraphSurface),
    /// Boundary of the unit square `[0,1]^2`.
    SquareBoundary,
    /// The two lines `x2 = x1` and `x2 = -x1`.
    CrossingLines,
    /// `{x : d(x, base) = level}`, both sheets.
    DistanceLevel {
        base: Box<Manifold>,
        level: f64,
    },
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

impl Manifold {
    pub fn hyperplane(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.is_empty() {
            return Err(Error::invalid("hyperplane normal is empty"));
        }
        let len = linalg::norm(&normal);
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(alloc::format!(
                "hyperplane normal must have unit length, got {len}"
            )));
        }
        if !offset.is_finite() {
            return Err(Error::invalid("hyperplane offset must be finite"));
        }
        Ok(Self::Hyperplane { normal, offset })
    }

    pub fn sphere(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("sphere center is empty"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(alloc::format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(Self::Sphere { center, radius })
    }

    pub fn unit_circle() -> Self {
        Self::Sphere {
            center: vec![0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn graph(surface: GraphSurface) -> Self {
        Self::Graph(surface)
    }

    /// Distance level set `{d(., base) = level}`; needs `0 < level < reach(base)`.
    pub fn distance_level(base: Manifold, level: f64) -> Result<Self> {
        if !matches!(
            base,
            Self::Hyperplane { .. } | Self::Sphere { .. } | Self::Graph(_)
        ) {
            return Err(Error::invalid(
                "distance level sets are built over hyperplanes, spheres and graphs",
            ));
        }
        let reach = base.reach().reach;
        if !(level > 0.0 && level < reach) {
            return Err(Error::BandExceedsReach {
                width: level,
                reach,
            });
        }
        Ok(Self::DistanceLevel {
            base: Box::new(base),
            level,
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Hyperplane { .. } => "hyperplane",
            Self::Sphere { .. } => "sphere",
            Self::Graph(_) => "graph",
            Self::SquareBoundary => "square-boundary",
            Self::CrossingLines => "crossing-lines",
            Self::DistanceLevel { .. } => "distance-level",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Hyperplane { normal, .. } => normal.len(),
            Self::Sphere { center, .. } => center.len(),
            Self::Graph(g) => g.dim(),
            Self::SquareBoundary | Self::CrossingLines => 2,
            Self::DistanceLevel { base, .. } => base.dim(),
        }
    }

    /// Smooth, closed, orientable (as opposed to piecewise smooth).
    pub fn is_leaf(&self) -> bool {
        !matches!(self, Self::SquareBoundary | Self::CrossingLines)
    }

    pub fn reach(&self) -> ReachInfo {
        let reach = match self {
            Self::Hyperplane { .. } => f64::INFINITY,
            Self::Sphere { radius, .. } => *radius,
            Self::Graph(g) => g.reach_bound(),
            Self::SquareBoundary | Self::CrossingLines => 0.0,
            Self::DistanceLevel { base, level } => level.min(base.reach().reach - level),
        };
        ReachInfo { reach }
    }

    /// `d(x, Gamma)`.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(match self {
            Self::Hyperplane { normal, offset } => (linalg::dot(normal, x) - offset).abs(),
            Self::Sphere { center, radius } => (linalg::dist(x, center) - radius).abs(),
            Self::Graph(g) => g.nearest(x)?.1,
            Self::SquareBoundary => square_distance(x),
            Self::CrossingLines => crossing_distance(x),
            Self::DistanceLevel { base, level } => level_set_distance(base, *level, x)?,
        })
    }

    /// Signed distance without the reach check. Beyond the reach the value is
    /// still `+-` the distance to the computed foot point.
    pub fn signed_distance_global(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        match self {
            Self::Hyperplane { normal, offset } => Ok(linalg::dot(normal, x) - offset),
            Self::Sphere { center, radius } => Ok(linalg::dist(x, center) - radius),
            Self::Graph(g) => {
                let (_, d) = g.nearest(x)?;
                Ok(if g.height_gap(x) < 0.0 { -d } else { d })
            }
            Self::DistanceLevel { base, level } => {
                Ok(base.signed_distance_global(x)?.abs() - level)
            }
            Self::SquareBoundary => Err(Error::PiecewiseUnsupported("signed distance")),
            Self::CrossingLines => Err(Error::PiecewiseUnsupported("signed distance")),
        }
    }

    fn require_leaf(&self, what: &'static str) -> Result<()> {
        if self.is_leaf() {
            Ok(())
        } else {
            Err(Error::PiecewiseUnsupported(what))
        }
    }

    /// Checks that `x` has a unique nearest point. For spheres that is every
    /// point but the center, not just the reach band.
    fn require_within_reach(&self, x: &[f64]) -> Result<f64> {
        let d = self.distance(x)?;
        let reach = self.reach();
        if let Self::Sphere { center, .. } = self {
            if x == center.as_slice() {
                return Err(Error::NonUniqueProjection);
            }
            return Ok(d);
        }
        if !reach.admits(d) {
            return Err(Error::OutsideReach {
                distance: d,
                reach: reach.reach,
            });
        }
        Ok(d)
    }

    /// `delta_Gamma(x)`; requires a leaf and `d(x, Gamma) < reach`.
    pub fn signed_distance(&self, x: &[f64]) -> Result<f64> {
        self.require_leaf("signed distance")?;
        self.require_within_reach(x)?;
        self.signed_distance_global(x)
    }

    /// Nearest point on the manifold.
    pub fn project(&self, x: &[f64]) -> Result<Projection> {
        check_dim(self.dim(), x)?;
        if self.is_leaf() {
            self.require_within_reach(x)?;
        }
        let single = |point| Projection {
            point,
            multiple: false,
        };
        Ok(match self {
            Self::Hyperplane { normal, offset } => {
                let s = linalg::dot(normal, x) - offset;
                single(x.iter().zip(normal).map(|(xi, v)| xi - s * v).collect())
            }
            Self::Sphere { center, radius } => {
                let r = linalg::dist(x, center);
                single(
                    x.iter()
                        .zip(center)
                        .map(|(xi, c)| c + radius * (xi - c) / r)
                        .collect(),
                )
            }
            Self::Graph(g) => single(g.nearest(x)?.0),
            Self::SquareBoundary => square_projection(x),
            Self::CrossingLines => crossing_projection(x),
            Self::DistanceLevel { base, level } => {
                let s = base.signed_distance(x)?;
                let p = base.project(x)?.point;
                let n = base.gradient_signed_distance(&p)?;
                let side = if s < 0.0 { -1.0 } else { 1.0 };
                Projection {
                    point: p
                        .iter()
                        .zip(&n)
                        .map(|(pi, ni)| pi + side * level * ni)
                        .collect(),
                    multiple: s == 0.0,
                }
            }
        })
    }

    /// `grad delta_Gamma(x)`, a unit vector. On the manifold itself this is
    /// the orientation normal.
    pub fn gradient_signed_distance(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_leaf("signed distance gradient")?;
        self.require_within_reach(x)?;
        Ok(match self {
            Self::Hyperplane { normal, .. } => normal.clone(),
            Self::Sphere { center, .. } => {
                let r = linalg::dist(x, center);
                x.iter().zip(center).map(|(xi, c)| (xi - c) / r).collect()
            }
            Self::Graph(g) => {
                let (p, _) = g.nearest(x)?;
                g.unit_normal(&p[..g.dim() - 1])
            }
            Self::DistanceLevel { base, .. } => {
                let s = base.signed_distance(x)?;
                let mut n = base.gradient_signed_distance(x)?;
                if s < 0.0 {
                    n.iter_mut().for_each(|v| *v = -*v);
                }
                n
            }
            Self::SquareBoundary | Self::CrossingLines => unreachable!("checked above"),
        })
    }
}

fn square_distance(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    if (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) {
        a.min(1.0 - a).min(b).min(1.0 - b)
    } else {
        let ex = (-a).max(a - 1.0).max(0.0);
        let ey = (-b).max(b - 1.0).max(0.0);
        libm::sqrt(ex * ex + ey * ey)
    }
}

fn square_projection(x: &[f64]) -> Projection {
    let (a, b) = (x[0], x[1]);
    if (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) {
        let candidates = [
            (a, [0.0, b]),
            (1.0 - a, [1.0, b]),
            (b, [a, 0.0]),
            (1.0 - b, [a, 1.0]),
        ];
        let d = square_distance(x);
        let mut hits = candidates.iter().filter(|(dist, _)| *dist == d);
        let first = hits.next().expect("minimum is attained");
        Projection {
            point: first.1.to_vec(),
            multiple: hits.next().is_some(),
        }
    } else {
        Projection {
            point: vec![a.clamp(0.0, 1.0), b.clamp(0.0, 1.0)],
            multiple: false,
        }
    }
}

fn crossing_distance(x: &[f64]) -> f64 {
    (x[1] - x[0]).abs().min((x[1] + x[0]).abs()) * FRAC_1_SQRT_2
}

fn crossing_projection(x: &[f64]) -> Projection {
    let (a, b) = (x[0], x[1]);
    let (d_plus, d_minus) = ((b - a).abs(), (b + a).abs());
    let point = if d_plus <= d_minus {
        let m = 0.5 * (a + b);
        vec![m, m]
    } else {
        let m = 0.5 * (a - b);
        vec![m, -m]
    };
    Projection {
        point,
        multiple: d_plus == d_minus && d_plus > 0.0,
    }
}

/// Distance to `{d(., base) = a}` computed from the level set's own shape,
/// without going through `d(., base)`.
fn level_set_distance(base: &Manifold, a: f64, x: &[f64]) -> Result<f64> {
    match base {
        Manifold::Hyperplane { normal, offset } => {
            let s = linalg::dot(normal, x) - offset;
            Ok((s - a).abs().min((s + a).abs()))
        }
        Manifold::Sphere { center, radius } => {
            let rho = linalg::dist(x, center);
            let outer = (rho - (radius + a)).abs();
            Ok(if a < *radius {
                outer.min((rho - (radius - a)).abs())
            } else {
                outer
            })
        }
        Manifold::Graph(g) => {
            let start = match g.nearest(x) {
                Ok((p, _)) => p[..g.dim() - 1].to_vec(),
                Err(_) => x[..g.dim() - 1].to_vec(),
            };
            g.offset_distance(x, a, &start)
        }
        _ => Err(Error::invalid("unsupported distance level base")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_distances() {
        let c = Manifold::unit_circle();
        assert_eq!(c.distance(&[2.0, 0.0]).unwrap(), 1.0);
        let h = Manifold::hyperplane(vec![0.0, 1.0], 0.0).unwrap();
        assert_eq!(h.distance(&[5.0, -3.0]).unwrap(), 3.0);
        let oracle = (1.0f64 / 2.0).sqrt();
        assert!((Manifold::CrossingLines.distance(&[1.0, 0.0]).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn signed_distance_conventions() {
        let c = Manifold::unit_circle();
        assert_eq!(c.signed_distance(&[0.5, 0.0]).unwrap(), -0.5);
        let h = Manifold::hyperplane(vec![0.0, 1.0], 0.0).unwrap();
        assert_eq!(h.signed_distance(&[7.0, 0.2]).unwrap(), 0.2);
        assert_eq!(c.signed_distance(&[3.0, 0.0]).unwrap(), 2.0);
        assert_eq!(
            c.signed_distance(&[0.0, 0.0]),
            Err(Error::NonUniqueProjection)
        );
        let lvl = Manifold::distance_level(Manifold::unit_circle(), 0.3).unwrap();
        assert!(matches!(
            lvl.signed_distance(&[2.0, 0.0]),
            Err(Error::OutsideReach { reach, .. }) if (reach - 0.3).abs() < 1e-15
        ));
        assert!(matches!(
            Manifold::SquareBoundary.signed_distance(&[0.2, 0.3]),
            Err(Error::PiecewiseUnsupported(_))
        ));
    }

    #[test]
    fn projections() {
        let c = Manifold::unit_circle();
        assert_eq!(c.project(&[2.0, 0.0]).unwrap().point, vec![1.0, 0.0]);
        assert_eq!(c.project(&[0.0, 0.0]), Err(Error::NonUniqueProjection));
        let h = Manifold::hyperplane(vec![0.0, 1.0], 0.0).unwrap();
        assert_eq!(h.project(&[5.0, -3.0]).unwrap().point, vec![5.0, 0.0]);
        let sq = Manifold::SquareBoundary.project(&[0.5, 0.5]).unwrap();
        assert!(sq.multiple);
        let allowed = [[0.5, 0.0], [0.5, 1.0], [0.0, 0.5], [1.0, 0.5]];
        assert!(allowed.iter().any(|p| p.as_slice() == sq.point.as_slice()));
    }

    #[test]
    fn circle_gradients() {
        let c = Manifold::unit_circle();
        assert_eq!(
            c.gradient_signed_distance(&[2.0, 0.0]).unwrap(),
            vec![1.0, 0.0]
        );
        assert_eq!(
            c.gradient_signed_distance(&[0.5, 0.0]).unwrap(),
            vec![1.0, 0.0]
        );
    }

    #[test]
    fn constructor_validation() {
        assert!(Manifold::hyperplane(vec![1.0, 1.0], 0.0).is_err());
        assert!(Manifold::sphere(vec![0.0, 0.0], 0.0).is_err());
        assert!(Manifold::distance_level(Manifold::unit_circle(), 1.0).is_err());
        let lvl = Manifold::distance_level(Manifold::unit_circle(), 0.3).unwrap();
        assert!((lvl.reach().reach - 0.3).abs() < 1e-15);
        assert!((lvl.distance(&[1.5, 0.0]).unwrap() - 0.2).abs() < 1e-15);
        assert!((lvl.distance(&[0.6, 0.0]).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn parabola_signed_distance() {
        use crate::linalg::Matrix;
        let g = GraphSurface::new(
            GraphFunction::Quadratic {
                hessian: Matrix::diagonal(&[2.0]),
                linear: vec![0.0],
                constant: 0.0,
            },
            10.0,
        )
        .unwrap();
        let m = Manifold::graph(g);
        assert!((m.signed_distance(&[0.0, 0.1]).unwrap() - 0.1).abs() < 1e-14);
        assert!((m.signed_distance(&[0.0, -0.1]).unwrap() + 0.1).abs() < 1e-14);
    }
}
