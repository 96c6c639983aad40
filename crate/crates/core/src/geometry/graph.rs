//! Graphs `x^N = g(x^1, ..., x^{N-1})` of C² functions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum GraphFunction {
    /// `g(y) = slope . y + intercept`.
    Linear { slope: Vec<f64>, intercept: f64 },
    /// `g(y) = y^T H y / 2 + linear . y + constant`.
    Quadratic {
        hessian: Matrix,
        linear: Vec<f64>,
        constant: f64,
    },
}

impl GraphFunction {
    pub fn arg_dim(&self) -> usize {
        match self {
            Self::Linear { slope, .. } => slope.len(),
            Self::Quadratic { linear, .. } => linear.len(),
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        match self {
            Self::Linear { slope, intercept } => linalg::dot(slope, y) + intercept,
            Self::Quadratic {
                hessian,
                linear,
                constant,
            } => 0.5 * hessian.quadratic_form(y) + linalg::dot(linear, y) + constant,
        }
    }

    pub fn gradient(&self, y: &[f64], out: &mut [f64]) {
        match self {
            Self::Linear { slope, .. } => out.copy_from_slice(slope),
            Self::Quadratic {
                hessian, linear, ..
            } => {
                hessian.mul_vec_into(y, out);
                for (o, b) in out.iter_mut().zip(linear) {
                    *o += b;
                }
            }
        }
    }

    pub fn hessian(&self) -> Matrix {
        match self {
            Self::Linear { slope, .. } => Matrix::zeros(slope.len(), slope.len()),
            Self::Quadratic { hessian, .. } => hessian.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSurface {
    func: GraphFunction,
    /// Half width of the box `|y_i| <= w` over which the curvature bound is declared.
    bbox_half_width: f64,
}

impl GraphSurface {
    pub fn new(func: GraphFunction, bbox_half_width: f64) -> Result<Self> {
        if func.arg_dim() == 0 {
            return Err(Error::invalid("graph needs at least one free coordinate"));
        }
        if let GraphFunction::Quadratic {
            hessian, linear, ..
        } = &func
        {
            if hessian.rows() != linear.len() || hessian.cols() != linear.len() {
                return Err(Error::DimensionMismatch {
                    expected: linear.len(),
                    got: hessian.rows(),
                });
            }
            if !hessian.is_symmetric(1e-14) {
                return Err(Error::invalid("graph Hessian must be symmetric"));
            }
        }
        if !(bbox_half_width > 0.0) {
            return Err(Error::invalid("bounding box half width must be positive"));
        }
        Ok(Self {
            func,
            bbox_half_width,
        })
    }

    pub fn linear(slope: Vec<f64>, intercept: f64) -> Self {
        Self {
            func: GraphFunction::Linear { slope, intercept },
            bbox_half_width: f64::INFINITY,
        }
    }

    pub fn function(&self) -> &GraphFunction {
        &self.func
    }

    pub fn bbox_half_width(&self) -> f64 {
        self.bbox_half_width
    }

    pub fn dim(&self) -> usize {
        self.func.arg_dim() + 1
    }

    /// `1 / sup |Hess g|` over the declared box; infinite for affine `g`.
    pub fn reach_bound(&self) -> f64 {
        let r = self.func.hessian().spectral_radius_sym();
        if r == 0.0 {
            f64::INFINITY
        } else {
            1.0 / r
        }
    }

    /// `x^N - g(x_bar)`.
    pub fn height_gap(&self, x: &[f64]) -> f64 {
        let m = self.func.arg_dim();
        x[m] - self.func.value(&x[..m])
    }

    /// `grad (x^N - g(x_bar)) = (-grad g, 1)`.
    pub fn height_gap_gradient(&self, x: &[f64], out: &mut [f64]) {
        let m = self.func.arg_dim();
        self.func.gradient(&x[..m], &mut out[..m]);
        out[..m].iter_mut().for_each(|v| *v = -*v);
        out[m] = 1.0;
    }

    /// Upward unit normal at the surface point above `y`.
    pub fn unit_normal(&self, y: &[f64]) -> Vec<f64> {
        let m = self.func.arg_dim();
        let mut n = vec![0.0; m + 1];
        self.func.gradient(y, &mut n[..m]);
        n[..m].iter_mut().for_each(|v| *v = -*v);
        n[m] = 1.0;
        let s = linalg::norm(&n);
        n.iter_mut().for_each(|v| *v /= s);
        n
    }

    /// Cheap test that `d(x, graph) >= eps`: the foot point lies within `eps`
    /// of `x_bar`, so `|height gap| <= eps (1 + sup |grad g|)` over that ball.
    pub fn certainly_farther_than(&self, x: &[f64], eps: f64) -> bool {
        let m = self.func.arg_dim();
        let gap = self.height_gap(x).abs();
        let slope = match &self.func {
            GraphFunction::Linear { slope, .. } => linalg::norm(slope),
            GraphFunction::Quadratic { hessian, .. } => {
                let mut grad = vec![0.0; m];
                self.func.gradient(&x[..m], &mut grad);
                linalg::norm(&grad) + hessian.spectral_radius_sym() * eps
            }
        };
        gap >= eps * (1.0 + slope)
    }

    pub fn lift(&self, y: &[f64]) -> Vec<f64> {
        let mut p = y.to_vec();
        p.push(self.func.value(y));
        p
    }

    /// Nearest surface point and its distance.
    ///
    /// Affine graphs use the closed form. Curved graphs run damped Newton on
    /// `(y - x_bar) + (g(y) - x^N) grad g(y) = 0`, started at `x_bar`.
    pub fn nearest(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let m = self.func.arg_dim();
        if x.len() != m + 1 {
            return Err(Error::DimensionMismatch {
                expected: m + 1,
                got: x.len(),
            });
        }
        match &self.func {
            GraphFunction::Linear { slope, .. } => {
                let gap = self.height_gap(x);
                let s2 = 1.0 + linalg::dot(slope, slope);
                // x - gap / s2 * (-slope, 1)
                let mut p = x.to_vec();
                for (pi, a) in p[..m].iter_mut().zip(slope) {
                    *pi += gap / s2 * a;
                }
                p[m] -= gap / s2;
                Ok((p, gap.abs() / libm::sqrt(s2)))
            }
            GraphFunction::Quadratic { .. } => {
                let y = self.newton_foot(x)?;
                let p = self.lift(&y);
                let d = linalg::dist(x, &p);
                Ok((p, d))
            }
        }
    }

    fn objective(&self, x: &[f64], y: &[f64]) -> f64 {
        let m = y.len();
        let r = self.func.value(y) - x[m];
        let d = linalg::dist(y, &x[..m]);
        0.5 * (d * d + r * r)
    }

    /// Norm of the first-order optimality residual at `y`.
    fn stationarity(&self, x: &[f64], y: &[f64]) -> f64 {
        let m = y.len();
        let mut grad_g = vec![0.0; m];
        self.func.gradient(y, &mut grad_g);
        let r = self.func.value(y) - x[m];
        let s: f64 = (0..m)
            .map(|i| {
                let v = y[i] - x[i] + r * grad_g[i];
                v * v
            })
            .sum();
        libm::sqrt(s)
    }

    fn newton_foot(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.func.arg_dim();
        let h = self.func.hessian();
        let mut y = x[..m].to_vec();
        let mut grad_g = vec![0.0; m];
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            self.func.gradient(&y, &mut grad_g);
            let r = self.func.value(&y) - x[m];
            let grad: Vec<f64> = (0..m).map(|i| y[i] - x[i] + r * grad_g[i]).collect();
            residual = linalg::norm(&grad);
            if residual <= NEWTON_TOL {
                return Ok(y);
            }
            let mut jac = Matrix::identity(m);
            for i in 0..m {
                for j in 0..m {
                    jac.set(
                        i,
                        j,
                        jac.get(i, j) + grad_g[i] * grad_g[j] + r * h.get(i, j),
                    );
                }
            }
            let neg: Vec<f64> = grad.iter().map(|v| -v).collect();
            let dir = if linalg::is_positive_definite(&jac) {
                linalg::solve(&jac, &neg).unwrap_or(neg)
            } else {
                neg
            };
            let f0 = self.objective(x, &y);
            let slope = linalg::dot(&grad, &dir);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                if self.objective(x, &cand) <= f0 + 1e-4 * t * slope
                    || self.stationarity(x, &cand) < residual
                {
                    y = cand;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // No decrease is representable any more: accept a near-stationary point.
                if residual <= 1e-9 * (1.0 + linalg::norm(x)) {
                    return Ok(y);
                }
                break;
            }
        }
        Err(Error::NoConvergence {
            best: self.lift(&y),
            residual,
        })
    }

    /// Distance from `x` to the two offset surfaces `{p ± a n(p) : p on the graph}`,
    /// by direct minimisation over the surface parameter.
    pub fn offset_distance(&self, x: &[f64], a: f64, start: &[f64]) -> Result<f64> {
        let mut best = f64::INFINITY;
        for side in [1.0, -1.0] {
            for y0 in [start, &x[..self.func.arg_dim()]] {
                let y = self.minimise_offset(x, side * a, y0);
                best = best.min(libm::sqrt(2.0 * self.offset_objective(x, side * a, &y)));
            }
        }
        if best.is_finite() {
            Ok(best)
        } else {
            Err(Error::NoConvergence {
                best: x.to_vec(),
                residual: f64::INFINITY,
            })
        }
    }

    fn offset_point(&self, y: &[f64], signed_a: f64) -> Vec<f64> {
        let mut p = self.lift(y);
        let n = self.unit_normal(y);
        for (pi, ni) in p.iter_mut().zip(&n) {
            *pi += signed_a * ni;
        }
        p
    }

    fn offset_objective(&self, x: &[f64], signed_a: f64, y: &[f64]) -> f64 {
        let d = linalg::dist(x, &self.offset_point(y, signed_a));
        0.5 * d * d
    }

    fn minimise_offset(&self, x: &[f64], signed_a: f64, y0: &[f64]) -> Vec<f64> {
        let m = y0.len();
        let f = |y: &[f64]| self.offset_objective(x, signed_a, y);
        let fd_grad = |y: &[f64]| -> Vec<f64> {
            let h = 1e-6;
            (0..m)
                .map(|i| {
                    let mut yp = y.to_vec();
                    let mut ym = y.to_vec();
                    yp[i] += h;
                    ym[i] -= h;
                    (f(&yp) - f(&ym)) / (2.0 * h)
                })
                .collect()
        };
        let mut y = y0.to_vec();
        for _ in 0..200 {
            let g = fd_grad(&y);
            if linalg::norm(&g) < 1e-11 {
                break;
            }
            let h = 1e-4;
            let mut hess = Matrix::zeros(m, m);
            for j in 0..m {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[j] += h;
                ym[j] -= h;
                let (gp, gm) = (fd_grad(&yp), fd_grad(&ym));
                for i in 0..m {
                    hess.set(i, j, (gp[i] - gm[i]) / (2.0 * h));
                }
            }
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            let dir = if linalg::is_positive_definite(&hess) {
                linalg::solve(&hess, &neg).unwrap_or_else(|_| neg.clone())
            } else {
                neg
            };
            let f0 = f(&y);
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                if f(&cand) < f0 {
                    y = cand;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        y
    }
}
