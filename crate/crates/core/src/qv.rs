//! Quadratic covariation increments `d<X^i, X^j>` along a discretised path.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::paths::{SamplePath, SdeModel};

/// How `d<X^i, X^j>_k` is obtained on step `k`.
///
/// `Analytic` evaluates `g(t_k, X_{t_k}) dt` from the model's diffusion
/// tensor. `Realized` uses the increment products `dX^i_k dX^j_k`.
#[derive(Debug, Clone, Copy)]
pub enum QuadraticVariationModel<'m> {
    Analytic(&'m SdeModel),
    Realized,
}

impl<'m> QuadraticVariationModel<'m> {
    pub fn analytic(model: &'m SdeModel) -> Self {
        Self::Analytic(model)
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, Self::Analytic(_))
    }

    /// Full `N x N` increment tensor on step `k` into `out` (row-major).
    pub fn step_tensor(&self, path: &SamplePath, k: usize, out: &mut [f64]) -> Result<()> {
        let n = path.dim;
        if k >= path.n_steps() {
            return Err(Error::IndexOutOfRange {
                what: "step",
                index: k,
                limit: path.n_steps(),
            });
        }
        match self {
            Self::Analytic(model) => {
                if model.dim() != n {
                    return Err(Error::DimensionMismatch {
                        expected: model.dim(),
                        got: n,
                    });
                }
                let dt = path.grid.dt();
                model.diffusion_tensor(path.grid.time(k), path.state(k), out);
                out.iter_mut().for_each(|v| *v *= dt);
            }
            Self::Realized => {
                let (a, b) = (path.state(k), path.state(k + 1));
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = (b[i] - a[i]) * (b[j] - a[j]);
                    }
                }
            }
        }
        Ok(())
    }

    /// `d<X^i, X^j>` on step `k` (zero-based component indices).
    pub fn increment(&self, path: &SamplePath, k: usize, i: usize, j: usize) -> Result<f64> {
        let n = path.dim;
        for c in [i, j] {
            if c >= n {
                return Err(Error::IndexOutOfRange {
                    what: "component",
                    index: c,
                    limit: n,
                });
            }
        }
        match self {
            Self::Realized => {
                if k >= path.n_steps() {
                    return Err(Error::IndexOutOfRange {
                        what: "step",
                        index: k,
                        limit: path.n_steps(),
                    });
                }
                let (a, b) = (path.state(k), path.state(k + 1));
                Ok((b[i] - a[i]) * (b[j] - a[j]))
            }
            Self::Analytic(_) => {
                let mut g = vec![0.0; n * n];
                self.step_tensor(path, k, &mut g)?;
                Ok(g[i * n + j])
            }
        }
    }

    /// `d<X^i>_k` for every valid step of the path.
    pub fn component_weights(&self, path: &SamplePath, i: usize) -> Result<Vec<f64>> {
        let n = path.dim;
        if i >= n {
            return Err(Error::IndexOutOfRange {
                what: "component",
                index: i,
                limit: n,
            });
        }
        let steps = path.valid_steps();
        match self {
            Self::Realized => Ok((0..steps)
                .map(|k| {
                    let d = path.state(k + 1)[i] - path.state(k)[i];
                    d * d
                })
                .collect()),
            Self::Analytic(model) if model.is_brownian() => Ok(vec![path.grid.dt(); steps]),
            Self::Analytic(_) => {
                let mut g = vec![0.0; n * n];
                (0..steps)
                    .map(|k| {
                        self.step_tensor(path, k, &mut g)?;
                        Ok(g[i * n + i])
                    })
                    .collect()
            }
        }
    }

    /// Checks a path dimension and component index against this model.
    pub fn check(&self, dim: usize, component: usize) -> Result<()> {
        if let Self::Analytic(model) = self {
            if model.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: model.dim(),
                    got: dim,
                });
            }
        }
        if component >= dim {
            return Err(Error::IndexOutOfRange {
                what: "component",
                index: component,
                limit: dim,
            });
        }
        Ok(())
    }

    /// `d<X^i>_k` for a step already known to be valid. `scratch` must hold
    /// `N * N` values.
    #[inline]
    pub fn component_weight_at(
        &self,
        path: &SamplePath,
        k: usize,
        i: usize,
        scratch: &mut [f64],
    ) -> f64 {
        match self {
            Self::Realized => {
                let d = path.state(k + 1)[i] - path.state(k)[i];
                d * d
            }
            Self::Analytic(model) if model.is_brownian() => path.grid.dt(),
            Self::Analytic(model) => {
                let n = path.dim;
                model.diffusion_tensor(path.grid.time(k), path.state(k), scratch);
                scratch[i * n + i] * path.grid.dt()
            }
        }
    }

    /// `v^T d<X, X>_k v` for a step already known to be valid.
    #[inline]
    pub fn directional_weight_at(
        &self,
        path: &SamplePath,
        k: usize,
        v: &[f64],
        scratch: &mut [f64],
    ) -> f64 {
        match self {
            Self::Realized => {
                let (a, b) = (path.state(k), path.state(k + 1));
                let s: f64 = v
                    .iter()
                    .zip(a.iter().zip(b))
                    .map(|(vi, (x, y))| vi * (y - x))
                    .sum();
                s * s
            }
            Self::Analytic(model) if model.is_brownian() => linalg::dot(v, v) * path.grid.dt(),
            Self::Analytic(model) => {
                let n = path.dim;
                model.diffusion_tensor(path.grid.time(k), path.state(k), scratch);
                let mut q = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        q += v[a] * scratch[a * n + b] * v[b];
                    }
                }
                q * path.grid.dt()
            }
        }
    }

    /// Cumulative `<X^i, X^j>_{t_k}`, `k = 0..=n_steps`.
    pub fn cumulative(&self, path: &SamplePath, i: usize, j: usize) -> Result<Vec<f64>> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(path.n_steps() + 1);
        out.push(0.0);
        for k in 0..path.n_steps() {
            acc += self.increment(path, k, i, j)?;
            out.push(acc);
        }
        Ok(out)
    }

    /// Increment of the control measure
    /// `eta = sum_i d<X^i> + sum_{i,j} d<X^i + X^j>` on step `k`.
    pub fn eta_increment(&self, path: &SamplePath, k: usize) -> Result<f64> {
        let n = path.dim;
        let mut g = vec![0.0; n * n];
        self.step_tensor(path, k, &mut g)?;
        Ok(eta_from_tensor(&g, n))
    }

    /// `sum_{jk} v_j v_k d<X^j, X^k>` on step `k`: the increment of
    /// `<v . X>` for a fixed direction, or of `<phi(X)>` with `v = grad phi`.
    pub fn directional_increment(&self, path: &SamplePath, k: usize, v: &[f64]) -> Result<f64> {
        let n = path.dim;
        let mut g = vec![0.0; n * n];
        self.step_tensor(path, k, &mut g)?;
        let m = Matrix::from_row_major(n, n, g)?;
        Ok(m.quadratic_form(v))
    }
}

/// `sum_i G_ii + sum_{i,j} (G_ii + G_jj + 2 G_ij)` for a covariation tensor.
pub fn eta_from_tensor(g: &[f64], n: usize) -> f64 {
    let trace: f64 = (0..n).map(|i| g[i * n + i]).sum();
    let mut pairs = 0.0;
    for i in 0..n {
        for j in 0..n {
            pairs += g[i * n + i] + g[j * n + j] + 2.0 * g[i * n + j];
        }
    }
    trace + pairs
}

/// Symmetric-PSD check of the model's diffusion tensor at `x`: returns the
/// smallest eigenvalue and the largest asymmetry.
pub fn tensor_psd_margin(model: &SdeModel, t: f64, x: &[f64]) -> (f64, f64) {
    let n = model.dim();
    let mut g = vec![0.0; n * n];
    model.diffusion_tensor(t, x, &mut g);
    let m = Matrix::from_row_major(n, n, g).expect("square tensor");
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((m.get(i, j) - m.get(j, i)).abs());
        }
    }
    let min_ev = linalg::symmetric_eigenvalues(&m)
        .first()
        .copied()
        .unwrap_or(0.0);
    (min_ev, asym)
}
