//! Euler–Maruyama simulation of Itô diffusions `dX = b(t,X) dt + sigma(t,X) dW`.

use alloc::borrow::Cow;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::path_rng;

/// Uniform grid `t_k = k T / n` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidHorizon(horizon));
        }
        if n_steps == 0 {
            return Err(Error::ZeroSteps);
        }
        Ok(Self { horizon, n_steps })
    }

    /// Grid with `round(T / dt)` steps.
    pub fn from_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("time step must be finite and positive"));
        }
        Self::new(horizon, libm::round(horizon / dt) as usize)
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }
}

/// `b(t, x)` written into the output slice.
pub type DriftFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
/// `sigma(t, x)` written row-major into an `N*N` output slice.
pub type DiffusionFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
pub enum ModelKind {
    /// `b = 0`, `sigma = I`.
    StandardBm,
    /// Constant coefficients; `sigma = 0` gives frozen dynamics.
    DriftedBm { drift: Vec<f64>, sigma: Matrix },
    /// `b(x) = A x + c` with constant `sigma`.
    LinearSde {
        drift_matrix: Matrix,
        drift_offset: Vec<f64>,
        sigma: Matrix,
    },
    /// `b(x) = -x / (2|x|^2)` for `x != 0`, `b(0) = 0`, `sigma = I`.
    SingularRadialDrift,
    UserCoefficient {
        drift: Arc<DriftFn>,
        diffusion: Arc<DiffusionFn>,
    },
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StandardBm => f.write_str("StandardBm"),
            Self::DriftedBm { drift, sigma } => f
                .debug_struct("DriftedBm")
                .field("drift", drift)
                .field("sigma", sigma)
                .finish(),
            Self::LinearSde {
                drift_matrix,
                drift_offset,
                sigma,
            } => f
                .debug_struct("LinearSde")
                .field("drift_matrix", drift_matrix)
                .field("drift_offset", drift_offset)
                .field("sigma", sigma)
                .finish(),
            Self::SingularRadialDrift => f.write_str("SingularRadialDrift"),
            Self::UserCoefficient { .. } => f.write_str("UserCoefficient"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdeModel {
    x0: Vec<f64>,
    kind: ModelKind,
    brownian: bool,
}

impl SdeModel {
    fn make(x0: Vec<f64>, kind: ModelKind) -> Self {
        let n = x0.len();
        let brownian = match &kind {
            ModelKind::StandardBm | ModelKind::SingularRadialDrift => true,
            ModelKind::DriftedBm { sigma, .. } | ModelKind::LinearSde { sigma, .. } => {
                sigma.gram() == Matrix::identity(n)
            }
            ModelKind::UserCoefficient { .. } => false,
        };
        Self { x0, kind, brownian }
    }

    pub fn standard_bm(x0: Vec<f64>) -> Self {
        Self::make(x0, ModelKind::StandardBm)
    }

    /// `b = 0`, `sigma = 0`: every state equals `x0`.
    pub fn frozen(x0: Vec<f64>) -> Self {
        let n = x0.len();
        Self::make(
            x0,
            ModelKind::DriftedBm {
                drift: vec![0.0; n],
                sigma: Matrix::zeros(n, n),
            },
        )
    }

    pub fn drifted_bm(x0: Vec<f64>, drift: Vec<f64>, sigma: Matrix) -> Result<Self> {
        let n = x0.len();
        check_len(n, drift.len())?;
        check_square(n, &sigma)?;
        Ok(Self::make(x0, ModelKind::DriftedBm { drift, sigma }))
    }

    pub fn linear(
        x0: Vec<f64>,
        drift_matrix: Matrix,
        drift_offset: Vec<f64>,
        sigma: Matrix,
    ) -> Result<Self> {
        let n = x0.len();
        check_square(n, &drift_matrix)?;
        check_len(n, drift_offset.len())?;
        check_square(n, &sigma)?;
        Ok(Self::make(
            x0,
            ModelKind::LinearSde {
                drift_matrix,
                drift_offset,
                sigma,
            },
        ))
    }

    pub fn singular_radial_drift(x0: Vec<f64>) -> Self {
        Self::make(x0, ModelKind::SingularRadialDrift)
    }

    pub fn user(x0: Vec<f64>, drift: Arc<DriftFn>, diffusion: Arc<DiffusionFn>) -> Self {
        Self::make(x0, ModelKind::UserCoefficient { drift, diffusion })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn tag(&self) -> &'static str {
        match self.kind {
            ModelKind::StandardBm => "standard-bm",
            ModelKind::DriftedBm { .. } => "drifted-bm",
            ModelKind::LinearSde { .. } => "linear-sde",
            ModelKind::SingularRadialDrift => "singular-radial-drift",
            ModelKind::UserCoefficient { .. } => "user-coefficient",
        }
    }

    /// Diffusion tensor is the identity everywhere.
    pub fn is_brownian(&self) -> bool {
        self.brownian
    }

    /// Unclamped drift.
    pub fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::StandardBm => out.fill(0.0),
            ModelKind::DriftedBm { drift, .. } => out.copy_from_slice(drift),
            ModelKind::LinearSde {
                drift_matrix,
                drift_offset,
                ..
            } => {
                drift_matrix.mul_vec_into(x, out);
                for (o, c) in out.iter_mut().zip(drift_offset) {
                    *o += c;
                }
            }
            ModelKind::SingularRadialDrift => singular_drift(x, out),
            ModelKind::UserCoefficient { drift, .. } => drift(t, x, out),
        }
    }

    /// `sigma(t, x)`, row-major `N x N`.
    pub fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        match &self.kind {
            ModelKind::StandardBm | ModelKind::SingularRadialDrift => {
                out.fill(0.0);
                for i in 0..n {
                    out[i * n + i] = 1.0;
                }
            }
            ModelKind::DriftedBm { sigma, .. } | ModelKind::LinearSde { sigma, .. } => {
                out.copy_from_slice(sigma.as_slice())
            }
            ModelKind::UserCoefficient { diffusion, .. } => diffusion(t, x, out),
        }
    }

    /// `g(t, x) = sigma sigma^T`, row-major `N x N`.
    pub fn diffusion_tensor(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        match &self.kind {
            ModelKind::StandardBm | ModelKind::SingularRadialDrift => {
                out.fill(0.0);
                for i in 0..n {
                    out[i * n + i] = 1.0;
                }
            }
            _ => {
                let mut s = vec![0.0; n * n];
                self.diffusion(t, x, &mut s);
                linalg::gram_into(&s, n, n, out);
            }
        }
    }

    fn check_initial(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::invalid("state dimension must be positive"));
        }
        let mut b = vec![0.0; n];
        let mut s = vec![0.0; n * n];
        self.drift(0.0, &self.x0, &mut b);
        self.diffusion(0.0, &self.x0, &mut s);
        if self.x0.iter().chain(&b).chain(&s).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid(
                "coefficients are not finite at the initial point",
            ))
        }
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

fn check_square(n: usize, m: &Matrix) -> Result<()> {
    check_len(n, m.rows())?;
    check_len(n, m.cols())
}

fn singular_drift(x: &[f64], out: &mut [f64]) {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 == 0.0 {
        out.fill(0.0);
    } else {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = -xi / (2.0 * r2);
        }
    }
}

/// One discretised trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub dim: usize,
    /// `(n_steps + 1) * dim` values, state-major.
    pub states: Vec<f64>,
    pub seed: u64,
    pub index: u64,
    /// Driving Brownian increments `dW_k`, `n_steps * dim` values, when recorded.
    pub noise: Option<Vec<f64>>,
    /// First state index that was not finite.
    pub exploded_at: Option<usize>,
    /// Steps at which the singular drift was clamped to `dt^{-1/2}`.
    pub clamp_events: usize,
}

impl SamplePath {
    #[inline]
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    /// Steps `k` whose end state `X_{k+1}` is finite.
    #[inline]
    pub fn valid_steps(&self) -> usize {
        self.exploded_at
            .map_or(self.grid.n_steps(), |b| b.saturating_sub(1))
    }

    pub fn is_exploded(&self) -> bool {
        self.exploded_at.is_some()
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.grid.n_steps())
    }

    /// `X^i_{t_k}` for every `k`.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.states
            .iter()
            .skip(i)
            .step_by(self.dim)
            .copied()
            .collect()
    }

    pub fn noise_increment(&self, k: usize) -> Option<&[f64]> {
        self.noise
            .as_ref()
            .map(|w| &w[k * self.dim..(k + 1) * self.dim])
    }
}

/// Simulates path `index` of a run seeded with `seed`.
pub fn simulate_path(
    model: &SdeModel,
    grid: &TimeGrid,
    seed: u64,
    index: u64,
    record_noise: bool,
) -> Result<SamplePath> {
    model.check_initial()?;
    let n = model.dim();
    let steps = grid.n_steps();
    let dt = grid.dt();
    let sdt = libm::sqrt(dt);
    let clamp = 1.0 / sdt;
    let mut rng = path_rng(seed, index);

    let mut states = Vec::with_capacity((steps + 1) * n);
    states.extend_from_slice(model.x0());
    let mut noise = record_noise.then(|| Vec::with_capacity(steps * n));
    let mut x = model.x0().to_vec();
    let mut dw = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut sigma = vec![0.0; n * n];
    let mut exploded_at = None;
    let mut clamp_events = 0;

    for k in 0..steps {
        for w in dw.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *w = sdt * z;
        }
        if let Some(buf) = noise.as_mut() {
            buf.extend_from_slice(&dw);
        }
        let t = grid.time(k);
        match model.kind() {
            ModelKind::StandardBm => {
                for (xi, w) in x.iter_mut().zip(&dw) {
                    *xi += w;
                }
            }
            ModelKind::SingularRadialDrift => {
                singular_drift(&x, &mut b);
                let bn = linalg::norm(&b);
                if bn > clamp {
                    clamp_events += 1;
                    let s = clamp / bn;
                    b.iter_mut().for_each(|v| *v *= s);
                }
                for ((xi, bi), w) in x.iter_mut().zip(&b).zip(&dw) {
                    *xi += bi * dt + w;
                }
            }
            _ => {
                model.drift(t, &x, &mut b);
                model.diffusion(t, &x, &mut sigma);
                for i in 0..n {
                    let row = &sigma[i * n..(i + 1) * n];
                    b[i] = b[i] * dt + linalg::dot(row, &dw);
                }
                for (xi, d) in x.iter_mut().zip(&b) {
                    *xi += d;
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            exploded_at = Some(k + 1);
            states.extend_from_slice(&x);
            states.resize((steps + 1) * n, f64::NAN);
            break;
        }
        states.extend_from_slice(&x);
    }

    Ok(SamplePath {
        grid: *grid,
        dim: n,
        states,
        seed,
        index,
        noise,
        exploded_at,
        clamp_events,
    })
}

/// Simulates `n_paths` paths; path `i` uses stream `(seed, i)`.
pub fn simulate_paths(
    model: &SdeModel,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<SamplePath>> {
    if n_paths == 0 {
        return Err(Error::NoPaths);
    }
    let ensemble = PathEnsemble::new(model.clone(), *grid, n_paths, seed)?;
    map_paths(&ensemble, |_, p| Ok(p.clone()))
}

/// A collection of paths that can be visited by index.
pub trait PathSource: Sync {
    fn n_paths(&self) -> usize;
    fn path(&self, index: usize) -> Result<Cow<'_, SamplePath>>;
}

impl PathSource for [SamplePath] {
    fn n_paths(&self) -> usize {
        self.len()
    }

    fn path(&self, index: usize) -> Result<Cow<'_, SamplePath>> {
        self.get(index)
            .map(Cow::Borrowed)
            .ok_or(Error::IndexOutOfRange {
                what: "path",
                index,
                limit: self.len(),
            })
    }
}

impl PathSource for Vec<SamplePath> {
    fn n_paths(&self) -> usize {
        self.len()
    }

    fn path(&self, index: usize) -> Result<Cow<'_, SamplePath>> {
        self.as_slice().path(index)
    }
}

/// Paths generated lazily from `(model, grid, seed)`; nothing is stored.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub model: SdeModel,
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    pub record_noise: bool,
}

impl PathEnsemble {
    pub fn new(model: SdeModel, grid: TimeGrid, n_paths: usize, seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::NoPaths);
        }
        model.check_initial()?;
        Ok(Self {
            model,
            grid,
            n_paths,
            seed,
            record_noise: false,
        })
    }

    pub fn with_noise(mut self) -> Self {
        self.record_noise = true;
        self
    }
}

impl PathSource for PathEnsemble {
    fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn path(&self, index: usize) -> Result<Cow<'_, SamplePath>> {
        if index >= self.n_paths {
            return Err(Error::IndexOutOfRange {
                what: "path",
                index,
                limit: self.n_paths,
            });
        }
        simulate_path(
            &self.model,
            &self.grid,
            self.seed,
            index as u64,
            self.record_noise,
        )
        .map(Cow::Owned)
    }
}

/// Applies `f` to every path and returns the results in path-index order.
pub fn map_paths<S, T, F>(source: &S, f: F) -> Result<Vec<T>>
where
    S: PathSource + ?Sized,
    T: Send,
    F: Fn(usize, &SamplePath) -> Result<T> + Sync + Send,
{
    let n = source.n_paths();
    if n == 0 {
        return Err(Error::NoPaths);
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| source.path(i).and_then(|p| f(i, &p)))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n)
            .map(|i| source.path(i).and_then(|p| f(i, &p)))
            .collect()
    }
}

/// Paths handed to one parallel batch of [`fold_paths`].
const FOLD_CHUNK: usize = 64;

/// Maps every path with `f` and folds the results with `fold` in path-index
/// order. Only one chunk of mapped results is alive at a time.
pub fn fold_paths<S, T, A, F, G>(source: &S, init: A, f: F, mut fold: G) -> Result<A>
where
    S: PathSource + ?Sized,
    T: Send,
    F: Fn(usize, &SamplePath) -> Result<T> + Sync + Send,
    G: FnMut(A, usize, T) -> A,
{
    let n = source.n_paths();
    if n == 0 {
        return Err(Error::NoPaths);
    }
    let mut acc = init;
    let mut start = 0;
    while start < n {
        let end = (start + FOLD_CHUNK).min(n);
        #[cfg(feature = "parallel")]
        let chunk: Result<Vec<T>> = {
            use rayon::prelude::*;
            (start..end)
                .into_par_iter()
                .map(|i| source.path(i).and_then(|p| f(i, &p)))
                .collect()
        };
        #[cfg(not(feature = "parallel"))]
        let chunk: Result<Vec<T>> = (start..end)
            .map(|i| source.path(i).and_then(|p| f(i, &p)))
            .collect();
        for (j, t) in chunk?.into_iter().enumerate() {
            acc = fold(acc, start + j, t);
        }
        start = end;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_invariants() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let t = g.times();
        assert_eq!(t.len(), 9);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[8], 2.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.dt(), 0.25);
        assert_eq!(TimeGrid::new(1.0, 0), Err(Error::ZeroSteps));
        assert!(TimeGrid::new(-1.0, 3).is_err());
        assert_eq!(TimeGrid::from_step(1.0, 1e-4).unwrap().n_steps(), 10_000);
    }

    #[test]
    fn frozen_dynamics_are_constant() {
        let m = SdeModel::frozen(vec![3.0, 4.0]);
        let g = TimeGrid::new(1.0, 50).unwrap();
        let p = simulate_path(&m, &g, 1, 0, false).unwrap();
        assert_eq!(p.states.len(), 51 * 2);
        for k in 0..=50 {
            assert_eq!(p.state(k), &[3.0, 4.0]);
        }
    }

    #[test]
    fn single_step_bm_increment_is_one_gaussian_draw() {
        let m = SdeModel::standard_bm(vec![0.5]);
        let g = TimeGrid::new(1.0, 1).unwrap();
        let p = simulate_path(&m, &g, 11, 2, true).unwrap();
        let dw = p.noise_increment(0).unwrap()[0];
        let mut rng = path_rng(11, 2);
        let z: f64 = rng.sample(StandardNormal);
        assert_eq!(dw, z);
        assert_eq!(p.state(1)[0] - p.state(0)[0], dw);
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let m = SdeModel::singular_radial_drift(vec![1.0, 0.0]);
        let g = TimeGrid::new(1.0, 200).unwrap();
        let a = simulate_path(&m, &g, 99, 5, true).unwrap();
        let b = simulate_path(&m, &g, 99, 5, true).unwrap();
        assert_eq!(a, b);
        let all = simulate_paths(&m, &g, 8, 99).unwrap();
        assert_eq!(all[5].states, a.states);
    }

    #[test]
    fn singular_drift_is_exact_and_zero_at_origin() {
        let mut b = [0.0; 2];
        singular_drift(&[0.0, 0.0], &mut b);
        assert_eq!(b, [0.0, 0.0]);
        singular_drift(&[2.0, 0.0], &mut b);
        assert_eq!(b, [-0.25, 0.0]);
    }

    #[test]
    fn explosion_is_flagged_not_dropped() {
        let drift: Arc<DriftFn> =
            Arc::new(|_, x: &[f64], out: &mut [f64]| out[0] = x[0] * x[0] * 1e300);
        let diff: Arc<DiffusionFn> = Arc::new(|_, _: &[f64], out: &mut [f64]| out[0] = 0.0);
        let m = SdeModel::user(vec![1.0], drift, diff);
        let g = TimeGrid::new(1.0, 10).unwrap();
        let p = simulate_path(&m, &g, 0, 0, false).unwrap();
        assert_eq!(p.exploded_at, Some(2));
        assert_eq!(p.states.len(), 11);
        assert_eq!(p.valid_steps(), 1);
    }

    #[test]
    fn rejects_empty_runs() {
        let m = SdeModel::standard_bm(vec![0.0]);
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert_eq!(simulate_paths(&m, &g, 0, 1), Err(Error::NoPaths));
    }
}
