//! Cross-path summary statistics.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Mean and standard error of a per-path quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEstimate {
    pub mean: f64,
    /// Standard error of the mean (sample std / sqrt(n)); 0 for a single path.
    pub stderr: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_path: Vec<f64>,
}

impl EnsembleEstimate {
    pub fn from_values(values: Vec<f64>) -> Self {
        let (mean, stderr) = mean_stderr(&values);
        Self {
            mean,
            stderr,
            n: values.len(),
            per_path: values,
        }
    }

    /// Same summary, without retaining the per-path values.
    pub fn summary(values: &[f64]) -> Self {
        let (mean, stderr) = mean_stderr(values);
        Self {
            mean,
            stderr,
            n: values.len(),
            per_path: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        Self {
            mean: 0.0,
            stderr: 0.0,
            n: 0,
            per_path: Vec::new(),
        }
    }

    pub fn strip(mut self) -> Self {
        self.per_path = Vec::new();
        self
    }
}

/// Sample mean and standard error, summed in index order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, libm::sqrt(var / n as f64))
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if libm::fabs(sum) >= libm::fabs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `sqrt(se_a^2 + se_b^2)`.
pub fn pooled_stderr(a: f64, b: f64) -> f64 {
    libm::sqrt(a * a + b * b)
}

/// Per-level mean and standard error of per-path vectors of equal length.
pub fn columnwise(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let m = rows.first().map_or(0, Vec::len);
    let n = rows.len();
    let mut sum = alloc::vec![0.0; m];
    for r in rows {
        for (s, v) in sum.iter_mut().zip(r) {
            *s += v;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n.max(1) as f64).collect();
    let mut ss = alloc::vec![0.0; m];
    for r in rows {
        for ((s, v), mu) in ss.iter_mut().zip(r).zip(&mean) {
            *s += (v - mu) * (v - mu);
        }
    }
    let se = ss
        .iter()
        .map(|s| {
            if n > 1 {
                libm::sqrt(s / (n - 1) as f64 / n as f64)
            } else {
                0.0
            }
        })
        .collect();
    (mean, se)
}

/// Running mean and variance (Welford), updated in a fixed order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        libm::sqrt(self.m2 / (self.n - 1) as f64 / self.n as f64)
    }

    pub fn estimate(&self) -> EnsembleEstimate {
        EnsembleEstimate {
            mean: self.mean,
            stderr: self.stderr(),
            n: self.n,
            per_path: Vec::new(),
        }
    }
}

/// Element-wise [`Accumulator`] over fixed-length vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VecAccumulator {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VecAccumulator {
    pub fn new(len: usize) -> Self {
        Self {
            n: 0,
            mean: alloc::vec![0.0; len],
            m2: alloc::vec![0.0; len],
        }
    }

    pub fn push(&mut self, v: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(v) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    pub fn stderrs(&self) -> Vec<f64> {
        if self.n < 2 {
            return alloc::vec![0.0; self.mean.len()];
        }
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|s| libm::sqrt(s / (n - 1.0) / n))
            .collect()
    }
}
