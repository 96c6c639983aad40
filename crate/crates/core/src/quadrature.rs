//! Adaptive Gauss-Kronrod (7, 15) quadrature with dyadic handling of an
//! integrable singularity at the left endpoint of `[0, 1]`.

use alloc::vec::Vec;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_9,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// `(kronrod, |kronrod - gauss|)` on `[a, b]`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Adaptive bisection until the summed error estimate is below
/// `max(abs_tol, rel_tol |I|)` or `max_intervals` is reached.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> QuadResult {
    let (v, e) = gk15(f, a, b);
    let mut intervals: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let total: f64 = intervals.iter().map(|t| t.2).sum();
        let err: f64 = intervals.iter().map(|t| t.3).sum();
        if !total.is_finite() {
            return QuadResult {
                value: total,
                error: f64::INFINITY,
                evaluations,
                converged: false,
            };
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return QuadResult {
                value: total,
                error: err,
                evaluations,
                converged: true,
            };
        }
        if intervals.len() >= max_intervals {
            return QuadResult {
                value: total,
                error: err,
                evaluations,
                converged: false,
            };
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("nonempty");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        evaluations += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Outcome of integrating a profile over `(0, 1]` with a possible
/// singularity at `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularIntegral {
    /// Partial sum over the resolved pieces plus the extrapolated tail.
    pub value: f64,
    /// Integrals over the dyadic pieces `[2^{-k-1}, 2^{-k}]`, `k = 0, 1, ...`.
    pub pieces: Vec<f64>,
    /// Estimated ratio of consecutive pieces near the singularity.
    pub tail_ratio: f64,
    pub convergent: bool,
    pub quadrature_converged: bool,
}

/// Integrates `f` over `(0, 1]` as a sum over dyadic pieces. The tail
/// converges when consecutive pieces decay geometrically (ratio `< 1`);
/// a ratio that stays at or above `1` signals divergence.
pub fn integrate_singular_at_zero<F: Fn(f64) -> f64>(f: &F, n_pieces: usize) -> SingularIntegral {
    let mut pieces = Vec::with_capacity(n_pieces);
    let mut quadrature_converged = true;
    let mut hi = 1.0;
    for _ in 0..n_pieces {
        let lo = 0.5 * hi;
        let r = integrate(f, lo, hi, 1e-15, 1e-11, 200);
        quadrature_converged &= r.converged;
        pieces.push(r.value);
        hi = lo;
    }
    let m = pieces.len();
    let last = pieces[m - 1].abs();
    let prev = pieces[m - 2].abs();
    let tail_ratio = if prev == 0.0 {
        if last == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        last / prev
    };
    let partial: f64 = pieces.iter().sum();
    let convergent = partial.is_finite() && tail_ratio <= 1.0 - 1e-9;
    let value = if convergent {
        partial + pieces[m - 1] * tail_ratio / (1.0 - tail_ratio)
    } else {
        f64::INFINITY
    };
    SingularIntegral {
        value,
        pieces,
        tail_ratio,
        convergent,
        quadrature_converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(&|x: f64| x * x * x, 0.0, 2.0, 1e-14, 1e-14, 10);
        assert!((r.value - 4.0).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn smooth_oscillatory() {
        let r = integrate(&libm::sin, 0.0, core::f64::consts::PI, 1e-13, 1e-13, 100);
        assert!((r.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_profiles() {
        let half = integrate_singular_at_zero(&|a: f64| 1.0 / libm::sqrt(a), 60);
        assert!(half.convergent);
        assert!((half.value - 2.0).abs() < 1e-8, "{}", half.value);

        let log = integrate_singular_at_zero(&|a: f64| libm::log(a).abs(), 60);
        assert!(log.convergent);
        assert!((log.value - 1.0).abs() < 1e-8, "{}", log.value);

        let inv = integrate_singular_at_zero(&|a: f64| 1.0 / a, 60);
        assert!(!inv.convergent);
        assert_eq!(inv.value, f64::INFINITY);
    }
}
