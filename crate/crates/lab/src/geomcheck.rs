//! Deterministic property suite for the geometry catalog: eikonal equation,
//! nearest-point projection, distance level sets and the good-extension band
//! identity. Every check is exact-pass; nothing is statistical.

use occlab_core::geometry::level_set_distance_equivalence;
use occlab_core::linalg::{norm, Matrix};
use occlab_core::rng::{path_rng, PathRng};
use occlab_core::{GoodExtension, GraphFunction, GraphSurface, Manifold};
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteSize {
    pub eikonal_points: usize,
    pub projection_points: usize,
    pub projection_cloud: usize,
    pub triples: usize,
    pub grid: usize,
}

impl Default for SuiteSize {
    fn default() -> Self {
        Self {
            eikonal_points: 1000,
            projection_points: 50,
            projection_cloud: 10_000,
            triples: 10_000,
            grid: 200,
        }
    }
}

fn parabola() -> Manifold {
    let func = GraphFunction::Quadratic {
        hessian: Matrix::from_rows(&[vec![2.0]]).expect("1x1"),
        linear: vec![0.0],
        constant: 0.0,
    };
    Manifold::graph(GraphSurface::new(func, 10.0).expect("valid graph"))
}

/// The smooth leaf shapes of the catalog.
pub fn leaf_shapes() -> Vec<(&'static str, Manifold)> {
    vec![
        ("circle", Manifold::unit_circle()),
        (
            "hyperplane",
            Manifold::hyperplane(vec![0.6, 0.8], 0.3).expect("unit normal"),
        ),
        (
            "sphere3",
            Manifold::sphere(vec![0.5, -0.5, 1.0], 2.0).expect("positive radius"),
        ),
        ("parabola", parabola()),
    ]
}

/// A point within `band` of `m`, around a random foot point.
fn point_near(m: &Manifold, rng: &mut PathRng, band: f64) -> Vec<f64> {
    let t = rng.random_range(-band..band);
    match m {
        Manifold::Hyperplane { normal, offset } => {
            let s: f64 = rng.random_range(-3.0..3.0);
            let tangent = [-normal[1], normal[0]];
            (0..2)
                .map(|i| (offset + t) * normal[i] + s * tangent[i])
                .collect()
        }
        Manifold::Sphere { center, radius } => {
            let dir: Vec<f64> = (0..center.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let n = norm(&dir).max(1e-3);
            center
                .iter()
                .zip(&dir)
                .map(|(c, d)| c + (radius + t) * d / n)
                .collect()
        }
        Manifold::Graph(g) => {
            let y = rng.random_range(-2.0..2.0);
            let foot = g.lift(&[y]);
            let n = g.unit_normal(&[y]);
            vec![foot[0] + t * n[0], foot[1] + t * n[1]]
        }
        _ => unreachable!("leaf shapes only"),
    }
}

fn sample_on(m: &Manifold, rng: &mut PathRng) -> Vec<f64> {
    match m {
        Manifold::Graph(g) => g.lift(&[rng.random_range(-3.0..3.0)]),
        _ => {
            let x = point_near(m, rng, 1e-3);
            m.project(&x).map(|p| p.point).unwrap_or(x)
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn finish(name: String, cases: usize, failures: Vec<String>) -> Check {
    Check {
        name,
        passed: failures.is_empty(),
        cases,
        detail: match failures.first() {
            None => format!("{cases} cases"),
            Some(f) => format!("{} of {cases} cases fail, first: {f}", failures.len()),
        },
    }
}

/// `|grad delta| = 1 +- 1e-4` by central differences.
pub fn eikonal(seed: u64, size: SuiteSize) -> Vec<Check> {
    leaf_shapes()
        .into_iter()
        .enumerate()
        .map(|(s, (name, m))| {
            let mut rng = path_rng(seed, s as u64);
            let reach = m.reach().reach;
            let band = if reach.is_finite() { 0.5 * reach } else { 1.0 };
            let h = 1e-6 * if reach.is_finite() { reach } else { 1.0 };
            let mut fails = Vec::new();
            for _ in 0..size.eikonal_points {
                let x = point_near(&m, &mut rng, band);
                let mut g2 = 0.0;
                for i in 0..m.dim() {
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[i] += h;
                    xm[i] -= h;
                    match (m.signed_distance(&xp), m.signed_distance(&xm)) {
                        (Ok(a), Ok(b)) => g2 += ((a - b) / (2.0 * h)).powi(2),
                        (Err(e), _) | (_, Err(e)) => fails.push(format!("{x:?}: {e}")),
                    }
                }
                if (g2.sqrt() - 1.0).abs() >= 1e-4 {
                    fails.push(format!("|grad| = {} at {x:?}", g2.sqrt()));
                }
            }
            finish(format!("eikonal/{name}"), size.eikonal_points, fails)
        })
        .collect()
}

/// Projection: distance consistency, idempotence, and no sampled point of
/// the manifold closer than the projection.
pub fn projection(seed: u64, size: SuiteSize) -> Vec<Check> {
    leaf_shapes()
        .into_iter()
        .enumerate()
        .map(|(s, (name, m))| {
            let mut rng = path_rng(seed, 100 + s as u64);
            let reach = m.reach().reach;
            let band = if reach.is_finite() { 0.9 * reach } else { 2.0 };
            let cloud: Vec<Vec<f64>> = (0..size.projection_cloud)
                .map(|_| sample_on(&m, &mut rng))
                .collect();
            let tol = if matches!(m, Manifold::Graph(_)) {
                1e-10
            } else {
                1e-14
            };
            let mut fails = Vec::new();
            for _ in 0..size.projection_points {
                let x = point_near(&m, &mut rng, band);
                let (p, d) = match (m.project(&x), m.distance(&x)) {
                    (Ok(p), Ok(d)) => (p.point, d),
                    (Err(e), _) | (_, Err(e)) => {
                        fails.push(format!("{x:?}: {e}"));
                        continue;
                    }
                };
                if (dist(&x, &p) - d).abs() > tol * (1.0 + d) {
                    fails.push(format!("|x - P(x)| != d at {x:?}"));
                }
                match m.project(&p) {
                    Ok(q) if dist(&q.point, &p) < 1e-9 => {}
                    _ => fails.push(format!("projection not idempotent at {x:?}")),
                }
                if cloud.iter().any(|q| dist(&x, q) < d - 1e-8) {
                    fails.push(format!("a sampled point is closer than P(x) for {x:?}"));
                }
            }
            finish(format!("projection/{name}"), size.projection_points, fails)
        })
        .collect()
}

/// `{d(x, Gamma_a) < eps}` equals `{a - eps < d(x, Gamma) < a + eps}` on
/// random triples `(x, a, eps)` with `a + eps` below the reach.
pub fn level_set_bands(seed: u64, size: SuiteSize) -> Vec<Check> {
    leaf_shapes()
        .into_iter()
        .enumerate()
        .map(|(s, (name, m))| {
            let mut rng = path_rng(seed, 200 + s as u64);
            let reach = m.reach().reach;
            let top = if reach.is_finite() { reach } else { 2.0 };
            let mut fails = Vec::new();
            let mut cases = 0;
            while cases < size.triples {
                let a = rng.random_range(0.01..0.6) * top;
                let eps = rng.random_range(0.01..0.35) * top;
                if a + eps >= reach {
                    continue;
                }
                cases += 1;
                let x = point_near(&m, &mut rng, 0.95 * top);
                match level_set_distance_equivalence(&m, a, eps, &x) {
                    Ok((l, r)) if l == r => {}
                    Ok(_) => fails.push(format!("a = {a}, eps = {eps}, x = {x:?}")),
                    Err(e) => fails.push(format!("a = {a}, eps = {eps}, x = {x:?}: {e}")),
                }
            }
            finish(format!("level-set-bands/{name}"), cases, fails)
        })
        .collect()
}

/// `{phi < eps} = {d < eps}` for the good extension on a grid over
/// `[-3, 3]^2`, for three bandwidths below the inner band.
pub fn good_extension_grid(size: SuiteSize) -> Vec<Check> {
    let shapes = [
        ("circle", Manifold::unit_circle(), 0.5),
        (
            "hyperplane",
            Manifold::hyperplane(vec![0.6, 0.8], 0.3).expect("unit normal"),
            1.0,
        ),
        ("parabola", parabola(), 0.3),
    ];
    let n = size.grid;
    shapes
        .into_iter()
        .map(|(name, m, inner)| {
            let mut fails = Vec::new();
            let mut cases = 0;
            match GoodExtension::new(m.clone(), inner) {
                Err(e) => fails.push(e.to_string()),
                Ok(ext) => {
                    for eps in [0.1 * inner, 0.5 * inner, 0.9 * inner] {
                        for i in 0..n {
                            for j in 0..n {
                                let x = [
                                    -3.0 + 6.0 * (i as f64 + 0.5) / n as f64,
                                    -3.0 + 6.0 * (j as f64 + 0.5) / n as f64,
                                ];
                                cases += 1;
                                match (m.distance(&x), ext.value(&x)) {
                                    (Ok(d), Ok(phi)) if (phi < eps) == (d < eps) => {}
                                    (Ok(d), Ok(phi)) => fails
                                        .push(format!("eps = {eps}, x = {x:?}: phi {phi}, d {d}")),
                                    (Err(e), _) | (_, Err(e)) => {
                                        fails.push(format!("x = {x:?}: {e}"))
                                    }
                                }
                            }
                        }
                    }
                }
            }
            finish(format!("good-extension-grid/{name}"), cases, fails)
        })
        .collect()
}

/// The whole suite.
pub fn run_suite(seed: u64, size: SuiteSize) -> Vec<Check> {
    let mut all = eikonal(seed, size);
    all.extend(projection(seed, size));
    all.extend(level_set_bands(seed, size));
    all.extend(good_extension_grid(size));
    all
}
