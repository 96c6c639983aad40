use occlab_core::geometry::{level_set_distance_equivalence, smoothstep};
use occlab_core::linalg::{norm, Matrix};
use occlab_core::{
    Error, Foliation, GoodExtension, GraphFunction, GraphSurface, LevelFunction, Manifold, Region,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn parabola(c: f64) -> Manifold {
    let func = GraphFunction::Quadratic {
        hessian: Matrix::from_rows(&[vec![2.0 * c]]).unwrap(),
        linear: vec![0.0],
        constant: 0.0,
    };
    Manifold::graph(GraphSurface::new(func, 10.0).unwrap())
}

fn leaf_shapes() -> Vec<(&'static str, Manifold)> {
    vec![
        ("circle", Manifold::unit_circle()),
        (
            "hyperplane",
            Manifold::hyperplane(vec![0.6, 0.8], 0.3).unwrap(),
        ),
        (
            "sphere3",
            Manifold::sphere(vec![0.5, -0.5, 1.0], 2.0).unwrap(),
        ),
        ("parabola", parabola(1.0)),
    ]
}

/// A point within `band` of the manifold, drawn around a random foot point.
fn point_near(m: &Manifold, rng: &mut ChaCha8Rng, band: f64) -> Vec<f64> {
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
        _ => unreachable!(),
    }
}

/// A point on the manifold; graphs are sampled over `|y| < span`.
fn sample_manifold(m: &Manifold, rng: &mut ChaCha8Rng, span: f64) -> Vec<f64> {
    match m {
        Manifold::Graph(g) => g.lift(&[rng.random_range(-span..span)]),
        _ => {
            let x = point_near(m, rng, 1e-3);
            m.project(&x).unwrap().point
        }
    }
}

#[test]
fn spec_distance_examples() {
    let circle = Manifold::unit_circle();
    assert_eq!(circle.distance(&[2.0, 0.0]).unwrap(), 1.0);
    let line = Manifold::hyperplane(vec![0.0, 1.0], 0.0).unwrap();
    assert_eq!(line.distance(&[5.0, -3.0]).unwrap(), 3.0);
    let cross = Manifold::CrossingLines.distance(&[1.0, 0.0]).unwrap();
    assert!((cross - 1.0 / 2f64.sqrt()).abs() < 1e-15);

    assert_eq!(circle.signed_distance(&[0.5, 0.0]).unwrap(), -0.5);
    assert!((line.signed_distance(&[7.0, 0.2]).unwrap() - 0.2).abs() < 1e-15);
    let par = parabola(1.0);
    assert!((par.signed_distance(&[0.0, 0.1]).unwrap() - 0.1).abs() < 1e-12);
    assert!(matches!(
        Manifold::SquareBoundary.signed_distance(&[0.5, 0.5]),
        Err(Error::PiecewiseUnsupported(_))
    ));
}

#[test]
fn spec_projection_examples() {
    let circle = Manifold::unit_circle();
    assert_eq!(circle.project(&[2.0, 0.0]).unwrap().point, vec![1.0, 0.0]);
    assert!(circle.project(&[0.0, 0.0]).is_err());
    let line = Manifold::hyperplane(vec![0.0, 1.0], 0.0).unwrap();
    assert_eq!(line.project(&[5.0, -3.0]).unwrap().point, vec![5.0, 0.0]);
    let sq = Manifold::SquareBoundary.project(&[0.5, 0.5]).unwrap();
    assert!(sq.multiple);
    let candidates = [[0.5, 0.0], [0.5, 1.0], [0.0, 0.5], [1.0, 0.5]];
    assert!(candidates.iter().any(|c| c[..] == sq.point[..]));
}

#[test]
fn spec_gradient_examples() {
    let circle = Manifold::unit_circle();
    assert_eq!(
        circle.gradient_signed_distance(&[2.0, 0.0]).unwrap(),
        vec![1.0, 0.0]
    );
    assert_eq!(
        circle.gradient_signed_distance(&[0.5, 0.0]).unwrap(),
        vec![1.0, 0.0]
    );

    let func = GraphFunction::Quadratic {
        hessian: Matrix::from_rows(&[vec![1.0, 0.3], vec![0.3, -0.5]]).unwrap(),
        linear: vec![0.2, -1.0],
        constant: 0.5,
    };
    let g = GraphSurface::new(func.clone(), 5.0).unwrap();
    let phi = LevelFunction::GraphDifference(g);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut grad = vec![0.0; 3];
    let mut gg = vec![0.0; 2];
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        phi.gradient(&x, &mut grad).unwrap();
        func.gradient(&x[..2], &mut gg);
        let lhs = grad.iter().map(|v| v * v).sum::<f64>();
        let rhs = gg.iter().map(|v| v * v).sum::<f64>() + 1.0;
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
    }
}

#[test]
fn spec_good_extension_examples() {
    let ext = GoodExtension::new(Manifold::unit_circle(), 0.5).unwrap();
    assert!((ext.value(&[1.2, 0.0]).unwrap() - 0.2).abs() < 1e-15);
    assert!(GoodExtension::new(Manifold::unit_circle(), 1.0).is_err());
    let plane = Manifold::hyperplane(vec![0.0, 1.0], 0.0).unwrap();
    let ext = GoodExtension::new(plane, 1.0).unwrap();
    assert!((ext.value(&[4.0, -0.9]).unwrap() - 0.9).abs() < 1e-15);
}

#[test]
fn spec_level_set_equivalence_examples() {
    let c = Manifold::unit_circle();
    assert_eq!(
        level_set_distance_equivalence(&c, 0.3, 0.25, &[1.5, 0.0]).unwrap(),
        (true, true)
    );
    assert_eq!(
        level_set_distance_equivalence(&c, 0.3, 0.1, &[1.5, 0.0]).unwrap(),
        (false, false)
    );
    let plane = Manifold::hyperplane(vec![0.0, 1.0], 0.0).unwrap();
    assert_eq!(
        level_set_distance_equivalence(&plane, 1.0, 0.5, &[0.0, 1.4]).unwrap(),
        (true, true)
    );
}

#[test]
fn eikonal_on_every_leaf_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, m) in leaf_shapes() {
        let reach = m.reach().reach;
        let band = if reach.is_finite() { 0.5 * reach } else { 1.0 };
        let h = 1e-6 * if reach.is_finite() { reach } else { 1.0 };
        let n = m.dim();
        for _ in 0..1000 {
            let x = point_near(&m, &mut rng, band);
            let mut g2 = 0.0;
            for i in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let d =
                    (m.signed_distance(&xp).unwrap() - m.signed_distance(&xm).unwrap()) / (2.0 * h);
                g2 += d * d;
            }
            assert!(
                (g2.sqrt() - 1.0).abs() < 1e-4,
                "{name} at {x:?}: {}",
                g2.sqrt()
            );
        }
    }
}

#[test]
fn projection_is_idempotent_and_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (name, m) in leaf_shapes() {
        let reach = m.reach().reach;
        let band = if reach.is_finite() { 0.9 * reach } else { 2.0 };
        let cloud: Vec<Vec<f64>> = (0..10_000)
            .map(|_| sample_manifold(&m, &mut rng, 3.0))
            .collect();
        let tol = if matches!(m, Manifold::Graph(_)) {
            1e-10
        } else {
            1e-14
        };
        for _ in 0..50 {
            let x = point_near(&m, &mut rng, band);
            let p = m.project(&x).unwrap().point;
            let d = m.distance(&x).unwrap();
            let direct: f64 = x
                .iter()
                .zip(&p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!((direct - d).abs() <= tol * (1.0 + d), "{name}");
            let again = m.project(&p).unwrap().point;
            for (a, b) in again.iter().zip(&p) {
                assert!((a - b).abs() < 1e-9, "{name} idempotence");
            }
            assert!(m.distance(&p).unwrap() < 1e-9);
            for q in &cloud {
                let dq: f64 = x
                    .iter()
                    .zip(q)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert!(
                    dq >= d - 1e-8,
                    "{name}: sampled point closer than the projection"
                );
            }
        }
    }
}

#[test]
fn distance_level_sets_match_shifted_bands() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (name, m) in leaf_shapes() {
        let reach = m.reach().reach;
        let top = if reach.is_finite() { reach } else { 2.0 };
        for _ in 0..10_000 {
            let a = rng.random_range(0.01..0.6) * top;
            let eps = rng.random_range(0.01..0.35) * top;
            if a + eps >= reach {
                continue;
            }
            let x = point_near(&m, &mut rng, 0.95 * top);
            let (lhs, rhs) = level_set_distance_equivalence(&m, a, eps, &x).unwrap();
            assert_eq!(lhs, rhs, "{name}: a={a} eps={eps} x={x:?}");
        }
    }
}

#[test]
fn good_extension_band_identity_on_grid() {
    let shapes = [
        (Manifold::unit_circle(), 0.5),
        (Manifold::hyperplane(vec![0.6, 0.8], 0.3).unwrap(), 1.0),
        (parabola(1.0), 0.3),
    ];
    for (m, inner) in shapes {
        let ext = GoodExtension::new(m.clone(), inner).unwrap();
        for eps in [0.1 * inner, 0.5 * inner, 0.9 * inner] {
            for i in 0..200 {
                for j in 0..200 {
                    let x = [
                        -3.0 + 6.0 * (i as f64 + 0.5) / 200.0,
                        -3.0 + 6.0 * (j as f64 + 0.5) / 200.0,
                    ];
                    if matches!(m, Manifold::Sphere { .. }) && x == [0.0, 0.0] {
                        continue;
                    }
                    let d = m.distance(&x).unwrap();
                    let phi = ext.value(&x).unwrap();
                    assert_eq!(phi < eps, d < eps, "{} eps={eps} x={x:?}", m.tag());
                }
            }
        }
    }
}

/// Flood-fill over a grid of the band minus a thin neighbourhood of the
/// manifold: every connected component carries a single sign.
#[test]
fn signed_distance_sign_is_constant_on_components() {
    let shapes = [
        (Manifold::unit_circle(), 0.6),
        (Manifold::hyperplane(vec![0.6, 0.8], 0.3).unwrap(), 0.8),
        (parabola(1.0), 0.4),
    ];
    const M: usize = 240;
    for (m, band) in shapes {
        let cell = |i: usize| -3.0 + 6.0 * (i as f64 + 0.5) / M as f64;
        let h = 6.0 / M as f64;
        let mut inside = vec![false; M * M];
        let mut sign = vec![0i8; M * M];
        for i in 0..M {
            for j in 0..M {
                let x = [cell(i), cell(j)];
                let d = m.distance(&x).unwrap();
                if d < band && d > 2.0 * h {
                    inside[i * M + j] = true;
                    sign[i * M + j] = if m.signed_distance(&x).unwrap() > 0.0 {
                        1
                    } else {
                        -1
                    };
                }
            }
        }
        let mut label = vec![usize::MAX; M * M];
        let mut components = 0;
        for start in 0..M * M {
            if !inside[start] || label[start] != usize::MAX {
                continue;
            }
            let s = sign[start];
            let mut stack = vec![start];
            label[start] = components;
            while let Some(c) = stack.pop() {
                assert_eq!(sign[c], s, "{}: sign changes inside a component", m.tag());
                let (i, j) = (c / M, c % M);
                let mut nb = Vec::with_capacity(4);
                if i > 0 {
                    nb.push(c - M);
                }
                if i + 1 < M {
                    nb.push(c + M);
                }
                if j > 0 {
                    nb.push(c - 1);
                }
                if j + 1 < M {
                    nb.push(c + 1);
                }
                for n in nb {
                    if inside[n] && label[n] == usize::MAX {
                        label[n] = components;
                        stack.push(n);
                    }
                }
            }
            components += 1;
        }
        assert!(
            components >= 2,
            "{}: band should split into two sides",
            m.tag()
        );
    }
}

#[test]
fn piecewise_foliations_have_the_printed_values() {
    let sq = LevelFunction::SquareCorner;
    // x1, x2 > 0 with x1 < x2: phi = x1
    assert!((sq.value(&[0.2, 0.4]).unwrap() - 0.2).abs() < 1e-15);
    let cr = LevelFunction::CrossingSignedDistance;
    assert!((cr.value(&[1.0, 0.0]).unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    assert!((cr.value(&[0.0, 1.0]).unwrap() + 1.0 / 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn smoothstep_is_monotone() {
    let mut prev = 0.0;
    for k in 0..=1000 {
        let v = smoothstep(k as f64 / 1000.0);
        assert!(v >= prev);
        prev = v;
    }
    assert_eq!(smoothstep(1.0), 1.0);
}

#[test]
fn region_masks() {
    let f = Foliation::new(
        LevelFunction::SquaredNorm {
            center: vec![0.0, 0.0],
        },
        Region::ComplementOfBall {
            center: vec![0.0, 0.0],
            radius: 0.5,
        },
    );
    assert!(!f.contains(&[0.1, 0.1]).unwrap());
    assert_eq!(f.eval_in_region(&[1.0, 0.0]).unwrap(), Some(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn circle_distance_is_radial(r in 0.01f64..3.0, t in 0.0f64..6.283) {
        let x = [r * t.cos(), r * t.sin()];
        let c = Manifold::unit_circle();
        prop_assert!((c.distance(&x).unwrap() - (r - 1.0).abs()).abs() < 1e-12);
        prop_assert!((c.signed_distance(&x).unwrap() - (r - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn parabola_projection_is_optimal(y in -2.0f64..2.0, s in -0.45f64..0.45) {
        let m = parabola(1.0);
        let Manifold::Graph(g) = &m else { unreachable!() };
        let foot = g.lift(&[y]);
        let n = g.unit_normal(&[y]);
        let x = [foot[0] + s * n[0], foot[1] + s * n[1]];
        let d = m.distance(&x).unwrap();
        prop_assert!((d - s.abs()).abs() < 1e-9);
        prop_assert!((m.signed_distance(&x).unwrap() - s).abs() < 1e-9);
    }

    #[test]
    fn good_extension_is_monotone_in_distance(d1 in 0.0f64..2.0, d2 in 0.0f64..2.0) {
        let ext = GoodExtension::new(Manifold::unit_circle(), 0.5).unwrap();
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(ext.profile(lo) <= ext.profile(hi) + 1e-15);
    }
}
