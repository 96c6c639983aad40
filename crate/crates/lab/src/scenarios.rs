//! Built-in scenarios and the manifold / model catalogs shown by `list`.

use serde::Serialize;

const BUILTINS: &[(&str, &str)] = &[
    (
        "hyperplane-foliation",
        include_str!("../scenarios/hyperplane-foliation.toml"),
    ),
    ("frozen", include_str!("../scenarios/frozen.toml")),
    ("circle-L=L=L", include_str!("../scenarios/circle-lll.toml")),
    (
        "graph-scaling",
        include_str!("../scenarios/graph-scaling.toml"),
    ),
    (
        "graph-conjecture",
        include_str!("../scenarios/graph-conjecture.toml"),
    ),
    (
        "sphere-foliation",
        include_str!("../scenarios/sphere-foliation.toml"),
    ),
    (
        "singular-sde",
        include_str!("../scenarios/singular-sde.toml"),
    ),
    (
        "integrability",
        include_str!("../scenarios/integrability.toml"),
    ),
    (
        "integrability-divergent",
        include_str!("../scenarios/integrability-divergent.toml"),
    ),
    (
        "integrability-sphere",
        include_str!("../scenarios/integrability-sphere.toml"),
    ),
    (
        "square-boundary",
        include_str!("../scenarios/square-boundary.toml"),
    ),
    (
        "crossing-lines",
        include_str!("../scenarios/crossing-lines.toml"),
    ),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub kind: &'static str,
    pub description: &'static str,
    pub anchor: &'static str,
}

pub const MANIFOLDS: &[CatalogEntry] = &[
    CatalogEntry {
        kind: "hyperplane",
        description: "{x : n . x = c}, unit normal n; infinite reach",
        anchor: "flat example of a closed orientable leaf",
    },
    CatalogEntry {
        kind: "sphere",
        description: "{x : |x - c| = r}; reach r",
        anchor: "unit circle of the L=L=L identity; singular integrands near spheres",
    },
    CatalogEntry {
        kind: "linear-graph",
        description: "{x_N = a . x_bar + b}; infinite reach",
        anchor: "graph local time scaling example sqrt(1 + |a|^2)",
    },
    CatalogEntry {
        kind: "quadratic-graph",
        description:
            "{x_N = x_bar^T H x_bar / 2 + l . x_bar + c} over a bounding box; reach bound 1 / |H|",
        anchor: "curved graphs and the weighting conjecture",
    },
    CatalogEntry {
        kind: "square-boundary",
        description: "boundary of [0,1]^2; piecewise smooth, no orientation",
        anchor: "piecewise foliation at a square corner",
    },
    CatalogEntry {
        kind: "crossing-lines",
        description: "x2 = x1 and x2 = -x1; piecewise smooth, no orientation",
        anchor: "piecewise foliation of two crossing lines",
    },
];

pub const MODELS: &[CatalogEntry] = &[
    CatalogEntry {
        kind: "standard-bm",
        description: "dX = dW",
        anchor: "Brownian motion, the reference semimartingale",
    },
    CatalogEntry {
        kind: "frozen",
        description: "dX = 0",
        anchor: "degenerate control case",
    },
    CatalogEntry {
        kind: "drifted-bm",
        description: "dX = b dt + sigma dW, constant b and sigma",
        anchor: "Brownian semimartingale with constant coefficients",
    },
    CatalogEntry {
        kind: "linear",
        description: "dX = (A X + c) dt + sigma dW",
        anchor: "Ornstein-Uhlenbeck type diffusion",
    },
    CatalogEntry {
        kind: "singular-radial-drift",
        description: "dX = -1_{x != 0} x / (2|x|^2) dt + dW, drift clamped at dt^(-1/2)",
        anchor: "SDE with a singular drift and no weak solution from 0",
    },
];
