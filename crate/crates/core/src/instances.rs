//! Builders for the concrete games: forecasting competitions, Hotelling
//! models, spatial voting, Voronoi games on graphs and the counterexample
//! constructions.

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{append_distinct, lattice, Edge, GameDefinition, Metric, Position, Space, Target};

/// Deviation lattice points per dimension used when none is given.
pub fn default_grid(dim: usize) -> usize {
    match dim {
        1 => 1001,
        2 => 101,
        _ => 21,
    }
}

/// A weighted point, used for consumers and classic Hotelling targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub point: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    /// `m` binary events; `q[j]` is the probability of the outcome whose
    /// k-th coordinate is bit `m − 1 − k` of `j`.
    Forecasting {
        m: usize,
        q: Vec<f64>,
        #[serde(default)]
        grid: Option<usize>,
    },
    /// Stores at fixed locations serving weighted consumers.
    FiniteHotelling {
        locations: Vec<Vec<f64>>,
        consumers: Vec<WeightedPoint>,
        #[serde(default)]
        metric: Metric,
    },
    /// Sellers anywhere on `[0, 1]`, consumers at weighted points.
    ClassicHotelling {
        q: Vec<WeightedPoint>,
        #[serde(default)]
        grid: Option<usize>,
    },
    /// Positions and targets are the vertices of a graph with positive
    /// edge weights.
    VoronoiGraph {
        vertices: Vec<String>,
        edges: Vec<Edge>,
        masses: Vec<f64>,
    },
    /// Candidates in `[lower, upper]^k`; every voter counts equally.
    SpatialVoting {
        ideals: Vec<Vec<f64>>,
        #[serde(default)]
        metric: Metric,
        #[serde(default)]
        lower: Option<f64>,
        #[serde(default)]
        upper: Option<f64>,
        #[serde(default)]
        grid: Option<usize>,
    },
    /// Path `x1 − x2 − x3` without pure equilibria for suitable `n`.
    ThreeNode { epsilon: f64, n: usize },
    /// Two-event forecasting game without pure equilibria.
    ForecastingM2 {
        epsilon1: f64,
        epsilon2: f64,
        n: usize,
        #[serde(default)]
        grid: Option<usize>,
    },
    /// `[0, 1]` with equal mass on both endpoints.
    NonExtremePair {
        #[serde(default)]
        grid: Option<usize>,
    },
    /// One position per target, each the unique closest position of its
    /// own target.
    Separated { p: Vec<f64> },
}

impl InstanceSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            InstanceSpec::Forecasting { .. } => "forecasting",
            InstanceSpec::FiniteHotelling { .. } => "finite_hotelling",
            InstanceSpec::ClassicHotelling { .. } => "classic_hotelling",
            InstanceSpec::VoronoiGraph { .. } => "voronoi_graph",
            InstanceSpec::SpatialVoting { .. } => "spatial_voting",
            InstanceSpec::ThreeNode { .. } => "three_node",
            InstanceSpec::ForecastingM2 { .. } => "forecasting_m2",
            InstanceSpec::NonExtremePair { .. } => "non_extreme_pair",
            InstanceSpec::Separated { .. } => "separated",
        }
    }
}

pub const INSTANCE_KINDS: &[&str] = &[
    "forecasting",
    "finite_hotelling",
    "classic_hotelling",
    "voronoi_graph",
    "spatial_voting",
    "three_node",
    "forecasting_m2",
    "non_extreme_pair",
    "separated",
];

fn normalized(weights: &[f64], what: &str) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::spec(format!("{what} must be non-negative and finite")));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::spec(format!("{what} have zero total")));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

fn probability(weights: &[f64], what: &str) -> Result<()> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::spec(format!("{what} must be non-negative")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::spec(format!("{what} sum to {total}, expected 1")));
    }
    Ok(())
}

fn grid_or_default(grid: Option<usize>, dim: usize) -> Result<usize> {
    match grid {
        Some(g) if g < 2 => Err(Error::spec("grid needs at least 2 points per dimension")),
        Some(g) => Ok(g),
        None => Ok(default_grid(dim)),
    }
}

fn point_label(p: &[f64]) -> String {
    Position::Point(p.to_vec()).to_string()
}

/// Corner `j` of the unit cube in `m` dimensions.
pub fn outcome(j: usize, m: usize) -> Vec<f64> {
    (0..m).map(|k| ((j >> (m - 1 - k)) & 1) as f64).collect()
}

fn remap(e: Error) -> Error {
    match e {
        Error::Domain(msg) => Error::InvalidSpec(msg),
        other => other,
    }
}

/// Build the game described by `spec`.
pub fn build(spec: &InstanceSpec) -> Result<GameDefinition> {
    build_inner(spec).map_err(remap)
}

fn build_inner(spec: &InstanceSpec) -> Result<GameDefinition> {
    match spec {
        InstanceSpec::Forecasting { m, q, grid } => {
            if *m == 0 || *m > 12 {
                return Err(Error::spec(format!("m = {m} must lie in 1..=12")));
            }
            if q.len() != 1 << m {
                return Err(Error::spec(format!("q has {} entries, expected 2^{m} = {}", q.len(), 1 << m)));
            }
            probability(q, "outcome probabilities")?;
            let points: Vec<Vec<f64>> = (0..q.len()).map(|j| outcome(j, *m)).collect();
            let targets = points.iter().zip(q).map(|(p, &w)| Target::new(point_label(p), w)).collect();
            GameDefinition::geometric(targets, points, Metric::Euclidean, 0.0, 1.0, grid_or_default(*grid, *m)?)
        }
        InstanceSpec::FiniteHotelling { locations, consumers, metric } => {
            if locations.is_empty() || consumers.is_empty() {
                return Err(Error::spec("finite Hotelling needs stores and consumers"));
            }
            let dim = locations[0].len();
            if locations.iter().chain(consumers.iter().map(|c| &c.point)).any(|p| p.len() != dim) {
                return Err(Error::spec("all points must share one dimension"));
            }
            let masses = normalized(&consumers.iter().map(|c| c.weight).collect::<Vec<_>>(), "consumer weights")?;
            let distance: Vec<Vec<f64>> =
                locations.iter().map(|l| consumers.iter().map(|c| metric.distance(l, &c.point)).collect()).collect();
            let tol = crate::game::FLOAT_TIE_TOLERANCE;
            for (j, c) in consumers.iter().enumerate() {
                if masses[j] == 0.0 {
                    continue;
                }
                let best = distance.iter().map(|row| row[j]).fold(f64::INFINITY, f64::min);
                let tied = distance.iter().filter(|row| row[j] <= best + tol).count();
                if tied > 1 {
                    return Err(Error::spec(format!(
                        "consumer c{} at {} is equidistant to {tied} stores",
                        j + 1,
                        point_label(&c.point)
                    )));
                }
            }
            let labels = (1..=locations.len()).map(|i| format!("s{i}")).collect();
            let targets = masses.iter().enumerate().map(|(j, &m)| Target::new(format!("c{}", j + 1), m)).collect();
            Ok(GameDefinition::finite(labels, targets, distance)?.with_tie_tolerance(tol))
        }
        InstanceSpec::ClassicHotelling { q, grid } => {
            if q.is_empty() || q.iter().any(|w| w.point.len() != 1) {
                return Err(Error::spec("classic Hotelling needs one-dimensional consumer points"));
            }
            let masses = normalized(&q.iter().map(|w| w.weight).collect::<Vec<_>>(), "consumer weights")?;
            let points: Vec<Vec<f64>> = q.iter().map(|w| w.point.clone()).collect();
            let targets = masses.iter().enumerate().map(|(j, &m)| Target::new(format!("c{}", j + 1), m)).collect();
            GameDefinition::geometric(targets, points, Metric::Euclidean, 0.0, 1.0, grid_or_default(*grid, 1)?)
        }
        InstanceSpec::VoronoiGraph { vertices, edges, masses } => {
            if masses.len() != vertices.len() {
                return Err(Error::spec(format!("{} masses for {} vertices", masses.len(), vertices.len())));
            }
            if edges.iter().any(|e| !(e.weight > 0.0)) {
                return Err(Error::spec("Voronoi edge weights must be positive"));
            }
            let masses = normalized(masses, "vertex masses")?;
            let targets = vertices.iter().zip(&masses).map(|(v, &m)| (Target::new(v.clone(), m), v.clone())).collect();
            GameDefinition::graph(vertices.clone(), edges.clone(), targets)
        }
        InstanceSpec::SpatialVoting { ideals, metric, lower, upper, grid } => {
            if ideals.is_empty() {
                return Err(Error::spec("spatial voting needs at least one voter"));
            }
            let dim = ideals[0].len();
            let m = 1.0 / ideals.len() as f64;
            let targets = (1..=ideals.len()).map(|i| Target::new(format!("v{i}"), m)).collect();
            GameDefinition::geometric(
                targets,
                ideals.clone(),
                *metric,
                lower.unwrap_or(0.0),
                upper.unwrap_or(1.0),
                grid_or_default(*grid, dim)?,
            )
        }
        InstanceSpec::ThreeNode { epsilon, n } => {
            let (e, nf) = (*epsilon, *n as f64);
            if !(e > 0.0 && e <= 0.5) {
                return Err(Error::spec(format!("epsilon = {e} must lie in (0, 1/2]")));
            }
            let p3 = (nf - 4.0 + 3.0 * e) / nf;
            if !(p3 > 0.0) {
                return Err(Error::spec(format!("n = {n} leaves no mass on x3")));
            }
            let labels: Vec<String> = ["x1", "x2", "x3"].map(String::from).to_vec();
            let edge = |a: &str, b: &str| Edge { from: a.into(), to: b.into(), weight: 1.0 };
            let masses = [(2.0 - 2.0 * e) / nf, (2.0 - e) / nf, p3];
            let targets = labels.iter().zip(masses).map(|(l, m)| (Target::new(l.clone(), m), l.clone())).collect();
            let game = GameDefinition::graph(labels, vec![edge("x1", "x2"), edge("x2", "x3")], targets)?;
            Ok(game.with_tie_tolerance(0.0))
        }
        InstanceSpec::ForecastingM2 { epsilon1, epsilon2, n, grid } => {
            let (e1, e2, nf) = (*epsilon1, *epsilon2, *n as f64);
            if !(e1 > 0.5 && e1 < 1.0) {
                return Err(Error::spec(format!("epsilon1 = {e1} must lie in (1/2, 1)")));
            }
            if !(e2 > 0.0 && e2 < e1) {
                return Err(Error::spec(format!("epsilon2 = {e2} must lie in (0, epsilon1)")));
            }
            let p4 = (nf - 6.0 + 2.0 * e1 + e2) / nf;
            if !(p4 > 0.0) {
                return Err(Error::spec(format!("n = {n} leaves no mass on x4")));
            }
            let points = vec![vec![0.0, 1.0], vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]];
            let masses = [(2.0 - e1) / nf, (2.0 - e1) / nf, (2.0 - e2) / nf, p4];
            let targets = (1..=4).zip(masses).map(|(i, m)| Target::new(format!("x{i}"), m)).collect();
            GameDefinition::geometric(targets, points, Metric::Euclidean, 0.0, 1.0, grid_or_default(*grid, 2)?)
        }
        InstanceSpec::NonExtremePair { grid } => GameDefinition::geometric(
            vec![Target::new("y0", 0.5), Target::new("y1", 0.5)],
            vec![vec![0.0], vec![1.0]],
            Metric::Euclidean,
            0.0,
            1.0,
            grid_or_default(*grid, 1)?,
        ),
        InstanceSpec::Separated { p } => GameDefinition::separated(p),
    }
}

/// Uniform lattice with `resolution` points per dimension over the
/// position box, together with every target point.
pub fn deviation_grid(game: &GameDefinition, resolution: usize) -> Result<Vec<Position>> {
    match game.space() {
        Space::Geometric { dim, lower, upper, points, .. } => {
            if resolution < 2 {
                return Err(Error::domain("resolution must be at least 2"));
            }
            let mut out = lattice(*dim, *lower, *upper, resolution);
            append_distinct(&mut out, points.iter().map(|p| Position::Point(p.clone())));
            Ok(out)
        }
        _ => Err(Error::domain("deviation grids apply to geometric games")),
    }
}

/// Smallest `n` for which the three-node game has no pure equilibrium:
/// the least integer above `max{6, 4/ε − 4}`.
pub fn three_node_min_n(epsilon: f64) -> usize {
    let bound = f64::max(6.0, 4.0 / epsilon - 4.0);
    (bound + 1e-9).floor() as usize + 1
}

/// Dense shortest-path table of an undirected graph.
pub(crate) fn all_pairs_shortest_paths(vertices: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut g: UnGraph<(), f64> = UnGraph::with_capacity(vertices, edges.len());
    let nodes: Vec<NodeIndex> = (0..vertices).map(|_| g.add_node(())).collect();
    for &(a, b, w) in edges {
        g.add_edge(nodes[a], nodes[b], w);
    }
    nodes
        .iter()
        .map(|&src| {
            let dist = dijkstra(&g, src, None, |e| *e.weight());
            nodes.iter().map(|n| dist.get(n).copied().unwrap_or(f64::INFINITY)).collect()
        })
        .collect()
}

/// Random finite game with `s` pseudo-targets and up to `2s` targets.
///
/// Pseudo-target masses are drawn from `[1, 1.5]` and normalized, so `p0`
/// stays near `1/s`; each is split over one or two targets. Every position
/// is at distance 0 from its own targets and at a random distance in
/// `[1, 2]` from the others.
pub fn random_finite<R: Rng + ?Sized>(rng: &mut R, s: usize) -> GameDefinition {
    let raw: Vec<f64> = (0..s).map(|_| rng.random_range(1.0..=1.5)).collect();
    let total: f64 = raw.iter().sum();
    let mut owner = Vec::new();
    let mut masses = Vec::new();
    for (x, w) in raw.iter().enumerate() {
        if rng.random_bool(0.5) {
            let split = rng.random_range(0.2..0.8);
            masses.push(w / total * split);
            masses.push(w / total * (1.0 - split));
            owner.extend([x, x]);
        } else {
            masses.push(w / total);
            owner.push(x);
        }
    }
    let sum: f64 = masses.iter().sum();
    let last = masses.len() - 1;
    masses[last] += 1.0 - sum;
    let distance = (0..s)
        .map(|x| owner.iter().map(|&o| if o == x { 0.0 } else { rng.random_range(1.0..2.0) }).collect())
        .collect();
    let labels = (1..=s).map(|i| format!("x{i}")).collect();
    let targets = masses.iter().enumerate().map(|(j, &m)| Target::new(format!("y{}", j + 1), m)).collect();
    GameDefinition::finite(labels, targets, distance).expect("random game is valid")
}
