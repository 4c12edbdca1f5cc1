//! Game definitions and exact pure-strategy utilities.
//!
//! A game is a finite list of weighted targets, a space of positions and a
//! proximity function between positions and targets. Every target is shared
//! evenly among the players that attain the minimal proximity to it, with
//! co-located players counted individually.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total target mass.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Distance ties on floating-point geometries are resolved with this slack.
pub const FLOAT_TIE_TOLERANCE: f64 = 1e-12;

/// A position a player can occupy.
///
/// Finite and graph games address positions by index (`Site`); geometric
/// games use coordinate vectors (`Point`). In JSON a site is a bare integer
/// and a point is an array of numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Position {
    Site(usize),
    Point(Vec<f64>),
}

/// Hashable, totally ordered identity of a [`Position`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PositionKey {
    Site(usize),
    Point(Vec<u64>),
}

impl Position {
    pub fn point(coords: impl Into<Vec<f64>>) -> Self {
        Position::Point(coords.into())
    }

    pub fn key(&self) -> PositionKey {
        match self {
            Position::Site(i) => PositionKey::Site(*i),
            // adding 0.0 folds -0.0 into +0.0
            Position::Point(xs) => PositionKey::Point(xs.iter().map(|x| (x + 0.0).to_bits()).collect()),
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Site(i) => write!(f, "#{i}"),
            Position::Point(xs) => {
                write!(f, "(")?;
                for (k, x) in xs.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Metric used by geometric games.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    Chebyshev,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Metric::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Metric::Manhattan => diffs.sum(),
            Metric::Chebyshev => diffs.fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub id: String,
    pub mass: f64,
}

impl Target {
    pub fn new(id: impl Into<String>, mass: f64) -> Self {
        Target { id: id.into(), mass }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

/// The position space together with the proximity function.
#[derive(Clone, Debug, PartialEq)]
pub enum Space {
    /// Explicit position list; `distance[position][target]`.
    Finite {
        labels: Vec<String>,
        distance: Vec<Vec<f64>>,
    },
    /// The box `[lower, upper]^dim` under `metric`. Each target sits at
    /// `points[target]`, which is also its unique closest position. `grid`
    /// is the number of lattice points per dimension offered as deviations.
    Geometric {
        dim: usize,
        metric: Metric,
        lower: f64,
        upper: f64,
        points: Vec<Vec<f64>>,
        grid: usize,
    },
    /// Vertices with shortest-path proximity; `distance[vertex][vertex]`.
    Graph {
        labels: Vec<String>,
        edges: Vec<Edge>,
        target_vertex: Vec<usize>,
        distance: Vec<Vec<f64>>,
    },
}

/// A position-optimization game: targets, positions and proximity.
#[derive(Clone, Debug, PartialEq)]
pub struct GameDefinition {
    targets: Vec<Target>,
    space: Space,
    tie_tolerance: f64,
}

fn validate_masses(targets: &[Target]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::domain("a game needs at least one target"));
    }
    let mut total = 0.0;
    for t in targets {
        if !(t.mass.is_finite() && t.mass >= 0.0) {
            return Err(Error::domain(format!("target `{}` has invalid mass {}", t.id, t.mass)));
        }
        total += t.mass;
    }
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::domain(format!("target masses sum to {total}, expected 1")));
    }
    let mut seen = HashMap::new();
    for (i, t) in targets.iter().enumerate() {
        if let Some(j) = seen.insert(t.id.as_str(), i) {
            return Err(Error::domain(format!("duplicate target id `{}` at {j} and {i}", t.id)));
        }
    }
    Ok(())
}

fn validate_distance(d: f64) -> Result<()> {
    if d.is_nan() || d < 0.0 {
        Err(Error::domain(format!("proximity {d} is not a non-negative number")))
    } else {
        Ok(())
    }
}

impl GameDefinition {
    /// A game over an explicit finite position list. `distance` has one row
    /// per position and one column per target. Distances may be `+inf`.
    pub fn finite(labels: Vec<String>, targets: Vec<Target>, distance: Vec<Vec<f64>>) -> Result<Self> {
        validate_masses(&targets)?;
        if labels.is_empty() {
            return Err(Error::domain("a finite game needs at least one position"));
        }
        if distance.len() != labels.len() {
            return Err(Error::domain(format!(
                "{} distance rows for {} positions",
                distance.len(),
                labels.len()
            )));
        }
        for row in &distance {
            if row.len() != targets.len() {
                return Err(Error::domain(format!("distance row has {} entries for {} targets", row.len(), targets.len())));
            }
            row.iter().try_for_each(|&d| validate_distance(d))?;
        }
        Ok(GameDefinition { targets, space: Space::Finite { labels, distance }, tie_tolerance: 0.0 })
    }

    /// A game on `[lower, upper]^dim` whose targets are points of the box.
    pub fn geometric(
        targets: Vec<Target>,
        points: Vec<Vec<f64>>,
        metric: Metric,
        lower: f64,
        upper: f64,
        grid: usize,
    ) -> Result<Self> {
        validate_masses(&targets)?;
        if points.len() != targets.len() {
            return Err(Error::domain(format!("{} points for {} targets", points.len(), targets.len())));
        }
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::domain(format!("invalid box [{lower}, {upper}]")));
        }
        if grid < 2 {
            return Err(Error::domain("deviation grid needs at least 2 points per dimension"));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::domain("geometric games need dimension at least 1"));
        }
        for (p, t) in points.iter().zip(&targets) {
            if p.len() != dim {
                return Err(Error::domain(format!("target `{}` has dimension {}, expected {dim}", t.id, p.len())));
            }
            if p.iter().any(|&x| !(lower..=upper).contains(&x)) {
                return Err(Error::domain(format!("target `{}` lies outside the position box", t.id)));
            }
        }
        Ok(GameDefinition {
            targets,
            space: Space::Geometric { dim, metric, lower, upper, points, grid },
            tie_tolerance: FLOAT_TIE_TOLERANCE,
        })
    }

    /// A game on the vertices of an undirected weighted graph. Each target is
    /// attached to a vertex; proximity is the shortest-path length.
    pub fn graph(labels: Vec<String>, edges: Vec<Edge>, targets: Vec<(Target, String)>) -> Result<Self> {
        let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        if index.len() != labels.len() {
            return Err(Error::domain("duplicate vertex labels"));
        }
        let lookup = |l: &str| index.get(l).copied().ok_or_else(|| Error::domain(format!("unknown vertex `{l}`")));
        let mut weighted = Vec::with_capacity(edges.len());
        for e in &edges {
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Error::domain(format!("edge {}-{} has invalid weight {}", e.from, e.to, e.weight)));
            }
            weighted.push((lookup(&e.from)?, lookup(&e.to)?, e.weight));
        }
        let mut target_vertex = Vec::with_capacity(targets.len());
        for (_, v) in &targets {
            target_vertex.push(lookup(v)?);
        }
        let targets: Vec<Target> = targets.into_iter().map(|(t, _)| t).collect();
        validate_masses(&targets)?;
        let distance = crate::instances::all_pairs_shortest_paths(labels.len(), &weighted);
        Ok(GameDefinition {
            targets,
            space: Space::Graph { labels, edges, target_vertex, distance },
            tie_tolerance: 0.0,
        })
    }

    /// The game in which position `i` is the unique closest position of
    /// target `i` (proximity 0) and every other pair is at proximity 1.
    pub fn separated(p: &[f64]) -> Result<Self> {
        let labels: Vec<String> = (1..=p.len()).map(|i| format!("x{i}")).collect();
        let targets = (1..=p.len()).zip(p).map(|(i, &m)| Target::new(format!("y{i}"), m)).collect();
        let distance = (0..p.len())
            .map(|i| (0..p.len()).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        GameDefinition::finite(labels, targets, distance)
    }

    pub fn with_tie_tolerance(mut self, tol: f64) -> Self {
        self.tie_tolerance = tol.max(0.0);
        self
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn tie_tolerance(&self) -> f64 {
        self.tie_tolerance
    }

    pub(crate) fn masses(&self) -> Vec<f64> {
        self.targets.iter().map(|t| t.mass).collect()
    }

    pub fn target_index(&self, id: &str) -> Result<usize> {
        self.targets
            .iter()
            .position(|t| t.id == id)
            .ok_or_else(|| Error::domain(format!("unknown target `{id}`")))
    }

    pub fn check_position(&self, pos: &Position) -> Result<()> {
        match (&self.space, pos) {
            (Space::Finite { labels, .. }, Position::Site(i)) | (Space::Graph { labels, .. }, Position::Site(i)) => {
                if *i < labels.len() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("site {i} out of range (0..{})", labels.len())))
                }
            }
            (Space::Geometric { dim, lower, upper, .. }, Position::Point(xs)) => {
                if xs.len() != *dim {
                    Err(Error::domain(format!("point has dimension {}, expected {dim}", xs.len())))
                } else if xs.iter().any(|x| !(*lower..=*upper).contains(x)) {
                    Err(Error::domain(format!("point {pos} lies outside [{lower}, {upper}]^{dim}")))
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::domain(format!("position {pos} does not belong to this kind of game"))),
        }
    }

    /// Proximity `d(x, y)` between a position and a target.
    pub fn proximity(&self, pos: &Position, target: &str) -> Result<f64> {
        self.check_position(pos)?;
        Ok(self.dist(pos, self.target_index(target)?))
    }

    /// Proximity to the target with index `t`. The position must be valid.
    pub(crate) fn dist(&self, pos: &Position, t: usize) -> f64 {
        match (&self.space, pos) {
            (Space::Finite { distance, .. }, Position::Site(i)) => distance[*i][t],
            (Space::Graph { distance, target_vertex, .. }, Position::Site(i)) => distance[*i][target_vertex[t]],
            (Space::Geometric { metric, points, .. }, Position::Point(xs)) => metric.distance(xs, &points[t]),
            _ => unreachable!("position kind checked by caller"),
        }
    }

    pub(crate) fn distance_row(&self, pos: &Position) -> Vec<f64> {
        (0..self.targets.len()).map(|t| self.dist(pos, t)).collect()
    }

    /// Human-readable name of a position.
    pub fn label(&self, pos: &Position) -> String {
        match (&self.space, pos) {
            (Space::Finite { labels, .. }, Position::Site(i)) | (Space::Graph { labels, .. }, Position::Site(i))
                if *i < labels.len() =>
            {
                labels[*i].clone()
            }
            _ => pos.to_string(),
        }
    }

    /// Every position of a finite or graph game; `None` for geometric games.
    pub fn sites(&self) -> Option<Vec<Position>> {
        match &self.space {
            Space::Finite { labels, .. } | Space::Graph { labels, .. } => {
                Some((0..labels.len()).map(Position::Site).collect())
            }
            Space::Geometric { .. } => None,
        }
    }

    /// Resolve a position from its label (finite and graph games) or from a
    /// comma-separated coordinate list (geometric games).
    pub fn parse_position(&self, text: &str) -> Result<Position> {
        let pos = match &self.space {
            Space::Finite { labels, .. } | Space::Graph { labels, .. } => labels
                .iter()
                .position(|l| l == text)
                .map(Position::Site)
                .ok_or_else(|| Error::domain(format!("unknown position `{text}`")))?,
            Space::Geometric { .. } => {
                let trimmed = text.trim().trim_start_matches('(').trim_end_matches(')');
                let coords = trimmed
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|e| Error::domain(format!("bad coordinate `{s}`: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                Position::Point(coords)
            }
        };
        self.check_position(&pos)?;
        Ok(pos)
    }

    /// Deviation candidates: every position of a finite game, or the lattice
    /// of the geometric box together with the target points.
    pub fn candidates(&self) -> Vec<Position> {
        match &self.space {
            Space::Finite { .. } | Space::Graph { .. } => self.sites().unwrap_or_default(),
            Space::Geometric { dim, lower, upper, points, grid, .. } => {
                let mut out = lattice(*dim, *lower, *upper, *grid);
                append_distinct(&mut out, points.iter().map(|p| Position::Point(p.clone())));
                out
            }
        }
    }

    /// The finite game obtained by allowing only `positions`, with the same
    /// targets and proximities.
    pub fn restricted(&self, positions: &[Position]) -> Result<Self> {
        for p in positions {
            self.check_position(p)?;
        }
        let labels = positions.iter().map(|p| self.label(p)).collect();
        let distance = positions.iter().map(|p| self.distance_row(p)).collect();
        Ok(GameDefinition::finite(labels, self.targets.clone(), distance)?.with_tie_tolerance(self.tie_tolerance))
    }
}

/// Uniform lattice of `grid` points per dimension over `[lower, upper]^dim`.
pub fn lattice(dim: usize, lower: f64, upper: f64, grid: usize) -> Vec<Position> {
    let axis: Vec<f64> = (0..grid)
        .map(|i| if i + 1 == grid { upper } else { lower + (upper - lower) * (i as f64 / (grid - 1) as f64) })
        .collect();
    let total = grid.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            let mut coords = vec![0.0; dim];
            for c in coords.iter_mut().rev() {
                *c = axis[idx % grid];
                idx /= grid;
            }
            Position::Point(coords)
        })
        .collect()
}

pub(crate) fn append_distinct(out: &mut Vec<Position>, extra: impl IntoIterator<Item = Position>) {
    let mut seen: std::collections::HashSet<PositionKey> = out.iter().map(Position::key).collect();
    for p in extra {
        if seen.insert(p.key()) {
            out.push(p);
        }
    }
}

/// The positions chosen by `n` players.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PureProfile {
    positions: Vec<Position>,
}

impl PureProfile {
    pub fn new(positions: Vec<Position>) -> Self {
        PureProfile { positions }
    }

    /// The profile placing `counts[j]` consecutive players on `sites[j]`.
    pub fn from_counts(sites: &[Position], counts: &[usize]) -> Self {
        let positions = sites
            .iter()
            .zip(counts)
            .flat_map(|(p, &k)| std::iter::repeat_n(p.clone(), k))
            .collect();
        PureProfile { positions }
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn counts(&self) -> Counts {
        counts(self)
    }

    /// Move player `player` to `to`.
    pub fn relocate(&mut self, player: usize, to: Position) {
        self.positions[player] = to;
    }
}

/// Multiplicity of every occupied position, in order of first appearance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Counts(Vec<(Position, usize)>);

impl Counts {
    pub fn get(&self, pos: &Position) -> usize {
        let key = pos.key();
        self.0.iter().find(|(p, _)| p.key() == key).map_or(0, |(_, k)| *k)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Position, usize)> {
        self.0.iter()
    }

    /// Number of distinct positions.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|(_, k)| k).sum()
    }

    /// Counts aligned to `sites`, zero for unoccupied ones.
    pub fn aligned(&self, sites: &[Position]) -> Vec<usize> {
        sites.iter().map(|s| self.get(s)).collect()
    }
}

pub fn counts(profile: &PureProfile) -> Counts {
    let mut index: HashMap<PositionKey, usize> = HashMap::new();
    let mut out: Vec<(Position, usize)> = Vec::new();
    for p in &profile.positions {
        match index.get(&p.key()) {
            Some(&j) => out[j].1 += 1,
            None => {
                index.insert(p.key(), out.len());
                out.push((p.clone(), 1));
            }
        }
    }
    Counts(out)
}

/// Who wins a single target: the players attaining the minimal proximity,
/// each receiving an equal share.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinShareVector {
    pub winners: Vec<usize>,
    pub players: usize,
}

impl WinShareVector {
    pub fn share(&self, player: usize) -> f64 {
        if self.winners.contains(&player) {
            1.0 / self.winners.len() as f64
        } else {
            0.0
        }
    }

    pub fn shares(&self) -> Vec<f64> {
        let each = 1.0 / self.winners.len() as f64;
        let mut out = vec![0.0; self.players];
        for &w in &self.winners {
            out[w] = each;
        }
        out
    }
}

/// Expected winner share of every player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UtilityVector(pub Vec<f64>);

impl UtilityVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_profile(game: &GameDefinition, profile: &PureProfile) -> Result<()> {
    if profile.is_empty() {
        return Err(Error::domain("a profile needs at least one player"));
    }
    profile.positions.iter().try_for_each(|p| game.check_position(p))
}

/// Share of `target` won by each player of `profile`.
pub fn win_shares(game: &GameDefinition, profile: &PureProfile, target: &str) -> Result<WinShareVector> {
    check_profile(game, profile)?;
    let t = game.target_index(target)?;
    let d: Vec<f64> = profile.positions.iter().map(|p| game.dist(p, t)).collect();
    let best = d.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = game.tie_tolerance;
    let winners = (0..d.len()).filter(|&i| d[i] <= best + tol).collect();
    Ok(WinShareVector { winners, players: d.len() })
}

/// Utility of every player: the expected winner share over the targets.
pub fn pure_utilities(game: &GameDefinition, profile: &PureProfile) -> Result<UtilityVector> {
    check_profile(game, profile)?;
    let groups = Groups::from_profile(game, profile);
    let per_group = groups.utilities(game);
    Ok(UtilityVector(groups.member_of.iter().map(|&g| per_group[g]).collect()))
}

/// Players grouped by position, with cached proximities to every target.
///
/// All players sharing a position have identical utilities and identical
/// deviation payoffs, so evaluation works on groups.
#[derive(Clone, Debug)]
pub(crate) struct Groups {
    pub positions: Vec<Position>,
    pub counts: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    /// group of each player
    pub member_of: Vec<usize>,
    /// lowest player index of each group
    pub representative: Vec<usize>,
}

impl Groups {
    pub fn from_profile(game: &GameDefinition, profile: &PureProfile) -> Self {
        let mut index: HashMap<PositionKey, usize> = HashMap::new();
        let mut g = Groups {
            positions: Vec::new(),
            counts: Vec::new(),
            rows: Vec::new(),
            member_of: Vec::with_capacity(profile.len()),
            representative: Vec::new(),
        };
        for (i, p) in profile.positions.iter().enumerate() {
            let j = *index.entry(p.key()).or_insert_with(|| {
                g.positions.push(p.clone());
                g.counts.push(0);
                g.rows.push(game.distance_row(p));
                g.representative.push(i);
                g.positions.len() - 1
            });
            g.counts[j] += 1;
            g.member_of.push(j);
        }
        g
    }

    /// Per-player utility of each group.
    pub fn utilities(&self, game: &GameDefinition) -> Vec<f64> {
        let tol = game.tie_tolerance;
        let mut out = vec![0.0; self.positions.len()];
        for (t, target) in game.targets.iter().enumerate() {
            let best = self.rows.iter().map(|r| r[t]).fold(f64::INFINITY, f64::min);
            let mut winners = 0usize;
            for (g, r) in self.rows.iter().enumerate() {
                if r[t] <= best + tol {
                    winners += self.counts[g];
                }
            }
            let share = target.mass / winners as f64;
            for (g, r) in self.rows.iter().enumerate() {
                if r[t] <= best + tol {
                    out[g] += share;
                }
            }
        }
        out
    }

    /// Utility of one player of group `from` after moving to a position
    /// whose proximities are `row`.
    pub fn deviation_utility(&self, game: &GameDefinition, from: usize, row: &[f64]) -> f64 {
        let tol = game.tie_tolerance;
        let mut total = 0.0;
        for (t, target) in game.targets.iter().enumerate() {
            if target.mass == 0.0 {
                continue;
            }
            let mut best = row[t];
            for (g, r) in self.rows.iter().enumerate() {
                let k = self.counts[g] - usize::from(g == from);
                if k > 0 && r[t] < best {
                    best = r[t];
                }
            }
            if row[t] > best + tol {
                continue;
            }
            let mut winners = 1usize;
            for (g, r) in self.rows.iter().enumerate() {
                let k = self.counts[g] - usize::from(g == from);
                if k > 0 && r[t] <= best + tol {
                    winners += k;
                }
            }
            total += target.mass / winners as f64;
        }
        total
    }
}
