//! Pseudo-targets and the projected distribution.
//!
//! Every positive-mass target must have a unique closest position, its
//! pseudo-target. The projected distribution assigns each pseudo-target the
//! total mass of the targets it is closest to.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{GameDefinition, Position, PositionKey, Space};

/// Default bound on the number of pseudo-targets.
pub const DEFAULT_CAP: usize = 4096;

/// Guard against `2 / p0` landing a rounding error above an integer.
pub(crate) const FLOOR_GUARD: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PseudoSpace {
    /// X*, ordered by position index for finite games and by first
    /// appearance among the targets for geometric games.
    pub pseudo_targets: Vec<Position>,
    pub p: Vec<f64>,
    pub p0: f64,
    /// Positive-mass target id to index into `pseudo_targets`. Zero-mass
    /// targets are dropped before projection and do not appear here.
    pub target_map: BTreeMap<String, usize>,
}

impl PseudoSpace {
    pub fn len(&self) -> usize {
        self.pseudo_targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pseudo_targets.is_empty()
    }

    pub fn index_of(&self, pos: &Position) -> Option<usize> {
        let key = pos.key();
        self.pseudo_targets.iter().position(|x| x.key() == key)
    }

    /// Smallest `n` accepted by the pure equilibrium generator, `⌈2/p0⌉`.
    pub fn min_players(&self) -> usize {
        (2.0 / self.p0 - FLOOR_GUARD).ceil().max(1.0) as usize
    }
}

/// Project with the default cap.
pub fn project(game: &GameDefinition) -> Result<PseudoSpace> {
    project_with_cap(game, DEFAULT_CAP)
}

pub fn project_with_cap(game: &GameDefinition, cap: usize) -> Result<PseudoSpace> {
    let mut assigned: Vec<(usize, Position)> = Vec::new();
    for (t, target) in game.targets().iter().enumerate() {
        if target.mass > 0.0 {
            assigned.push((t, minimizer(game, t)?));
        }
    }
    if let Space::Finite { .. } | Space::Graph { .. } = game.space() {
        assigned.sort_by_key(|(t, p)| (p.key(), *t));
    }

    let mut index: BTreeMap<PositionKey, usize> = BTreeMap::new();
    let mut pseudo_targets = Vec::new();
    let mut p = Vec::new();
    let mut target_map = BTreeMap::new();
    for (t, pos) in assigned {
        let j = *index.entry(pos.key()).or_insert_with(|| {
            pseudo_targets.push(pos.clone());
            p.push(0.0);
            pseudo_targets.len() - 1
        });
        p[j] += game.targets()[t].mass;
        target_map.insert(game.targets()[t].id.clone(), j);
    }
    if pseudo_targets.len() > cap {
        return Err(Error::CapExceeded { count: pseudo_targets.len(), cap });
    }
    let p0 = p.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PseudoSpace { pseudo_targets, p, p0, target_map })
}

fn minimizer(game: &GameDefinition, t: usize) -> Result<Position> {
    let sites = match game.space() {
        Space::Geometric { points, .. } => return Ok(Position::Point(points[t].clone())),
        Space::Finite { .. } | Space::Graph { .. } => game.sites().unwrap_or_default(),
    };
    let d: Vec<f64> = sites.iter().map(|s| game.dist(s, t)).collect();
    let best = d.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = game.tie_tolerance();
    let winners: Vec<usize> = (0..d.len()).filter(|&i| d[i] <= best + tol).collect();
    if winners.len() == 1 {
        Ok(sites[winners[0]].clone())
    } else {
        Err(Error::ConditionViolated { target: game.targets()[t].id.clone(), minimizers: winners.len() })
    }
}
