//! Pure Nash equilibria: construction, verification, enumeration,
//! best-response dynamics and the convergence checks on empirical
//! distributions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::combinatorics::{composition_count, Compositions};
use crate::error::{Error, Result};
use crate::game::{pure_utilities, Counts, GameDefinition, Groups, Position, PositionKey, PureProfile};
use crate::projection::{project, PseudoSpace, FLOOR_GUARD};

/// A deviation is strictly profitable only if it gains more than this.
pub const GAIN_TOLERANCE: f64 = 1e-12;

/// Default limit on the number of count vectors enumerated.
pub const DEFAULT_BUDGET: u128 = 1_000_000;

/// Player counts aligned to the pseudo-targets.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CountVector(pub Vec<usize>);

impl CountVector {
    pub fn n(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn min_count(&self) -> usize {
        self.0.iter().copied().min().unwrap_or(0)
    }

    /// The profile placing the counts on the pseudo-targets in order.
    pub fn profile(&self, ps: &PseudoSpace) -> PureProfile {
        PureProfile::from_counts(&ps.pseudo_targets, &self.0)
    }
}

/// A unilateral deviation and what it is worth to the mover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub player: usize,
    pub from: Position,
    pub to: Position,
    pub before: f64,
    pub after: f64,
    pub gain: f64,
}

/// How much of the deviation space a verification covered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Every position of a finite game was tried.
    AllPositions,
    /// The profile covers X* and every pseudo-target was tried; no position
    /// outside X* can then be a strict improvement.
    PseudoTargetsSufficient,
    /// Only a finite sample of an infinite or partially probed space.
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub is_equilibrium: bool,
    /// First strict improvement, in player order then candidate order.
    pub witness: Option<Deviation>,
    /// `None` when the game does not satisfy the projection condition.
    pub extreme: Option<bool>,
    pub covers: Option<bool>,
    pub counts: Counts,
    pub utility_min: f64,
    pub utility_max: f64,
    pub candidates_checked: usize,
    pub scope: Scope,
}

fn check_candidates(game: &GameDefinition, candidates: &[Position]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::domain("deviation candidate list is empty"));
    }
    candidates.iter().try_for_each(|c| game.check_position(c))
}

/// Check every player of `profile` against every candidate position.
pub fn verify_pure(game: &GameDefinition, profile: &PureProfile, candidates: &[Position]) -> Result<EquilibriumReport> {
    check_candidates(game, candidates)?;
    let utilities = pure_utilities(game, profile)?;
    let groups = Groups::from_profile(game, profile);
    let cand_rows: Vec<Vec<f64>> = candidates.iter().map(|c| game.distance_row(c)).collect();

    let mut witness = None;
    'groups: for (g, &player) in groups.representative.iter().enumerate() {
        let before = groups.deviation_utility(game, g, &groups.rows[g]);
        for (c, row) in cand_rows.iter().enumerate() {
            let after = groups.deviation_utility(game, g, row);
            if after > before + GAIN_TOLERANCE {
                witness = Some(Deviation {
                    player,
                    from: groups.positions[g].clone(),
                    to: candidates[c].clone(),
                    before,
                    after,
                    gain: after - before,
                });
                break 'groups;
            }
        }
    }

    let ps = project(game).ok();
    let keys: Vec<PositionKey> = groups.positions.iter().map(Position::key).collect();
    let cand_keys: std::collections::HashSet<PositionKey> = candidates.iter().map(Position::key).collect();
    let extreme = ps.as_ref().map(|ps| groups.positions.iter().all(|p| ps.index_of(p).is_some()));
    let covers = ps.as_ref().map(|ps| ps.pseudo_targets.iter().all(|x| keys.contains(&x.key())));
    let all_sites = game.sites().is_some_and(|s| s.iter().all(|x| cand_keys.contains(&x.key())));
    let xstar_tried = ps.as_ref().is_some_and(|ps| ps.pseudo_targets.iter().all(|x| cand_keys.contains(&x.key())));
    let scope = if all_sites {
        Scope::AllPositions
    } else if xstar_tried && covers == Some(true) {
        Scope::PseudoTargetsSufficient
    } else {
        Scope::Sampled
    };

    Ok(EquilibriumReport {
        is_equilibrium: witness.is_none(),
        witness,
        extreme,
        covers,
        counts: profile.counts(),
        utility_min: utilities.min(),
        utility_max: utilities.max(),
        candidates_checked: candidates.len(),
        scope,
    })
}

/// Algorithm 1: seed every pseudo-target with `⌊2P(x)/p0⌋` players, then
/// add players one at a time where `P(x)/(k(x)+1)` is largest.
pub fn generate_pure(ps: &PseudoSpace, n: usize) -> Result<CountVector> {
    let required = ps.min_players();
    if n < required {
        return Err(Error::NTooSmall { n, required });
    }
    let mut k: Vec<usize> = ps.p.iter().map(|&p| (2.0 * p / ps.p0 + FLOOR_GUARD).floor() as usize).collect();
    let seeded: usize = k.iter().sum();
    if seeded > n {
        return Err(Error::NTooSmall { n, required: seeded });
    }
    for _ in seeded..n {
        let mut best = 0;
        for x in 1..k.len() {
            if ps.p[x] / (k[x] + 1) as f64 > ps.p[best] / (k[best] + 1) as f64 {
                best = x;
            }
        }
        k[best] += 1;
    }
    Ok(CountVector(k))
}

/// Deviation evaluation for count vectors over a fixed site list, where the
/// candidates are the sites themselves.
pub(crate) struct SiteTable<'a> {
    game: &'a GameDefinition,
    rows: Vec<Vec<f64>>,
    others_min: Vec<f64>,
    others_w: Vec<usize>,
}

impl<'a> SiteTable<'a> {
    pub fn new(game: &'a GameDefinition, sites: &[Position]) -> Self {
        let rows: Vec<Vec<f64>> = sites.iter().map(|s| game.distance_row(s)).collect();
        let cells = rows.len() * game.targets().len();
        SiteTable { game, rows, others_min: vec![0.0; cells], others_w: vec![0; cells] }
    }

    /// Fill, for each occupied site `a` and target, the closest proximity
    /// and the winner count among everyone except one player on `a`.
    fn prepare(&mut self, counts: &[usize]) {
        let tol = self.game.tie_tolerance();
        let nt = self.game.targets().len();
        for a in 0..self.rows.len() {
            if counts[a] == 0 {
                continue;
            }
            for t in 0..nt {
                let mut m = f64::INFINITY;
                for (b, row) in self.rows.iter().enumerate() {
                    let k = counts[b] - usize::from(b == a);
                    if k > 0 && row[t] < m {
                        m = row[t];
                    }
                }
                let mut w = 0;
                for (b, row) in self.rows.iter().enumerate() {
                    let k = counts[b] - usize::from(b == a);
                    if k > 0 && row[t] <= m + tol {
                        w += k;
                    }
                }
                self.others_min[a * nt + t] = m;
                self.others_w[a * nt + t] = w;
            }
        }
    }

    fn deviation(&self, counts: &[usize], a: usize, c: usize) -> f64 {
        let tol = self.game.tie_tolerance();
        let nt = self.game.targets().len();
        let mut total = 0.0;
        for (t, target) in self.game.targets().iter().enumerate() {
            if target.mass == 0.0 {
                continue;
            }
            let m = self.others_min[a * nt + t];
            let r = self.rows[c][t];
            let winners = if r >= m {
                if r > m + tol {
                    continue;
                }
                1 + self.others_w[a * nt + t]
            } else {
                let mut w = 1;
                for (b, row) in self.rows.iter().enumerate() {
                    let k = counts[b] - usize::from(b == a);
                    if k > 0 && row[t] <= r + tol {
                        w += k;
                    }
                }
                w
            };
            total += target.mass / winners as f64;
        }
        total
    }

    /// First strictly improving `(from site, to site, before, after)`.
    pub fn first_improvement(&mut self, counts: &[usize]) -> Option<(usize, usize, f64, f64)> {
        self.prepare(counts);
        for a in 0..self.rows.len() {
            if counts[a] == 0 {
                continue;
            }
            let before = self.deviation(counts, a, a);
            for c in 0..self.rows.len() {
                let after = self.deviation(counts, a, c);
                if after > before + GAIN_TOLERANCE {
                    return Some((a, c, before, after));
                }
            }
        }
        None
    }
}

/// All count vectors over X* that are pure equilibria against deviations
/// to X*, using the default budget.
pub fn enumerate_pure_equilibria(ps: &PseudoSpace, game: &GameDefinition, n: usize) -> Result<Vec<CountVector>> {
    enumerate_pure_equilibria_with_budget(ps, game, n, DEFAULT_BUDGET)
}

pub fn enumerate_pure_equilibria_with_budget(
    ps: &PseudoSpace,
    game: &GameDefinition,
    n: usize,
    budget: u128,
) -> Result<Vec<CountVector>> {
    if n == 0 {
        return Err(Error::domain("enumeration needs at least one player"));
    }
    check_candidates(game, &ps.pseudo_targets)?;
    let required = composition_count(n, ps.len());
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let mut table = SiteTable::new(game, &ps.pseudo_targets);
    Ok(Compositions::new(n, ps.len())
        .filter(|k| table.first_improvement(k).is_none())
        .map(CountVector)
        .collect())
}

/// How the moving player picks among its improving deviations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveRule {
    /// The candidate with the highest utility, ties to the lowest index.
    #[default]
    BestResponse,
    /// The first improving candidate in list order.
    FirstImprovement,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DynamicsStep {
    /// Profile before the move.
    pub profile: PureProfile,
    pub mover: Deviation,
    /// Every strict improvement available in `profile`, one entry per
    /// occupied position (its lowest-index player) and candidate.
    pub improving: Vec<Deviation>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DynamicsOutcome {
    FixedPoint,
    /// The count vector after step `first_visit + period` equals the one
    /// after step `first_visit` (0 is the start).
    Cycle { first_visit: usize, period: usize },
    StepLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DynamicsTrace {
    pub steps: Vec<DynamicsStep>,
    pub final_profile: PureProfile,
    pub outcome: DynamicsOutcome,
}

/// Best-response dynamics: the lowest-index player with a strict
/// improvement moves to its best candidate.
pub fn best_response_dynamics(
    game: &GameDefinition,
    profile: &PureProfile,
    max_steps: usize,
    candidates: &[Position],
) -> Result<DynamicsTrace> {
    dynamics(game, profile, max_steps, candidates, MoveRule::BestResponse)
}

pub fn dynamics(
    game: &GameDefinition,
    profile: &PureProfile,
    max_steps: usize,
    candidates: &[Position],
    rule: MoveRule,
) -> Result<DynamicsTrace> {
    if max_steps == 0 {
        return Err(Error::domain("max_steps must be at least 1"));
    }
    check_candidates(game, candidates)?;
    pure_utilities(game, profile)?;
    let cand_rows: Vec<Vec<f64>> = candidates.iter().map(|c| game.distance_row(c)).collect();

    let state_key = |p: &PureProfile| {
        let mut k: Vec<(PositionKey, usize)> = p.counts().iter().map(|(pos, c)| (pos.key(), *c)).collect();
        k.sort();
        k
    };
    let mut visited: HashMap<Vec<(PositionKey, usize)>, usize> = HashMap::new();
    let mut current = profile.clone();
    visited.insert(state_key(&current), 0);
    let mut steps = Vec::new();

    loop {
        let groups = Groups::from_profile(game, &current);
        let mut improving = Vec::new();
        let mut mover: Option<Deviation> = None;
        for (g, &player) in groups.representative.iter().enumerate() {
            let before = groups.deviation_utility(game, g, &groups.rows[g]);
            let mut chosen: Option<Deviation> = None;
            for (c, row) in cand_rows.iter().enumerate() {
                let after = groups.deviation_utility(game, g, row);
                if after <= before + GAIN_TOLERANCE {
                    continue;
                }
                let dev = Deviation {
                    player,
                    from: groups.positions[g].clone(),
                    to: candidates[c].clone(),
                    before,
                    after,
                    gain: after - before,
                };
                let replace = match (&chosen, rule) {
                    (None, _) => true,
                    (Some(best), MoveRule::BestResponse) => after > best.after,
                    (Some(_), MoveRule::FirstImprovement) => false,
                };
                if replace {
                    chosen = Some(dev.clone());
                }
                improving.push(dev);
            }
            if mover.is_none() {
                mover = chosen;
            }
        }

        let Some(mover) = mover else {
            return Ok(DynamicsTrace { steps, final_profile: current, outcome: DynamicsOutcome::FixedPoint });
        };
        let mut next = current.clone();
        next.relocate(mover.player, mover.to.clone());
        steps.push(DynamicsStep { profile: current, mover, improving });
        current = next;

        let index = steps.len();
        if let Some(&first_visit) = visited.get(&state_key(&current)) {
            let outcome = DynamicsOutcome::Cycle { first_visit, period: index - first_visit };
            return Ok(DynamicsTrace { steps, final_profile: current, outcome });
        }
        visited.insert(state_key(&current), index);
        if index >= max_steps {
            return Ok(DynamicsTrace { steps, final_profile: current, outcome: DynamicsOutcome::StepLimit });
        }
    }
}

/// `k(x) / n`.
pub fn empirical_distribution(counts: &CountVector) -> Result<Vec<f64>> {
    let n = counts.n();
    if n == 0 {
        return Err(Error::domain("empirical distribution of zero players"));
    }
    Ok(counts.0.iter().map(|&k| k as f64 / n as f64).collect())
}

/// `D(phat || p)` with `0 log 0 = 0`.
pub fn kl_divergence(phat: &[f64], p: &[f64]) -> Result<f64> {
    if phat.len() != p.len() {
        return Err(Error::domain(format!("distributions of length {} and {}", phat.len(), p.len())));
    }
    let mut total = 0.0;
    for (i, (&a, &b)) in phat.iter().zip(p).enumerate() {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Err(Error::SupportMismatch { index: i });
        }
        total += a * (a / b).ln();
    }
    Ok(total)
}

/// `⌊cn⌋`, guarded against `c * n` rounding just below an integer.
pub fn floor_cn(c: f64, n: usize) -> usize {
    (c * n as f64 + FLOOR_GUARD).floor().max(0.0) as usize
}

/// `log((⌊cn⌋ + 1) / ⌊cn⌋)`.
pub fn kl_bound(c: f64, n: usize) -> Result<f64> {
    let f = floor_cn(c, n);
    if !(c > 0.0) || f == 0 {
        return Err(Error::domain(format!("c = {c} with n = {n} gives ⌊cn⌋ = 0")));
    }
    Ok(((f + 1) as f64 / f as f64).ln())
}

/// Verdicts of the structural and rate checks on a pure equilibrium.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PureTheoremReport {
    pub n: usize,
    pub c: f64,
    /// `n >= 1/c > 2/p0`.
    pub preconditions: bool,
    pub floor_cn: usize,
    pub covers: bool,
    pub two_per_position: bool,
    pub counts_at_least_floor_cn: bool,
    pub utility_lower: f64,
    pub utility_upper: f64,
    pub utilities: Vec<f64>,
    pub utilities_in_range: bool,
    pub kl: f64,
    pub kl_bound: f64,
    pub kl_within_bound: bool,
}

impl PureTheoremReport {
    pub fn all_pass(&self) -> bool {
        self.covers
            && self.two_per_position
            && self.counts_at_least_floor_cn
            && self.utilities_in_range
            && self.kl_within_bound
    }
}

/// Check coverage, the per-position lower bound `⌊cn⌋`, the utility window
/// and the KL rate for counts over X*. Utilities are those of the P-game in
/// which each pseudo-target is its own unique target.
pub fn check_pure_theorems(ps: &PseudoSpace, counts: &CountVector, n: usize, c: f64) -> Result<PureTheoremReport> {
    if counts.0.len() != ps.len() {
        return Err(Error::domain(format!("{} counts for {} pseudo-targets", counts.0.len(), ps.len())));
    }
    if counts.n() != n {
        return Err(Error::domain(format!("counts sum to {}, expected n = {n}", counts.n())));
    }
    let f = floor_cn(c, n);
    let inv_c = 1.0 / c;
    let preconditions = c > 0.0 && n as f64 >= inv_c - FLOOR_GUARD && inv_c > 2.0 / ps.p0;

    let separated = GameDefinition::separated(&ps.p)?;
    let sites = separated.sites().unwrap_or_default();
    let utilities = pure_utilities(&separated, &PureProfile::from_counts(&sites, &counts.0))?.0;

    let (lower, upper) = if f == 0 {
        (0.0, f64::INFINITY)
    } else {
        let (ff, nn) = (f as f64, n as f64);
        (ff / (ff + 1.0) / nn, (ff + 1.0) / ff / nn)
    };
    let phat = empirical_distribution(counts)?;
    let (kl, kl_ok, bound) = match (kl_divergence(&phat, &ps.p), kl_bound(c, n)) {
        (Ok(kl), Ok(b)) => (kl, kl <= b, b),
        (Ok(kl), Err(_)) => (kl, false, f64::NAN),
        _ => (f64::INFINITY, false, kl_bound(c, n).unwrap_or(f64::NAN)),
    };
    Ok(PureTheoremReport {
        n,
        c,
        preconditions,
        floor_cn: f,
        covers: counts.0.iter().all(|&k| k >= 1),
        two_per_position: counts.0.iter().all(|&k| k >= 2),
        counts_at_least_floor_cn: counts.0.iter().all(|&k| k >= f),
        utility_lower: lower,
        utility_upper: upper,
        utilities_in_range: utilities.iter().all(|&u| u >= lower - 1e-15 && u <= upper + 1e-15),
        utilities,
        kl,
        kl_bound: bound,
        kl_within_bound: kl_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p_game(p: &[f64]) -> (GameDefinition, PseudoSpace) {
        let g = GameDefinition::separated(p).unwrap();
        let ps = project(&g).unwrap();
        (g, ps)
    }

    #[test]
    fn generator_examples() {
        let (_, ps) = p_game(&[0.5, 0.5]);
        assert_eq!(generate_pure(&ps, 4).unwrap().0, vec![2, 2]);
        let (_, ps) = p_game(&[0.3, 0.7]);
        assert_eq!(generate_pure(&ps, 7).unwrap().0, vec![2, 5]);
        let (_, ps) = p_game(&[0.25, 0.25, 0.5]);
        assert_eq!(generate_pure(&ps, 8).unwrap().0, vec![2, 2, 4]);
    }

    #[test]
    fn generator_rejects_small_n() {
        let (_, ps) = p_game(&[0.3, 0.7]);
        assert_eq!(generate_pure(&ps, 6).unwrap_err(), Error::NTooSmall { n: 6, required: 7 });
    }

    #[test]
    fn generated_profile_verifies() {
        let (g, ps) = p_game(&[0.3, 0.7]);
        let k = generate_pure(&ps, 7).unwrap();
        let r = verify_pure(&g, &k.profile(&ps), &ps.pseudo_targets).unwrap();
        assert!(r.is_equilibrium);
        assert_eq!(r.scope, Scope::AllPositions);
        assert_eq!(r.extreme, Some(true));
        assert_eq!(r.covers, Some(true));
    }

    #[test]
    fn uncovered_profile_has_witness() {
        let (g, ps) = p_game(&[0.3, 0.7]);
        let r = verify_pure(&g, &CountVector(vec![0, 7]).profile(&ps), &ps.pseudo_targets).unwrap();
        let w = r.witness.unwrap();
        assert_eq!(w.player, 0);
        assert_eq!(w.to, Position::Site(0));
        assert!(w.gain > 0.0);
        assert_eq!(r.covers, Some(false));
    }

    #[test]
    fn enumeration_contains_generated() {
        let (g, ps) = p_game(&[0.5, 0.5]);
        let eq = enumerate_pure_equilibria(&ps, &g, 4).unwrap();
        assert!(eq.contains(&CountVector(vec![2, 2])));
    }

    #[test]
    fn enumeration_budget() {
        let (g, ps) = p_game(&[0.25; 4]);
        let err = enumerate_pure_equilibria_with_budget(&ps, &g, 10, 100).unwrap_err();
        assert_eq!(err, Error::BudgetExceeded { required: 286, budget: 100 });
    }

    #[test]
    fn site_table_agrees_with_verify() {
        let (g, ps) = p_game(&[0.2, 0.3, 0.5]);
        let mut table = SiteTable::new(&g, &ps.pseudo_targets);
        for k in Compositions::new(9, 3) {
            let fast = table.first_improvement(&k).is_none();
            let slow = verify_pure(&g, &PureProfile::from_counts(&ps.pseudo_targets, &k), &ps.pseudo_targets)
                .unwrap()
                .is_equilibrium;
            assert_eq!(fast, slow, "{k:?}");
        }
    }

    #[test]
    fn dynamics_converge_from_corner() {
        let (g, ps) = p_game(&[0.3, 0.7]);
        let start = CountVector(vec![7, 0]).profile(&ps);
        let trace = best_response_dynamics(&g, &start, 50, &ps.pseudo_targets).unwrap();
        assert_eq!(trace.outcome, DynamicsOutcome::FixedPoint);
        assert!(trace.steps.len() <= 7);
        assert_eq!(trace.final_profile.counts().aligned(&ps.pseudo_targets), vec![2, 5]);
    }

    #[test]
    fn dynamics_fixed_point_immediately() {
        let (g, ps) = p_game(&[0.3, 0.7]);
        let start = generate_pure(&ps, 9).unwrap().profile(&ps);
        let trace = best_response_dynamics(&g, &start, 5, &ps.pseudo_targets).unwrap();
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn empirical_examples() {
        assert_eq!(empirical_distribution(&CountVector(vec![2, 2])).unwrap(), vec![0.5, 0.5]);
        assert_eq!(empirical_distribution(&CountVector(vec![2, 2, 4])).unwrap(), vec![0.25, 0.25, 0.5]);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap_err(), Error::SupportMismatch { index: 1 });
        assert!((kl_bound(1.0 / 7.0, 7).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn theorem_report_examples() {
        let (_, ps) = p_game(&[0.3, 0.7]);
        let r = check_pure_theorems(&ps, &CountVector(vec![2, 5]), 7, 1.0 / 7.0).unwrap();
        assert!(r.preconditions && r.all_pass(), "{r:?}");
        let r = check_pure_theorems(&ps, &CountVector(vec![1, 6]), 7, 1.0 / 7.0).unwrap();
        assert!(r.covers && r.counts_at_least_floor_cn && !r.two_per_position);
        let (_, ps) = p_game(&[0.5, 0.5]);
        let r = check_pure_theorems(&ps, &CountVector(vec![2, 2]), 4, 0.25).unwrap();
        assert!(r.all_pass());
        assert_eq!(r.utilities, vec![0.25; 4]);
    }
}
