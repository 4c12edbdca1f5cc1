//! Symmetric mixed strategies.
//!
//! All players draw their position from one distribution `σ`. The closed
//! forms here describe the utility of deviating to a pseudo-target `x` with
//! projected mass `p` and equilibrium weight `σ = σ_x`:
//!
//! * `g(p, σ, n) = p/(nσ)·(1 − σⁿ − (1−σ)ⁿ) + σⁿ⁻¹/n`
//! * `G(σ) = (σ − σⁿ)/(1 − σⁿ − (1−σ)ⁿ)`, the `p` for which `g = 1/n`
//! * `Ḡ(σ) = (σ − σⁿ − σ/n)/(1 − σⁿ − (1−σ)ⁿ)`

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial_pmf, composition_count, multinomial_pmf, Compositions};
use crate::error::{Error, Result};
use crate::game::{GameDefinition, Position, PositionKey};
use crate::projection::PseudoSpace;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_BISECTION_STEPS: usize = 200;
pub const DEFAULT_SEED: u64 = 0x005e_ed0f_2024;
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Above this many pseudo-targets coverage falls back to Monte Carlo.
pub const EXACT_COVERAGE_LIMIT: usize = 20;

const BATCH: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    support: Vec<Position>,
    weights: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(support: Vec<Position>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(Error::domain(format!("{} support points for {} weights", support.len(), weights.len())));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain("mixed strategy weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("mixed strategy weights sum to {total}")));
        }
        let mut keys: Vec<PositionKey> = support.iter().map(Position::key).collect();
        keys.sort();
        keys.dedup();
        if keys.len() != support.len() {
            return Err(Error::domain("mixed strategy support has repeated positions"));
        }
        Ok(MixedStrategy { support, weights })
    }

    /// All weight on one position.
    pub fn pure(pos: Position) -> Self {
        MixedStrategy { support: vec![pos], weights: vec![1.0] }
    }

    pub fn support(&self) -> &[Position] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_of(&self, pos: &Position) -> f64 {
        let key = pos.key();
        self.support.iter().position(|s| s.key() == key).map_or(0.0, |i| self.weights[i])
    }

    fn check(&self, game: &GameDefinition) -> Result<()> {
        self.support.iter().try_for_each(|p| game.check_position(p))
    }
}

/// `1 − (1−σ)ⁿ − σⁿ`, evaluated without cancellation at either end.
fn coverage_denominator(sigma: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    if sigma <= 0.5 {
        -(nf * (-sigma).ln_1p()).exp_m1() - sigma.powi(n as i32)
    } else {
        let delta = 1.0 - sigma;
        -(nf * (-delta).ln_1p()).exp_m1() - delta.powi(n as i32)
    }
}

/// `σ − σⁿ`.
fn g_numerator(sigma: f64, n: u32) -> f64 {
    if sigma <= 0.5 {
        sigma - sigma.powi(n as i32)
    } else {
        sigma * -((f64::from(n) - 1.0) * (-(1.0 - sigma)).ln_1p()).exp_m1()
    }
}

/// Utility of deviating to a pseudo-target of mass `p` when the others
/// play it with probability `sigma`, assuming no other event contributes.
pub fn g_lower(p: f64, sigma: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    if sigma <= 0.0 {
        return p;
    }
    p / (nf * sigma) * coverage_denominator(sigma, n) + sigma.powi(n as i32 - 1) / nf
}

/// `g` as the literal binomial sum `p·Σ_{k=0}^{n−2} B(k; n−1, σ)/(k+1) + σⁿ⁻¹/n`.
pub fn e1_direct_sum(p: f64, sigma: f64, n: u32) -> f64 {
    let m = u64::from(n - 1);
    let e1: f64 = (0..m).map(|k| binomial_pmf(k, m, sigma) / (k + 1) as f64).sum();
    p * e1 + sigma.powi(n as i32 - 1) / f64::from(n)
}

/// `G(σ)`, with the limits `1/n` at 0 and `1 − 1/n` at 1.
pub fn big_g(sigma: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    if sigma <= 0.0 {
        return 1.0 / nf;
    }
    if sigma >= 1.0 {
        return 1.0 - 1.0 / nf;
    }
    g_numerator(sigma, n) / coverage_denominator(sigma, n)
}

/// `Ḡ(σ) = G(σ) − (σ/n)/(1 − σⁿ − (1−σ)ⁿ)`.
pub fn gbar(sigma: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    if sigma <= 0.0 {
        return (1.0 - 1.0 / nf) / nf;
    }
    if sigma >= 1.0 {
        return f64::NEG_INFINITY;
    }
    (g_numerator(sigma, n) - sigma / nf) / coverage_denominator(sigma, n)
}

/// Invert the increasing map `G` on `[1/n, 1 − 1/n]` by bisection.
pub fn big_g_inverse(p: f64, n: u32, tol: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain("G is defined for n >= 2"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance {tol} must be positive")));
    }
    let lo = 1.0 / f64::from(n);
    let hi = 1.0 - lo;
    if !(p >= lo - DEFAULT_TOL && p <= hi + DEFAULT_TOL) {
        return Err(Error::OutOfRange { p, lo, hi });
    }
    if n == 2 || p == 0.5 {
        // G is constant at 1/2 for n = 2, and G(1/2) = 1/2 for every n
        return Ok(0.5);
    }
    if p <= lo {
        return Ok(0.0);
    }
    if p >= hi {
        return Ok(1.0);
    }
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (a + b);
        if b - a <= tol {
            return Ok(mid);
        }
        if big_g(mid, n) < p {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Equilibrium weight on the pseudo-target of mass `p` in a game with two
/// pseudo-targets and no third-party wins.
pub fn solve_two_point(p: f64, n: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p = {p} is not a probability")));
    }
    if n < 2 {
        return Err(Error::domain("the two-point solution needs n >= 2"));
    }
    let lo = 1.0 / f64::from(n);
    if p < lo {
        Ok(0.0)
    } else if p > 1.0 - lo {
        Ok(1.0)
    } else {
        big_g_inverse(p, n, DEFAULT_TOL)
    }
}

struct Contest {
    own: Vec<f64>,
    rows: Vec<Vec<f64>>,
    masses: Vec<f64>,
    tol: f64,
}

impl Contest {
    fn new(game: &GameDefinition, x: &Position, support: &[Position]) -> Self {
        Contest {
            own: game.distance_row(x),
            rows: support.iter().map(|s| game.distance_row(s)).collect(),
            masses: game.masses(),
            tol: game.tie_tolerance(),
        }
    }

    /// Number of winners at target `t` including the player at `x`, or 0
    /// if that player does not win.
    fn winners(&self, counts: &[usize], t: usize) -> usize {
        let mut best = self.own[t];
        for (j, row) in self.rows.iter().enumerate() {
            if counts[j] > 0 && row[t] < best {
                best = row[t];
            }
        }
        if self.own[t] > best + self.tol {
            return 0;
        }
        1 + self.rows.iter().zip(counts).filter(|(row, _)| row[t] <= best + self.tol).map(|(_, &k)| k).sum::<usize>()
    }

    fn share(&self, counts: &[usize]) -> f64 {
        let mut total = 0.0;
        for (t, &m) in self.masses.iter().enumerate() {
            if m > 0.0 {
                let w = self.winners(counts, t);
                if w > 0 {
                    total += m / w as f64;
                }
            }
        }
        total
    }
}

fn positive_part(sigma: &MixedStrategy) -> (Vec<Position>, Vec<f64>) {
    sigma
        .support
        .iter()
        .zip(&sigma.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(p, &w)| (p.clone(), w))
        .unzip()
}

/// Expected winner share of a player fixed at `x` while `n − 1` others
/// draw independently from `sigma`.
pub fn exact_symmetric_utility(game: &GameDefinition, x: &Position, sigma: &MixedStrategy, n: usize) -> Result<f64> {
    exact_symmetric_utility_with_budget(game, x, sigma, n, DEFAULT_BUDGET)
}

pub fn exact_symmetric_utility_with_budget(
    game: &GameDefinition,
    x: &Position,
    sigma: &MixedStrategy,
    n: usize,
    budget: u128,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    game.check_position(x)?;
    sigma.check(game)?;
    let (support, weights) = positive_part(sigma);
    let required = composition_count(n - 1, support.len());
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let contest = Contest::new(game, x, &support);
    Ok(Compositions::new(n - 1, support.len()).map(|k| multinomial_pmf(&k, &weights) * contest.share(&k)).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    /// `None` for exact values.
    pub stderr: Option<f64>,
    pub samples: u64,
}

impl Estimate {
    /// Half-width of the 95% normal interval; zero for exact values.
    pub fn half_width(&self) -> f64 {
        1.96 * self.stderr.unwrap_or(0.0)
    }
}

fn batches(samples: u64) -> Vec<(u64, u64)> {
    let b = BATCH as u64;
    (0..samples.div_ceil(b)).map(|i| (i, b.min(samples - i * b))).collect()
}

fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Monte Carlo estimate of [`exact_symmetric_utility`]: each sample draws a
/// target from the target masses and the others' positions from `sigma`.
///
/// Batches use disjoint streams of one seeded generator and reduce
/// integer tallies, so the result does not depend on the thread count.
pub fn mc_symmetric_utility(
    game: &GameDefinition,
    x: &Position,
    sigma: &MixedStrategy,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    if samples == 0 {
        return Err(Error::domain("samples must be at least 1"));
    }
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    game.check_position(x)?;
    sigma.check(game)?;
    let (support, weights) = positive_part(sigma);
    let contest = Contest::new(game, x, &support);
    let pick_target = WeightedIndex::new(&contest.masses).map_err(|e| Error::domain(e.to_string()))?;
    let pick_site = WeightedIndex::new(&weights).map_err(|e| Error::domain(e.to_string()))?;

    // tally[w] counts samples won together with w - 1 others
    let tally = batches(samples)
        .into_par_iter()
        .map(|(stream, size)| {
            let mut rng = seeded_stream(seed, stream);
            let mut tally = vec![0u64; n + 1];
            let mut counts = vec![0usize; support.len()];
            for _ in 0..size {
                counts.fill(0);
                let t = pick_target.sample(&mut rng);
                for _ in 1..n {
                    counts[pick_site.sample(&mut rng)] += 1;
                }
                tally[contest.winners(&counts, t)] += 1;
            }
            tally
        })
        .reduce(
            || vec![0u64; n + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let total = samples as f64;
    let mean: f64 = (1..=n).map(|w| tally[w] as f64 / total / w as f64).sum();
    let ss: f64 = (0..=n)
        .map(|w| {
            let v = if w == 0 { 0.0 } else { 1.0 / w as f64 };
            tally[w] as f64 * (v - mean) * (v - mean)
        })
        .sum();
    let stderr = if samples > 1 { (ss / (total - 1.0) / total).sqrt() } else { 0.0 };
    Ok(Estimate { estimate: mean, stderr: Some(stderr), samples })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMode {
    /// Inclusion–exclusion when there are at most twenty positions,
    /// Monte Carlo otherwise.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

/// Probability that `draws` independent draws from `sigma` hit every
/// position (including zero-weight ones, which makes it 0).
pub fn coverage_probability(sigma: &[f64], draws: usize, mode: CoverageMode) -> Result<Estimate> {
    coverage_probability_seeded(sigma, draws, mode, 200_000, DEFAULT_SEED)
}

pub fn coverage_probability_seeded(
    sigma: &[f64],
    draws: usize,
    mode: CoverageMode,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    let total: f64 = sigma.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!("coverage weights sum to {total}, expected 1")));
    }
    partial_coverage(sigma, draws, mode, samples, seed)
}

/// Coverage of the listed positions when `sigma` may leave some mass on
/// positions that need not be covered.
fn partial_coverage(sigma: &[f64], draws: usize, mode: CoverageMode, samples: u64, seed: u64) -> Result<Estimate> {
    if sigma.is_empty() {
        return Err(Error::domain("coverage of an empty position set"));
    }
    let total: f64 = sigma.iter().sum();
    if sigma.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || total > 1.0 + 1e-12 {
        return Err(Error::domain("coverage weights must be non-negative with total at most 1"));
    }
    let exact = match mode {
        CoverageMode::Exact => {
            if sigma.len() > 63 {
                return Err(Error::domain("inclusion–exclusion supports at most 63 positions"));
            }
            true
        }
        CoverageMode::Auto => sigma.len() <= EXACT_COVERAGE_LIMIT,
        CoverageMode::MonteCarlo => false,
    };
    if exact {
        return Ok(Estimate { estimate: coverage_exact(sigma, draws), stderr: None, samples: 0 });
    }
    if samples == 0 {
        return Err(Error::domain("samples must be at least 1"));
    }
    let mut weights = sigma.to_vec();
    weights.push((1.0 - total).max(0.0));
    let pick = WeightedIndex::new(&weights).map_err(|e| Error::domain(e.to_string()))?;
    let s = sigma.len();
    let hits: u64 = batches(samples)
        .into_par_iter()
        .map(|(stream, size)| {
            let mut rng = seeded_stream(seed, stream);
            let mut seen = vec![false; s];
            let mut hits = 0u64;
            for _ in 0..size {
                seen.fill(false);
                let mut left = s;
                for _ in 0..draws {
                    let j = pick.sample(&mut rng);
                    if j < s && !seen[j] {
                        seen[j] = true;
                        left -= 1;
                    }
                }
                hits += u64::from(left == 0);
            }
            hits
        })
        .sum();
    let q = hits as f64 / samples as f64;
    Ok(Estimate { estimate: q, stderr: Some((q * (1.0 - q) / samples as f64).sqrt()), samples })
}

/// `Σ_S (−1)^|S| (1 − σ(S))^draws` over subsets `S` of the positions.
fn coverage_exact(sigma: &[f64], draws: usize) -> f64 {
    let s = sigma.len();
    let mut total = 0.0;
    for mask in 0u64..(1u64 << s) {
        let missed: f64 = (0..s).filter(|&j| mask >> j & 1 == 1).map(|j| sigma[j]).sum();
        let term = (1.0 - missed).max(0.0).powi(draws as i32);
        if mask.count_ones() % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    total.clamp(0.0, 1.0)
}

/// Union-bound lower estimate `1 − Σ_x (1 − σ_x)^draws` of the coverage
/// probability.
pub fn coverage_union_bound(sigma: &[f64], draws: usize) -> f64 {
    1.0 - sigma.iter().map(|w| (1.0 - w).powi(draws as i32)).sum::<f64>()
}

/// `max{43, 8·(4/p0)·log(1/p0)}`.
pub fn mixed_threshold(p0: f64) -> f64 {
    f64::max(43.0, 8.0 * (4.0 / p0) * (1.0 / p0).ln())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixedRow {
    pub position: Position,
    pub p: f64,
    pub sigma: f64,
    pub deviation: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixedReport {
    pub n: usize,
    pub bound: f64,
    pub rows: Vec<MixedRow>,
    /// Every support point with positive weight is a pseudo-target.
    pub extreme: bool,
    pub threshold: f64,
    pub clears_threshold: bool,
    /// Probability that the `n` players jointly cover X*.
    pub coverage: Estimate,
    pub coverage_interval: (f64, f64),
}

impl MixedReport {
    pub fn bounds_hold(&self) -> bool {
        self.rows.iter().all(|r| r.lower_ok && r.upper_ok)
    }
}

/// Compare `sigma` with the projected distribution: `p_x − 1/n ≤ σ_x ≤
/// p_x + 1/n` per pseudo-target, extremeness and the size threshold.
pub fn check_mixed_bounds(ps: &PseudoSpace, sigma: &MixedStrategy, n: usize) -> Result<MixedReport> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let bound = 1.0 / n as f64;
    let slack = 1e-12;
    let rows: Vec<MixedRow> = ps
        .pseudo_targets
        .iter()
        .zip(&ps.p)
        .map(|(x, &p)| {
            let s = sigma.weight_of(x);
            MixedRow {
                position: x.clone(),
                p,
                sigma: s,
                deviation: (s - p).abs(),
                lower_ok: s >= p - bound - slack,
                upper_ok: s <= p + bound + slack,
            }
        })
        .collect();
    let extreme = sigma
        .support
        .iter()
        .zip(&sigma.weights)
        .all(|(x, &w)| w == 0.0 || ps.index_of(x).is_some());
    let on_xstar: Vec<f64> = rows.iter().map(|r| r.sigma).collect();
    let coverage = partial_coverage(&on_xstar, n, CoverageMode::Auto, 200_000, DEFAULT_SEED)?;
    let hw = coverage.half_width();
    let threshold = mixed_threshold(ps.p0);
    Ok(MixedReport {
        n,
        bound,
        rows,
        extreme,
        threshold,
        clears_threshold: n as f64 > threshold,
        coverage_interval: ((coverage.estimate - hw).max(0.0), (coverage.estimate + hw).min(1.0)),
        coverage,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: u32,
    pub p: f64,
    pub sigma: f64,
}

/// The two-point equilibrium weight on a uniform grid of `p ∈ [0, 1]`.
pub fn fig6_curve(n_values: &[u32], grid_size: usize) -> Result<Vec<CurveRow>> {
    if grid_size < 2 {
        return Err(Error::domain("grid size must be at least 2"));
    }
    let mut ns = n_values.to_vec();
    ns.sort_unstable();
    let mut rows = Vec::with_capacity(ns.len() * grid_size);
    for n in ns {
        for i in 0..grid_size {
            let p = i as f64 / (grid_size - 1) as f64;
            rows.push(CurveRow { n, p, sigma: solve_two_point(p, n)? });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_lower_endpoints() {
        assert_eq!(g_lower(0.4, 0.0, 7), 0.4);
        assert!((g_lower(0.4, 1.0, 7) - 1.0 / 7.0).abs() < 1e-15);
        assert!((e1_direct_sum(1.0, 0.5, 2) - 0.75).abs() < 1e-15);
        assert!((e1_direct_sum(0.3, 1.0, 6) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn g_lower_matches_sum() {
        let sum = 0.5 * (0..=8u64).map(|k| binomial_pmf(k, 9, 0.5) / (k + 1) as f64).sum::<f64>() + 0.5f64.powi(9) / 10.0;
        assert!((g_lower(0.5, 0.5, 10) - sum).abs() < 1e-15);
    }

    #[test]
    fn big_g_values() {
        for n in 2..=50 {
            assert!((big_g(0.5, n) - 0.5).abs() < 1e-12);
        }
        assert!((big_g(0.9, 3) - 0.171 / 0.27).abs() < 1e-12);
        assert!((big_g(1e-9, 10) - 0.1).abs() < 1e-8);
    }

    #[test]
    fn gbar_value() {
        let s = 2f64.powi(-10);
        let want = (0.5 - s - 0.05) / (1.0 - 2.0 * s);
        assert!((gbar(0.5, 10) - want).abs() < 1e-14);
    }

    #[test]
    fn inverse_examples() {
        assert!((big_g_inverse(0.5, 10, 1e-12).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(big_g_inverse(0.1, 10, 1e-12).unwrap(), 0.0);
        assert!(matches!(big_g_inverse(0.05, 10, 1e-12), Err(Error::OutOfRange { .. })));
        for s in [0.05, 0.3, 0.77, 0.99] {
            let back = big_g_inverse(big_g(s, 12), 12, 1e-12).unwrap();
            assert!((back - s).abs() <= 2e-12, "{s} -> {back}");
        }
    }

    #[test]
    fn two_point_clamps() {
        assert_eq!(solve_two_point(0.99, 10).unwrap(), 1.0);
        assert_eq!(solve_two_point(0.05, 10).unwrap(), 0.0);
        assert!((solve_two_point(0.5, 9).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coverage_examples() {
        let c = coverage_probability(&[0.5, 0.5], 2, CoverageMode::Exact).unwrap();
        assert!((c.estimate - 0.5).abs() < 1e-15);
        let c = coverage_probability(&[0.5, 0.5], 60, CoverageMode::Exact).unwrap();
        assert!(c.estimate >= 1.0 - 1.0 / 3600.0);
        let mc = coverage_probability_seeded(&[0.5, 0.5], 2, CoverageMode::MonteCarlo, 40_000, 7).unwrap();
        assert!((mc.estimate - 0.5).abs() < 4.0 * mc.stderr.unwrap());
    }

    #[test]
    fn threshold_value() {
        assert!((mixed_threshold(0.5) - 64.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(mixed_threshold(0.9), 43.0);
        assert!((mixed_threshold(0.1) - 320.0 * 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn curve_shape() {
        let rows = fig6_curve(&[10, 5], 11).unwrap();
        assert_eq!(rows.len(), 22);
        assert_eq!(rows[0].n, 5);
        assert_eq!(rows[1].sigma, 0.0);
        assert_eq!(rows[10].sigma, 1.0);
    }
}
