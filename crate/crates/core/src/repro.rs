//! End-to-end reproduction scenarios, one per quantitative claim.
//!
//! Each scenario is deterministic: random instances come from
//! [`CLAIM_SEED`] (and [`SECOND_SEED`] where a re-run is required).

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::combinatorics::composition_count;
use crate::error::Result;
use crate::game::{pure_utilities, GameDefinition, Metric, Position, PureProfile, Target};
use crate::instances::{build, deviation_grid, random_finite, InstanceSpec};
use crate::mixed::{
    big_g, big_g_inverse, coverage_probability, coverage_union_bound, e1_direct_sum, exact_symmetric_utility,
    fig6_curve, g_lower, mc_symmetric_utility, solve_two_point, CoverageMode, MixedStrategy, DEFAULT_TOL,
};
use crate::projection::{project, PseudoSpace};
use crate::pure::{
    check_pure_theorems, dynamics, empirical_distribution, enumerate_pure_equilibria, generate_pure, kl_divergence,
    verify_pure, CountVector, MoveRule,
};

pub const CLAIM_SEED: u64 = 20_240_601;
pub const SECOND_SEED: u64 = 977;

pub const CLAIMS: &[(u32, &str)] = &[
    (1, "generator soundness"),
    (2, "KL convergence rate"),
    (3, "three-node non-existence"),
    (4, "forecasting non-existence"),
    (5, "non-extreme equilibrium"),
    (6, "G identities"),
    (7, "closed form matches binomial sum"),
    (8, "two-point indifference"),
    (9, "symmetric payoff law"),
    (10, "Monte Carlo consistency"),
    (11, "coverage bound"),
    (12, "sigma-versus-p curves"),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClaimOutcome {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl ClaimOutcome {
    /// One-line summary, `PASS`/`FAIL` first.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{verdict} criterion {:>2} {} ({:.2}s): {}", self.id, self.title, self.seconds, self.detail)
    }
}

/// Run scenario `id` (1 to 12).
pub fn run_claim(id: u32) -> Option<ClaimOutcome> {
    let title = CLAIMS.iter().find(|(i, _)| *i == id)?.1;
    let start = Instant::now();
    let result = match id {
        1 => claim_generator(),
        2 => claim_kl(),
        3 => claim_three_node(),
        4 => claim_forecasting(),
        5 => claim_non_extreme(),
        6 => claim_g_identities(),
        7 => claim_closed_form(),
        8 => claim_two_point(),
        9 => claim_payoff_law(),
        10 => claim_monte_carlo(),
        11 => claim_coverage(),
        12 => claim_curve(),
        _ => return None,
    };
    let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    Some(ClaimOutcome { id, title: title.into(), passed, detail, seconds: start.elapsed().as_secs_f64() })
}

pub fn run_all() -> Vec<ClaimOutcome> {
    CLAIMS.iter().filter_map(|(id, _)| run_claim(*id)).collect()
}

type Verdict = Result<(bool, String)>;

/// The 200 seeded `(game, X*, n)` triples shared by the first two claims.
pub fn generator_instances() -> Vec<(GameDefinition, PseudoSpace, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(CLAIM_SEED);
    (0..200)
        .map(|i| {
            let game = random_finite(&mut rng, 2 + i % 5);
            let ps = project(&game).expect("random games satisfy the projection condition");
            let n = ps.min_players() + rng.random_range(0..=20);
            (game, ps, n)
        })
        .collect()
}

fn claim_generator() -> Verdict {
    let mut failures = Vec::new();
    let instances = generator_instances();
    for (i, (game, ps, n)) in instances.iter().enumerate() {
        let k = generate_pure(ps, *n)?;
        let profile = k.profile(ps);
        let on_xstar = verify_pure(game, &profile, &ps.pseudo_targets)?;
        let everywhere = verify_pure(game, &profile, &game.candidates())?;
        if !on_xstar.is_equilibrium || !everywhere.is_equilibrium || k.min_count() < 2 || k.n() != *n {
            failures.push(format!("#{i} counts {:?}", k.0));
        }
    }
    Ok((
        failures.is_empty(),
        format!("{} instances, {} failures {}", instances.len(), failures.len(), failures.join("; ")),
    ))
}

/// `c = 1/n` and `c` just below `p0/2`, when they satisfy `n ≥ 1/c > 2/p0`.
pub fn valid_rates(ps: &PseudoSpace, n: usize) -> Vec<f64> {
    [1.0 / n as f64, ps.p0 / 2.0 * (1.0 - 1e-9)]
        .into_iter()
        .filter(|&c| n as f64 >= 1.0 / c && 1.0 / c > 2.0 / ps.p0)
        .collect()
}

fn claim_kl() -> Verdict {
    let mut checked = 0usize;
    let mut equilibria = 0usize;
    let mut failures = Vec::new();
    for (i, (game, ps, n)) in generator_instances().iter().enumerate() {
        let eq = enumerate_pure_equilibria(ps, game, *n)?;
        equilibria += eq.len();
        if !eq.contains(&generate_pure(ps, *n)?) {
            failures.push(format!("#{i} enumeration misses the generated profile"));
        }
        for k in &eq {
            for c in valid_rates(ps, *n) {
                checked += 1;
                let r = check_pure_theorems(ps, k, *n, c)?;
                if !r.all_pass() {
                    failures.push(format!("#{i} {:?} c={c}: kl {} bound {}", k.0, r.kl, r.kl_bound));
                }
            }
        }
    }
    let game = GameDefinition::separated(&[0.3, 0.7])?;
    let ps = project(&game)?;
    let concrete = check_pure_theorems(&ps, &CountVector(vec![2, 5]), 7, 1.0 / 7.0)?;
    let kl = kl_divergence(&empirical_distribution(&CountVector(vec![2, 5]))?, &[0.3, 0.7])?;
    let concrete_ok = concrete.all_pass() && (kl - 4.9e-4).abs() < 0.05e-4 && kl <= 2f64.ln();
    if !concrete_ok {
        failures.push(format!("P=(0.3,0.7), n=7: kl {kl}"));
    }
    Ok((
        failures.is_empty(),
        format!(
            "{equilibria} equilibria, {checked} (equilibrium, c) checks, concrete kl {kl:.3e} <= ln 2; {} failures {}",
            failures.len(),
            failures.join("; ")
        ),
    ))
}

/// Start counts and the deviation drawn for each of the four profiles.
pub const THREE_NODE_ARROWS: [([usize; 3], usize, usize); 4] =
    [([1, 1, 5], 0, 1), ([1, 2, 4], 1, 2), ([2, 1, 4], 0, 1), ([2, 2, 3], 0, 2)];

fn claim_three_node() -> Verdict {
    let game = build(&InstanceSpec::ThreeNode { epsilon: 0.5, n: 7 })?;
    let ps = project(&game)?;
    let sites = game.sites().unwrap_or_default();
    let total = composition_count(7, 3);
    let eq = enumerate_pure_equilibria(&ps, &game, 7)?;
    let mut ok = eq.is_empty() && total == 36;
    let mut notes = vec![format!("{} of {total} count vectors are equilibria", eq.len())];
    for (counts, from, to) in THREE_NODE_ARROWS {
        let start = PureProfile::from_counts(&sites, &counts);
        let best = dynamics(&game, &start, 50, &sites, MoveRule::BestResponse)?;
        let first = dynamics(&game, &start, 1, &sites, MoveRule::FirstImprovement)?;
        let Some(step) = best.steps.first() else {
            ok = false;
            notes.push(format!("{counts:?} is a fixed point"));
            continue;
        };
        let listed = step.improving.iter().any(|d| d.from == sites[from] && d.to == sites[to]);
        let exact = first.steps.first().is_some_and(|s| s.mover.from == sites[from] && s.mover.to == sites[to]);
        ok &= listed && exact && !matches!(best.outcome, crate::pure::DynamicsOutcome::FixedPoint);
        notes.push(format!(
            "{counts:?}: x{}->x{} {} (best response x{}->x{})",
            from + 1,
            to + 1,
            if listed && exact { "found" } else { "MISSING" },
            site_index(&step.mover.from) + 1,
            site_index(&step.mover.to) + 1,
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn site_index(p: &Position) -> usize {
    match p {
        Position::Site(i) => *i,
        Position::Point(_) => 0,
    }
}

fn claim_forecasting() -> Verdict {
    let game = build(&InstanceSpec::ForecastingM2 { epsilon1: 0.9, epsilon2: 0.4, n: 8, grid: None })?;
    let ps = project(&game)?;
    let eq = enumerate_pure_equilibria(&ps, &game, 8)?;
    let total = composition_count(8, ps.len());
    Ok((eq.is_empty() && total == 165, format!("{} of {total} count vectors are equilibria", eq.len())))
}

fn claim_non_extreme() -> Verdict {
    let game = build(&InstanceSpec::NonExtremePair { grid: None })?;
    let profile = PureProfile::new(vec![Position::point([0.5]); 2]);
    let grid = deviation_grid(&game, 1001)?;
    let report = verify_pure(&game, &profile, &grid)?;
    let u = pure_utilities(&game, &profile)?;
    let ok = report.is_equilibrium && u.0 == [0.5, 0.5] && report.extreme == Some(false) && report.covers == Some(false);
    Ok((ok, format!("{} candidates, equilibrium {}, utilities {:?}", grid.len(), report.is_equilibrium, u.0)))
}

fn claim_g_identities() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    let worst_half = (2..=50).map(|n| (big_g(0.5, n) - 0.5).abs()).fold(0.0, f64::max);
    ok &= worst_half <= 1e-12;
    notes.push(format!("max |G(1/2) - 1/2| = {worst_half:.1e}"));

    let grid: Vec<f64> = (1..10_000).map(|i| i as f64 / 10_000.0).collect();
    let monotone = (3..=50).all(|n| grid.windows(2).all(|w| big_g(w[1], n) > big_g(w[0], n)));
    let flat = grid.iter().all(|&s| (big_g(s, 2) - 0.5).abs() <= 1e-12);
    ok &= monotone && flat;
    notes.push(format!("strictly increasing for n=3..50: {monotone}, constant for n=2: {flat}"));

    for n in [5u32, 10, 20, 50] {
        let lo = 1.0 / f64::from(n);
        let hi = 1.0 - lo;
        let mut worst = (0.0, lo);
        for i in 0..1000 {
            let p = if i == 999 { hi } else { lo + (hi - lo) * i as f64 / 999.0 };
            let d = (big_g_inverse(p, n, DEFAULT_TOL)? - p).abs();
            if d > worst.0 {
                worst = (d, p);
            }
        }
        let at_lo = (big_g_inverse(lo, n, DEFAULT_TOL)? - lo).abs();
        let good = (worst.0 - lo).abs() <= 1e-6 && (at_lo - lo).abs() <= 1e-6;
        ok &= good;
        notes.push(format!("n={n}: sup {:.9} (1/n = {lo}) at p = {:.4}", worst.0, worst.1));
    }
    Ok((ok, notes.join("; ")))
}

fn claim_closed_form() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in 2..=30 {
        for pi in 0..=10 {
            for si in 1..=99 {
                let (p, s) = (pi as f64 / 10.0, si as f64 / 100.0);
                worst = worst.max((g_lower(p, s, n) - e1_direct_sum(p, s, n)).abs());
            }
        }
    }
    Ok((worst <= 1e-12, format!("max |g - sum| = {worst:.2e} over 31,977 grid points")))
}

/// One binary event: targets at 0 and 1 with masses `1 − p` and `p`.
pub fn two_point_game(p: f64) -> Result<GameDefinition> {
    build(&InstanceSpec::Forecasting { m: 1, q: vec![1.0 - p, p], grid: Some(2) })
}

fn claim_two_point() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut bound_ok = true;
    for n in [5usize, 8, 10, 14] {
        let nf = n as f64;
        for p in [0.2, 0.35, 0.5, 0.65, 0.8] {
            if !(p > 1.0 / nf && p < 1.0 - 1.0 / nf) {
                continue;
            }
            cases += 1;
            let game = two_point_game(p)?;
            let s = solve_two_point(p, n as u32)?;
            let one = Position::point([1.0]);
            let zero = Position::point([0.0]);
            let sigma = MixedStrategy::new(vec![one.clone(), zero.clone()], vec![s, 1.0 - s])?;
            for x in [&one, &zero] {
                let u = exact_symmetric_utility(&game, x, &sigma, n)?;
                worst = worst.max((u - 1.0 / nf).abs());
            }
            bound_ok &= (s - p).abs() <= 1.0 / nf;
        }
    }
    Ok((worst <= 1e-9 && bound_ok, format!("{cases} cases, max |u - 1/n| = {worst:.2e}, |sigma - p| <= 1/n: {bound_ok}")))
}

/// A random game together with a random symmetric strategy on at most
/// four positions and a player count in `2..=max_n`.
pub fn random_mixed_case<R: Rng + ?Sized>(rng: &mut R, max_n: usize) -> (GameDefinition, MixedStrategy, usize) {
    let n = rng.random_range(2..=max_n);
    let (game, positions) = if rng.random_bool(0.5) {
        let s = rng.random_range(2..=5);
        let game = random_finite(rng, s);
        let sites = game.sites().unwrap_or_default();
        (game, sites)
    } else {
        // targets and candidate positions on a coarse lattice, so that
        // exact distance ties occur
        let t = rng.random_range(1..=4);
        let raw: Vec<f64> = (0..t).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let targets = raw.iter().enumerate().map(|(i, w)| Target::new(format!("y{i}"), w / total)).collect();
        let points = (0..t).map(|_| vec![rng.random_range(0..=8) as f64 / 8.0]).collect();
        let game = GameDefinition::geometric(targets, points, Metric::Euclidean, 0.0, 1.0, 9).expect("valid");
        let sites = crate::game::lattice(1, 0.0, 1.0, 9);
        (game, sites)
    };
    let k = rng.random_range(1..=positions.len().min(4));
    let chosen = sample(rng, positions.len(), k).into_vec();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[..k - 1].iter().sum();
    weights[k - 1] = 1.0 - head;
    let support = chosen.iter().map(|&i| positions[i].clone()).collect();
    let sigma = MixedStrategy::new(support, weights).expect("weights sum to one");
    (game, sigma, n)
}

fn claim_payoff_law() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(CLAIM_SEED ^ 9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (game, sigma, n) = random_mixed_case(&mut rng, 10);
        let mut avg = 0.0;
        for (x, w) in sigma.support().iter().zip(sigma.weights()) {
            avg += w * exact_symmetric_utility(&game, x, &sigma, n)?;
        }
        worst = worst.max((avg - 1.0 / n as f64).abs());
    }
    Ok((worst <= 1e-10, format!("100 games, max |E_sigma u - 1/n| = {worst:.2e}")))
}

/// Count how many of 50 seeded cases fall outside three standard errors.
pub fn monte_carlo_misses(instance_seed: u64, sample_seed: u64, samples: u64) -> Result<(usize, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
    let mut misses = Vec::new();
    for i in 0..50 {
        let (game, sigma, n) = random_mixed_case(&mut rng, 8);
        let x = if rng.random_bool(0.5) {
            sigma.support()[rng.random_range(0..sigma.support().len())].clone()
        } else {
            let c = game.candidates();
            c[rng.random_range(0..c.len())].clone()
        };
        let exact = exact_symmetric_utility(&game, &x, &sigma, n)?;
        let mc = mc_symmetric_utility(&game, &x, &sigma, n, samples, sample_seed.wrapping_add(i))?;
        // a sample in which every draw agrees reports a zero standard
        // error; floor it at the resolution 1/samples
        let se = mc.stderr.unwrap_or(0.0).max(1.0 / samples as f64);
        let diff = (mc.estimate - exact).abs();
        if diff > 3.0 * se {
            misses.push(format!("#{i}: exact {exact:.5} mc {:.5} se {se:.1e}", mc.estimate));
        }
    }
    Ok((misses.len(), misses))
}

fn claim_monte_carlo() -> Verdict {
    let (a, first) = monte_carlo_misses(CLAIM_SEED ^ 10, CLAIM_SEED, 20_000)?;
    let (b, second) = monte_carlo_misses(CLAIM_SEED ^ 10, SECOND_SEED, 20_000)?;
    Ok((
        a <= 2 && b <= 2,
        format!("misses {a}/50 and {b}/50 with two sample seeds {}", first.iter().chain(&second).cloned().collect::<Vec<_>>().join("; ")),
    ))
}

/// Weight vectors on 2 to 4 positions from a coarse grid.
pub fn coverage_grid() -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for a in 1..20 {
        let a = a as f64 / 20.0;
        out.push(vec![a, 1.0 - a]);
        for b in 1..20 {
            let b = b as f64 / 20.0;
            if a + b < 1.0 - 1e-9 {
                out.push(vec![a, b, 1.0 - a - b]);
                let c = (1.0 - a - b) / 2.0;
                out.push(vec![a, b, c, 1.0 - a - b - c]);
            }
        }
    }
    out
}

fn claim_coverage() -> Verdict {
    let mut violations = 0;
    let mut checked = 0;
    for sigma in coverage_grid() {
        for n in 2..=40 {
            checked += 1;
            let exact = coverage_probability(&sigma, n - 1, CoverageMode::Exact)?.estimate;
            if exact < coverage_union_bound(&sigma, n - 1) - 1e-12 {
                violations += 1;
            }
        }
    }
    let c60 = coverage_probability(&[0.5, 0.5], 60, CoverageMode::Exact)?.estimate;
    let ok = violations == 0 && c60 >= 1.0 - 1.0 / 3600.0;
    Ok((ok, format!("{violations} violations in {checked} grid checks; coverage(1/2,1/2; n=60) = {c60}")))
}

/// Shape checks on a set of curve rows: monotone in `p`, clamped outside
/// `[1/n, 1 − 1/n]`, through `(1/2, 1/2)` and at most `1/n` from the
/// diagonal with equality attained.
pub fn check_curve(rows: &[crate::mixed::CurveRow]) -> (bool, String) {
    let mut ns: Vec<u32> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    let mut ok = !rows.is_empty();
    let mut notes = Vec::new();
    for n in ns {
        let curve: Vec<_> = rows.iter().filter(|r| r.n == n).collect();
        let inv = 1.0 / f64::from(n);
        let monotone = curve.windows(2).all(|w| w[1].p > w[0].p && w[1].sigma >= w[0].sigma);
        let clamped = curve.iter().all(|r| {
            (r.p >= inv || r.sigma == 0.0) && (r.p <= 1.0 - inv || r.sigma == 1.0)
        });
        let half = curve.iter().filter(|r| r.p == 0.5).all(|r| (r.sigma - 0.5).abs() <= 1e-9)
            && curve.iter().any(|r| r.p == 0.5);
        let sup = curve.iter().map(|r| (r.sigma - r.p).abs()).fold(0.0, f64::max);
        let tight = (sup - inv).abs() <= 1e-6;
        ok &= monotone && clamped && half && tight;
        notes.push(format!("n={n}: {} rows, max |sigma - p| = {sup:.9}", curve.len()));
        if !(monotone && clamped && half && tight) {
            notes.push(format!("monotone {monotone} clamped {clamped} half {half} tight {tight}"));
        }
    }
    (ok, notes.join("; "))
}

fn claim_curve() -> Verdict {
    let rows = fig6_curve(&[5, 10, 20, 50], 201)?;
    Ok(check_curve(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_claim() {
        assert!(run_claim(0).is_none());
        assert!(run_claim(13).is_none());
    }

    #[test]
    fn rates_respect_preconditions() {
        let game = GameDefinition::separated(&[0.3, 0.7]).unwrap();
        let ps = project(&game).unwrap();
        assert_eq!(valid_rates(&ps, 7).len(), 2);
        assert!(valid_rates(&ps, 6).is_empty());
    }
}
