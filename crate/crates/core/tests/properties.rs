use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use posopt_core::combinatorics::Compositions;
use posopt_core::game::{counts, pure_utilities, win_shares, GameDefinition, Position, PureProfile};
use posopt_core::instances::{build, random_finite, three_node_min_n, InstanceSpec};
use posopt_core::mixed::{
    big_g, big_g_inverse, coverage_probability, coverage_union_bound, e1_direct_sum, exact_symmetric_utility, g_lower,
    gbar, mc_symmetric_utility, solve_two_point, CoverageMode, MixedStrategy,
};
use posopt_core::projection::project;
use posopt_core::pure::{
    check_pure_theorems, enumerate_pure_equilibria, generate_pure, verify_pure, CountVector,
};
use posopt_core::repro::{random_mixed_case, two_point_game, valid_rates};
use posopt_core::{format, instances};

fn game_and_profile() -> impl Strategy<Value = (GameDefinition, PureProfile)> {
    (any::<u64>(), 2usize..=6, 1usize..=12).prop_map(|(seed, s, n)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_finite(&mut rng, s);
        let positions = (0..n).map(|_| Position::Site(rand::Rng::random_range(&mut rng, 0..s))).collect();
        (game, PureProfile::new(positions))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn utilities_sum_to_one((game, profile) in game_and_profile()) {
        let u = pure_utilities(&game, &profile).unwrap();
        prop_assert!((u.sum() - 1.0).abs() <= 1e-12);
        let n = profile.len() as f64;
        prop_assert!(u.min() <= 1.0 / n + 1e-15 && 1.0 / n <= u.max() + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn win_shares_partition_each_target((game, profile) in game_and_profile()) {
        for t in game.targets() {
            let w = win_shares(&game, &profile, &t.id).unwrap();
            prop_assert!(!w.winners.is_empty());
            let shares = w.shares();
            let each = 1.0 / w.winners.len() as f64;
            prop_assert!(w.winners.iter().all(|&i| shares[i] == each));
            prop_assert_eq!(shares.iter().filter(|&&x| x > 0.0).count(), w.winners.len());
            prop_assert!((shares.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn utilities_permute_with_players((game, profile) in game_and_profile(), shift in 0usize..12) {
        let n = profile.len();
        let rotated = PureProfile::new((0..n).map(|i| profile.positions()[(i + shift) % n].clone()).collect());
        let u = pure_utilities(&game, &profile).unwrap().0;
        let v = pure_utilities(&game, &rotated).unwrap().0;
        for i in 0..n {
            prop_assert_eq!(v[i], u[(i + shift) % n]);
        }
    }

    #[test]
    fn counts_agree_with_recount((_, profile) in game_and_profile()) {
        let c = counts(&profile);
        prop_assert_eq!(c.total(), profile.len());
        for (pos, k) in c.iter() {
            prop_assert_eq!(*k, profile.positions().iter().filter(|p| *p == pos).count());
        }
    }

    #[test]
    fn covering_profiles_pay_mass_over_count(seed in any::<u64>(), s in 2usize..=6, extra in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_finite(&mut rng, s);
        let ps = project(&game).unwrap();
        let mut k = vec![1usize; s];
        for _ in 0..extra {
            k[rand::Rng::random_range(&mut rng, 0..s)] += 1;
        }
        let profile = PureProfile::from_counts(&ps.pseudo_targets, &k);
        let u = pure_utilities(&game, &profile).unwrap().0;
        let mut i = 0;
        for (x, &kx) in k.iter().enumerate() {
            for _ in 0..kx {
                prop_assert!((u[i] - ps.p[x] / kx as f64).abs() <= 1e-15);
                i += 1;
            }
        }
    }

    #[test]
    fn projection_is_a_distribution(seed in any::<u64>(), s in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_finite(&mut rng, s);
        let ps = project(&game).unwrap();
        prop_assert!((ps.p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(ps.p.iter().all(|&p| p > 0.0));
        prop_assert_eq!(ps.p0, ps.p.iter().copied().fold(f64::INFINITY, f64::min));
        prop_assert!(ps.target_map.values().all(|&j| j < ps.len()));
    }

    #[test]
    fn reprojection_is_idempotent(seed in any::<u64>(), s in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_finite(&mut rng, s);
        let ps = project(&game).unwrap();
        let restricted = game.restricted(&ps.pseudo_targets).unwrap();
        let again = project(&restricted).unwrap();
        prop_assert_eq!(&again.p, &ps.p);
        prop_assert_eq!(&again.target_map, &ps.target_map);
        let labels: Vec<String> = ps.pseudo_targets.iter().map(|x| game.label(x)).collect();
        let labels_again: Vec<String> = again.pseudo_targets.iter().map(|x| restricted.label(x)).collect();
        prop_assert_eq!(labels, labels_again);
    }

    #[test]
    fn forecasting_projection_equals_q(raw in prop::collection::vec(0.05f64..1.0, 4)) {
        let total: f64 = raw.iter().sum();
        let mut q: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let head: f64 = q[..3].iter().sum();
        q[3] = 1.0 - head;
        let game = build(&InstanceSpec::Forecasting { m: 2, q: q.clone(), grid: Some(3) }).unwrap();
        let ps = project(&game).unwrap();
        prop_assert_eq!(ps.p, q);
    }

    #[test]
    fn generated_profiles_are_equilibria(seed in any::<u64>(), s in 2usize..=6, extra in 0usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_finite(&mut rng, s);
        let ps = project(&game).unwrap();
        let n = ps.min_players() + extra;
        let k = generate_pure(&ps, n).unwrap();
        prop_assert_eq!(k.n(), n);
        prop_assert!(k.min_count() >= 2);
        let report = verify_pure(&game, &k.profile(&ps), &game.candidates()).unwrap();
        prop_assert!(report.is_equilibrium, "{:?}", report.witness);
    }

    #[test]
    fn generated_geometric_profiles_survive_the_grid(raw in prop::collection::vec(0.2f64..1.0, 4)) {
        let total: f64 = raw.iter().sum();
        let mut q: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let head: f64 = q[..3].iter().sum();
        q[3] = 1.0 - head;
        let game = build(&InstanceSpec::Forecasting { m: 2, q, grid: Some(21) }).unwrap();
        let ps = project(&game).unwrap();
        let k = generate_pure(&ps, ps.min_players()).unwrap();
        let grid = instances::deviation_grid(&game, 21).unwrap();
        prop_assert!(verify_pure(&game, &k.profile(&ps), &grid).unwrap().is_equilibrium);
    }

    #[test]
    fn format_round_trips(seed in any::<u64>(), s in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_finite(&mut rng, s);
        let text = serde_json::to_string(&format::game_to_json(&game)).unwrap();
        prop_assert_eq!(format::parse_game(&text).unwrap(), game);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn enumeration_contains_generator_and_rates_hold(seed in any::<u64>(), s in 2usize..=4, extra in 0usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_finite(&mut rng, s);
        let ps = project(&game).unwrap();
        let n = ps.min_players() + extra;
        let eq = enumerate_pure_equilibria(&ps, &game, n).unwrap();
        prop_assert!(eq.contains(&generate_pure(&ps, n).unwrap()));
        for k in &eq {
            let report = verify_pure(&game, &k.profile(&ps), &ps.pseudo_targets).unwrap();
            prop_assert!(report.is_equilibrium);
            for c in valid_rates(&ps, n) {
                let r = check_pure_theorems(&ps, k, n, c).unwrap();
                prop_assert!(r.all_pass(), "{:?}", r);
            }
        }
    }

    #[test]
    fn symmetric_strategies_pay_one_over_n(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (game, sigma, n) = random_mixed_case(&mut rng, 10);
        let avg: f64 = sigma
            .support()
            .iter()
            .zip(sigma.weights())
            .map(|(x, w)| w * exact_symmetric_utility(&game, x, &sigma, n).unwrap())
            .sum();
        prop_assert!((avg - 1.0 / n as f64).abs() <= 1e-10);
    }
}

#[test]
fn three_node_instances_have_no_pure_equilibria() {
    for eps in [0.1, 0.25, 0.5] {
        let n = three_node_min_n(eps);
        let game = build(&InstanceSpec::ThreeNode { epsilon: eps, n }).unwrap();
        let ps = project(&game).unwrap();
        assert!(enumerate_pure_equilibria(&ps, &game, n).unwrap().is_empty(), "eps {eps}, n {n}");
    }
}

#[test]
fn closed_form_matches_sum_on_grid() {
    for n in 2..=30 {
        for pi in 0..=10 {
            for si in 1..=99 {
                let (p, s) = (pi as f64 / 10.0, si as f64 / 100.0);
                assert!((g_lower(p, s, n) - e1_direct_sum(p, s, n)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn g_is_increasing_and_odd() {
    let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    for n in 3..=50 {
        assert!(grid.windows(2).all(|w| big_g(w[1], n) > big_g(w[0], n)), "n = {n}");
    }
    for n in 2..=50 {
        for &s in &grid {
            assert!((big_g(s, n) + big_g(1.0 - s, n) - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn inverse_undoes_g() {
    let tol = 1e-12;
    for n in [3u32, 5, 10, 20, 50] {
        for i in 1..200 {
            let s = i as f64 / 200.0;
            let back = big_g_inverse(big_g(s, n), n, tol).unwrap();
            assert!((back - s).abs() <= 2.0 * tol, "n={n} s={s} back={back}");
        }
    }
}

#[test]
fn inverse_stays_within_one_over_n() {
    for n in [5u32, 10, 20, 50] {
        let lo = 1.0 / f64::from(n);
        let sup = (0..=2000)
            .map(|i| lo + (1.0 - 2.0 * lo) * i as f64 / 2000.0)
            .map(|p| (big_g_inverse(p, n, 1e-12).unwrap() - p).abs())
            .fold(0.0, f64::max);
        assert!((sup - lo).abs() <= 1e-6);
    }
}

#[test]
fn gbar_identity_and_monotonicity() {
    for n in [13u32, 20] {
        for i in 1..1000 {
            let s = i as f64 / 1000.0;
            let den = 1.0 - s.powi(n as i32) - (1.0 - s).powi(n as i32);
            assert!((gbar(s, n) - (big_g(s, n) - s / f64::from(n) / den)).abs() <= 1e-12);
        }
    }
    let top = 1.0 - 1.0 / 13f64.sqrt() + 1.0 / 13.0;
    let grid: Vec<f64> = (1..1000).map(|i| top * i as f64 / 1000.0).collect();
    assert!(grid.windows(2).all(|w| gbar(w[1], 13) > gbar(w[0], 13)));
}

#[test]
fn two_point_indifference() {
    for n in [5usize, 8, 10, 14] {
        for p in [0.2, 0.35, 0.5, 0.65, 0.8] {
            if !(p > 1.0 / n as f64 && p < 1.0 - 1.0 / n as f64) {
                continue;
            }
            let game = two_point_game(p).unwrap();
            let s = solve_two_point(p, n as u32).unwrap();
            let sigma =
                MixedStrategy::new(vec![Position::point([1.0]), Position::point([0.0])], vec![s, 1.0 - s]).unwrap();
            for x in sigma.support() {
                let u = exact_symmetric_utility(&game, x, &sigma, n).unwrap();
                assert!((u - 1.0 / n as f64).abs() <= 1e-9, "n={n} p={p} u={u}");
            }
        }
    }
}

#[test]
fn coverage_dominates_union_bound() {
    for sigma in posopt_core::repro::coverage_grid() {
        for n in 2..=40 {
            let exact = coverage_probability(&sigma, n - 1, CoverageMode::Exact).unwrap().estimate;
            assert!(exact >= coverage_union_bound(&sigma, n - 1) - 1e-12);
        }
    }
}

#[test]
fn monte_carlo_is_deterministic_and_thread_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (game, sigma, n) = random_mixed_case(&mut rng, 8);
    let x = sigma.support()[0].clone();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_symmetric_utility(&game, &x, &sigma, n, 30_000, 11).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.stderr.unwrap().to_bits(), b.stderr.unwrap().to_bits());
    assert_eq!(a, mc_symmetric_utility(&game, &x, &sigma, n, 30_000, 11).unwrap());
}

#[test]
fn monte_carlo_point_mass_is_exact() {
    let game = GameDefinition::separated(&[0.3, 0.7]).unwrap();
    let sigma = MixedStrategy::pure(Position::Site(1));
    let e = mc_symmetric_utility(&game, &Position::Site(1), &sigma, 6, 5000, 3).unwrap();
    assert_eq!(e.estimate, 1.0 / 6.0);
    assert_eq!(e.stderr, Some(0.0));
}

#[test]
fn generator_runtime_is_linear() {
    let game = GameDefinition::separated(&[0.1, 0.2, 0.3, 0.4]).unwrap();
    let ps = project(&game).unwrap();
    let time = |n: usize| {
        (0..5)
            .map(|_| {
                let start = std::time::Instant::now();
                std::hint::black_box(generate_pure(&ps, n).unwrap());
                start.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let small = time(1_000_000);
    let large = time(2_000_000);
    assert!(large / small <= 3.0, "doubling n took {:.2}x", large / small);
}

#[test]
fn compositions_cover_enumeration_space() {
    assert_eq!(Compositions::new(7, 3).count(), 36);
    assert_eq!(Compositions::new(8, 4).count(), 165);
    let _ = CountVector(vec![1]);
}
