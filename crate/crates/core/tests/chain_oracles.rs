//! Steady-state solvers against a dense solve, a direct simulation of the
//! chain, and each other.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wcs_core::chain::{build_chain, pon_lower_bound, solve_steady_state, ChainModel};
use wcs_core::kernel::TransitionKernel;
use wcs_core::model::default_radii;
use wcs_core::qbd::solve_qbd_matrix_geometric;
use wcs_core::asymptotics::infinite_battery_pon;
use wcs_core::{analysis, NetworkConfig};

fn dense_solve(model: &ChainModel) -> Vec<f64> {
    let q = model.generator();
    let n = q.rows();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(j, i)] = q[(i, j)];
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).expect("dense system").iter().copied().collect()
}

fn random_config(rng: &mut ChaCha8Rng) -> NetworkConfig {
    let e = rng.gen_range(1..=3);
    let r1 = rng.gen_range(0.3..0.9);
    let speed = rng.gen_range(0.3..2.0);
    NetworkConfig {
        nodes: rng.gen_range(2..40),
        stations: rng.gen_range(1..5),
        area: 20.0,
        speed,
        transmit_prob: rng.gen_range(0.1..0.9),
        station_capacity: rng.gen_range(1..3),
        battery: rng.gen_range(1..25),
        max_units: e,
        radii: default_radii(r1, e),
        resolution: None,
        seed: 0,
    }
}

#[test]
fn block_solver_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..30 {
        let cfg = random_config(&mut rng);
        let k = TransitionKernel::new(&cfg).unwrap();
        let model = build_chain(&k, cfg.battery);
        if model.levels() * model.width() > 400 {
            continue;
        }
        let ss = solve_steady_state(&model).unwrap();
        let dense = dense_solve(&model);
        assert!(ss.residual < 1e-10);
        assert!(ss.pi.iter().all(|&x| x >= 0.0));
        assert!((ss.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in ss.pi.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-9, "{cfg:?}");
        }
    }
}

#[test]
fn default_scenario_matches_dense_solve() {
    let cfg = NetworkConfig::default_scenario();
    let k = TransitionKernel::new(&cfg).unwrap();
    let model = build_chain(&k, cfg.battery);
    let ss = solve_steady_state(&model).unwrap();
    assert!(ss.residual < 1e-10);
    for (a, b) in ss.pi.iter().zip(&dense_solve(&model)) {
        assert!((a - b).abs() < 1e-9);
    }
}

// Occupation frequencies of the uniformized chain I + Q/c. Recharge and
// distance moves are added as competing rates, so I + Q itself can have
// negative diagonal entries.
fn simulate_chain(model: &ChainModel, steps: usize, seed: u64) -> Vec<f64> {
    let q = model.generator();
    let n = q.rows();
    let c = (0..n).map(|i| -q[(i, i)]).fold(1.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = 0;
    let mut counts = vec![0u64; n];
    for _ in 0..steps {
        counts[state] += 1;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = state;
        for j in 0..n {
            let rate = q[(state, j)] / c;
            let p = if j == state { 1.0 + rate } else { rate };
            acc += p;
            if u < acc {
                next = j;
                break;
            }
        }
        state = next;
    }
    counts.iter().map(|&c| c as f64 / steps as f64).collect()
}

#[test]
fn no_transmission_matches_chain_simulation() {
    let cfg = NetworkConfig {
        battery: 4,
        ..NetworkConfig::default_scenario()
    };
    let mut k = TransitionKernel::new(&cfg).unwrap();
    k.p_t = 0.0;
    let model = build_chain(&k, cfg.battery);
    let ss = solve_steady_state(&model).unwrap();
    let freq = simulate_chain(&model, 1_000_000, 3);
    let top: f64 = ss.level(4).iter().sum();
    assert!((top - 1.0).abs() < 1e-12);
    let w = model.width();
    let sim_top: f64 = freq[4 * w..].iter().sum();
    assert!(sim_top > 0.99, "simulated mass on the top level {sim_top}");
}

#[test]
fn default_chain_matches_chain_simulation() {
    let cfg = NetworkConfig {
        battery: 4,
        ..NetworkConfig::default_scenario()
    };
    let k = TransitionKernel::new(&cfg).unwrap();
    let model = build_chain(&k, cfg.battery);
    let ss = solve_steady_state(&model).unwrap();
    let freq = simulate_chain(&model, 1_000_000, 4);
    for (i, (a, b)) in ss.pi.iter().zip(&freq).enumerate() {
        assert!((a - b).abs() < 0.01, "state {i}: {a} vs {b} w={}", model.width());
    }
}

fn single_unit(speed: f64, nodes: usize, battery: usize) -> NetworkConfig {
    NetworkConfig {
        max_units: 1,
        radii: vec![0.581],
        speed,
        nodes,
        battery,
        ..NetworkConfig::default_scenario()
    }
}

#[test]
fn matrix_geometric_matches_block_solver() {
    for &(v, n) in &[(1.0, 10), (0.5, 10), (0.3, 4), (0.5, 60)] {
        for l in [1usize, 2, 7, 30] {
            let cfg = single_unit(v, n, l);
            let k = TransitionKernel::new(&cfg).unwrap();
            let model = build_chain(&k, l);
            let direct = solve_steady_state(&model).unwrap();
            let mg = solve_qbd_matrix_geometric(&model).unwrap();
            for (a, b) in direct.pi.iter().zip(&mg.state.pi) {
                assert!((a - b).abs() < 1e-8, "v={v} n={n} L={l}");
            }
        }
    }
}

#[test]
fn matrix_geometric_pon_grows_with_battery() {
    let mut prev = 0.0;
    for l in 1..=50 {
        let cfg = single_unit(1.0, 10, l);
        let k = TransitionKernel::new(&cfg).unwrap();
        let p_on = solve_qbd_matrix_geometric(&build_chain(&k, l)).unwrap().state.p_on;
        assert!(p_on >= prev - 1e-12, "L={l}");
        prev = p_on;
    }
}

#[test]
fn lower_bound_sits_below_unbounded_battery_pon() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let cfg = random_config(&mut rng);
        let k = TransitionKernel::new(&cfg).unwrap();
        let bound = pon_lower_bound(&k, &cfg);
        assert!(bound <= infinite_battery_pon(&cfg, &k) + 1e-12, "{cfg:?}");
    }
}

#[test]
fn lower_bound_holds_at_default_battery() {
    for v in [0.5, 1.0, 3.0, 6.0] {
        let cfg = NetworkConfig { speed: v, ..NetworkConfig::default_scenario() };
        let s = analysis::solve(&cfg).unwrap();
        assert!(pon_lower_bound(s.kernel.as_ref().unwrap(), &cfg) <= s.p_on, "v={v}");
    }
}

// The bound is the unbounded-battery drift rate; a one-unit battery cannot
// bank charge through an excursion and falls below it.
#[test]
fn lower_bound_exceeds_pon_for_tiny_battery() {
    let cfg = NetworkConfig { battery: 1, ..NetworkConfig::default_scenario() };
    let s = analysis::solve(&cfg).unwrap();
    let bound = pon_lower_bound(s.kernel.as_ref().unwrap(), &cfg);
    assert!((bound - 0.2717).abs() < 1e-4);
    assert!(s.p_on < 0.15);
}

#[test]
fn throughput_monotone_in_battery_and_speed() {
    let base = NetworkConfig::default_scenario();
    let mut prev = 0.0;
    for l in 1..=60 {
        let t = analysis::solve(&NetworkConfig { battery: l, ..base.clone() }).unwrap().throughput;
        assert!(t >= prev - 1e-12, "L={l}");
        prev = t;
    }
    let mut prev = 0.0;
    for i in 1..=12 {
        let v = 0.5 * i as f64;
        let t = analysis::solve(&NetworkConfig { speed: v, ..base.clone() }).unwrap().throughput;
        assert!(t >= prev - 1e-12, "v={v}");
        prev = t;
    }
}

#[test]
fn no_stations_gives_zero() {
    let cfg = NetworkConfig {
        stations: 0,
        ..NetworkConfig::default_scenario()
    };
    let s = analysis::solve(&cfg).unwrap();
    assert_eq!((s.p_on, s.throughput), (0.0, 0.0));
}
