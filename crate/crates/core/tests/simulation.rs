//! Simulator against closed-form rates and its own invariants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wcs_core::asymptotics::mean_arrival_rate;
use wcs_core::kernel::TransitionKernel;
use wcs_core::model::default_radii;
use wcs_core::sim::{run, SimOptions, World};
use wcs_core::NetworkConfig;

#[test]
fn energy_inflow_matches_arrival_rate() {
    let cfg = NetworkConfig {
        battery: 10_000,
        ..NetworkConfig::default_scenario()
    };
    let k = TransitionKernel::new(&cfg).unwrap();
    let want = mean_arrival_rate(&cfg, &k);
    let e = run(&cfg, &SimOptions::new(400_000, 1000)).unwrap().estimates();
    assert!((e.inflow.value - want).abs() / want < 0.02, "{} vs {want}", e.inflow.value);
    assert!((e.accepted_inflow.value - want).abs() / want < 0.02);
}

#[test]
fn fast_nodes_meet_like_geometric() {
    let cfg = NetworkConfig {
        speed: 6.0,
        ..NetworkConfig::default_scenario()
    };
    let e = run(&cfg, &SimOptions::new(400_000, 1000)).unwrap().estimates();
    assert!((e.mean_intermeeting - 18.7174).abs() / 18.7174 < 0.1, "{}", e.mean_intermeeting);
}

#[test]
fn energy_stays_within_battery() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut node_steps = 0usize;
    while node_steps < 10_000_000 {
        let e = rng.gen_range(1..=3);
        let cfg = NetworkConfig {
            nodes: rng.gen_range(1..30),
            stations: rng.gen_range(0..6),
            speed: rng.gen_range(0.0..3.0),
            transmit_prob: rng.gen_range(0.0..=1.0),
            station_capacity: rng.gen_range(1..4),
            battery: rng.gen_range(1..6),
            max_units: e,
            radii: default_radii(rng.gen_range(0.3..2.0), e),
            seed: rng.gen(),
            ..NetworkConfig::default_scenario()
        };
        let mut world = World::new(&cfg).unwrap();
        for _ in 0..20_000 {
            world.step();
            assert!(world.energy().iter().all(|&x| x <= cfg.battery));
        }
        node_steps += 20_000 * cfg.nodes;
    }
}

#[test]
fn every_move_has_length_speed() {
    for v in [0.3, 1.0, 2.0] {
        let cfg = NetworkConfig {
            speed: v,
            ..NetworkConfig::default_scenario()
        };
        let mut world = World::new(&cfg).unwrap();
        let side = world.side;
        let gap = |a: f64, b: f64| {
            let d = (a - b).abs();
            d.min(side - d)
        };
        let mut before = world.positions();
        for _ in 0..2000 {
            world.step();
            let after = world.positions();
            for (p, q) in before.iter().zip(&after) {
                assert!(p.0 >= 0.0 && p.0 < side && p.1 >= 0.0 && p.1 < side);
                let d = gap(p.0, q.0).hypot(gap(p.1, q.1));
                assert!((d - v).abs() < 1e-9, "moved {d}");
            }
            before = after;
        }
    }
}
