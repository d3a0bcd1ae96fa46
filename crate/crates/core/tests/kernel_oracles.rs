//! Distance kernel, transmit and charge probabilities against sampling oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wcs_core::kernel::{self, DistanceGeometry, TransitionKernel};
use wcs_core::math::PI;
use wcs_core::model::distance_state;
use wcs_core::sim::{self, SimOptions};
use wcs_core::NetworkConfig;

struct PairSample {
    hits: usize,
    n: usize,
}

impl PairSample {
    fn p(&self) -> f64 {
        self.hits as f64 / self.n as f64
    }

    fn se(&self) -> f64 {
        let p = self.p();
        (p * (1.0 - p) / self.n as f64).sqrt().max(1e-12)
    }
}

// (D_t, D_{t+1}) pairs for a uniform point in a disc of area S and one step.
fn sample_pairs(g: &DistanceGeometry, n: usize, seed: u64, hit: impl Fn(f64, f64) -> bool) -> PairSample {
    let outer = (g.area / PI).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..n {
        let rad = outer * rng.gen::<f64>().sqrt();
        let a = rng.gen_range(0.0..2.0 * PI);
        let (x, y) = (rad * a.cos(), rad * a.sin());
        let t = rng.gen_range(0.0..2.0 * PI);
        let (x2, y2) = (x + g.speed * t.cos(), y + g.speed * t.sin());
        if hit((x * x + y * y).sqrt(), (x2 * x2 + y2 * y2).sqrt()) {
            hits += 1;
        }
    }
    PairSample { hits, n }
}

fn default_geometry() -> DistanceGeometry {
    DistanceGeometry::from_config(&NetworkConfig::default_scenario()).unwrap()
}

#[test]
fn joint_cdf_at_equal_radius_and_speed() {
    let cfg = NetworkConfig::default_scenario();
    let r1 = cfg.charging_range();
    let g = DistanceGeometry {
        speed: r1,
        ..default_geometry()
    };
    let want = g.joint_cdf(r1, r1).unwrap();
    let s = sample_pairs(&g, 1_000_000, 11, |a, b| a <= r1 && b <= r1);
    assert!((s.p() - want).abs() < 3.0 * s.se(), "quad {want} mc {} se {}", s.p(), s.se());
}

#[test]
fn alpha01_and_a11_default() {
    let g = default_geometry();
    let (r1, v, m) = (g.charging_range, g.speed, g.resolution);
    let state = |d: f64| distance_state(d, r1, v, m);

    let alpha = g.cell_probability(0, 1).unwrap();
    let s = sample_pairs(&g, 1_000_000, 12, |a, b| state(a) == 0 && state(b) == 1);
    assert!((s.p() - alpha).abs() < 3.0 * s.se(), "alpha01 {alpha} mc {}", s.p());

    let a11 = g.joint_ccdf(1, 1).unwrap();
    let s = sample_pairs(&g, 1_000_000, 13, |a, b| state(a) >= 1 && state(b) >= 1);
    assert!((s.p() - a11).abs() < 3.0 * s.se(), "A11 {a11} mc {}", s.p());
}

#[test]
fn matrix_against_simulated_transitions() {
    let cfg = NetworkConfig {
        speed: 0.5,
        ..NetworkConfig::default_scenario()
    };
    let k = TransitionKernel::new(&cfg).unwrap();
    let stats = sim::run(&cfg, &SimOptions::new(200_000, 1000)).unwrap();
    let emp = sim::empirical_kernel(&stats, sim::MIN_ROW_VISITS);
    for (i, tv) in emp.total_variation(&k.p).into_iter().enumerate() {
        let tv = tv.expect("every row visited");
        assert!(tv < 0.02, "row {i} tv {tv}");
    }
}

#[test]
fn two_node_charge_probability() {
    let cfg = NetworkConfig {
        nodes: 2,
        ..NetworkConfig::default_scenario()
    };
    let rho = cfg.coverage();
    let c = kernel::charge_probability(&cfg);
    assert!((c.value - (1.0 - rho / 2.0)).abs() < 1e-14);
}

#[test]
fn charge_probability_matches_selection_frequency() {
    let cfg = NetworkConfig::default_scenario();
    let c = kernel::charge_probability(&cfg).value;
    let est = sim::run(&cfg, &SimOptions::new(300_000, 1000)).unwrap().estimates();
    assert!((est.p_c.value - c).abs() < 0.01, "p_c {c} mc {}", est.p_c.value);
}

#[test]
fn transmit_probability_matches_mode_and_neighbor_counting() {
    let cfg = NetworkConfig::default_scenario();
    let p_t = kernel::transmit_probability(&cfg);
    let est = sim::run(&cfg, &SimOptions::new(300_000, 1000)).unwrap().estimates();
    assert!((est.transmit_opportunity.value - p_t).abs() < 0.005);
}

#[test]
fn product_form_agrees_with_expectation() {
    for &(n, m, u) in &[(10usize, 1usize, 1usize), (40, 4, 2), (200, 20, 3)] {
        let cfg = NetworkConfig {
            nodes: n,
            stations: m,
            station_capacity: u,
            ..NetworkConfig::default_scenario()
        };
        let c = kernel::charge_probability(&cfg);
        assert!((c.value - c.product_form).abs() < 1e-9);
    }
}
