//! Per-slot probabilities: the distance-state transition matrix, the
//! transmission probability and the charging probability.
//!
//! Distances to a station are modelled with the stationary density
//! `f(x) = 2πx/S`. A step of length `v` in a uniform direction moves a node
//! at distance `x₁` to within `x₂` of the station with probability
//! [`conditional_step_cdf`]. Station positions are independent, so joint
//! survival probabilities of the nearest-station distance are single-station
//! ones raised to the power `m`.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::math::{acos, binomial_cdf, binomial_pmf, powi, PI};
use crate::model::NetworkConfig;
use crate::quadrature::{integrate, QuadratureOptions};
use crate::{Error, Result};

/// Smallest annulus probability accepted as a denominator.
pub const MIN_STATE_PROBABILITY: f64 = 1e-14;

/// `Pr[D_{t+1} ≤ x2 | D_t = x1]` after one step of length `v`.
pub fn conditional_step_cdf(x1: f64, x2: f64, v: f64) -> f64 {
    if x1 <= 0.0 {
        return if x2 >= v { 1.0 } else { 0.0 };
    }
    if x2 - v > x1 {
        return 1.0;
    }
    if v + x2 < x1 || v - x2 > x1 {
        return 0.0;
    }
    let c = (v * v + x1 * x1 - x2 * x2) / (2.0 * v * x1);
    acos(c.clamp(-1.0, 1.0)) / PI
}

/// Geometry of the quantized distance chain for one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceGeometry {
    pub area: f64,
    pub charging_range: f64,
    pub speed: f64,
    pub resolution: usize,
    pub stations: usize,
}

impl DistanceGeometry {
    pub fn from_config(cfg: &NetworkConfig) -> Result<Self> {
        if !(cfg.speed > 0.0) {
            return Err(Error::StationaryNodes);
        }
        Ok(DistanceGeometry {
            area: cfg.area,
            charging_range: cfg.charging_range(),
            speed: cfg.speed,
            resolution: cfg.resolution()?,
            stations: cfg.stations,
        })
    }

    /// Lower edge of state `k`: 0, `R₁ + (k−1)v`, and `∞` past the last state.
    pub fn boundary(&self, k: usize) -> f64 {
        match k {
            0 => 0.0,
            k if k <= self.resolution => self.charging_range + (k - 1) as f64 * self.speed,
            _ => f64::INFINITY,
        }
    }

    /// `Pr[D ≤ x]` for a single station.
    pub fn marginal_cdf(&self, x: f64) -> f64 {
        if x.is_infinite() {
            1.0
        } else {
            PI * x * x / self.area
        }
    }

    /// `Pr[D_t ≤ x1, D_{t+1} ≤ x2]` for a single station.
    pub fn joint_cdf(&self, x1: f64, x2: f64) -> Result<f64> {
        match (x1.is_infinite(), x2.is_infinite()) {
            (true, true) => return Ok(1.0),
            (true, false) => return Ok(self.marginal_cdf(x2)),
            (false, true) => return Ok(self.marginal_cdf(x1)),
            _ => {}
        }
        let v = self.speed;
        if x1 <= 0.0 {
            return Ok(0.0);
        }
        // the conditional CDF is 1 below x2 - v and 0 below v - x2
        let sure = (x2 - v).min(x1).max(0.0);
        let lo = (v - x2).abs().max(sure);
        let hi = x1.min(x2 + v);
        let area = self.area;
        let f = |x: f64| conditional_step_cdf(x, x2, v) * 2.0 * PI * x / area;
        let opts = QuadratureOptions::default();
        let est = integrate(f, lo, hi, &[], opts)?;
        Ok(PI * sure * sure / area + est.value)
    }

    /// `α_{i,j} = Pr[D_t ∈ state i, D_{t+1} ∈ state j]` for a single station.
    pub fn cell_probability(&self, i: usize, j: usize) -> Result<f64> {
        if i.abs_diff(j) > 1 {
            return Ok(0.0);
        }
        let (a0, a1) = (self.boundary(i), self.boundary(i + 1));
        let (b0, b1) = (self.boundary(j), self.boundary(j + 1));
        Ok(self.joint_cdf(a1, b1)? - self.joint_cdf(a0, b1)? - self.joint_cdf(a1, b0)?
            + self.joint_cdf(a0, b0)?)
    }

    /// `A_{a,b} = Pr[D_t in state ≥ a, D_{t+1} in state ≥ b]` for a single station.
    pub fn joint_ccdf(&self, a: usize, b: usize) -> Result<f64> {
        let (x, y) = (self.boundary(a), self.boundary(b));
        Ok(1.0 - self.marginal_cdf(x) - self.marginal_cdf(y) + self.joint_cdf(x, y)?)
    }

    /// `A_{a,b}^m`: the same survival probability for the nearest of `m` stations.
    pub fn nearest_ccdf(&self, a: usize, b: usize) -> Result<f64> {
        Ok(powi(self.joint_ccdf(a, b)?, self.stations))
    }

    /// Stationary law of the nearest-station distance state.
    pub fn state_probabilities(&self) -> Vec<f64> {
        let m = self.resolution;
        let surv = |k: usize| powi(1.0 - self.marginal_cdf(self.boundary(k)), self.stations);
        (0..=m)
            .map(|k| if k == m { surv(m) } else { surv(k) - surv(k + 1) })
            .collect()
    }

    /// Tridiagonal `(M+1)×(M+1)` transition matrix of the distance state.
    pub fn transition_matrix(&self) -> Result<Matrix> {
        if self.stations == 0 {
            return Err(Error::NoStations);
        }
        let m = self.resolution;
        let phi = self.state_probabilities();
        for (state, &p) in phi.iter().enumerate() {
            if !(p >= MIN_STATE_PROBABILITY) {
                return Err(Error::ResolutionTooLarge { state, probability: p });
            }
        }
        // C(a, b) for the four corners around the diagonal
        let mut c = vec![[0.0f64; 3]; m + 2];
        for (a, row) in c.iter_mut().enumerate().take(m + 1) {
            for (k, slot) in row.iter_mut().enumerate() {
                let b = (a + k).checked_sub(1);
                if let Some(b) = b.filter(|&b| b <= m) {
                    *slot = self.nearest_ccdf(a, b)?;
                }
            }
        }
        // cc(a, b) with |a - b| <= 1
        let cc = |a: usize, b: usize| c[a][b + 1 - a];
        let mut p = Matrix::zeros(m + 1, m + 1);
        let p01 = (cc(0, 1) - cc(1, 1)) / phi[0];
        p[(0, 1)] = p01;
        p[(0, 0)] = 1.0 - p01;
        for i in 1..m {
            p[(i, i + 1)] = (cc(i, i + 1) - cc(i + 1, i + 1)) / phi[i];
            p[(i, i)] = (cc(i, i) - cc(i + 1, i) - cc(i, i + 1) + cc(i + 1, i + 1)) / phi[i];
            p[(i, i - 1)] = 1.0 - (cc(i, i) - cc(i + 1, i)) / phi[i];
        }
        // a node beyond the last edge cannot fall below the previous one in a step,
        // so C(M, M-1) = φ_M
        let stay = cc(m, m) / phi[m];
        p[(m, m)] = stay;
        p[(m, m - 1)] = 1.0 - stay;
        for i in 0..=m {
            for j in i.saturating_sub(1)..=(i + 1).min(m) {
                p[(i, j)] = p[(i, j)].clamp(0.0, 1.0);
            }
        }
        Ok(p)
    }
}

/// [`DistanceGeometry::joint_cdf`] for a scenario.
pub fn joint_cdf(x1: f64, x2: f64, cfg: &NetworkConfig) -> Result<f64> {
    DistanceGeometry::from_config(cfg)?.joint_cdf(x1, x2)
}

/// [`DistanceGeometry::cell_probability`] for a scenario.
pub fn cell_probability(i: usize, j: usize, cfg: &NetworkConfig) -> Result<f64> {
    DistanceGeometry::from_config(cfg)?.cell_probability(i, j)
}

/// [`DistanceGeometry::joint_ccdf`] for a scenario.
pub fn joint_ccdf(a: usize, b: usize, cfg: &NetworkConfig) -> Result<f64> {
    DistanceGeometry::from_config(cfg)?.joint_ccdf(a, b)
}

pub fn transition_matrix(cfg: &NetworkConfig) -> Result<Matrix> {
    DistanceGeometry::from_config(cfg)?.transition_matrix()
}

/// `q[1 − {1 − (1−q)πr²/S}^{n−1}]`.
pub fn transmit_probability_with(q: f64, nodes: usize, area: f64, range: f64) -> f64 {
    if nodes <= 1 {
        return 0.0;
    }
    let hit = (1.0 - q) * PI * range * range / area;
    q * (1.0 - powi(1.0 - hit, nodes - 1))
}

/// Probability that an active node transmits in a slot, using the exact range.
pub fn transmit_probability(cfg: &NetworkConfig) -> f64 {
    let r = cfg.transmission_range().exact;
    transmit_probability_with(cfg.transmit_prob, cfg.nodes, cfg.area, r)
}

/// Charging probability from the expectation over station and contender
/// counts, plus two closed forms kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeProbability {
    /// `E[1 − (1−s)^i | i ≥ 1]`, `i ~ Bin(m, ρ)`.
    pub value: f64,
    /// Per-station selection probability `s = Σ_l min(1, u/(l+1)) f(l; n−1, ρ)`.
    pub selection: f64,
    /// `{1 − (1 − ρ F(u−2; n−1, ρ) − (u/n)(1 − F(u−1; n, ρ))ⁿ)^m} / φ₀`.
    pub occupancy_form: f64,
    /// `{1 − (Aρ + 1 − ρ)^m} / φ₀` with `A = 1 − F(u−2; n−1, ρ) − u(1 − F(u−1; n, ρ))/(nρ)`.
    pub product_form: f64,
}

impl ChargeProbability {
    /// Largest gap between the expectation and either closed form.
    pub fn closed_form_discrepancy(&self) -> f64 {
        let a = (self.value - self.occupancy_form).abs();
        let b = (self.value - self.product_form).abs();
        if a.is_nan() || b.is_nan() {
            f64::INFINITY
        } else {
            a.max(b)
        }
    }
}

pub fn charge_probability_with(
    nodes: usize,
    stations: usize,
    capacity: usize,
    coverage: f64,
) -> ChargeProbability {
    let rho = coverage;
    let selection: f64 = (0..nodes)
        .map(|l| (capacity as f64 / (l + 1) as f64).min(1.0) * binomial_pmf(l, nodes - 1, rho))
        .sum::<f64>()
        .min(1.0);
    let covered = 1.0 - powi(1.0 - rho, stations);
    let value = if stations == 0 || covered <= 0.0 {
        0.0
    } else {
        let num: f64 = (1..=stations)
            .map(|i| (1.0 - powi(1.0 - selection, i)) * binomial_pmf(i, stations, rho))
            .sum();
        (num / covered).clamp(0.0, 1.0)
    };
    let (n, u) = (nodes as f64, capacity as f64);
    let u_i = capacity as i64;
    let tail = 1.0 - binomial_cdf(u_i - 1, nodes, rho);
    let inner_main = 1.0 - rho * binomial_cdf(u_i - 2, nodes - 1, rho) - u / n * powi(tail, nodes);
    let occupancy_form = (1.0 - powi(inner_main, stations)) / covered;
    let a = 1.0 - binomial_cdf(u_i - 2, nodes - 1, rho) - u * tail / (n * rho);
    let product_form = (1.0 - powi(a * rho + 1.0 - rho, stations)) / covered;
    ChargeProbability {
        value,
        selection,
        occupancy_form,
        product_form,
    }
}

/// Probability that a node inside a charging region is selected in a slot.
pub fn charge_probability(cfg: &NetworkConfig) -> ChargeProbability {
    charge_probability_with(cfg.nodes, cfg.stations, cfg.station_capacity, cfg.coverage())
}

/// Distance transition matrix plus the per-slot transmit and charge probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    pub p: Matrix,
    pub p_t: f64,
    pub p_c: f64,
    pub beta: Vec<f64>,
}

impl TransitionKernel {
    pub fn new(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let geometry = DistanceGeometry::from_config(cfg)?;
        Ok(TransitionKernel {
            p: geometry.transition_matrix()?,
            p_t: transmit_probability(cfg),
            p_c: charge_probability(cfg).value,
            beta: cfg.charging_profile()?.beta,
        })
    }

    /// Kernel with an arbitrary distance matrix, e.g. the memoryless one.
    pub fn with_matrix(p: Matrix, p_t: f64, p_c: f64, beta: Vec<f64>) -> Self {
        assert!(p.is_square());
        TransitionKernel { p, p_t, p_c, beta }
    }

    /// `M`, the index of the last distance state.
    pub fn resolution(&self) -> usize {
        self.p.rows() - 1
    }

    pub fn mean_units(&self) -> f64 {
        self.beta.iter().enumerate().map(|(k, b)| (k + 1) as f64 * b).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sqrt;

    fn geometry(speed: f64, resolution: usize, stations: usize) -> DistanceGeometry {
        DistanceGeometry {
            area: 20.0,
            charging_range: 0.581,
            speed,
            resolution,
            stations,
        }
    }

    // Area of the intersection of two discs with radii a, b and centre gap d.
    fn lens(a: f64, b: f64, d: f64) -> f64 {
        if d >= a + b {
            return 0.0;
        }
        if d <= (a - b).abs() + 1e-12 {
            let r = a.min(b);
            return PI * r * r;
        }
        let ca = ((d * d + a * a - b * b) / (2.0 * d * a)).clamp(-1.0, 1.0);
        let cb = ((d * d + b * b - a * a) / (2.0 * d * b)).clamp(-1.0, 1.0);
        let k = (-d + a + b) * (d + a - b) * (d - a + b) * (d + a + b);
        a * a * acos(ca) + b * b * acos(cb) - 0.5 * sqrt(k.max(0.0))
    }

    #[test]
    fn conditional_cases() {
        let v = 0.7;
        assert_eq!(conditional_step_cdf(1.0, 1.0 + 2.0 * v, v), 1.0);
        assert_eq!(conditional_step_cdf(3.0 * v, v, v), 0.0);
        assert!((conditional_step_cdf(v, v, v) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn joint_cdf_trivial_cases() {
        let g = geometry(0.5, 3, 1);
        assert_eq!(g.joint_cdf(0.0, 1.0).unwrap(), 0.0);
        let x1 = 0.8;
        let j = g.joint_cdf(x1, x1 + 0.5).unwrap();
        assert!((j - PI * x1 * x1 / 20.0).abs() < 1e-14);
    }

    #[test]
    fn joint_cdf_matches_lens_area() {
        for &v in &[0.2, 0.581, 1.0, 2.5, 6.0] {
            let g = geometry(v, 1, 1);
            for &x1 in &[0.1, 0.581, 1.2, 2.0] {
                for &x2 in &[0.05, 0.581, 1.0, 1.9, 3.0] {
                    let got = g.joint_cdf(x1, x2).unwrap();
                    let want = lens(x1, x2, v) / 20.0;
                    assert!((got - want).abs() < 1e-10, "v={v} x1={x1} x2={x2}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn joint_cdf_matches_pair_sampling() {
        use rand::{Rng, SeedableRng};
        let r1 = 0.581;
        let g = geometry(r1, 1, 1);
        let want = g.joint_cdf(r1, r1).unwrap();
        let outer = sqrt(20.0 / PI);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let (x, y) = loop {
                let x = rng.gen_range(-outer..outer);
                let y = rng.gen_range(-outer..outer);
                if x * x + y * y <= outer * outer {
                    break (x, y);
                }
            };
            let t = rng.gen_range(0.0..2.0 * PI);
            let (x2, y2) = (x + r1 * crate::math::cos(t), y + r1 * crate::math::sin(t));
            if x * x + y * y <= r1 * r1 && x2 * x2 + y2 * y2 <= r1 * r1 {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let se = sqrt(want * (1.0 - want) / n as f64);
        assert!((p - want).abs() < 3.0 * se, "mc={p} quad={want} se={se}");
    }

    #[test]
    fn cells_sum_to_one_and_match_ccdf() {
        let g = geometry(0.5, 3, 1);
        let m = g.resolution;
        let mut total = 0.0;
        for i in 0..=m {
            for j in 0..=m {
                total += g.cell_probability(i, j).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(g.cell_probability(0, 2).unwrap(), 0.0);
        assert!((g.joint_ccdf(0, 0).unwrap() - 1.0).abs() < 1e-15);
        for a in 0..=m {
            for b in 0..=m {
                let mut s = 0.0;
                for i in a..=m {
                    for j in b..=m {
                        s += g.cell_probability(i, j).unwrap();
                    }
                }
                assert!((s - g.joint_ccdf(a, b).unwrap()).abs() < 1e-9, "a={a} b={b}");
                if a + 1 <= m {
                    assert!(g.joint_ccdf(a + 1, b).unwrap() <= g.joint_ccdf(a, b).unwrap() + 1e-12);
                }
                if b + 1 <= m {
                    assert!(g.joint_ccdf(a, b + 1).unwrap() <= g.joint_ccdf(a, b).unwrap() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn matrix_rows_and_structure() {
        for &(v, m, st) in &[(1.0, 1, 1), (0.5, 3, 1), (0.2, 9, 3), (0.5, 2, 5)] {
            let p = geometry(v, m, st).transition_matrix().unwrap();
            for (i, s) in p.row_sums().iter().enumerate() {
                assert!((s - 1.0).abs() < 1e-10, "row {i} sums to {s}");
            }
            for i in 0..=m {
                for j in 0..=m {
                    if i.abs_diff(j) > 1 {
                        assert_eq!(p[(i, j)], 0.0);
                    }
                    assert!((0.0..=1.0).contains(&p[(i, j)]));
                }
            }
        }
    }

    #[test]
    fn stationary_law_is_invariant() {
        // the state law must be a fixed point of the kernel built from it
        for &(v, m, st) in &[(0.5, 3, 1), (0.3, 6, 2)] {
            let g = geometry(v, m, st);
            let p = g.transition_matrix().unwrap();
            let phi = g.state_probabilities();
            let next = p.left_mul(&phi);
            for (a, b) in phi.iter().zip(&next) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn default_kernel_values() {
        let cfg = NetworkConfig::default_scenario();
        let k = TransitionKernel::new(&cfg).unwrap();
        assert_eq!(k.resolution(), 1);
        // the exact range is about 1.3% longer than sqrt(S/n)/2
        assert!((k.p_t - 0.1546).abs() < 5e-4, "p_t = {}", k.p_t);
        assert!((k.p[(1, 1)] - 0.9474).abs() < 1e-3, "P11 = {}", k.p[(1, 1)]);
    }

    #[test]
    fn resolution_too_large_is_reported() {
        // far annuli vanish when the outer edge reaches the covered area
        let g = DistanceGeometry {
            resolution: 40,
            ..geometry(0.1, 1, 1)
        };
        assert!(matches!(g.transition_matrix(), Err(Error::ResolutionTooLarge { .. })));
        assert_eq!(geometry(0.5, 3, 0).transition_matrix(), Err(Error::NoStations));
    }

    #[test]
    fn transmit_edges() {
        assert_eq!(transmit_probability_with(0.0, 10, 20.0, 0.7), 0.0);
        assert_eq!(transmit_probability_with(0.5, 1, 20.0, 0.7), 0.0);
        let pt = transmit_probability_with(0.5, 10, 20.0, 0.707_106_781_186_547_5);
        assert!((pt - 0.151).abs() < 1e-3);
    }

    #[test]
    fn charge_probability_cases() {
        let rho = 0.053;
        assert!((charge_probability_with(5, 2, 5, rho).value - 1.0).abs() < 1e-12);
        let two = charge_probability_with(2, 1, 1, rho);
        assert!((two.value - (1.0 - rho / 2.0)).abs() < 1e-14);
        for &(n, m, u) in &[(10usize, 1usize, 1usize), (10, 3, 2), (50, 7, 3)] {
            let c = charge_probability_with(n, m, u, rho);
            let s = binomial_cdf(u as i64 - 1, n - 1, rho)
                + u as f64 * (1.0 - binomial_cdf(u as i64, n, rho)) / (n as f64 * rho);
            assert!((c.selection - s).abs() < 1e-12);
            let closed = (1.0 - powi(1.0 - rho * s, m)) / (1.0 - powi(1.0 - rho, m));
            assert!((c.value - closed).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn rows_stochastic(area in 5.0f64..60.0, v in 0.1f64..3.0, m in 1usize..6, frac in 0.0f64..1.0) {
            let r1 = 0.581;
            let top = ((sqrt(area / PI) - r1) / v).floor().max(1.0) as usize;
            let res = 1 + ((top - 1) as f64 * frac) as usize;
            let g = DistanceGeometry { area, charging_range: r1, speed: v, resolution: res, stations: m };
            let p = g.transition_matrix().unwrap();
            for s in p.row_sums() {
                proptest::prop_assert!((s - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn more_stations_charge_more(n in 2usize..60, m in 1usize..10, u in 1usize..4, rho in 0.001f64..0.3) {
            let a = charge_probability_with(n, m, u, rho).value;
            let b = charge_probability_with(n, m + 1, u, rho).value;
            proptest::prop_assert!(b >= a - 1e-12);
        }
    }
}
