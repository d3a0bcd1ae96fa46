//! Infinite-battery limit, density scaling bounds and the memoryless
//! (i.i.d. relocation) reference kernel.

use alloc::vec::Vec;

use crate::chain::throughput_from_pon;
use crate::kernel::{DistanceGeometry, TransitionKernel};
use crate::linalg::Matrix;
use crate::math::{exp, PI};
use crate::model::NetworkConfig;
use crate::Result;

/// Stationary law `φ_0..φ_M` of the nearest-station distance state.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceStationaryVector {
    pub phi: Vec<f64>,
}

impl DistanceStationaryVector {
    /// `φ_0`, the chance of being inside some charging region.
    pub fn covered(&self) -> f64 {
        self.phi[0]
    }
}

/// Annulus-area closed form. With no stations all mass sits in the last state.
pub fn distance_stationary_vector(cfg: &NetworkConfig) -> Result<DistanceStationaryVector> {
    let g = DistanceGeometry::from_config(cfg)?;
    Ok(DistanceStationaryVector {
        phi: g.state_probabilities(),
    })
}

/// Long-run energy units gained per slot, `p_c φ_0 Σ_k k β(k)`.
pub fn mean_arrival_rate(cfg: &NetworkConfig, kernel: &TransitionKernel) -> f64 {
    if cfg.stations == 0 {
        return 0.0;
    }
    kernel.p_c * cfg.covered_fraction() * kernel.mean_units()
}

/// Active probability with an unbounded battery, `min(1, λ̄/p_t)`.
pub fn infinite_battery_pon(cfg: &NetworkConfig, kernel: &TransitionKernel) -> f64 {
    let rate = mean_arrival_rate(cfg, kernel);
    if rate <= 0.0 {
        0.0
    } else if kernel.p_t <= 0.0 {
        1.0
    } else {
        (rate / kernel.p_t).min(1.0)
    }
}

/// Throughput in the unbounded-battery limit; does not depend on speed.
pub fn infinite_battery_throughput(cfg: &NetworkConfig, kernel: &TransitionKernel) -> f64 {
    throughput_from_pon(infinite_battery_pon(cfg, kernel), cfg.transmit_prob)
}

/// Explicit constants of the density scaling law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingBounds {
    /// `1 − e^{−(π/4)(1−q)}`.
    pub a: f64,
    /// `e^{−(πu/4a) Σ_k kβ(k)}`.
    pub c1: f64,
    /// `e^{−πu/(4a)}`.
    pub c2: f64,
    /// `min(1, m/n)`.
    pub ratio: f64,
    /// Active probabilities the bounds are evaluated at.
    pub pon_lower: f64,
    pub pon_upper: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Evaluates both bounds at `P = min(1, ratio · u κ /(q a))` with `κ = 1` for
/// the lower and `κ = Σ kβ(k)` for the upper bound.
pub fn scaling_bounds(cfg: &NetworkConfig) -> Result<ScalingBounds> {
    let profile = cfg.charging_profile()?;
    let q = cfg.transmit_prob;
    let u = cfg.station_capacity as f64;
    let mean_units = profile.mean_units();
    let a = 1.0 - exp(-PI / 4.0 * (1.0 - q));
    let ratio = (cfg.stations as f64 / cfg.nodes as f64).min(1.0);
    let pon_lower = (ratio * u / (q * a)).min(1.0);
    let pon_upper = (ratio * u * mean_units / (q * a)).min(1.0);
    Ok(ScalingBounds {
        a,
        c1: exp(-PI * u / (4.0 * a) * mean_units),
        c2: exp(-PI * u / (4.0 * a)),
        ratio,
        pon_lower,
        pon_upper,
        lower: throughput_from_pon(pon_lower, q),
        upper: throughput_from_pon(pon_upper, q),
    })
}

/// Same transmit and charge probabilities, but every distance row equals `φ`.
pub fn iid_kernel(kernel: &TransitionKernel, phi: &DistanceStationaryVector) -> TransitionKernel {
    let n = phi.phi.len();
    assert_eq!(n, kernel.p.rows());
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n {
        data.extend_from_slice(&phi.phi);
    }
    TransitionKernel::with_matrix(
        Matrix::from_rows(n, n, data),
        kernel.p_t,
        kernel.p_c,
        kernel.beta.clone(),
    )
}
