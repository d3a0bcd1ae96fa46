//! Scenario parameters, charging bands and distance quantization.

use alloc::vec::Vec;

use crate::math::{ceil, exp, floor, ln_gamma, sqrt, PI};
use crate::{Error, Result};

/// Charging range used by the reproduction scenario: πR₁²/S ≈ 0.053 at S = 20.
pub const DEFAULT_CHARGING_RANGE: f64 = 0.581;

/// Scenario parameters shared by every model and the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Mobile nodes `n`.
    pub nodes: usize,
    /// Charging stations `m`.
    pub stations: usize,
    /// Network area `S` in m²; the network is a √S × √S square.
    pub area: f64,
    /// Node speed `v` in meters per slot.
    pub speed: f64,
    /// Transmitter-mode probability `q`.
    pub transmit_prob: f64,
    /// Nodes a station can charge per slot, `u`.
    pub station_capacity: usize,
    /// Battery capacity `L` in energy units.
    pub battery: usize,
    /// Maximum units delivered in one slot, `E`.
    pub max_units: usize,
    /// Band radii `R_1 > … > R_E > 0`; `R_1` is the charging range.
    pub radii: Vec<f64>,
    /// Distance resolution `M`; derived from the geometry when `None`.
    pub resolution: Option<usize>,
    pub seed: u64,
}

impl NetworkConfig {
    /// S = 20, L = 10, q = 0.5, u = 1, E = 3, n = 10, m = 1, v = 1.
    pub fn default_scenario() -> Self {
        NetworkConfig {
            nodes: 10,
            stations: 1,
            area: 20.0,
            speed: 1.0,
            transmit_prob: 0.5,
            station_capacity: 1,
            battery: 10,
            max_units: 3,
            radii: default_radii(DEFAULT_CHARGING_RANGE, 3),
            resolution: None,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason| Err(Error::InvalidConfig { field, reason });
        if !(self.transmit_prob > 0.0 && self.transmit_prob < 1.0) {
            return bad("q", "must lie strictly between 0 and 1");
        }
        if self.nodes < 1 {
            return bad("n", "need at least one node");
        }
        if self.station_capacity < 1 {
            return bad("u", "must be at least 1");
        }
        if self.battery < 1 {
            return bad("L", "must be at least 1");
        }
        if self.max_units < 1 {
            return bad("E", "must be at least 1");
        }
        if !(self.area > 0.0 && self.area.is_finite()) {
            return bad("S", "must be positive and finite");
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return bad("v", "must be non-negative and finite");
        }
        if self.radii.len() != self.max_units {
            return bad("radii", "length must equal E");
        }
        let limit = sqrt(self.area / PI);
        if self.radii.iter().any(|&r| !(r > 0.0 && r < limit)) {
            return bad("radii", "every radius must lie in (0, sqrt(S/pi))");
        }
        if self.radii.windows(2).any(|w| w[1] >= w[0]) {
            return bad("radii", "must be strictly decreasing");
        }
        if let Some(m) = self.resolution {
            if m < 1 {
                return bad("M", "must be at least 1");
            }
            let outer = self.radii[0] + m as f64 * self.speed;
            if PI * outer * outer > self.area {
                return bad("M", "annuli up to R_1 + M v must fit in area S");
            }
        }
        Ok(())
    }

    pub fn charging_range(&self) -> f64 {
        self.radii[0]
    }

    /// `πR₁²/S`, the chance a uniform node is within one station's range.
    pub fn coverage(&self) -> f64 {
        PI * self.radii[0] * self.radii[0] / self.area
    }

    /// `1 − (1 − πR₁²/S)^m`: chance of being inside at least one charging region.
    pub fn covered_fraction(&self) -> f64 {
        1.0 - crate::math::powi(1.0 - self.coverage(), self.stations)
    }

    pub fn charging_profile(&self) -> Result<ChargingProfile> {
        ChargingProfile::new(self.radii.clone())
    }

    /// Explicit `M`, else [`default_resolution`].
    pub fn resolution(&self) -> Result<usize> {
        match self.resolution {
            Some(m) => Ok(m),
            None => default_resolution(self.area, self.radii[0], self.speed),
        }
    }

    pub fn transmission_range(&self) -> TransmissionRange {
        transmission_range(self.nodes, self.area)
    }

    pub fn side(&self) -> f64 {
        sqrt(self.area)
    }
}

/// `R_k = R_1 (E − k + 1)/E`, i.e. `R_1, 2R_1/3, R_1/3` for E = 3.
pub fn default_radii(charging_range: f64, max_units: usize) -> Vec<f64> {
    (1..=max_units)
        .map(|k| charging_range * (max_units - k + 1) as f64 / max_units as f64)
        .collect()
}

/// Band radii plus the probability β(k) that a charged node gets `k` units.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargingProfile {
    pub radii: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ChargingProfile {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidConfig { field: "radii", reason: "need at least one radius" });
        }
        if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidConfig { field: "radii", reason: "radii must be positive" });
        }
        if radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig { field: "radii", reason: "must be strictly decreasing" });
        }
        let r1sq = radii[0] * radii[0];
        let e = radii.len();
        let beta = (0..e)
            .map(|k| {
                let outer = radii[k] * radii[k];
                let inner = if k + 1 < e { radii[k + 1] * radii[k + 1] } else { 0.0 };
                (outer - inner) / r1sq
            })
            .collect();
        Ok(ChargingProfile { radii, beta })
    }

    pub fn max_units(&self) -> usize {
        self.radii.len()
    }

    /// `Σ_k k·β(k)`, the mean units received per charge.
    pub fn mean_units(&self) -> f64 {
        self.beta.iter().enumerate().map(|(k, b)| (k + 1) as f64 * b).sum()
    }
}

/// Units delivered to a node at `distance` from a station.
pub fn charge_units(distance: f64, profile: &ChargingProfile) -> usize {
    // radii are decreasing, so count how many bands still contain the node
    profile.radii.iter().take_while(|&&r| distance <= r).count()
}

/// Transmission range `r`: exact gamma-ratio value and `√S/(2√n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionRange {
    pub exact: f64,
    pub approx: f64,
}

/// Mean distance to the nearest of `n` uniform nodes, `√S Γ(n) / (2 Γ(n+½))`.
pub fn transmission_range(nodes: usize, area: f64) -> TransmissionRange {
    assert!(nodes >= 1 && area > 0.0);
    let n = nodes as f64;
    let exact = 0.5 * sqrt(area) * exp(ln_gamma(n) - ln_gamma(n + 0.5));
    TransmissionRange {
        exact,
        approx: sqrt(area) / (2.0 * sqrt(n)),
    }
}

/// Default `M = ⌊(√(S/π) − R₁)/v⌋`, at least 1.
pub fn default_resolution(area: f64, charging_range: f64, speed: f64) -> Result<usize> {
    if !(speed > 0.0) {
        return Err(Error::StationaryNodes);
    }
    let m = floor((sqrt(area / PI) - charging_range) / speed);
    Ok(if m >= 1.0 { m as usize } else { 1 })
}

/// Quantized distance state `d ∈ {0..M}`.
pub fn relative_distance(distance: f64, cfg: &NetworkConfig) -> Result<usize> {
    let r1 = cfg.charging_range();
    if distance <= r1 {
        return Ok(0);
    }
    if !(cfg.speed > 0.0) {
        return Err(Error::StationaryNodes);
    }
    let m = cfg.resolution()?;
    Ok(distance_state(distance, r1, cfg.speed, m))
}

/// Same as [`relative_distance`] with the geometry already resolved.
#[inline]
pub fn distance_state(distance: f64, r1: f64, speed: f64, m: usize) -> usize {
    if distance <= r1 {
        return 0;
    }
    let raw = ceil((distance - r1) / speed);
    if !(raw < m as f64) {
        return m;
    }
    let mut k = (raw as usize).max(1);
    // guard the rounding of the division at band edges
    if k > 1 && distance <= r1 + (k - 1) as f64 * speed {
        k -= 1;
    } else if distance > r1 + k as f64 * speed {
        k += 1;
    }
    k.min(m)
}
