//! One-call evaluation of every analytic quantity for a scenario.

use crate::asymptotics::{
    distance_stationary_vector, iid_kernel, infinite_battery_pon, infinite_battery_throughput,
    mean_arrival_rate, scaling_bounds, DistanceStationaryVector, ScalingBounds,
};
use crate::chain::{build_chain, pon_lower_bound, solve_steady_state, throughput_from_pon, SteadyState};
use crate::intermeeting::{
    departure_distribution, inner_kernel, mean_intermeeting, spectral_decomposition, MeanIntermeeting,
    SpectralSummary,
};
use crate::kernel::{charge_probability, ChargeProbability, TransitionKernel};
use crate::model::NetworkConfig;
use crate::Result;

/// Steady state of the finite-battery chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    /// `None` when there are no stations.
    pub kernel: Option<TransitionKernel>,
    pub steady: Option<SteadyState>,
    pub p_on: f64,
    pub throughput: f64,
    pub residual: f64,
}

/// Builds the kernel and chain and solves for the stationary distribution.
pub fn solve(cfg: &NetworkConfig) -> Result<Solved> {
    cfg.validate()?;
    if cfg.stations == 0 {
        return Ok(Solved {
            kernel: None,
            steady: None,
            p_on: 0.0,
            throughput: 0.0,
            residual: 0.0,
        });
    }
    let kernel = TransitionKernel::new(cfg)?;
    let steady = solve_steady_state(&build_chain(&kernel, cfg.battery))?;
    Ok(Solved {
        p_on: steady.p_on,
        throughput: throughput_from_pon(steady.p_on, cfg.transmit_prob),
        residual: steady.residual,
        kernel: Some(kernel),
        steady: Some(steady),
    })
}

/// Same battery and probabilities, but the distance resampled from `φ` every slot.
pub fn solve_iid(cfg: &NetworkConfig, kernel: &TransitionKernel) -> Result<SteadyState> {
    let phi = distance_stationary_vector(cfg)?;
    solve_steady_state(&build_chain(&iid_kernel(kernel, &phi), cfg.battery))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kernel: Option<TransitionKernel>,
    pub steady: Option<SteadyState>,
    pub charge: ChargeProbability,
    pub p_on: f64,
    pub throughput: f64,
    pub residual: f64,
    pub pon_lower_bound: f64,
    pub phi: DistanceStationaryVector,
    pub spectral: Option<SpectralSummary>,
    pub mean_intermeeting: Option<MeanIntermeeting>,
    pub arrival_rate: f64,
    pub infinite_battery_pon: f64,
    pub infinite_battery_throughput: f64,
    pub iid_pon: f64,
    pub iid_throughput: f64,
    pub bounds: ScalingBounds,
}

/// Kernel, chain, inter-meeting spectrum, limits and bounds for `cfg`.
pub fn analyze(cfg: &NetworkConfig) -> Result<Report> {
    let solved = solve(cfg)?;
    let charge = charge_probability(cfg);
    let phi = distance_stationary_vector(cfg)?;
    let bounds = scaling_bounds(cfg)?;
    let Some(kernel) = solved.kernel.clone() else {
        return Ok(Report {
            kernel: None,
            steady: None,
            charge,
            p_on: 0.0,
            throughput: 0.0,
            residual: 0.0,
            pon_lower_bound: 0.0,
            phi,
            spectral: None,
            mean_intermeeting: None,
            arrival_rate: 0.0,
            infinite_battery_pon: 0.0,
            infinite_battery_throughput: 0.0,
            iid_pon: 0.0,
            iid_throughput: 0.0,
            bounds,
        });
    };
    let inner = inner_kernel(&kernel);
    let spectral = spectral_decomposition(&inner, &departure_distribution(inner.rows()))?;
    let mean = mean_intermeeting(&spectral);
    let iid = solve_iid(cfg, &kernel)?;
    Ok(Report {
        charge,
        p_on: solved.p_on,
        throughput: solved.throughput,
        residual: solved.residual,
        pon_lower_bound: pon_lower_bound(&kernel, cfg),
        phi,
        spectral: Some(spectral),
        mean_intermeeting: Some(mean),
        arrival_rate: mean_arrival_rate(cfg, &kernel),
        infinite_battery_pon: infinite_battery_pon(cfg, &kernel),
        infinite_battery_throughput: infinite_battery_throughput(cfg, &kernel),
        iid_pon: iid.p_on,
        iid_throughput: throughput_from_pon(iid.p_on, cfg.transmit_prob),
        bounds,
        steady: solved.steady,
        kernel: Some(kernel),
    })
}
