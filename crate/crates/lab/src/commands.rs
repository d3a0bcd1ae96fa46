//! Subcommand bodies. Each returns what should reach stdout and the
//! `--out` file, so the binary stays a thin shell around them.

use rayon::prelude::*;
use serde::Serialize;
use wcs_core::analysis::{analyze, solve, Report};
use wcs_core::intermeeting::{ccdf_table, mean_intermeeting};
use wcs_core::kernel::charge_probability;
use wcs_core::sim::{run, SimOptions, SimStats};
use wcs_core::NetworkConfig;

use crate::error::LabError;
use crate::output::{json, real, Table};
use crate::sweep::{run_sweep, to_csv, SweepSpec};
use crate::validate::{compare, render, Tolerances};

/// Gap above which the closed-form charge probability is reported.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-9;

/// Command result: text for stdout, an optional CSV body and the verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub csv: Option<String>,
    pub success: bool,
}

impl Output {
    fn ok(stdout: String, csv: Option<String>) -> Output {
        Output {
            stdout,
            csv,
            success: true,
        }
    }
}

fn warn_closed_form(cfg: &NetworkConfig) {
    if cfg.stations == 0 {
        return;
    }
    let c = charge_probability(cfg);
    let gap = (c.value - c.product_form).abs();
    if !(gap <= CLOSED_FORM_TOLERANCE) {
        log::warn!(
            "closed-form charge probability {:.12} differs from the selection expectation {:.12}",
            c.product_form,
            c.value
        );
    }
}

#[derive(Serialize)]
struct SolveSummary {
    #[serde(rename = "P_on")]
    p_on: f64,
    #[serde(rename = "Lambda")]
    throughput: f64,
    residual: f64,
    p_t: Option<f64>,
    p_c: Option<f64>,
    #[serde(rename = "M")]
    resolution: Option<usize>,
    #[serde(rename = "L")]
    battery: usize,
}

pub fn solve_cmd(cfg: &NetworkConfig) -> Result<Output, LabError> {
    warn_closed_form(cfg);
    let s = solve(cfg)?;
    let summary = SolveSummary {
        p_on: s.p_on,
        throughput: s.throughput,
        residual: s.residual,
        p_t: s.kernel.as_ref().map(|k| k.p_t),
        p_c: s.kernel.as_ref().map(|k| k.p_c),
        resolution: s.kernel.as_ref().map(|k| k.resolution()),
        battery: cfg.battery,
    };
    let csv = s.steady.as_ref().map(|ss| {
        let mut t = Table::new(&["level", "distance", "probability"]);
        for k in 0..ss.levels() {
            for (d, p) in ss.level(k).iter().enumerate() {
                t.row([k.to_string(), d.to_string(), real(*p)]);
            }
        }
        t.finish()
    });
    Ok(Output::ok(json(&summary), csv))
}

#[derive(Serialize)]
struct KernelSummary {
    #[serde(rename = "M")]
    resolution: usize,
    p_t: f64,
    p_c: f64,
    selection: f64,
    p_c_occupancy_form: f64,
    p_c_product_form: f64,
    beta: Vec<f64>,
    phi: Vec<f64>,
    #[serde(rename = "P")]
    matrix: Vec<Vec<f64>>,
}

pub fn kernel_cmd(cfg: &NetworkConfig) -> Result<Output, LabError> {
    warn_closed_form(cfg);
    let kernel = wcs_core::kernel::TransitionKernel::new(cfg)?;
    let charge = charge_probability(cfg);
    let phi = wcs_core::asymptotics::distance_stationary_vector(cfg)?;
    let n = kernel.p.rows();
    let summary = KernelSummary {
        resolution: kernel.resolution(),
        p_t: kernel.p_t,
        p_c: kernel.p_c,
        selection: charge.selection,
        p_c_occupancy_form: charge.occupancy_form,
        p_c_product_form: charge.product_form,
        beta: kernel.beta.clone(),
        phi: phi.phi,
        matrix: (0..n).map(|i| kernel.p.row(i).to_vec()).collect(),
    };
    let mut t = Table::new(&["from", "to", "probability"]);
    for i in 0..n {
        for j in 0..n {
            t.row([i.to_string(), j.to_string(), real(kernel.p[(i, j)])]);
        }
    }
    Ok(Output::ok(json(&summary), Some(t.finish())))
}

#[derive(Serialize)]
struct IntermeetingSummary {
    #[serde(rename = "M")]
    resolution: usize,
    spectral_radius: f64,
    eigenvalues: Vec<f64>,
    gamma: Vec<f64>,
    method: String,
    mean_approx: f64,
    mean_exact: f64,
}

fn report(cfg: &NetworkConfig) -> Result<Report, LabError> {
    warn_closed_form(cfg);
    let r = analyze(cfg)?;
    if r.kernel.is_none() {
        return Err(wcs_core::Error::NoStations.into());
    }
    Ok(r)
}

pub fn intermeeting_cmd(cfg: &NetworkConfig, horizon: usize) -> Result<Output, LabError> {
    let r = report(cfg)?;
    let s = r.spectral.expect("spectrum with stations");
    let mean = mean_intermeeting(&s);
    let summary = IntermeetingSummary {
        resolution: r.kernel.as_ref().map_or(0, |k| k.resolution()),
        spectral_radius: s.spectral_radius,
        eigenvalues: s.eigenvalues.clone(),
        gamma: s.gamma.clone(),
        method: format!("{:?}", s.method),
        mean_approx: mean.approx,
        mean_exact: mean.exact,
    };
    let exact = ccdf_table(&s.kernel, &s.p0, horizon);
    let mut t = Table::new(&["t", "exact", "spectral", "one_term"]);
    for (t_i, e) in (1..).zip(&exact) {
        t.row([t_i.to_string(), real(*e), real(s.ccdf(t_i)), real(s.one_term(t_i))]);
    }
    Ok(Output::ok(json(&summary), Some(t.finish())))
}

#[derive(Serialize)]
struct LimitsSummary {
    #[serde(rename = "Lambda")]
    throughput: f64,
    arrival_rate: f64,
    infinite_battery_p_on: f64,
    #[serde(rename = "infinite_battery_Lambda")]
    infinite_battery_throughput: f64,
    iid_p_on: f64,
    #[serde(rename = "iid_Lambda")]
    iid_throughput: f64,
    spectral_radius: f64,
    mean_intermeeting_approx: f64,
    mean_intermeeting_exact: f64,
    phi: Vec<f64>,
}

pub fn limits_cmd(cfg: &NetworkConfig) -> Result<Output, LabError> {
    let r = report(cfg)?;
    let mean = r.mean_intermeeting.expect("mean with stations");
    let summary = LimitsSummary {
        throughput: r.throughput,
        arrival_rate: r.arrival_rate,
        infinite_battery_p_on: r.infinite_battery_pon,
        infinite_battery_throughput: r.infinite_battery_throughput,
        iid_p_on: r.iid_pon,
        iid_throughput: r.iid_throughput,
        spectral_radius: r.spectral.as_ref().map_or(f64::NAN, |s| s.spectral_radius),
        mean_intermeeting_approx: mean.approx,
        mean_intermeeting_exact: mean.exact,
        phi: r.phi.phi.clone(),
    };
    Ok(Output::ok(json(&summary), None))
}

#[derive(Serialize)]
struct BoundsSummary {
    a: f64,
    c1: f64,
    c2: f64,
    ratio: f64,
    p_on_lower: f64,
    p_on_upper: f64,
    #[serde(rename = "Lambda_lower")]
    lower: f64,
    #[serde(rename = "Lambda_upper")]
    upper: f64,
    #[serde(rename = "Lambda")]
    throughput: f64,
    #[serde(rename = "P_on")]
    p_on: f64,
    p_on_lower_bound: f64,
}

pub fn bounds_cmd(cfg: &NetworkConfig) -> Result<Output, LabError> {
    warn_closed_form(cfg);
    let r = analyze(cfg)?;
    let b = r.bounds;
    let summary = BoundsSummary {
        a: b.a,
        c1: b.c1,
        c2: b.c2,
        ratio: b.ratio,
        p_on_lower: b.pon_lower,
        p_on_upper: b.pon_upper,
        lower: b.lower,
        upper: b.upper,
        throughput: r.throughput,
        p_on: r.p_on,
        p_on_lower_bound: r.pon_lower_bound,
    };
    Ok(Output::ok(json(&summary), None))
}

/// Measurement window for `simulate`, `validate` and sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunLength {
    pub slots: u64,
    /// `None` picks ten analytic mean inter-meeting times.
    pub warmup: Option<u64>,
}

/// Ten exact mean inter-meeting times, or 1000 slots when there is no spectrum.
pub fn default_warmup(cfg: &NetworkConfig) -> u64 {
    analyze(cfg)
        .ok()
        .and_then(|r| r.mean_intermeeting)
        .map_or(1000, |m| (10.0 * m.exact).ceil() as u64)
}

pub fn sim_options(cfg: &NetworkConfig, length: RunLength) -> Result<SimOptions, LabError> {
    let warmup = length.warmup.unwrap_or_else(|| default_warmup(cfg));
    if length.slots <= warmup {
        return Err(LabError::Usage(format!(
            "--slots ({}) must exceed the warmup ({warmup})",
            length.slots
        )));
    }
    Ok(SimOptions::new(length.slots, warmup))
}

#[derive(Serialize)]
struct Estimate {
    value: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct SimulateSummary {
    seed: u64,
    replications: usize,
    slots: u64,
    warmup: u64,
    #[serde(rename = "P_on")]
    p_on: Estimate,
    #[serde(rename = "P_on_at_decision")]
    p_on_at_decision: Estimate,
    p_t: Estimate,
    transmit_opportunity: Estimate,
    p_c: Estimate,
    inflow: Estimate,
    #[serde(rename = "Lambda")]
    throughput: Estimate,
    intermeeting_samples: usize,
    mean_intermeeting: f64,
    max_energy_seen: usize,
}

/// Simulated run plus its options. Replication `i` uses seed `seed + i`;
/// replications run on up to `jobs` threads and are pooled.
pub fn simulate(
    cfg: &NetworkConfig,
    length: RunLength,
    replications: usize,
    jobs: usize,
) -> Result<(SimOptions, SimStats), LabError> {
    let mut opts = sim_options(cfg, length)?;
    opts.record_series = replications == 1;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| LabError::Usage(format!("thread pool: {e}")))?;
    let runs: Vec<SimStats> = pool.install(|| {
        (0..replications.max(1) as u64)
            .into_par_iter()
            .map(|i| {
                let c = NetworkConfig {
                    seed: cfg.seed.wrapping_add(i),
                    ..cfg.clone()
                };
                run(&c, &opts)
            })
            .collect::<Result<_, _>>()
    })?;
    let stats = runs[1..].iter().fold(runs[0].clone(), |acc, s| acc.merge(s));
    Ok((opts, stats))
}

pub fn simulate_cmd(
    cfg: &NetworkConfig,
    length: RunLength,
    replications: usize,
    jobs: usize,
) -> Result<(Output, SimStats), LabError> {
    let (opts, stats) = simulate(cfg, length, replications, jobs)?;
    let e = stats.estimates();
    let est = |m: wcs_core::sim::Measured| Estimate {
        value: m.value,
        std_error: m.std_error,
    };
    let summary = SimulateSummary {
        seed: cfg.seed,
        replications: replications.max(1),
        slots: opts.slots,
        warmup: opts.warmup,
        p_on: est(e.p_on),
        p_on_at_decision: est(e.p_on_at_decision),
        p_t: est(e.p_t),
        transmit_opportunity: est(e.transmit_opportunity),
        p_c: est(e.p_c),
        inflow: est(e.inflow),
        throughput: est(e.throughput),
        intermeeting_samples: stats.intermeeting.len(),
        mean_intermeeting: e.mean_intermeeting,
        max_energy_seen: stats.max_energy_seen,
    };
    let mut t = Table::new(&["slot", "active_fraction"]);
    // the per-slot series exists for a single replication only
    for (i, x) in stats.active_series.iter().enumerate() {
        t.row([(opts.warmup + 1 + i as u64).to_string(), real(*x)]);
    }
    Ok((Output::ok(json(&summary), Some(t.finish())), stats))
}

/// One inter-meeting sample per line.
pub fn samples_text(stats: &SimStats) -> String {
    let mut s = String::with_capacity(stats.intermeeting.len() * 4);
    for x in &stats.intermeeting {
        s.push_str(&x.to_string());
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct SweepSummary {
    param: &'static str,
    points: usize,
    failed: Vec<usize>,
}

pub fn sweep_cmd(plan: &SweepSpec, jobs: usize) -> Result<Output, LabError> {
    warn_closed_form(&plan.base);
    let rows = run_sweep(plan, jobs)?;
    let summary = SweepSummary {
        param: plan.param.key(),
        points: rows.len(),
        failed: rows.iter().filter(|r| r.result.is_err()).map(|r| r.index).collect(),
    };
    Ok(Output::ok(json(&summary), Some(to_csv(plan, &rows))))
}

pub fn validate_cmd(cfg: &NetworkConfig, length: RunLength, tol: &Tolerances) -> Result<Output, LabError> {
    let r = report(cfg)?;
    let (_, stats) = simulate(cfg, length, 1, 1)?;
    let checks = compare(&r, &stats, tol);
    let success = checks.iter().all(|c| c.pass);
    let mut t = Table::new(&["check", "analytic", "measured", "statistic", "limit", "pass"]);
    for c in &checks {
        t.row([
            c.name.to_string(),
            real(c.analytic),
            real(c.measured),
            real(c.statistic),
            real(c.limit),
            c.pass.to_string(),
        ]);
    }
    Ok(Output {
        stdout: render(&checks),
        csv: Some(t.finish()),
        success,
    })
}
