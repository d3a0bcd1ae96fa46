//! One-parameter sweeps evaluated in parallel, reported in grid order.

use rayon::prelude::*;
use wcs_core::analysis::analyze;
use wcs_core::sim::{run, SimOptions};
use wcs_core::NetworkConfig;

use crate::error::LabError;
use crate::output::{real, Table};

/// Swept field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Speed,
    Battery,
    Nodes,
    Stations,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<SweepParam, LabError> {
        match name {
            "v" | "speed" => Ok(SweepParam::Speed),
            "L" | "battery" => Ok(SweepParam::Battery),
            "n" | "nodes" => Ok(SweepParam::Nodes),
            "m" | "stations" => Ok(SweepParam::Stations),
            _ => Err(LabError::Usage(format!("cannot sweep `{name}`; use v, L, n or m"))),
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            SweepParam::Speed => "v",
            SweepParam::Battery => "L",
            SweepParam::Nodes => "n",
            SweepParam::Stations => "m",
        }
    }

    fn is_count(self) -> bool {
        self != SweepParam::Speed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub base: NetworkConfig,
    /// When sweeping `n`, also set `m = round(n · ratio)`.
    pub stations_per_node: Option<f64>,
    /// Monte Carlo columns, if requested.
    pub simulate: Option<SimOptions>,
}

/// Grid `a,b,c` or `start:stop:step` (inclusive of `stop` up to rounding).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, LabError> {
    let bad = |reason: &str| LabError::Usage(format!("grid `{text}`: {reason}"));
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let values = if let [start, stop, step] = text.split(':').collect::<Vec<_>>()[..] {
        let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
        if !(step > 0.0) {
            return Err(bad("step must be positive"));
        }
        let count = ((stop - start) / step + 1e-9).floor();
        if !(count >= 0.0 && count < 1e6) {
            return Err(bad("empty or oversized range"));
        }
        (0..=count as usize).map(|i| start + i as f64 * step).collect()
    } else {
        text.split(',').map(number).collect::<Result<Vec<_>, _>>()?
    };
    Ok(values)
}

impl SweepSpec {
    pub fn check(&self) -> Result<(), LabError> {
        if self.values.is_empty() {
            return Err(LabError::Usage("sweep grid is empty".into()));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::Usage("sweep grid must be strictly increasing".into()));
        }
        if self.param.is_count() && self.values.iter().any(|&x| x < 0.0 || x.fract() != 0.0) {
            return Err(LabError::Usage(format!(
                "sweep over `{}` needs non-negative integers",
                self.param.key()
            )));
        }
        Ok(())
    }

    /// Base config with the swept field set to `value`.
    pub fn point(&self, value: f64) -> NetworkConfig {
        let mut cfg = self.base.clone();
        match self.param {
            SweepParam::Speed => cfg.speed = value,
            SweepParam::Battery => cfg.battery = value as usize,
            SweepParam::Nodes => {
                cfg.nodes = value as usize;
                if let Some(r) = self.stations_per_node {
                    cfg.stations = (value * r).round() as usize;
                }
            }
            SweepParam::Stations => cfg.stations = value as usize,
        }
        cfg
    }
}

/// Everything reported for one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub throughput: f64,
    pub p_on: f64,
    pub spectral_radius: f64,
    pub iid_throughput: f64,
    pub limit_throughput: f64,
    pub lower: f64,
    pub upper: f64,
    pub residual: f64,
    /// `(P̂_on, SE, Λ̂, SE)` when simulated.
    pub simulated: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub result: Result<PointResult, String>,
}

fn evaluate(cfg: &NetworkConfig, simulate: Option<&SimOptions>) -> Result<PointResult, String> {
    let report = analyze(cfg).map_err(|e| e.to_string())?;
    let simulated = match simulate {
        Some(opts) => {
            let e = run(cfg, opts).map_err(|e| e.to_string())?.estimates();
            Some([e.p_on.value, e.p_on.std_error, e.throughput.value, e.throughput.std_error])
        }
        None => None,
    };
    Ok(PointResult {
        throughput: report.throughput,
        p_on: report.p_on,
        spectral_radius: report.spectral.as_ref().map_or(f64::NAN, |s| s.spectral_radius),
        iid_throughput: report.iid_throughput,
        limit_throughput: report.infinite_battery_throughput,
        lower: report.bounds.lower,
        upper: report.bounds.upper,
        residual: report.residual,
        simulated,
    })
}

/// Evaluates every grid point on up to `jobs` threads; rows follow the grid.
pub fn run_sweep(plan: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>, LabError> {
    plan.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| LabError::Usage(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        plan.values
            .par_iter()
            .enumerate()
            .map(|(index, &value)| {
                let result = evaluate(&plan.point(value), plan.simulate.as_ref());
                if let Err(e) = &result {
                    log::warn!("{} = {value}: {e}", plan.param.key());
                }
                SweepRow { index, value, result }
            })
            .collect()
    });
    Ok(rows)
}

/// CSV with one row per grid point; failed points leave numbers empty and
/// fill `error`.
pub fn to_csv(plan: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut header = vec![
        "index",
        plan.param.key(),
        "Lambda",
        "P_on",
        "lambda1",
        "Lambda_iid",
        "Lambda_limit",
        "Lambda_lower",
        "Lambda_upper",
        "residual",
    ];
    if plan.simulate.is_some() {
        header.extend(["mc_P_on", "mc_P_on_se", "mc_Lambda", "mc_Lambda_se"]);
    }
    header.push("error");
    let width = header.len();
    let mut table = Table::new(&header);
    for row in rows {
        let value = if plan.param.is_count() {
            (row.value as u64).to_string()
        } else {
            real(row.value)
        };
        let mut fields = vec![row.index.to_string(), value];
        match &row.result {
            Ok(r) => {
                fields.extend(
                    [
                        r.throughput,
                        r.p_on,
                        r.spectral_radius,
                        r.iid_throughput,
                        r.limit_throughput,
                        r.lower,
                        r.upper,
                        r.residual,
                    ]
                    .map(real),
                );
                if let Some(sim) = r.simulated {
                    fields.extend(sim.map(real));
                }
                fields.push(String::new());
            }
            Err(e) => {
                fields.resize(width - 1, String::new());
                fields.push(e.clone());
            }
        }
        table.row(fields);
    }
    table.finish()
}
