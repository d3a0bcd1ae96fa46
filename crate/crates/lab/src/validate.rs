//! Analytic model against one simulated run, check by check.

use serde::Serialize;
use wcs_core::analysis::Report;
use wcs_core::sim::{empirical_kernel, SimStats, MIN_ROW_VISITS};

use crate::error::LabError;

/// Pass limits for [`compare`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Largest per-row total variation between kernels.
    pub tv: f64,
    /// Standard errors allowed for `p_t` and `p_c`.
    pub z: f64,
    /// Absolute gap in `P_on`.
    pub pon: f64,
    /// Kolmogorov–Smirnov distance between inter-meeting CCDFs.
    pub ks: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tv: 0.02,
            z: 3.0,
            pon: 0.01,
            ks: 0.02,
        }
    }
}

impl Tolerances {
    /// Applies `key=value` overrides with keys `tv`, `z`, `pon`, `ks`.
    pub fn with_overrides(mut self, overrides: &[String]) -> Result<Tolerances, LabError> {
        for text in overrides {
            let bad = |reason: &str| LabError::Usage(format!("--tolerance {text}: {reason}"));
            let (key, value) = text.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let value: f64 = value.trim().parse().map_err(|_| bad("value is not a number"))?;
            if !(value >= 0.0) {
                return Err(bad("value must be non-negative"));
            }
            match key.trim() {
                "tv" => self.tv = value,
                "z" => self.z = value,
                "pon" => self.pon = value,
                "ks" => self.ks = value,
                _ => return Err(bad("unknown key; use tv, z, pon or ks")),
            }
        }
        Ok(self)
    }
}

/// One comparison. `statistic ≤ limit` passes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub analytic: f64,
    pub measured: f64,
    pub statistic: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, analytic: f64, measured: f64, statistic: f64, limit: f64) -> Check {
        Check {
            name,
            analytic,
            measured,
            statistic,
            limit,
            pass: statistic <= limit,
        }
    }
}

/// `sup_t |Pr̂[T > t] − ccdf(t)|` over `t ≥ 1`, up to the largest sample.
pub fn ks_distance(samples: &[u32], ccdf: impl Fn(usize) -> f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let top = *sorted.last().unwrap() as usize;
    let mut at_most = 0;
    let mut worst = 0.0f64;
    for t in 1..=top {
        while at_most < sorted.len() && sorted[at_most] as usize <= t {
            at_most += 1;
        }
        let empirical = (sorted.len() - at_most) as f64 / n;
        worst = worst.max((empirical - ccdf(t)).abs());
    }
    worst
}

/// Kernel rows, `p_t`, `p_c`, `P_on` and the inter-meeting CCDF.
pub fn compare(report: &Report, stats: &SimStats, tol: &Tolerances) -> Vec<Check> {
    let est = stats.estimates();
    let mut checks = Vec::new();
    if let Some(kernel) = &report.kernel {
        let empirical = empirical_kernel(stats, MIN_ROW_VISITS);
        let tv = empirical
            .total_variation(&kernel.p)
            .into_iter()
            .flatten()
            .fold(f64::NAN, f64::max);
        checks.push(Check::new("kernel_row_tv", f64::NAN, f64::NAN, tv, tol.tv));
        checks.push(Check::new(
            "p_t",
            kernel.p_t,
            est.p_t.value,
            (kernel.p_t - est.p_t.value).abs(),
            tol.z * est.p_t.std_error,
        ));
        checks.push(Check::new(
            "p_c",
            kernel.p_c,
            est.p_c.value,
            (kernel.p_c - est.p_c.value).abs(),
            tol.z * est.p_c.std_error,
        ));
    }
    checks.push(Check::new(
        "p_on",
        report.p_on,
        est.p_on.value,
        (report.p_on - est.p_on.value).abs(),
        tol.pon,
    ));
    if let Some(spectral) = &report.spectral {
        let ks = ks_distance(&stats.intermeeting, |t| spectral.ccdf(t));
        checks.push(Check::new(
            "intermeeting_ks",
            report.mean_intermeeting.map_or(f64::NAN, |m| m.exact),
            est.mean_intermeeting,
            ks,
            tol.ks,
        ));
    }
    checks
}

/// Fixed-width text rendering of `checks`.
pub fn render(checks: &[Check]) -> String {
    let mut out = format!(
        "{:<16} {:>12} {:>12} {:>12} {:>12}  result\n",
        "check", "analytic", "measured", "statistic", "limit"
    );
    for c in checks {
        out.push_str(&format!(
            "{:<16} {:>12.6} {:>12.6} {:>12.6} {:>12.6}  {}\n",
            c.name,
            c.analytic,
            c.measured,
            c.statistic,
            c.limit,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}
