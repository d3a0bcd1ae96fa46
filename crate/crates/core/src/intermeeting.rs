//! Inter-meeting time of a node and the charging regions.
//!
//! After leaving a charging region a node sits in distance state 1; the time
//! until it is back in state 0 has CCDF `Pr[T_I > t] = p0 P^{t−1} 1`, where
//! `P` is the distance kernel restricted to states `1..=M`.

use alloc::vec;
use alloc::vec::Vec;

use crate::kernel::TransitionKernel;
use crate::linalg::Matrix;
use crate::math::{abs, sqrt};
use crate::model::NetworkConfig;
use crate::{Error, Result};

/// Eigenvalues closer than this are treated as repeated.
pub const DEGENERATE_GAP: f64 = 1e-12;
const MEAN_TAIL: f64 = 1e-12;
const MEAN_MAX_TERMS: usize = 50_000_000;

/// The `M×M` block of the kernel for states `1..=M`.
pub fn inner_kernel(kernel: &TransitionKernel) -> Matrix {
    inner_block(&kernel.p)
}

pub fn inner_block(p: &Matrix) -> Matrix {
    let m = p.rows() - 1;
    assert!(m >= 1, "need at least one state outside the charging region");
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = p[(i + 1, j + 1)];
        }
    }
    out
}

/// Unit mass on the first annulus.
pub fn departure_distribution(m: usize) -> Vec<f64> {
    let mut p0 = vec![0.0; m];
    p0[0] = 1.0;
    p0
}

/// `p0 P^{t−1} 1` by repeated vector products.
pub fn ccdf_exact(p: &Matrix, p0: &[f64], t: usize) -> f64 {
    assert!(t >= 1);
    let mut x = p0.to_vec();
    for _ in 1..t {
        x = p.left_mul(&x);
    }
    x.iter().sum()
}

/// `Pr[T_I > t]` for `t = 1..=t_max`.
pub fn ccdf_table(p: &Matrix, p0: &[f64], t_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(t_max);
    let mut x = p0.to_vec();
    for t in 1..=t_max {
        if t > 1 {
            x = p.left_mul(&x);
        }
        out.push(x.iter().sum());
    }
    out
}

/// How the eigenvectors were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    /// Diagonal similarity to a symmetric tridiagonal matrix.
    Symmetrized,
    /// Inverse iteration on the unsymmetric matrix; a state was unreachable.
    InverseIteration,
    /// Repeated eigenvalues; the CCDF falls back to matrix powers.
    ExactPowers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    /// Descending eigenvalues `λ_1 ≥ … ≥ λ_M`.
    pub eigenvalues: Vec<f64>,
    /// `γ_i = (p0 · a_i)(b_i · 1)`.
    pub gamma: Vec<f64>,
    pub p0: Vec<f64>,
    pub spectral_radius: f64,
    pub method: EigenMethod,
    /// The inner kernel the summary describes.
    pub kernel: Matrix,
}

impl SpectralSummary {
    /// `Σ_i γ_i λ_i^{t−1}`, or exact powers when eigenvalues repeat.
    pub fn ccdf(&self, t: usize) -> f64 {
        assert!(t >= 1);
        if self.method == EigenMethod::ExactPowers {
            return ccdf_exact(&self.kernel, &self.p0, t);
        }
        self.eigenvalues
            .iter()
            .zip(&self.gamma)
            .map(|(l, g)| g * crate::math::powi(*l, t - 1))
            .sum()
    }

    /// Largest-eigenvalue tail `λ_1^t`.
    pub fn one_term(&self, t: usize) -> f64 {
        crate::math::powi(self.spectral_radius, t)
    }

    /// `true` if the eigenvectors needed the unsymmetric fallback.
    pub fn used_fallback(&self) -> bool {
        self.method != EigenMethod::Symmetrized
    }
}

/// Eigen-decomposition of the inner kernel started from `p0`.
pub fn spectral_decomposition(p: &Matrix, p0: &[f64]) -> Result<SpectralSummary> {
    let n = p.rows();
    assert!(p.is_square() && p0.len() == n);
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut reachable = true;
    for i in 0..n {
        diag[i] = p[(i, i)];
        if i + 1 < n {
            let prod = p[(i, i + 1)] * p[(i + 1, i)];
            if !(prod > 0.0) {
                reachable = false;
            }
            // the spectrum of a tridiagonal matrix depends only on these products
            off[i + 1] = sqrt(prod.max(0.0));
        }
    }
    let mut vecs = Matrix::identity(n);
    let mut values = diag;
    tql2(&mut values, &mut off, &mut vecs)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let spectral_radius = eigenvalues.iter().fold(0.0f64, |m, x| m.max(abs(*x)));

    let repeated = eigenvalues.windows(2).any(|w| abs(w[0] - w[1]) < DEGENERATE_GAP);
    let mut summary = SpectralSummary {
        eigenvalues,
        gamma: Vec::new(),
        p0: p0.to_vec(),
        spectral_radius,
        method: EigenMethod::ExactPowers,
        kernel: p.clone(),
    };
    if repeated {
        return Ok(summary);
    }

    if reachable {
        // D P D⁻¹ symmetric with δ_{i+1}² = δ_i² P_{i,i+1}/P_{i+1,i}
        let mut delta = vec![1.0; n];
        for i in 0..n.saturating_sub(1) {
            delta[i + 1] = delta[i] * sqrt(p[(i, i + 1)] / p[(i + 1, i)]);
        }
        summary.gamma = order
            .iter()
            .map(|&k| {
                let right: f64 = (0..n).map(|i| p0[i] * vecs[(i, k)] / delta[i]).sum();
                let left: f64 = (0..n).map(|i| vecs[(i, k)] * delta[i]).sum();
                right * left
            })
            .collect();
        summary.method = EigenMethod::Symmetrized;
    } else {
        let mut gamma = Vec::with_capacity(n);
        for &lambda in &summary.eigenvalues {
            let a = inverse_iteration(p, lambda, false)?;
            let b = inverse_iteration(p, lambda, true)?;
            let scale: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            if abs(scale) < 1e-300 {
                return Err(Error::SingularMatrix { context: "eigenvector pairing" });
            }
            let right: f64 = p0.iter().zip(&a).map(|(x, y)| x * y).sum();
            gamma.push(right * b.iter().sum::<f64>() / scale);
        }
        summary.gamma = gamma;
        summary.method = EigenMethod::InverseIteration;
    }
    Ok(summary)
}

// Right (or left, on the transpose) eigenvector for a known eigenvalue.
fn inverse_iteration(p: &Matrix, lambda: f64, left: bool) -> Result<Vec<f64>> {
    let n = p.rows();
    let base = if left { p.transpose() } else { p.clone() };
    let shift = lambda + 1e-10 * (1.0 + abs(lambda));
    let mut shifted = base;
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let lu = shifted.lu()?;
    let mut x = vec![1.0; n];
    for _ in 0..3 {
        x = lu.solve(&x);
        let norm = sqrt(x.iter().map(|v| v * v).sum());
        x.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(x)
}

/// Implicit QL on a symmetric tridiagonal matrix. `d` holds the diagonal,
/// `e[1..]` the off-diagonal; `z` accumulates the eigenvectors as columns.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut Matrix) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(abs(d[l]) + abs(e[l]));
        let mut m = l;
        while m < n {
            if abs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        let m = m.min(n - 1);
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::NoConvergence {
                        context: "tridiagonal QL",
                        iterations: 60,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = z[(k, i + 1)];
                        z[(k, i + 1)] = s * z[(k, i)] + c * h;
                        z[(k, i)] = c * z[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if abs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Mean inter-meeting time: `1/(1−λ_1)` and the summed exact CCDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanIntermeeting {
    pub approx: f64,
    pub exact: f64,
}

/// `E[T_I] = Σ_{t≥0} Pr[T_I > t]`, summed until the tail drops below 1e-12.
pub fn mean_intermeeting(summary: &SpectralSummary) -> MeanIntermeeting {
    let approx = mean_from_radius(summary.spectral_radius);
    let mut x = summary.p0.clone();
    let mut total = 1.0;
    for _ in 0..MEAN_MAX_TERMS {
        let tail: f64 = x.iter().sum();
        total += tail;
        if tail < MEAN_TAIL {
            break;
        }
        x = summary.kernel.left_mul(&x);
    }
    MeanIntermeeting {
        approx,
        exact: total,
    }
}

/// `1/(1−λ_1)`.
pub fn mean_from_radius(lambda: f64) -> f64 {
    1.0 / (1.0 - lambda)
}

/// Spectral radius for each speed, plus whether it never increases.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusTable {
    pub rows: Vec<(f64, f64)>,
    pub non_increasing: bool,
}

/// Evaluates `λ_1` on a speed grid, resolving `M` per speed when not fixed.
pub fn spectral_radius_vs_speed(cfg: &NetworkConfig, speeds: &[f64]) -> Result<RadiusTable> {
    let mut rows = Vec::with_capacity(speeds.len());
    for &v in speeds {
        let c = NetworkConfig {
            speed: v,
            ..cfg.clone()
        };
        let kernel = TransitionKernel::new(&c)?;
        let inner = inner_kernel(&kernel);
        let p0 = departure_distribution(inner.rows());
        let s = spectral_decomposition(&inner, &p0)?;
        rows.push((v, s.spectral_radius));
    }
    let non_increasing = rows.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    Ok(RadiusTable {
        rows,
        non_increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn birth_death(m: usize) -> Matrix {
        let mut p = Matrix::zeros(m, m);
        for i in 0..m {
            let up = if i + 1 < m { 0.3 } else { 0.0 };
            let down = 0.2 + 0.01 * i as f64;
            if i + 1 < m {
                p[(i, i + 1)] = up;
            }
            if i > 0 {
                p[(i, i - 1)] = down;
            }
            p[(i, i)] = 1.0 - up - down;
        }
        p
    }

    #[test]
    fn ccdf_first_steps() {
        let p = birth_death(4);
        let p0 = departure_distribution(4);
        assert_eq!(ccdf_exact(&p, &p0, 1), 1.0);
        assert!((ccdf_exact(&p, &p0, 2) - (1.0 - 0.2)).abs() < 1e-15);
        let table = ccdf_table(&p, &p0, 50);
        assert!(table.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn spectral_matches_powers() {
        for m in [1usize, 2, 5, 12] {
            let p = birth_death(m);
            let p0 = departure_distribution(m);
            let s = spectral_decomposition(&p, &p0).unwrap();
            assert_eq!(s.method, EigenMethod::Symmetrized);
            assert!(s.spectral_radius < 1.0);
            assert!((s.gamma.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let exact = ccdf_table(&p, &p0, 500);
            for (t, e) in exact.iter().enumerate() {
                assert!((s.ccdf(t + 1) - e).abs() < 1e-10, "m={m} t={}", t + 1);
            }
        }
    }

    #[test]
    fn single_state() {
        let p = Matrix::from_rows(1, 1, vec![0.93]);
        let s = spectral_decomposition(&p, &[1.0]).unwrap();
        assert_eq!(s.eigenvalues, vec![0.93]);
        assert!((s.gamma[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unreachable_state_uses_fallback() {
        let mut p = birth_death(4);
        p[(2, 1)] = 0.0;
        p[(2, 2)] += 0.21;
        let p0 = departure_distribution(4);
        let s = spectral_decomposition(&p, &p0).unwrap();
        assert!(s.used_fallback());
        let exact = ccdf_table(&p, &p0, 200);
        for (t, e) in exact.iter().enumerate() {
            assert!((s.ccdf(t + 1) - e).abs() < 1e-8);
        }
    }

    #[test]
    fn mean_matches_fundamental_matrix() {
        let p = birth_death(6);
        let p0 = departure_distribution(6);
        let s = spectral_decomposition(&p, &p0).unwrap();
        let fundamental = Matrix::identity(6).sub(&p).inverse().unwrap();
        let want = 1.0 + fundamental.left_mul(&p0).iter().sum::<f64>();
        let got = mean_intermeeting(&s);
        assert!((got.exact - want).abs() < 1e-8 * want);
    }

    #[test]
    fn reference_means() {
        assert!((mean_from_radius(0.9985) - 666.67).abs() < 0.005);
        assert!((mean_from_radius(0.9903) - 103.09).abs() < 0.005);
    }

    proptest::proptest! {
        #[test]
        fn random_tridiagonal_spectra(
            m in 1usize..10,
            ups in proptest::collection::vec(0.01f64..0.5, 10),
            downs in proptest::collection::vec(0.01f64..0.5, 10),
        ) {
            let mut p = Matrix::zeros(m, m);
            for i in 0..m {
                let up = if i + 1 < m { ups[i] } else { 0.0 };
                let down = downs[i];
                if i + 1 < m { p[(i, i + 1)] = up; }
                if i > 0 { p[(i, i - 1)] = down; }
                p[(i, i)] = 1.0 - up - down;
            }
            let p0 = departure_distribution(m);
            let s = spectral_decomposition(&p, &p0).unwrap();
            proptest::prop_assert!(s.spectral_radius < 1.0);
            let exact = ccdf_table(&p, &p0, 100);
            for (t, e) in exact.iter().enumerate() {
                proptest::prop_assert!((s.ccdf(t + 1) - e).abs() < 1e-9);
            }
        }
    }
}
