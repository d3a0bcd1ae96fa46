//! Matrix-geometric solution for single-unit charging (`E = 1`), where the
//! chain is a finite quasi-birth-death process:
//! `π_k = v₁ R₁^k + v₂ R₂^{L−k}`.

use alloc::vec;
use alloc::vec::Vec;

use crate::chain::{ChainModel, SteadyState};
use crate::linalg::{left_null_vector, Matrix};
use crate::math::abs;
use crate::{Error, Result};

/// Iteration budget and tolerance for the spectral radius of `R₁`.
pub const ETA_MAX_ITERATIONS: usize = 10_000;
pub const ETA_TOLERANCE: f64 = 1e-12;

/// How well the truncated series for `v₂` reproduces the exact boundary mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannDiagnostics {
    /// `v₂ 1` from the solved boundary system.
    pub v2_mass: f64,
    /// `φ (I − p_t B₀⁻¹)⁻¹ 1`.
    pub v2_formula_mass: f64,
    /// `(p_c/p_t) φ₀`, the one-term approximation.
    pub approximation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QbdSolution {
    pub state: SteadyState,
    pub eta: f64,
    pub eta_iterations: usize,
    pub r1: Matrix,
    pub r2: Matrix,
    /// First-passage matrix used for `R₂`; only its first column is nonzero.
    pub g: Matrix,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub neumann: NeumannDiagnostics,
}

/// Minimal fixed point of `η = ρ(−A₂ (A₁ + η A₀)⁻¹)`.
fn solve_r1(model: &ChainModel) -> Result<(Matrix, f64, usize)> {
    let up = &model.up[0];
    let mut eta = 0.0;
    for it in 1..=ETA_MAX_ITERATIONS {
        let r1 = r1_for(model, up, eta)?;
        // only the first row is nonzero, so the spectral radius is the corner entry
        let next = abs(r1[(0, 0)]);
        if abs(next - eta) <= ETA_TOLERANCE {
            let r1 = r1_for(model, up, next)?;
            return Ok((r1, next, it));
        }
        eta = next;
    }
    Err(Error::NoConvergence {
        context: "spectral radius of R1",
        iterations: ETA_MAX_ITERATIONS,
    })
}

fn r1_for(model: &ChainModel, up: &Matrix, eta: f64) -> Result<Matrix> {
    let m = model.a1.add(&model.a0.scaled(eta));
    Ok(up.mul(&m.inverse()?).scaled(-1.0))
}

fn power_sum(r: &Matrix, terms: usize) -> Matrix {
    let mut acc = Matrix::zeros(r.rows(), r.cols());
    let mut p = Matrix::identity(r.rows());
    for _ in 0..terms {
        acc.add_assign(&p);
        p = p.mul(r);
    }
    acc
}

/// Solves the chain through its matrix-geometric form.
pub fn solve_qbd_matrix_geometric(model: &ChainModel) -> Result<QbdSolution> {
    if model.max_units() != 1 {
        return Err(Error::NotQuasiBirthDeath {
            max_units: model.max_units(),
        });
    }
    let w = model.width();
    let l = model.battery;
    let (a0, a1, a2, b0) = (&model.a0, &model.a1, &model.up[0], &model.b0);

    let (r1, eta, eta_iterations) = solve_r1(model)?;
    // G shares the spectrum of R1; with an upward drift (η = 1) its first
    // column is all ones
    let col = a1.add(&a0.scaled(eta)).inverse()?;
    let p_c = a2[(0, 0)];
    let mut g = Matrix::zeros(w, w);
    for i in 0..w {
        g[(i, 0)] = -p_c * col[(i, 0)];
    }
    let r2 = a0
        .mul(&a1.add(&a0.mul(&g)).inverse()?)
        .scaled(-1.0);

    let r1_pow = r1.pow(l - 1);
    let r2_pow = r2.pow(l - 1);
    let k11 = b0.add(&r1.mul(a0));
    let k12 = r1_pow.mul(&a2.add(&r1.mul(&a1.add(a2))));
    let k21 = r2_pow.mul(&r2.mul(b0).add(a0));
    let k22 = a1.add(a2).add(&r2.mul(a2));
    let n = 2 * w;
    let mut k = Matrix::zeros(n, n);
    for i in 0..w {
        for j in 0..w {
            k[(i, j)] = k11[(i, j)];
            k[(i, w + j)] = k12[(i, j)];
            k[(w + i, j)] = k21[(i, j)];
            k[(w + i, w + j)] = k22[(i, j)];
        }
    }
    let mass1 = power_sum(&r1, l + 1).right_mul(&vec![1.0; w]);
    let mass2 = power_sum(&r2, l + 1).right_mul(&vec![1.0; w]);
    let norm: Vec<f64> = mass1.into_iter().chain(mass2).collect();

    // one boundary equation is redundant; trade it for the normalization
    let mut x = None;
    for c in (0..n).rev() {
        let mut sys = k.clone();
        for (i, &v) in norm.iter().enumerate() {
            sys[(i, c)] = v;
        }
        if let Ok(lu) = sys.lu() {
            let mut rhs = vec![0.0; n];
            rhs[c] = 1.0;
            x = Some(lu.solve_left(&rhs));
            break;
        }
    }
    let x = x.ok_or(Error::SingularMatrix {
        context: "matrix-geometric boundary system",
    })?;
    let (v1, v2) = (x[..w].to_vec(), x[w..].to_vec());

    let mut pi = vec![0.0; (l + 1) * w];
    let mut left = v1.clone();
    let mut right = v2.clone();
    // π_k = v₁R₁^k + v₂R₂^{L−k}: sweep the two geometric terms in opposite directions
    let mut first = vec![vec![0.0; w]; l + 1];
    for (kk, slot) in first.iter_mut().enumerate() {
        if kk > 0 {
            left = r1.left_mul(&left);
        }
        slot.copy_from_slice(&left);
    }
    for kk in (0..=l).rev() {
        if kk < l {
            right = r2.left_mul(&right);
        }
        for j in 0..w {
            pi[kk * w + j] = first[kk][j] + right[j];
        }
    }
    for x in pi.iter_mut() {
        if *x < 0.0 && *x > -1e-13 {
            *x = 0.0;
        }
    }
    let state = SteadyState::from_pi(model, pi);

    let mut dist = b0.clone();
    dist.add_assign(a2);
    let phi = left_null_vector(&dist)?;
    let p_t = a0[(0, 0)];
    let v2_formula_mass = if p_t > 0.0 {
        let m = Matrix::identity(w).sub(&b0.inverse()?.scaled(p_t));
        m.lu()?.solve_left(&phi).iter().sum()
    } else {
        f64::NAN
    };
    let neumann = NeumannDiagnostics {
        v2_mass: v2.iter().sum(),
        v2_formula_mass,
        approximation: if p_t > 0.0 { p_c / p_t * phi[0] } else { f64::INFINITY },
    };
    Ok(QbdSolution {
        state,
        eta,
        eta_iterations,
        r1,
        r2,
        g,
        v1,
        v2,
        neumann,
    })
}
