//! The energy × distance chain: block generator, steady state, active
//! probability and throughput.
//!
//! Levels are energy units `0..=L`; each level holds the `M+1` distance
//! states. Transmission drains one unit (`A0 = p_t I`), a charge of `k` units
//! lifts a node at distance state 0 by `k` levels with rate `p_c β(k)`, and
//! charges that would overflow the battery are folded into level `L`.

use alloc::vec;
use alloc::vec::Vec;

use crate::kernel::TransitionKernel;
use crate::linalg::{left_null_vector, Matrix};
use crate::math::{abs, exp, powi, PI};
use crate::model::NetworkConfig;
use crate::{Error, Result};

/// Block description of the generator `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    /// Diagonal block at level 0.
    pub b0: Matrix,
    /// Down block, `p_t I`.
    pub a0: Matrix,
    /// Interior diagonal block, `B0 − A0`.
    pub a1: Matrix,
    /// `up[k-1]` is the block lifting a node by `k` levels.
    pub up: Vec<Matrix>,
    /// Battery capacity `L`; levels run `0..=L`.
    pub battery: usize,
}

/// Assembles the blocks from a kernel.
pub fn build_chain(kernel: &TransitionKernel, battery: usize) -> ChainModel {
    assert!(battery >= 1, "battery must hold at least one unit");
    let n = kernel.p.rows();
    let mut b0 = Matrix::zeros(n, n);
    for i in 0..n {
        let mut out = 0.0;
        for j in 0..n {
            if i != j {
                b0[(i, j)] = kernel.p[(i, j)];
                out += kernel.p[(i, j)];
            }
        }
        b0[(i, i)] = -out;
    }
    b0[(0, 0)] -= kernel.p_c;
    let a0 = Matrix::identity(n).scaled(kernel.p_t);
    let a1 = b0.sub(&a0);
    let up = kernel
        .beta
        .iter()
        .map(|&b| {
            let mut a = Matrix::zeros(n, n);
            a[(0, 0)] = kernel.p_c * b;
            a
        })
        .collect();
    ChainModel {
        b0,
        a0,
        a1,
        up,
        battery,
    }
}

impl ChainModel {
    /// Distance states per level, `M + 1`.
    pub fn width(&self) -> usize {
        self.b0.rows()
    }

    pub fn levels(&self) -> usize {
        self.battery + 1
    }

    pub fn max_units(&self) -> usize {
        self.up.len()
    }

    /// Block `Q(from, to)`; `None` for structural zeros.
    pub fn block(&self, from: usize, to: usize) -> Option<Matrix> {
        let l = self.battery;
        assert!(from <= l && to <= l);
        if to + 1 == from {
            return Some(self.a0.clone());
        }
        if to == from {
            let mut d = if from == 0 { self.b0.clone() } else { self.a1.clone() };
            if from == l {
                for a in &self.up {
                    d.add_assign(a);
                }
            }
            return Some(d);
        }
        if to < from {
            return None;
        }
        let jump = to - from;
        if to < l {
            return self.up.get(jump - 1).cloned();
        }
        // overflow: every jump of at least L - from lands on level L
        let mut acc: Option<Matrix> = None;
        for a in self.up.iter().skip(jump - 1) {
            match acc.as_mut() {
                Some(m) => m.add_assign(a),
                None => acc = Some(a.clone()),
            }
        }
        acc
    }

    /// Dense generator of size `(L+1)(M+1)`.
    pub fn generator(&self) -> Matrix {
        let w = self.width();
        let n = self.levels() * w;
        let mut q = Matrix::zeros(n, n);
        for k in 0..self.levels() {
            for j in 0..self.levels() {
                if let Some(b) = self.block(k, j) {
                    for r in 0..w {
                        for c in 0..w {
                            q[(k * w + r, j * w + c)] = b[(r, c)];
                        }
                    }
                }
            }
        }
        q
    }

    /// Largest absolute row sum of `B0 + Σ up` and `A0 + A1 + Σ up`.
    pub fn row_sum_defect(&self) -> f64 {
        let mut level0 = self.b0.clone();
        let mut inner = self.a0.add(&self.a1);
        for a in &self.up {
            level0.add_assign(a);
            inner.add_assign(a);
        }
        level0
            .row_sums()
            .iter()
            .chain(inner.row_sums().iter())
            .fold(0.0, |m, s| m.max(abs(*s)))
    }

    /// `‖x Q‖_∞` evaluated block by block.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        let w = self.width();
        let levels = self.levels();
        assert_eq!(pi.len(), levels * w);
        let mut out = vec![0.0; pi.len()];
        for k in 0..levels {
            let x = &pi[k * w..(k + 1) * w];
            let lo = k.saturating_sub(1);
            let hi = (k + self.max_units()).min(self.battery);
            for j in lo..=hi {
                if let Some(b) = self.block(k, j) {
                    for (o, v) in out[j * w..(j + 1) * w].iter_mut().zip(b.left_mul(x)) {
                        *o += v;
                    }
                }
            }
        }
        out.iter().fold(0.0, |m, v| m.max(abs(*v)))
    }

    fn transmit_rate(&self) -> f64 {
        self.a0[(0, 0)]
    }

    fn charge_rate(&self) -> f64 {
        self.up.iter().map(|a| a[(0, 0)]).sum()
    }
}

/// Stationary distribution of the chain, stored level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub pi: Vec<f64>,
    pub width: usize,
    pub p_on: f64,
    pub residual: f64,
}

impl SteadyState {
    pub fn levels(&self) -> usize {
        self.pi.len() / self.width
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.pi[k * self.width..(k + 1) * self.width]
    }

    /// Marginal probability of each energy level.
    pub fn energy_marginal(&self) -> Vec<f64> {
        self.pi.chunks(self.width).map(|c| c.iter().sum()).collect()
    }

    /// Marginal probability of each distance state.
    pub fn distance_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for c in self.pi.chunks(self.width) {
            for (o, x) in out.iter_mut().zip(c) {
                *o += x;
            }
        }
        out
    }

    pub(crate) fn from_pi(model: &ChainModel, pi: Vec<f64>) -> SteadyState {
        let w = model.width();
        let residual = model.residual(&pi);
        let ss = SteadyState {
            pi,
            width: w,
            p_on: 0.0,
            residual,
        };
        let p_on = active_probability(&ss);
        SteadyState { p_on, ..ss }
    }
}

/// Solves `πQ = 0`, `π1 = 1` by eliminating levels from the bottom up.
///
/// Each level is expressed through the one above it, `π_k = π_{k+1} W_k`, so
/// only `L` inversions of `(M+1)×(M+1)` blocks are needed.
pub fn solve_steady_state(model: &ChainModel) -> Result<SteadyState> {
    let w = model.width();
    let levels = model.levels();
    let l = model.battery;
    let p_t = model.transmit_rate();
    if model.charge_rate() <= 0.0 {
        // nothing lifts a node off level 0
        if p_t <= 0.0 {
            return Err(Error::NotUnique);
        }
        let mut pi = vec![0.0; levels * w];
        let phi = left_null_vector(&model.b0)?;
        pi[..w].copy_from_slice(&phi);
        return Ok(SteadyState::from_pi(model, clean(pi)));
    }

    let e = model.max_units();
    let mut ws: Vec<Matrix> = Vec::with_capacity(l);
    // t[s-1] maps π_j to π_{j-s} for the level j being processed
    let mut t: Vec<Matrix> = Vec::new();
    let mut top = None;
    for j in 0..levels {
        if j > 0 {
            let prev = ws[j - 1].clone();
            let mut next = Vec::with_capacity(e.min(j));
            next.push(prev.clone());
            for s in 2..=e.min(j) {
                next.push(prev.mul(&t[s - 2]));
            }
            t = next;
        }
        let mut u = model.block(j, j).expect("diagonal block");
        for s in 1..=e.min(j) {
            if let Some(b) = model.block(j - s, j) {
                u.add_assign(&t[s - 1].mul(&b));
            }
        }
        if j == l {
            top = Some(u);
        } else {
            let inv = u
                .lu()
                .map_err(|_| Error::SingularMatrix { context: "level elimination" })?
                .inverse()?;
            ws.push(inv.scaled(-p_t));
        }
    }

    let top = top.expect("top level");
    let mut pi = vec![0.0; levels * w];
    let last = left_null_vector(&top)?;
    pi[l * w..].copy_from_slice(&last);
    for j in (0..l).rev() {
        let next = ws[j].left_mul(&pi[(j + 1) * w..(j + 2) * w]);
        pi[j * w..(j + 1) * w].copy_from_slice(&next);
        let big = next.iter().fold(0.0f64, |m, x| m.max(abs(*x)));
        if big > 1e150 {
            pi[j * w..].iter_mut().for_each(|x| *x /= big);
        }
    }
    Ok(SteadyState::from_pi(model, clean(pi)))
}

// Normalizes and removes round-off negatives.
fn clean(mut pi: Vec<f64>) -> Vec<f64> {
    let total: f64 = pi.iter().sum();
    for x in pi.iter_mut() {
        *x /= total;
        if *x < 0.0 && *x > -1e-13 {
            *x = 0.0;
        }
    }
    pi
}

/// `1 − Σ_j π_{0,j}`.
pub fn active_probability(ss: &SteadyState) -> f64 {
    let idle: f64 = ss.level(0).iter().sum();
    (1.0 - idle).clamp(0.0, 1.0)
}

/// Per-node throughput for active probability `p_on` and transmit probability `q`.
pub fn throughput_from_pon(p_on: f64, q: f64) -> f64 {
    let x = q * p_on;
    0.5 * x * exp(-PI / 4.0 * x) * (1.0 - exp(PI / 4.0 * (q - 1.0)))
}

/// `min(1, (p_c/p_t)·{1 − (1 − πR₁²/S)^m})`.
pub fn pon_lower_bound(kernel: &TransitionKernel, cfg: &NetworkConfig) -> f64 {
    let covered = 1.0 - powi(1.0 - cfg.coverage(), cfg.stations);
    let num = kernel.p_c * covered;
    if num <= 0.0 {
        return 0.0;
    }
    if kernel.p_t <= 0.0 {
        return 1.0;
    }
    (num / kernel.p_t).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_kernel(p_t: f64, p_c: f64, beta: Vec<f64>) -> TransitionKernel {
        let p = Matrix::from_rows(2, 2, vec![0.7, 0.3, 0.1, 0.9]);
        TransitionKernel::with_matrix(p, p_t, p_c, beta)
    }

    #[test]
    fn four_state_chain_by_hand() {
        let k = toy_kernel(0.2, 0.4, vec![1.0]);
        let q = build_chain(&k, 1).generator();
        #[rustfmt::skip]
        let want = [
            -0.3 - 0.4, 0.3, 0.4, 0.0,
            0.1, -0.1, 0.0, 0.0,
            0.2, 0.0, -0.3 - 0.4 - 0.2 + 0.4, 0.3,
            0.0, 0.2, 0.1, -0.1 - 0.2,
        ];
        for (i, w) in want.iter().enumerate() {
            assert!((q.as_slice()[i] - w).abs() < 1e-15, "entry {i}");
        }
    }

    #[test]
    fn two_unit_layout() {
        let k = toy_kernel(0.2, 0.4, vec![0.75, 0.25]);
        let m = build_chain(&k, 3);
        assert!(m.row_sum_defect() < 1e-12);
        assert_eq!(m.block(0, 2).unwrap(), m.up[1]);
        assert_eq!(m.block(1, 3).unwrap(), m.up[1]);
        assert_eq!(m.block(2, 3).unwrap(), m.up[0].add(&m.up[1]));
        assert!(m.block(0, 3).is_none());
        assert!(m.block(3, 1).is_none());
        let q = m.generator();
        for s in q.row_sums() {
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn no_charging_empties_the_battery() {
        let k = toy_kernel(0.2, 0.0, vec![1.0]);
        let ss = solve_steady_state(&build_chain(&k, 4)).unwrap();
        assert_eq!(ss.p_on, 0.0);
        assert!((ss.level(0)[0] - 0.25).abs() < 1e-12);
        let k = toy_kernel(0.0, 0.0, vec![1.0]);
        assert_eq!(solve_steady_state(&build_chain(&k, 4)), Err(Error::NotUnique));
    }

    #[test]
    fn no_transmission_fills_the_battery() {
        let k = toy_kernel(0.0, 0.3, vec![0.5, 0.5]);
        let ss = solve_steady_state(&build_chain(&k, 5)).unwrap();
        assert!((ss.level(5).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((ss.level(5)[0] - 0.25).abs() < 1e-12);
        assert_eq!(ss.p_on, 1.0);
    }

    #[test]
    fn uniform_toy_model() {
        // symmetric distance kernel, charge and drain balanced level by level
        let p = Matrix::from_rows(2, 2, vec![0.5, 0.5, 0.5, 0.5]);
        let mut model = build_chain(&TransitionKernel::with_matrix(p, 0.2, 0.2, vec![1.0]), 3);
        // charge from both distance states so every level balances
        model.up[0][(1, 1)] = 0.2;
        model.b0[(1, 1)] -= 0.2;
        model.a1[(1, 1)] -= 0.2;
        assert!(model.row_sum_defect() < 1e-15);
        let ss = solve_steady_state(&model).unwrap();
        for x in &ss.pi {
            assert!((x - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn throughput_values() {
        assert_eq!(throughput_from_pon(0.0, 0.5), 0.0);
        let want = 0.25 * exp(-PI / 8.0) * (1.0 - exp(-PI / 8.0));
        assert!((throughput_from_pon(1.0, 0.5) - want).abs() < 1e-15);
        assert!((want - 0.0548).abs() < 5e-5);
        let mut prev = 0.0;
        for i in 1..=100 {
            let t = throughput_from_pon(i as f64 / 100.0, 0.5);
            assert!(t > prev);
            prev = t;
        }
    }
}
