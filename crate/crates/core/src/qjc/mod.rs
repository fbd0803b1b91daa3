// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Driven, damped Jaynes-Cummings system: Hamiltonian, Liouvillian and
//! steady-state solvers.
//!
//! Basis states are `|atom⟩ ⊗ |n⟩` with `atom ∈ {g, e}` and
//! `n ∈ 0..=n_fock`, indexed `atom * (n_fock + 1) + n`.
//!
//! ```text
//! H/ħ = Δcp a†a + Δap σ†σ + g (a σ† + a† σ) + ε (a + a†)
//! dρ/dt = -i[H/ħ, ρ] + γ (2σρσ† - σ†σρ - ρσ†σ) + κ (2aρa† - a†aρ - ρa†a)
//! ```

mod banded;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{SystemParams, HBAR};

pub use banded::{BandLu, BandMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative residual above which a solve is rejected outright.
pub const RESIDUAL_REJECT: f64 = 1e-8;

/// Truncated atom ⊗ Fock space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertSpace {
    n_fock: usize,
}

impl HilbertSpace {
    pub fn new(n_fock: usize) -> Result<Self> {
        if n_fock < 1 {
            return Err(Error::TruncationTooSmall(n_fock));
        }
        Ok(Self { n_fock })
    }

    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    pub fn dim(&self) -> usize {
        2 * (self.n_fock + 1)
    }

    #[inline]
    pub fn index(&self, excited: bool, n: usize) -> usize {
        (excited as usize) * (self.n_fock + 1) + n
    }

    /// Cavity annihilation operator `a`.
    pub fn annihilation(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut a = DMatrix::zeros(d, d);
        for excited in [false, true] {
            for n in 1..=self.n_fock {
                a[(self.index(excited, n - 1), self.index(excited, n))] = Complex64::from((n as f64).sqrt());
            }
        }
        a
    }

    /// Atomic lowering operator `σ = |g⟩⟨e|`.
    pub fn lowering(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut s = DMatrix::zeros(d, d);
        for n in 0..=self.n_fock {
            s[(self.index(false, n), self.index(true, n))] = Complex64::from(1.0);
        }
        s
    }

    /// Position of `ρ_ij` in the vectorized density operator. Ordering is by
    /// photon numbers first so the Liouvillian stays narrowly banded.
    #[inline]
    pub fn super_index(&self, i: usize, j: usize) -> usize {
        let m = self.n_fock + 1;
        let (si, ni) = (i / m, i % m);
        let (sj, nj) = (j / m, j % m);
        ((ni * m + nj) * 2 + si) * 2 + sj
    }
}

/// `H/ħ` in rad/s for coupling `g` and drive amplitude `eps`.
pub fn build_hamiltonian(params: &SystemParams, space: &HilbertSpace, g: f64, eps: f64) -> DMatrix<Complex64> {
    let a = space.annihilation();
    let s = space.lowering();
    let ad = a.adjoint();
    let sd = s.adjoint();
    let mut h = &ad * &a * Complex64::from(params.delta_cp_rad_s);
    h += &sd * &s * Complex64::from(params.delta_ap_rad_s);
    h += (&a * &sd + &ad * &s) * Complex64::from(g);
    h += (&a + &ad) * Complex64::from(eps);
    h
}

/// Sparse Liouvillian superoperator in the [`HilbertSpace::super_index`]
/// ordering.
pub struct Liouvillian {
    size: usize,
    entries: Vec<(usize, usize, Complex64)>,
    lower: usize,
    upper: usize,
    norm: f64,
}

impl Liouvillian {
    pub fn new(params: &SystemParams, space: &HilbertSpace, g: f64, eps: f64) -> Self {
        let h = build_hamiltonian(params, space, g, eps);
        let collapse: Vec<_> = [(space.lowering(), params.gamma_rad_s), (space.annihilation(), params.kappa_rad_s)]
            .into_iter()
            .map(|(c, rate)| {
                let cdc = c.adjoint() * &c;
                (c, cdc, rate)
            })
            .collect();
        let d = space.dim();
        let mut entries = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let row = space.super_index(i, j);
                let mut push = |col: usize, v: Complex64| {
                    if v != ZERO {
                        entries.push((row, col, v));
                    }
                };
                for k in 0..d {
                    push(space.super_index(k, j), -I * h[(i, k)]);
                    push(space.super_index(i, k), I * h[(k, j)]);
                }
                for (c, cdc, rate) in &collapse {
                    for k in 0..d {
                        let cik = c[(i, k)];
                        if cik != ZERO {
                            for l in 0..d {
                                let cjl = c[(j, l)];
                                if cjl != ZERO {
                                    push(space.super_index(k, l), cik * cjl.conj() * (2.0 * rate));
                                }
                            }
                        }
                        push(space.super_index(k, j), -cdc[(i, k)] * *rate);
                        push(space.super_index(i, k), -cdc[(k, j)] * *rate);
                    }
                }
            }
        }
        let size = d * d;
        let mut dense_sq = std::collections::HashMap::<(usize, usize), Complex64>::new();
        let (mut lower, mut upper) = (0, 0);
        for &(r, c, v) in &entries {
            *dense_sq.entry((r, c)).or_insert(ZERO) += v;
            if r > c {
                lower = lower.max(r - c);
            } else {
                upper = upper.max(c - r);
            }
        }
        let norm = dense_sq.values().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        Self { size, entries, lower, upper, norm }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    /// Frobenius norm of the superoperator.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.size];
        for &(r, c, val) in &self.entries {
            out[r] += val * v[c];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Banded LU with `ρ_{g0,g0}` pinned, then trace normalization.
    Banded,
    /// Dense LU with one equation replaced by `Tr ρ = 1`.
    DenseTrace,
}

#[derive(Debug, Clone)]
pub struct DensityOperator {
    space: HilbertSpace,
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `max |ρ - ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.matrix.nrows();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::from(0.5);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Tr(A ρ)`.
    pub fn expect(&self, op: &DMatrix<Complex64>) -> Complex64 {
        let d = self.matrix.nrows();
        let mut acc = ZERO;
        for i in 0..d {
            for j in 0..d {
                let a = op[(i, j)];
                if a != ZERO {
                    acc += a * self.matrix[(j, i)];
                }
            }
        }
        acc
    }

    pub fn vectorize(&self) -> Vec<Complex64> {
        let d = self.space.dim();
        let mut v = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                v[self.space.super_index(i, j)] = self.matrix[(i, j)];
            }
        }
        v
    }

    pub fn observables(&self) -> Observables {
        let a = self.space.annihilation();
        let s = self.space.lowering();
        let mean_field = self.expect(&a);
        let photon_number = self.expect(&(a.adjoint() * &a)).re;
        let excited_population = self.expect(&(s.adjoint() * &s)).re;
        let dipole_correlation = 2.0 * self.expect(&(a.adjoint() * &s)).re;
        Observables {
            mean_field,
            photon_number,
            excited_population,
            dipole_correlation,
            transmission: mean_field.norm_sqr(),
        }
    }
}

/// Steady-state expectation values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    /// `⟨a⟩`.
    pub mean_field: Complex64,
    /// `⟨a†a⟩`.
    pub photon_number: f64,
    /// `⟨σ†σ⟩`.
    pub excited_population: f64,
    /// `⟨a†σ + σ†a⟩`; sets the dipole force.
    pub dipole_correlation: f64,
    /// Heterodyne transmission `|⟨a⟩|²`.
    pub transmission: f64,
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityOperator,
    /// `‖L ρ‖ / (‖L‖ ‖ρ‖)`, Frobenius norms.
    pub relative_residual: f64,
    /// Smallest over largest pivot magnitude.
    pub pivot_ratio: f64,
}

pub fn steady_state(
    params: &SystemParams,
    space: &HilbertSpace,
    g: f64,
    eps: f64,
    method: SolverMethod,
) -> Result<SteadyState> {
    let liou = Liouvillian::new(params, space, g, eps);
    let pin = space.super_index(0, 0);
    let n = liou.size();
    let (vec, pivot_ratio) = match method {
        SolverMethod::Banded => {
            let (kl, ku) = liou.bandwidths();
            let mut band = BandMatrix::zeros(n, kl, ku);
            for &(r, c, v) in &liou.entries {
                if r != pin {
                    band.add(r, c, v);
                }
            }
            band.clear_row(pin);
            band.add(pin, pin, Complex64::from(1.0));
            let lu = band.factor().ok_or(Error::IllConditioned { condition: 0.0 })?;
            let mut rhs = vec![ZERO; n];
            rhs[pin] = Complex64::from(1.0);
            lu.solve_in_place(&mut rhs);
            (rhs, lu.pivot_ratio())
        }
        SolverMethod::DenseTrace => {
            let mut m = liou.to_dense();
            for c in 0..n {
                m[(pin, c)] = ZERO;
            }
            for i in 0..space.dim() {
                m[(pin, space.super_index(i, i))] = Complex64::from(1.0);
            }
            let lu = m.lu();
            let u = lu.u();
            let diag: Vec<f64> = (0..n).map(|k| u[(k, k)].norm()).collect();
            let hi = diag.iter().copied().fold(0.0, f64::max);
            let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
            let mut rhs = nalgebra::DVector::zeros(n);
            rhs[pin] = Complex64::from(1.0);
            let x = lu.solve(&rhs).ok_or(Error::IllConditioned { condition: 0.0 })?;
            (x.iter().copied().collect(), if hi > 0.0 { lo / hi } else { 0.0 })
        }
    };
    let d = space.dim();
    let mut matrix = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            matrix[(i, j)] = vec[space.super_index(i, j)];
        }
    }
    let tr = matrix.trace();
    if !(tr.norm() > 0.0) || !tr.re.is_finite() {
        return Err(Error::IllConditioned { condition: pivot_ratio });
    }
    matrix /= tr;
    let rho = DensityOperator { space: *space, matrix };
    let v = rho.vectorize();
    let res = liou.apply(&v);
    let res_norm = res.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let rho_norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let relative_residual = res_norm / (liou.norm() * rho_norm);
    if !(relative_residual <= RESIDUAL_REJECT) {
        return Err(Error::Residual { residual: relative_residual, tolerance: RESIDUAL_REJECT });
    }
    Ok(SteadyState { rho, relative_residual, pivot_ratio })
}

/// Solves at `n_fock` and `n_fock + 1` and returns the relative change in
/// `⟨a†a⟩`; errors when it exceeds `tolerance`.
pub fn truncation_check(params: &SystemParams, space: &HilbertSpace, g: f64, eps: f64, tolerance: f64) -> Result<f64> {
    let base = steady_state(params, space, g, eps, SolverMethod::Banded)?.rho.observables().photon_number;
    let bigger = HilbertSpace::new(space.n_fock() + 1)?;
    let next = steady_state(params, &bigger, g, eps, SolverMethod::Banded)?.rho.observables().photon_number;
    let change = if next == 0.0 { (next - base).abs() } else { ((next - base) / next).abs() };
    if change > tolerance {
        return Err(Error::NotConverged { n_fock: bigger.n_fock(), relative_change: change });
    }
    Ok(change)
}

/// Radial force `-ħ (∂g/∂ρ) ⟨a†σ + σ†a⟩` at axial position `x`.
pub fn force_radial(params: &SystemParams, rho: f64, x: f64, dipole_correlation: f64) -> f64 {
    let g = params.coupling(x, rho);
    let dg_drho = -2.0 * rho / (params.waist_m * params.waist_m) * g;
    -HBAR * dg_drho * dipole_correlation
}
