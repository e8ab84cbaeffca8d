//! Approximation-free branch engine on the two-level subspace.
//!
//! A branch C_α|s⟩ is obtained by alternately applying the single-step
//! propagator and the projector selected by each bit of α, earliest query
//! first. Everything here is exact up to floating-point rounding and is the
//! reference the closed forms are checked against.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::history::History;
use crate::params::DerivedQuantities;
use crate::sum::{CompensatedComplexSum, CompensatedSum};

pub type Amplitude2 = [Complex64; 2];

/// Largest K for which a Gram matrix may be built.
pub const GRAM_MAX_K: usize = 14;
/// Largest K for which the dense Gram matrix may be materialized.
pub const GRAM_DENSE_MAX_K: usize = 12;
/// Largest K for which the minimum eigenvalue is computed exactly.
pub const GRAM_EIGEN_MAX_K: usize = 10;
pub const RESUMMATION_MAX_K: usize = 20;
pub const PROPAGATOR_MAX_N: u64 = 64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The one-step propagator [[f, b], [b, f*]] on {|w⟩, |ξ⟩}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepUnitary {
    m: [[Complex64; 2]; 2],
}

impl StepUnitary {
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.m[row][col]
    }

    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        self.m
    }

    #[inline]
    pub fn apply(&self, v: &Amplitude2) -> Amplitude2 {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// Largest entrywise deviation of U†U from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut s = ZERO;
                for k in 0..2 {
                    s += self.m[k][i].conj() * self.m[k][j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }
}

pub fn step_unitary(d: &DerivedQuantities) -> StepUnitary {
    StepUnitary {
        m: [[d.f, d.b], [d.b, d.f.conj()]],
    }
}

/// How a branch amplitude was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    ClosedForm,
    Approx,
}

/// C_α|s⟩ as components on |w⟩ and |ξ⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAmplitude {
    pub w: Complex64,
    pub xi: Complex64,
    pub provenance: Provenance,
}

impl BranchAmplitude {
    pub fn new(v: Amplitude2, provenance: Provenance) -> Self {
        Self {
            w: v[0],
            xi: v[1],
            provenance,
        }
    }

    pub fn as_array(&self) -> Amplitude2 {
        [self.w, self.xi]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.w.norm_sqr() + self.xi.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// The component selected by the final projector.
    pub fn component(&self, last_bit: u8) -> Complex64 {
        if last_bit == 1 {
            self.w
        } else {
            self.xi
        }
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &BranchAmplitude) -> Complex64 {
        self.w.conj() * other.w + self.xi.conj() * other.xi
    }
}

#[inline]
fn project(v: Amplitude2, bit: u8) -> Amplitude2 {
    if bit == 1 {
        [v[0], ZERO]
    } else {
        [ZERO, v[1]]
    }
}

pub fn branch_amplitude_exact(h: &History, d: &DerivedQuantities) -> BranchAmplitude {
    let u = step_unitary(d);
    let mut v = d.start_state();
    for bit in h.bits() {
        v = project(u.apply(&v), bit);
    }
    BranchAmplitude::new(v, Provenance::Exact)
}

/// Every branch of length `k`, indexed by history integer (α₁ = LSB).
///
/// Branches are grown one query at a time so shared prefixes are computed
/// once; the result is identical to calling [`branch_amplitude_exact`] on
/// each history.
pub fn all_branches(k: usize, d: &DerivedQuantities) -> Result<Vec<Amplitude2>> {
    if k == 0 || k > RESUMMATION_MAX_K {
        return Err(Error::ResourceLimit {
            what: format!("branch enumeration at K = {k}"),
            limit: RESUMMATION_MAX_K,
        });
    }
    let u = step_unitary(d);
    let mut level = vec![d.start_state()];
    for step in 0..k {
        let mut next = vec![[ZERO; 2]; level.len() * 2];
        for (idx, v) in level.iter().enumerate() {
            let moved = u.apply(v);
            next[idx] = project(moved, 0);
            next[idx | (1 << step)] = project(moved, 1);
        }
        level = next;
    }
    Ok(level)
}

/// D(α, α′) = ⟨s|C†_{α′} C_α|s⟩.
pub fn decoherence_functional(
    h: &History,
    h2: &History,
    d: &DerivedQuantities,
) -> Result<Complex64> {
    if h.len() != h2.len() {
        return Err(Error::InvalidInput(format!(
            "histories have different lengths {} and {}",
            h.len(),
            h2.len()
        )));
    }
    let a = branch_amplitude_exact(h, d);
    let b = branch_amplitude_exact(h2, d);
    Ok(b.inner(&a))
}

/// Result of the positive-semidefiniteness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    /// Minimum eigenvalue, or the minimum quadratic form over the probes.
    pub min_value: f64,
    /// 0 when the full spectrum was computed.
    pub probes: usize,
}

/// The decoherence functional over all 2^K histories.
///
/// Entries are generated on demand from the branch table; entry
/// `(row, col)` is D(α_row, α_col).
#[derive(Debug, Clone)]
pub struct GramMatrix {
    k: usize,
    branches: Vec<Amplitude2>,
}

#[inline]
fn inner2(a: &Amplitude2, b: &Amplitude2) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

impl GramMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.branches.len()
    }

    pub fn branches(&self) -> &[Amplitude2] {
        &self.branches
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        inner2(&self.branches[col], &self.branches[row])
    }

    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        if self.k > GRAM_DENSE_MAX_K {
            return Err(Error::ResourceLimit {
                what: format!("dense Gram matrix at K = {}", self.k),
                limit: GRAM_DENSE_MAX_K,
            });
        }
        let n = self.dim();
        Ok(DMatrix::from_fn(n, n, |r, c| self.entry(r, c)))
    }

    /// Sum of all entries, Σ_{α,α′} D(α, α′) = ‖Σ_α C_α|s⟩‖².
    pub fn total_sum(&self) -> f64 {
        let mut acc = [CompensatedComplexSum::new(), CompensatedComplexSum::new()];
        for b in &self.branches {
            acc[0].add(b[0]);
            acc[1].add(b[1]);
        }
        acc[0].value().norm_sqr() + acc[1].value().norm_sqr()
    }

    /// Sum of all entries accumulated entry by entry (row-major).
    pub fn total_sum_entrywise(&self) -> Complex64 {
        let mut acc = CompensatedComplexSum::new();
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                acc.add(self.entry(r, c));
            }
        }
        acc.value()
    }

    /// Largest |D(α, α′)| over α ≠ α′; zero iff medium decoherence holds.
    pub fn max_offdiag(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                worst = worst.max(self.entry(r, c).norm());
            }
        }
        worst
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.branches.iter().map(|b| inner2(b, b).re).collect()
    }

    /// Largest entrywise |D − D†| of the dense matrix.
    pub fn hermitian_defect(&self) -> Result<f64> {
        let m = self.to_dense()?;
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
            }
        }
        Ok(worst)
    }

    /// Full spectrum for K ≤ 10, otherwise `probes` random unit vectors
    /// v with v†Dv evaluated through the branch table.
    pub fn psd_check(&self, probes: usize, seed: u64) -> Result<PsdReport> {
        if self.k <= GRAM_EIGEN_MAX_K {
            let eig = SymmetricEigen::new(self.to_dense()?);
            let min_value = eig
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            return Ok(PsdReport {
                min_value,
                probes: 0,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut min_value = f64::INFINITY;
        for _ in 0..probes {
            let v: Vec<Complex64> = (0..self.dim())
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            // v†Dv = ‖Σ_α v_α C_α|s⟩‖² with D(row, col) = ⟨C_col|C_row⟩.
            let mut acc = [CompensatedComplexSum::new(), CompensatedComplexSum::new()];
            for (vi, b) in v.iter().zip(&self.branches) {
                let c = vi.conj() / norm;
                acc[0].add(c * b[0]);
                acc[1].add(c * b[1]);
            }
            let q = acc[0].value().norm_sqr() + acc[1].value().norm_sqr();
            min_value = min_value.min(q);
        }
        Ok(PsdReport { min_value, probes })
    }
}

pub fn gram_matrix(k: usize, d: &DerivedQuantities) -> Result<GramMatrix> {
    if k == 0 || k > GRAM_MAX_K {
        return Err(Error::ResourceLimit {
            what: format!("Gram matrix at K = {k}"),
            limit: GRAM_MAX_K,
        });
    }
    Ok(GramMatrix {
        k,
        branches: all_branches(k, d)?,
    })
}

/// U₂^K|s⟩ by repeated application.
pub fn evolve(k: usize, d: &DerivedQuantities) -> Amplitude2 {
    let u = step_unitary(d);
    let mut v = d.start_state();
    for _ in 0..k {
        v = u.apply(&v);
    }
    v
}

/// Σ over all branches ending in `last_bit`, in ascending history order.
pub fn branch_sum(k: usize, d: &DerivedQuantities, last_bit: Option<u8>) -> Result<Amplitude2> {
    let branches = all_branches(k, d)?;
    let mut acc = [CompensatedComplexSum::new(), CompensatedComplexSum::new()];
    for (idx, b) in branches.iter().enumerate() {
        let bit = ((idx >> (k - 1)) & 1) as u8;
        if last_bit.is_none_or(|want| want == bit) {
            acc[0].add(b[0]);
            acc[1].add(b[1]);
        }
    }
    Ok([acc[0].value(), acc[1].value()])
}

/// ‖Σ_α C_α|s⟩ − U₂^K|s⟩‖.
pub fn resummation_residual(k: usize, d: &DerivedQuantities) -> Result<f64> {
    let sum = branch_sum(k, d, None)?;
    let direct = evolve(k, d);
    let mut acc = CompensatedSum::new();
    acc.add((sum[0] - direct[0]).norm_sqr());
    acc.add((sum[1] - direct[1]).norm_sqr());
    Ok(acc.value().sqrt())
}

/// exp(−i t (|w⟩⟨w| + |s⟩⟨s|)) on the full N-dimensional search space,
/// with |w⟩ the first basis vector.
pub fn propagator_full(n: u64, t: f64) -> Result<DMatrix<Complex64>> {
    if !(2..=PROPAGATOR_MAX_N).contains(&n) {
        return Err(Error::InvalidInput(format!(
            "full propagator needs 2 <= N <= {PROPAGATOR_MAX_N}, got {n}"
        )));
    }
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "t must be finite, got {t}"
        )));
    }
    let dim = n as usize;
    let amp = 1.0 / (n as f64).sqrt();
    let h = DMatrix::from_fn(dim, dim, |r, c| {
        let w = if r == 0 && c == 0 { 1.0 } else { 0.0 };
        Complex64::new(w + amp * amp, 0.0)
    });
    Ok((h * Complex64::new(0.0, -t)).exp())
}

/// The {|w⟩, |ξ⟩} block ⟨i|P|j⟩ of an N-dimensional operator.
pub fn restrict_to_two_level(p: &DMatrix<Complex64>) -> [[Complex64; 2]; 2] {
    let n = p.nrows();
    let xi_amp = 1.0 / ((n - 1) as f64).sqrt();
    let basis = |which: usize, i: usize| -> f64 {
        match (which, i) {
            (0, 0) => 1.0,
            (0, _) | (1, 0) => 0.0,
            _ => xi_amp,
        }
    };
    let mut out = [[ZERO; 2]; 2];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            let mut s = ZERO;
            for i in 0..n {
                for j in 0..n {
                    s += basis(a, i) * p[(i, j)] * basis(b, j);
                }
            }
            *cell = s;
        }
    }
    out
}
