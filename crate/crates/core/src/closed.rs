//! Analytic branch formulas: the four-case exact expression, its large-N
//! simplification, the resummed success/failure amplitudes and the
//! quadratic-speedup query count.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{BranchAmplitude, Provenance};
use crate::history::History;
use crate::params::DerivedQuantities;
use crate::specfun::log_binomial_row;
use crate::sum::CompensatedComplexSum;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Final bit and streak-count parity; selects one of the four cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    /// Last streak 1, first streak 0.
    EndsOneEven,
    /// First and last streak 1.
    EndsOneOdd,
    /// Last streak 0, first streak 1.
    EndsZeroEven,
    /// First and last streak 0.
    EndsZeroOdd,
}

impl CaseLabel {
    pub fn of(h: &History) -> Self {
        let even = h.streak_count().is_multiple_of(2);
        match (h.last_bit(), even) {
            (1, true) => CaseLabel::EndsOneEven,
            (1, false) => CaseLabel::EndsOneOdd,
            (_, true) => CaseLabel::EndsZeroEven,
            (_, false) => CaseLabel::EndsZeroOdd,
        }
    }

    pub fn ends_in_target(&self) -> bool {
        matches!(self, CaseLabel::EndsOneEven | CaseLabel::EndsOneOdd)
    }
}

/// The per-parity factors S(n) (success) and F(n) (failure).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SFFactors {
    pub s_even: Complex64,
    pub s_odd: Complex64,
    pub f_even: Complex64,
    pub f_odd: Complex64,
}

impl SFFactors {
    pub fn new(d: &DerivedQuantities) -> Self {
        Self {
            s_even: d.f.conj(),
            s_odd: d.b + d.abs_f * d.x,
            f_even: d.b + d.f * d.x,
            f_odd: d.abs_f + d.b * d.x,
        }
    }

    pub fn success(&self, n: usize) -> Complex64 {
        if n.is_multiple_of(2) {
            self.s_even
        } else {
            self.s_odd
        }
    }

    pub fn failure(&self, n: usize) -> Complex64 {
        if n.is_multiple_of(2) {
            self.f_even
        } else {
            self.f_odd
        }
    }

    pub fn for_last_bit(&self, n: usize, last_bit: u8) -> Complex64 {
        if last_bit == 1 {
            self.success(n)
        } else {
            self.failure(n)
        }
    }
}

/// Signed index sum multiplying φ in the phase prefactor: Σ_even α_k −
/// Σ_odd α_k for the (ends 1, n even) and (ends 0, n odd) cases, the
/// negative of that otherwise.
pub fn phase_exponent(h: &History) -> i64 {
    let (mut odd, mut even) = (0i64, 0i64);
    for (k, bit) in (1..).zip(h.bits()) {
        if k % 2 == 0 {
            even += bit as i64;
        } else {
            odd += bit as i64;
        }
    }
    match CaseLabel::of(h) {
        CaseLabel::EndsOneEven | CaseLabel::EndsZeroOdd => even - odd,
        CaseLabel::EndsOneOdd | CaseLabel::EndsZeroEven => odd - even,
    }
}

/// |f|^{K−n} b^{n−1}, with 0⁰ = 1.
fn streak_prefactor(k: usize, n: usize, d: &DerivedQuantities) -> Complex64 {
    d.b.powi((n - 1) as i32) * d.abs_f.powi((k - n) as i32)
}

/// The four-case exact formula, evaluated as written.
pub fn branch_amplitude_closed(h: &History, d: &DerivedQuantities) -> BranchAmplitude {
    let k = h.len();
    let n = h.streak_count();
    let root = d.xi_weight();
    let phase = |m: i64| Complex64::from_polar(1.0, d.phi * m as f64);
    let e = phase(phase_exponent(h));
    let pre = streak_prefactor(k, n, d);
    let case = CaseLabel::of(h);
    let factor = match case {
        CaseLabel::EndsOneEven => d.f.conj() * root + d.b * d.x,
        CaseLabel::EndsOneOdd => d.b * phase(-1) * root + d.abs_f * d.x,
        CaseLabel::EndsZeroEven => d.b * root + d.f * d.x,
        CaseLabel::EndsZeroOdd => d.abs_f * root + phase(1) * d.b * d.x,
    };
    let amp = pre * e * factor;
    let v = if case.ends_in_target() {
        [amp, ZERO]
    } else {
        [ZERO, amp]
    };
    BranchAmplitude::new(v, Provenance::ClosedForm)
}

/// Large-N form: |f|^{K−n} b^{n−1} S(n) on |w⟩, or F(n) on |ξ⟩.
pub fn branch_amplitude_approx(h: &History, d: &DerivedQuantities) -> BranchAmplitude {
    let k = h.len();
    let n = h.streak_count();
    let sf = SFFactors::new(d);
    let amp = streak_prefactor(k, n, d) * sf.for_last_bit(n, h.last_bit());
    let v = if h.last_bit() == 1 {
        [amp, ZERO]
    } else {
        [ZERO, amp]
    };
    BranchAmplitude::new(v, Provenance::Approx)
}

/// Whether the large-N simplification is expected to hold: x ≤ 0.1 and
/// the dropped phases K|φ| ≤ 0.1.
pub fn approx_regime(d: &DerivedQuantities, k: usize) -> bool {
    d.x <= 0.1 && k as f64 * d.phi.abs() <= 0.1
}

/// Σ over all length-K histories ending in `last_bit` of the large-N
/// branch, grouped by streak count with C(K−1, n−1) multiplicities.
/// Magnitudes go through logs so K in the thousands does not underflow.
pub fn approx_class_sum(k: usize, last_bit: u8, d: &DerivedQuantities) -> Result<Complex64> {
    if k < 1 {
        return Err(Error::InvalidInput("K must be >= 1".into()));
    }
    let sf = SFFactors::new(d);
    let ln_f = d.abs_f.ln();
    let ln_b = d.abs_b().ln();
    // b = ±i|b|, so b^{n−1} = |b|^{n−1} (±i)^{n−1}.
    let unit = if d.b.im <= 0.0 {
        Complex64::new(0.0, -1.0)
    } else {
        Complex64::new(0.0, 1.0)
    };
    let row = log_binomial_row((k - 1) as u64);
    let mut acc = CompensatedComplexSum::new();
    let mut rot = Complex64::new(1.0, 0.0);
    for n in 1..=k {
        let ln_mag = if n == 1 {
            row[0] + (k - 1) as f64 * ln_f
        } else {
            row[n - 1] + (k - n) as f64 * ln_f + (n - 1) as f64 * ln_b
        };
        let mag = if ln_mag.is_nan() { 0.0 } else { ln_mag.exp() };
        acc.add(rot * mag * sf.for_last_bit(n, last_bit));
        rot *= unit;
    }
    Ok(acc.value())
}

/// −i S(even) sin((K−1)θ) + S(odd) cos((K−1)θ).
pub fn success_amplitude(k: usize, d: &DerivedQuantities) -> Complex64 {
    let sf = SFFactors::new(d);
    resummed(k, d, sf.s_even, sf.s_odd)
}

/// −i F(even) sin((K−1)θ) + F(odd) cos((K−1)θ).
pub fn failure_amplitude(k: usize, d: &DerivedQuantities) -> Complex64 {
    let sf = SFFactors::new(d);
    resummed(k, d, sf.f_even, sf.f_odd)
}

fn resummed(k: usize, d: &DerivedQuantities, even: Complex64, odd: Complex64) -> Complex64 {
    let angle = (k as f64 - 1.0) * d.theta;
    Complex64::new(0.0, -1.0) * even * angle.sin() + odd * angle.cos()
}

/// Queries needed for (K−1)θ = π/2: K* = 1 + round(π / (2θ)).
pub fn grover_query_count(d: &DerivedQuantities) -> Result<usize> {
    query_count_for_theta(d.theta)
}

pub fn query_count_for_theta(theta: f64) -> Result<usize> {
    if theta.is_nan() || theta <= 0.0 {
        return Err(Error::DegenerateDynamics);
    }
    Ok(1 + (std::f64::consts::FRAC_PI_2 / theta).round() as usize)
}
