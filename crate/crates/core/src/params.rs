//! Problem parameters and the single-step spectral quantities derived
//! from them.
//!
//! All dynamics lives in the two-dimensional subspace spanned by the
//! marked state |w⟩ (component 0) and the uniform superposition of the
//! unmarked states |ξ⟩ (component 1). In that basis the start state is
//! |s⟩ = (x, √(1−x²)) with x = 1/√N.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// List size, step duration and query count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    n: u64,
    t: f64,
    k: usize,
    target: u64,
}

impl ModelParams {
    pub fn new(n: u64, t: f64, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("N must be >= 2, got {n}")));
        }
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "t must be finite and >= 0, got {t}"
            )));
        }
        if k < 1 {
            return Err(Error::InvalidParameter("K must be >= 1".into()));
        }
        Ok(Self { n, t, k, target: 1 })
    }

    /// Builds parameters from the dimensionless product x·t instead of t.
    pub fn from_xt(n: u64, xt: f64, k: usize) -> Result<Self> {
        if !xt.is_finite() || xt < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "xt must be finite and >= 0, got {xt}"
            )));
        }
        Self::new(n, xt * (n as f64).sqrt(), k)
    }

    /// Sets the (purely informational) target label, 1-based.
    pub fn with_target(mut self, target: u64) -> Result<Self> {
        if target < 1 || target > self.n {
            return Err(Error::InvalidParameter(format!(
                "target index must lie in [1, {}], got {target}",
                self.n
            )));
        }
        self.target = target;
        Ok(self)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn target(&self) -> u64 {
        self.target
    }

    pub fn with_k(mut self, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter("K must be >= 1".into()));
        }
        self.k = k;
        Ok(self)
    }

    pub fn derived(&self) -> DerivedQuantities {
        derive_quantities(self)
    }
}

/// Single-step amplitudes f and b, the phase of f and the rotation angle θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedQuantities {
    pub n: u64,
    pub t: f64,
    pub x: f64,
    #[serde(serialize_with = "ser_complex")]
    pub f: Complex64,
    pub abs_f: f64,
    pub phi: f64,
    #[serde(serialize_with = "ser_complex")]
    pub b: Complex64,
    pub theta: f64,
    pub tan2theta: f64,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("Complex", 2)?;
    st.serialize_field("re", &z.re)?;
    st.serialize_field("im", &z.im)?;
    st.end()
}

impl DerivedQuantities {
    pub fn new(n: u64, t: f64) -> Result<Self> {
        Ok(derive_quantities(&ModelParams::new(n, t, 1)?))
    }

    /// √(1−x²) = √((N−1)/N), the |ξ⟩ component of |s⟩.
    pub fn xi_weight(&self) -> f64 {
        ((self.n - 1) as f64 / self.n as f64).sqrt()
    }

    /// The start state |s⟩ in the {|w⟩, |ξ⟩} basis.
    pub fn start_state(&self) -> [Complex64; 2] {
        [
            Complex64::new(self.x, 0.0),
            Complex64::new(self.xi_weight(), 0.0),
        ]
    }

    pub fn abs_b(&self) -> f64 {
        self.b.im.abs()
    }
}

pub fn derive_quantities(params: &ModelParams) -> DerivedQuantities {
    let n = params.n;
    let x = 1.0 / (n as f64).sqrt();
    let xt = x * params.t;
    let (s, c) = xt.sin_cos();
    let f = Complex64::new(c, -x * s);
    let b = Complex64::new(0.0, -((n - 1) as f64 / n as f64).sqrt() * s);
    let abs_f = f.norm();
    let phi = f.arg();
    let abs_b = b.im.abs();
    // asin loses accuracy near 1; atan2 is well-conditioned everywhere.
    let theta = abs_b.atan2(abs_f);
    let tan2theta = if abs_f > 0.0 {
        (abs_b / abs_f).powi(2)
    } else {
        f64::INFINITY
    };
    DerivedQuantities {
        n,
        t: params.t,
        x,
        f,
        abs_f,
        phi,
        b,
        theta,
        tan2theta,
    }
}
