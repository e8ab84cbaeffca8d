//! The δ-parameterized environment model.
//!
//! The environment keeps a record of every branch. Records of histories with
//! different streak counts are orthogonal, and records of distinct histories
//! with the same streak count overlap by δ on average. Within a streak class
//! every large-N branch has the same amplitude w_n S(n) (or w_n F(n)), with
//! w_n = |f|^{K−n}|b|^{n−1}, so a class of M_n = C(K−1, n−1) histories
//! contributes [(1−δ)M_n + δM_n²]·|amplitude|² to the squared norm.
//!
//! δ = 1 keeps the within-class coherence and gives √N search time; δ = 0
//! destroys it and gives N.

use serde::Serialize;

use crate::closed::SFFactors;
use crate::error::{Error, Result};
use crate::params::DerivedQuantities;
use crate::specfun::{legendre_p, log_binomial_row, ScaledReal};
use crate::sum::{log_add_exp, CompensatedSum};

/// Decoherence parameter bound to a (N, t) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaModel {
    pub d: DerivedQuantities,
    pub delta: f64,
}

impl DeltaModel {
    pub fn new(d: DerivedQuantities, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in [0, 1], got {delta}"
            )));
        }
        Ok(Self { d, delta })
    }

    pub fn from_nt(n: u64, t: f64, delta: f64) -> Result<Self> {
        Self::new(DerivedQuantities::new(n, t)?, delta)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.d, delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    ClosedForm,
}

/// Contribution of the histories with `n` streaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StreakTerm {
    pub n: usize,
    /// ln C(K−1, n−1).
    pub log_count: f64,
    /// Share of Pr(success) coming from this class.
    pub success: f64,
    /// Share of Pr(failure) coming from this class.
    pub failure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaModelEvaluation {
    pub k: usize,
    /// ln |A|².
    pub log_norm_a2: f64,
    pub pr_success: f64,
    pub pr_failure: f64,
    pub per_streak: Vec<StreakTerm>,
    pub method: Method,
}

struct DirectSums {
    log_scale: f64,
    success: CompensatedSum,
    failure: CompensatedSum,
    terms: Vec<(usize, f64, f64, f64)>,
}

fn direct_sums(m: &DeltaModel, k: usize, keep_terms: bool) -> Result<DirectSums> {
    if k < 1 {
        return Err(Error::InvalidInput("K must be >= 1".into()));
    }
    let d = &m.d;
    let sf = SFFactors::new(d);
    let ln_f = d.abs_f.ln();
    let ln_b = d.abs_b().ln();
    let ln_keep = (1.0 - m.delta).ln();
    let ln_delta = m.delta.ln();
    let ln_s = [sf.s_even.norm_sqr().ln(), sf.s_odd.norm_sqr().ln()];
    let ln_fail = [sf.f_even.norm_sqr().ln(), sf.f_odd.norm_sqr().ln()];
    let row = log_binomial_row((k - 1) as u64);

    // Log weight of every class, then one pass relative to the maximum.
    let mut logs = Vec::with_capacity(k);
    let mut max = f64::NEG_INFINITY;
    for n in 1..=k {
        let lm = row[n - 1];
        let ln_w2 = if n == 1 {
            2.0 * (k - 1) as f64 * ln_f
        } else {
            2.0 * ((k - n) as f64 * ln_f + (n - 1) as f64 * ln_b)
        };
        let ln_c = log_add_exp(ln_keep + lm, ln_delta + 2.0 * lm);
        let base = ln_c + ln_w2;
        let parity = n % 2;
        let (ls, lf) = (base + ln_s[parity], base + ln_fail[parity]);
        max = max.max(ls).max(lf);
        logs.push((ls, lf));
    }
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::InvalidInput(
            "all history classes have zero weight".into(),
        ));
    }
    let mut success = CompensatedSum::new();
    let mut failure = CompensatedSum::new();
    let mut terms = Vec::new();
    for (i, &(ls, lf)) in logs.iter().enumerate() {
        let (s, f) = ((ls - max).exp(), (lf - max).exp());
        success.add(s);
        failure.add(f);
        if keep_terms {
            terms.push((i + 1, row[i], s, f));
        }
    }
    Ok(DirectSums {
        log_scale: max,
        success,
        failure,
        terms,
    })
}

/// Reference evaluation: explicit sum over streak classes, O(K).
pub fn evaluate_direct(m: &DeltaModel, k: usize) -> Result<DeltaModelEvaluation> {
    let sums = direct_sums(m, k, true)?;
    let (s, f) = (sums.success.value(), sums.failure.value());
    let total = s + f;
    Ok(DeltaModelEvaluation {
        k,
        log_norm_a2: sums.log_scale + total.ln(),
        pr_success: s / total,
        pr_failure: f / total,
        per_streak: sums
            .terms
            .into_iter()
            .map(|(n, log_count, ts, tf)| StreakTerm {
                n,
                log_count,
                success: ts / total,
                failure: tf / total,
            })
            .collect(),
        method: Method::Direct,
    })
}

/// Pr(success) from the direct method without the per-class table.
pub fn success_probability_direct(m: &DeltaModel, k: usize) -> Result<f64> {
    let sums = direct_sums(m, k, false)?;
    let (s, f) = (sums.success.value(), sums.failure.value());
    Ok(s / (s + f))
}

fn check_domain(d: &DerivedQuantities) -> Result<f64> {
    let z = d.tan2theta;
    if z.is_nan() || z >= 1.0 {
        return Err(Error::Domain { tan2theta: z });
    }
    Ok(z)
}

/// Legendre values P_{K−1}(z₊) and P_{K−1}(z₋) with z± = ((1±z)/(1∓z)).
fn legendre_pair(k: usize, z: f64) -> (ScaledReal, ScaledReal) {
    let deg = (k - 1) as u64;
    (
        legendre_p(deg, (1.0 + z) / (1.0 - z)),
        legendre_p(deg, (1.0 - z) / (1.0 + z)),
    )
}

/// |A|² = |f|^{2K}[δ(1−z)^{K−1}P_{K−1}((1+z)/(1−z)) + (1−δ)(1+z)^{K−1}],
/// z = tan²θ.
pub fn normalization_closed(m: &DeltaModel, k: usize) -> Result<ScaledReal> {
    if k < 1 {
        return Err(Error::InvalidInput("K must be >= 1".into()));
    }
    let z = check_domain(&m.d)?;
    let (p_plus, _) = legendre_pair(k, z);
    Ok(norm_closed_with(m, k, z, p_plus))
}

fn norm_closed_with(m: &DeltaModel, k: usize, z: f64, p_plus: ScaledReal) -> ScaledReal {
    let km1 = (k - 1) as u64;
    let f2k = ScaledReal::from_f64(m.d.abs_f).powi(2 * k as u64);
    let coherent = ScaledReal::from_f64(1.0 - z).powi(km1) * p_plus;
    let incoherent = ScaledReal::from_f64(1.0 + z).powi(km1);
    f2k * (ScaledReal::from_f64(m.delta) * coherent
        + ScaledReal::from_f64(1.0 - m.delta) * incoherent)
}

/// Result of the closed-form success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedEvaluation {
    pub pr_success: f64,
    pub log_norm_a2: f64,
    /// Set when the value lies outside [0, 1] by more than 1e−9.
    pub out_of_range: bool,
}

/// The general closed-form success probability (both Legendre terms).
pub fn success_probability_closed(m: &DeltaModel, k: usize) -> Result<ClosedEvaluation> {
    if k < 1 {
        return Err(Error::InvalidInput("K must be >= 1".into()));
    }
    let z = check_domain(&m.d)?;
    let (p_plus, p_minus) = legendre_pair(k, z);
    let a2 = norm_closed_with(m, k, z, p_plus);
    let f2k = ScaledReal::from_f64(m.d.abs_f).powi(2 * k as u64);
    let prefactor = f2k / a2;

    let km1 = (k - 1) as u64;
    let half = ScaledReal::from_f64(0.5);
    let up = ScaledReal::from_f64(1.0 + z);
    let down = ScaledReal::from_f64(1.0 - z);

    let classical = (up.powi(k as u64) - down.powi(k as u64)) * half;
    let quantum = down.powi(km1) * up * half * p_plus - up.powi(km1) * down * half * p_minus;
    let pr = prefactor
        * (ScaledReal::from_f64(1.0 - m.delta) * classical
            + ScaledReal::from_f64(m.delta) * quantum);
    let value = pr.to_f64();
    Ok(ClosedEvaluation {
        pr_success: value,
        log_norm_a2: a2.ln_abs(),
        out_of_range: !(-1e-9..=1.0 + 1e-9).contains(&value),
    })
}

/// δ = 0 limit: ((1+z)/2)(1 − ((1−z)/(1+z))^K).
pub fn success_probability_delta0(d: &DerivedQuantities, k: usize) -> Result<f64> {
    let z = check_domain(d)?;
    let r = (1.0 - z) / (1.0 + z);
    Ok((1.0 + z) / 2.0 * (1.0 - r.powf(k as f64)))
}

/// δ = 1 limit:
/// (1+z)/2 − ((1−z)/2)((1+z)/(1−z))^{K−1} P_{K−1}(z₋)/P_{K−1}(z₊).
pub fn success_probability_delta1(d: &DerivedQuantities, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidInput("K must be >= 1".into()));
    }
    let z = check_domain(d)?;
    let (p_plus, p_minus) = legendre_pair(k, z);
    let growth = ScaledReal::from_f64((1.0 + z) / (1.0 - z)).powi((k - 1) as u64);
    let ratio = (growth * p_minus / p_plus).to_f64();
    Ok((1.0 + z) / 2.0 - (1.0 - z) / 2.0 * ratio)
}

/// First K at which the direct Pr(success) reaches a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchTime {
    pub k_star: usize,
    pub pr_success: f64,
    pub evaluations: usize,
}

/// Upper end of the K scan: many multiples of the classical time scale
/// 1/tan²θ, clamped to [2^10, 2^26].
pub fn default_max_k(d: &DerivedQuantities) -> usize {
    let scale = 64.0 / d.tan2theta;
    if scale.is_finite() {
        (scale.ceil() as usize).clamp(1 << 10, 1 << 26)
    } else {
        1 << 10
    }
}

pub fn search_time(m: &DeltaModel, threshold: f64) -> Result<SearchTime> {
    search_time_capped(m, threshold, default_max_k(&m.d))
}

/// Doubling scan K = 1, 2, 4, … until Pr ≥ threshold, then bisection
/// inside the last bracket keeping Pr(lo) < threshold ≤ Pr(hi).
///
/// Every doubling point below the crossing is checked, so the result is the
/// first crossing whenever Pr rises monotonically up to it, which holds for
/// the model before its first maximum.
pub fn search_time_capped(m: &DeltaModel, threshold: f64, max_k: usize) -> Result<SearchTime> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let mut evaluations = 0;
    let mut eval = |k: usize| -> Result<f64> {
        evaluations += 1;
        success_probability_direct(m, k)
    };
    let mut supremum = f64::NEG_INFINITY;
    let mut lo = 0usize;
    let mut hi = 1usize;
    let mut p_hi;
    loop {
        p_hi = eval(hi)?;
        supremum = supremum.max(p_hi);
        if p_hi >= threshold {
            break;
        }
        if hi >= max_k {
            return Err(Error::NoCrossing {
                threshold,
                supremum,
                max_k,
            });
        }
        lo = hi;
        hi = (hi * 2).min(max_k);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let p = eval(mid)?;
        if p >= threshold {
            hi = mid;
            p_hi = p;
        } else {
            lo = mid;
        }
    }
    Ok(SearchTime {
        k_star: hi,
        pr_success: p_hi,
        evaluations,
    })
}

/// Least-squares line through (ln N, ln K*).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub points: Vec<ScalingPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n: u64,
    pub k_star: usize,
}

/// Ordinary least squares for y = slope·x + intercept.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    (slope, intercept, (rss / m).sqrt())
}

pub fn validate_n_list(n_list: &[u64]) -> Result<()> {
    if n_list.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "scaling fit needs at least 4 values of N, got {}",
            n_list.len()
        )));
    }
    let ratios: Vec<f64> = n_list
        .windows(2)
        .map(|w| w[1] as f64 / w[0] as f64)
        .collect();
    let geometric = ratios
        .iter()
        .all(|r| *r > 1.0 && (r / ratios[0] - 1.0).abs() <= 1e-2);
    if !geometric {
        return Err(Error::InvalidInput(
            "N values must be increasing and geometrically spaced".into(),
        ));
    }
    Ok(())
}

/// Fits from already computed (N, K*) points.
pub fn fit_points(points: Vec<ScalingPoint>) -> ScalingFit {
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| (p.k_star as f64).ln()).collect();
    let (exponent, intercept, residual) = fit_line(&xs, &ys);
    ScalingFit {
        exponent,
        intercept,
        residual,
        points,
    }
}

/// Slope of ln K* against ln N at fixed δ, t and threshold.
pub fn scaling_fit(delta: f64, threshold: f64, t: f64, n_list: &[u64]) -> Result<ScalingFit> {
    validate_n_list(n_list)?;
    let points = n_list
        .iter()
        .map(|&n| {
            let m = DeltaModel::from_nt(n, t, delta)?;
            Ok(ScalingPoint {
                n,
                k_star: search_time(&m, threshold)?.k_star,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_points(points))
}
