//! The non-verification subcommands.

use dechist_core::env::{
    fit_points, search_time, success_probability_direct, validate_n_list, ScalingPoint,
};
use dechist_core::exact::{GRAM_DENSE_MAX_K, GRAM_MAX_K};
use dechist_core::{
    branch_amplitude_closed, branch_amplitude_exact, closed, gram_matrix, step_unitary,
    success_probability_closed, DeltaModel, DerivedQuantities, Error, History,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, Settings};
use crate::output::{fmt_float, fmt_opt, to_csv, to_json, CommandOutput};
use crate::UsageError;

pub const DEFAULT_DELTAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Largest K tabulated by `grover` when no --k is given.
const GROVER_TABLE_MAX_K: usize = 10_000;

fn derived(n: u64, t: f64) -> Result<DerivedQuantities, UsageError> {
    Ok(DerivedQuantities::new(n, t)?)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, UsageError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| UsageError::new(format!("cannot start {jobs} worker threads: {e}")))
}

pub fn params(s: &Settings) -> Result<CommandOutput, UsageError> {
    let n = s.n()?;
    let t = s.time(n)?;
    let format = s.format(Format::Json)?;
    let d = derived(n, t)?;
    let data = match format {
        Format::Json => to_json(&d),
        Format::Csv => {
            let rows = [
                ("N", n.to_string()),
                ("t", fmt_float(d.t)),
                ("x", fmt_float(d.x)),
                ("f_re", fmt_float(d.f.re)),
                ("f_im", fmt_float(d.f.im)),
                ("abs_f", fmt_float(d.abs_f)),
                ("phi", fmt_float(d.phi)),
                ("b_re", fmt_float(d.b.re)),
                ("b_im", fmt_float(d.b.im)),
                ("theta", fmt_float(d.theta)),
                ("tan2theta", fmt_float(d.tan2theta)),
            ];
            to_csv(
                &["name", "value"],
                rows.into_iter().map(|(k, v)| [k.to_string(), v]),
            )
        }
    };
    Ok(CommandOutput {
        data,
        config: json!({"n": n, "t": t, "format": format}),
        derived: serde_json::to_value(d).expect("derived quantities serialize"),
        ..Default::default()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchRow {
    pub history_bits: String,
    pub n_streaks: usize,
    pub exact_re: f64,
    pub exact_im: f64,
    pub closed_re: f64,
    pub closed_im: f64,
    pub mag_diff: f64,
    pub phase_diff: f64,
}

fn wrap_phase(p: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = p.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// arg(exact) − arg(closed), wrapped to (−π, π]; zero when either vanishes.
fn phase_gap(exact: Complex64, closed: Complex64) -> f64 {
    if exact.norm() == 0.0 || closed.norm() == 0.0 {
        return 0.0;
    }
    wrap_phase(exact.arg() - closed.arg())
}

pub fn branch_rows(k: usize, d: &DerivedQuantities) -> Result<Vec<BranchRow>, UsageError> {
    if k > GRAM_MAX_K {
        return Err(Error::ResourceLimit {
            what: format!("branch table at K = {k}"),
            limit: GRAM_MAX_K,
        }
        .into());
    }
    let rows = History::enumerate(k)?
        .map(|h| {
            let e = branch_amplitude_exact(&h, d).component(h.last_bit());
            let c = branch_amplitude_closed(&h, d).component(h.last_bit());
            BranchRow {
                history_bits: h.to_string(),
                n_streaks: h.streak_count(),
                exact_re: e.re,
                exact_im: e.im,
                closed_re: c.re,
                closed_im: c.im,
                mag_diff: (c.norm() - e.norm()).abs(),
                phase_diff: phase_gap(e, c),
            }
        })
        .collect();
    Ok(rows)
}

pub fn branches(s: &Settings) -> Result<CommandOutput, UsageError> {
    let n = s.n()?;
    let t = s.time(n)?;
    let k = s.k()?;
    let format = s.format(Format::Csv)?;
    let d = derived(n, t)?;
    let rows = branch_rows(k, &d)?;
    let data = match format {
        Format::Json => to_json(&rows),
        Format::Csv => to_csv(
            &[
                "history_bits",
                "n_streaks",
                "exact_re",
                "exact_im",
                "closed_re",
                "closed_im",
                "mag_diff",
                "phase_diff",
            ],
            rows.iter().map(|r| {
                [
                    r.history_bits.clone(),
                    r.n_streaks.to_string(),
                    fmt_float(r.exact_re),
                    fmt_float(r.exact_im),
                    fmt_float(r.closed_re),
                    fmt_float(r.closed_im),
                    fmt_float(r.mag_diff),
                    fmt_float(r.phase_diff),
                ]
            }),
        ),
    };
    Ok(CommandOutput {
        data,
        config: json!({"n": n, "t": t, "k": k, "format": format}),
        derived: serde_json::to_value(d).expect("derived quantities serialize"),
        ..Default::default()
    })
}

const PSD_PROBES: usize = 100;
const PSD_SEED: u64 = 0x5eed;

pub fn gram(s: &Settings) -> Result<CommandOutput, UsageError> {
    let n = s.n()?;
    let t = s.time(n)?;
    let k = s.k()?;
    let full = s.flag("full")?;
    let format = s.format(Format::Json)?;
    if format == Format::Csv && !full {
        return Err(UsageError::new(
            "gram --format csv writes the full matrix; add --full",
        ));
    }
    if full && k > GRAM_DENSE_MAX_K {
        return Err(Error::ResourceLimit {
            what: format!("full Gram dump at K = {k}"),
            limit: GRAM_DENSE_MAX_K,
        }
        .into());
    }
    let d = derived(n, t)?;
    let g = gram_matrix(k, &d)?;
    let psd = g.psd_check(PSD_PROBES, PSD_SEED)?;
    let hermitian = if k <= GRAM_DENSE_MAX_K {
        Some(g.hermitian_defect()?)
    } else {
        None
    };
    let trace: f64 = g.diagonal().iter().sum();
    let summary = json!({
        "k": k,
        "dim": g.dim(),
        "sum": g.total_sum(),
        "trace": trace,
        "max_offdiag": g.max_offdiag(),
        "hermitian_defect": hermitian,
        "min_eigen": {
            "value": psd.min_value,
            "method": if psd.probes == 0 { "eigen" } else { "probes" },
            "probes": psd.probes,
        },
    });
    let data = match format {
        Format::Json => {
            let mut doc = json!({ "summary": summary.clone() });
            if full {
                let dim = g.dim();
                let re: Vec<Vec<f64>> = (0..dim)
                    .map(|r| (0..dim).map(|c| g.entry(r, c).re).collect())
                    .collect();
                let im: Vec<Vec<f64>> = (0..dim)
                    .map(|r| (0..dim).map(|c| g.entry(r, c).im).collect())
                    .collect();
                doc["matrix"] = json!({"re": re, "im": im});
            }
            to_json(&doc)
        }
        Format::Csv => {
            let dim = g.dim();
            to_csv(
                &["row", "col", "re", "im"],
                (0..dim)
                    .flat_map(|r| (0..dim).map(move |c| (r, c)))
                    .map(|(r, c)| {
                        let z = g.entry(r, c);
                        [
                            r.to_string(),
                            c.to_string(),
                            fmt_float(z.re),
                            fmt_float(z.im),
                        ]
                    }),
            )
        }
    };
    Ok(CommandOutput {
        data,
        config: json!({"n": n, "t": t, "k": k, "full": full, "format": format}),
        derived: serde_json::to_value(d).expect("derived quantities serialize"),
        summary: Some(summary),
        ..Default::default()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GroverRow {
    pub k: usize,
    pub pr_closed: f64,
    pub pr_exact: f64,
    pub abs_diff: f64,
}

pub fn grover(s: &Settings) -> Result<CommandOutput, UsageError> {
    let n = s.n()?;
    let t = s.time(n)?;
    let format = s.format(Format::Csv)?;
    let d = derived(n, t)?;
    let k_star = closed::grover_query_count(&d)?;
    let ks = match s.k_list()? {
        Some(ks) => ks,
        None => (1..=(2 * k_star).min(GROVER_TABLE_MAX_K)).collect(),
    };
    let max_k = ks.iter().copied().max().unwrap_or(0).max(k_star);

    // One pass of the exact two-level evolution serves every requested K.
    let u = step_unitary(&d);
    let mut v = d.start_state();
    let mut exact = vec![0.0; max_k + 1];
    for slot in exact.iter_mut().skip(1) {
        v = u.apply(&v);
        *slot = v[0].norm_sqr();
    }
    let pr_closed = |k: usize| closed::success_amplitude(k, &d).norm_sqr();
    let rows: Vec<GroverRow> = ks
        .iter()
        .map(|&k| {
            let c = pr_closed(k);
            GroverRow {
                k,
                pr_closed: c,
                pr_exact: exact[k],
                abs_diff: (c - exact[k]).abs(),
            }
        })
        .collect();
    let summary = json!({
        "k_star": k_star,
        "pr_closed_at_k_star": pr_closed(k_star),
        "pr_exact_at_k_star": exact[k_star],
        "k_star_over_sqrt_n": k_star as f64 / (n as f64).sqrt(),
    });
    let data = match format {
        Format::Json => {
            let mut doc = summary.clone();
            doc["rows"] = serde_json::to_value(&rows).expect("rows serialize");
            to_json(&doc)
        }
        Format::Csv => to_csv(
            &["K", "pr_closed", "pr_exact", "abs_diff"],
            rows.iter().map(|r| {
                [
                    r.k.to_string(),
                    fmt_float(r.pr_closed),
                    fmt_float(r.pr_exact),
                    fmt_float(r.abs_diff),
                ]
            }),
        ),
    };
    Ok(CommandOutput {
        data,
        config: json!({"n": n, "t": t, "k": ks, "format": format}),
        derived: serde_json::to_value(d).expect("derived quantities serialize"),
        summary: Some(summary),
        ..Default::default()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub t: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub delta: f64,
    pub pr_direct: f64,
    pub pr_closed: Option<f64>,
    pub rel_diff: Option<f64>,
}

/// Evaluates the (K, δ) grid; rows come back in grid order (K outer).
pub fn sweep_rows(
    d: &DerivedQuantities,
    ks: &[usize],
    deltas: &[f64],
    jobs: usize,
) -> Result<(Vec<SweepRow>, Vec<String>), UsageError> {
    let grid: Vec<(usize, f64)> = ks
        .iter()
        .flat_map(|&k| deltas.iter().map(move |&delta| (k, delta)))
        .collect();
    let eval = |&(k, delta): &(usize, f64)| -> Result<SweepRow, Error> {
        let m = DeltaModel::new(*d, delta)?;
        let pr_direct = success_probability_direct(&m, k)?;
        let pr_closed = match success_probability_closed(&m, k) {
            Ok(c) => Some(c.pr_success),
            Err(Error::Domain { .. }) => None,
            Err(e) => return Err(e),
        };
        let rel_diff = pr_closed.map(|c| {
            if pr_direct == 0.0 {
                if c == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                ((c - pr_direct) / pr_direct).abs()
            }
        });
        Ok(SweepRow {
            n: d.n,
            t: d.t,
            k,
            delta,
            pr_direct,
            pr_closed,
            rel_diff,
        })
    };
    let rows = pool(jobs)?.install(|| grid.par_iter().map(eval).collect::<Result<Vec<_>, _>>())?;
    let mut warnings = Vec::new();
    if d.tan2theta >= 1.0 {
        warnings.push(format!(
            "tan^2(theta) = {} >= 1: closed-form columns left empty",
            d.tan2theta
        ));
    }
    Ok((rows, warnings))
}

pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    to_csv(
        &["N", "t", "K", "delta", "pr_direct", "pr_closed", "rel_diff"],
        rows.iter().map(|r| {
            [
                r.n.to_string(),
                fmt_float(r.t),
                r.k.to_string(),
                fmt_float(r.delta),
                fmt_float(r.pr_direct),
                fmt_opt(r.pr_closed),
                fmt_opt(r.rel_diff),
            ]
        }),
    )
}

pub fn delta_sweep(s: &Settings) -> Result<CommandOutput, UsageError> {
    let n = s.n()?;
    let t = s.time(n)?;
    let ks = s
        .k_list()?
        .ok_or_else(|| UsageError::new("--k is required"))?;
    let deltas = s.delta_list(&DEFAULT_DELTAS)?;
    let jobs = s.jobs()?;
    let format = s.format(Format::Csv)?;
    let d = derived(n, t)?;
    let (rows, warnings) = sweep_rows(&d, &ks, &deltas, jobs)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let data = match format {
        Format::Csv => render_sweep_csv(&rows),
        Format::Json => to_json(&rows),
    };
    Ok(CommandOutput {
        data,
        config: json!({"n": n, "t": t, "k": ks, "delta": deltas, "jobs": jobs, "format": format}),
        derived: serde_json::to_value(d).expect("derived quantities serialize"),
        warnings,
        ..Default::default()
    })
}

pub fn scaling(s: &Settings) -> Result<CommandOutput, UsageError> {
    let n_list = s.n_list()?;
    let t = s.fixed_time(1.0)?;
    let delta = s.delta()?;
    let threshold = s.threshold(0.5)?;
    let jobs = s.jobs()?;
    let format = s.format(Format::Csv)?;
    validate_n_list(&n_list)?;
    let models = n_list
        .iter()
        .map(|&n| DeltaModel::from_nt(n, t, delta))
        .collect::<Result<Vec<_>, _>>()?;
    let points = pool(jobs)?.install(|| {
        models
            .par_iter()
            .map(|m| {
                Ok(ScalingPoint {
                    n: m.d.n,
                    k_star: search_time(m, threshold)?.k_star,
                })
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    let fit = fit_points(points);
    let data = match format {
        Format::Json => to_json(&fit),
        Format::Csv => {
            let mut rows: Vec<[String; 5]> = fit
                .points
                .iter()
                .map(|p| {
                    [
                        p.n.to_string(),
                        p.k_star.to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ]
                })
                .collect();
            rows.push([
                "fit".into(),
                String::new(),
                fmt_float(fit.exponent),
                fmt_float(fit.intercept),
                fmt_float(fit.residual),
            ]);
            to_csv(&["N", "k_star", "exponent", "intercept", "residual"], rows)
        }
    };
    let derived: Vec<Value> = models
        .iter()
        .map(|m| serde_json::to_value(m.d).expect("derived quantities serialize"))
        .collect();
    Ok(CommandOutput {
        data,
        config: json!({
            "n": n_list, "t": t, "delta": delta, "threshold": threshold,
            "jobs": jobs, "format": format,
        }),
        derived: Value::Array(derived),
        summary: Some(json!({
            "exponent": fit.exponent, "intercept": fit.intercept, "residual": fit.residual,
        })),
        ..Default::default()
    })
}
