//! End-to-end acceptance suite. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line in `cargo test` output.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use dechist_core::env::{evaluate_direct, scaling_fit, search_time, success_probability_direct};
use dechist_core::exact::resummation_residual;
use dechist_core::specfun::binomsq_closed;
use dechist_core::{
    branch_amplitude_closed, branch_amplitude_exact, closed, gram_matrix, legendre_p,
    success_probability_closed, success_probability_delta0, success_probability_delta1, DeltaModel,
    DerivedQuantities, Error, History,
};
use num_complex::Complex64;

type V2 = [Complex64; 2];
type M2 = [[Complex64; 2]; 2];

/// Independent two-level model built from the Hamiltonian
/// |w⟩⟨w| + |s⟩⟨s| in the (w, ξ) basis via its eigendecomposition.
struct Oracle {
    u: M2,
    s: V2,
}

impl Oracle {
    fn new(n: u64, t: f64) -> Self {
        let x = 1.0 / (n as f64).sqrt();
        let y = (1.0 - x * x).sqrt();
        // Eigenvalues 1 ± x with eigenvectors ((1±x)... ) normalized.
        let vecs = [
            (1.0 + x, [(1.0 + x).sqrt(), (1.0 - x).sqrt()]),
            (1.0 - x, [(1.0 - x).sqrt(), -(1.0 + x).sqrt()]),
        ];
        let mut u = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (lambda, v) in vecs {
            let norm2 = v[0] * v[0] + v[1] * v[1];
            let phase = Complex64::from_polar(1.0, t * (1.0 - lambda));
            for r in 0..2 {
                for c in 0..2 {
                    u[r][c] += phase * v[r] * v[c] / norm2;
                }
            }
        }
        Self {
            u,
            s: [Complex64::new(x, 0.0), Complex64::new(y, 0.0)],
        }
    }

    fn apply(&self, v: &V2) -> V2 {
        [
            self.u[0][0] * v[0] + self.u[0][1] * v[1],
            self.u[1][0] * v[0] + self.u[1][1] * v[1],
        ]
    }

    /// Component of P_{α_K} U ⋯ P_{α_1} U |s⟩ (the other one vanishes).
    fn branch(&self, h: &History) -> Complex64 {
        let mut v = self.s;
        for bit in h.bits() {
            v = self.apply(&v);
            let keep = if bit == 1 { 0 } else { 1 };
            v[1 - keep] = Complex64::new(0.0, 0.0);
        }
        v[if h.last_bit() == 1 { 0 } else { 1 }]
    }

    /// Σ over all 2^K branches by depth-first projection.
    fn branch_sum(&self, k: usize, last_bit: Option<u8>) -> V2 {
        fn rec(o: &Oracle, v: V2, left: usize, want: Option<u8>, acc: &mut V2) {
            let w = o.apply(&v);
            for bit in [0u8, 1] {
                let mut p = w;
                p[if bit == 1 { 1 } else { 0 }] = Complex64::new(0.0, 0.0);
                if left == 1 {
                    if want.is_none_or(|b| b == bit) {
                        acc[0] += p[0];
                        acc[1] += p[1];
                    }
                } else {
                    rec(o, p, left - 1, want, acc);
                }
            }
        }
        let mut acc = [Complex64::new(0.0, 0.0); 2];
        rec(self, self.s, k, last_bit, &mut acc);
        acc
    }

    fn power(&self, k: usize) -> V2 {
        (0..k).fold(self.s, |v, _| self.apply(&v))
    }

    /// θ from |b|/|f| of the first column.
    fn theta(&self) -> f64 {
        self.u[1][0].norm().atan2(self.u[0][0].norm())
    }
}

type Criterion = fn() -> Result<Outcome, Error>;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome, Error> {
    Ok(Outcome { passed, detail })
}

fn fidelity_grid() -> Vec<(u64, f64)> {
    let mut g = Vec::new();
    for n in [4u64, 100, 10_000] {
        for xt in [0.05, PI / 6.0] {
            g.push((n, xt * (n as f64).sqrt()));
        }
    }
    g
}

fn criterion_1() -> Result<Outcome, Error> {
    let k = 10;
    let (mut mag, mut phase_ok) = (0.0f64, true);
    let mut worst_phase_excess = f64::NEG_INFINITY;
    for (n, t) in fidelity_grid() {
        let d = DerivedQuantities::new(n, t)?;
        let o = Oracle::new(n, t);
        let bound = 2.0 * k as f64 * d.phi.abs() + 1e-12;
        for h in History::enumerate(k)? {
            let e = o.branch(&h);
            let c = branch_amplitude_closed(&h, &d).component(h.last_bit());
            mag = mag.max((c.norm() - e.norm()).abs() / e.norm());
            let dev = (c / e).arg().abs();
            worst_phase_excess = worst_phase_excess.max(dev - bound);
            phase_ok &= dev <= bound;
        }
    }
    outcome(
        mag <= 1e-10 && phase_ok,
        format!("max rel magnitude diff {mag:.3e} (<= 1e-10); phase excess over 2K|phi| {worst_phase_excess:.3e} (<= 1e-12)"),
    )
}

fn criterion_2() -> Result<Outcome, Error> {
    let (mut lib, mut oracle) = (0.0f64, 0.0f64);
    for (n, t) in fidelity_grid() {
        let d = DerivedQuantities::new(n, t)?;
        let o = Oracle::new(n, t);
        for k in 1..=16 {
            lib = lib.max(resummation_residual(k, &d)?);
            let (sum, pow) = (o.branch_sum(k, None), o.power(k));
            oracle =
                oracle.max(((sum[0] - pow[0]).norm_sqr() + (sum[1] - pow[1]).norm_sqr()).sqrt());
        }
    }
    outcome(
        lib <= 1e-12 && oracle <= 1e-12,
        format!("library residual {lib:.3e}, oracle residual {oracle:.3e} (<= 1e-12)"),
    )
}

fn criterion_3() -> Result<Outcome, Error> {
    let (n, t) = (4, PI / 3.0);
    let d = DerivedQuantities::new(n, t)?;
    let g = gram_matrix(4, &d)?;
    let herm = g.hermitian_defect()?;
    let sum = g.total_sum();
    let min_eig = g.psd_check(100, 1)?.min_value;
    let offdiag = g.max_offdiag();

    // Independent entry-by-entry sum and off-diagonal maximum.
    let o = Oracle::new(n, t);
    let hs: Vec<History> = History::enumerate(4)?.collect();
    let vec_of = |h: &History| -> V2 {
        let c = o.branch(h);
        if h.last_bit() == 1 {
            [c, Complex64::new(0.0, 0.0)]
        } else {
            [Complex64::new(0.0, 0.0), c]
        }
    };
    let mut oracle_sum = Complex64::new(0.0, 0.0);
    let mut oracle_off = 0.0f64;
    for (i, a) in hs.iter().enumerate() {
        for (j, b) in hs.iter().enumerate() {
            let (va, vb) = (vec_of(a), vec_of(b));
            let dij = vb[0].conj() * va[0] + vb[1].conj() * va[1];
            oracle_sum += dij;
            if i != j {
                oracle_off = oracle_off.max(dij.norm());
            }
        }
    }
    let passed = herm <= 1e-14
        && (sum - 1.0).abs() <= 1e-12
        && min_eig >= -1e-10
        && offdiag >= 0.05
        && (oracle_sum - 1.0).norm() <= 1e-12
        && (oracle_off - offdiag).abs() <= 1e-12;
    outcome(
        passed,
        format!(
            "hermitian defect {herm:.1e}, sum {sum:.15}, min eigenvalue {min_eig:.2e}, max off-diagonal {offdiag:.4} (oracle {oracle_off:.4})"
        ),
    )
}

fn criterion_4() -> Result<Outcome, Error> {
    let (n, t) = (10_000, 10.0);
    let d = DerivedQuantities::new(n, t)?;
    let o = Oracle::new(n, t);
    let k_star = closed::grover_query_count(&d)?;
    let oracle_k_star = 1 + (PI / (2.0 * o.theta())).round() as usize;
    let pr_star = closed::success_amplitude(k_star, &d).norm_sqr();
    let brute = o.branch_sum(16, Some(1))[0].norm_sqr();
    let resummed = closed::success_amplitude(16, &d).norm_sqr();
    let gap = (brute - resummed).abs();

    let mut ratios = Vec::new();
    for k in 0..=4 {
        let n = 400 * 4u64.pow(k);
        let d = DerivedQuantities::new(n, 1.0)?;
        let ks = closed::grover_query_count(&d)?;
        let oracle = 1 + (PI / (2.0 * Oracle::new(n, 1.0).theta())).round() as usize;
        if ks != oracle {
            return outcome(
                false,
                format!("K* mismatch at N={n}: {ks} vs oracle {oracle}"),
            );
        }
        ratios.push(ks as f64 / (n as f64).sqrt());
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi / lo - 1.0;
    outcome(
        k_star == 17 && oracle_k_star == 17 && pr_star >= 0.95 && gap <= 0.05 && spread <= 0.02,
        format!(
            "K* = {k_star} (oracle {oracle_k_star}), Pr(K*) = {pr_star:.6}, |brute - resummed| at K=16 = {gap:.2e}, K*/sqrt(N) spread {:.2}%",
            spread * 100.0
        ),
    )
}

/// ln Σ_j C(n, j)² z^j with cumulative-log binomials.
fn ln_binomsq_series(n: u64, z: f64) -> f64 {
    let mut ln_c = 0.0;
    let mut terms = Vec::with_capacity(n as usize + 1);
    for j in 0..=n {
        if j > 0 {
            ln_c += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        terms.push(2.0 * ln_c + j as f64 * z.ln());
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn criterion_5() -> Result<Outcome, Error> {
    let mut worst = 0.0f64;
    for n in 0..=300u64 {
        for z in [1e-4, 1e-2, 0.25, 0.5] {
            let closed = binomsq_closed(n + 1, z)?;
            let rel = (closed.ln_abs() - ln_binomsq_series(n, z)).exp_m1().abs();
            worst = worst.max(rel);
        }
    }
    let unit = (0..=500u64)
        .map(|n| (legendre_p(n, 1.0).to_f64() - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-9 && unit <= 1e-13,
        format!(
            "identity max rel error {worst:.3e} (<= 1e-9); max |P_n(1) - 1| {unit:.1e} (<= 1e-13)"
        ),
    )
}

/// Direct streak-class sum for Pr(success), independent of the library.
fn oracle_pr(d: &DerivedQuantities, delta: f64, k: usize) -> f64 {
    let (f, b, x) = (d.f, d.b, d.x);
    let s = [f.conj(), b + d.abs_f * x];
    let fl = [b + f * x, Complex64::new(d.abs_f, 0.0) + b * x];
    let mut ln_c = 0.0;
    let mut terms = Vec::new();
    for n in 1..=k {
        if n > 1 {
            ln_c += ((k - n + 1) as f64).ln() - ((n - 1) as f64).ln();
        }
        let m = ln_c.exp();
        let weight = (1.0 - delta) * m + delta * m * m;
        let ln_w2 = 2.0 * ((k - n) as f64 * d.abs_f.ln() + (n - 1) as f64 * d.abs_b().ln());
        let p = n % 2;
        terms.push((weight.ln() + ln_w2, s[p].norm_sqr(), fl[p].norm_sqr()));
    }
    let max = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (lw, s2, f2) in terms {
        let w = (lw - max).exp();
        num += w * s2;
        den += w * (s2 + f2);
    }
    num / den
}

fn criterion_6() -> Result<Outcome, Error> {
    let d = DerivedQuantities::new(10_000, 10.0)?;
    let deltas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let (mut rel, mut oracle_rel, mut endpoint) = (0.0f64, 0.0f64, 0.0f64);
    let (mut in_range, mut monotone) = (true, true);
    for k in [10, 100, 1000] {
        for delta in deltas {
            let m = DeltaModel::new(d, delta)?;
            let direct = success_probability_direct(&m, k)?;
            let closed = success_probability_closed(&m, k)?.pr_success;
            rel = rel.max(((closed - direct) / direct).abs());
            oracle_rel = oracle_rel.max(((oracle_pr(&d, delta, k) - direct) / direct).abs());
            in_range &= (0.0..=1.0).contains(&direct) && (0.0..=1.0).contains(&closed);
        }
        let at = |delta: f64| -> Result<f64, Error> {
            Ok(success_probability_closed(&DeltaModel::new(d, delta)?, k)?.pr_success)
        };
        endpoint = endpoint
            .max((at(0.0)? - success_probability_delta0(&d, k)?).abs())
            .max((at(1.0)? - success_probability_delta1(&d, k)?).abs());
        let prs = (0..=10)
            .map(|i| success_probability_direct(&DeltaModel::new(d, i as f64 / 10.0)?, k))
            .collect::<Result<Vec<_>, Error>>()?;
        monotone &= prs.windows(2).all(|w| w[1] >= w[0]) || prs.windows(2).all(|w| w[1] <= w[0]);
    }
    let k1: Vec<f64> = deltas
        .iter()
        .map(|&delta| success_probability_direct(&DeltaModel::new(d, delta)?, 1))
        .collect::<Result<_, Error>>()?;
    let k1_spread = k1.iter().map(|p| (p - k1[0]).abs()).fold(0.0, f64::max);
    outcome(
        rel <= 0.1 && oracle_rel <= 1e-12 && endpoint <= 1e-12 && in_range && monotone && k1_spread <= 1e-15,
        format!(
            "direct vs closed {rel:.4} (<= 0.1), direct vs oracle {oracle_rel:.1e}, endpoints {endpoint:.1e} (<= 1e-12), in [0,1]: {in_range}, monotone: {monotone}, K=1 spread {k1_spread:.1e}"
        ),
    )
}

fn criterion_7() -> Result<Outcome, Error> {
    let ns = [400, 1600, 6400, 25_600, 102_400];
    let quantum = scaling_fit(1.0, 0.5, 1.0, &ns)?.exponent;
    let classical = scaling_fit(0.0, 0.25, 1.0, &ns)?.exponent;
    let quantum_low = scaling_fit(1.0, 0.25, 1.0, &ns)?.exponent;
    let mixed = scaling_fit(0.5, 0.25, 1.0, &ns)?.exponent;
    let lo = quantum_low.min(classical);
    let hi = quantum_low.max(classical);
    outcome(
        (quantum - 0.5).abs() <= 0.05 && (classical - 1.0).abs() <= 0.05 && mixed > lo && mixed < hi,
        format!(
            "delta=1 exponent {quantum:.4} (0.50 +- 0.05), delta=0 exponent {classical:.4} (1.00 +- 0.05), delta=0.5 exponent {mixed:.4} in ({lo:.4}, {hi:.4})"
        ),
    )
}

fn criterion_8() -> Result<Outcome, Error> {
    let d = DerivedQuantities::new(4, 0.0)?;
    let mut mags: Vec<f64> = History::enumerate(3)?
        .map(|h| branch_amplitude_exact(&h, &d).norm())
        .filter(|m| *m > 0.0)
        .collect();
    mags.sort_by(f64::total_cmp);
    let two = mags.len() == 2
        && (mags[0] - d.x).abs() <= 1e-15
        && (mags[1] - (1.0 - d.x * d.x).sqrt()).abs() <= 1e-15;

    let m = DeltaModel::from_nt(10_000, 10.0, 0.0)?;
    let unreachable = matches!(search_time(&m, 0.9), Err(Error::NoCrossing { .. }));

    let mut finite = true;
    for delta in [0.0, 0.5, 1.0] {
        let m = DeltaModel::new(d, delta)?;
        for k in [1, 2, 10, 100] {
            let e = evaluate_direct(&m, k)?;
            let c = success_probability_closed(&m, k)?.pr_success;
            finite &= [e.pr_success, e.pr_failure, e.log_norm_a2, c]
                .iter()
                .all(|v| v.is_finite());
        }
    }
    outcome(
        two && unreachable && finite,
        format!("t=0 nonzero branches {mags:?}; threshold 0.9 unreachable: {unreachable}; b=0 values finite: {finite}"),
    )
}

fn criterion_9() -> Result<Outcome, Error> {
    let dir = std::env::temp_dir().join(format!("dechist-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let run = |jobs: &str| -> Vec<u8> {
        let out = dir.join(format!("sweep-{jobs}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_dechist"))
            .args([
                "delta-sweep",
                "--n",
                "10000",
                "--t",
                "10",
                "--k",
                "1,10,100,1000",
            ])
            .args([
                "--delta",
                "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1",
                "--jobs",
                jobs,
            ])
            .arg("--out")
            .arg(&out)
            .status()
            .expect("run dechist");
        assert!(status.success(), "delta-sweep failed");
        std::fs::read(&out).expect("read sweep output")
    };
    let (a, b, c) = (run("1"), run("8"), run("8"));
    let _ = std::fs::remove_dir_all(&dir);
    outcome(
        a == b && b == c && !a.is_empty(),
        format!(
            "{} bytes, --jobs 1 vs --jobs 8 identical: {}",
            a.len(),
            a == b && b == c
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion, u64); 9] = [
        ("closed-form fidelity", criterion_1, 5),
        ("resummation identity", criterion_2, 10),
        ("decoherence functional", criterion_3, 1),
        ("Grover time", criterion_4, 5),
        ("Legendre identity suite", criterion_5, 2),
        ("delta-model consistency", criterion_6, 10),
        ("scaling crossover", criterion_7, 60),
        ("degenerate inputs", criterion_8, 1),
        ("determinism", criterion_9, 10),
    ];
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (passed, detail) = match result {
            Ok(o) => (o.passed && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {} [{}] {name}: {detail}; {:.3} s (limit {budget} s)",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
