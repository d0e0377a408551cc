//! Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::time::Instant;

use igcp::compound::{
    compound_fdd, compound_igcp_cdf, compound_igcp_cdf_many, compound_igcp_pgf, compound_igcp_pmf_vector, d_process_pgf,
    sample_compound_igcp_at_times, sample_compound_igcp_value,
};
use igcp::gcp::{gcp_pmf_vector, sample_gcp_value};
use igcp::igcp::{
    first_passage_density, first_passage_finite_probability, fractional_integral_conditional_mean,
    fractional_integral_moments, igcp_levy_measure, igcp_ode_verify, igcp_pmf, sample_igcp_path, sample_igcp_value,
};
use igcp::kernels::{bell_polynomials, mittag_leffler_3p, PmfVector, WORK_BUDGET};
use igcp::mc::{chi_square_gof, covariance, ks_test, map_samples, run_mc, run_mc_multi, tabulate, McConfig};
use igcp::multivariate::{mv_codifference, mv_covariance_matrix, mv_pmf, mv_pmf_bell, sample_mv_value};
use igcp::qiter::{qiter_moments, qiter_pmf, sample_qiter_value};
use igcp::timechange::{
    caputo_residual_order, lrd_exponent, sample_tc_igcp_value, srd_increment_diagnostic, tc_factorial_moment,
    tc_igcp_moments, tc_igcp_pmf, tc_igcp_variance_single_denominator,
};
use igcp::verify::{run_suite, VerifyConfig};
use igcp::{GcpParams, IgcpParams, JumpLaw, MvIgcpParams, QIterParams, TcIgcpParams};
use num_complex::Complex;

const SEED: u64 = 20240601;
const SAMPLES: u64 = 100_000;
const MC_SE: f64 = 4.0;
const MC_P: f64 = 1e-3;

const OUTER: [f64; 2] = [1.0, 0.5];
const INNER: [f64; 2] = [0.7, 0.3];

fn mc(stream: u64) -> McConfig {
    McConfig::new(SAMPLES, SEED, 1).with_stream_offset(stream << 32)
}

fn desk() -> IgcpParams<f64> {
    IgcpParams::from_rates(OUTER.to_vec(), INNER.to_vec()).unwrap()
}

struct Line {
    pass: bool,
    detail: String,
}

impl Line {
    fn new() -> Self {
        Self { pass: true, detail: String::new() }
    }

    /// Record `value <= limit`.
    fn at_most(&mut self, label: &str, value: f64, limit: f64) {
        let ok = value <= limit;
        self.pass &= ok;
        self.push(format!("{label}={value:.3e} (<= {limit:e}{})", if ok { "" } else { " FAILED" }));
    }

    /// Record `value >= limit`.
    fn at_least(&mut self, label: &str, value: f64, limit: f64) {
        let ok = value >= limit;
        self.pass &= ok;
        self.push(format!("{label}={value:.3e} (>= {limit:e}{})", if ok { "" } else { " FAILED" }));
    }

    fn note(&mut self, text: String) {
        self.push(format!("[info] {text}"));
    }

    fn push(&mut self, s: String) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(&s);
    }
}

fn criterion_1() -> Line {
    let mut l = Line::new();
    let mut worst: f64 = 0.0;
    for &x in &[0.3, 1.0, 2.5, 6.0] {
        let rec = bell_polynomials(15, x).unwrap();
        for (n, &b) in rec.iter().enumerate() {
            let s = common::bell_series(n as u32, x);
            worst = worst.max((b - s).abs() / s.abs().max(1.0));
        }
    }
    l.at_most("bell recurrence vs series (rel, n<=15)", worst, 1e-12);
    let e = mittag_leffler_3p(1.0, 1.0, 1.0, 1.0f64).unwrap().value;
    l.at_most("|E_{1,1}(1) - e|", (e - std::f64::consts::E).abs(), 1e-12);
    let h = mittag_leffler_3p(0.5, 1.0, 1.0, -1.0f64).unwrap().value;
    l.at_most("|E_{1/2,1}(-1) - e*erfc(1)|", (h - libm::exp(1.0) * libm::erfc(1.0)).abs(), 1e-10);
    l
}

fn criterion_2() -> Line {
    let mut l = Line::new();
    let p = GcpParams::new(OUTER.to_vec()).unwrap();
    let n = p.truncation(1.0);
    let v = gcp_pmf_vector(&p, 1.0f64, n);
    l.at_most("|1 - mass|", (1.0 - v.mass()).abs(), 1e-9);
    l.at_most("certified tail", v.tail_bound, 1e-9);
    let xs = map_samples(|r| sample_gcp_value(&p, 1.0, r), &mc(1)).unwrap();
    let oracle = PmfVector::new(common::gcp_pmf(&OUTER, 1.0, 60), 0.0);
    let g = chi_square_gof(&tabulate(&xs), &oracle, 5.0).unwrap();
    l.at_least("sampler chi-square p", g.p_value, MC_P);
    l
}

fn criterion_3() -> Line {
    let mut l = Line::new();
    let p = desk();
    let mut worst: f64 = 0.0;
    for &t in &[0.5f64, 1.0, 2.0] {
        let oracle = common::igcp_pmf(&OUTER, &INNER, t, 12);
        for n in 0..=12u64 {
            worst = worst.max((igcp_pmf(&p, n, t).unwrap().value - oracle[n as usize]).abs());
        }
    }
    l.at_most("max |Bell form - conditioning series|", worst, 1e-8);
    l
}

fn criterion_4() -> Line {
    let mut l = Line::new();
    let p = desk();
    let levy = common::levy_measure(&OUTER, &INNER, 15);
    let times = [0.25, 0.5, 1.0, 1.5, 2.0];
    let sol = common::forward_equation_rk4(&levy, common::jump_rate(&OUTER, &INNER), 15, &times, 1e-3);
    let mut worst: f64 = 0.0;
    for (&t, row) in times.iter().zip(&sol) {
        for n in 0..=15u64 {
            worst = worst.max((igcp_pmf(&p, n, t).unwrap().value - row[n as usize]).abs());
        }
    }
    l.at_most("max |RK4 forward system - pmf|", worst, 1e-6);
    l.at_most("library ODE check", igcp_ode_verify(&p, 15, 2.0).unwrap(), 1e-6);
    l
}

fn criterion_5() -> Line {
    let mut l = Line::new();
    let p = desk();
    let s = common::s_const(&OUTER, &INNER);
    let tc = common::t_const(&OUTER, &INNER);
    let mean = run_mc(|r| sample_igcp_value(&p, 1.0, r) as f64, &mc(2)).unwrap();
    l.at_most("|z| mean vs S t", mean.z_score(s).abs(), MC_SE);
    let var = run_mc(|r| (sample_igcp_value(&p, 1.0, r) as f64 - s).powi(2), &mc(3)).unwrap();
    l.at_most("|z| variance vs T t", var.z_score(tc).abs(), MC_SE);
    let times = [0.5, 1.0, 2.0];
    let est = run_mc_multi(
        |r| {
            let path = sample_igcp_path(&p, 2.0, r);
            times.iter().map(|&t| path.value_at(t) as f64 - s * t).collect()
        },
        times.len(),
        &mc(4),
    )
    .unwrap();
    for (t, e) in times.iter().zip(&est) {
        l.at_most(&format!("|z| martingale t={t}"), e.z_score(0.0).abs(), MC_SE);
    }
    let u = 0.2f64;
    let lg = common::igcp_log_pgf(&OUTER, &INNER, u.exp(), 1.0);
    let em = run_mc(|r| (u * sample_igcp_value(&p, 1.0, r) as f64 - lg).exp(), &mc(5)).unwrap();
    l.at_most("|z| exponential martingale u=0.2", em.z_score(1.0).abs(), MC_SE);
    l
}

fn criterion_6() -> Line {
    let mut l = Line::new();
    let p = desk();
    let lam: f64 = OUTER.iter().sum();
    let closed: f64 = INNER.iter().enumerate().map(|(i, &m)| m * (1.0 - (-((i + 1) as f64) * lam).exp())).sum();
    let mut acc = 0.0;
    for n in (1..=120u64).rev() {
        acc += igcp_levy_measure(&p, n).unwrap();
    }
    l.at_most("|sum Levy masses - closed form|", (acc - closed).abs(), 1e-10);
    l
}

fn criterion_7() -> Line {
    let mut l = Line::new();
    let p = desk();
    let integral = common::simpson(
        |s| if s == 0.0 { first_passage_density(&p, 1, 1e-12, None).unwrap().value } else {
            first_passage_density(&p, 1, s, None).unwrap().value
        },
        0.0,
        60.0,
        3000,
    );
    let finite = first_passage_finite_probability(&p).value;
    l.at_most("|integral of density - Pr{T1 < inf}|", (integral - finite).abs(), 1e-4);
    let nu = common::jump_rate(&OUTER, &INNER);
    let levy = common::levy_measure(&OUTER, &INNER, 1);
    l.note(format!("Pr{{T1 < inf}}={finite:.10}, first-jump oracle {:.10}", levy[1] / nu));
    // Given T1 < ∞, T1 is the first jump time of M̂ and so Exp(ν).
    let hits: Vec<f64> =
        map_samples(|r| sample_igcp_path(&p, 40.0, r).first_hit(1), &mc(6)).unwrap().into_iter().flatten().collect();
    let g = ks_test(&hits, |s| 1.0 - (-nu * s).exp()).unwrap();
    l.at_least("KS p of hitting times", g.p_value, MC_P);
    l
}

fn criterion_8() -> Line {
    let mut l = Line::new();
    let p = desk();
    let t: f64 = 1.0;
    let tc = common::t_const(&OUTER, &INNER);
    let pairs = map_samples(
        |r| {
            let path = sample_igcp_path(&p, t, r);
            (path.value_at(t) as f64, path.integral(t))
        },
        &mc(7),
    )
    .unwrap();
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (cov, se) = covariance(&x, &y).unwrap();
    let target = tc * t * t / 2.0;
    l.at_most("|z| Cov(M, integral) vs T t^2/2", ((cov - target) / se).abs(), MC_SE);
    let lib = fractional_integral_moments(&p, 1.0, t).unwrap().cov_with_process;
    l.note(format!("library covariance at alpha=1: {lib:.10}, T t^2/2 = {target:.10}"));
    let s = common::s_const(&OUTER, &INNER);
    let pmf = common::igcp_pmf(&OUTER, &INNER, t, 60);
    for &alpha in &[0.6, 1.0] {
        let mut total = 0.0;
        for (n, &pn) in pmf.iter().enumerate() {
            if pn < 1e-14 {
                continue;
            }
            total += pn * fractional_integral_conditional_mean(&p, alpha, t, n as u64, WORK_BUDGET).unwrap().value;
        }
        let mean = s * t.powf(alpha + 1.0) / libm::tgamma(alpha + 2.0);
        l.at_most(&format!("total expectation rel err alpha={alpha}"), ((total - mean) / mean).abs(), 1e-3);
    }
    l
}

fn criterion_9() -> Line {
    let mut l = Line::new();
    let p = desk();
    let t: f64 = 1.0;
    let geo = JumpLaw::Geometric { p: 0.4 };
    let xs: Vec<u64> =
        map_samples(|r| sample_compound_igcp_value(&p, &geo, t, r) as u64, &mc(8)).unwrap();
    let pmf = compound_igcp_pmf_vector(&p, &geo, t, 120, None).unwrap();
    l.at_least("geometric-law chi-square p", chi_square_gof(&tabulate(&xs), &pmf, 5.0).unwrap().p_value, MC_P);

    let expo = JumpLaw::Exponential { rate: 1.0 };
    let zs = map_samples(|r| sample_compound_igcp_value(&p, &expo, t, r), &mc(9)).unwrap();
    let f0 = compound_igcp_cdf(&p, &expo, 0.0, t, None).unwrap().value;
    let mut positive: Vec<f64> = zs.into_iter().filter(|&z| z > 0.0).collect();
    positive.sort_by(f64::total_cmp);
    let cdf = compound_igcp_cdf_many(&p, &expo, &positive, t, None).unwrap();
    let lookup = |w: f64| {
        let i = positive.partition_point(|&x| x < w);
        (cdf[i] - f0) / (1.0 - f0)
    };
    let g = ks_test(&positive, lookup).unwrap();
    l.at_least("exponential-law KS p (given Z > 0)", g.p_value, MC_P);

    let mut worst: f64 = 0.0;
    for &u in &[0.0, 0.25, 0.5, 0.75, 0.95] {
        worst = worst.max((d_process_pgf(&p, &geo, u, t).unwrap().value - compound_igcp_pgf(&p, &geo, u, t).unwrap()).abs());
    }
    l.at_most("max |D-process pgf - compound pgf|", worst, 1e-10);

    let times = [0.5, 1.5];
    let targets = [2.0, 5.0];
    let exact = compound_fdd(&p, &geo, &times, &targets, None).unwrap().value;
    let e = run_mc(
        |r| {
            let z = sample_compound_igcp_at_times(&p, &geo, &times, r);
            if z[0] <= targets[0] && z[1] <= targets[1] { 1.0 } else { 0.0 }
        },
        &mc(10),
    )
    .unwrap();
    l.at_most("|z| two-time joint cell", e.z_score(exact).abs(), MC_SE);
    l
}

fn criterion_10() -> Line {
    let mut l = Line::new();
    let p = MvIgcpParams::<f64>::new(
        vec![GcpParams::new(vec![0.6, 0.3]).unwrap(), GcpParams::new(vec![0.4]).unwrap()],
        GcpParams::new(vec![0.8, 0.2]).unwrap(),
    )
    .unwrap();
    let t: f64 = 1.0;
    let mut worst: f64 = 0.0;
    for n1 in 0..=6u64 {
        for n2 in 0..=6u64 {
            let a = mv_pmf(&p, &[n1, n2], t, None).unwrap().value;
            let b = mv_pmf_bell(&p, &[n1, n2], t).unwrap().value;
            worst = worst.max((a - b).abs());
        }
    }
    l.at_most("max |series pmf - Bell form|", worst, 1e-8);

    let draws = map_samples(|r| sample_mv_value(&p, t, r), &mc(11)).unwrap();
    let cols: Vec<Vec<f64>> = (0..2).map(|i| draws.iter().map(|d| d[i] as f64).collect()).collect();
    let cov = mv_covariance_matrix(&p, t);
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        let (c, se) = covariance(&cols[i], &cols[j]).unwrap();
        l.at_most(&format!("|z| Cov({},{})", i + 1, j + 1), ((c - cov[i][j]) / se).abs(), MC_SE);
    }

    // τ(ω) = log E e^{ω(X−Y)} − log E e^{ωX} − log E e^{−ωY}, each mgf
    // assembled by conditioning on the shared inner count.
    let comps: [&[f64]; 2] = [&[0.6, 0.3], &[0.4]];
    let inner = [0.8, 0.2];
    let w_in = common::gcp_pmf(&inner, t, common::cutoff(&inner, t));
    let exponent = |c: &[f64], w: Complex<f64>| -> Complex<f64> {
        c.iter().enumerate().map(|(j, &lam)| ((w * (j + 1) as f64).exp() - 1.0) * lam).sum()
    };
    let log_mgf = |wx: Complex<f64>, wy: Complex<f64>| -> Complex<f64> {
        let e = exponent(comps[0], wx) + exponent(comps[1], wy);
        w_in.iter().enumerate().map(|(m, &pm)| (e * m as f64).exp() * pm).sum::<Complex<f64>>().ln()
    };
    let zero = Complex::new(0.0, 0.0);
    let mut worst: f64 = 0.0;
    let mut worst_opposite: f64 = 0.0;
    let omegas = [Complex::new(-0.05, 0.0), Complex::new(0.01, 0.0), Complex::new(0.1, 0.0), Complex::new(0.0, 0.05)];
    for &w in &omegas {
        let cross = mv_codifference(&p, 1, 2, w, t).unwrap();
        let assembled = log_mgf(w, -w) - log_mgf(w, zero) - log_mgf(zero, -w);
        worst = worst.max((cross - assembled).norm());
        worst_opposite = worst_opposite.max((cross + assembled).norm());
        let d1 = mv_codifference(&p, 1, 1, w, t).unwrap();
        worst = worst.max((d1 + log_mgf(w, zero) + log_mgf(-w, zero)).norm());
        let d2 = mv_codifference(&p, 2, 2, w, t).unwrap();
        worst = worst.max((d2 + log_mgf(zero, w) + log_mgf(zero, -w)).norm());
    }
    l.at_most("max |codifference - mgf assembly|", worst, 1e-8);
    l.note(format!("with the opposite overall sign on the assembly the gap is {worst_opposite:.3e}"));
    l
}

fn criterion_11() -> Line {
    let mut l = Line::new();
    let outer = [0.5, 0.25];
    let mid = [0.6];
    let innermost = [0.4, 0.2];
    let p = QIterParams::<f64>::new(
        GcpParams::new(outer.to_vec()).unwrap(),
        vec![GcpParams::new(mid.to_vec()).unwrap(), GcpParams::new(innermost.to_vec()).unwrap()],
    )
    .unwrap();
    let t: f64 = 1.0;
    let n_max = 12;
    let w_in = common::gcp_pmf(&innermost, t, common::cutoff(&innermost, t));
    let mut oracle = vec![0.0; n_max + 1];
    for (b, &pb) in w_in.iter().enumerate() {
        let w_mid = common::gcp_pmf(&mid, b as f64, common::cutoff(&mid, b as f64));
        for (a, &pa) in w_mid.iter().enumerate() {
            let w = pb * pa;
            if w < 1e-300 {
                continue;
            }
            let top = common::gcp_pmf(&outer, a as f64, n_max);
            for n in 0..=n_max {
                oracle[n] += w * top[n];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for n in 0..=n_max {
        worst = worst.max((qiter_pmf(&p, n as u64, t, None).unwrap().value - oracle[n]).abs());
    }
    l.at_most("max |recursion - double sum|", worst, 1e-8);
    let (m, v) = qiter_moments(&p, t);
    let e = run_mc(|r| sample_qiter_value(&p, t, r) as f64, &mc(12)).unwrap();
    l.at_most("|z| mean", e.z_score(m).abs(), MC_SE);
    let e = run_mc(|r| (sample_qiter_value(&p, t, r) as f64 - m).powi(2), &mc(13)).unwrap();
    l.at_most("|z| variance", e.z_score(v).abs(), MC_SE);
    l
}

fn criterion_12() -> Line {
    let mut l = Line::new();
    let alpha = 0.6;
    let p = TcIgcpParams::<f64>::from_rates(OUTER.to_vec(), INNER.to_vec(), alpha).unwrap();

    let mut worst: f64 = 0.0;
    for &t in &[0.5f64, 1.0, 2.0] {
        let oracle = common::tc_igcp_pmf(&OUTER, &INNER, alpha, t, 10);
        for n in 0..=10u64 {
            worst = worst.max((tc_igcp_pmf(&p, n, t, None).unwrap().value - oracle[n as usize]).abs());
        }
    }
    l.at_most("max |lattice pmf - conditioning oracle|", worst, 1e-6);

    let t: f64 = 1.0;
    let s = common::s_const(&OUTER, &INNER);
    let tc = common::t_const(&OUTER, &INNER);
    let g1 = libm::tgamma(alpha + 1.0);
    let ey = t.powf(alpha) / g1;
    let vy = t.powf(2.0 * alpha) * (2.0 / libm::tgamma(2.0 * alpha + 1.0) - 1.0 / (g1 * g1));
    let mean = s * ey;
    let var = s * s * vy + tc * ey;
    let (lib_mean, lib_var) = tc_igcp_moments(&p, t);
    l.at_most("|library mean - S t^a/G(a+1)|", (lib_mean - mean).abs(), 1e-12);
    l.at_most("|library variance - S^2 Var Y + T E Y|", (lib_var - var).abs(), 1e-12);
    let e = run_mc(|r| sample_tc_igcp_value(&p, t, r) as f64, &mc(14)).unwrap();
    l.at_most("|z| mean", e.z_score(mean).abs(), MC_SE);
    let e = run_mc(|r| (sample_tc_igcp_value(&p, t, r) as f64 - mean).powi(2), &mc(15)).unwrap();
    l.at_most("|z| variance", e.z_score(var).abs(), MC_SE);
    let single = tc_igcp_variance_single_denominator(&p, t);
    l.note(format!("single-denominator variance {single:.6} has |z|={:.1}", e.z_score(single).abs()));

    let mut worst: f64 = 0.0;
    for &t in &[0.5f64, 1.0, 2.0] {
        let ey = t.powf(alpha) / g1;
        let vy = t.powf(2.0 * alpha) * (2.0 / libm::tgamma(2.0 * alpha + 1.0) - 1.0 / (g1 * g1));
        let m = s * ey;
        let v = s * s * vy + tc * ey;
        let f1 = tc_factorial_moment(&p, 1, t, None).unwrap().value;
        let f2 = tc_factorial_moment(&p, 2, t, None).unwrap().value;
        worst = worst.max(((f1 - m) / m).abs()).max(((f2 - (v + m * m - m)) / (v + m * m - m)).abs());
    }
    l.at_most("factorial moments r=1,2 rel err", worst, 1e-6);

    let unit = TcIgcpParams::<f64>::from_rates(vec![1.0], vec![1.0], alpha).unwrap();
    let o = caputo_residual_order(&unit, 5, 2.0, 512).unwrap();
    l.at_most("|L1 order - (2 - alpha)|", (o.order - (2.0 - alpha)).abs(), 0.3);
    l.note(format!("L1 residuals {:.3e} -> {:.3e}, order {:.3}", o.coarse, o.fine, o.order));

    let grid: Vec<f64> = (0..=30).map(|i| 10f64.powf(3.0 + 0.1 * i as f64)).collect();
    let r = lrd_exponent(&unit, 1.0, &grid).unwrap();
    l.at_most("|fitted LRD exponent - alpha|", (r.fitted_exponent - alpha).abs(), 0.03);

    let srd_p = TcIgcpParams::<f64>::from_rates(vec![1.0], vec![1.0], 0.7).unwrap();
    let r = srd_increment_diagnostic(&srd_p, 1.0, 1.0, &[3.0, 6.0, 12.0, 24.0], &mc(16)).unwrap();
    l.at_least("SRD increment exponent", r.fitted_exponent, 1.0 + f64::EPSILON);
    l.note(format!("SRD exponent CI [{:.3}, {:.3}]", r.ci[0], r.ci[1]));
    l
}

fn criterion_13() -> Line {
    let mut l = Line::new();
    let cfg = VerifyConfig { master_seed: SEED, samples: SAMPLES, workers: 1 };
    let a = run_suite("desk", &cfg).unwrap().to_json();
    let b = run_suite("desk", &cfg).unwrap().to_json();
    let same = a.as_bytes() == b.as_bytes();
    l.pass &= same;
    l.push(format!("{} bytes, identical={same}", a.len()));
    l
}

fn main() {
    let criteria: [(&str, fn() -> Line); 13] = [
        ("kernels", criterion_1),
        ("gcp", criterion_2),
        ("igcp pmf", criterion_3),
        ("igcp forward equations", criterion_4),
        ("igcp moments and martingales", criterion_5),
        ("Levy mass", criterion_6),
        ("first passage", criterion_7),
        ("fractional integral", criterion_8),
        ("compound", criterion_9),
        ("multivariate", criterion_10),
        ("q-iterated", criterion_11),
        ("time-changed", criterion_12),
        ("determinism", criterion_13),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let line = run();
        let tag = if line.pass { "PASS" } else { "FAIL" };
        if !line.pass {
            failed += 1;
        }
        println!("{tag} criterion {:>2} {name} ({:.1}s): {}", i + 1, t0.elapsed().as_secs_f64(), line.detail);
    }
    println!("{} of {} criteria passed in {:.1}s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
