//! The acceptance battery: sixteen numbered checks with pinned tolerances,
//! shared by the `verify` subcommand and the acceptance test target.

use std::f64::consts::{FRAC_PI_4, SQRT_2};
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::baseline::{check_sandwich, erdos_bound, p_drift_check};
use crate::certificate::Certificate;
use crate::constants::{solve_p_c, threshold_constants};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_clique_prob, estimate_coefficient_mean, estimate_kappa, exact_triangle_prob, hatz_uniformity_test,
    projection_slope, sample_clique_sequence, Setting,
};
use crate::geometry::{cap_probability, dot, fill_unit_vector, projection_norm_sq_cdf, solve_cap_threshold};
use crate::graph::{
    certify_lower_bound, find_mono_clique, union_bound_report, Adjacency, CertifyOutcome, Color, SphereGraph,
};
use crate::mc::{purpose, run_workers, substream};
use crate::perfect::{basis_alignment, corner_coordinates, dual_basis, is_perfect, spectral_diagnostics, PerfectnessRule};
use crate::special::normal_quantile;
use crate::stats::ks_statistic;

pub const CHECK_COUNT: u32 = 16;
/// Sample counts at the quick level never exceed this.
pub const QUICK_SAMPLE_CAP: u64 = 100_000;

pub const P_C_TOLERANCE: f64 = 1e-12;
pub const M_C_TOLERANCE: f64 = 1e-10;
pub const CAP_CLOSED_FORM_TOLERANCE: f64 = 1e-10;
pub const CAP_SOLVER_TOLERANCE: f64 = 1e-9;
pub const CPK_DECAY_RATIO: f64 = 0.6;
pub const BETA_KS_LIMIT: f64 = 0.006;
pub const DEPENDENCY_SIGMAS: f64 = 3.0;
pub const CORNER_TOLERANCE: f64 = 1e-9;
pub const SPECTRAL_TOLERANCE: f64 = 1e-9;
/// Frobenius diagnostics must shrink by 4 (+-50%) per doubling of D.
pub const SPECTRAL_SHRINK_RANGE: (f64, f64) = (2.0, 6.0);
pub const COEFFICIENT_SIGMAS: f64 = 3.0;
pub const COEFFICIENT_ABS_SIGMAS: f64 = 4.0;
pub const COEFFICIENT_RELATIVE: f64 = 0.25;
pub const SLOPE_RELATIVE: f64 = 0.3;
pub const INTERCEPT_SIGMAS: f64 = 3.0;
pub const SLOPE_RATIO_RELATIVE: f64 = 0.3;
pub const TELESCOPING_SIGMAS: f64 = 3.0;
pub const CERTIFY_ATTEMPTS: u64 = 10_000;
pub const CLIQUE_INSTANCES: u64 = 100;
pub const BASELINE_FACTOR: f64 = 2.0;
pub const DRIFT_RATIO: f64 = 0.7;
pub const QUICK_RERUN_SECONDS: f64 = 60.0;

/// c_{k,p} as a function of (k, p). Replaceable so that the suite's
/// sensitivity to a wrong threshold solver can itself be tested.
pub type CapSolver = Box<dyn Fn(usize, f64) -> Result<f64> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

impl Level {
    fn pick(self, quick: u64, full: u64) -> u64 {
        match self {
            Level::Quick => quick.min(QUICK_SAMPLE_CAP),
            Level::Full => full,
        }
    }
}

pub struct SuiteConfig {
    pub level: Level,
    pub seed: u64,
    pub workers: usize,
    cap_solver: CapSolver,
}

impl SuiteConfig {
    pub fn new(level: Level, seed: u64, workers: usize) -> Self {
        SuiteConfig {
            level,
            seed,
            workers: workers.max(1),
            cap_solver: Box::new(|k, p| Ok(solve_cap_threshold(k, p)?.c)),
        }
    }

    pub fn with_cap_solver(mut self, solver: CapSolver) -> Self {
        self.cap_solver = solver;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub metrics: Vec<Metric>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub level: Level,
    pub seed: u64,
    pub workers: usize,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    /// Same verdicts and bit-identical metrics; timings are ignored.
    pub fn same_results(&self, other: &SuiteReport) -> bool {
        self.checks.len() == other.checks.len()
            && self.checks.iter().zip(&other.checks).all(|(a, b)| {
                a.id == b.id
                    && a.passed == b.passed
                    && a.metrics.len() == b.metrics.len()
                    && a.metrics
                        .iter()
                        .zip(&b.metrics)
                        .all(|(x, y)| x.name == y.name && x.value.to_bits() == y.value.to_bits())
            })
    }
}

pub fn check_name(id: u32) -> &'static str {
    match id {
        1 => "constants",
        2 => "cap-closed-forms",
        3 => "cap-threshold-decay",
        4 => "projection-beta-law",
        5 => "geometric-dependency",
        6 => "corner-coordinates",
        7 => "spectra",
        8 => "coefficient-mean",
        9 => "projection-inner-product",
        10 => "telescoping",
        11 => "orthogonal-uniformity",
        12 => "certificate",
        13 => "clique-search-oracle",
        14 => "baseline",
        15 => "union-bound",
        16 => "determinism",
        _ => "unknown",
    }
}

struct Outcome {
    passed: bool,
    detail: String,
    metrics: Vec<Metric>,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome { passed, detail: detail.into(), metrics: Vec::new() }
    }

    fn metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.push(Metric { name: name.to_string(), value });
        self
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> SuiteReport {
    let ids: Vec<u32> = (1..=CHECK_COUNT).collect();
    run_checks(cfg, &ids)
}

/// Runs the listed checks in order at the configured level.
pub fn run_checks(cfg: &SuiteConfig, ids: &[u32]) -> SuiteReport {
    let checks: Vec<CheckResult> = ids.iter().map(|&id| run_check(cfg, id)).collect();
    SuiteReport {
        level: cfg.level,
        seed: cfg.seed,
        workers: cfg.workers,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

pub fn run_check(cfg: &SuiteConfig, id: u32) -> CheckResult {
    let start = Instant::now();
    let outcome = match id {
        1 => check_constants(),
        2 => check_cap_closed_forms(cfg),
        3 => check_cap_decay(cfg),
        4 => check_beta_law(cfg),
        5 => check_dependency(cfg),
        6 => check_corners(cfg),
        7 => check_spectra(cfg),
        8 => check_coefficient_mean(cfg),
        9 => check_projection_slope(cfg),
        10 => check_telescoping(cfg),
        11 => check_orthogonal_uniformity(cfg),
        12 => check_certificate(cfg),
        13 => check_clique_oracle(cfg),
        14 => check_baseline(),
        15 => check_union_bound(),
        16 => check_determinism(cfg),
        _ => Err(Error::Domain(format!("no check with id {id}"))),
    };
    let outcome = outcome.unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
    CheckResult {
        id,
        name: check_name(id).to_string(),
        passed: outcome.passed,
        detail: outcome.detail,
        metrics: outcome.metrics,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn p2() -> f64 {
    solve_p_c(2.0).expect("C = 2 is in the domain")
}

fn check_constants() -> Result<Outcome> {
    let p = solve_p_c(2.0)?;
    let p_err = (p - (3.0 - 5f64.sqrt()) / 2.0).abs();
    let m_err = (threshold_constants(2.0)?.M_C - (1.0 + 5f64.sqrt()) / 2.0).abs();
    let mut min_f = f64::INFINITY;
    for c in [1.1, 1.5, 2.0, 5.0, 10.0] {
        min_f = min_f.min(threshold_constants(c)?.f_pC);
    }
    let passed = p_err <= P_C_TOLERANCE && m_err <= M_C_TOLERANCE && min_f > 0.0;
    Ok(Outcome::new(passed, format!("|p_2 err| {p_err:.1e}, |M_2 err| {m_err:.1e}, min f(p_C) {min_f:.4}"))
        .metric("p_2", p)
        .metric("p_2_error", p_err)
        .metric("M_2_error", m_err)
        .metric("min_f_pC", min_f))
}

fn check_cap_closed_forms(cfg: &SuiteConfig) -> Result<Outcome> {
    let mut grid_err: f64 = 0.0;
    for i in 0..19 {
        let a = -0.9 + 0.1 * i as f64;
        grid_err = grid_err.max((cap_probability(2, a)? - (1.0 + a) / 2.0).abs());
    }
    let c2_err = ((cfg.cap_solver)(2, 0.25)? - SQRT_2 / 2.0).abs();
    let c1_err = ((cfg.cap_solver)(1, 0.25)? - FRAC_PI_4.sin()).abs();
    // Round trip: the solved threshold must reproduce p through the cap measure.
    let mut round_trip: f64 = 0.0;
    for k in [1usize, 2, 3, 10, 100, 1000, 10_000] {
        for p in [0.05, 0.2, p2(), 0.5] {
            let c = (cfg.cap_solver)(k, p)?;
            let a = -c / (k as f64).sqrt();
            let back = if (-1.0..=1.0).contains(&a) { cap_probability(k, a)? } else { f64::NAN };
            let err = (back - p).abs();
            round_trip = if err.is_nan() { f64::INFINITY } else { round_trip.max(err) };
        }
    }
    let passed = grid_err <= CAP_CLOSED_FORM_TOLERANCE
        && c2_err <= CAP_SOLVER_TOLERANCE
        && c1_err <= CAP_SOLVER_TOLERANCE
        && round_trip <= CAP_SOLVER_TOLERANCE;
    Ok(Outcome::new(
        passed,
        format!("grid {grid_err:.1e}, c(2,1/4) {c2_err:.1e}, c(1,1/4) {c1_err:.1e}, round trip {round_trip:.1e}"),
    )
    .metric("grid_error", grid_err)
    .metric("c_2_error", c2_err)
    .metric("c_1_error", c1_err)
    .metric("round_trip_error", round_trip))
}

fn check_cap_decay(cfg: &SuiteConfig) -> Result<Outcome> {
    let p = 0.3;
    let gaussian = -normal_quantile(p)?;
    let errors = [100usize, 400, 1600]
        .iter()
        .map(|&k| Ok(((cfg.cap_solver)(k, p)? - gaussian).abs()))
        .collect::<Result<Vec<f64>>>()?;
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[1] / w[0]).collect();
    let passed = ratios.iter().all(|&r| r <= CPK_DECAY_RATIO);
    Ok(Outcome::new(passed, format!(
            "errors {:.2e}, {:.2e}, {:.2e}; ratios {ratios:.3?}",
            errors[0], errors[1], errors[2]
        ))
        .metric("error_100", errors[0])
        .metric("error_400", errors[1])
        .metric("error_1600", errors[2])
        .metric("max_ratio", ratios.iter().copied().fold(0.0, f64::max)))
}

fn check_beta_law(cfg: &SuiteConfig) -> Result<Outcome> {
    let (k, r) = (200usize, 10usize);
    let n = cfg.level.pick(100_000, 100_000);
    let parts = run_workers(cfg.seed, purpose::SPHERE, cfg.workers, n, |rng, _, quota| {
        let mut y = vec![0.0; k + 1];
        (0..quota)
            .map(|_| {
                fill_unit_vector(rng, &mut y);
                y[..r].iter().map(|v| v * v).sum::<f64>()
            })
            .collect::<Vec<f64>>()
    });
    let samples: Vec<f64> = parts.concat();
    let d = ks_statistic(&samples, |x| projection_norm_sq_cdf(k, r, x));
    Ok(Outcome::new(d <= BETA_KS_LIMIT, format!("KS {d:.5} over {n} samples (limit {BETA_KS_LIMIT})"))
        .metric("ks", d)
        .metric("n", n as f64))
}

fn check_dependency(cfg: &SuiteConfig) -> Result<Outcome> {
    let setting = Setting::new(100, p2())?;
    let n = cfg.level.pick(100_000, 10_000_000);
    let red = estimate_clique_prob(&setting, 3, Color::Red, n, cfg.seed, cfg.workers)?;
    let blue = estimate_clique_prob(&setting, 3, Color::Blue, n, cfg.seed, cfg.workers)?;
    let (p, q) = (setting.p, 1.0 - setting.p);
    let red_gap = (p.powi(3) - red.value) / red.std_error;
    let blue_gap = (blue.value - q.powi(3)) / blue.std_error;
    let red_exact = exact_triangle_prob(100, setting.c, Color::Red)?;
    let blue_exact = exact_triangle_prob(100, setting.c, Color::Blue)?;
    let passed = red_gap > DEPENDENCY_SIGMAS && blue_gap > DEPENDENCY_SIGMAS;
    Ok(Outcome::new(
        passed,
        format!(
            "red {:.5} vs p^3 {:.5} ({red_gap:.1} se below), blue {:.5} vs (1-p)^3 {:.5} ({blue_gap:.1} se above)",
            red.value,
            p.powi(3),
            blue.value,
            q.powi(3)
        ),
    )
    .metric("red", red.value)
    .metric("red_se", red.std_error)
    .metric("red_exact", red_exact)
    .metric("blue", blue.value)
    .metric("blue_se", blue.std_error)
    .metric("blue_exact", blue_exact))
}

fn check_corners(cfg: &SuiteConfig) -> Result<Outcome> {
    let k = 500usize;
    let setting = Setting::new(k, p2())?;
    let rule = PerfectnessRule::for_ratio(2.0, 3, k)?;
    let pairs = 1000u64;
    let parts = run_workers(cfg.seed, purpose::SEQUENCE, cfg.workers, pairs, |rng, _, quota| {
        let mut worst: f64 = 0.0;
        let mut mismatches = 0u64;
        for _ in 0..quota {
            let r = rng.random_range(2..=20usize);
            let seq = loop {
                let seq: Vec<Vec<f64>> = (0..r)
                    .map(|_| {
                        let mut x = vec![0.0; k + 1];
                        fill_unit_vector(rng, &mut x);
                        x
                    })
                    .collect();
                if is_perfect(&seq, &rule)?.is_perfect {
                    break seq;
                }
            };
            let mut y = vec![0.0; k + 1];
            fill_unit_vector(rng, &mut y);
            let dec = dual_basis(&seq)?;
            let a = corner_coordinates(&dec, &y);
            let direct: Vec<f64> = seq.iter().map(|x| dot(&y, x)).collect();
            for (ai, di) in a.iter().zip(&direct) {
                worst = worst.max((ai - di).abs());
            }
            for color in [Color::Red, Color::Blue] {
                let by_corner = a.iter().all(|&v| setting.adjacent(color, v));
                let by_points = direct.iter().all(|&v| setting.adjacent(color, v));
                mismatches += u64::from(by_corner != by_points);
            }
        }
        Ok::<_, Error>((worst, mismatches))
    });
    let (mut worst, mut mismatches) = (0.0f64, 0u64);
    for part in parts {
        let (w, m) = part?;
        worst = worst.max(w);
        mismatches += m;
    }
    Ok(Outcome::new(
        worst <= CORNER_TOLERANCE && mismatches == 0,
        format!("max |a_i - <y, x_i>| {worst:.1e} over {pairs} pairs, {mismatches} membership mismatches"),
    )
    .metric("max_coordinate_error", worst)
    .metric("mismatches", mismatches as f64))
}

#[derive(Default)]
struct SpectralTally {
    duality: f64,
    reciprocity: f64,
    gram_identity: f64,
    dual_identity: f64,
    gram_frobenius: f64,
    dual_frobenius: f64,
    alignment: f64,
}

fn check_spectra(cfg: &SuiteConfig) -> Result<Outcome> {
    let (ell, r) = (3usize, 6usize);
    let n_seq = cfg.level.pick(50, 200);
    let mut tallies = Vec::new();
    for (i, d) in [20usize, 40].into_iter().enumerate() {
        let k = d * d * ell * ell;
        let rule = PerfectnessRule::for_ratio(2.0, ell, k)?;
        let parts = run_workers(cfg.seed ^ i as u64, purpose::PERFECT, cfg.workers, n_seq, |rng, _, quota| {
            let mut t = SpectralTally::default();
            for _ in 0..quota {
                let seq = loop {
                    let seq: Vec<Vec<f64>> = (0..r)
                        .map(|_| {
                            let mut x = vec![0.0; k + 1];
                            fill_unit_vector(rng, &mut x);
                            x
                        })
                        .collect();
                    if is_perfect(&seq, &rule)?.is_perfect {
                        break seq;
                    }
                };
                let dec = dual_basis(&seq)?;
                let vtx = dec.v.transpose() * &dec.x;
                for a in 0..r {
                    for b in 0..r {
                        let target = if a == b { 1.0 } else { 0.0 };
                        t.duality = t.duality.max((vtx[(a, b)] - target).abs());
                    }
                }
                for (mu, lambda) in dec.mu.iter().zip(&dec.lambda) {
                    t.reciprocity = t.reciprocity.max((mu - 1.0 / lambda).abs());
                }
                let s = spectral_diagnostics(&dec);
                t.gram_identity = t
                    .gram_identity
                    .max((s.gram_frobenius - s.gram_offdiagonal).abs())
                    .max((s.gram_frobenius - s.gram_spectral).abs());
                t.dual_identity = t.dual_identity.max((s.dual_frobenius - s.dual_spectral).abs());
                t.gram_frobenius += s.gram_frobenius;
                t.dual_frobenius += s.dual_frobenius;
                for al in basis_alignment(&dec) {
                    t.alignment = t.alignment.max((al.v_dot_e - al.expected_v_dot_e).abs());
                }
            }
            Ok::<_, Error>(t)
        });
        let mut total = SpectralTally::default();
        for part in parts {
            let t = part?;
            total.duality = total.duality.max(t.duality);
            total.reciprocity = total.reciprocity.max(t.reciprocity);
            total.gram_identity = total.gram_identity.max(t.gram_identity);
            total.dual_identity = total.dual_identity.max(t.dual_identity);
            total.alignment = total.alignment.max(t.alignment);
            total.gram_frobenius += t.gram_frobenius;
            total.dual_frobenius += t.dual_frobenius;
        }
        total.gram_frobenius /= n_seq as f64;
        total.dual_frobenius /= n_seq as f64;
        tallies.push(total);
    }
    let (a, b) = (&tallies[0], &tallies[1]);
    let exact = [a, b].iter().all(|t| {
        t.duality <= SPECTRAL_TOLERANCE
            && t.reciprocity <= SPECTRAL_TOLERANCE
            && t.gram_identity <= SPECTRAL_TOLERANCE
            && t.dual_identity <= SPECTRAL_TOLERANCE
            && t.alignment <= SPECTRAL_TOLERANCE
    });
    let gram_shrink = a.gram_frobenius / b.gram_frobenius;
    let dual_shrink = a.dual_frobenius / b.dual_frobenius;
    let (lo, hi) = SPECTRAL_SHRINK_RANGE;
    let passed = exact && (lo..=hi).contains(&gram_shrink) && (lo..=hi).contains(&dual_shrink);
    let worst = [a, b]
        .iter()
        .map(|t| t.duality.max(t.reciprocity).max(t.gram_identity).max(t.dual_identity).max(t.alignment))
        .fold(0.0, f64::max);
    Ok(Outcome::new(
        passed,
        format!("worst identity error {worst:.1e}; shrink per doubling of D: gram {gram_shrink:.2}, dual {dual_shrink:.2}"),
    )
    .metric("worst_identity_error", worst)
    .metric("gram_frobenius_d20", a.gram_frobenius)
    .metric("gram_frobenius_d40", b.gram_frobenius)
    .metric("dual_frobenius_d20", a.dual_frobenius)
    .metric("dual_frobenius_d40", b.dual_frobenius)
    .metric("gram_shrink", gram_shrink)
    .metric("dual_shrink", dual_shrink))
}

fn perfect_setting(k: usize) -> Result<Setting> {
    let t = threshold_constants(2.0)?;
    Ok(Setting::new(k, t.p_C)?.perfect(t.alpha_C, 3))
}

fn check_coefficient_mean(cfg: &SuiteConfig) -> Result<Outcome> {
    let setting = perfect_setting(10_000)?;
    let r = 6usize;
    let (n, s_values): (u64, Vec<usize>) = match cfg.level {
        Level::Quick => (10_000, vec![1, r]),
        Level::Full => (100_000, (1..=r).collect()),
    };
    let mut out = Outcome::new(true, String::new());
    let mut notes = Vec::new();
    for color in [Color::Red, Color::Blue] {
        for &s in &s_values {
            let cmp = estimate_coefficient_mean(&setting, r, s, color, n, cfg.seed, cfg.workers)?;
            let (est, se, pred) = (cmp.estimate.value, cmp.estimate.std_error, cmp.prediction);
            let signed = match color {
                Color::Red => -est / se,
                Color::Blue => est / se,
            };
            let close = (est - pred).abs() <= (COEFFICIENT_ABS_SIGMAS * se).max(COEFFICIENT_RELATIVE * pred.abs());
            let ok = signed >= COEFFICIENT_SIGMAS && close;
            out.passed &= ok;
            if !ok {
                notes.push(format!("{color:?} s={s}: {est:.3e} +- {se:.1e} vs {pred:.3e}"));
            }
            let tag = format!("{}_s{s}", color_tag(color));
            out = out.metric(&format!("{tag}_estimate"), est).metric(&format!("{tag}_se"), se);
        }
    }
    out.detail = if notes.is_empty() {
        format!("all {} estimates signed at >= 3 se and within tolerance of the prediction", 2 * s_values.len())
    } else {
        notes.join("; ")
    };
    Ok(out)
}

fn color_tag(color: Color) -> &'static str {
    match color {
        Color::Red => "red",
        Color::Blue => "blue",
    }
}

fn check_projection_slope(cfg: &SuiteConfig) -> Result<Outcome> {
    let setting = perfect_setting(10_000)?;
    let n = cfg.level.pick(2_000, 20_000);
    let s_values = [2usize, 4, 8];
    let red = projection_slope(&setting, &s_values, Color::Red, n, cfg.seed, cfg.workers)?;
    let blue = projection_slope(&setting, &s_values, Color::Blue, n, cfg.seed, cfg.workers)?;
    let mut passed = true;
    for rep in [&red, &blue] {
        passed &= (rep.slope / rep.predicted_slope - 1.0).abs() <= SLOPE_RELATIVE;
        passed &= rep.intercept.abs() <= INTERCEPT_SIGMAS * rep.intercept_std_error;
    }
    let p = setting.p;
    let ratio_target = (1.0 - p).powi(2) / (p * p);
    let ratio = red.slope / blue.slope;
    passed &= (ratio / ratio_target - 1.0).abs() <= SLOPE_RATIO_RELATIVE;
    Ok(Outcome::new(
        passed,
        format!(
            "red slope {:.3e} (pred {:.3e}), blue slope {:.3e} (pred {:.3e}), ratio {ratio:.3} (pred {ratio_target:.3})",
            red.slope, red.predicted_slope, blue.slope, blue.predicted_slope
        ),
    )
    .metric("red_slope", red.slope)
    .metric("red_intercept", red.intercept)
    .metric("red_intercept_se", red.intercept_std_error)
    .metric("blue_slope", blue.slope)
    .metric("blue_intercept", blue.intercept)
    .metric("blue_intercept_se", blue.intercept_std_error)
    .metric("slope_ratio", ratio))
}

fn check_telescoping(cfg: &SuiteConfig) -> Result<Outcome> {
    let setting = perfect_setting(10_000)?;
    let (n_outer, n_inner) = match cfg.level {
        Level::Quick => (1_000, 100),
        Level::Full => (20_000, 1_000),
    };
    let n_direct = cfg.level.pick(100_000, 10_000_000);
    let k1 = estimate_kappa(&setting, 1, Color::Red, 1, 1, cfg.seed, cfg.workers)?;
    let k2 = estimate_kappa(&setting, 2, Color::Red, n_outer, n_inner, cfg.seed, cfg.workers)?;
    let direct = estimate_clique_prob(&setting, 3, Color::Red, n_direct, cfg.seed, cfg.workers)?;
    let product = k1.estimate.value * k2.estimate.value;
    let k2_se = k2.estimate.std_error.max(k2.bootstrap_std_error);
    let combined = ((k1.estimate.value * k2_se).powi(2) + direct.std_error.powi(2)).sqrt();
    let gap = (product - direct.value).abs();
    Ok(Outcome::new(
        gap <= TELESCOPING_SIGMAS * combined,
        format!("kappa_1 kappa_2 = {product:.5}, direct {:.5}, gap {:.2} combined se", direct.value, gap / combined),
    )
    .metric("kappa_1", k1.estimate.value)
    .metric("kappa_2", k2.estimate.value)
    .metric("kappa_2_se", k2_se)
    .metric("direct", direct.value)
    .metric("direct_se", direct.std_error))
}

fn check_orthogonal_uniformity(cfg: &SuiteConfig) -> Result<Outcome> {
    let setting = perfect_setting(50)?;
    let mut rng = substream(cfg.seed, purpose::SEQUENCE, 1);
    let seq = sample_clique_sequence(&setting, 3, Color::Red, &mut rng, 1_000_000)?;
    let n = cfg.level.pick(100_000, 100_000);
    let rep = hatz_uniformity_test(&seq, Color::Red, &setting, n, cfg.seed, cfg.workers)?;
    Ok(Outcome::new(
        rep.uniform && rep.independent,
        format!(
            "max KS {:.5} (critical {:.5}), |corr| {:.5} (bound {:.5})",
            rep.max_ks,
            rep.critical,
            rep.correlation.abs(),
            rep.correlation_bound
        ),
    )
    .metric("max_ks", rep.max_ks)
    .metric("correlation", rep.correlation))
}

fn check_certificate(cfg: &SuiteConfig) -> Result<Outcome> {
    let (c_ratio, ell, k) = (1.0, 3usize, 50usize);
    let p = solve_p_c(c_ratio)?;
    let found = certify_lower_bound(c_ratio, ell, k, p, 5, CERTIFY_ATTEMPTS, cfg.seed, cfg.workers)?;
    let (reverified, attempt) = match &found {
        CertifyOutcome::Found(cert) => {
            let doc = Certificate::from_certified(c_ratio, cfg.seed, cert);
            let back = Certificate::decode(&doc.to_json())?;
            (back == doc && back.verify()?.passed, cert.attempt as f64)
        }
        CertifyOutcome::NotFound { .. } => (false, f64::NAN),
    };
    let six = certify_lower_bound(c_ratio, ell, k, p, 6, CERTIFY_ATTEMPTS, cfg.seed, cfg.workers)?;
    let six_exhausted = matches!(six, CertifyOutcome::NotFound { attempts } if attempts == CERTIFY_ATTEMPTS);
    Ok(Outcome::new(
        reverified && six_exhausted,
        format!("n=5 certified at attempt {attempt}, re-verified {reverified}; n=6 exhausted {six_exhausted}"),
    )
    .metric("attempt_n5", attempt)
    .metric("n6_exhausted", f64::from(u8::from(six_exhausted))))
}

/// Exhaustive search over all r-subsets.
fn has_clique_by_enumeration(adj: &Adjacency, r: usize) -> bool {
    fn extend(adj: &Adjacency, chosen: &mut Vec<usize>, next: usize, r: usize) -> bool {
        if chosen.len() == r {
            return true;
        }
        (next..adj.len()).any(|v| {
            if !chosen.iter().all(|&u| adj.get(u, v)) {
                return false;
            }
            chosen.push(v);
            let found = extend(adj, chosen, v + 1, r);
            chosen.pop();
            found
        })
    }
    extend(adj, &mut Vec::with_capacity(r), 0, r)
}

fn check_clique_oracle(cfg: &SuiteConfig) -> Result<Outcome> {
    let parts = run_workers(cfg.seed, purpose::GRAPH, cfg.workers, CLIQUE_INSTANCES, |rng, _, quota| {
        let mut disagreements = 0u64;
        let mut found = 0u64;
        for _ in 0..quota {
            let n = rng.random_range(5..=12usize);
            let r = rng.random_range(2..=5usize);
            let k = rng.random_range(2..=12usize);
            let p = rng.random_range(0.15..=0.5f64);
            let c = solve_cap_threshold(k, p)?.c;
            let points = (0..n)
                .map(|_| {
                    let mut x = vec![0.0; k + 1];
                    fill_unit_vector(rng, &mut x);
                    crate::geometry::UnitVector::new(x)
                })
                .collect::<Result<Vec<_>>>()?;
            let g = SphereGraph::from_points(k, p, c, points)?;
            for color in [Color::Red, Color::Blue] {
                let fast = find_mono_clique(&g, color, r);
                let slow = has_clique_by_enumeration(&g.adjacency(color), r);
                let valid = fast.as_ref().is_none_or(|w| w.vertices.len() == r && w.validates(&g));
                disagreements += u64::from(fast.is_some() != slow || !valid);
                found += u64::from(slow);
            }
        }
        Ok::<_, Error>((disagreements, found))
    });
    let (mut disagreements, mut found) = (0u64, 0u64);
    for part in parts {
        let (d, f) = part?;
        disagreements += d;
        found += f;
    }
    Ok(Outcome::new(
        disagreements == 0,
        format!("{disagreements} disagreements over {CLIQUE_INSTANCES} instances x 2 colors ({found} with a clique)"),
    )
    .metric("disagreements", disagreements as f64)
    .metric("cliques_present", found as f64))
}

fn check_baseline() -> Result<Outcome> {
    let mut passed = true;
    let mut sandwiches = 0u32;
    let mut out = Outcome::new(true, String::new());
    for ell in [20usize, 30, 40] {
        let res = erdos_bound(1.0, ell)?;
        if let Some(s) = check_sandwich(&res)? {
            passed &= s.holds;
            sandwiches += 1;
        }
        let l = ell as f64;
        let log_target = (l / std::f64::consts::E).ln() + 0.5 * (l - 1.0) * std::f64::consts::LN_2;
        let factor = (res.log_n - log_target).exp();
        passed &= (1.0 / BASELINE_FACTOR..=BASELINE_FACTOR).contains(&factor);
        out = out.metric(&format!("factor_l{ell}"), factor);
    }
    for ell in [20usize, 40] {
        if let Some(s) = check_sandwich(&erdos_bound(2.0, ell)?)? {
            passed &= s.holds;
            sandwiches += 1;
        }
    }
    let drift = p_drift_check(2.0, &[20, 40, 80])?;
    let ratios: Vec<f64> = drift.windows(2).map(|w| w[1].drift / w[0].drift).collect();
    passed &= ratios.iter().all(|&r| r <= DRIFT_RATIO);
    out.passed = passed && sandwiches >= 3;
    out.detail = format!("{sandwiches} sandwiches re-verified, drift ratios {ratios:.3?}");
    Ok(out.metric("drift_ratio_max", ratios.iter().copied().fold(0.0, f64::max)))
}

fn check_union_bound() -> Result<Outcome> {
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    for c in [1.5, 2.0, 5.0] {
        let d = threshold_constants(c)?.D;
        for ell in [100usize, 1_000, 10_000] {
            let rep = union_bound_report(c, ell, d)?;
            min_margin = min_margin.min(rep.auxiliary_margin);
            if !(rep.bound_below_one && rep.auxiliary_holds) {
                failures.push(format!("(C={c}, l={ell})"));
            }
        }
    }
    let detail = if failures.is_empty() {
        "final bound below 1 and auxiliary inequality hold on all 9 grid points".to_string()
    } else {
        format!("failing grid points: {}", failures.join(", "))
    };
    Ok(Outcome::new(failures.is_empty(), detail).metric("min_auxiliary_margin", min_margin))
}

fn check_determinism(cfg: &SuiteConfig) -> Result<Outcome> {
    let quick = SuiteConfig::new(Level::Quick, cfg.seed, cfg.workers);
    let ids: Vec<u32> = (1..CHECK_COUNT).collect();
    let first_start = Instant::now();
    let first = run_checks(&quick, &ids);
    let first_secs = first_start.elapsed().as_secs_f64();
    let second_start = Instant::now();
    let second = run_checks(&quick, &ids);
    let second_secs = second_start.elapsed().as_secs_f64();
    let identical = first.same_results(&second);
    Ok(Outcome::new(
        identical && second_secs < QUICK_RERUN_SECONDS,
        format!("quick suite rerun identical: {identical}; runs took {first_secs:.1} s and {second_secs:.1} s"),
    )
    .metric("identical", f64::from(u8::from(identical))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_checks_pass() {
        let cfg = SuiteConfig::new(Level::Quick, 11, 1);
        for id in [1, 2, 3, 14, 15] {
            let r = run_check(&cfg, id);
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn biased_cap_solver_fails_round_trip() {
        let cfg = SuiteConfig::new(Level::Quick, 11, 1)
            .with_cap_solver(Box::new(|k, p| Ok(solve_cap_threshold(k, p)?.c + 1e-3)));
        let r = run_check(&cfg, 2);
        assert!(!r.passed, "{}", r.detail);
    }

    #[test]
    fn unknown_check_fails() {
        let r = run_check(&SuiteConfig::new(Level::Quick, 0, 1), 99);
        assert!(!r.passed && r.detail.starts_with("error"));
    }
}
