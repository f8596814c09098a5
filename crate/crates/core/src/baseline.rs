//! First-moment (Erdős) lower bound for r(l, Cl), optimised over the edge
//! probability, and its comparison with the sphere-graph bound (M_C + eps)^l.
//!
//! The blue clique size is the real number m = Cl throughout, and n enters
//! only through t = ln n, so every quantity stays finite for l in the
//! thousands.

use serde::{Deserialize, Serialize};

use crate::constants::{solve_p_c, threshold_constants};
use crate::error::{domain, Result};
use crate::special::{ln_gamma, ln_gamma_ratio};

pub const DEFAULT_THRESHOLD: f64 = 0.99;
/// Largest n checked on the integers; beyond it only ln n is reported.
pub const INTEGER_LIMIT: f64 = 4_503_599_627_370_496.0; // 2^52

const P_FLOOR: f64 = 1e-12;

/// ln binom(n, j) for n = e^t and real j >= 0; -inf when n < j.
pub fn ln_binom(t: f64, j: f64) -> f64 {
    if t < 30.0 {
        // exp(ln n) may land a rounding step below an integer n = j.
        let n = t.exp();
        if n < j * (1.0 - 1e-12) {
            return f64::NEG_INFINITY;
        }
        return ln_gamma_ratio(n.max(j) + 1.0, j) - ln_gamma(j + 1.0);
    }
    // n > 1e13: ln prod (n - i) = j t + sum ln(1 - i/n), the sum being
    // -j(j-1)/(2n) up to O(j^3/n^2).
    j * t - 0.5 * j * (j - 1.0) * (-t).exp() - ln_gamma(j + 1.0)
}

fn pairs(j: f64) -> f64 {
    0.5 * j * (j - 1.0)
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Union-bound terms ln A(n, p) and ln B(n, p) for red K_l and blue K_m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub ell: f64,
    pub m: f64,
}

impl Problem {
    pub fn new(c_ratio: f64, ell: usize) -> Result<Self> {
        if !(c_ratio >= 1.0) || !c_ratio.is_finite() {
            return domain(format!("C must be a finite ratio >= 1, got {c_ratio}"));
        }
        if ell < 3 {
            return domain(format!("the baseline needs l >= 3, got {ell}"));
        }
        Ok(Problem { ell: ell as f64, m: c_ratio * ell as f64 })
    }

    pub fn ln_a(&self, t: f64, p: f64) -> f64 {
        ln_binom(t, self.ell) + pairs(self.ell) * p.ln()
    }

    pub fn ln_b(&self, t: f64, p: f64) -> f64 {
        ln_binom(t, self.m) + pairs(self.m) * (-p).ln_1p()
    }

    pub fn ln_f(&self, t: f64, p: f64) -> f64 {
        log_add(self.ln_a(t, p), self.ln_b(t, p))
    }

    /// Golden-section minimisation of ln f(e^t, .) over (0, 1/2]; f is
    /// convex in p there, the minimum may sit on p = 1/2.
    pub fn min_over_p(&self, t: f64) -> (f64, f64) {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (P_FLOOR, 0.5);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut f1, mut f2) = (self.ln_f(t, x1), self.ln_f(t, x2));
        for _ in 0..200 {
            if b - a < 1e-14 {
                break;
            }
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = self.ln_f(t, x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = self.ln_f(t, x2);
            }
        }
        let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        let edge = self.ln_f(t, 0.5);
        if edge <= best.1 {
            best = (0.5, edge);
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct BaselineResult {
    pub C: f64,
    pub ell: usize,
    pub threshold: f64,
    pub p_opt: f64,
    /// Largest integer n with min_p f(n, p) <= threshold, when below 2^52.
    pub n_opt: Option<u64>,
    /// ln n_opt, or ln of the real crossing point when n_opt is absent.
    pub log_n: f64,
    pub A_term: f64,
    pub B_term: f64,
    pub log_A: f64,
    pub log_B: f64,
}

pub fn erdos_bound(c_ratio: f64, ell: usize) -> Result<BaselineResult> {
    erdos_bound_at(c_ratio, ell, DEFAULT_THRESHOLD)
}

pub fn erdos_bound_at(c_ratio: f64, ell: usize, threshold: f64) -> Result<BaselineResult> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return domain(format!("threshold {threshold} outside (0, 1)"));
    }
    let prob = Problem::new(c_ratio, ell)?;
    let level = threshold.ln();
    let below = |t: f64| prob.min_over_p(t).1 <= level;
    let lo0 = prob.ell.max(prob.m).ln();
    if !below(lo0) {
        return domain("the union bound exceeds the threshold already at n = max(l, Cl)");
    }
    let (mut lo, mut step) = (lo0, 1.0);
    let mut hi = lo + step;
    while below(hi) {
        lo = hi;
        step *= 2.0;
        hi = lo + step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let n_real = lo.exp();
    let (t, n_opt) = if n_real < INTEGER_LIMIT {
        let mut n = n_real.floor();
        // Settle the crossing on the integers.
        while below((n + 1.0).ln()) {
            n += 1.0;
        }
        while n > 1.0 && !below(n.ln()) {
            n -= 1.0;
        }
        (n.ln(), Some(n as u64))
    } else {
        (lo, None)
    };
    let (p_opt, _) = prob.min_over_p(t);
    let (log_a, log_b) = (prob.ln_a(t, p_opt), prob.ln_b(t, p_opt));
    Ok(BaselineResult {
        C: c_ratio,
        ell,
        threshold,
        p_opt,
        n_opt,
        log_n: t,
        A_term: log_a.exp(),
        B_term: log_b.exp(),
        log_A: log_a,
        log_B: log_b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub f_at_n: f64,
    pub min_f_at_next: f64,
    pub holds: bool,
}

/// f(n_opt, p_opt) <= threshold < min_p f(n_opt + 1, p), re-evaluated directly.
pub fn check_sandwich(res: &BaselineResult) -> Result<Option<SandwichCheck>> {
    let Some(n) = res.n_opt else {
        return Ok(None);
    };
    let prob = Problem::new(res.C, res.ell)?;
    let f_at_n = prob.ln_f((n as f64).ln(), res.p_opt).exp();
    let min_f_at_next = prob.min_over_p(((n + 1) as f64).ln()).1.exp();
    Ok(Some(SandwichCheck {
        f_at_n,
        min_f_at_next,
        holds: f_at_n <= res.threshold && res.threshold < min_f_at_next,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub ell: usize,
    pub p_opt: f64,
    /// |p_opt - p_C|.
    pub drift: f64,
}

pub fn p_drift_check(c_ratio: f64, ells: &[usize]) -> Result<Vec<DriftRow>> {
    if ells.windows(2).any(|w| w[1] <= w[0]) {
        return domain("l values must be strictly increasing");
    }
    let p_c = solve_p_c(c_ratio)?;
    ells.iter()
        .map(|&ell| {
            let p_opt = erdos_bound(c_ratio, ell)?.p_opt;
            Ok(DriftRow { ell, p_opt, drift: (p_opt - p_c).abs() })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaC {
    pub value: f64,
    /// C = 1: the exponent vanishes and beta is 1 by convention.
    pub degenerate: bool,
}

/// H(x) = -x ln x - (1 - x) ln(1 - x).
pub fn entropy(x: f64) -> f64 {
    -x * x.ln() - (1.0 - x) * (-x).ln_1p()
}

pub fn beta_c(c_ratio: f64) -> Result<BetaC> {
    if c_ratio == 1.0 {
        return Ok(BetaC { value: 1.0, degenerate: true });
    }
    if !(c_ratio > 1.0) || !c_ratio.is_finite() {
        return domain(format!("beta_C needs C > 1, got {c_ratio}"));
    }
    let p = solve_p_c(c_ratio)?;
    let lq = (-p).ln_1p();
    let exponent = (0.5 * (c_ratio - 1.0) * lq - c_ratio.ln()) * (1.0 - p) * lq / entropy(p);
    Ok(BetaC { value: exponent.exp(), degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRatio {
    pub c_ratio: f64,
    pub ell: usize,
    pub eps: f64,
    /// l ln(M_C + eps).
    pub log_sphere_bound: f64,
    pub log_erdos: f64,
    /// log_sphere_bound - log_erdos.
    pub log_ratio: f64,
    /// l ln(1 + eps / M_C).
    pub geometric_log_gain: f64,
    /// ln n_opt - l ln M_C.
    pub erdos_excess: f64,
}

/// (M_C + eps)^l / Er(l, Cl) in log form with eps = eps(C).
pub fn improvement_ratio(c_ratio: f64, ell: usize) -> Result<ImprovementRatio> {
    if !(c_ratio > 1.0) {
        return domain(format!("the improvement ratio needs C > 1, got {c_ratio}"));
    }
    let eps = threshold_constants(c_ratio)?.eps;
    improvement_ratio_with(c_ratio, ell, eps)
}

/// As [`improvement_ratio`] for a caller-chosen eps >= 0.
pub fn improvement_ratio_with(c_ratio: f64, ell: usize, eps: f64) -> Result<ImprovementRatio> {
    if !(eps >= 0.0) {
        return domain(format!("eps must be non-negative, got {eps}"));
    }
    let m_c = threshold_constants(c_ratio)?.M_C;
    let base = erdos_bound(c_ratio, ell)?;
    let l = ell as f64;
    let geometric_log_gain = l * (eps / m_c).ln_1p();
    let erdos_excess = base.log_n - l * m_c.ln();
    Ok(ImprovementRatio {
        c_ratio,
        ell,
        eps,
        log_sphere_bound: l * m_c.ln() + geometric_log_gain,
        log_erdos: base.log_n,
        log_ratio: geometric_log_gain - erdos_excess,
        geometric_log_gain,
        erdos_excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn direct_binom(n: u64, j: u64) -> f64 {
        (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn log_space_matches_direct_evaluation() {
        for ell in [3usize, 5, 8, 12, 15] {
            for c_ratio in [1.0, 2.0, 3.0] {
                let prob = Problem::new(c_ratio, ell).unwrap();
                let m = (c_ratio * ell as f64) as u64;
                for n in [m, m + 7, 10 * m, 400] {
                    for p in [0.1f64, 0.3, 0.5] {
                        let a = direct_binom(n, ell as u64) * p.powf(pairs(ell as f64));
                        let b = direct_binom(n, m) * (1.0 - p).powf(pairs(m as f64));
                        let got = prob.ln_f((n as f64).ln(), p).exp();
                        assert!((got - (a + b)).abs() <= 1e-9 * (a + b), "l={ell} C={c_ratio} n={n} p={p}");
                    }
                }
            }
        }
    }

    #[test]
    fn large_n_branch_is_continuous() {
        for j in [3.0, 40.0, 400.0] {
            let t = 30.0;
            let below = ln_binom(t - 1e-9, j);
            let above = ln_binom(t + 1e-9, j);
            assert!((below - above).abs() < 1e-6 * below.abs(), "{j}: {below} {above}");
        }
        assert_eq!(ln_binom(1.0, 5.0), f64::NEG_INFINITY);
    }

    #[test]
    fn golden_section_matches_grid() {
        for &(c_ratio, ell, t) in &[(1.0, 10, 5.0), (2.0, 10, 3.5), (1.5, 20, 7.0), (3.0, 8, 4.0), (5.0, 6, 4.0)] {
            let prob = Problem::new(c_ratio, ell).unwrap();
            let (p, v) = prob.min_over_p(t);
            let grid = (1..=10_000).map(|i| 0.5 * i as f64 / 10_000.0);
            let (gp, gv) = grid.map(|q| (q, prob.ln_f(t, q))).fold((0.0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
            assert!((p - gp).abs() <= 1e-4, "C={c_ratio}: {p} vs {gp}");
            assert!(v <= gv + 1e-12);
        }
    }

    #[test]
    fn symmetric_case() {
        let r = erdos_bound(1.0, 20).unwrap();
        assert!(r.p_opt > 0.45 && r.p_opt < 0.55);
        assert!((r.p_opt - 0.5).abs() < 1e-9);
        for ell in [20usize, 30, 40] {
            let r = erdos_bound(1.0, ell).unwrap();
            let l = ell as f64;
            let predicted = (l / std::f64::consts::E).ln() + 0.5 * (l - 1.0) * 2f64.ln();
            assert!((r.log_n - predicted).abs() <= 2f64.ln(), "l={ell}");
            assert!(check_sandwich(&r).unwrap().unwrap().holds);
        }
    }

    #[test]
    fn sandwich_and_balance() {
        for &(c_ratio, ell) in &[(1.0, 3), (1.0, 10), (2.0, 5), (2.0, 20), (1.5, 30), (5.0, 8)] {
            let r = erdos_bound(c_ratio, ell).unwrap();
            let s = check_sandwich(&r).unwrap().unwrap();
            assert!(s.holds, "C={c_ratio} l={ell}: {s:?}");
            assert!(r.A_term + r.B_term <= 0.99 * (1.0 + 1e-12));
            assert!((r.log_A - r.log_B).abs() <= 3.0 * (ell as f64).ln() + 3.0);
        }
        // l = 3, C = 1: f(4, 1/2) = 2 * 4/8 = 1 > 0.99 and f(3, 1/2) = 1/4.
        let r = erdos_bound(1.0, 3).unwrap();
        assert_eq!(r.n_opt, Some(3));
    }

    #[test]
    fn huge_l_stays_in_log_space() {
        let r = erdos_bound(2.0, 2000).unwrap();
        assert!(r.n_opt.is_none() && r.log_n.is_finite() && r.log_n > 900.0);
        assert!(check_sandwich(&r).unwrap().is_none());
    }

    #[test]
    fn drift_shrinks() {
        let rows = p_drift_check(2.0, &[20, 40, 80]).unwrap();
        assert!(rows[0].drift > 0.0);
        for w in rows.windows(2) {
            assert!(w[1].drift <= 0.7 * w[0].drift, "{rows:?}");
        }
        let one = p_drift_check(1.0, &[10, 40]).unwrap();
        assert!(one.iter().all(|r| (r.p_opt - 0.5).abs() < 1e-9));
        assert!(p_drift_check(2.0, &[40, 20]).is_err());
    }

    #[test]
    fn beta_values() {
        assert_eq!(beta_c(1.0).unwrap(), BetaC { value: 1.0, degenerate: true });
        assert!(beta_c(0.5).is_err());
        assert!((beta_c(1.0 + 1e-9).unwrap().value - 1.0).abs() < 1e-6);
        // C = 2 with the closed form p_2 = (3 - sqrt 5)/2, written out separately.
        let p: f64 = (3.0 - 5f64.sqrt()) / 2.0;
        let q = 1.0 - p;
        let h = -(p * p.ln() + q * q.ln());
        let want = ((0.5 * q.ln() - 2f64.ln()) * q * q.ln() / h).exp();
        assert!((beta_c(2.0).unwrap().value - want).abs() < 1e-12);
    }

    #[test]
    fn improvement_grows_with_eps() {
        let m = threshold_constants(2.0).unwrap().M_C;
        let eps = 0.05;
        let a = improvement_ratio_with(2.0, 1000, eps).unwrap();
        let b = improvement_ratio_with(2.0, 2000, eps).unwrap();
        let slope = (b.log_ratio - a.log_ratio) / 1000.0;
        let want = (eps / m).ln_1p();
        assert!((slope / want - 1.0).abs() <= 0.1, "{slope} vs {want}");
        let a0 = improvement_ratio_with(2.0, 1000, 0.0).unwrap();
        let b0 = improvement_ratio_with(2.0, 2000, 0.0).unwrap();
        assert!(b0.log_ratio - a0.log_ratio <= 0.0);
        let real = improvement_ratio(2.0, 100).unwrap();
        assert!(real.log_ratio.is_finite() && real.log_sphere_bound > 0.0);
        assert!(improvement_ratio(1.0, 100).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn n_opt_increases_with_l(c_ratio in 1.0f64..4.0, ell in 3usize..40) {
            let a = erdos_bound(c_ratio, ell).unwrap();
            let b = erdos_bound(c_ratio, ell + 1).unwrap();
            prop_assert!(b.log_n > a.log_n);
        }
    }
}
