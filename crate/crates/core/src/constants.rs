//! Closed-form threshold constants and the selection of the edge probability p*.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::solve_cap_threshold;
use crate::special::{normal_pdf, normal_quantile};

/// Solves C log(1-p) = log p on (0, 1/2].
pub fn solve_p_c(c_ratio: f64) -> Result<f64> {
    if !(c_ratio >= 1.0) || !c_ratio.is_finite() {
        return domain(format!("C must be a finite ratio >= 1, got {c_ratio}"));
    }
    if c_ratio == 1.0 {
        return Ok(0.5);
    }
    let g = |p: f64| c_ratio * (-p).ln_1p() - p.ln();
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 0.5);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    let slope = -c_ratio / (1.0 - p) - 1.0 / p;
    let polished = p - g(p) / slope;
    Ok(if polished > 0.0 && polished <= 0.5 && g(polished).abs() <= g(p).abs() {
        polished
    } else {
        p
    })
}

/// f(x) = 1/x^2 - C/(1-x)^2.
pub fn gap_f(c_ratio: f64, x: f64) -> f64 {
    1.0 / (x * x) - c_ratio / ((1.0 - x) * (1.0 - x))
}

/// a_{k,p} = (e^{-c^2}/(2 pi))^{3/2} for the cap threshold c = c_{k,p}.
pub fn second_order_gap(c: f64) -> f64 {
    ((-c * c).exp() / (2.0 * std::f64::consts::PI)).powf(1.5)
}

pub fn alpha_c(c_ratio: f64, p_c: f64) -> f64 {
    (20.0 * (c_ratio * (10.0 / p_c).ln()).sqrt()).max(1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ThresholdConstants {
    pub C: f64,
    pub p_C: f64,
    pub M_C: f64,
    pub alpha_C: f64,
    pub f_pC: f64,
    pub eps0: f64,
    pub D: f64,
    pub eps: f64,
}

pub fn threshold_constants(c_ratio: f64) -> Result<ThresholdConstants> {
    if !(c_ratio > 1.0) {
        return domain(format!("threshold constants need C > 1, got {c_ratio}"));
    }
    let p_c = solve_p_c(c_ratio)?;
    let m_c = 1.0 / p_c.sqrt();
    let alpha = alpha_c(c_ratio, p_c);
    let f = gap_f(c_ratio, p_c);
    let phi = normal_pdf(normal_quantile(p_c)?);
    let eps0 = phi.powi(3) * f / 18.0;
    let d = 1e5 * alpha.powi(4) / (p_c.powi(3) * f);
    Ok(ThresholdConstants {
        C: c_ratio,
        p_C: p_c,
        M_C: m_c,
        alpha_C: alpha,
        f_pC: f,
        eps0,
        D: d,
        eps: m_c * eps0 / (6.0 * d),
    })
}

/// Result of the root search for p*, together with the two inequalities it
/// is meant to deliver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PStar {
    pub p: f64,
    pub p_c: f64,
    pub bracket: (f64, f64),
    /// p_C - a_0 f(p_C)/(9D).
    pub target: f64,
    /// F(p) - target.
    pub residual: f64,
    /// F(p) <= target (up to the residual).
    pub red_inequality: bool,
    /// 1 - p + a C/(3D(1-p)^2) <= 1 - p_C - a_0 f(p_C)/(9D).
    pub blue_inequality: bool,
}

/// Finds p in (p_C, p_C + 1/(p_C^2 D)) with F(p) = p_C - a_0 f(p_C)/(9D),
/// where F(x) = x - a_{k,x}/(3 D x^2).
pub fn select_p_star(c_ratio: f64, d_scale: f64, k: usize) -> Result<PStar> {
    if !(c_ratio > 1.0) {
        return domain("p* selection needs C > 1");
    }
    if !(d_scale > 0.0) || k < 1 {
        return domain("p* selection needs D > 0 and k >= 1");
    }
    let p_c = solve_p_c(c_ratio)?;
    let f_c = gap_f(c_ratio, p_c);
    let a0 = second_order_gap(solve_cap_threshold(k, p_c)?.c);
    let a_at = |x: f64| -> Result<f64> { Ok(second_order_gap(solve_cap_threshold(k, x)?.c)) };
    let big_f = |x: f64| -> Result<f64> { Ok(x - a_at(x)? / (3.0 * d_scale * x * x)) };
    let target = p_c - a0 * f_c / (9.0 * d_scale);
    let p1 = p_c + a0 / (3.0 * d_scale) * (0.5 / (p_c * p_c) - f_c / 3.0);
    let p2 = p_c + a0 / (3.0 * d_scale) * (1.5 / (p_c * p_c) - f_c / 3.0);
    let upper = p_c + 1.0 / (p_c * p_c * d_scale);
    if !(p_c < p1 && p1 < p2 && p2 < upper && p2 <= 0.5) {
        return Err(Error::Infeasible(format!(
            "bracket ({p1}, {p2}) is not inside (p_C, p_C + 1/(p_C^2 D)) for D = {d_scale}"
        )));
    }
    let (mut lo, mut hi) = (p1, p2);
    let (f_lo, f_hi) = (big_f(lo)? - target, big_f(hi)? - target);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::Infeasible(format!(
            "sign condition F(p1) < target < F(p2) fails: {f_lo:e}, {f_hi:e}"
        )));
    }
    let mut residual = f_lo;
    let mut p = lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = big_f(mid)? - target;
        p = mid;
        residual = v;
        if v.abs() <= 1e-15 {
            break;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = a_at(p)?;
    let lhs_blue = 1.0 - p + a * c_ratio / (3.0 * d_scale * (1.0 - p) * (1.0 - p));
    let rhs_blue = 1.0 - p_c - a0 * f_c / (9.0 * d_scale);
    Ok(PStar {
        p,
        p_c,
        bracket: (p1, p2),
        target,
        residual,
        red_inequality: residual <= 1e-12,
        blue_inequality: lhs_blue <= rhs_blue + 1e-12,
    })
}

/// The full parameter bundle (C, l, D, k, p) with derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct RamseyConfig {
    pub C: f64,
    pub ell: usize,
    pub D: f64,
    pub k: usize,
    pub p: f64,
    pub constants: ThresholdConstants,
    pub c_kp: f64,
    pub a_kp: f64,
}

impl RamseyConfig {
    /// Bundle with k = D^2 l^2 and an explicitly chosen p.
    pub fn new(c_ratio: f64, ell: usize, d_scale: f64, p: f64) -> Result<Self> {
        let k_real = (d_scale * ell as f64).powi(2).round();
        if !(1.0..9.0e15).contains(&k_real) {
            return domain(format!("k = D^2 l^2 = {k_real:e} is not a usable dimension"));
        }
        Self::with_dimension(c_ratio, ell, d_scale, k_real as usize, p)
    }

    pub fn with_dimension(c_ratio: f64, ell: usize, d_scale: f64, k: usize, p: f64) -> Result<Self> {
        let constants = threshold_constants(c_ratio)?;
        let c_kp = solve_cap_threshold(k, p)?.c;
        Ok(RamseyConfig {
            C: c_ratio,
            ell,
            D: d_scale,
            k,
            p,
            constants,
            c_kp,
            a_kp: second_order_gap(c_kp),
        })
    }

    /// Size of the blue clique to avoid, ceil(C l).
    pub fn blue_size(&self) -> usize {
        blue_clique_size(self.C, self.ell)
    }
}

/// ceil(C l), with a small guard against representation error in C l.
pub fn blue_clique_size(c_ratio: f64, ell: usize) -> usize {
    let x = c_ratio * ell as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P2: f64 = 0.381_966_011_250_105_15; // (3 - sqrt 5)/2
    const GOLDEN: f64 = 1.618_033_988_749_895;

    #[test]
    fn p_c_closed_forms() {
        assert_eq!(solve_p_c(1.0).unwrap(), 0.5);
        let p = solve_p_c(2.0).unwrap();
        assert!((p - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((p - P2).abs() < 1e-12);
        assert!((1.0 / p.sqrt() - GOLDEN).abs() < 1e-10);
        assert!(solve_p_c(0.9).is_err());
        assert!(solve_p_c(f64::NAN).is_err());
    }

    #[test]
    fn p_c_decreasing_and_dominated() {
        let grid = [1.1, 1.5, 2.0, 3.0, 5.0, 10.0];
        let ps: Vec<f64> = grid.iter().map(|&c| solve_p_c(c).unwrap()).collect();
        for w in ps.windows(2) {
            assert!(w[1] < w[0]);
        }
        for (&c, &p) in grid.iter().zip(&ps) {
            assert!(p * p * c < (1.0 - p) * (1.0 - p));
            assert!((c * (-p).ln_1p() - p.ln()).abs() <= 1e-13);
        }
    }

    #[test]
    fn constants_for_c2() {
        let t = threshold_constants(2.0).unwrap();
        let f_exact = 1.0 / (P2 * P2) - 2.0 / ((1.0 - P2) * (1.0 - P2));
        assert!((t.f_pC - f_exact).abs() < 1e-10);
        assert!((t.f_pC - 1.6180).abs() < 1e-4);
        assert!((t.M_C * t.p_C.sqrt() - 1.0).abs() < 1e-12);
        assert_eq!(t.alpha_C, 1000.0);
        assert!((t.eps / t.M_C - t.eps0 / (6.0 * t.D)).abs() <= 1e-15 * t.eps / t.M_C);
        assert!(threshold_constants(1.0).is_err());
    }

    #[test]
    fn eps_vanishes_quadratically_near_one() {
        let e: Vec<f64> = [1.01, 1.02, 1.04].iter().map(|&c| threshold_constants(c).unwrap().eps).collect();
        for w in e.windows(2) {
            let ratio = w[1] / w[0];
            assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn alpha_switches_to_formula_for_large_c() {
        // 20 sqrt(C log(10/p_C)) exceeds 1000 once C log(10/p_C) > 2500.
        let t = threshold_constants(400.0).unwrap();
        let formula = 20.0 * (400.0 * (10.0 / t.p_C).ln()).sqrt();
        assert!(formula > 1000.0);
        assert_eq!(t.alpha_C, formula);
    }

    #[test]
    fn p_star_for_c2() {
        let s = select_p_star(2.0, 1e8, 10_000_000_000).unwrap();
        assert!(s.p > s.p_c && s.p < s.p_c + 1.0 / (s.p_c * s.p_c * 1e8));
        assert!(s.residual.abs() <= 1e-12);
        assert!(s.red_inequality && s.blue_inequality);
        assert!(s.bracket.0 < s.p && s.p < s.bracket.1);
    }

    #[test]
    fn p_star_offset_scales_inverse_d() {
        let a = select_p_star(2.0, 1e6, 1_000_000).unwrap();
        let b = select_p_star(2.0, 2e6, 1_000_000).unwrap();
        let ratio = (b.p - b.p_c) / (a.p - a.p_c);
        assert!((ratio - 0.5).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn p_star_infeasible_for_tiny_d() {
        assert!(matches!(select_p_star(2.0, 0.01, 100), Err(Error::Infeasible(_))));
    }

    #[test]
    fn blue_size_rounding() {
        assert_eq!(blue_clique_size(1.0, 3), 3);
        assert_eq!(blue_clique_size(1.5, 3), 5);
        assert_eq!(blue_clique_size(1.1, 10), 11);
    }

    proptest! {
        #[test]
        fn p_c_residual(c in 1.0f64..50.0) {
            let p = solve_p_c(c).unwrap();
            prop_assert!(p > 0.0 && p <= 0.5);
            prop_assert!((c * (-p).ln_1p() - p.ln()).abs() <= 1e-13);
        }

        #[test]
        fn gap_positive(c in 1.001f64..100.0) {
            let t = threshold_constants(c).unwrap();
            prop_assert!(t.f_pC > 0.0 && t.eps > 0.0);
        }
    }
}
