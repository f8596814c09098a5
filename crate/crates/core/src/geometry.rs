//! Points on the unit sphere S^k in R^{k+1}, cap measures, the cap threshold
//! c_{k,p}, orthogonal projections and the beta law of projection norms.

use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mc::{self, MCEstimate, Rng};
use crate::special::{betainc_pair, ln_beta, normal_quantile};

/// Tolerance on |x| = 1 accepted from external input.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Canonical inner product. Every color decision in the crate goes through
/// this function so that colors are bit-exact functions of the points.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitVector {
    coords: Vec<f64>,
}

impl UnitVector {
    /// Accepts coordinates whose norm is within [`UNIT_TOLERANCE`] of one.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|x| !x.is_finite()) {
            return domain("unit vector needs finite coordinates");
        }
        let n = norm(&coords);
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return domain(format!("vector norm {n} is not 1"));
        }
        Ok(UnitVector { coords })
    }

    /// Normalizes a nonzero vector.
    pub fn normalized(mut coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !(n > 0.0 && n.is_finite()) {
            return domain("cannot normalize a zero or non-finite vector");
        }
        coords.iter_mut().for_each(|x| *x /= n);
        Ok(UnitVector { coords })
    }

    /// Standard basis vector e_i of R^{dim}.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut coords = vec![0.0; dim];
        coords[i] = 1.0;
        UnitVector { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Ambient dimension k+1.
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.coords, &other.coords)
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

/// Fills `out` with a uniform point of the unit sphere in R^{out.len()}.
pub fn fill_unit_vector(rng: &mut Rng, out: &mut [f64]) {
    loop {
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let n = norm(out);
        if n > 0.0 {
            out.iter_mut().for_each(|x| *x /= n);
            return;
        }
    }
}

/// Uniform point of S^k.
pub fn sample_unit_vector(k: usize, rng: &mut Rng) -> Result<UnitVector> {
    if k < 1 {
        return domain("sphere dimension k must be at least 1");
    }
    let mut coords = vec![0.0; k + 1];
    fill_unit_vector(rng, &mut coords);
    Ok(UnitVector { coords })
}

/// Normalized measure of the cap {t : <x, e> <= a} for x uniform on S^k.
pub fn cap_probability(k: usize, a: f64) -> Result<f64> {
    if k < 1 {
        return domain("sphere dimension k must be at least 1");
    }
    if !(-1.0..=1.0).contains(&a) {
        return domain(format!("cap boundary {a} outside [-1, 1]"));
    }
    Ok(cap_cdf(k as f64, a))
}

/// Cap measure for real-valued dimension; `a` must lie in [-1, 1].
pub(crate) fn cap_cdf(k: f64, a: f64) -> f64 {
    if a == 0.0 {
        return 0.5;
    }
    let t = a.abs();
    let lower = 0.5 * betainc_pair(0.5 * k, 0.5, (1.0 - t) * (1.0 + t), t * t);
    if a < 0.0 {
        lower
    } else {
        1.0 - lower
    }
}

/// Density of <x, e> at `a` for x uniform on S^k.
pub fn cap_density(k: usize, a: f64) -> f64 {
    cap_density_real(k as f64, a)
}

pub(crate) fn cap_density_real(k: f64, a: f64) -> f64 {
    let s = (1.0 - a) * (1.0 + a);
    if s <= 0.0 {
        return 0.0;
    }
    (0.5 * (k - 2.0) * s.ln() - ln_beta(0.5, 0.5 * k)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapThreshold {
    pub k: usize,
    pub p: f64,
    pub c: f64,
    pub residual: f64,
}

impl CapThreshold {
    /// Inner-product threshold -c/sqrt(k) separating red from blue.
    pub fn boundary(&self) -> f64 {
        -self.c / (self.k as f64).sqrt()
    }
}

/// Solves cap_probability(k, -c/sqrt(k)) = p for c >= 0.
pub fn solve_cap_threshold(k: usize, p: f64) -> Result<CapThreshold> {
    if k < 1 {
        return domain("sphere dimension k must be at least 1");
    }
    if !(p > 0.0 && p <= 0.5) {
        return domain(format!("cap probability {p} outside (0, 1/2]"));
    }
    let c = cap_threshold_real(k as f64, p);
    let sk = (k as f64).sqrt();
    let residual = (cap_cdf(k as f64, -c / sk) - p).abs();
    Ok(CapThreshold { k, p, c, residual })
}

/// c_{k,p} for a real-valued dimension, used where k = D^2 l^2 exceeds the
/// integer range. Requires p in (0, 1/2].
pub(crate) fn cap_threshold_real(k: f64, p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-1.0f64, 0.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cap_cdf(k, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut a = 0.5 * (lo + hi);
    let dens = cap_density_real(k, a);
    if dens > 0.0 {
        let polished = a - (cap_cdf(k, a) - p) / dens;
        if polished > lo && polished < hi {
            a = polished;
        }
    }
    -a * k.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpkRow {
    pub k: usize,
    pub c: f64,
    pub gaussian: f64,
    pub error: f64,
}

/// Compares c_{k,p} with its Gaussian limit Phi^{-1}(1-p).
pub fn verify_cpk_asymptotic(p: f64, k_list: &[usize]) -> Result<Vec<CpkRow>> {
    let gaussian = if p == 0.5 { 0.0 } else { -normal_quantile(p)? };
    k_list
        .iter()
        .map(|&k| {
            if k < 10 {
                return domain("asymptotic table needs k >= 10");
            }
            let c = solve_cap_threshold(k, p)?.c;
            Ok(CpkRow { k, c, gaussian, error: c - gaussian })
        })
        .collect()
}

/// Linear subspace held as an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Subspace {
    basis: Vec<Vec<f64>>,
    ambient: usize,
}

impl Subspace {
    pub fn empty(ambient: usize) -> Self {
        Subspace { basis: Vec::new(), ambient }
    }

    /// Orthonormalizes `vectors` in order; fails if one of them lies in the
    /// span of its predecessors (relative residual below `tol`).
    pub fn span<V: AsRef<[f64]>>(vectors: &[V], tol: f64) -> Result<Self> {
        let ambient = vectors.first().map_or(0, |v| v.as_ref().len());
        let mut sub = Subspace::empty(ambient);
        for (i, v) in vectors.iter().enumerate() {
            let (_, added) = sub.extend(v.as_ref(), tol);
            if !added {
                return Err(Error::Domain(format!("vector {i} is dependent on its predecessors")));
            }
        }
        Ok(sub)
    }

    /// Modified Gram-Schmidt step with one re-orthogonalization pass. Returns
    /// the norm of the component of `v` orthogonal to the current span, and
    /// whether a new basis vector was added.
    pub fn extend(&mut self, v: &[f64], tol: f64) -> (f64, bool) {
        let scale = norm(v);
        let mut w = v.to_vec();
        for _ in 0..2 {
            for b in &self.basis {
                let h = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= h * bi);
            }
        }
        let r = norm(&w);
        if r <= tol * scale || r == 0.0 {
            return (r, false);
        }
        w.iter_mut().for_each(|x| *x /= r);
        self.basis.push(w);
        (r, true)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Coordinates of the projection of `y` in the orthonormal basis.
    pub fn coefficients(&self, y: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|b| dot(b, y)).collect()
    }

    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        for (b, h) in self.basis.iter().zip(self.coefficients(y)) {
            out.iter_mut().zip(b).for_each(|(o, bi)| *o += h * bi);
        }
        out
    }
}

pub fn project(sub: &Subspace, y: &[f64]) -> Vec<f64> {
    sub.project(y)
}

/// P(|pi(y)| > threshold) for y uniform on S^k and pi the projection onto a
/// fixed r-dimensional subspace; |pi(y)|^2 ~ Beta(r/2, (k-r+1)/2).
pub fn projection_norm_tail(k: usize, r: usize, threshold: f64) -> Result<f64> {
    if r < 1 || r > k {
        return domain(format!("projection rank r={r} must satisfy 1 <= r <= k={k}"));
    }
    if !(threshold >= 0.0) {
        return domain(format!("threshold {threshold} must be non-negative"));
    }
    if threshold >= 1.0 {
        return Ok(0.0);
    }
    let t2 = threshold * threshold;
    let (a, b) = (0.5 * r as f64, 0.5 * (k - r + 1) as f64);
    Ok(1.0 - betainc_pair(a, b, t2, (1.0 - threshold) * (1.0 + threshold)))
}

/// CDF of Beta(r/2, (k-r+1)/2), the law of |pi_r(y)|^2.
pub fn projection_norm_sq_cdf(k: usize, r: usize, x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    betainc_pair(0.5 * r as f64, 0.5 * (k - r + 1) as f64, x, 1.0 - x)
}

/// Exact projection of a uniform point of S^k onto `out.len()` fixed
/// orthonormal directions: `g / sqrt(|g|^2 + chi2)` with g standard normal
/// and chi2 on k+1-m degrees of freedom. Returns the norm of the remaining
/// orthogonal component.
pub fn sample_projection(rng: &mut Rng, k: usize, out: &mut [f64]) -> f64 {
    let m = out.len();
    debug_assert!(m <= k + 1);
    loop {
        let mut g2 = 0.0;
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
            g2 += *x * *x;
        }
        let rest = if m < k + 1 {
            ChiSquared::new((k + 1 - m) as f64)
                .expect("positive degrees of freedom")
                .sample(rng)
        } else {
            0.0
        };
        let total = g2 + rest;
        if total > 0.0 {
            let s = total.sqrt();
            out.iter_mut().for_each(|x| *x /= s);
            return (rest / total).sqrt();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedCapReport {
    pub k: usize,
    pub r: usize,
    pub p: f64,
    pub a_shift: f64,
    pub d_scale: f64,
    /// Cap boundary H = -c/sqrt(k) - A/(D sqrt(k)).
    pub boundary: f64,
    pub estimate: MCEstimate,
    /// p - A e^{-c^2/2} / (sqrt(2 pi) D).
    pub prediction: f64,
    /// cap_probability(k - r, H).
    pub exact: f64,
}

/// Monte Carlo estimate of P(<y, e> <= H) for y uniform on S^{k-r}.
#[allow(clippy::too_many_arguments)]
pub fn shifted_cap_check(
    k: usize,
    r: usize,
    p: f64,
    a_shift: f64,
    d_scale: f64,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<ShiftedCapReport> {
    if n == 0 {
        return domain("sample count must be positive");
    }
    if r < 1 || 2 * r > k {
        return domain(format!("need 1 <= r <= k/2, got r={r}, k={k}"));
    }
    let c = solve_cap_threshold(k, p)?.c;
    let sk = (k as f64).sqrt();
    let boundary = -c / sk - a_shift / (d_scale * sk);
    if !(-1.0..=1.0).contains(&boundary) {
        return domain("shifted boundary leaves [-1, 1]");
    }
    let m = k - r;
    let hits: u64 = mc::run_workers(seed, mc::purpose::SHIFTED_CAP, workers, n, |rng, _, quota| {
        let mut coord = [0.0];
        let mut hits = 0u64;
        for _ in 0..quota {
            sample_projection(rng, m, &mut coord);
            if coord[0] <= boundary {
                hits += 1;
            }
        }
        hits
    })
    .into_iter()
    .sum();
    let prediction = p - a_shift * (-0.5 * c * c).exp() / ((2.0 * std::f64::consts::PI).sqrt() * d_scale);
    Ok(ShiftedCapReport {
        k,
        r,
        p,
        a_shift,
        d_scale,
        boundary,
        estimate: MCEstimate::proportion(hits, n, seed, workers),
        prediction,
        exact: cap_cdf(m as f64, boundary),
    })
}
