//! Monte Carlo estimators for clique probabilities and neighbourhood
//! statistics of the sphere graph, with quadrature oracles.
//!
//! Most samplers work in a reduced frame. A uniform point of S^k is only
//! materialized through its coordinates in the span of the points it is
//! compared with, plus the length of its orthogonal remainder, which sits on
//! the next frame axis. The joint law of all inner products is exact.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::second_order_gap;
use crate::error::{domain, Error, Result};
use crate::geometry::{
    cap_cdf, cap_density_real, dot, fill_unit_vector, norm, projection_norm_tail, sample_projection,
    solve_cap_threshold, Subspace, UnitVector,
};
use crate::graph::Color;
use crate::mc::{purpose, run_workers, substream, MCEstimate, PredictionComparison, Rng, Tally};
use crate::perfect::{corner_coordinates, dual_basis, prefix_projection_norms, PerfectnessRule};
use crate::stats::{bootstrap_mean_stderr, ks_critical, ks_statistic, pearson, weighted_line_fit};

pub const MAX_DIMENSION: usize = 30_000;
pub const MAX_ORDER: usize = 8;
pub const MAX_SAMPLES: u64 = 100_000_000;
/// Rejection budget per accepted draw, in units of the inverse acceptance floor.
pub const TRY_FACTOR: f64 = 1000.0;
pub const BOOTSTRAP_RESAMPLES: usize = 200;

const QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub k: usize,
    pub p: f64,
    pub c: f64,
    /// A pair is red iff its inner product is at most this value.
    pub boundary: f64,
    /// Bound on |pi_[i](x_{i+1})|; infinite when perfectness is not imposed.
    pub perfect_bound: f64,
}

impl Setting {
    pub fn new(k: usize, p: f64) -> Result<Self> {
        if k > MAX_DIMENSION {
            return Err(Error::Infeasible(format!(
                "dimension k={k} exceeds the desk-scale limit {MAX_DIMENSION}"
            )));
        }
        if k < 2 {
            return domain("estimators need k >= 2");
        }
        let th = solve_cap_threshold(k, p)?;
        Ok(Setting { k, p, c: th.c, boundary: th.boundary(), perfect_bound: f64::INFINITY })
    }

    pub fn with_rule(mut self, rule: &PerfectnessRule) -> Self {
        self.perfect_bound = rule.bound();
        self
    }

    pub fn perfect(self, alpha: f64, ell: usize) -> Self {
        let k = self.k;
        self.with_rule(&PerfectnessRule::new(alpha, ell, k))
    }

    pub fn adjacent(&self, color: Color, inner: f64) -> bool {
        match color {
            Color::Red => inner <= self.boundary,
            Color::Blue => inner > self.boundary,
        }
    }

    /// Edge probability of `color`: p for red, 1 - p for blue.
    pub fn color_probability(&self, color: Color) -> f64 {
        match color {
            Color::Red => self.p,
            Color::Blue => 1.0 - self.p,
        }
    }

    fn gaussian_density(&self) -> f64 {
        (-0.5 * self.c * self.c).exp() / (2.0 * PI).sqrt()
    }
}

pub fn check_envelope(k: usize, r: usize, n: u64) -> Result<()> {
    if k > MAX_DIMENSION || r > MAX_ORDER || n > MAX_SAMPLES {
        return Err(Error::Infeasible(format!(
            "request (k={k}, r={r}, N={n}) is outside the desk-scale envelope \
             k <= {MAX_DIMENSION}, r <= {MAX_ORDER}, N <= {MAX_SAMPLES}"
        )));
    }
    if r > k {
        return domain(format!("order r={r} exceeds k={k}"));
    }
    Ok(())
}

fn try_budget(q: f64, exponent: f64) -> u64 {
    (TRY_FACTOR / (0.5 * q).powf(exponent)).ceil().min(1e15) as u64
}

fn reject(rng: &mut Rng, budget: u64, accepted: u64, mut accept: impl FnMut(&mut Rng) -> bool) -> Result<u64> {
    for t in 1..=budget {
        if accept(rng) {
            return Ok(t);
        }
    }
    Err(Error::RejectionExhausted { tries: budget, accepted })
}

/// Uniform point of S^k with its projection onto the first `m` frame axes in
/// `out[..m]` and the orthogonal remainder on axis m.
fn draw_frame_point(rng: &mut Rng, k: usize, m: usize, out: &mut Vec<f64>) {
    out.clear();
    out.resize(m + 1, 0.0);
    let rest = sample_projection(rng, k, &mut out[..m]);
    out[m] = rest;
}

/// `z` is `color`-adjacent to every frame point and |pi(z)| over the first
/// `span` axes respects the perfectness bound.
fn joins(setting: &Setting, color: Color, xs: &[Vec<f64>], span: usize, z: &[f64]) -> bool {
    xs.iter().all(|x| setting.adjacent(color, dot(x, &z[..x.len()])))
        && (setting.perfect_bound.is_infinite() || norm(&z[..span]) <= setting.perfect_bound)
}

/// Draws a uniform r-tuple into the frame (point j uses axes 0..=j). Stops
/// early and returns false once perfectness or, with `color`, the clique
/// condition fails.
fn draw_tuple(rng: &mut Rng, setting: &Setting, r: usize, color: Option<Color>, xs: &mut Vec<Vec<f64>>) -> bool {
    xs.resize_with(r, Vec::new);
    for j in 0..r {
        let (done, rest) = xs.split_at_mut(j);
        let x = &mut rest[0];
        draw_frame_point(rng, setting.k, j, x);
        if setting.perfect_bound.is_finite() && norm(&x[..j]) > setting.perfect_bound {
            return false;
        }
        if let Some(col) = color {
            if !done.iter().all(|y| setting.adjacent(col, dot(y, &x[..y.len()]))) {
                return false;
            }
        }
    }
    true
}

/// Frame coordinates of `seq`, padded to the span dimension.
fn reduce(seq: &[UnitVector], ambient: usize) -> (Subspace, Vec<Vec<f64>>) {
    let mut sub = Subspace::empty(ambient);
    for x in seq {
        sub.extend(x.coords(), 1e-12);
    }
    let xs = seq.iter().map(|x| sub.coefficients(x.coords())).collect();
    (sub, xs)
}

fn check_points(seq: &[UnitVector], setting: &Setting) -> Result<()> {
    if let Some(x) = seq.iter().find(|x| x.dim() != setting.k + 1) {
        return domain(format!("point of dimension {} in a setting with k={}", x.dim(), setting.k));
    }
    Ok(())
}

fn check_perfect(seq: &[UnitVector], setting: &Setting) -> Result<()> {
    if prefix_projection_norms(seq).iter().any(|&h| h > setting.perfect_bound) {
        return domain("sequence is not perfect");
    }
    Ok(())
}

/// P_{color,r}: probability that r uniform points form a `color` clique,
/// and also a perfect sequence when the setting carries a bound.
pub fn estimate_clique_prob(
    setting: &Setting,
    r: usize,
    color: Color,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<MCEstimate> {
    if r < 2 {
        return domain("clique probability needs r >= 2");
    }
    if n < 1000 {
        return domain("clique probability needs N >= 1000");
    }
    check_envelope(setting.k, r, n)?;
    let hits: u64 = run_workers(seed, purpose::CLIQUE, workers, n, |rng, _, quota| {
        let mut xs = Vec::new();
        let mut hits = 0u64;
        for _ in 0..quota {
            hits += u64::from(draw_tuple(rng, setting, r, Some(color), &mut xs));
        }
        hits
    })
    .into_iter()
    .sum();
    Ok(MCEstimate::proportion(hits, n, seed, workers))
}

/// Integral of `f` over [a, b], split at `breaks` and into pieces no wider than `width`.
fn integrate_split(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], width: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut pts = vec![a, b];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let pieces = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / pieces as f64;
        for i in 0..pieces {
            let lo = w[0] + i as f64 * h;
            let hi = if i + 1 == pieces { w[1] } else { lo + h };
            total += quadrature::double_exponential::integrate(&f, lo, hi, QUAD_TOL).integral;
        }
    }
    total
}

/// Half-width of the window holding all but e^{-70} of the mass of <z, x>.
fn mass_window(k: f64) -> f64 {
    (12.0 / k.sqrt()).min(1.0)
}

fn pair_region(k: f64, rho: f64, tau: f64, color: Color) -> f64 {
    let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
    if s == 0.0 {
        return 0.0;
    }
    // Given <z, x1> = u, <z, x2> = rho u + s sqrt(1 - u^2) t with t a
    // coordinate of a uniform point of S^{k-1}.
    let arg = |u: f64| {
        let den = s * ((1.0 - u) * (1.0 + u)).max(0.0).sqrt();
        let num = tau - rho * u;
        if den == 0.0 {
            return if num >= 0.0 { 1.0 } else { -1.0 };
        }
        (num / den).clamp(-1.0, 1.0)
    };
    let l = mass_window(k);
    let root = s * ((1.0 - tau) * (1.0 + tau)).sqrt();
    let breaks = [tau * rho - root, tau * rho + root, tau, 0.0];
    let width = 4.0 / k.sqrt();
    match color {
        Color::Red => integrate_split(
            |u| cap_density_real(k, u) * cap_cdf(k - 1.0, arg(u)),
            -l,
            tau.min(l),
            &breaks,
            width,
        ),
        Color::Blue => integrate_split(
            |u| cap_density_real(k, u) * cap_cdf(k - 1.0, -arg(u)),
            tau.max(-l),
            l,
            &breaks,
            width,
        ),
    }
}

/// Measure of the points z of S^k that are `color`-adjacent to both of two
/// points with inner product `rho`, for the threshold -c/sqrt(k).
pub fn exact_pair_region_prob(k: usize, rho: f64, c: f64, color: Color) -> Result<f64> {
    if k < 3 {
        return domain("pair-region quadrature needs k >= 3");
    }
    if !(rho.abs() < 1.0) {
        return domain(format!("pair inner product {rho} must satisfy |rho| < 1"));
    }
    let tau = -c / (k as f64).sqrt();
    if !(tau.abs() < 1.0) {
        return domain(format!("threshold c={c} puts the boundary outside (-1, 1)"));
    }
    Ok(pair_region(k as f64, rho, tau, color).clamp(0.0, 1.0))
}

/// P_{color,3} by integrating the pair-region measure against the law of
/// the inner product of the first two points.
pub fn exact_triangle_prob(k: usize, c: f64, color: Color) -> Result<f64> {
    exact_pair_region_prob(k, 0.0, c, color)?;
    let kf = k as f64;
    let tau = -c / kf.sqrt();
    let l = mass_window(kf);
    let f = |rho: f64| cap_density_real(kf, rho) * pair_region(kf, rho, tau, color);
    let width = 4.0 / kf.sqrt();
    let v = match color {
        Color::Red => integrate_split(f, -l, tau.min(l), &[0.0], width),
        Color::Blue => integrate_split(f, tau.max(-l), l, &[0.0], width),
    };
    Ok(v.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSample {
    pub point: UnitVector,
    /// Proposals drawn, including the accepted one.
    pub tries: u64,
}

/// Uniform point of N(x[r]) or its blue analogue, restricted to perfect
/// extensions of `seq` when `perfect_only` is set. Proposals are uniform on
/// S^k; only their projection onto span(seq) is drawn until one is accepted,
/// then the orthogonal part is completed with a uniform direction.
pub fn sample_in_region(
    seq: &[UnitVector],
    color: Color,
    perfect_only: bool,
    setting: &Setting,
    rng: &mut Rng,
    max_tries: u64,
) -> Result<RegionSample> {
    check_points(seq, setting)?;
    let bound = if perfect_only {
        check_perfect(seq, setting)?;
        setting.perfect_bound
    } else {
        f64::INFINITY
    };
    let ambient = setting.k + 1;
    let (sub, xs) = reduce(seq, ambient);
    let m = sub.dim();
    let mut t = vec![0.0; m];
    let mut rest = 0.0;
    let tries = reject(rng, max_tries, 0, |rng| {
        rest = sample_projection(rng, setting.k, &mut t);
        xs.iter().all(|x| setting.adjacent(color, dot(x, &t))) && norm(&t) <= bound
    })?;
    let mut z = vec![0.0; ambient];
    if m < ambient {
        let mut w = vec![0.0; ambient];
        loop {
            fill_unit_vector(rng, &mut w);
            for _ in 0..2 {
                for b in sub.basis() {
                    let h = dot(b, &w);
                    w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= h * bi);
                }
            }
            let len = norm(&w);
            if len > 1e-6 {
                z.iter_mut().zip(&w).for_each(|(zi, wi)| *zi = rest * wi / len);
                break;
            }
        }
    }
    for (b, ti) in sub.basis().iter().zip(&t) {
        z.iter_mut().zip(b).for_each(|(zi, bi)| *zi += ti * bi);
    }
    Ok(RegionSample { point: UnitVector::normalized(z)?, tries })
}

/// Perfect `color` clique of length r built by successive region sampling.
/// Each point is uniform in the perfect neighbourhood of its predecessors;
/// the tuple as a whole is not uniform on cliques.
pub fn sample_clique_sequence(
    setting: &Setting,
    r: usize,
    color: Color,
    rng: &mut Rng,
    max_tries: u64,
) -> Result<Vec<UnitVector>> {
    let mut seq: Vec<UnitVector> = Vec::with_capacity(r);
    for _ in 0..r {
        let next = sample_in_region(&seq, color, true, setting, rng, max_tries)?;
        seq.push(next.point);
    }
    Ok(seq)
}

/// P_per(x) for a single point: the cap slice between the colour boundary
/// and the perfectness bound.
pub fn perfect_singleton_measure(setting: &Setting, color: Color) -> f64 {
    let h = setting.perfect_bound.min(1.0);
    let k = setting.k as f64;
    let (lo, hi) = match color {
        Color::Red => (-h, setting.boundary),
        Color::Blue => (setting.boundary, h),
    };
    if hi <= lo {
        0.0
    } else {
        cap_cdf(k, hi) - cap_cdf(k, lo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub estimate: MCEstimate,
    /// Bootstrap standard error of the per-tuple values; zero for r = 1.
    pub bootstrap_std_error: f64,
}

/// kappa_r: mean of P_per(x[r]) over perfect `color` cliques x[r]. Tuples
/// come from whole-tuple rejection; each P_per(x[r]) is a hit fraction over
/// `n_inner` fresh points, so the spread of the per-tuple values carries both
/// levels of noise.
#[allow(clippy::too_many_arguments)]
pub fn estimate_kappa(
    setting: &Setting,
    r: usize,
    color: Color,
    n_outer: u64,
    n_inner: u64,
    seed: u64,
    workers: usize,
) -> Result<KappaEstimate> {
    if r == 0 {
        return domain("kappa needs r >= 1");
    }
    if r == 1 {
        return Ok(KappaEstimate {
            estimate: MCEstimate::exact(perfect_singleton_measure(setting, color), seed, workers),
            bootstrap_std_error: 0.0,
        });
    }
    if n_outer < 2 || n_inner == 0 {
        return domain("kappa needs at least two tuples and one inner sample");
    }
    check_envelope(setting.k, r, n_outer.saturating_mul(n_inner))?;
    let q = setting.color_probability(color);
    let budget = try_budget(q, (r * (r - 1) / 2) as f64);
    let parts = run_workers(seed, purpose::KAPPA, workers, n_outer, |rng, _, quota| {
        let mut xs = Vec::new();
        let mut z = vec![0.0; r];
        let mut values = Vec::with_capacity(quota as usize);
        let mut tries = 0u64;
        for _ in 0..quota {
            tries += reject(rng, budget, values.len() as u64, |rng| {
                draw_tuple(rng, setting, r, Some(color), &mut xs)
            })?;
            let mut hits = 0u64;
            for _ in 0..n_inner {
                sample_projection(rng, setting.k, &mut z);
                hits += u64::from(joins(setting, color, &xs, r, &z));
            }
            values.push(hits as f64 / n_inner as f64);
        }
        Ok((values, tries))
    });
    let mut values = Vec::with_capacity(n_outer as usize);
    let mut tries = 0;
    for part in parts {
        let (v, t) = part?;
        values.extend(v);
        tries += t;
    }
    let mut tally = Tally::default();
    values.iter().for_each(|&v| tally.push(v));
    let mut boot_rng = substream(seed, purpose::BOOTSTRAP, 0);
    Ok(KappaEstimate {
        estimate: MCEstimate::from_tally(&tally, tries, seed, workers),
        bootstrap_std_error: bootstrap_mean_stderr(&values, BOOTSTRAP_RESAMPLES, &mut boot_rng),
    })
}

/// Q_[r](y) = P_per(x[r], y) / P_per(x[r]) as the fraction of points of
/// N_per(x[r]) that also join y, compared with the first-order prediction
/// p - sqrt(k/2pi) e^{-c^2/2} E<pi(y), pi(z)> (sign flipped for blue), the
/// expectation taken over the same points z.
pub fn estimate_q(
    seq: &[UnitVector],
    y: &UnitVector,
    color: Color,
    setting: &Setting,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<PredictionComparison> {
    check_points(seq, setting)?;
    check_points(std::slice::from_ref(y), setting)?;
    let mut full = seq.to_vec();
    full.push(y.clone());
    check_perfect(&full, setting)?;
    check_envelope(setting.k, full.len(), n)?;
    let (sub, mut xs) = reduce(&full, setting.k + 1);
    let y_red = xs.pop().expect("y was appended");
    let mx = reduce(seq, setting.k + 1).0.dim();
    let m = sub.dim();
    let parts = run_workers(seed, purpose::Q_RATIO, workers, n, |rng, _, quota| {
        let mut z = vec![0.0; m];
        let (mut in_a, mut in_b) = (0u64, 0u64);
        let mut inner = Tally::default();
        for _ in 0..quota {
            sample_projection(rng, setting.k, &mut z);
            if !joins(setting, color, &xs, mx, &z) {
                continue;
            }
            in_a += 1;
            inner.push(dot(&y_red[..mx], &z[..mx]));
            if setting.adjacent(color, dot(&y_red, &z))
                && (setting.perfect_bound.is_infinite() || norm(&z) <= setting.perfect_bound)
            {
                in_b += 1;
            }
        }
        (in_a, in_b, inner)
    });
    let (mut in_a, mut in_b, mut inner) = (0, 0, Tally::default());
    for (a, b, t) in &parts {
        in_a += a;
        in_b += b;
        inner.merge(t);
    }
    if in_a == 0 {
        return Err(Error::RejectionExhausted { tries: n, accepted: 0 });
    }
    let q_hat = in_b as f64 / in_a as f64;
    let estimate = MCEstimate {
        value: q_hat,
        std_error: (q_hat * (1.0 - q_hat) / in_a as f64).sqrt(),
        n_samples: n,
        n_accepted: in_a,
        seed,
        workers,
    };
    let shift = (setting.k as f64 / (2.0 * PI)).sqrt() * (-0.5 * setting.c * setting.c).exp() * inner.mean();
    let prediction = match color {
        Color::Red => setting.p - shift,
        Color::Blue => 1.0 - setting.p + shift,
    };
    Ok(PredictionComparison::new(
        estimate,
        prediction,
        "first-order expansion of the conditional cap measure around p",
    ))
}

/// Perfect sequence of r uniform points drawn into the frame by rejection on
/// perfectness alone.
fn draw_perfect_frame(rng: &mut Rng, setting: &Setting, r: usize, accepted: u64) -> Result<Vec<Vec<f64>>> {
    let mut xs = Vec::new();
    reject(rng, try_budget(1.0, r as f64), accepted, |rng| {
        draw_tuple(rng, setting, r, None, &mut xs)
    })?;
    Ok(xs)
}

fn coefficient_prediction(setting: &Setting, color: Color) -> f64 {
    let scale = setting.gaussian_density() / (setting.k as f64).sqrt();
    match color {
        Color::Red => -scale / setting.p,
        Color::Blue => scale / (1.0 - setting.p),
    }
}

fn coefficient_mean_in_frame(
    setting: &Setting,
    xs: &[Vec<f64>],
    s_index: usize,
    color: Color,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<PredictionComparison> {
    let m = xs.iter().map(Vec::len).max().unwrap_or(0);
    let padded: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let mut v = x.clone();
            v.resize(m, 0.0);
            v
        })
        .collect();
    let dec = dual_basis(&padded)?;
    let budget = try_budget(setting.color_probability(color), xs.len() as f64);
    let parts = run_workers(seed, purpose::COEFFICIENT, workers, n, |rng, _, quota| {
        let mut y = vec![0.0; m];
        let mut tally = Tally::default();
        let mut tries = 0u64;
        for _ in 0..quota {
            tries += reject(rng, budget, tally.n, |rng| {
                sample_projection(rng, setting.k, &mut y);
                joins(setting, color, &padded, m, &y)
            })?;
            tally.push(corner_coordinates(&dec, &y)[s_index - 1]);
        }
        Ok((tally, tries))
    });
    let mut tally = Tally::default();
    let mut tries = 0;
    for part in parts {
        let (t, n_t) = part?;
        tally.merge(&t);
        tries += n_t;
    }
    Ok(PredictionComparison::new(
        MCEstimate::from_tally(&tally, tries, seed, workers),
        coefficient_prediction(setting, color),
        "gaussian corner mean -e^{-c^2/2}/(p sqrt(2 pi k)), +e^{-c^2/2}/((1-p) sqrt(2 pi k)) for blue",
    ))
}

/// E[a_s] for y uniform in the perfect `color` neighbourhood of a fixed
/// uniform perfect sequence x[r], where pi(y) = sum a_i v_i in the dual basis.
/// The sequence is drawn from the seed's sequence stream.
#[allow(clippy::too_many_arguments)]
pub fn estimate_coefficient_mean(
    setting: &Setting,
    r: usize,
    s_index: usize,
    color: Color,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<PredictionComparison> {
    if s_index < 1 || s_index > r {
        return domain(format!("coefficient index {s_index} outside 1..={r}"));
    }
    check_envelope(setting.k, r + 1, n)?;
    let mut rng = substream(seed, purpose::SEQUENCE, 0);
    let xs = draw_perfect_frame(&mut rng, setting, r, 0)?;
    coefficient_mean_in_frame(setting, &xs, s_index, color, n, seed, workers)
}

/// As [`estimate_coefficient_mean`] for a supplied perfect sequence.
pub fn coefficient_mean_for_sequence(
    seq: &[UnitVector],
    s_index: usize,
    color: Color,
    setting: &Setting,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<PredictionComparison> {
    if s_index < 1 || s_index > seq.len() {
        return domain(format!("coefficient index {s_index} outside 1..={}", seq.len()));
    }
    check_points(seq, setting)?;
    check_perfect(seq, setting)?;
    check_envelope(setting.k, seq.len() + 1, n)?;
    let (sub, xs) = reduce(seq, setting.k + 1);
    if sub.dim() < seq.len() {
        return Err(Error::Singular { min_eigenvalue: 0.0 });
    }
    coefficient_mean_in_frame(setting, &xs, s_index, color, n, seed, workers)
}

fn projection_prediction(setting: &Setting, color: Color, s: usize) -> f64 {
    let q = setting.color_probability(color);
    (-setting.c * setting.c).exp() / (2.0 * PI * q * q) * s as f64 / setting.k as f64
}

/// E<pi_[s](y), pi_[s](z)> with y uniform in N_per(x[r]) and z independent
/// and uniform in N_per(x[s]). Every sample uses a fresh uniform perfect x[r].
#[allow(clippy::too_many_arguments)]
pub fn estimate_projection_inner(
    setting: &Setting,
    r: usize,
    s: usize,
    color: Color,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<PredictionComparison> {
    const SOURCE: &str = "e^{-c^2}/(2 pi q^2) s/k with q the edge probability of the colour";
    if s > r {
        return domain(format!("need s <= r, got s={s}, r={r}"));
    }
    if s == 0 {
        return Ok(PredictionComparison::new(MCEstimate::exact(0.0, seed, workers), 0.0, SOURCE));
    }
    check_envelope(setting.k, r, n)?;
    let q = setting.color_probability(color);
    let (budget_y, budget_z) = (try_budget(q, r as f64), try_budget(q, s as f64));
    let parts = run_workers(seed, purpose::PROJECTION, workers, n, |rng, _, quota| {
        let mut y = vec![0.0; r];
        let mut z = vec![0.0; s];
        let mut tally = Tally::default();
        let mut tries = 0u64;
        for _ in 0..quota {
            let xs = draw_perfect_frame(rng, setting, r, tally.n)?;
            tries += reject(rng, budget_y, tally.n, |rng| {
                sample_projection(rng, setting.k, &mut y);
                joins(setting, color, &xs, r, &y)
            })?;
            tries += reject(rng, budget_z, tally.n, |rng| {
                sample_projection(rng, setting.k, &mut z);
                joins(setting, color, &xs[..s], s, &z)
            })?;
            tally.push(dot(&y[..s], &z));
        }
        Ok((tally, tries))
    });
    let mut tally = Tally::default();
    let mut tries = 0;
    for part in parts {
        let (t, n_t) = part?;
        tally.merge(&t);
        tries += n_t;
    }
    Ok(PredictionComparison::new(
        MCEstimate::from_tally(&tally, tries, seed, workers),
        projection_prediction(setting, color, s),
        SOURCE,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub s_values: Vec<usize>,
    pub points: Vec<PredictionComparison>,
    pub slope: f64,
    pub slope_std_error: f64,
    pub intercept: f64,
    pub intercept_std_error: f64,
    /// e^{-c^2} / (2 pi q^2 k).
    pub predicted_slope: f64,
}

/// Weighted line fit of the projection inner product against s, with r = s.
pub fn projection_slope(
    setting: &Setting,
    s_values: &[usize],
    color: Color,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<SlopeReport> {
    if s_values.len() < 3 {
        return domain("slope fit needs at least three values of s");
    }
    let points = s_values
        .iter()
        .map(|&s| estimate_projection_inner(setting, s, s, color, n, seed, workers))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = s_values.iter().map(|&s| s as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.estimate.value).collect();
    let ses: Vec<f64> = points.iter().map(|p| p.estimate.std_error).collect();
    let (intercept, slope, intercept_std_error, slope_std_error) = weighted_line_fit(&xs, &ys, &ses);
    Ok(SlopeReport {
        s_values: s_values.to_vec(),
        points,
        slope,
        slope_std_error,
        intercept,
        intercept_std_error,
        predicted_slope: projection_prediction(setting, color, 1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HatzReport {
    pub n: usize,
    /// KS distance of each complement coordinate of z^/|z^| from the
    /// coordinate law of S^{k-r}.
    pub ks: Vec<f64>,
    pub max_ks: f64,
    /// Family-wise significance; each coordinate is tested at
    /// `significance / ks.len()`.
    pub significance: f64,
    pub critical: f64,
    /// corr(|z~|, <z^/|z^|, w>) for the first complement axis w.
    pub correlation: f64,
    pub correlation_bound: f64,
    pub uniform: bool,
    pub independent: bool,
    pub tries: u64,
}

/// Samples z in the perfect `color` neighbourhood of `seq` in full
/// dimension, splits z = z~ + z^ along span(seq), and tests z^/|z^| against
/// the uniform law on S^{k-r} and against dependence on |z~|.
pub fn hatz_uniformity_test(
    seq: &[UnitVector],
    color: Color,
    setting: &Setting,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<HatzReport> {
    const SIGNIFICANCE: f64 = 1e-3;
    check_points(seq, setting)?;
    check_perfect(seq, setting)?;
    check_envelope(setting.k, seq.len() + 1, n)?;
    if n < 10 {
        return domain("uniformity test needs at least 10 samples");
    }
    let ambient = setting.k + 1;
    let (sub, _) = reduce(seq, ambient);
    let m = sub.dim();
    if m + 1 >= ambient {
        return domain("sequence leaves no complement of dimension >= 2");
    }
    let mut full = sub.clone();
    for i in 0..ambient {
        if full.dim() == ambient {
            break;
        }
        let mut e = vec![0.0; ambient];
        e[i] = 1.0;
        full.extend(&e, 1e-8);
    }
    let comp = &full.basis()[m..];
    let budget = try_budget(setting.color_probability(color), m as f64);
    let parts = run_workers(seed, purpose::HATZ, workers, n, |rng, _, quota| {
        let mut z = vec![0.0; ambient];
        let mut cols = vec![Vec::with_capacity(quota as usize); comp.len()];
        let mut tilde = Vec::with_capacity(quota as usize);
        let mut tries = 0u64;
        for _ in 0..quota {
            tries += reject(rng, budget, tilde.len() as u64, |rng| {
                fill_unit_vector(rng, &mut z);
                seq.iter().all(|x| setting.adjacent(color, dot(x.coords(), &z)))
                    && norm(&sub.coefficients(&z)) <= setting.perfect_bound
            })?;
            let hat: Vec<f64> = comp.iter().map(|w| dot(w, &z)).collect();
            let len = norm(&hat);
            for (col, h) in cols.iter_mut().zip(&hat) {
                col.push(h / len);
            }
            tilde.push(norm(&sub.coefficients(&z)));
        }
        Ok((cols, tilde, tries))
    });
    let mut cols = vec![Vec::with_capacity(n as usize); comp.len()];
    let mut tilde = Vec::with_capacity(n as usize);
    let mut tries = 0;
    for part in parts {
        let (c, t, n_t) = part?;
        for (all, mine) in cols.iter_mut().zip(c) {
            all.extend(mine);
        }
        tilde.extend(t);
        tries += n_t;
    }
    let dim = (setting.k - m) as f64;
    let ks: Vec<f64> = cols.iter().map(|col| ks_statistic(col, |t| cap_cdf(dim, t.clamp(-1.0, 1.0)))).collect();
    let max_ks = ks.iter().copied().fold(0.0, f64::max);
    let critical = ks_critical(n as usize, SIGNIFICANCE / ks.len() as f64);
    let correlation = if m == 0 { 0.0 } else { pearson(&tilde, &cols[0]) };
    let correlation_bound = 4.0 / (n as f64).sqrt();
    Ok(HatzReport {
        n: n as usize,
        max_ks,
        uniform: max_ks <= critical,
        independent: correlation.abs() <= correlation_bound,
        ks,
        significance: SIGNIFICANCE,
        critical,
        correlation,
        correlation_bound,
        tries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfectFraction {
    pub estimate: MCEstimate,
    /// prod_{j=1}^{r-1} P(|pi_j(x)| <= bound): the projection norms of a
    /// uniform tuple are independent beta variables.
    pub exact: f64,
    /// 1 - r * projection_norm_tail(k, r, bound).
    pub union_lower_bound: f64,
}

pub fn perfect_fraction(setting: &Setting, r: usize, n: u64, seed: u64, workers: usize) -> Result<PerfectFraction> {
    if r == 0 {
        return domain("perfect fraction needs r >= 1");
    }
    check_envelope(setting.k, r, n)?;
    let h = setting.perfect_bound;
    let tail = |j: usize| if h >= 1.0 { Ok(0.0) } else { projection_norm_tail(setting.k, j, h) };
    let mut exact = 1.0;
    for j in 1..r {
        exact *= 1.0 - tail(j)?;
    }
    let union_lower_bound = 1.0 - r as f64 * tail(r)?;
    if r == 1 || h >= 1.0 {
        return Ok(PerfectFraction { estimate: MCEstimate::exact(1.0, seed, workers), exact, union_lower_bound });
    }
    if n == 0 {
        return domain("sample count must be positive");
    }
    let hits: u64 = run_workers(seed, purpose::PERFECT, workers, n, |rng, _, quota| {
        let mut xs = Vec::new();
        (0..quota).map(|_| u64::from(draw_tuple(rng, setting, r, None, &mut xs))).sum::<u64>()
    })
    .into_iter()
    .sum();
    Ok(PerfectFraction { estimate: MCEstimate::proportion(hits, n, seed, workers), exact, union_lower_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    /// Independence value q^{r(r-1)/2} of the clique probability.
    pub probability: f64,
    /// a_{k,p} / q^2 * r / sqrt(k).
    pub relative_effect: f64,
    pub target_std_error: f64,
    pub n: u64,
}

/// Sample count for which the clique-probability standard error is at most
/// a quarter of the expected dependency effect.
pub fn plan_samples(setting: &Setting, r: usize, color: Color) -> Result<SamplePlan> {
    if r < 2 {
        return domain("planning needs r >= 2");
    }
    let q = setting.color_probability(color);
    let probability = q.powi((r * (r - 1) / 2) as i32);
    let relative_effect = second_order_gap(setting.c) / (q * q) * r as f64 / (setting.k as f64).sqrt();
    let target_std_error = 0.25 * relative_effect * probability;
    let n = (16.0 * (1.0 - probability) / (probability * relative_effect * relative_effect)).ceil().max(1000.0);
    if !(n <= MAX_SAMPLES as f64) {
        return Err(Error::Infeasible(format!(
            "resolving a relative effect of {relative_effect:.3e} needs N = {n:.3e} > {MAX_SAMPLES}"
        )));
    }
    check_envelope(setting.k, r, n as u64)?;
    Ok(SamplePlan { probability, relative_effect, target_std_error, n: n as u64 })
}
