//! Random sphere graphs G_{k,p}(n), exact monochromatic clique search,
//! certificate search and the union-bound algebra.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{blue_clique_size, second_order_gap, solve_p_c, threshold_constants};
use crate::error::{domain, Error, Result};
use crate::geometry::{cap_threshold_real, dot, sample_unit_vector, solve_cap_threshold, UnitVector};
use crate::mc::{self, Rng};

/// Largest vertex count accepted by the dense adjacency representation.
pub const MAX_VERTICES: usize = 1 << 14;
/// Largest number of stored coordinates (n times k+1).
pub const MAX_COORDINATES: usize = 1 << 27;
/// Exact clique search is only attempted for cliques up to this size.
pub const MAX_CLIQUE_SEARCH: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Blue,
}

/// Symmetric boolean matrix with bit-packed rows and an empty diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl Adjacency {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Adjacency { n, words, bits: vec![0; n * words] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
        self.bits[j * self.words + i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Complement graph (no loops).
    pub fn complement(&self) -> Adjacency {
        let mut out = Adjacency::new(self.n);
        for i in 0..self.n {
            for j in i + 1..self.n {
                if !self.get(i, j) {
                    out.set(i, j);
                }
            }
        }
        out
    }

    /// Finds `r` pairwise adjacent vertices, if any exist.
    pub fn find_clique(&self, r: usize) -> Option<Vec<usize>> {
        if r == 0 {
            return Some(Vec::new());
        }
        if r > self.n {
            return None;
        }
        if r == 1 {
            return Some(vec![0]);
        }
        // Relabel by degree, largest first; ties broken by index.
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(self.degree(v)), v));
        let mut relabeled = Adjacency::new(self.n);
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.get(order[a], order[b]) {
                    relabeled.set(a, b);
                }
            }
        }
        let mut candidates = vec![0u64; self.words];
        for v in 0..self.n {
            candidates[v / 64] |= 1 << (v % 64);
        }
        let mut chosen = Vec::with_capacity(r);
        if relabeled.expand(&mut chosen, candidates, r) {
            let mut found: Vec<usize> = chosen.iter().map(|&v| order[v]).collect();
            found.sort_unstable();
            Some(found)
        } else {
            None
        }
    }

    fn expand(&self, chosen: &mut Vec<usize>, mut cand: Vec<u64>, r: usize) -> bool {
        if chosen.len() >= r {
            return true;
        }
        let (verts, bounds) = self.color_sort(&cand);
        for idx in (0..verts.len()).rev() {
            if chosen.len() + bounds[idx] < r {
                return false;
            }
            let v = verts[idx];
            chosen.push(v);
            let next: Vec<u64> = cand.iter().zip(self.row(v)).map(|(a, b)| a & b).collect();
            if self.expand(chosen, next, r) {
                return true;
            }
            chosen.pop();
            cand[v / 64] &= !(1 << (v % 64));
        }
        false
    }

    /// Greedy sequential coloring of the candidate set. Returns vertices in
    /// non-decreasing color order together with their color numbers.
    fn color_sort(&self, cand: &[u64]) -> (Vec<usize>, Vec<usize>) {
        let mut uncolored = cand.to_vec();
        let mut verts = Vec::new();
        let mut bounds = Vec::new();
        let mut color = 0;
        while uncolored.iter().any(|&w| w != 0) {
            color += 1;
            let mut q = uncolored.clone();
            while let Some(v) = first_bit(&q) {
                q[v / 64] &= !(1 << (v % 64));
                uncolored[v / 64] &= !(1 << (v % 64));
                q.iter_mut().zip(self.row(v)).for_each(|(a, b)| *a &= !b);
                verts.push(v);
                bounds.push(color);
            }
        }
        (verts, bounds)
    }
}

fn first_bit(words: &[u64]) -> Option<usize> {
    words
        .iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereGraph {
    pub k: usize,
    pub p: f64,
    pub c: f64,
    pub points: Vec<UnitVector>,
    red: Adjacency,
}

impl SphereGraph {
    /// Colors the complete graph on `points`: red iff the inner product is at
    /// most -c/sqrt(k).
    pub fn from_points(k: usize, p: f64, c: f64, points: Vec<UnitVector>) -> Result<Self> {
        let n = points.len();
        if n > MAX_VERTICES || n.saturating_mul(k + 1) > MAX_COORDINATES {
            return Err(Error::Resource(format!("{n} points in dimension {k} exceed the dense cap")));
        }
        if let Some(bad) = points.iter().position(|x| x.dim() != k + 1) {
            return domain(format!("point {bad} does not live in R^{}", k + 1));
        }
        let boundary = -c / (k as f64).sqrt();
        let mut red = Adjacency::new(n);
        for i in 0..n {
            for j in i + 1..n {
                if dot(points[i].coords(), points[j].coords()) <= boundary {
                    red.set(i, j);
                }
            }
        }
        Ok(SphereGraph { k, p, c, points, red })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn boundary(&self) -> f64 {
        -self.c / (self.k as f64).sqrt()
    }

    pub fn color(&self, i: usize, j: usize) -> Color {
        if self.red.get(i, j) {
            Color::Red
        } else {
            Color::Blue
        }
    }

    pub fn adjacency(&self, color: Color) -> Adjacency {
        match color {
            Color::Red => self.red.clone(),
            Color::Blue => self.red.complement(),
        }
    }

    pub fn red_edges(&self) -> usize {
        (0..self.n()).map(|i| self.red.degree(i)).sum::<usize>() / 2
    }
}

pub fn build_graph(k: usize, p: f64, n: usize, rng: &mut Rng) -> Result<SphereGraph> {
    if n < 2 {
        return domain("a sphere graph needs n >= 2");
    }
    if n > MAX_VERTICES || n.saturating_mul(k + 1) > MAX_COORDINATES {
        return Err(Error::Resource(format!("{n} points in dimension {k} exceed the dense cap")));
    }
    let c = solve_cap_threshold(k, p)?.c;
    let points = (0..n).map(|_| sample_unit_vector(k, rng)).collect::<Result<Vec<_>>>()?;
    SphereGraph::from_points(k, p, c, points)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueWitness {
    pub color: Color,
    pub vertices: Vec<usize>,
}

impl CliqueWitness {
    pub fn validates(&self, g: &SphereGraph) -> bool {
        self.vertices.iter().enumerate().all(|(a, &i)| {
            self.vertices[a + 1..].iter().all(|&j| i != j && g.color(i, j) == self.color)
        })
    }
}

/// Exact search for a monochromatic clique of the given size.
pub fn find_mono_clique(g: &SphereGraph, color: Color, r: usize) -> Option<CliqueWitness> {
    g.adjacency(color)
        .find_clique(r)
        .map(|vertices| CliqueWitness { color, vertices })
}

/// A certified instance: no red K_l and no blue K_{ceil(C l)}.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedGraph {
    pub graph: SphereGraph,
    pub attempt: u64,
    pub attempts_used: u64,
    pub red_size: usize,
    pub blue_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertifyOutcome {
    Found(Box<CertifiedGraph>),
    NotFound { attempts: u64 },
}

/// Searches independent resamples of G_{k,p}(n) for one without a red K_l
/// and without a blue K_{ceil(C l)}. Attempt `i` uses its own substream, and
/// the lowest successful attempt index wins.
#[allow(clippy::too_many_arguments)]
pub fn certify_lower_bound(
    c_ratio: f64,
    ell: usize,
    k: usize,
    p: f64,
    n: usize,
    max_attempts: u64,
    seed: u64,
    workers: usize,
) -> Result<CertifyOutcome> {
    if !(c_ratio >= 1.0) || ell < 2 {
        return domain("certification needs C >= 1 and l >= 2");
    }
    let blue_size = blue_clique_size(c_ratio, ell);
    if ell > MAX_CLIQUE_SEARCH || blue_size > MAX_CLIQUE_SEARCH {
        return Err(Error::Infeasible(format!(
            "exact clique search beyond size {MAX_CLIQUE_SEARCH} (red {ell}, blue {blue_size}) is outside desk scale"
        )));
    }
    if n < 2 {
        return domain("a sphere graph needs n >= 2");
    }
    solve_cap_threshold(k, p)?;
    let batch = (4 * workers.max(1)) as u64;
    let mut start = 0u64;
    while start < max_attempts {
        let end = (start + batch).min(max_attempts);
        let found = (start..end)
            .into_par_iter()
            .map(|i| -> Result<Option<SphereGraph>> {
                let mut rng = mc::substream(seed, mc::purpose::CERTIFY, i);
                let g = build_graph(k, p, n, &mut rng)?;
                let clean = find_mono_clique(&g, Color::Red, ell).is_none()
                    && find_mono_clique(&g, Color::Blue, blue_size).is_none();
                Ok(clean.then_some(g))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some((offset, g)) = found.into_iter().enumerate().find_map(|(o, g)| g.map(|g| (o, g))) {
            let attempt = start + offset as u64;
            return Ok(CertifyOutcome::Found(Box::new(CertifiedGraph {
                graph: g,
                attempt,
                attempts_used: attempt + 1,
                red_size: ell,
                blue_size,
            })));
        }
        start = end;
    }
    Ok(CertifyOutcome::NotFound { attempts: max_attempts })
}

/// `1/2 (1+q)^{-l^2/2} + 1/2 (1+q)^{-C^2 l^2/2}` and its deficit from 1.
pub fn two_term_bound(c_ratio: f64, ell: usize, q: f64) -> (f64, f64) {
    let l = ell as f64;
    let log_step = q.ln_1p();
    let x_red = 0.5 * l * l * log_step;
    let x_blue = 0.5 * c_ratio * c_ratio * l * l * log_step;
    let bound = 0.5 * (-x_red).exp() + 0.5 * (-x_blue).exp();
    let deficit = -0.5 * (-x_red).exp_m1() - 0.5 * (-x_blue).exp_m1();
    (bound, deficit)
}

/// Numerical evaluation of the union-bound chain with k = D^2 l^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct UnionBoundReport {
    pub C: f64,
    pub ell: usize,
    pub D: f64,
    pub eps0: f64,
    pub eps: f64,
    /// log n with n = (M_C + eps)^l.
    pub log_n: f64,
    /// p_C - eps0 l / sqrt(k).
    pub base_red: f64,
    /// 1 - p_C - eps0 l / sqrt(k).
    pub base_blue: f64,
    /// 1/2 (1+eps/M_C)^{-l^2/2} + 1/2 (1+eps/M_C)^{-C^2 l^2/2}.
    pub final_bound: f64,
    /// 1 - final_bound, evaluated without cancellation.
    pub final_deficit: f64,
    pub bound_below_one: bool,
    /// (1+eps/M_C)^{-3} - (1 - eps0/(2 p_C D)), evaluated without cancellation.
    pub auxiliary_margin: f64,
    pub auxiliary_holds: bool,
    /// 1 + (l a/(3 sqrt k)) (C/(1-p)^2 - 1/p^2) at p = p_C.
    pub base_sum: f64,
    /// 1 - base_sum.
    pub base_sum_deficit: f64,
}

pub fn union_bound_report(c_ratio: f64, ell: usize, d_scale: f64) -> Result<UnionBoundReport> {
    if !(c_ratio > 1.0) || ell < 2 || !(d_scale > 0.0) {
        return domain("union bound needs C > 1, l >= 2 and D > 0");
    }
    let t = threshold_constants(c_ratio)?;
    let eps = t.M_C * t.eps0 / (6.0 * d_scale);
    let l = ell as f64;
    // l / sqrt(k) = 1/D when k = D^2 l^2.
    let shift = t.eps0 / d_scale;
    let log_step = (eps / t.M_C).ln_1p();
    let (final_bound, final_deficit) = two_term_bound(c_ratio, ell, eps / t.M_C);
    // Both sides are 1 minus a tiny quantity; compare the deficits.
    let lhs_deficit = t.eps0 / (2.0 * t.p_C * d_scale);
    let rhs_deficit = -(-3.0 * log_step).exp_m1();
    let auxiliary_margin = lhs_deficit - rhs_deficit;
    let p = solve_p_c(c_ratio)?;
    let k = (d_scale * l).powi(2);
    let a = second_order_gap(cap_threshold_real(k, p));
    let base_sum_deficit = -(a / (3.0 * d_scale)) * (c_ratio / ((1.0 - p) * (1.0 - p)) - 1.0 / (p * p));
    Ok(UnionBoundReport {
        C: c_ratio,
        ell,
        D: d_scale,
        eps0: t.eps0,
        eps,
        log_n: l * (t.M_C + eps).ln(),
        base_red: t.p_C - shift,
        base_blue: 1.0 - t.p_C - shift,
        final_bound,
        final_deficit,
        bound_below_one: final_deficit > 0.0,
        auxiliary_margin,
        auxiliary_holds: auxiliary_margin >= 0.0,
        base_sum: 1.0 - base_sum_deficit,
        base_sum_deficit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::substream;

    fn brute_force(adj: &Adjacency, r: usize) -> bool {
        fn rec(adj: &Adjacency, start: usize, chosen: &mut Vec<usize>, r: usize) -> bool {
            if chosen.len() == r {
                return true;
            }
            for v in start..adj.len() {
                if chosen.iter().all(|&u| adj.get(u, v)) {
                    chosen.push(v);
                    if rec(adj, v + 1, chosen, r) {
                        return true;
                    }
                    chosen.pop();
                }
            }
            false
        }
        rec(adj, 0, &mut Vec::new(), r)
    }

    #[test]
    fn complete_graph_has_triangle() {
        let mut adj = Adjacency::new(4);
        for i in 0..4 {
            for j in i + 1..4 {
                adj.set(i, j);
            }
        }
        assert_eq!(adj.find_clique(3).unwrap().len(), 3);
        assert_eq!(adj.find_clique(4).unwrap(), vec![0, 1, 2, 3]);
        assert!(adj.find_clique(5).is_none());
    }

    #[test]
    fn pentagon_has_no_mono_triangle() {
        let mut red = Adjacency::new(5);
        for i in 0..5 {
            red.set(i, (i + 1) % 5);
        }
        let blue = red.complement();
        assert!(red.find_clique(3).is_none());
        assert!(blue.find_clique(3).is_none());
        assert!(red.find_clique(2).is_some() && blue.find_clique(2).is_some());
    }

    #[test]
    fn search_matches_brute_force_on_random_graphs() {
        let mut rng = substream(5, 0, 0);
        use rand::Rng as _;
        for n in 2..=12 {
            for _ in 0..20 {
                let density: f64 = rng.random_range(0.2..0.9);
                let mut adj = Adjacency::new(n);
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random::<f64>() < density {
                            adj.set(i, j);
                        }
                    }
                }
                for r in 2..=5.min(n) {
                    let fast = adj.find_clique(r);
                    assert_eq!(fast.is_some(), brute_force(&adj, r));
                    if let Some(v) = fast {
                        assert!(v.iter().all(|&a| v.iter().all(|&b| a == b || adj.get(a, b))));
                    }
                }
            }
        }
    }

    #[test]
    fn half_probability_red_fraction() {
        let mut rng = substream(1, mc::purpose::GRAPH, 0);
        let g = build_graph(20, 0.5, 448, &mut rng).unwrap();
        assert_eq!(g.c, 0.0);
        let edges = 448 * 447 / 2;
        let frac = g.red_edges() as f64 / edges as f64;
        assert!((frac - 0.5).abs() < 0.005, "fraction {frac}");
    }

    #[test]
    fn red_fraction_matches_p() {
        let mut rng = substream(2, mc::purpose::GRAPH, 0);
        let g = build_graph(100, 0.382, 1000, &mut rng).unwrap();
        let frac = g.red_edges() as f64 / (1000.0 * 999.0 / 2.0);
        assert!((frac - 0.382).abs() < 0.005, "fraction {frac}");
    }

    #[test]
    fn graph_is_deterministic_and_rederivable() {
        let a = build_graph(30, 0.3, 50, &mut substream(9, 2, 0)).unwrap();
        let b = build_graph(30, 0.3, 50, &mut substream(9, 2, 0)).unwrap();
        assert_eq!(a, b);
        let again = SphereGraph::from_points(a.k, a.p, a.c, a.points.clone()).unwrap();
        assert_eq!(a.red, again.red);
        for i in 0..50 {
            for j in 0..50 {
                if i != j {
                    assert_eq!(a.color(i, j), a.color(j, i));
                }
            }
        }
    }

    #[test]
    fn build_rejects_bad_inputs() {
        let mut rng = substream(0, 0, 0);
        assert!(build_graph(10, 0.3, 1, &mut rng).is_err());
        assert!(matches!(build_graph(10, 0.3, MAX_VERTICES + 1, &mut rng), Err(Error::Resource(_))));
    }

    #[test]
    fn certify_pentagon_and_fail_at_six() {
        match certify_lower_bound(1.0, 3, 50, 0.5, 5, 10_000, 7, 2).unwrap() {
            CertifyOutcome::Found(cert) => {
                assert!(find_mono_clique(&cert.graph, Color::Red, 3).is_none());
                assert!(find_mono_clique(&cert.graph, Color::Blue, 3).is_none());
                assert_eq!(cert.attempts_used, cert.attempt + 1);
            }
            CertifyOutcome::NotFound { .. } => panic!("no certificate for n = 5"),
        }
        assert_eq!(
            certify_lower_bound(1.0, 3, 50, 0.5, 6, 300, 7, 2).unwrap(),
            CertifyOutcome::NotFound { attempts: 300 }
        );
        match certify_lower_bound(1.0, 3, 50, 0.5, 2, 1, 7, 1).unwrap() {
            CertifyOutcome::Found(cert) => assert_eq!(cert.attempt, 0),
            _ => panic!("n = 2 is trivially certified"),
        }
        assert!(matches!(
            certify_lower_bound(2.0, 20, 50, 0.3, 100, 1, 7, 1),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn certify_is_worker_independent() {
        let a = certify_lower_bound(1.0, 3, 50, 0.5, 5, 10_000, 11, 1).unwrap();
        let b = certify_lower_bound(1.0, 3, 50, 0.5, 5, 10_000, 11, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn union_bound_grid() {
        for &c in &[1.5, 2.0, 5.0] {
            let d = threshold_constants(c).unwrap().D;
            for &ell in &[100usize, 1000, 10_000] {
                let rep = union_bound_report(c, ell, d).unwrap();
                assert!(rep.bound_below_one && rep.final_bound <= 1.0);
                assert!(rep.auxiliary_holds);
                assert!(rep.base_sum < 1.0 || rep.base_sum_deficit > 0.0);
            }
        }
        assert_eq!(two_term_bound(2.0, 100, 0.0), (1.0, 0.0));
        let rep = union_bound_report(2.0, 100, 50.0).unwrap();
        assert!(rep.final_bound < 1.0 && rep.base_sum < 1.0);
    }
}
