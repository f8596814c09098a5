//! Portable Ramsey lower-bound certificates: the points of a certified sphere
//! graph plus the parameters needed to recolor it. Colors are never stored;
//! they are recomputed from the points on load.

use serde::{Deserialize, Serialize};

use crate::constants::blue_clique_size;
use crate::error::{Error, Result};
use crate::geometry::{solve_cap_threshold, UnitVector};
use crate::graph::{find_mono_clique, CertifiedGraph, CliqueWitness, Color, SphereGraph, MAX_CLIQUE_SEARCH};

pub const CERTIFICATE_VERSION: u32 = 1;
/// Stored c must match the recomputed c_{k,p} to this absolute tolerance.
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;
/// Inputs larger than this are rejected before parsing.
pub const MAX_DOCUMENT_BYTES: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessCheck {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct Certificate {
    pub version: u32,
    pub C: f64,
    pub ell: usize,
    pub blue_size: usize,
    pub k: usize,
    pub p: f64,
    pub c: f64,
    pub seed: u64,
    pub attempt: u64,
    pub points: Vec<Vec<f64>>,
    pub witness_checks: WitnessCheck,
}

/// Outcome of re-verifying a certificate from its points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub threshold_matches: bool,
    pub recomputed_c: f64,
    pub blue_size_matches: bool,
    pub red_clique: Option<CliqueWitness>,
    pub blue_clique: Option<CliqueWitness>,
    pub passed: bool,
}

impl Certificate {
    pub fn from_certified(c_ratio: f64, seed: u64, cert: &CertifiedGraph) -> Self {
        let g = &cert.graph;
        Certificate {
            version: CERTIFICATE_VERSION,
            C: c_ratio,
            ell: cert.red_size,
            blue_size: cert.blue_size,
            k: g.k,
            p: g.p,
            c: g.c,
            seed,
            attempt: cert.attempt,
            points: g.points.iter().map(|x| x.coords().to_vec()).collect(),
            witness_checks: WitnessCheck::Pass,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate fields always serialize")
    }

    /// Parses and structurally validates a certificate. Never panics on
    /// malformed input.
    pub fn decode(text: &str) -> Result<Self> {
        if text.len() > MAX_DOCUMENT_BYTES {
            return Err(Error::Decode(format!("document exceeds {MAX_DOCUMENT_BYTES} bytes")));
        }
        let cert: Certificate = serde_json::from_str(text).map_err(|e| Error::Decode(e.to_string()))?;
        cert.validate()?;
        Ok(cert)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Decode(msg));
        if self.version != CERTIFICATE_VERSION {
            return bad(format!("unsupported certificate version {}", self.version));
        }
        if !(self.C.is_finite() && self.C >= 1.0) {
            return bad(format!("C = {} must be finite and >= 1", self.C));
        }
        if self.ell < 2 || self.ell > MAX_CLIQUE_SEARCH || self.blue_size < 2 || self.blue_size > MAX_CLIQUE_SEARCH {
            return bad(format!("clique sizes ({}, {}) outside 2..={MAX_CLIQUE_SEARCH}", self.ell, self.blue_size));
        }
        if self.k < 1 || self.k >= crate::graph::MAX_COORDINATES {
            return bad(format!("dimension k = {} out of range", self.k));
        }
        if !(self.p > 0.0 && self.p <= 0.5) || !self.c.is_finite() {
            return bad("p must lie in (0, 1/2] and c must be finite".into());
        }
        let n = self.points.len();
        if !(2..=crate::graph::MAX_VERTICES).contains(&n) || n.saturating_mul(self.k + 1) > crate::graph::MAX_COORDINATES {
            return bad(format!("{n} points in dimension {} exceed the certificate limits", self.k));
        }
        if let Some(i) = self.points.iter().position(|x| x.len() != self.k + 1) {
            return bad(format!("point {i} does not have k + 1 = {} coordinates", self.k + 1));
        }
        Ok(())
    }

    /// Rebuilds the graph from the stored points and reruns both clique
    /// searches.
    pub fn verify(&self) -> Result<CertificateCheck> {
        self.validate()?;
        let recomputed_c = solve_cap_threshold(self.k, self.p)?.c;
        let points = self
            .points
            .iter()
            .map(|x| UnitVector::new(x.clone()))
            .collect::<Result<Vec<_>>>()?;
        let g = SphereGraph::from_points(self.k, self.p, recomputed_c, points)?;
        let red_clique = find_mono_clique(&g, Color::Red, self.ell);
        let blue_clique = find_mono_clique(&g, Color::Blue, self.blue_size);
        let threshold_matches = (recomputed_c - self.c).abs() <= THRESHOLD_TOLERANCE;
        let blue_size_matches = blue_clique_size(self.C, self.ell) == self.blue_size;
        let passed = threshold_matches
            && blue_size_matches
            && red_clique.is_none()
            && blue_clique.is_none()
            && self.witness_checks == WitnessCheck::Pass;
        Ok(CertificateCheck { threshold_matches, recomputed_c, blue_size_matches, red_clique, blue_clique, passed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{certify_lower_bound, CertifyOutcome};

    fn certified() -> Certificate {
        match certify_lower_bound(1.0, 3, 50, 0.5, 5, 10_000, 7, 1).unwrap() {
            CertifyOutcome::Found(cert) => Certificate::from_certified(1.0, 7, &cert),
            CertifyOutcome::NotFound { attempts } => panic!("no certificate in {attempts} attempts"),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let cert = certified();
        let back = Certificate::decode(&cert.to_json()).unwrap();
        assert_eq!(back, cert);
        assert!(back.verify().unwrap().passed);
    }

    #[test]
    fn tampered_threshold_fails() {
        let mut cert = certified();
        cert.c += 1e-3;
        let check = cert.verify().unwrap();
        assert!(!check.threshold_matches && !check.passed);
    }

    #[test]
    fn flipping_a_point_can_create_a_clique() {
        let mut cert = certified();
        // Collapsing every point onto the first makes all pairs blue (p = 1/2, c = 0).
        let first = cert.points[0].clone();
        cert.points.iter_mut().for_each(|x| *x = first.clone());
        let check = cert.verify().unwrap();
        assert!(check.blue_clique.is_some() && !check.passed);
    }

    #[test]
    fn decode_rejects_malformed_documents() {
        let good = certified().to_json();
        assert!(Certificate::decode("").is_err());
        assert!(Certificate::decode("[]").is_err());
        assert!(Certificate::decode(&good.replace("\"version\": 1", "\"version\": 2")).is_err());
        assert!(Certificate::decode(&good.replacen('{', "{\"extra\": 0,", 1)).is_err());
        let mut short = certified();
        short.points[1].pop();
        assert!(Certificate::decode(&short.to_json()).is_err());
        let mut off_sphere = certified();
        off_sphere.points[0][0] += 0.5;
        let text = off_sphere.to_json();
        assert!(Certificate::decode(&text).unwrap().verify().is_err());
    }
}
