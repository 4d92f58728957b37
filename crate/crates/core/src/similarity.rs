//! Fingerprint similarity measures.
//!
//! The proposed measure multiplies three factors: a per-AP Gaussian RSS
//! likelihood over common APs (geometric mean), a Gaussian detection
//! likelihood over APs heard by only one side, and the overlap fraction
//! `H / (H + M_a + M_b)`. The Gaussian baseline drops the detection factor;
//! the cosine baseline compares floor-shifted RSS vectors over the AP union.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio_fingerprint::{merge_join, Fingerprint};
use crate::scalar::Real;

/// RSS floor used by the cosine measure, dBm.
pub const COSINE_FLOOR_DBM: f64 = -100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Proposed,
    Gaussian,
    Cosine,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Proposed, Measure::Gaussian, Measure::Cosine];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Proposed => "proposed",
            Measure::Gaussian => "gaussian",
            Measure::Cosine => "cosine",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proposed" | "ours" => Ok(Measure::Proposed),
            "gaussian" => Ok(Measure::Gaussian),
            "cosine" => Ok(Measure::Cosine),
            other => Err(Error::Config(format!("unknown similarity measure '{other}'"))),
        }
    }
}

/// Scale of the detection variable fed into the detection likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauScale {
    /// Fraction of the window's scans containing the AP.
    #[default]
    Ratio,
    /// Number of the window's scans containing the AP.
    Count,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct SimilarityParams<T> {
    /// RSS likelihood scale, dBm.
    pub sigma_r: T,
    /// Detection likelihood scale.
    pub sigma_tau: T,
    pub measure: Measure,
    pub tau_scale: TauScale,
    /// Keep the overlap fraction in the Gaussian baseline.
    pub gaussian_keep_overlap: bool,
}

impl<T: Real> Default for SimilarityParams<T> {
    fn default() -> Self {
        Self {
            sigma_r: T::lit(6.0),
            sigma_tau: T::lit(4.0),
            measure: Measure::Proposed,
            tau_scale: TauScale::Ratio,
            gaussian_keep_overlap: true,
        }
    }
}

impl<T: Real> SimilarityParams<T> {
    pub fn with_measure(self, measure: Measure) -> Self {
        Self { measure, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_r > T::zero() && self.sigma_r.is_finite()) {
            return Err(Error::Config(format!("sigma_r must be > 0, got {}", self.sigma_r)));
        }
        if !(self.sigma_tau > T::zero()) {
            return Err(Error::Config(format!("sigma_tau must be > 0, got {}", self.sigma_tau)));
        }
        Ok(())
    }
}

/// Similarity value together with the factors it was built from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityScore<T> {
    pub s: T,
    /// RSS likelihood product over common APs (before the H-th root).
    pub s_r: T,
    /// Detection likelihood over extra APs.
    pub s_tau: T,
    /// `H / (H + M_a + M_b)`.
    pub overlap_fraction: T,
}

/// Gaussian RSS likelihood of the common-AP pairs. Empty input gives 1.
pub fn rss_likelihood<T: Real>(common_pairs: &[(T, T)], sigma_r: T) -> T {
    (-sum_sq_diff(common_pairs.iter().copied()) / (T::lit(2.0) * sigma_r * sigma_r)).exp()
}

/// Detection likelihood of the APs heard by only one fingerprint. No extras gives 1.
pub fn detection_likelihood<T: Real>(extra_a: &[T], extra_b: &[T], sigma_tau: T) -> T {
    let ssq = sum_sq(extra_a.iter().copied()) + sum_sq(extra_b.iter().copied());
    (-ssq / (T::lit(2.0) * sigma_tau * sigma_tau)).exp()
}

fn sum_sq_diff<T: Real>(pairs: impl Iterator<Item = (T, T)>) -> T {
    pairs.fold(T::zero(), |acc, (a, b)| {
        let d = a - b;
        acc + d * d
    })
}

fn sum_sq<T: Real>(values: impl Iterator<Item = T>) -> T {
    values.fold(T::zero(), |acc, v| acc + v * v)
}

/// Similarity of two fingerprints under `params.measure`.
///
/// Symmetric bit-for-bit: every accumulation runs in AP-id order and the two
/// one-sided sums are combined with a single commutative addition.
pub fn similarity<T: Real>(a: &Fingerprint<T>, b: &Fingerprint<T>, params: &SimilarityParams<T>) -> SimilarityScore<T> {
    match params.measure {
        Measure::Proposed | Measure::Gaussian => likelihood_similarity(a, b, params),
        Measure::Cosine => cosine_similarity(a, b),
    }
}

fn tau_of<T: Real>(ratio: T, scan_count: usize, scale: TauScale) -> T {
    match scale {
        TauScale::Ratio => ratio,
        TauScale::Count => (ratio * T::from_count(scan_count)).round(),
    }
}

fn likelihood_similarity<T: Real>(
    a: &Fingerprint<T>,
    b: &Fingerprint<T>,
    params: &SimilarityParams<T>,
) -> SimilarityScore<T> {
    let mut h = 0usize;
    let mut m_a = 0usize;
    let mut m_b = 0usize;
    let mut rss_ssq = T::zero();
    let mut tau_a = T::zero();
    let mut tau_b = T::zero();
    merge_join(
        &a.entries,
        &b.entries,
        |ea, eb| {
            let d = ea.mean_rss - eb.mean_rss;
            rss_ssq += d * d;
            h += 1;
        },
        |ea| {
            let t = tau_of(ea.detection_ratio, a.scan_count, params.tau_scale);
            tau_a += t * t;
            m_a += 1;
        },
        |eb| {
            let t = tau_of(eb.detection_ratio, b.scan_count, params.tau_scale);
            tau_b += t * t;
            m_b += 1;
        },
    );

    let two = T::lit(2.0);
    let ln_s_r = -rss_ssq / (two * params.sigma_r * params.sigma_r);
    let ln_s_tau = -(tau_a + tau_b) / (two * params.sigma_tau * params.sigma_tau);
    let s_r = ln_s_r.exp();
    let s_tau = ln_s_tau.exp();
    let total = h + m_a + m_b;
    let overlap = if total == 0 {
        T::zero()
    } else {
        T::from_count(h) / T::from_count(total)
    };
    if h == 0 {
        return SimilarityScore {
            s: T::zero(),
            s_r,
            s_tau,
            overlap_fraction: overlap,
        };
    }
    let ln_rss_term = ln_s_r / T::from_count(h);
    let (ln_core, fraction) = match params.measure {
        Measure::Proposed => (ln_s_tau + ln_rss_term, overlap),
        _ if params.gaussian_keep_overlap => (ln_rss_term, overlap),
        _ => (ln_rss_term, T::one()),
    };
    let s = (ln_core.exp() * fraction).min(T::one()).max(T::zero());
    SimilarityScore {
        s,
        s_r,
        s_tau,
        overlap_fraction: overlap,
    }
}

fn cosine_similarity<T: Real>(a: &Fingerprint<T>, b: &Fingerprint<T>) -> SimilarityScore<T> {
    let floor = T::lit(COSINE_FLOOR_DBM);
    let shift = |rss: T| (rss - floor).max(T::zero());
    let mut dot = T::zero();
    let mut common_a = T::zero();
    let mut common_b = T::zero();
    let mut only_a = T::zero();
    let mut only_b = T::zero();
    let mut h = 0usize;
    let mut m_a = 0usize;
    let mut m_b = 0usize;
    merge_join(
        &a.entries,
        &b.entries,
        |ea, eb| {
            let (u, v) = (shift(ea.mean_rss), shift(eb.mean_rss));
            dot += u * v;
            common_a += u * u;
            common_b += v * v;
            h += 1;
        },
        |ea| {
            let u = shift(ea.mean_rss);
            only_a += u * u;
            m_a += 1;
        },
        |eb| {
            let v = shift(eb.mean_rss);
            only_b += v * v;
            m_b += 1;
        },
    );
    let norm_a = common_a + only_a;
    let norm_b = common_b + only_b;
    let extras = m_a + m_b;
    let overlap = if h + extras == 0 {
        T::zero()
    } else {
        T::from_count(h) / T::from_count(h + extras)
    };
    let s = if norm_a == T::zero() || norm_b == T::zero() {
        T::zero()
    } else {
        (dot / (norm_a * norm_b).sqrt()).min(T::one()).max(T::zero())
    };
    SimilarityScore {
        s,
        s_r: T::one(),
        s_tau: T::one(),
        overlap_fraction: overlap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio_fingerprint::FingerprintEntry;

    fn fp(entries: &[(&str, f64, f64)]) -> Fingerprint<f64> {
        Fingerprint::new(
            0,
            0,
            0.0,
            entries
                .iter()
                .map(|(id, rss, tau)| FingerprintEntry {
                    ap_id: id.to_string(),
                    mean_rss: *rss,
                    detection_ratio: *tau,
                })
                .collect(),
            10,
        )
        .unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-15 * b.abs().max(1.0)
    }

    #[test]
    fn rss_likelihood_examples() {
        assert_eq!(rss_likelihood::<f64>(&[], 6.0), 1.0);
        assert_eq!(rss_likelihood(&[(-50.0, -50.0)], 6.0), 1.0);
        assert!(close(rss_likelihood(&[(-50.0, -56.0)], 6.0), (-0.5f64).exp()));
    }

    #[test]
    fn detection_likelihood_examples() {
        assert_eq!(detection_likelihood::<f64>(&[], &[], 4.0), 1.0);
        assert!(close(detection_likelihood(&[1.0], &[], 1.0), (-0.5f64).exp()));
        assert!(close(detection_likelihood(&[1.0], &[1.0], 4.0), (-0.0625f64).exp()));
    }

    #[test]
    fn similarity_examples() {
        let p = SimilarityParams::<f64>::default();
        let a = fp(&[("ap1", -50.0, 1.0)]);
        let b = fp(&[("ap1", -56.0, 1.0)]);
        assert!(close(similarity(&a, &b, &p).s, (-0.5f64).exp()));

        let a = fp(&[("ap1", -50.0, 1.0), ("ap2", -40.0, 1.0)]);
        let b = fp(&[("ap1", -50.0, 1.0)]);
        let score = similarity(&a, &b, &p);
        assert!(close(score.s, (-1.0f64 / 32.0).exp() * 0.5));
        assert_eq!(score.overlap_fraction, 0.5);
        assert_eq!(score.s_r, 1.0);

        for m in Measure::ALL {
            let pm = p.with_measure(m);
            assert_eq!(similarity(&a, &a, &pm).s, 1.0, "{m}");
            let d = fp(&[("zz", -60.0, 1.0)]);
            assert_eq!(similarity(&a, &d, &pm).s, 0.0, "{m}");
        }
    }

    #[test]
    fn gaussian_overlap_flag() {
        let a = fp(&[("ap1", -50.0, 1.0), ("ap2", -40.0, 1.0)]);
        let b = fp(&[("ap1", -50.0, 1.0)]);
        let mut p = SimilarityParams::<f64>::default().with_measure(Measure::Gaussian);
        assert_eq!(similarity(&a, &b, &p).s, 0.5);
        p.gaussian_keep_overlap = false;
        assert_eq!(similarity(&a, &b, &p).s, 1.0);
    }

    #[test]
    fn tau_count_scale() {
        let a = fp(&[("ap1", -50.0, 1.0), ("ap2", -40.0, 0.3)]);
        let b = fp(&[("ap1", -50.0, 1.0)]);
        let p = SimilarityParams::<f64> {
            tau_scale: TauScale::Count,
            ..Default::default()
        };
        // 0.3 of 10 scans -> 3 detections
        assert!(close(similarity(&a, &b, &p).s, (-9.0f64 / 32.0).exp() * 0.5));
    }

    #[test]
    fn cosine_below_floor_is_zero() {
        let a = fp(&[("ap1", -100.0, 1.0)]);
        let b = fp(&[("ap1", -80.0, 1.0)]);
        let p = SimilarityParams::<f64>::default().with_measure(Measure::Cosine);
        assert_eq!(similarity(&a, &b, &p).s, 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let a = Fingerprint::<f32>::new(
            0,
            0,
            0.0,
            vec![FingerprintEntry {
                ap_id: "x".into(),
                mean_rss: -50.0,
                detection_ratio: 1.0,
            }],
            1,
        )
        .unwrap();
        let mut b = a.clone();
        b.entries[0].mean_rss = -56.0;
        let s = similarity(&a, &b, &SimilarityParams::<f32>::default()).s;
        assert!((s - (-0.5f32).exp()).abs() < 1e-6);
    }

    #[test]
    fn params_validation() {
        let mut p = SimilarityParams::<f64>::default();
        assert!(p.validate().is_ok());
        p.sigma_tau = 0.0;
        assert!(p.validate().is_err());
        assert_eq!("Cosine".parse::<Measure>().unwrap(), Measure::Cosine);
        assert!("nope".parse::<Measure>().is_err());
    }
}
