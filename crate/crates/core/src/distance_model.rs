//! Binned similarity → (expected distance, variance) model.
//!
//! Training pairs come from each robot's own odometry over short path
//! segments, where dead reckoning is still trustworthy. Samples are binned by
//! similarity with width `r`; every non-empty bin stores the mean distance and
//! the population variance of its members.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose_graph::Pose2;
use crate::radio_fingerprint::Fingerprint;
use crate::scalar::Real;
use crate::similarity::{similarity, SimilarityParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample<T> {
    /// similarity in [0, 1]
    pub s: T,
    /// odometry distance, meters
    pub d: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin<T> {
    pub center: T,
    #[serde(rename = "d")]
    pub d_hat: T,
    pub var: T,
    #[serde(rename = "n")]
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct SimilarityDistanceModel<T> {
    /// bin width
    pub r: T,
    /// Path-length limit the training pairs were harvested with, meters.
    #[serde(rename = "max_path_m")]
    pub max_training_path_m: T,
    /// Non-empty bins in ascending center order.
    pub bins: Vec<Bin<T>>,
}

/// Cumulative odometry path length at each pose.
pub fn cumulative_path<T: Real>(poses: &[Pose2<T>]) -> Vec<T> {
    let mut acc = T::zero();
    let mut out = Vec::with_capacity(poses.len());
    for (k, p) in poses.iter().enumerate() {
        if k > 0 {
            acc += poses[k - 1].distance(p);
        }
        out.push(acc);
    }
    out
}

/// Labels every same-robot pair within `max_path_m` of travel with its
/// similarity and straight-line odometry distance. Output is ordered by `(i, j)`.
pub fn collect_training_pairs<T: Real>(
    fingerprints: &[Fingerprint<T>],
    poses: &[Pose2<T>],
    params: &SimilarityParams<T>,
    max_path_m: T,
) -> Result<Vec<TrainingSample<T>>> {
    if fingerprints.len() != poses.len() {
        return Err(Error::Data(format!(
            "{} fingerprints but {} poses",
            fingerprints.len(),
            poses.len()
        )));
    }
    if fingerprints.len() < 2 || !(max_path_m > T::zero()) {
        return Ok(Vec::new());
    }
    let path = cumulative_path(poses);
    let rows: Vec<Vec<TrainingSample<T>>> = (0..fingerprints.len())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            for j in i + 1..fingerprints.len() {
                if path[j] - path[i] > max_path_m {
                    break;
                }
                row.push(TrainingSample {
                    s: similarity(&fingerprints[i], &fingerprints[j], params).s,
                    d: poses[i].distance(&poses[j]),
                });
            }
            row
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Index of the bin holding similarity `s`; `s = 1` folds into the last bin.
pub fn bin_index<T: Real>(s: T, r: T) -> i64 {
    let last = ((T::one() / r).ceil().to_i64().unwrap_or(1) - 1).max(0);
    let k = (s / r).floor().to_i64().unwrap_or(0);
    k.clamp(0, last)
}

fn center_of<T: Real>(k: i64, r: T) -> T {
    (T::lit(k as f64) + T::lit(0.5)) * r
}

/// Fits the binned model. Bin statistics are accumulated in sorted sample
/// order, so the result does not depend on the input order.
pub fn fit_binned_model<T: Real>(
    samples: &[TrainingSample<T>],
    r: T,
    max_training_path_m: T,
) -> Result<SimilarityDistanceModel<T>> {
    if !(r > T::zero() && r <= T::one()) {
        return Err(Error::Config(format!("bin width r must be in (0, 1], got {r}")));
    }
    if samples.is_empty() {
        return Err(Error::ModelFit("no training samples".into()));
    }
    if let Some(bad) = samples
        .iter()
        .find(|x| !(x.s >= T::zero() && x.s <= T::one()) || !(x.d >= T::zero()) || !x.d.is_finite())
    {
        return Err(Error::ModelFit(format!(
            "training sample out of range: s = {}, d = {}",
            bad.s, bad.d
        )));
    }
    let mut keyed: Vec<(i64, TrainingSample<T>)> = samples.iter().map(|x| (bin_index(x.s, r), *x)).collect();
    keyed.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.s.partial_cmp(&b.1.s).unwrap_or(Ordering::Equal))
            .then(a.1.d.partial_cmp(&b.1.d).unwrap_or(Ordering::Equal))
    });

    let mut bins = Vec::new();
    for group in keyed.chunk_by(|a, b| a.0 == b.0) {
        let n = T::from_count(group.len());
        let mean = group.iter().map(|(_, x)| x.d).fold(T::zero(), |a, d| a + d) / n;
        let var = group
            .iter()
            .map(|(_, x)| (x.d - mean) * (x.d - mean))
            .fold(T::zero(), |a, v| a + v)
            / n;
        bins.push(Bin {
            center: center_of(group[0].0, r),
            d_hat: mean,
            var,
            count: group.len(),
        });
    }
    Ok(SimilarityDistanceModel {
        r,
        max_training_path_m,
        bins,
    })
}

impl<T: Real> SimilarityDistanceModel<T> {
    pub fn total_count(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Checks the stored bins against the model invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.r > T::zero() && self.r <= T::one()) {
            return Err(Error::Data(format!("model bin width {} outside (0, 1]", self.r)));
        }
        for b in &self.bins {
            if b.count == 0 || !(b.var >= T::zero()) || !(b.d_hat >= T::zero()) {
                return Err(Error::Data(format!("invalid model bin at {}", b.center)));
            }
        }
        if self
            .bins
            .windows(2)
            .any(|w| self.index_of(&w[0]) >= self.index_of(&w[1]))
        {
            return Err(Error::Data("model bins not strictly ascending".into()));
        }
        Ok(())
    }

    fn index_of(&self, bin: &Bin<T>) -> i64 {
        (bin.center / self.r - T::lit(0.5)).round().to_i64().unwrap_or(i64::MIN)
    }

    /// Expected distance and variance for similarity `s` by pure bin lookup,
    /// falling back to the nearest stored bin (ties go to the higher similarity).
    pub fn predict(&self, s: T) -> Result<(T, T)> {
        self.predict_with(s, false)
    }

    /// As [`predict`](Self::predict); with `interpolate`, values between two
    /// stored bin centers are linearly interpolated.
    pub fn predict_with(&self, s: T, interpolate: bool) -> Result<(T, T)> {
        if self.bins.is_empty() {
            return Err(Error::EmptyModel);
        }
        if interpolate {
            if let Some(k) = self.bins.windows(2).position(|w| w[0].center <= s && s <= w[1].center) {
                let (lo, hi) = (&self.bins[k], &self.bins[k + 1]);
                let t = (s - lo.center) / (hi.center - lo.center);
                return Ok((lo.d_hat + t * (hi.d_hat - lo.d_hat), lo.var + t * (hi.var - lo.var)));
            }
        }
        let k = bin_index(s, self.r);
        if let Ok(pos) = self.bins.binary_search_by(|b| self.index_of(b).cmp(&k)) {
            let b = &self.bins[pos];
            return Ok((b.d_hat, b.var));
        }
        let mut best = &self.bins[0];
        let mut best_dist = (best.center - s).abs();
        for b in &self.bins[1..] {
            let dist = (b.center - s).abs();
            // ascending centers: `<=` prefers the higher-similarity bin on ties
            if dist <= best_dist {
                best = b;
                best_dist = dist;
            }
        }
        Ok((best.d_hat, best.var))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio_fingerprint::FingerprintEntry;

    fn sample(s: f64, d: f64) -> TrainingSample<f64> {
        TrainingSample { s, d }
    }

    fn fp(rss: f64) -> Fingerprint<f64> {
        Fingerprint::new(
            0,
            0,
            0.0,
            vec![FingerprintEntry {
                ap_id: "a".into(),
                mean_rss: rss,
                detection_ratio: 1.0,
            }],
            1,
        )
        .unwrap()
    }

    #[test]
    fn single_bin_fit() {
        let m = fit_binned_model(&[sample(0.51, 2.0), sample(0.52, 4.0)], 0.05, 100.0).unwrap();
        assert_eq!(m.bins.len(), 1);
        let b = m.bins[0];
        assert!((b.center - 0.525).abs() < 1e-15);
        assert_eq!((b.d_hat, b.var, b.count), (3.0, 1.0, 2));
        assert_eq!(m.predict(0.51).unwrap(), (3.0, 1.0));
        assert_eq!(m.predict(0.9).unwrap(), (3.0, 1.0));
    }

    #[test]
    fn single_sample_has_zero_variance() {
        let m = fit_binned_model(&[sample(0.9, 7.0)], 0.05, 100.0).unwrap();
        assert_eq!(m.predict(0.9).unwrap(), (7.0, 0.0));
    }

    #[test]
    fn two_bins_conserve_counts() {
        let samples = [sample(0.11, 40.0), sample(0.12, 50.0), sample(0.93, 1.0)];
        let m = fit_binned_model(&samples, 0.05, 100.0).unwrap();
        assert_eq!(m.bins.len(), 2);
        assert_eq!(m.total_count(), 3);
        assert_eq!(m.predict(m.bins[0].center).unwrap(), (45.0, 25.0));
        assert_eq!(m.predict(m.bins[1].center).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn similarity_one_lands_in_last_bin() {
        let m = fit_binned_model(&[sample(1.0, 0.5)], 0.05, 100.0).unwrap();
        assert!((m.bins[0].center - 0.975).abs() < 1e-12);
        assert_eq!(bin_index(0.0, 0.05), 0);
    }

    #[test]
    fn nearest_bin_ties_go_up() {
        let m = SimilarityDistanceModel {
            r: 0.1,
            max_training_path_m: 100.0,
            bins: vec![
                Bin {
                    center: 0.15,
                    d_hat: 10.0,
                    var: 1.0,
                    count: 1,
                },
                Bin {
                    center: 0.35,
                    d_hat: 5.0,
                    var: 1.0,
                    count: 1,
                },
            ],
        };
        // 0.25 is equidistant from both centers and not inside either bin
        assert_eq!(m.predict(0.25).unwrap().0, 5.0);
        assert_eq!(m.predict_with(0.25, true).unwrap().0, 7.5);
        assert_eq!(m.predict(0.0).unwrap().0, 10.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_binned_model::<f64>(&[], 0.05, 1.0),
            Err(Error::ModelFit(_))
        ));
        assert!(fit_binned_model(&[sample(0.5, 1.0)], 0.0, 1.0).is_err());
        assert!(fit_binned_model(&[sample(1.5, 1.0)], 0.05, 1.0).is_err());
        let empty = SimilarityDistanceModel::<f64> {
            r: 0.05,
            max_training_path_m: 1.0,
            bins: vec![],
        };
        assert!(matches!(empty.predict(0.5), Err(Error::EmptyModel)));
    }

    #[test]
    fn training_pair_examples() {
        let same = [fp(-50.0), fp(-50.0)];
        let poses = [Pose2::new(1.0, 1.0, 0.0); 2];
        let p = SimilarityParams::default();
        let out = collect_training_pairs(&same, &poses, &p, 100.0).unwrap();
        assert_eq!(out, vec![sample(1.0, 0.0)]);

        let fps = [fp(-50.0), fp(-60.0), fp(-70.0)];
        let line = [
            Pose2::new(0.0, 0.0, 0.0),
            Pose2::new(60.0, 0.0, 0.0),
            Pose2::new(120.0, 0.0, 0.0),
        ];
        let out = collect_training_pairs(&fps, &line, &p, 100.0).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|x| x.d == 60.0));
        assert!(collect_training_pairs(&fps, &line, &p, 0.0).unwrap().is_empty());
        assert!(collect_training_pairs(&fps[..1], &line[..1], &p, 100.0)
            .unwrap()
            .is_empty());
        assert!(collect_training_pairs(&fps, &line[..2], &p, 100.0).is_err());
    }

    #[test]
    fn json_shape() {
        let m = fit_binned_model(&[sample(0.51, 2.0), sample(0.52, 4.0)], 0.05, 100.0).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(
            json.starts_with(r#"{"r":0.05,"max_path_m":100.0,"bins":[{"center":0.525"#),
            "{json}"
        );
        assert!(json.ends_with(r#""d":3.0,"var":1.0,"n":2}]}"#), "{json}");
    }
}
