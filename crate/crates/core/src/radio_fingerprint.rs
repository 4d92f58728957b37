//! Windowing of raw WiFi scans into fingerprints, and pairwise AP-set decomposition.
//!
//! A fingerprint summarises every scan a robot's devices took inside one fixed
//! time window: for each access point it keeps the mean RSS over the scans that
//! saw it and the fraction of scans that saw it at all.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One access point heard in one scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "(String, T)",
    from = "(String, T)",
    bound = "T: Real + Serialize + for<'a> Deserialize<'a>"
)]
pub struct ApObservation<T> {
    pub ap_id: String,
    /// dBm
    pub rss: T,
}

impl<T> From<(String, T)> for ApObservation<T> {
    fn from((ap_id, rss): (String, T)) -> Self {
        Self { ap_id, rss }
    }
}

impl<T> From<ApObservation<T>> for (String, T) {
    fn from(o: ApObservation<T>) -> Self {
        (o.ap_id, o.rss)
    }
}

/// A single WiFi scan from one device on one robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct RawScan<T> {
    pub robot: u32,
    pub device: u32,
    #[serde(rename = "t")]
    pub timestamp: f64,
    #[serde(rename = "obs")]
    pub observations: Vec<ApObservation<T>>,
}

impl<T: Real> RawScan<T> {
    /// Builds a scan, lowercasing AP ids and checking the observation invariants.
    pub fn new(robot: u32, device: u32, timestamp: f64, observations: Vec<ApObservation<T>>) -> Result<Self> {
        let mut scan = Self {
            robot,
            device,
            timestamp,
            observations,
        };
        scan.normalize()?;
        Ok(scan)
    }

    /// Lowercases AP ids in place and validates the scan.
    pub fn normalize(&mut self) -> Result<()> {
        if !self.timestamp.is_finite() {
            return Err(Error::Data(format!(
                "scan of robot {} has non-finite timestamp",
                self.robot
            )));
        }
        let mut seen = HashSet::with_capacity(self.observations.len());
        for obs in &mut self.observations {
            if obs.ap_id.is_empty() {
                return Err(Error::Data("empty ap_id in scan".into()));
            }
            if !obs.rss.is_finite() {
                return Err(Error::Data(format!("non-finite rss for {}", obs.ap_id)));
            }
            if obs.ap_id.bytes().any(|b| b.is_ascii_uppercase()) {
                obs.ap_id = obs.ap_id.to_ascii_lowercase();
            }
            if !seen.insert(obs.ap_id.clone()) {
                return Err(Error::Data(format!(
                    "duplicate ap_id {} in scan at t={}",
                    obs.ap_id, self.timestamp
                )));
            }
        }
        Ok(())
    }
}

/// Per-AP summary inside a fingerprint.
#[derive(Clone, Debug, PartialEq)]
pub struct FingerprintEntry<T> {
    pub ap_id: String,
    /// Mean RSS over the scans containing this AP, dBm.
    pub mean_rss: T,
    /// Fraction of the window's scans that contain this AP, in (0, 1].
    pub detection_ratio: T,
}

/// Radio signature of one time window of one robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct Fingerprint<T> {
    pub robot: u32,
    pub index: usize,
    /// Window center, seconds.
    pub timestamp: f64,
    /// Sorted by `ap_id`, ids unique.
    #[serde(with = "entry_map")]
    pub entries: Vec<FingerprintEntry<T>>,
    pub scan_count: usize,
}

impl<T: Real> Fingerprint<T> {
    /// Builds a fingerprint from unsorted entries.
    pub fn new(
        robot: u32,
        index: usize,
        timestamp: f64,
        mut entries: Vec<FingerprintEntry<T>>,
        scan_count: usize,
    ) -> Result<Self> {
        entries.sort_by(|a, b| a.ap_id.cmp(&b.ap_id));
        if entries.windows(2).any(|w| w[0].ap_id == w[1].ap_id) {
            return Err(Error::Data("duplicate ap_id in fingerprint".into()));
        }
        for e in &entries {
            if !(e.detection_ratio > T::zero() && e.detection_ratio <= T::one()) {
                return Err(Error::Data(format!("detection ratio of {} outside (0, 1]", e.ap_id)));
            }
            if !e.mean_rss.is_finite() {
                return Err(Error::Data(format!("non-finite mean rss for {}", e.ap_id)));
            }
        }
        Ok(Self {
            robot,
            index,
            timestamp,
            entries,
            scan_count,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, ap_id: &str) -> Option<&FingerprintEntry<T>> {
        self.entries
            .binary_search_by(|e| e.ap_id.as_str().cmp(ap_id))
            .ok()
            .map(|i| &self.entries[i])
    }
}

mod entry_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S, T>(entries: &[FingerprintEntry<T>], s: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
        T: Real,
    {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(entries.len()))?;
        for e in entries {
            map.serialize_entry(&e.ap_id, &(e.mean_rss, e.detection_ratio))?;
        }
        map.end()
    }

    pub fn deserialize<'de, D, T>(d: D) -> Result<Vec<FingerprintEntry<T>>, D::Error>
    where
        D: Deserializer<'de>,
        T: Real,
    {
        let map = BTreeMap::<String, (T, T)>::deserialize(d)?;
        Ok(map
            .into_iter()
            .map(|(ap_id, (mean_rss, detection_ratio))| FingerprintEntry {
                ap_id,
                mean_rss,
                detection_ratio,
            })
            .collect())
    }
}

/// Groups time-ordered scans of one robot into non-overlapping windows of
/// `window_s` seconds aligned to the first scan.
pub fn group_scans<T: Real>(scans: &[RawScan<T>], window_s: f64) -> Result<Vec<Fingerprint<T>>> {
    group_scans_with(scans, window_s, 1)
}

/// As [`group_scans`], additionally dropping fingerprints with fewer than `min_aps` APs.
pub fn group_scans_with<T: Real>(scans: &[RawScan<T>], window_s: f64, min_aps: usize) -> Result<Vec<Fingerprint<T>>> {
    if !(window_s > 0.0 && window_s.is_finite()) {
        return Err(Error::Config(format!("window_s must be > 0, got {window_s}")));
    }
    let Some(first) = scans.first() else {
        return Ok(Vec::new());
    };
    let robot = first.robot;
    for pair in scans.windows(2) {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(Error::DataOrder {
                previous: pair[0].timestamp,
                next: pair[1].timestamp,
            });
        }
    }
    if let Some(other) = scans.iter().find(|s| s.robot != robot) {
        return Err(Error::Data(format!(
            "group_scans expects one robot, got {} and {}",
            robot, other.robot
        )));
    }

    let t0 = first.timestamp;
    let mut out = Vec::new();
    let mut start = 0;
    while start < scans.len() {
        let window = ((scans[start].timestamp - t0) / window_s).floor();
        let mut end = start + 1;
        while end < scans.len() && ((scans[end].timestamp - t0) / window_s).floor() == window {
            end += 1;
        }
        let center = t0 + (window + 0.5) * window_s;
        if let Some(fp) = aggregate(&scans[start..end], robot, out.len(), center, min_aps)? {
            out.push(fp);
        }
        start = end;
    }
    Ok(out)
}

fn aggregate<T: Real>(
    scans: &[RawScan<T>],
    robot: u32,
    index: usize,
    timestamp: f64,
    min_aps: usize,
) -> Result<Option<Fingerprint<T>>> {
    let mut per_ap: BTreeMap<&str, Vec<T>> = BTreeMap::new();
    for scan in scans {
        for obs in &scan.observations {
            per_ap.entry(obs.ap_id.as_str()).or_default().push(obs.rss);
        }
    }
    if per_ap.is_empty() || per_ap.len() < min_aps {
        return Ok(None);
    }
    let scan_count = scans.len();
    let entries = per_ap
        .into_iter()
        .map(|(ap_id, mut values)| {
            // Sorting makes the sum independent of device interleaving.
            values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            let n = values.len();
            let sum: T = values.into_iter().sum();
            FingerprintEntry {
                ap_id: ap_id.to_owned(),
                mean_rss: sum / T::from_count(n),
                detection_ratio: T::from_count(n) / T::from_count(scan_count),
            }
        })
        .collect();
    Fingerprint::new(robot, index, timestamp, entries, scan_count).map(Some)
}

/// Common and extra APs of a fingerprint pair.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PairDecomposition<T> {
    /// `(rss_a, rss_b)` for APs present in both, in AP-id order.
    pub common: Vec<(T, T)>,
    /// Detection ratios of APs seen only by `a`.
    pub extra_a: Vec<T>,
    /// Detection ratios of APs seen only by `b`.
    pub extra_b: Vec<T>,
}

impl<T> PairDecomposition<T> {
    /// Number of common APs.
    pub fn h(&self) -> usize {
        self.common.len()
    }
    pub fn m_a(&self) -> usize {
        self.extra_a.len()
    }
    pub fn m_b(&self) -> usize {
        self.extra_b.len()
    }
}

/// Partitions the AP-id union of `a` and `b` into common and extra sets.
pub fn pair_decompose<T: Real>(a: &Fingerprint<T>, b: &Fingerprint<T>) -> PairDecomposition<T> {
    let mut out = PairDecomposition {
        common: Vec::new(),
        extra_a: Vec::new(),
        extra_b: Vec::new(),
    };
    merge_join(
        &a.entries,
        &b.entries,
        |ea, eb| out.common.push((ea.mean_rss, eb.mean_rss)),
        |ea| out.extra_a.push(ea.detection_ratio),
        |eb| out.extra_b.push(eb.detection_ratio),
    );
    out
}

/// Walks two id-sorted entry lists in lockstep.
pub(crate) fn merge_join<T, FB, FA, FO>(
    a: &[FingerprintEntry<T>],
    b: &[FingerprintEntry<T>],
    mut both: FB,
    mut only_a: FA,
    mut only_b: FO,
) where
    FB: FnMut(&FingerprintEntry<T>, &FingerprintEntry<T>),
    FA: FnMut(&FingerprintEntry<T>),
    FO: FnMut(&FingerprintEntry<T>),
{
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].ap_id.cmp(&b[j].ap_id) {
            Ordering::Equal => {
                both(&a[i], &b[j]);
                i += 1;
                j += 1;
            }
            Ordering::Less => {
                only_a(&a[i]);
                i += 1;
            }
            Ordering::Greater => {
                only_b(&b[j]);
                j += 1;
            }
        }
    }
    a[i..].iter().for_each(&mut only_a);
    b[j..].iter().for_each(&mut only_b);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan(t: f64, device: u32, obs: &[(&str, f64)]) -> RawScan<f64> {
        RawScan::new(
            0,
            device,
            t,
            obs.iter()
                .map(|(id, rss)| ApObservation {
                    ap_id: id.to_string(),
                    rss: *rss,
                })
                .collect(),
        )
        .unwrap()
    }

    fn fp(ids: &[&str]) -> Fingerprint<f64> {
        Fingerprint::new(
            0,
            0,
            0.0,
            ids.iter()
                .map(|id| FingerprintEntry {
                    ap_id: id.to_string(),
                    mean_rss: -60.0,
                    detection_ratio: 1.0,
                })
                .collect(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn single_scan_is_identity() {
        let fps = group_scans(&[scan(0.0, 0, &[("ap1", -50.0)])], 5.0).unwrap();
        assert_eq!(fps.len(), 1);
        let e = fps[0].get("ap1").unwrap();
        assert_eq!((e.mean_rss, e.detection_ratio), (-50.0, 1.0));
        assert_eq!(fps[0].scan_count, 1);
        assert_eq!(fps[0].timestamp, 2.5);
    }

    #[test]
    fn two_scans_average() {
        let fps = group_scans(
            &[
                scan(0.0, 0, &[("ap1", -50.0)]),
                scan(1.0, 1, &[("ap1", -60.0), ("ap2", -70.0)]),
            ],
            5.0,
        )
        .unwrap();
        assert_eq!(fps.len(), 1);
        let f = &fps[0];
        assert_eq!(
            f.get("ap1").map(|e| (e.mean_rss, e.detection_ratio)),
            Some((-55.0, 1.0))
        );
        assert_eq!(
            f.get("ap2").map(|e| (e.mean_rss, e.detection_ratio)),
            Some((-70.0, 0.5))
        );
    }

    #[test]
    fn window_boundaries() {
        let fps = group_scans(&[scan(0.0, 0, &[("ap1", -50.0)]), scan(7.0, 0, &[("ap1", -50.0)])], 5.0).unwrap();
        assert_eq!(fps.len(), 2);
        assert_eq!((fps[0].timestamp, fps[1].timestamp), (2.5, 7.5));
        assert_eq!((fps[0].index, fps[1].index), (0, 1));

        // gap windows are skipped, indices stay consecutive
        let fps = group_scans(
            &[scan(0.0, 0, &[("ap1", -50.0)]), scan(23.0, 0, &[("ap1", -50.0)])],
            5.0,
        )
        .unwrap();
        assert_eq!(fps.iter().map(|f| f.index).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(fps[1].timestamp, 22.5);
    }

    #[test]
    fn empty_and_invalid_inputs() {
        assert!(group_scans::<f64>(&[], 5.0).unwrap().is_empty());
        let err = group_scans(&[scan(3.0, 0, &[]), scan(1.0, 0, &[])], 5.0).unwrap_err();
        assert!(matches!(err, Error::DataOrder { .. }));
        assert!(matches!(
            group_scans(&[scan(0.0, 0, &[("a", -1.0)])], 0.0),
            Err(Error::Config(_))
        ));
        // a window whose scans saw nothing yields no fingerprint
        assert!(group_scans(&[scan(0.0, 0, &[])], 5.0).unwrap().is_empty());
    }

    #[test]
    fn min_aps_filter() {
        let scans = [
            scan(0.0, 0, &[("a", -50.0)]),
            scan(6.0, 0, &[("a", -50.0), ("b", -40.0)]),
        ];
        let fps = group_scans_with(&scans, 5.0, 2).unwrap();
        assert_eq!(fps.len(), 1);
        assert_eq!(fps[0].index, 0);
        assert_eq!(fps[0].timestamp, 7.5);
    }

    #[test]
    fn scan_validation() {
        let dup = RawScan::new(
            0,
            0,
            0.0,
            vec![
                ApObservation {
                    ap_id: "AA:BB".into(),
                    rss: -50.0,
                },
                ApObservation {
                    ap_id: "aa:bb".into(),
                    rss: -40.0,
                },
            ],
        );
        assert!(dup.is_err());
        let s = RawScan::new(
            0,
            0,
            0.0,
            vec![ApObservation {
                ap_id: "AA:BB".into(),
                rss: -50.0,
            }],
        )
        .unwrap();
        assert_eq!(s.observations[0].ap_id, "aa:bb");
        assert!(RawScan::new(
            0,
            0,
            0.0,
            vec![ApObservation {
                ap_id: "x".into(),
                rss: f64::NAN
            }]
        )
        .is_err());
        assert!(RawScan::new(
            0,
            0,
            0.0,
            vec![ApObservation {
                ap_id: String::new(),
                rss: -1.0
            }]
        )
        .is_err());
    }

    #[test]
    fn raw_scan_json_shape() {
        let line = r#"{"robot":0,"device":2,"t":12.0,"obs":[["aa:bb:cc:dd:ee:ff",-57.5]]}"#;
        let s: RawScan<f64> = serde_json::from_str(line).unwrap();
        assert_eq!(s.device, 2);
        assert_eq!(s.observations[0].rss, -57.5);
        assert_eq!(serde_json::to_string(&s).unwrap(), line);
    }

    #[test]
    fn decomposition_counts() {
        let d = pair_decompose(&fp(&["ap1", "ap2"]), &fp(&["ap1", "ap2"]));
        assert_eq!((d.h(), d.m_a(), d.m_b()), (2, 0, 0));
        let d = pair_decompose(&fp(&["ap1"]), &fp(&["ap2"]));
        assert_eq!((d.h(), d.m_a(), d.m_b()), (0, 1, 1));
        let d = pair_decompose(&fp(&["ap1", "ap2"]), &fp(&["ap2", "ap3", "ap4"]));
        assert_eq!((d.h(), d.m_a(), d.m_b()), (1, 1, 2));
    }
}
