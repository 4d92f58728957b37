//! Synthetic multi-robot radio datasets: AP layout, lattice routes, drifting
//! odometry and per-device WiFi scans, all derived from one master seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose_graph::Pose2;
use crate::radio_fingerprint::{ApObservation, RawScan};

/// splitmix64 finalizer, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(seed, tag), index))
}

const TAG_WORLD: u64 = 1;
const TAG_ROUTE: u64 = 2;
const TAG_ODOM: u64 = 3;
const TAG_SCAN: u64 = 4;
const TAG_SHADOW: u64 = 5;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Extent {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            min_x: 0.0,
            min_y: 0.0,
            max_x: width,
            max_y: height,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.min_x, self.min_y, self.max_x, self.max_y]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.width() > 0.0) || !(self.height() > 0.0) {
            return Err(Error::Config(format!("degenerate extent {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    /// dBm at the reference distance
    pub tx_power_dbm: f64,
}

/// Frozen location-correlated shadowing: per-AP offsets on a regular grid,
/// bilinearly interpolated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowingGrid {
    pub cell_m: f64,
    pub nx: usize,
    pub ny: usize,
    /// `values[ap][iy * nx + ix]`, dB
    pub values: Vec<Vec<f64>>,
}

impl ShadowingGrid {
    fn offset(&self, extent: &Extent, ap: usize, x: f64, y: f64) -> f64 {
        let gx = ((x - extent.min_x) / self.cell_m).clamp(0.0, (self.nx - 1) as f64);
        let gy = ((y - extent.min_y) / self.cell_m).clamp(0.0, (self.ny - 1) as f64);
        let ix = (gx.floor() as usize).min(self.nx.saturating_sub(2));
        let iy = (gy.floor() as usize).min(self.ny.saturating_sub(2));
        let fx = gx - ix as f64;
        let fy = gy - iy as f64;
        let v = &self.values[ap];
        let at = |i: usize, j: usize| v[j.min(self.ny - 1) * self.nx + i.min(self.nx - 1)];
        (1.0 - fy) * ((1.0 - fx) * at(ix, iy) + fx * at(ix + 1, iy))
            + fy * ((1.0 - fx) * at(ix, iy + 1) + fx * at(ix + 1, iy + 1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub extent: Extent,
    pub aps: Vec<AccessPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadowing: Option<ShadowingGrid>,
}

impl World {
    pub fn validate(&self) -> Result<()> {
        self.extent.validate()?;
        if self.aps.is_empty() {
            return Err(Error::Data("world has no access points".into()));
        }
        if let Some(ap) = self.aps.iter().find(|ap| !self.extent.contains(ap.x, ap.y)) {
            return Err(Error::Data(format!("AP {} lies outside the extent", ap.id)));
        }
        if let Some(grid) = &self.shadowing {
            if grid.values.len() != self.aps.len()
                || grid.values.iter().any(|v| v.len() != grid.nx * grid.ny)
                || grid.nx < 2
                || grid.ny < 2
            {
                return Err(Error::Data("shadowing grid does not match the AP list".into()));
            }
        }
        Ok(())
    }

    /// Noise-free received power of AP `ap` at `(x, y)`.
    pub fn mean_rss(&self, prop: &PropagationParams, ap: usize, x: f64, y: f64) -> f64 {
        let a = &self.aps[ap];
        let d = (x - a.x).hypot(y - a.y);
        let base = path_loss_rss(a.tx_power_dbm, d, prop);
        match &self.shadowing {
            Some(grid) => base + grid.offset(&self.extent, ap, x, y),
            None => base,
        }
    }

    /// Adds a frozen shadowing field with `sigma` dB per grid node.
    pub fn with_shadowing(mut self, sigma: f64, cell_m: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && cell_m > 0.0) {
            return Err(Error::Config("shadowing needs sigma >= 0 and cell_m > 0".into()));
        }
        let nx = (self.extent.width() / cell_m).ceil() as usize + 1;
        let ny = (self.extent.height() / cell_m).ceil() as usize + 1;
        let values = (0..self.aps.len())
            .map(|k| {
                let mut rng = rng_for(seed, TAG_SHADOW, k as u64);
                (0..nx * ny).map(|_| sigma * gauss(&mut rng)).collect()
            })
            .collect();
        self.shadowing = Some(ShadowingGrid {
            cell_m,
            nx: nx.max(2),
            ny: ny.max(2),
            values,
        });
        Ok(self)
    }
}

/// Log-distance path loss, `tx - 10 n log10(max(d, d0) / d0)`.
pub fn path_loss_rss(tx_power_dbm: f64, d: f64, prop: &PropagationParams) -> f64 {
    tx_power_dbm - 10.0 * prop.path_loss_exponent * (d.max(prop.ref_distance) / prop.ref_distance).log10()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationParams {
    pub path_loss_exponent: f64,
    /// meters
    pub ref_distance: f64,
    /// Per-scan shadowing, dB.
    pub shadowing_sigma: f64,
    /// dBm
    pub detection_floor: f64,
    pub miss_prob: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            path_loss_exponent: 2.5,
            ref_distance: 1.0,
            shadowing_sigma: 4.0,
            detection_floor: -90.0,
            miss_prob: 0.1,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.path_loss_exponent > 0.0 && self.ref_distance > 0.0) {
            return Err(Error::Config("path_loss_exponent and ref_distance must be > 0".into()));
        }
        if !(self.shadowing_sigma >= 0.0) || !self.detection_floor.is_finite() {
            return Err(Error::Config(
                "shadowing_sigma must be >= 0 and detection_floor finite".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.miss_prob) {
            return Err(Error::Config(format!(
                "miss_prob must be in [0, 1), got {}",
                self.miss_prob
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdometryNoise {
    /// Translation noise std per meter travelled.
    pub trans_per_m: f64,
    /// Systematic scale error of translation.
    pub trans_bias_per_m: f64,
    /// Heading noise std per radian turned.
    pub rot_per_rad: f64,
    /// Heading noise std per meter travelled, rad/m.
    pub rot_per_m: f64,
}

impl Default for OdometryNoise {
    fn default() -> Self {
        Self {
            trans_per_m: 0.05,
            trans_bias_per_m: 0.03,
            rot_per_rad: 0.05,
            rot_per_m: 0.02,
        }
    }
}

impl OdometryNoise {
    pub const ZERO: Self = Self {
        trans_per_m: 0.0,
        trans_bias_per_m: 0.0,
        rot_per_rad: 0.0,
        rot_per_m: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let v = [
            self.trans_per_m,
            self.trans_bias_per_m,
            self.rot_per_rad,
            self.rot_per_m,
        ];
        if v.iter().all(|x| *x >= 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(
                "odometry noise coefficients must be finite and >= 0".into(),
            ))
        }
    }
}

/// Uniformly placed APs with transmit power in [-45, -30] dBm.
pub fn generate_world(extent: Extent, n_aps: usize, seed: u64) -> Result<World> {
    extent.validate()?;
    if n_aps == 0 {
        return Err(Error::Config("n_aps must be >= 1".into()));
    }
    let mut rng = rng_for(seed, TAG_WORLD, 0);
    let aps = (0..n_aps)
        .map(|k| AccessPoint {
            id: ap_id(k),
            x: rng.random_range(extent.min_x..=extent.max_x),
            y: rng.random_range(extent.min_y..=extent.max_y),
            tx_power_dbm: rng.random_range(-45.0..=-30.0),
        })
        .collect();
    Ok(World {
        extent,
        aps,
        shadowing: None,
    })
}

fn ap_id(k: usize) -> String {
    let b = (k as u64).to_be_bytes();
    format!("02:00:{:02x}:{:02x}:{:02x}:{:02x}", b[4], b[5], b[6], b[7])
}

/// Constant-speed traversal of `route`, sampled every `dt` seconds.
/// Coincident consecutive waypoints are skipped.
pub fn simulate_trajectory(route: &[(f64, f64)], speed: f64, dt: f64) -> Result<Vec<Pose2<f64>>> {
    if !(speed > 0.0 && dt > 0.0) {
        return Err(Error::Config("speed and dt must be > 0".into()));
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(route.len());
    for &p in route {
        if !(p.0.is_finite() && p.1.is_finite()) {
            return Err(Error::Data("route waypoint is not finite".into()));
        }
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    if pts.len() < 2 {
        return Err(Error::Data("route needs at least two distinct waypoints".into()));
    }
    let seg_len: Vec<f64> = pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .collect();
    let total: f64 = seg_len.iter().sum();
    let step = speed * dt;
    let n = (total / step * (1.0 + 1e-12)).floor() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..=n {
        let s = (k as f64 * step).min(total);
        while seg + 1 < seg_len.len() && s >= seg_start + seg_len[seg] {
            seg_start += seg_len[seg];
            seg += 1;
        }
        let (a, b) = (pts[seg], pts[seg + 1]);
        let f = ((s - seg_start) / seg_len[seg]).clamp(0.0, 1.0);
        let heading = (b.1 - a.1).atan2(b.0 - a.0);
        out.push(Pose2::new(a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1), heading));
    }
    Ok(out)
}

/// Noisy per-step increments; element 0 is the identity.
pub fn simulate_odometry(gt: &[Pose2<f64>], noise: &OdometryNoise, seed: u64) -> Result<Vec<Pose2<f64>>> {
    noise.validate()?;
    if gt.len() < 2 {
        return Err(Error::Data("odometry needs at least two poses".into()));
    }
    let mut rng = rng_for(seed, TAG_ODOM, 0);
    let mut out = Vec::with_capacity(gt.len());
    out.push(Pose2::identity());
    for w in gt.windows(2) {
        let z = w[0].between(&w[1]);
        let trans = z.translation_norm();
        let scale = 1.0 + noise.trans_bias_per_m;
        let st = noise.trans_per_m * trans;
        let sr = noise.rot_per_rad * z.theta.abs() + noise.rot_per_m * trans;
        let (ex, ey, eth) = (gauss(&mut rng), gauss(&mut rng), gauss(&mut rng));
        out.push(Pose2::new(
            z.x * scale + st * ex,
            z.y * scale + st * ey,
            z.theta + sr * eth,
        ));
    }
    Ok(out)
}

/// Dead-reckoned poses from `start` and per-step increments (element 0 ignored).
pub fn compose_increments(start: Pose2<f64>, increments: &[Pose2<f64>]) -> Vec<Pose2<f64>> {
    let mut out = Vec::with_capacity(increments.len());
    let mut cur = start;
    for (k, inc) in increments.iter().enumerate() {
        if k > 0 {
            cur = cur.compose(inc);
        }
        out.push(cur);
    }
    out
}

fn scan_observations(
    pose: &Pose2<f64>,
    world: &World,
    prop: &PropagationParams,
    rng: &mut ChaCha8Rng,
) -> Vec<ApObservation<f64>> {
    let mut obs = Vec::new();
    for (k, ap) in world.aps.iter().enumerate() {
        let rss = world.mean_rss(prop, k, pose.x, pose.y) + prop.shadowing_sigma * gauss(rng);
        let kept = rng.random::<f64>() >= prop.miss_prob;
        if rss >= prop.detection_floor && kept {
            obs.push(ApObservation {
                ap_id: ap.id.clone(),
                rss,
            });
        }
    }
    obs
}

/// `device_count × epochs` scans taken at `pose`; the timestamp is the epoch index.
pub fn simulate_scan(
    pose: &Pose2<f64>,
    world: &World,
    prop: &PropagationParams,
    device_count: u32,
    epochs: usize,
    seed: u64,
) -> Result<Vec<RawScan<f64>>> {
    prop.validate()?;
    if device_count == 0 || epochs == 0 {
        return Err(Error::Config("device_count and epochs must be >= 1".into()));
    }
    let mut rng = rng_for(seed, TAG_SCAN, 0);
    let mut out = Vec::with_capacity(device_count as usize * epochs);
    for e in 0..epochs {
        for device in 0..device_count {
            out.push(RawScan {
                robot: 0,
                device,
                timestamp: e as f64,
                observations: scan_observations(pose, world, prop, &mut rng),
            });
        }
    }
    Ok(out)
}

/// Pose at time `t` from samples at `times`, exact on sample instants and
/// linearly interpolated (shortest-arc heading) between them.
pub fn interpolate_pose(times: &[f64], poses: &[Pose2<f64>], t: f64) -> Option<Pose2<f64>> {
    if times.is_empty() || times.len() != poses.len() {
        return None;
    }
    match times.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(k) => Some(poses[k]),
        Err(0) => None,
        Err(k) if k == times.len() => None,
        Err(k) => {
            let f = (t - times[k - 1]) / (times[k] - times[k - 1]);
            let (a, b) = (poses[k - 1], poses[k]);
            let dth = a.between(&b).theta;
            Some(Pose2::new(
                a.x + f * (b.x - a.x),
                a.y + f * (b.y - a.y),
                a.theta + f * dth,
            ))
        }
    }
}

/// Aisle lattice used for routes: vertical aisles at `xs`, horizontal at `ys`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Lattice {
    pub fn for_extent(extent: &Extent, margin: f64, spacing_x: f64, spacing_y: f64) -> Result<Self> {
        let lines = |lo: f64, hi: f64, spacing: f64| -> Result<Vec<f64>> {
            let (a, b) = (lo + margin, hi - margin);
            if !(b > a) || !(spacing > 0.0) {
                return Err(Error::Config("extent too small for the aisle lattice".into()));
            }
            let n = ((b - a) / spacing).round().max(1.0) as usize;
            Ok((0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect())
        };
        Ok(Self {
            xs: lines(extent.min_x, extent.max_x, spacing_x)?,
            ys: lines(extent.min_y, extent.max_y, spacing_y)?,
        })
    }

    /// Random walk along aisles, never reversing unless at a dead end,
    /// until at least `length_m` has been covered.
    pub fn random_route(&self, length_m: f64, rng: &mut impl Rng) -> Vec<(f64, f64)> {
        let (nx, ny) = (self.xs.len(), self.ys.len());
        let mut cur = (rng.random_range(0..nx), rng.random_range(0..ny));
        let mut prev: Option<(usize, usize)> = None;
        let mut route = vec![(self.xs[cur.0], self.ys[cur.1])];
        let mut len = 0.0;
        while len < length_m {
            let mut nbrs = Vec::with_capacity(4);
            if cur.0 > 0 {
                nbrs.push((cur.0 - 1, cur.1));
            }
            if cur.0 + 1 < nx {
                nbrs.push((cur.0 + 1, cur.1));
            }
            if cur.1 > 0 {
                nbrs.push((cur.0, cur.1 - 1));
            }
            if cur.1 + 1 < ny {
                nbrs.push((cur.0, cur.1 + 1));
            }
            if nbrs.is_empty() {
                break;
            }
            let forward: Vec<_> = nbrs.iter().copied().filter(|n| Some(*n) != prev).collect();
            let pool = if forward.is_empty() { &nbrs } else { &forward };
            let next = pool[rng.random_range(0..pool.len())];
            len += (self.xs[next.0] - self.xs[cur.0]).abs() + (self.ys[next.1] - self.ys[cur.1]).abs();
            route.push((self.xs[next.0], self.ys[next.1]));
            prev = Some(cur);
            cur = next;
        }
        route
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub n_robots: u32,
    pub width_m: f64,
    pub height_m: f64,
    pub n_aps: usize,
    pub route_length_m: f64,
    /// m/s
    pub speed: f64,
    /// Trajectory sampling interval, seconds.
    pub dt: f64,
    pub devices: u32,
    /// Per-device scan rate, Hz.
    pub scan_hz: f64,
    pub aisle_margin_m: f64,
    pub aisle_spacing_x_m: f64,
    pub aisle_spacing_y_m: f64,
    pub propagation: PropagationParams,
    pub odometry: OdometryNoise,
    /// Frozen shadowing std in dB; 0 disables the field.
    pub frozen_shadowing_sigma: f64,
    pub frozen_shadowing_cell_m: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_robots: 2,
            width_m: 85.0,
            height_m: 60.0,
            n_aps: 30,
            route_length_m: 1500.0,
            speed: 0.4,
            dt: 0.5,
            devices: 5,
            scan_hz: 0.5,
            aisle_margin_m: 5.0,
            aisle_spacing_x_m: 15.0,
            aisle_spacing_y_m: 25.0,
            propagation: PropagationParams::default(),
            odometry: OdometryNoise::default(),
            frozen_shadowing_sigma: 0.0,
            frozen_shadowing_cell_m: 5.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.propagation.validate()?;
        self.odometry.validate()?;
        Extent::new(self.width_m, self.height_m).validate()?;
        if self.n_robots == 0 || self.n_aps == 0 || self.devices == 0 {
            return Err(Error::Config("n_robots, n_aps and devices must be >= 1".into()));
        }
        for (name, v) in [
            ("route_length_m", self.route_length_m),
            ("speed", self.speed),
            ("dt", self.dt),
            ("scan_hz", self.scan_hz),
            ("frozen_shadowing_cell_m", self.frozen_shadowing_cell_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.frozen_shadowing_sigma >= 0.0) {
            return Err(Error::Config("frozen_shadowing_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Everything simulated for one robot; all sequences share `times`.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotTrack {
    pub robot: u32,
    pub times: Vec<f64>,
    pub ground_truth: Vec<Pose2<f64>>,
    /// Per-step odometry increments; element 0 is the identity.
    pub increments: Vec<Pose2<f64>>,
    pub scans: Vec<RawScan<f64>>,
}

impl RobotTrack {
    /// Dead-reckoned trajectory started from the true first pose.
    pub fn odometry_poses(&self) -> Vec<Pose2<f64>> {
        compose_increments(self.ground_truth[0], &self.increments)
    }

    pub fn path_length(&self) -> f64 {
        self.ground_truth.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub world: World,
    pub robots: Vec<RobotTrack>,
}

/// Simulates one robot on an existing world.
pub fn simulate_robot(world: &World, cfg: &SimConfig, robot: u32) -> Result<RobotTrack> {
    let extent = world.extent;
    let lattice = Lattice::for_extent(
        &extent,
        cfg.aisle_margin_m,
        cfg.aisle_spacing_x_m,
        cfg.aisle_spacing_y_m,
    )?;
    let mut route_rng = rng_for(cfg.seed, TAG_ROUTE, robot as u64);
    let route = lattice.random_route(cfg.route_length_m, &mut route_rng);
    let gt = simulate_trajectory(&route, cfg.speed, cfg.dt)?;
    let times: Vec<f64> = (0..gt.len()).map(|k| k as f64 * cfg.dt).collect();
    let increments = simulate_odometry(&gt, &cfg.odometry, mix_seed(cfg.seed, 1000 + robot as u64))?;

    let period = 1.0 / cfg.scan_hz;
    let t_end = *times.last().expect("trajectory has samples");
    let mut events = Vec::new();
    for device in 0..cfg.devices {
        // stagger devices on the trajectory grid
        let offset = (device as f64 * cfg.dt) % period;
        let mut m = 0usize;
        loop {
            let t = offset + m as f64 * period;
            if t > t_end {
                break;
            }
            events.push((t, device));
            m += 1;
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut rng = rng_for(cfg.seed, TAG_SCAN, robot as u64);
    let scans = events
        .into_iter()
        .map(|(t, device)| {
            let pose = interpolate_pose(&times, &gt, t).expect("scan time within trajectory");
            RawScan {
                robot,
                device,
                timestamp: t,
                observations: scan_observations(&pose, world, &cfg.propagation, &mut rng),
            }
        })
        .collect();
    Ok(RobotTrack {
        robot,
        times,
        ground_truth: gt,
        increments,
        scans,
    })
}

/// World plus every robot's track, deterministic in `cfg.seed`.
pub fn simulate_dataset(cfg: &SimConfig) -> Result<Dataset> {
    cfg.validate()?;
    let extent = Extent::new(cfg.width_m, cfg.height_m);
    let mut world = generate_world(extent, cfg.n_aps, cfg.seed)?;
    if cfg.frozen_shadowing_sigma > 0.0 {
        world = world.with_shadowing(cfg.frozen_shadowing_sigma, cfg.frozen_shadowing_cell_m, cfg.seed)?;
    }
    let robots = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.n_robots)
            .map(|k| {
                let world = &world;
                scope.spawn(move || simulate_robot(world, cfg, k))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("robot simulation panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(Dataset { world, robots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn world_is_seeded() {
        let e = Extent::new(85.0, 60.0);
        let a = generate_world(e, 30, 7).unwrap();
        assert_eq!(a, generate_world(e, 30, 7).unwrap());
        assert_ne!(a, generate_world(e, 30, 8).unwrap());
        let one = generate_world(e, 1, 3).unwrap();
        assert_eq!(one.aps.len(), 1);
        assert!(e.contains(one.aps[0].x, one.aps[0].y));
        assert!(a.aps.iter().all(|ap| (-45.0..=-30.0).contains(&ap.tx_power_dbm)));
        assert!(generate_world(Extent::new(0.0, 5.0), 3, 1).is_err());
        assert!(generate_world(e, 0, 1).is_err());
    }

    #[test]
    fn trajectory_kinematics() {
        let p = simulate_trajectory(&[(0.0, 0.0), (4.0, 0.0)], 0.4, 5.0).unwrap();
        let xs: Vec<f64> = p.iter().map(|q| q.x).collect();
        assert_eq!(xs, vec![0.0, 2.0, 4.0]);
        let up = simulate_trajectory(&[(0.0, 0.0), (0.0, 0.0), (0.0, 9.0)], 1.0, 1.0).unwrap();
        assert_eq!(up[0].theta, FRAC_PI_2);
        assert_eq!(up.len(), 10);
        let sq = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0), (0.0, 0.0)];
        let p = simulate_trajectory(&sq, 0.4, 0.5).unwrap();
        let (a, b) = (p[0], *p.last().unwrap());
        assert!(a.distance(&b) <= 0.2 + 1e-12);
        assert!(simulate_trajectory(&[(1.0, 1.0), (1.0, 1.0)], 1.0, 1.0).is_err());
        assert!(simulate_trajectory(&sq, 0.0, 1.0).is_err());
    }

    #[test]
    fn zero_noise_odometry_is_exact() {
        let sq = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0), (0.0, 0.0)];
        let gt = simulate_trajectory(&sq, 0.4, 0.5).unwrap();
        let inc = simulate_odometry(&gt, &OdometryNoise::ZERO, 3).unwrap();
        let odo = compose_increments(gt[0], &inc);
        for (a, b) in odo.iter().zip(&gt) {
            assert!(a.distance(b) < 1e-12);
        }
        let noisy = simulate_odometry(&gt, &OdometryNoise::default(), 3).unwrap();
        assert_eq!(noisy, simulate_odometry(&gt, &OdometryNoise::default(), 3).unwrap());
        assert_ne!(noisy, inc);
    }

    #[test]
    fn scan_at_ap_detects_it() {
        let world = World {
            extent: Extent::new(10.0, 10.0),
            aps: vec![AccessPoint {
                id: "ap".into(),
                x: 5.0,
                y: 5.0,
                tx_power_dbm: -40.0,
            }],
            shadowing: None,
        };
        let prop = PropagationParams {
            miss_prob: 0.0,
            shadowing_sigma: 0.0,
            ..Default::default()
        };
        let scans = simulate_scan(&Pose2::new(5.0, 5.0, 0.0), &world, &prop, 5, 4, 1).unwrap();
        assert_eq!(scans.len(), 20);
        assert!(scans
            .iter()
            .all(|s| s.observations.len() == 1 && s.observations[0].rss == -40.0));
        let drop = PropagationParams {
            miss_prob: 1.0 - 1e-12,
            ..prop
        };
        let scans = simulate_scan(&Pose2::new(5.0, 5.0, 0.0), &world, &drop, 5, 4, 1).unwrap();
        assert!(scans.iter().all(|s| s.observations.is_empty()));
    }

    #[test]
    fn detection_tail_is_rare() {
        let prop = PropagationParams {
            miss_prob: 0.0,
            ..Default::default()
        };
        // mean rss = floor - 5 sigma = -110 dBm
        let tx = -40.0;
        let d = 10f64.powf((tx + 110.0) / 25.0);
        assert!((path_loss_rss(tx, d, &prop) + 110.0).abs() < 1e-9);
        let world = World {
            extent: Extent::new(1000.0, 10.0),
            aps: vec![AccessPoint {
                id: "ap".into(),
                x: 0.0,
                y: 5.0,
                tx_power_dbm: tx,
            }],
            shadowing: None,
        };
        let scans = simulate_scan(&Pose2::new(d, 5.0, 0.0), &world, &prop, 1, 10_000, 9).unwrap();
        let hits = scans.iter().filter(|s| !s.observations.is_empty()).count();
        assert!(hits < 100, "{hits} detections");
    }

    #[test]
    fn rss_decreases_with_distance() {
        let prop = PropagationParams::default();
        let mut last = path_loss_rss(-40.0, 1.0, &prop);
        for k in 1..100 {
            let v = path_loss_rss(-40.0, 1.0 + k as f64 * 0.7, &prop);
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn interpolation() {
        let times = [0.0, 1.0];
        let poses = [Pose2::new(0.0, 0.0, 3.0), Pose2::new(2.0, 0.0, -3.0)];
        assert_eq!(interpolate_pose(&times, &poses, 1.0), Some(poses[1]));
        let mid = interpolate_pose(&times, &poses, 0.5).unwrap();
        assert_eq!(mid.x, 1.0);
        // shortest arc through pi
        assert!((mid.theta.abs() - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(interpolate_pose(&times, &poses, 1.5), None);
    }

    #[test]
    fn shadowing_grid_interpolates_nodes() {
        let world = generate_world(Extent::new(20.0, 10.0), 2, 4).unwrap();
        let world = world.with_shadowing(3.0, 5.0, 4).unwrap();
        world.validate().unwrap();
        let g = world.shadowing.as_ref().unwrap();
        assert_eq!((g.nx, g.ny), (5, 3));
        let v = g.offset(&world.extent, 1, 10.0, 5.0);
        assert!((v - g.values[1][g.nx + 2]).abs() < 1e-12);
    }

    #[test]
    fn dataset_is_deterministic() {
        let cfg = SimConfig {
            route_length_m: 120.0,
            n_aps: 8,
            ..Default::default()
        };
        let a = simulate_dataset(&cfg).unwrap();
        assert_eq!(a, simulate_dataset(&cfg).unwrap());
        assert_eq!(a.robots.len(), 2);
        assert!(a.robots[0].path_length() >= 115.0);
        let r = &a.robots[0];
        assert!(r.scans.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        assert_eq!(r.times.len(), r.ground_truth.len());
        assert_eq!(r.increments.len(), r.ground_truth.len());
        let one = simulate_dataset(&SimConfig { n_robots: 1, ..cfg }).unwrap();
        assert_eq!(one.robots.len(), 1);
    }
}
