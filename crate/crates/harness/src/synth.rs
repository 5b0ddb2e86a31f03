//! Schema-compatible synthetic stand-in for a real IoT trace corpus.
//!
//! The default pool has 24 columns: remote-service features (request
//! interval, volume, service type one-hot, domain-name hash bucket,
//! active/sleep cycle) and packet/flow features (ports, packet size and
//! inter-arrival statistics, protocol and cipher one-hots, bandwidth, flow
//! length). Payload-semantic columns (service type, domain, protocol, cipher)
//! are immutable.
//!
//! Classes are laid out as follows, in range-normalised units:
//! - device type (camera, hub, switch, health) fixes volume, bandwidth and
//!   mean packet size at type levels. Camera and switch sit 0.35 apart in
//!   volume, beyond the default perturbation budget; the pairs camera/hub,
//!   camera/health, hub/health and switch/health are within 0.18 on every
//!   coordinate;
//! - within a type, the class index j picks one of seven immutable
//!   service/protocol/cipher combinations and a point on a sphere over five
//!   timing/size columns. Both are shared by the j-th class of every type, so
//!   compatible types differ only in the type columns. The sphere points come
//!   from farthest-point sampling; within a type every class is an extreme
//!   point, and across types the type levels are, which keeps every class
//!   linearly separable one-vs-rest;
//! - local port, flow length, packets per flow and DNS rate are
//!   class-independent noise.

use std::sync::Arc;

use camolab_core::rng::{derive_seed, rng_from};
use camolab_core::{ClassSet, Dataset, DeviceClass, FeatureSchema, FeatureSpec};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

/// The four coarse device types, in report order.
pub const DEVICE_TYPES: [&str; 4] = ["camera", "hub", "switch", "health"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `spread` is the standard deviation.
    Normal,
    /// `spread` is the half-width.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureDist {
    pub family: Family,
    pub mean: f64,
    pub spread: f64,
}

impl FeatureDist {
    pub fn normal(mean: f64, spread: f64) -> Self {
        FeatureDist { family: Family::Normal, mean, spread }
    }

    pub fn uniform(mean: f64, half_width: f64) -> Self {
        FeatureDist { family: Family::Uniform, mean, spread: half_width }
    }

    pub fn constant(value: f64) -> Self {
        FeatureDist { family: Family::Normal, mean: value, spread: 0.0 }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.spread == 0.0 {
            return self.mean;
        }
        match self.family {
            Family::Normal => Normal::new(self.mean, self.spread).expect("finite spread").sample(rng),
            Family::Uniform => rng.random_range(self.mean - self.spread..=self.mean + self.spread),
        }
    }
}

/// Per-class generative parameters, one distribution per schema feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProfile {
    pub label: String,
    /// Coarse device type, one of [`DEVICE_TYPES`].
    pub group: String,
    pub features: Vec<FeatureDist>,
}

struct Column {
    name: &'static str,
    unit: &'static str,
    min: f64,
    max: f64,
    mutable: bool,
}

const fn col(name: &'static str, unit: &'static str, min: f64, max: f64, mutable: bool) -> Column {
    Column { name, unit, min, max, mutable }
}

const POOL: [Column; 24] = [
    col("svc_request_interval", "s", 0.0, 600.0, true),
    col("svc_volume", "KB/min", 0.0, 2000.0, true),
    col("svc_type_ntp", "onehot", 0.0, 1.0, false),
    col("svc_type_dns", "onehot", 0.0, 1.0, false),
    col("svc_type_storage", "onehot", 0.0, 1.0, false),
    col("svc_type_cloud_api", "onehot", 0.0, 1.0, false),
    col("domain_bucket", "bucket", 0.0, 15.0, false),
    col("active_sleep_cycle", "s", 0.0, 3600.0, true),
    col("local_port", "port", 0.0, 65535.0, true),
    col("remote_port", "port", 0.0, 65535.0, true),
    col("pkt_size_mean", "B", 40.0, 1500.0, true),
    col("pkt_size_std", "B", 0.0, 700.0, true),
    col("pkt_interval_mean", "ms", 0.0, 2000.0, true),
    col("pkt_interval_std", "ms", 0.0, 1000.0, true),
    col("proto_tcp", "onehot", 0.0, 1.0, false),
    col("proto_udp", "onehot", 0.0, 1.0, false),
    col("proto_other", "onehot", 0.0, 1.0, false),
    col("cipher_none", "onehot", 0.0, 1.0, false),
    col("cipher_tls12", "onehot", 0.0, 1.0, false),
    col("cipher_tls13", "onehot", 0.0, 1.0, false),
    col("bandwidth", "kbps", 0.0, 8000.0, true),
    col("flow_duration", "s", 0.0, 600.0, true),
    col("pkts_per_flow", "count", 0.0, 5000.0, true),
    col("dns_query_rate", "q/min", 0.0, 60.0, true),
];

/// Pool columns the default black-box identifier does not use.
const HIDDEN_FROM_TARGET: [&str; 4] = ["local_port", "domain_bucket", "pkts_per_flow", "dns_query_rate"];

/// The attacker's default feature pool.
pub fn default_pool_schema() -> FeatureSchema {
    FeatureSchema::new(POOL.iter().map(|c| FeatureSpec::new(c.name, c.unit, c.min, c.max, c.mutable)).collect())
        .expect("default pool is valid")
}

/// Names of the pool features the default target identifier sees.
pub fn default_target_features() -> Vec<String> {
    POOL.iter().map(|c| c.name).filter(|n| !HIDDEN_FROM_TARGET.contains(n)).map(String::from).collect()
}

/// Type levels in normalised units for (volume, bandwidth, packet size mean).
fn type_levels(group: usize) -> [f64; 3] {
    match group {
        0 => [0.72, 0.50, 0.50], // camera
        1 => [0.62, 0.65, 0.50], // hub
        2 => [0.37, 0.50, 0.50], // switch
        _ => [0.55, 0.50, 0.65], // health
    }
}

const SERVICE_PORTS: [f64; 7] = [123.0, 53.0, 443.0, 8883.0, 1883.0, 5683.0, 8443.0];

/// Device type of class `c` among `n` classes: contiguous blocks.
pub fn device_type_of(c: usize, n: usize) -> usize {
    c * DEVICE_TYPES.len() / n
}

/// Knobs of the default profile family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    /// Per-class standard deviation of informative columns, normalised units.
    pub spread: f64,
    /// Radius of the per-class sphere layout, normalised units.
    pub sphere_radius: f64,
    /// Half-width of the per-class jitter around type levels.
    pub type_jitter: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams { spread: 0.025, sphere_radius: 0.10, type_jitter: 0.02 }
    }
}

/// `n` points on the unit sphere in `dim` dimensions, greedily spread by
/// farthest-point selection from seeded candidates.
fn sphere_layout(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let candidates: Vec<Vec<f64>> = (0..(n * 60).max(200))
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut chosen = vec![0usize];
    let mut nearest: Vec<f64> = candidates.iter().map(|c| dist(c, &candidates[0])).collect();
    while chosen.len() < n {
        let next = (0..candidates.len())
            .max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(b.cmp(&a)))
            .expect("candidates");
        chosen.push(next);
        for (i, c) in candidates.iter().enumerate() {
            nearest[i] = nearest[i].min(dist(c, &candidates[next]));
        }
    }
    chosen.into_iter().map(|i| candidates[i].clone()).collect()
}

/// The default family of `n_classes` profiles over [`default_pool_schema`].
/// `spread_scale` multiplies every spread (0 gives constant classes).
pub fn default_profiles(n_classes: usize, params: &ProfileParams, spread_scale: f64, seed: u64) -> Result<Vec<SyntheticProfile>> {
    if n_classes < 2 {
        return Err(HarnessError::Validation("need at least two classes".into()));
    }
    let schema = default_pool_schema();
    let idx = |name: &str| schema.index_of(name).expect("pool column");
    let sphere_cols = ["svc_request_interval", "active_sleep_cycle", "pkt_size_std", "pkt_interval_mean", "pkt_interval_std"];
    let type_cols = ["svc_volume", "bandwidth", "pkt_size_mean"];
    let widest_type = (0..DEVICE_TYPES.len()).map(|t| (0..n_classes).filter(|&c| device_type_of(c, n_classes) == t).count()).max();
    let layout = sphere_layout(widest_type.unwrap_or(1), sphere_cols.len(), derive_seed(seed, "sphere"));
    let mut rng = rng_from(derive_seed(seed, "jitter"));
    let mut per_type = [0usize; 4];
    let mut profiles = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let group = device_type_of(c, n_classes);
        let j = per_type[group];
        per_type[group] += 1;
        let point = &layout[j];
        // Normalised (mean, spread, family) per column, filled below.
        let mut norm: Vec<(f64, f64, Family)> = vec![(0.0, 0.0, Family::Normal); schema.len()];
        let levels = type_levels(group);
        for (k, name) in type_cols.iter().enumerate() {
            let jitter = rng.random_range(-params.type_jitter..=params.type_jitter);
            norm[idx(name)] = (levels[k] + jitter, params.spread, Family::Normal);
        }
        for (k, name) in sphere_cols.iter().enumerate() {
            norm[idx(name)] = (0.5 + params.sphere_radius * point[k], params.spread, Family::Normal);
        }
        let combo = j % 7;
        let svc = combo % 4;
        let proto = combo % 3;
        let cipher = (combo / 3) % 3;
        for (k, name) in ["svc_type_ntp", "svc_type_dns", "svc_type_storage", "svc_type_cloud_api"].iter().enumerate() {
            norm[idx(name)] = (if k == svc { 1.0 } else { 0.0 }, 0.0, Family::Normal);
        }
        for (k, name) in ["proto_tcp", "proto_udp", "proto_other"].iter().enumerate() {
            norm[idx(name)] = (if k == proto { 1.0 } else { 0.0 }, 0.0, Family::Normal);
        }
        for (k, name) in ["cipher_none", "cipher_tls12", "cipher_tls13"].iter().enumerate() {
            norm[idx(name)] = (if k == cipher { 1.0 } else { 0.0 }, 0.0, Family::Normal);
        }
        norm[idx("domain_bucket")] = ((2 * combo + 1) as f64 / 15.0, 0.0, Family::Normal);
        norm[idx("remote_port")] = (SERVICE_PORTS[combo] / 65535.0, 0.0, Family::Normal);
        // Class-independent noise columns.
        norm[idx("local_port")] = (57343.5 / 65535.0, 8191.5 / 65535.0, Family::Uniform);
        norm[idx("flow_duration")] = (0.3, 0.04, Family::Normal);
        norm[idx("pkts_per_flow")] = (0.2, 0.04, Family::Normal);
        norm[idx("dns_query_rate")] = (0.25, 0.04, Family::Normal);

        let features = norm
            .iter()
            .zip(schema.features())
            .map(|(&(m, s, family), f)| FeatureDist {
                family,
                mean: f.min + m * f.range(),
                spread: s * spread_scale * f.range(),
            })
            .collect();
        profiles.push(SyntheticProfile {
            label: format!("{}-{}", DEVICE_TYPES[group], j + 1),
            group: DEVICE_TYPES[group].to_string(),
            features,
        });
    }
    Ok(profiles)
}

/// Pairs of profiles that violate the separability rule (mean distance
/// greater than twice the larger spread on at least one feature).
pub fn inseparable_pairs(profiles: &[SyntheticProfile]) -> Vec<(usize, usize)> {
    let mut bad = Vec::new();
    for a in 0..profiles.len() {
        for b in a + 1..profiles.len() {
            let separated = profiles[a].features.iter().zip(&profiles[b].features).any(|(p, q)| {
                (p.mean - q.mean).abs() > 2.0 * p.spread.max(q.spread)
            });
            if !separated {
                bad.push((a, b));
            }
        }
    }
    bad
}

/// Draws `rows_per_class` clamped rows per profile.
pub fn generate_dataset(
    schema: &Arc<FeatureSchema>,
    profiles: &[SyntheticProfile],
    rows_per_class: usize,
    seed: u64,
) -> Result<Dataset> {
    if profiles.len() < 2 {
        return Err(HarnessError::Validation("need at least two profiles".into()));
    }
    if let Some(p) = profiles.iter().find(|p| p.features.len() != schema.len()) {
        return Err(HarnessError::Validation(format!(
            "profile `{}` has {} features, schema has {}",
            p.label,
            p.features.len(),
            schema.len()
        )));
    }
    for (a, b) in inseparable_pairs(profiles) {
        log::warn!("profiles `{}` and `{}` are not separable at their spread", profiles[a].label, profiles[b].label);
    }
    let classes = Arc::new(ClassSet::new(profiles.iter().map(|p| p.label.clone()).collect())?);
    let k = schema.len();
    let mut values = Vec::with_capacity(profiles.len() * rows_per_class * k);
    let mut labels = Vec::with_capacity(profiles.len() * rows_per_class);
    for (c, profile) in profiles.iter().enumerate() {
        let mut rng = rng_from(derive_seed(seed, &format!("rows/{c}")));
        for _ in 0..rows_per_class {
            for (d, f) in profile.features.iter().zip(schema.features()) {
                values.push(d.sample(&mut rng).clamp(f.min, f.max));
            }
            labels.push(DeviceClass(c));
        }
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, k), values).expect("shape");
    Ok(Dataset::new(schema.clone(), classes, features, labels)?)
}

/// Class-id map onto the four device types, plus the coarse class set.
pub fn coarse_mapping(profiles: &[SyntheticProfile]) -> Result<(Vec<usize>, ClassSet)> {
    let map = profiles
        .iter()
        .map(|p| {
            DEVICE_TYPES
                .iter()
                .position(|t| *t == p.group)
                .ok_or_else(|| HarnessError::Validation(format!("unknown device type `{}`", p.group)))
        })
        .collect::<Result<Vec<_>>>()?;
    let classes = ClassSet::new(DEVICE_TYPES.iter().map(|s| s.to_string()).collect())?;
    Ok((map, classes))
}
