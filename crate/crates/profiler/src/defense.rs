//! The defense under attack: traffic is manipulated by the generator while
//! signatures keep coming from the unchanged hardware.

use camolab_attack::camouflage::{evaluate_attack, AttackMode, Generator};
use camolab_attack::Victim;
use camolab_core::rng::derive_seed;
use camolab_core::{Dataset, DeviceClass};
use sha2::{Digest, Sha256};

use crate::classifier::MultiStageClassifier;
use crate::signal::{signature_stream, HardwareIdentity, NoiseLevels, RfSignature};
use crate::Result;

/// Rates at one generator epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct DefensePoint {
    /// 0 is the untrained (identity) generator.
    pub epoch: usize,
    pub profiler_clean: f64,
    pub profiler_attacked: f64,
    /// Traffic identifier under the same attack, for contrast.
    pub traffic_attacked: f64,
    /// SHA-256 of the signature stream seen under attack.
    pub attacked_stream_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefenseReport {
    pub clean_stream_hash: String,
    pub points: Vec<DefensePoint>,
}

impl DefenseReport {
    /// True when every attacked stream hashed equal to the clean one.
    pub fn streams_identical(&self) -> bool {
        self.points.iter().all(|p| p.attacked_stream_hash == self.clean_stream_hash)
    }
}

/// What the receiver sees in one world: the traffic it is sent and the
/// radio signatures of the transmitting devices.
struct Observation {
    traffic: ndarray::Array2<f64>,
    signatures: Vec<(u32, RfSignature)>,
}

/// The attacked world. The generator only ever receives traffic; the
/// signatures come from the identities alone.
fn observe(g: &Generator, traffic: &Dataset, ids: &[HardwareIdentity], noise: &NoiseLevels, rounds: usize, seed: u64) -> Result<Observation> {
    let traffic = g.manipulate_with_noise(traffic.features(), derive_seed(seed, "defense-traffic"))?;
    let signatures = signature_stream(ids, noise, rounds, derive_seed(seed, "defense-signatures"))?;
    Ok(Observation { traffic, signatures })
}

fn stream_hash(stream: &[(u32, RfSignature)]) -> String {
    let mut h = Sha256::new();
    for (id, s) in stream {
        h.update(id.to_le_bytes());
        h.update(s.to_bytes());
    }
    hex::encode(h.finalize())
}

fn profiler_rate(c: &MultiStageClassifier, stream: &[(u32, RfSignature)], class_of: &[DeviceClass]) -> Result<f64> {
    let labeled: Vec<(RfSignature, DeviceClass)> =
        stream.iter().map(|(id, s)| (s.clone(), class_of[*id as usize])).collect();
    c.identification_rate(&labeled)
}

/// Identification rates of the profiler, clean and under each generator in
/// `epochs` (index = epoch), next to the traffic victim's rate under the
/// same generator. `class_of[device_id]` is each device's class.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_defense(
    c: &MultiStageClassifier,
    epochs: &[Generator],
    ids: &[HardwareIdentity],
    class_of: &[DeviceClass],
    traffic: &Dataset,
    victim: &dyn Victim,
    noise: &NoiseLevels,
    rounds: usize,
    seed: u64,
) -> Result<DefenseReport> {
    if rounds == 0 || epochs.is_empty() {
        return Err(crate::ProfilerError::Validation("need at least one round and one generator".into()));
    }
    if ids.iter().any(|id| id.device_id as usize >= class_of.len()) {
        return Err(crate::ProfilerError::Validation("device without a class".into()));
    }
    let clean = signature_stream(ids, noise, rounds, derive_seed(seed, "defense-signatures"))?;
    let clean_stream_hash = stream_hash(&clean);
    let profiler_clean = profiler_rate(c, &clean, class_of)?;
    let mut points = Vec::with_capacity(epochs.len());
    for (epoch, g) in epochs.iter().enumerate() {
        let seen = observe(g, traffic, ids, noise, rounds, seed)?;
        let predicted = victim.identify(seen.traffic.view())?;
        let counts = camolab_core::ConfusionCounts::tally(traffic.n_classes(), traffic.labels(), &predicted)?;
        points.push(DefensePoint {
            epoch,
            profiler_clean,
            profiler_attacked: profiler_rate(c, &seen.signatures, class_of)?,
            traffic_attacked: camolab_core::identification_rate(&counts)?,
            attacked_stream_hash: stream_hash(&seen.signatures),
        });
    }
    Ok(DefenseReport { clean_stream_hash, points })
}

/// Identification rate of the traffic victim under one generator.
pub fn traffic_rate(g: &Generator, victim: &dyn Victim, traffic: &Dataset, seed: u64) -> Result<f64> {
    Ok(evaluate_attack(g, victim, traffic, AttackMode::Misidentify, seed)?.rate)
}
