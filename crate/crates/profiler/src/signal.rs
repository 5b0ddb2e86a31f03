//! Hardware identities and the channel model that turns them into
//! signatures.
//!
//! Receiver array at the origin, broadside along +x. Per device:
//! - frequency offset = carrier · cfo_ppm · 1e-6;
//! - arrival angle = atan2(y, x);
//! - one reflected ray with relative gain ρ, phase φ and excess delay τ, so
//!   the channel factor is m = 1 + ρ·e^{jφ};
//! - attenuation = L₀ + 10·n·log10(d) − 20·log10(|m|·(1 + g)) dB, with
//!   g the IQ gain imbalance and n the path-loss exponent;
//! - phase shift = arg(m) + IQ phase skew;
//! - CSI magnitude on subcarrier k = (1 + g)·|1 + ρ·e^{j(φ − 2π·f_k·τ)}|.
//!
//! Gaussian measurement noise is added to every quantity.

use std::f64::consts::{FRAC_PI_2, PI};

use camolab_core::rng::{derive_index, derive_seed, rng_from};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const CARRIER_HZ: f64 = 2.437e9;
pub const PATH_LOSS_EXPONENT: f64 = 2.5;
/// Attenuation at 1 m, dB.
pub const REFERENCE_LOSS_DB: f64 = 40.0;
pub const CSI_POINTS: usize = 30;
/// Spacing of the reported subcarrier groups, Hz.
pub const SUBCARRIER_SPACING_HZ: f64 = 625e3;

/// Static imperfections and placement of one transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareIdentity {
    pub device_id: u32,
    pub cfo_ppm: f64,
    pub iq_gain_imbalance: f64,
    pub iq_phase_skew_rad: f64,
    /// Metres from the receiver; x > 0.
    pub location: (f64, f64),
    pub reflection_gain: f64,
    pub reflection_phase_rad: f64,
    pub excess_delay_s: f64,
}

impl HardwareIdentity {
    /// Draws a plausible device: CFO within ±20 ppm, a few percent IQ
    /// imbalance, 1–10 m in front of the receiver.
    pub fn draw<R: Rng + ?Sized>(device_id: u32, rng: &mut R) -> Self {
        HardwareIdentity {
            device_id,
            cfo_ppm: rng.random_range(-20.0..20.0),
            iq_gain_imbalance: rng.random_range(-0.05..0.05),
            iq_phase_skew_rad: rng.random_range(-0.1..0.1),
            location: (rng.random_range(1.0..10.0), rng.random_range(-5.0..5.0)),
            reflection_gain: rng.random_range(0.1..0.6),
            reflection_phase_rad: rng.random_range(-PI..PI),
            excess_delay_s: rng.random_range(20e-9..200e-9),
        }
    }

    /// `n` devices with ids `0..n`, fixed by `seed`.
    pub fn population(n: usize, seed: u64) -> Vec<Self> {
        let mut rng = rng_from(derive_seed(seed, "identities"));
        (0..n).map(|i| HardwareIdentity::draw(i as u32, &mut rng)).collect()
    }

    pub fn distance(&self) -> f64 {
        self.location.0.hypot(self.location.1)
    }

    fn validate(&self) -> bool {
        let (x, y) = self.location;
        x > 0.0
            && self.distance() >= 1.0
            && [self.cfo_ppm, self.iq_gain_imbalance, self.iq_phase_skew_rad, y, self.reflection_phase_rad, self.excess_delay_s]
                .iter()
                .all(|v| v.is_finite())
            && (0.0..1.0).contains(&self.reflection_gain)
            && self.iq_gain_imbalance > -1.0
    }
}

/// Measurement noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevels {
    pub frequency_hz: f64,
    pub angle_rad: f64,
    pub amplitude_db: f64,
    pub phase_rad: f64,
    pub csi: f64,
}

impl NoiseLevels {
    pub fn zero() -> Self {
        NoiseLevels { frequency_hz: 0.0, angle_rad: 0.0, amplitude_db: 0.0, phase_rad: 0.0, csi: 0.0 }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        NoiseLevels {
            frequency_hz: self.frequency_hz * factor,
            angle_rad: self.angle_rad * factor,
            amplitude_db: self.amplitude_db * factor,
            phase_rad: self.phase_rad * factor,
            csi: self.csi * factor,
        }
    }

    fn validate(&self) -> bool {
        [self.frequency_hz, self.angle_rad, self.amplitude_db, self.phase_rad, self.csi]
            .iter()
            .all(|s| s.is_finite() && *s >= 0.0)
    }
}

impl Default for NoiseLevels {
    fn default() -> Self {
        NoiseLevels { frequency_hz: 3750.0, angle_rad: 0.075, amplitude_db: 1.25, phase_rad: 0.125, csi: 0.075 }
    }
}

/// One radio-level observation of a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfSignature {
    pub amplitude_attenuation: f64,
    pub phase_shift: f64,
    pub frequency_offset: f64,
    pub arrival_angle: f64,
    pub csi: Vec<f64>,
}

/// Number of profiled (non-CSI) features.
pub const PROFILED_FEATURES: usize = 4;

impl RfSignature {
    /// Profiled features followed by CSI.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(PROFILED_FEATURES + self.csi.len());
        v.extend(self.profiled());
        v.extend(&self.csi);
        v
    }

    pub fn profiled(&self) -> [f64; PROFILED_FEATURES] {
        [self.amplitude_attenuation, self.phase_shift, self.frequency_offset, self.arrival_angle]
    }

    /// Bytes of every field in order, for stream hashing.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_vec().iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

fn wrap_phase(p: f64) -> f64 {
    let w = (p + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI { PI } else { w }
}

fn gauss<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    }
}

/// Signature of `id` under `noise`; pure in `(id, noise, noise_seed)`.
pub fn synthesize_signature(id: &HardwareIdentity, noise: &NoiseLevels, noise_seed: u64) -> crate::Result<RfSignature> {
    if !id.validate() {
        return Err(crate::ProfilerError::Validation(format!("device {} has an invalid identity", id.device_id)));
    }
    if !noise.validate() {
        return Err(crate::ProfilerError::Validation("noise levels must be finite and non-negative".into()));
    }
    let mut rng = rng_from(derive_index(noise_seed, id.device_id as u64));
    let (x, y) = id.location;
    let (rho, phi) = (id.reflection_gain, id.reflection_phase_rad);
    let (m_re, m_im) = (1.0 + rho * phi.cos(), rho * phi.sin());
    let m_abs = m_re.hypot(m_im);
    let gain = 1.0 + id.iq_gain_imbalance;

    let frequency_offset = CARRIER_HZ * id.cfo_ppm * 1e-6 + gauss(noise.frequency_hz, &mut rng);
    let angle = y.atan2(x) + gauss(noise.angle_rad, &mut rng);
    let arrival_angle = angle.clamp(-FRAC_PI_2 + f64::EPSILON, FRAC_PI_2);
    let amplitude_attenuation = (REFERENCE_LOSS_DB + 10.0 * PATH_LOSS_EXPONENT * id.distance().log10()
        - 20.0 * (m_abs * gain).log10()
        + gauss(noise.amplitude_db, &mut rng))
    .max(f64::MIN_POSITIVE);
    let phase_shift = wrap_phase(m_im.atan2(m_re) + id.iq_phase_skew_rad + gauss(noise.phase_rad, &mut rng));
    let csi = (0..CSI_POINTS)
        .map(|k| {
            let f = (k as f64 - (CSI_POINTS as f64 - 1.0) / 2.0) * SUBCARRIER_SPACING_HZ;
            let theta = phi - 2.0 * PI * f * id.excess_delay_s;
            let mag = gain * (1.0 + rho * theta.cos()).hypot(rho * theta.sin());
            mag + gauss(noise.csi, &mut rng)
        })
        .collect();
    Ok(RfSignature { amplitude_attenuation, phase_shift, frequency_offset, arrival_angle, csi })
}

/// `per_device` signatures for every identity; signature `k` of a device
/// uses noise seed `derive_index(seed, k)`.
pub fn signature_stream(ids: &[HardwareIdentity], noise: &NoiseLevels, per_device: usize, seed: u64) -> crate::Result<Vec<(u32, RfSignature)>> {
    let mut out = Vec::with_capacity(ids.len() * per_device);
    for id in ids {
        for k in 0..per_device {
            out.push((id.device_id, synthesize_signature(id, noise, derive_index(seed, k as u64))?));
        }
    }
    Ok(out)
}
