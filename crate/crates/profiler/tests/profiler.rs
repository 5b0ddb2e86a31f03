use camolab_core::DeviceClass;
use camolab_profiler::classifier::MIN_SIGNATURES_PER_CLASS;
use camolab_profiler::signal::{signature_stream, CARRIER_HZ};
use camolab_profiler::store::{read_signatures, write_signatures, SignatureRecord};
use camolab_profiler::{fit_profiler, synthesize_signature, HardwareIdentity, NoiseLevels, ProfilerConfig, ProfilerError, RfSignature};

fn labeled(ids: &[HardwareIdentity], noise: &NoiseLevels, per: usize, seed: u64) -> Vec<(RfSignature, DeviceClass)> {
    signature_stream(ids, noise, per, seed)
        .unwrap()
        .into_iter()
        .map(|(id, s)| (s, DeviceClass(id as usize)))
        .collect()
}

fn twin(cfo: f64, id: u32) -> HardwareIdentity {
    HardwareIdentity {
        device_id: id,
        cfo_ppm: cfo,
        iq_gain_imbalance: 0.0,
        iq_phase_skew_rad: 0.0,
        location: (3.0, 0.0),
        reflection_gain: 0.3,
        reflection_phase_rad: 0.5,
        excess_delay_s: 50e-9,
    }
}

#[test]
fn opposite_cfo_devices_split_at_the_router() {
    let ids = [twin(-20.0, 0), twin(20.0, 1)];
    let train = labeled(&ids, &NoiseLevels::zero(), 12, 1);
    let c = fit_profiler(&train, 2, &ProfilerConfig::default(), 5).unwrap();
    // Brute force: the only profiled feature that differs is the offset,
    // at -20 and +20 ppm of the carrier.
    let offsets: Vec<f64> = train.iter().map(|(s, _)| s.frequency_offset).collect();
    assert!(offsets.iter().any(|&f| (f + 20e-6 * CARRIER_HZ).abs() < 1e-6));
    assert!(offsets.iter().any(|&f| (f - 20e-6 * CARRIER_HZ).abs() < 1e-6));
    assert_eq!(c.groups().len(), 2);
    assert!(c.groups().iter().all(|g| g.len() == 1));
    let r0 = c.route(&train[0].0);
    let r1 = c.route(&train[12].0);
    assert_ne!(r0, r1);
    for (s, class) in &train {
        let (got, score) = c.identify(s).unwrap();
        assert_eq!(got, *class);
        assert!(score > 0.0 && score < 1.0);
    }
}

#[test]
fn zero_noise_signatures_identify_their_own_device() {
    let ids = HardwareIdentity::population(8, 3);
    let train = labeled(&ids, &NoiseLevels::zero(), MIN_SIGNATURES_PER_CLASS, 2);
    let c = fit_profiler(&train, 8, &ProfilerConfig::default(), 1).unwrap();
    for id in &ids {
        let s = synthesize_signature(id, &NoiseLevels::zero(), 99).unwrap();
        assert_eq!(c.identify(&s).unwrap().0, DeviceClass(id.device_id as usize));
    }
}

#[test]
fn held_out_accuracy_on_28_devices() {
    let ids = HardwareIdentity::population(28, 42);
    let noise = NoiseLevels::default();
    let train = labeled(&ids, &noise, 40, 10);
    let test = labeled(&ids, &noise, 20, 11);
    let c = fit_profiler(&train, 28, &ProfilerConfig::default(), 42).unwrap();
    let rate = c.identification_rate(&test).unwrap();
    eprintln!("profiler held-out rate {rate:.4}");
    assert!(rate >= 0.95, "rate {rate}");
}

#[test]
fn groups_partition_classes_and_routing_is_deterministic() {
    let ids = HardwareIdentity::population(12, 8);
    let noise = NoiseLevels::default();
    let train = labeled(&ids, &noise, 20, 4);
    let a = fit_profiler(&train, 12, &ProfilerConfig::default(), 6).unwrap();
    let b = fit_profiler(&train, 12, &ProfilerConfig::default(), 6).unwrap();
    assert_eq!(a, b);
    let mut seen: Vec<usize> = a.groups().iter().flatten().copied().collect();
    seen.sort_unstable();
    assert_eq!(seen, (0..12).collect::<Vec<_>>());
    let probe = labeled(&ids, &noise, 5, 77);
    for (s, _) in &probe {
        let g = a.route(s);
        assert!(g < a.groups().len());
        assert_eq!(g, b.route(s));
        assert_eq!(a.identify(s).unwrap(), b.identify(s).unwrap());
    }
}

#[test]
fn too_few_signatures_per_class_is_rejected() {
    let ids = HardwareIdentity::population(3, 1);
    let mut train = labeled(&ids, &NoiseLevels::default(), MIN_SIGNATURES_PER_CLASS, 2);
    train.pop();
    let err = fit_profiler(&train, 3, &ProfilerConfig::default(), 0).unwrap_err();
    assert!(matches!(err, ProfilerError::Validation(_)), "{err:?}");
}

#[test]
fn signature_csv_round_trips_bit_exact() {
    let ids = HardwareIdentity::population(3, 9);
    let records: Vec<SignatureRecord> = signature_stream(&ids, &NoiseLevels::default(), 4, 3)
        .unwrap()
        .into_iter()
        .map(|(device_id, signature)| SignatureRecord { device_id, class: format!("dev-{device_id}"), signature })
        .collect();
    let mut buf = Vec::new();
    write_signatures(&mut buf, &["seed=3".to_string()], &records).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let header = text.lines().nth(1).unwrap();
    assert!(header.starts_with("device_id,class,amplitude_attenuation,phase_shift,frequency_offset,arrival_angle,csi_0,"));
    assert!(header.ends_with(",csi_29"));
    let back = read_signatures(&buf[..]).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in back.iter().zip(&records) {
        assert_eq!(a.signature.to_bytes(), b.signature.to_bytes());
        assert_eq!(a.class, b.class);
    }
}

#[test]
fn signature_csv_reports_bad_lines() {
    let csv = "device_id,class,amplitude_attenuation,phase_shift,frequency_offset,arrival_angle,csi_0\n1,a,1,2,3,4,5\n2,b,1,x,3,4,5\n";
    match read_signatures(csv.as_bytes()).unwrap_err() {
        ProfilerError::Parse { line, .. } => assert_eq!(line, 3),
        e => panic!("{e:?}"),
    }
}
