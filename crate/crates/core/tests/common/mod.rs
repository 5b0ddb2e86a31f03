#![allow(dead_code)]

use std::sync::Arc;

use camolab_core::rng::rng_from;
use camolab_core::{ClassSet, Dataset, DeviceClass, FeatureSchema, FeatureSpec};
use ndarray::Array2;
use rand::Rng;
use rand_distr_free::gaussian;

pub fn schema(k: usize) -> Arc<FeatureSchema> {
    Arc::new(
        FeatureSchema::new((0..k).map(|i| FeatureSpec::new(format!("f{i}"), "u", -10.0, 10.0, i % 3 != 2)).collect())
            .unwrap(),
    )
}

pub fn classes(n: usize) -> Arc<ClassSet> {
    Arc::new(ClassSet::new((0..n).map(|i| format!("c{i}")).collect()).unwrap())
}

/// Gaussian blobs with class centres on a seeded random layout.
pub fn blobs(n_classes: usize, k: usize, per_class: usize, spread: f64, seed: u64) -> Dataset {
    let mut rng = rng_from(seed);
    let centres: Vec<Vec<f64>> =
        (0..n_classes).map(|_| (0..k).map(|_| rng.random_range(-6.0..6.0)).collect()).collect();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..per_class {
            for m in centre {
                values.push((m + spread * gaussian(&mut rng)).clamp(-10.0, 10.0));
            }
            labels.push(DeviceClass(c));
        }
    }
    let n = labels.len();
    Dataset::new(schema(k), classes(n_classes), Array2::from_shape_vec((n, k), values).unwrap(), labels).unwrap()
}

mod rand_distr_free {
    use rand::Rng;

    /// Box–Muller standard normal.
    pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

pub fn accuracy(model: &dyn camolab_core::Classifier, ds: &Dataset) -> f64 {
    let preds = model.predict_batch(ds.features()).unwrap();
    preds.iter().zip(ds.labels()).filter(|(p, t)| p == t).count() as f64 / ds.len() as f64
}
