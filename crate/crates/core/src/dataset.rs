use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from;
use crate::schema::FeatureSchema;
use crate::{Error, Result};

/// Index of a device class in a [`ClassSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceClass(pub usize);

impl DeviceClass {
    pub fn id(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for DeviceClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The N class labels of an experiment. Class ids are positions in this list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    labels: Vec<String>,
}

impl ClassSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Validation("class set is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Validation(format!("duplicate class label `{l}`")));
            }
        }
        Ok(ClassSet { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, c: DeviceClass) -> &str {
        &self.labels[c.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn lookup(&self, label: &str) -> Option<DeviceClass> {
        self.labels.iter().position(|l| l == label).map(DeviceClass)
    }
}

/// Labeled feature vectors over one schema. Rows are stored as a dense
/// `rows × K` matrix.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Arc<FeatureSchema>,
    classes: Arc<ClassSet>,
    features: Array2<f64>,
    labels: Vec<DeviceClass>,
    pub split_seed: u64,
}

impl Dataset {
    /// Builds a dataset, validating every row against the schema ranges and
    /// every label against the class set.
    pub fn new(
        schema: Arc<FeatureSchema>,
        classes: Arc<ClassSet>,
        features: Array2<f64>,
        labels: Vec<DeviceClass>,
    ) -> Result<Self> {
        if features.ncols() != schema.len() {
            return Err(Error::Validation(format!(
                "feature matrix has {} columns, schema has {}",
                features.ncols(),
                schema.len()
            )));
        }
        if features.nrows() != labels.len() {
            return Err(Error::Validation(format!(
                "{} rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        for (i, row) in features.outer_iter().enumerate() {
            schema
                .check(row.as_slice().expect("standard layout"))
                .map_err(|e| Error::Validation(format!("row {i}: {e}")))?;
        }
        if let Some(bad) = labels.iter().find(|c| c.0 >= classes.len()) {
            return Err(Error::Validation(format!(
                "class id {} not below class count {}",
                bad.0,
                classes.len()
            )));
        }
        let features = features.as_standard_layout().into_owned();
        Ok(Dataset { schema, classes, features, labels, split_seed: 0 })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn classes(&self) -> &ClassSet {
        &self.classes
    }

    pub fn classes_arc(&self) -> &Arc<ClassSet> {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[DeviceClass] {
        &self.labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for c in &self.labels {
            counts[c.0] += 1;
        }
        counts
    }

    /// Number of distinct classes that actually occur.
    pub fn present_classes(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            classes: self.classes.clone(),
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split_seed: self.split_seed,
        }
    }

    /// Rows whose label satisfies `keep`.
    pub fn filter_classes(&self, keep: impl Fn(DeviceClass) -> bool) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.labels[i])).collect();
        self.subset(&idx)
    }

    /// Projects every row onto the given feature columns.
    pub fn project(&self, indices: &[usize]) -> Result<Dataset> {
        let schema = Arc::new(self.schema.select(indices)?);
        Ok(Dataset {
            schema,
            classes: self.classes.clone(),
            features: self.features.select(Axis(1), indices),
            labels: self.labels.clone(),
            split_seed: self.split_seed,
        })
    }

    /// Maps every label through `map` (old id → new id) into a new class set.
    pub fn relabel(&self, map: &[usize], classes: Arc<ClassSet>) -> Result<Dataset> {
        if map.len() != self.n_classes() {
            return Err(Error::Validation("relabel map must cover every class".into()));
        }
        if map.iter().any(|&m| m >= classes.len()) {
            return Err(Error::Validation("relabel map points outside the new class set".into()));
        }
        Ok(Dataset {
            schema: self.schema.clone(),
            classes,
            features: self.features.clone(),
            labels: self.labels.iter().map(|c| DeviceClass(map[c.0])).collect(),
            split_seed: self.split_seed,
        })
    }

    /// Replaces the labels, keeping everything else.
    pub fn with_labels(&self, labels: Vec<DeviceClass>) -> Result<Dataset> {
        Dataset::new(self.schema.clone(), self.classes.clone(), self.features.clone(), labels)
    }

    /// Stratified split. Each class contributes `round(n_c · train_fraction)`
    /// rows to the training side, with the per-class rounding apportioned by
    /// largest remainder so the training total is `round(n · train_fraction)`.
    /// Every class keeps at least one row on each side.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Validation(format!(
                "train fraction {train_fraction} must lie strictly between 0 and 1"
            )));
        }
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.n_classes()];
        for (i, c) in self.labels.iter().enumerate() {
            by_class[c.0].push(i);
        }
        for (class, rows) in by_class.iter().enumerate() {
            if rows.len() == 1 {
                return Err(Error::Stratification(format!("class {class} has a single row")));
            }
        }
        let present: Vec<usize> = (0..by_class.len()).filter(|&c| !by_class[c].is_empty()).collect();
        if present.len() < 2 {
            return Err(Error::Stratification(format!(
                "{} class(es) present, need at least 2",
                present.len()
            )));
        }

        // Largest-remainder apportionment of the training quota.
        let target_total = (self.len() as f64 * train_fraction).round() as usize;
        let mut quota: Vec<usize> = vec![0; by_class.len()];
        let mut remainders = Vec::new();
        for &c in &present {
            let exact = by_class[c].len() as f64 * train_fraction;
            quota[c] = (exact.floor() as usize).clamp(1, by_class[c].len() - 1);
            remainders.push((exact - exact.floor(), c));
        }
        remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut assigned: usize = quota.iter().sum();
        for &(_, c) in &remainders {
            if assigned >= target_total {
                break;
            }
            if quota[c] + 1 < by_class[c].len() {
                quota[c] += 1;
                assigned += 1;
            }
        }

        let mut rng = rng_from(seed);
        let mut train_idx = Vec::with_capacity(assigned);
        let mut test_idx = Vec::with_capacity(self.len() - assigned);
        for &c in &present {
            let mut rows = by_class[c].clone();
            rows.shuffle(&mut rng);
            train_idx.extend_from_slice(&rows[..quota[c]]);
            test_idx.extend_from_slice(&rows[quota[c]..]);
        }
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        let mut train = self.subset(&train_idx);
        let mut test = self.subset(&test_idx);
        train.split_seed = seed;
        test.split_seed = seed;
        Ok((train, test))
    }
}

/// Free-function form of [`Dataset::split`].
pub fn split_dataset(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    ds.split(train_fraction, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureSpec;

    fn toy(rows_per_class: &[usize]) -> Dataset {
        let schema = Arc::new(
            FeatureSchema::new(vec![FeatureSpec::new("x", "u", 0.0, 1e6, true)]).unwrap(),
        );
        let classes =
            Arc::new(ClassSet::new((0..rows_per_class.len()).map(|i| format!("c{i}")).collect()).unwrap());
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in rows_per_class.iter().enumerate() {
            for _ in 0..n {
                values.push(values.len() as f64);
                labels.push(DeviceClass(c));
            }
        }
        let n = values.len();
        Dataset::new(schema, classes, Array2::from_shape_vec((n, 1), values).unwrap(), labels).unwrap()
    }

    #[test]
    fn rejects_out_of_range_rows() {
        let schema = Arc::new(FeatureSchema::new(vec![FeatureSpec::new("x", "u", 0.0, 1.0, true)]).unwrap());
        let classes = Arc::new(ClassSet::new(vec!["a".into()]).unwrap());
        let bad = Array2::from_shape_vec((1, 1), vec![2.0]).unwrap();
        assert!(Dataset::new(schema.clone(), classes.clone(), bad, vec![DeviceClass(0)]).is_err());
        let ok = Array2::from_shape_vec((1, 1), vec![0.5]).unwrap();
        assert!(Dataset::new(schema.clone(), classes.clone(), ok.clone(), vec![DeviceClass(1)]).is_err());
        assert!(Dataset::new(schema, classes, ok, vec![DeviceClass(0)]).is_ok());
    }

    #[test]
    fn degenerate_splits_are_rejected() {
        assert!(matches!(toy(&[2]).split(0.5, 1), Err(Error::Stratification(_))));
        assert!(matches!(toy(&[1, 5]).split(0.5, 1), Err(Error::Stratification(_))));
    }

    #[test]
    fn split_keeps_every_class_on_both_sides() {
        let ds = toy(&[2, 3, 7]);
        let (train, test) = ds.split(0.8, 3).unwrap();
        for counts in [train.class_counts(), test.class_counts()] {
            assert!(counts.iter().all(|&c| c >= 1), "{counts:?}");
        }
        assert_eq!(train.len() + test.len(), ds.len());
    }

    #[test]
    fn bad_fraction_rejected() {
        let ds = toy(&[4, 4]);
        assert!(ds.split(0.0, 1).is_err());
        assert!(ds.split(1.0, 1).is_err());
    }
}
