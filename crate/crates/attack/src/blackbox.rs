//! The target identifier seen from outside: labels in, labels out.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use camolab_core::{Classifier, ClassSet, Dataset, DeviceClass, FeatureSchema};
use ndarray::{ArrayView1, ArrayView2, Axis};

use crate::{AttackError, Result};

/// Label-only wrapper around a trained target model.
///
/// Queries are vectors over the attacker's feature pool; the oracle projects
/// them onto whatever subset the target was trained on. Nothing about the
/// target (kind, parameters, scores, feature subset) is reachable from here.
pub struct Oracle {
    target: Box<dyn Classifier>,
    pool: Arc<FeatureSchema>,
    classes: Arc<ClassSet>,
    projection: Vec<usize>,
    queries: AtomicU64,
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle").field("query_log", &self.query_log()).finish_non_exhaustive()
    }
}

/// Traffic the attacker observed, labeled by the oracle.
#[derive(Debug, Clone)]
pub struct EavesdropCorpus {
    rows: Dataset,
}

impl EavesdropCorpus {
    /// The labeled rows, over the attacker's pool schema.
    pub fn dataset(&self) -> &Dataset {
        &self.rows
    }

    pub fn schema(&self) -> &FeatureSchema {
        self.rows.schema()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Oracle {
    /// Hides `target` behind the attacker's pool. Fails when the pool lacks a
    /// feature the target uses.
    pub fn new(target: Box<dyn Classifier>, classes: Arc<ClassSet>, pool: Arc<FeatureSchema>) -> Result<Self> {
        let projection = pool.projection_of(target.schema())?;
        if classes.len() != target.n_classes() {
            return Err(AttackError::Validation("class set does not match the target".into()));
        }
        Ok(Oracle { target, pool, classes, projection, queries: AtomicU64::new(0) })
    }

    /// The target's label for one pool vector.
    pub fn query(&self, x: ArrayView1<'_, f64>) -> Result<DeviceClass> {
        if x.len() != self.pool.len() {
            return Err(AttackError::Validation(format!(
                "query has {} features, pool has {}",
                x.len(),
                self.pool.len()
            )));
        }
        let projected = x.select(Axis(0), &self.projection);
        let label = self.target.predict(projected.view())?;
        self.queries.fetch_add(1, Ordering::Relaxed);
        Ok(label)
    }

    /// Labels every row of `traffic` (pool vectors) by querying.
    pub fn collect(&self, traffic: ArrayView2<'_, f64>) -> Result<EavesdropCorpus> {
        if traffic.nrows() == 0 {
            return Err(AttackError::Validation("no traffic to label".into()));
        }
        let labels = self.label_rows(traffic)?;
        let rows = Dataset::new(self.pool.clone(), self.classes.clone(), traffic.to_owned(), labels)?;
        Ok(EavesdropCorpus { rows })
    }

    /// Number of vectors labeled so far.
    pub fn query_log(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    fn label_rows(&self, traffic: ArrayView2<'_, f64>) -> Result<Vec<DeviceClass>> {
        if traffic.ncols() != self.pool.len() {
            return Err(AttackError::Validation(format!(
                "traffic has {} features, pool has {}",
                traffic.ncols(),
                self.pool.len()
            )));
        }
        let projected = traffic.select(Axis(1), &self.projection);
        let labels = self.target.predict_batch(projected.view())?;
        self.queries.fetch_add(labels.len() as u64, Ordering::Relaxed);
        Ok(labels)
    }
}

/// Anything an attack can be measured against: it labels pool vectors.
pub trait Victim {
    fn identify(&self, traffic: ArrayView2<'_, f64>) -> Result<Vec<DeviceClass>>;
}

impl Victim for Oracle {
    fn identify(&self, traffic: ArrayView2<'_, f64>) -> Result<Vec<DeviceClass>> {
        self.label_rows(traffic)
    }
}
