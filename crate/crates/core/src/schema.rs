use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One column of a [`FeatureSchema`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub unit: String,
    pub min: f64,
    pub max: f64,
    /// Whether traffic shaping may change this feature without breaking
    /// the device's function.
    pub mutable: bool,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, min: f64, max: f64, mutable: bool) -> Self {
        FeatureSpec { name: name.into(), unit: unit.into(), min, max, mutable }
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

/// Ordered feature list with ranges and the functionality mask.
///
/// The mask lives here rather than on any model so that the attack and its
/// validation see the same constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    features: Vec<FeatureSpec>,
}

impl TryFrom<RawSchema> for FeatureSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        FeatureSchema::new(raw.features)
    }
}

impl From<FeatureSchema> for RawSchema {
    fn from(s: FeatureSchema) -> Self {
        RawSchema { features: s.features }
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
            }
            if !(f.min.is_finite() && f.max.is_finite()) || f.min > f.max {
                return Err(Error::Schema(format!(
                    "feature `{}` has invalid range [{}, {}]",
                    f.name, f.min, f.max
                )));
            }
        }
        if !features.iter().any(|f| f.mutable) {
            return Err(Error::Schema("at least one feature must be mutable".into()));
        }
        Ok(FeatureSchema { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &FeatureSpec {
        &self.features[i]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn mins(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.min).collect()
    }

    pub fn maxs(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.max).collect()
    }

    /// 1.0 for mutable features, 0.0 for immutable ones.
    pub fn mask(&self) -> Vec<f64> {
        self.features.iter().map(|f| if f.mutable { 1.0 } else { 0.0 }).collect()
    }

    pub fn mutable_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.features[i].mutable).collect()
    }

    /// Returns a copy with the mutability of the named features overridden.
    pub fn with_mask_overrides<'a>(
        &self,
        overrides: impl IntoIterator<Item = (&'a str, bool)>,
    ) -> Result<Self> {
        let mut features = self.features.clone();
        for (name, mutable) in overrides {
            let f = features
                .iter_mut()
                .find(|f| f.name == name)
                .ok_or_else(|| Error::Schema(format!("mask override names unknown feature `{name}`")))?;
            f.mutable = mutable;
        }
        FeatureSchema::new(features)
    }

    /// Sub-schema made of the given feature indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len());
        for &i in indices {
            let f = self
                .features
                .get(i)
                .ok_or_else(|| Error::Schema(format!("feature index {i} out of bounds")))?;
            features.push(f.clone());
        }
        // A projection may legitimately contain only immutable columns.
        if features.is_empty() {
            return Err(Error::Schema("empty feature selection".into()));
        }
        Ok(FeatureSchema { features })
    }

    /// Indices into `self` of every feature of `sub`, matched by name.
    pub fn projection_of(&self, sub: &FeatureSchema) -> Result<Vec<usize>> {
        sub.names()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::Schema(format!("feature `{n}` is not in the pool")))
            })
            .collect()
    }

    /// Checks length, finiteness and the per-feature range of `values`.
    pub fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Validation(format!(
                "vector has {} values, schema has {} features",
                values.len(),
                self.len()
            )));
        }
        for (v, f) in values.iter().zip(&self.features) {
            if !v.is_finite() || *v < f.min || *v > f.max {
                return Err(Error::Validation(format!(
                    "feature `{}` = {v} outside [{}, {}]",
                    f.name, f.min, f.max
                )));
            }
        }
        Ok(())
    }

    pub fn clamp_in_place(&self, values: &mut [f64]) {
        for (v, f) in values.iter_mut().zip(&self.features) {
            *v = v.clamp(f.min, f.max);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(name: &str, mutable: bool) -> FeatureSpec {
        FeatureSpec::new(name, "u", 0.0, 1.0, mutable)
    }

    #[test]
    fn rejects_duplicates_and_bad_ranges() {
        assert!(FeatureSchema::new(vec![spec("a", true), spec("a", false)]).is_err());
        assert!(FeatureSchema::new(vec![FeatureSpec::new("a", "u", 2.0, 1.0, true)]).is_err());
        assert!(FeatureSchema::new(vec![spec("a", false)]).is_err());
        assert!(FeatureSchema::new(vec![spec("a", true), spec("b", false)]).is_ok());
    }

    #[test]
    fn check_reports_out_of_range() {
        let s = FeatureSchema::new(vec![spec("a", true), spec("b", false)]).unwrap();
        assert!(s.check(&[0.5, 1.0]).is_ok());
        assert!(s.check(&[0.5, 1.5]).is_err());
        assert!(s.check(&[0.5]).is_err());
        assert!(s.check(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn json_round_trip_revalidates() {
        let s = FeatureSchema::new(vec![spec("a", true), spec("b", false)]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<FeatureSchema>(&text).unwrap(), s);
        let bad = text.replace("\"b\"", "\"a\"");
        assert!(serde_json::from_str::<FeatureSchema>(&bad).is_err());
    }

    #[test]
    fn projection_by_name() {
        let pool = FeatureSchema::new(vec![spec("a", true), spec("b", false), spec("c", true)]).unwrap();
        let sub = pool.select(&[2, 0]).unwrap();
        assert_eq!(pool.projection_of(&sub).unwrap(), vec![2, 0]);
        let other = FeatureSchema::new(vec![spec("z", true)]).unwrap();
        assert!(pool.projection_of(&other).is_err());
    }
}
