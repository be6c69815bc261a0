use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::{Grid, GridPos};

/// Semantic type of a feature or expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SemType {
    Scalar,
    Vec3,
    Quat,
    GridPos,
    Grid,
    /// Only produced by `bfs`; never part of a schema.
    Path,
}

impl fmt::Display for SemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SemType::Scalar => "Scalar",
            SemType::Vec3 => "Vec3",
            SemType::Quat => "Quat",
            SemType::GridPos => "GridPos",
            SemType::Grid => "Grid",
            SemType::Path => "Path",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("duplicate feature name `{0}`")]
    Duplicate(String),
    #[error("feature `{0}` cannot have type Path")]
    PathFeature(String),
}

/// Named, typed features an environment exposes to progress programs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureSchema {
    entries: BTreeMap<String, SemType>,
}

impl FeatureSchema {
    pub fn new<'a>(entries: impl IntoIterator<Item = (&'a str, SemType)>) -> Result<Self, SchemaError> {
        let mut map = BTreeMap::new();
        for (name, ty) in entries {
            if ty == SemType::Path {
                return Err(SchemaError::PathFeature(name.to_string()));
            }
            if map.insert(name.to_string(), ty).is_some() {
                return Err(SchemaError::Duplicate(name.to_string()));
            }
        }
        Ok(Self { entries: map })
    }

    pub fn get(&self, name: &str) -> Option<SemType> {
        self.entries.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, SemType)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One `name: Type` line per feature, sorted by name.
    pub fn render(&self) -> String {
        self.iter().map(|(name, ty)| format!("{name}: {ty}\n")).collect()
    }
}

/// Runtime value of a feature or sub-expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(f64),
    Vec3([f64; 3]),
    /// `(x, y, z, w)` with the vector part first.
    Quat([f64; 4]),
    Pos(Option<GridPos>),
    Grid(Arc<Grid>),
    Path(Vec<GridPos>),
}

impl Value {
    pub fn sem_type(&self) -> SemType {
        match self {
            Value::Scalar(_) => SemType::Scalar,
            Value::Vec3(_) => SemType::Vec3,
            Value::Quat(_) => SemType::Quat,
            Value::Pos(_) => SemType::GridPos,
            Value::Grid(_) => SemType::Grid,
            Value::Path(_) => SemType::Path,
        }
    }
}

/// A state snapshot: feature name to value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvFeatures {
    values: BTreeMap<String, Value>,
}

impl EnvFeatures {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: Value) -> Self {
        self.insert(name, value);
        self
    }

    pub fn insert(&mut self, name: &str, value: Value) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// True when every schema entry is present with the declared type.
    pub fn conforms_to(&self, schema: &FeatureSchema) -> bool {
        schema
            .iter()
            .all(|(name, ty)| self.get(name).is_some_and(|v| v.sem_type() == ty))
    }
}
