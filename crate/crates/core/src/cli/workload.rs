//! Workload documents: a named, ordered list of matrix multiplies.
//!
//! ```toml
//! name = "mlp"
//! dtype = "fp32"
//!
//! [[layers]]
//! name = "fc1"
//! m = 6144
//! k = 6144
//! n = 6144
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::MmShape;
use crate::platform::DataType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub name: String,
    pub m: u64,
    pub k: u64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub name: String,
    pub dtype: DataType,
    pub layers: Vec<LayerSpec>,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Workload("at least one layer is required".into()));
        }
        self.shapes().map(|_| ())
    }

    pub fn shapes(&self) -> Result<Vec<MmShape>> {
        self.layers
            .iter()
            .map(|l| {
                MmShape::new(l.m, l.k, l.n, self.dtype)
                    .map_err(|e| Error::Workload(format!("layer {}: {e}", l.name)))
            })
            .collect()
    }
}

pub fn load_workload(text: &str) -> Result<WorkloadSpec> {
    let w: WorkloadSpec = toml::from_str(text).map_err(|e| Error::Workload(e.to_string()))?;
    w.validate()?;
    Ok(w)
}
