//! Schedule export: everything a code generator needs to lay the chosen
//! design out on the array.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::interconnect::{port_plan, streams, PortPlan, Stream};
use crate::mapping::MappingConfig;
use crate::platform::PlatformSpec;
use crate::scalar::Scalar;
use crate::schedule::{validate_order, zigzag_order, TransferOrder};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleExport {
    pub config: MappingConfig,
    pub port_plan: PortPlan,
    /// LHS, RHS and output streams with their broadcast and packet groups.
    pub streams: Vec<Stream>,
    /// Transfer order for one column (depth `B`, `X*Y*Z` batches).
    pub column_order: TransferOrder,
}

impl ScheduleExport {
    pub fn build<T: Scalar>(cfg: &MappingConfig, spec: &PlatformSpec<T>) -> Result<Self> {
        let plan = port_plan(cfg, spec)?;
        Ok(Self {
            config: *cfg,
            port_plan: plan,
            streams: streams(cfg, plan.packet_factor),
            column_order: zigzag_order(cfg.batch.count(), cfg.array.b),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        validate_order(&s.column_order)?;
        Ok(s)
    }
}
