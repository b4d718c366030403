//! Column pipeline simulation and the design-level timing model.

mod column;
mod timeline;
pub(crate) mod timing;

pub use column::{
    simulate_column, ColumnReport, ColumnSimParams, ComputeBubble, ComputeSpan, TransferBubble,
    TransferEvent,
};
pub use timeline::{
    read_timeline_csv, timeline_events, write_timeline_csv, EventKind, TimelineEvent,
};
pub use timing::{design_timing, throughput_upper_bounds, Bound, DesignTiming};
