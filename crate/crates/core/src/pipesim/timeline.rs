//! Flat event records for external plotting.
//!
//! CSV with the fixed header `entity,kind,start_step,end_step,batch,id`.
//! Step ranges are inclusive. Channel events use entity `channel`; core
//! events use `core<N>`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::column::ColumnReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Transfer,
    Compute,
    TransferBubble,
    ComputeBubble,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub entity: String,
    pub kind: EventKind,
    pub start_step: u64,
    pub end_step: u64,
    pub batch: u64,
    pub id: u64,
}

const CHANNEL: &str = "channel";

fn core_entity(core: u64) -> String {
    format!("core{core}")
}

/// Every event of the report, ordered by start step, then kind, then entity.
pub fn timeline_events(report: &ColumnReport) -> Vec<TimelineEvent> {
    let mut events = Vec::new();
    for t in &report.transfers {
        events.push(TimelineEvent {
            entity: CHANNEL.into(),
            kind: EventKind::Transfer,
            start_step: t.step,
            end_step: t.step,
            batch: t.tile.batch,
            id: t.tile.id,
        });
    }
    for s in &report.per_core_timeline {
        events.push(TimelineEvent {
            entity: core_entity(s.core),
            kind: EventKind::Compute,
            start_step: s.start_step,
            end_step: s.end_step,
            batch: s.batch,
            id: s.core,
        });
    }
    for b in &report.transfer_bubble_spans {
        events.push(TimelineEvent {
            entity: CHANNEL.into(),
            kind: EventKind::TransferBubble,
            start_step: b.start_step,
            end_step: b.end_step,
            batch: b.tile.batch,
            id: b.tile.id,
        });
    }
    for b in &report.compute_bubble_spans {
        events.push(TimelineEvent {
            entity: core_entity(b.core),
            kind: EventKind::ComputeBubble,
            start_step: b.start_step,
            end_step: b.end_step,
            batch: b.next_batch,
            id: b.core,
        });
    }
    events.sort_by(|a, b| {
        (a.start_step, a.kind, &a.entity, a.batch, a.id).cmp(&(
            b.start_step,
            b.kind,
            &b.entity,
            b.batch,
            b.id,
        ))
    });
    events
}

pub fn write_timeline_csv<W: Write>(events: &[TimelineEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in events {
        w.serialize(e).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_timeline_csv<R: Read>(input: R) -> Result<Vec<TimelineEvent>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("timeline csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipesim::{simulate_column, ColumnSimParams};
    use crate::schedule::lex_order;

    #[test]
    fn csv_round_trip_with_header() {
        let r = simulate_column(&lex_order(4, 4), &ColumnSimParams::new(4, 4, 4)).unwrap();
        let events = timeline_events(&r);
        let mut buf = Vec::new();
        write_timeline_csv(&events, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("entity,kind,start_step,end_step,batch,id\n"));
        assert!(text.contains("channel,transfer_bubble,10,12,2,2"));
        assert!(text.contains("core0,compute_bubble,13,18,3,0"));
        assert_eq!(read_timeline_csv(&buf[..]).unwrap(), events);
    }
}
