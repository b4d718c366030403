//! Step-level simulation of one reduction column fed by one channel.
//!
//! Time advances in transfer steps (the time to move one tile). Within a
//! step, cores first decide whether to start computing, then the channel
//! tries to deliver the tile at the head of the order:
//!
//! * the channel sends at most one tile per step, strictly in order;
//! * a tile needs a free bank on its destination core; otherwise the channel
//!   blocks on it;
//! * core `i` starts batch `b` once tile `(b, i)` has arrived in an earlier
//!   step and core `i - 1` finished batch `b` in an earlier step;
//! * a computation lasts `ctc_steps` and frees its bank when it ends.
//!
//! A blocked step counts as a transfer bubble only when some later, already
//! released tile could have been accepted by its own core, i.e. the channel
//! is stalled by head-of-line blocking rather than having nothing useful to do.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{single_core_compute_cycles, single_core_transfer_cycles, MappingConfig};
use crate::platform::PlatformSpec;
use crate::scalar::Scalar;
use crate::schedule::{validate_order, TileRef, TransferOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSimParams {
    pub depth: u64,
    pub num_batches: u64,
    pub ctc_steps: u64,
    pub banks_per_core: u64,
    /// Steps the last core of the column spends writing each result out.
    pub drain_steps: u64,
}

impl ColumnSimParams {
    pub fn new(depth: u64, num_batches: u64, ctc_steps: u64) -> Self {
        Self {
            depth,
            num_batches,
            ctc_steps,
            banks_per_core: 2,
            drain_steps: 0,
        }
    }

    pub fn with_banks(mut self, banks: u64) -> Self {
        self.banks_per_core = banks;
        self
    }

    /// One column of `cfg`: depth `B`, one batch per on-chip round, and
    /// `floor(ctc)` (at least 1) steps per computation.
    pub fn from_config<T: Scalar>(cfg: &MappingConfig, spec: &PlatformSpec<T>) -> Result<Self> {
        cfg.validate(spec)?;
        let dt = spec.dtype(cfg.shape.dtype)?;
        let compute = single_core_compute_cycles(&cfg.tile, dt);
        let transfer = single_core_transfer_cycles(&cfg.tile, dt, spec);
        Ok(Self::new(
            cfg.array.b,
            cfg.batch.count(),
            (compute / transfer).max(1),
        ))
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("depth", self.depth),
            ("num_batches", self.num_batches),
            ("ctc_steps", self.ctc_steps),
            ("banks_per_core", self.banks_per_core),
        ] {
            if v == 0 {
                return Err(Error::NonPositive { field: name.into() });
            }
        }
        Ok(())
    }
}

/// Inclusive step range during which `core` computes `batch`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeSpan {
    pub core: u64,
    pub batch: u64,
    pub start_step: u64,
    pub end_step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferEvent {
    pub step: u64,
    pub tile: TileRef,
}

/// Consecutive head-of-line blocked steps on one tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferBubble {
    pub tile: TileRef,
    pub start_step: u64,
    pub end_step: u64,
}

impl TransferBubble {
    pub fn len(&self) -> u64 {
        self.end_step - self.start_step + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Idle steps of a core between two of its computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeBubble {
    pub core: u64,
    /// Batch the core runs once the bubble ends.
    pub next_batch: u64,
    pub start_step: u64,
    pub end_step: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub params: ColumnSimParams,
    /// Last occupied step (inclusive).
    pub makespan_steps: u64,
    pub transfer_bubbles: u64,
    pub compute_bubbles: u64,
    pub per_core_timeline: Vec<ComputeSpan>,
    pub transfers: Vec<TransferEvent>,
    pub transfer_bubble_spans: Vec<TransferBubble>,
    pub compute_bubble_spans: Vec<ComputeBubble>,
}

impl ColumnReport {
    pub fn first_transfer_bubble(&self) -> Option<&TransferBubble> {
        self.transfer_bubble_spans.first()
    }

    pub fn delivery_step(&self, tile: TileRef) -> Option<u64> {
        self.transfers
            .iter()
            .find(|e| e.tile == tile)
            .map(|e| e.step)
    }

    pub fn compute_bubbles_of(&self, core: u64) -> impl Iterator<Item = &ComputeBubble> {
        self.compute_bubble_spans
            .iter()
            .filter(move |b| b.core == core)
    }

    pub fn busy_steps(&self) -> u64 {
        self.per_core_timeline
            .iter()
            .map(|s| s.end_step - s.start_step + 1)
            .sum()
    }
}

struct Core {
    /// (batch, step at which the bank becomes free once known)
    banks: Vec<(u64, Option<u64>)>,
    arrived: Vec<Option<u64>>,
    finished: Vec<Option<u64>>,
    busy_until: Option<u64>,
}

impl Core {
    fn new(num_batches: u64) -> Self {
        Self {
            banks: Vec::new(),
            arrived: vec![None; num_batches as usize],
            finished: vec![None; num_batches as usize],
            busy_until: None,
        }
    }

    fn has_free_bank(&self, step: u64, banks: u64) -> bool {
        let held = self
            .banks
            .iter()
            .filter(|(_, free)| free.is_none_or(|f| f > step))
            .count() as u64;
        held < banks
    }

    fn idle_at(&self, step: u64) -> bool {
        self.busy_until.is_none_or(|b| b < step)
    }
}

pub fn simulate_column(order: &TransferOrder, params: &ColumnSimParams) -> Result<ColumnReport> {
    params.check()?;
    if order.depth != params.depth || order.num_batches != params.num_batches {
        return Err(Error::SimMismatch(format!(
            "order is {}x{} (batches x depth) but parameters say {}x{}",
            order.num_batches, order.depth, params.num_batches, params.depth
        )));
    }
    validate_order(order)?;

    let sends: Vec<(usize, TileRef)> = order.with_periods().collect();
    let n_periods = order.periods.len();
    // first tile index of each period
    let mut period_head = Vec::with_capacity(n_periods);
    let mut acc = 0usize;
    for &n in &order.periods {
        period_head.push(acc);
        acc += n as usize;
    }
    let mut release: Vec<Option<u64>> = vec![None; n_periods];
    if n_periods > 0 {
        release[0] = Some(0);
    }

    let depth = params.depth as usize;
    let mut cores: Vec<Core> = (0..depth).map(|_| Core::new(params.num_batches)).collect();
    let mut timeline = Vec::new();
    let mut transfers = Vec::new();
    let mut blocked: Vec<(u64, TileRef)> = Vec::new();
    let mut head = 0usize;
    let mut started = 0usize;
    let total = sends.len();
    let last = depth - 1;

    let mut step = 0u64;
    loop {
        let mut progress = false;

        for i in 0..depth {
            if !cores[i].idle_at(step) {
                continue;
            }
            let ready = (0..params.num_batches as usize).find(|&b| {
                let c = &cores[i];
                c.finished[b].is_none()
                    && c.arrived[b].is_some_and(|a| a < step)
                    && (i == 0 || cores[i - 1].finished[b].is_some_and(|e| e < step))
            });
            if let Some(b) = ready {
                let end = step + params.ctc_steps - 1;
                let core = &mut cores[i];
                core.finished[b] = Some(end);
                core.busy_until = Some(end + if i == last { params.drain_steps } else { 0 });
                if let Some(bank) = core.banks.iter_mut().find(|(bb, _)| *bb == b as u64) {
                    bank.1 = Some(end + 1);
                }
                timeline.push(ComputeSpan {
                    core: i as u64,
                    batch: b as u64,
                    start_step: step,
                    end_step: end,
                });
                started += 1;
                progress = true;

                // releasing the period that follows this tile's period
                let tile = TileRef::new(b as u64, i as u64);
                if let Some(pos) = sends.iter().position(|&(_, t)| t == tile) {
                    let g = sends[pos].0;
                    if period_head[g] == pos && g + 1 < n_periods && release[g + 1].is_none() {
                        release[g + 1] = Some(step);
                    }
                }
            }
        }

        if head < total {
            let released = |g: usize| release[g].is_some_and(|r| r <= step);
            let (g, tile) = sends[head];
            if released(g) {
                let dest = tile.id as usize;
                if cores[dest].has_free_bank(step, params.banks_per_core) {
                    let core = &mut cores[dest];
                    core.banks.retain(|(_, free)| free.is_none_or(|f| f > step));
                    core.banks.push((tile.batch, None));
                    core.arrived[tile.batch as usize] = Some(step);
                    transfers.push(TransferEvent { step, tile });
                    head += 1;
                    progress = true;
                } else {
                    let stalled = sends[head + 1..].iter().any(|&(g2, t2)| {
                        released(g2)
                            && t2.id as usize != dest
                            && cores[t2.id as usize].has_free_bank(step, params.banks_per_core)
                    });
                    if stalled {
                        blocked.push((step, tile));
                    }
                }
            }
        }

        if head == total && started == total {
            break;
        }
        if !progress && cores.iter().all(|c| c.idle_at(step)) {
            return Err(Error::Deadlock { step });
        }
        step += 1;
    }

    let makespan = cores.iter().filter_map(|c| c.busy_until).max().unwrap_or(0);

    let mut transfer_bubble_spans: Vec<TransferBubble> = Vec::new();
    for (s, tile) in &blocked {
        match transfer_bubble_spans.last_mut() {
            Some(run) if run.tile == *tile && run.end_step + 1 == *s => run.end_step = *s,
            _ => transfer_bubble_spans.push(TransferBubble {
                tile: *tile,
                start_step: *s,
                end_step: *s,
            }),
        }
    }

    timeline.sort_by_key(|s| (s.core, s.start_step));
    let mut compute_bubble_spans = Vec::new();
    for pair in timeline.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.core != b.core {
            continue;
        }
        let occupied_to = a.end_step
            + if a.core as usize == last {
                params.drain_steps
            } else {
                0
            };
        if b.start_step > occupied_to + 1 {
            compute_bubble_spans.push(ComputeBubble {
                core: a.core,
                next_batch: b.batch,
                start_step: occupied_to + 1,
                end_step: b.start_step - 1,
            });
        }
    }

    Ok(ColumnReport {
        params: *params,
        makespan_steps: makespan,
        transfer_bubbles: blocked.len() as u64,
        compute_bubbles: compute_bubble_spans
            .iter()
            .map(|b: &ComputeBubble| b.end_step - b.start_step + 1)
            .sum(),
        per_core_timeline: timeline,
        transfers,
        transfer_bubble_spans,
        compute_bubble_spans,
    })
}
