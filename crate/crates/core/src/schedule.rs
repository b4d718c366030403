//! Tile transfer orders for one reduction column.
//!
//! A column of `depth` cores processes `num_batches` batches; every
//! (batch, id) pair names the tile that core `id` needs for that batch.
//! An order is the sequence in which the data mover pushes those tiles
//! down the column's single packet-switched channel.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileRef {
    pub batch: u64,
    pub id: u64,
}

impl TileRef {
    pub fn new(batch: u64, id: u64) -> Self {
        Self { batch, id }
    }

    /// Index of the computation period in which this tile is consumed, counting from 0.
    pub fn diagonal(&self) -> u64 {
        self.batch + self.id
    }
}

impl fmt::Display for TileRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.batch, self.id)
    }
}

/// A permutation of the `num_batches x depth` tile grid.
///
/// `periods` splits the sequence into consecutive release groups. The mover
/// may start group `g` only once the first tile of group `g - 1` has begun
/// computing; a single group means tiles are streamed as fast as the
/// destination banks allow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferOrder {
    pub num_batches: u64,
    pub depth: u64,
    pub tiles: Vec<TileRef>,
    pub periods: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderViolation {
    #[error("empty grid ({num_batches} batches x {depth} cores)")]
    EmptyGrid { num_batches: u64, depth: u64 },
    #[error("tile {0} is outside the grid")]
    OutOfBounds(TileRef),
    #[error("tile {0} appears more than once")]
    Duplicate(TileRef),
    #[error("tile {0} is never sent")]
    Missing(TileRef),
    #[error("period sizes sum to {sum} but the order holds {len} tiles")]
    Periods { sum: u64, len: u64 },
    #[error("empty period at index {0}")]
    EmptyPeriod(usize),
}

impl TransferOrder {
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// `(period index, tile)` pairs in send order.
    pub fn with_periods(&self) -> impl Iterator<Item = (usize, TileRef)> + '_ {
        self.periods
            .iter()
            .enumerate()
            .flat_map(|(g, &n)| std::iter::repeat_n(g, n as usize))
            .zip(self.tiles.iter().copied())
    }
}

/// Batch-major order: every core of batch 0, then batch 1, and so on.
pub fn lex_order(num_batches: u64, depth: u64) -> TransferOrder {
    let tiles: Vec<TileRef> = (0..num_batches)
        .flat_map(|b| (0..depth).map(move |i| TileRef::new(b, i)))
        .collect();
    let n = tiles.len() as u64;
    TransferOrder {
        num_batches,
        depth,
        tiles,
        periods: if n == 0 { vec![] } else { vec![n] },
    }
}

/// Anti-diagonal order: group `d` holds every tile with `batch + id == d`,
/// lowest id first, and is exactly what the column consumes in period `d`.
pub fn zigzag_order(num_batches: u64, depth: u64) -> TransferOrder {
    let mut tiles = Vec::with_capacity((num_batches * depth) as usize);
    let mut periods = Vec::new();
    if num_batches > 0 && depth > 0 {
        for d in 0..num_batches + depth - 1 {
            let before = tiles.len();
            for id in 0..depth.min(d + 1) {
                let batch = d - id;
                if batch < num_batches {
                    tiles.push(TileRef::new(batch, id));
                }
            }
            periods.push((tiles.len() - before) as u64);
        }
    }
    TransferOrder {
        num_batches,
        depth,
        tiles,
        periods,
    }
}

/// Checks bounds, the permutation property and the period split.
pub fn validate_order(order: &TransferOrder) -> Result<(), OrderViolation> {
    let (nb, depth) = (order.num_batches, order.depth);
    if nb == 0 || depth == 0 {
        return Err(OrderViolation::EmptyGrid {
            num_batches: nb,
            depth,
        });
    }
    let mut seen = vec![false; (nb * depth) as usize];
    for t in &order.tiles {
        if t.batch >= nb || t.id >= depth {
            return Err(OrderViolation::OutOfBounds(*t));
        }
        let slot = &mut seen[(t.batch * depth + t.id) as usize];
        if *slot {
            return Err(OrderViolation::Duplicate(*t));
        }
        *slot = true;
    }
    if let Some(pos) = seen.iter().position(|s| !s) {
        let pos = pos as u64;
        return Err(OrderViolation::Missing(TileRef::new(
            pos / depth,
            pos % depth,
        )));
    }
    if let Some(i) = order.periods.iter().position(|&n| n == 0) {
        return Err(OrderViolation::EmptyPeriod(i));
    }
    let sum: u64 = order.periods.iter().sum();
    if sum != order.tiles.len() as u64 {
        return Err(OrderViolation::Periods {
            sum,
            len: order.tiles.len() as u64,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(v: &[(u64, u64)]) -> Vec<TileRef> {
        v.iter().map(|&(b, i)| TileRef::new(b, i)).collect()
    }

    #[test]
    fn lex_small() {
        assert_eq!(
            lex_order(2, 2).tiles,
            refs(&[(0, 0), (0, 1), (1, 0), (1, 1)])
        );
        assert_eq!(lex_order(1, 1).tiles, refs(&[(0, 0)]));
        assert_eq!(
            lex_order(4, 4).tiles[..8],
            refs(&[
                (0, 0),
                (0, 1),
                (0, 2),
                (0, 3),
                (1, 0),
                (1, 1),
                (1, 2),
                (1, 3)
            ])[..]
        );
    }

    #[test]
    fn zigzag_four_by_four() {
        let z = zigzag_order(4, 4);
        assert_eq!(
            z.tiles,
            refs(&[
                (0, 0),
                (1, 0),
                (0, 1),
                (2, 0),
                (1, 1),
                (0, 2),
                (3, 0),
                (2, 1),
                (1, 2),
                (0, 3),
                (3, 1),
                (2, 2),
                (1, 3),
                (3, 2),
                (2, 3),
                (3, 3),
            ])
        );
        assert_eq!(z.periods, vec![1, 2, 3, 4, 3, 2, 1]);
        for (g, t) in z.with_periods() {
            assert_eq!(t.diagonal(), g as u64);
        }
    }

    #[test]
    fn zigzag_degenerates_to_lex() {
        assert_eq!(zigzag_order(5, 1).tiles, lex_order(5, 1).tiles);
        assert_eq!(zigzag_order(1, 5).tiles, lex_order(1, 5).tiles);
    }

    #[test]
    fn violations() {
        validate_order(&lex_order(3, 2)).unwrap();
        validate_order(&zigzag_order(3, 2)).unwrap();

        let mut dup = lex_order(2, 2);
        dup.tiles[3] = TileRef::new(0, 0);
        assert_eq!(
            validate_order(&dup),
            Err(OrderViolation::Duplicate(TileRef::new(0, 0)))
        );

        let mut missing = lex_order(2, 2);
        missing.tiles.pop();
        missing.periods = vec![3];
        assert_eq!(
            validate_order(&missing),
            Err(OrderViolation::Missing(TileRef::new(1, 1)))
        );

        let mut oob = lex_order(2, 2);
        oob.tiles[0] = TileRef::new(2, 0);
        assert_eq!(
            validate_order(&oob),
            Err(OrderViolation::OutOfBounds(TileRef::new(2, 0)))
        );

        let mut periods = lex_order(2, 2);
        periods.periods = vec![1, 2];
        assert!(matches!(
            validate_order(&periods),
            Err(OrderViolation::Periods { sum: 3, len: 4 })
        ));
    }
}
