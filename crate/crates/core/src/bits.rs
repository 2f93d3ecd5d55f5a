//! Packed ±1 grids for orders up to 8: one cell per bit, +1 = set.
//!
//! An order-n face occupies bits i·n + j for cell (i, j), so a pixel offset
//! (dx, dy) is a single shift by dy·n + dx, and a masked XOR/popcount gives
//! the overlap numerator. This is the hot kernel behind the pair-score
//! table; the general integer path in `score` stays the source of truth and
//! the two are cross-checked in tests.

use crate::encoding::Encoding;
use std::sync::OnceLock;

/// Largest order that fits a u64 board.
pub(crate) const MAX_PACKED_ORDER: usize = 8;

#[derive(Debug, Clone, Copy)]
pub(crate) struct OffsetEntry {
    pub dx: i32,
    pub dy: i32,
    /// Bit distance between paired cells: dy·n + dx.
    pub shift: i32,
    /// Bits of the first face inside the overlap window.
    pub mask: u64,
    /// Overlap cell count = popcount(mask).
    pub ones: i32,
}

/// All (2n-1)² offsets in the same scan order as `CorrelationMap::iter`
/// (dy outer, dx inner, ascending).
#[derive(Debug)]
pub(crate) struct OffsetTable {
    pub n: usize,
    pub entries: Vec<OffsetEntry>,
    pub origin_index: usize,
}

fn build_offset_table(n: usize) -> OffsetTable {
    let ni = n as i32;
    let mut entries = Vec::with_capacity((2 * n - 1) * (2 * n - 1));
    for dy in -(ni - 1)..ni {
        for dx in -(ni - 1)..ni {
            let mut mask = 0u64;
            for i in (-dy).max(0)..(ni - dy).min(ni) {
                for j in (-dx).max(0)..(ni - dx).min(ni) {
                    mask |= 1u64 << (i * ni + j);
                }
            }
            entries.push(OffsetEntry {
                dx,
                dy,
                shift: dy * ni + dx,
                mask,
                ones: mask.count_ones() as i32,
            });
        }
    }
    let origin_index = entries.iter().position(|e| e.dx == 0 && e.dy == 0).unwrap();
    OffsetTable { n, entries, origin_index }
}

pub(crate) fn offset_table(n: usize) -> &'static OffsetTable {
    static TABLES: OnceLock<Vec<OffsetTable>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| (1..=MAX_PACKED_ORDER).map(build_offset_table).collect());
    &tables[n - 1]
}

/// Packs a face; caller guarantees order ≤ 8.
pub(crate) fn pack(e: &Encoding) -> u64 {
    debug_assert!(e.order() <= MAX_PACKED_ORDER);
    let mut bits = 0u64;
    for (idx, &c) in e.cells().iter().enumerate() {
        if c == 1 {
            bits |= 1u64 << idx;
        }
    }
    bits
}

/// The face and its three quarter rotations, packed.
pub(crate) fn pack_rotations(e: &Encoding) -> [u64; 4] {
    [
        pack(e),
        pack(&e.rotated_quarter(1)),
        pack(&e.rotated_quarter(2)),
        pack(&e.rotated_quarter(3)),
    ]
}

#[inline]
fn shifted(bits: u64, shift: i32) -> u64 {
    if shift >= 0 {
        bits >> shift
    } else {
        bits << -shift
    }
}

/// Numerator of the translation score at one offset.
#[inline]
pub(crate) fn translation_num(a: u64, b: u64, e: &OffsetEntry) -> i32 {
    let diff = (a ^ shifted(b, e.shift)) & e.mask;
    e.ones - 2 * diff.count_ones() as i32
}

/// Pair-score numerator: -max |numerator| over the scored poses — every
/// translation of the unrotated pair plus the three centered quarter
/// rotations (sign symmetry over the four mate pairings).
pub(crate) fn pair_score_num(a: u64, b_rots: &[u64; 4], table: &OffsetTable) -> i32 {
    let mut worst = 0i32;
    for e in &table.entries {
        worst = worst.max(translation_num(a, b_rots[0], e).abs());
    }
    let centered = &table.entries[table.origin_index];
    for rot in &b_rots[1..] {
        worst = worst.max(translation_num(a, *rot, centered).abs());
    }
    -worst
}

/// Local-score numerator for a face against its own mate, plus the index of
/// the attaining pose: t·(2n-1)² + offset index over the scored poses —
/// t=0 at every offset except the origin, t=1..3 at the origin only —
/// matching the scan order of the general path (offsets, then rotations).
/// Uses score(a, mate(a), pose) = -score(a, a, pose), so only the face's own
/// boards are needed.
pub(crate) fn local_score_num(a_rots: &[u64; 4], table: &OffsetTable) -> (i32, usize) {
    let mut best = i32::MIN;
    let mut arg = 0usize;
    for (idx, e) in table.entries.iter().enumerate() {
        if idx == table.origin_index {
            continue;
        }
        let num = translation_num(a_rots[0], a_rots[0], e);
        if num > best {
            best = num;
            arg = idx;
        }
    }
    let centered = &table.entries[table.origin_index];
    for (t, rot) in a_rots.iter().enumerate().skip(1) {
        let num = translation_num(a_rots[0], *rot, centered);
        if num > best {
            best = num;
            arg = t * table.entries.len() + table.origin_index;
        }
    }
    (-best, arg)
}
