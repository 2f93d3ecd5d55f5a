//! Naive reference implementations shared by the integration suites. Every
//! function here favors the most literal double-loop reading of the scoring
//! definitions over speed so the optimized kernels have an independent
//! yardstick.

// Each integration target compiles this module separately and uses a subset.
#![allow(dead_code)]

use magcode_core::encoding::Encoding;
use magcode_core::rational::{ratio, Rational};

/// Correlation numerator with `b` shifted by (dx, dy), cells outside the
/// overlap contributing nothing.
pub fn naive_translation_num(a: &Encoding, b: &Encoding, dx: i32, dy: i32) -> i64 {
    let n = a.order() as i32;
    let mut sum = 0i64;
    for i in 0..n {
        for j in 0..n {
            let (bi, bj) = (i + dy, j + dx);
            if bi >= 0 && bi < n && bj >= 0 && bj < n {
                let av = a.get(i as usize, j as usize) as i64;
                let bv = b.get(bi as usize, bj as usize) as i64;
                sum += av * bv;
            }
        }
    }
    sum
}

pub fn naive_score(a: &Encoding, b: &Encoding, dx: i32, dy: i32) -> Rational {
    let n2 = (a.order() * a.order()) as i64;
    ratio(naive_translation_num(a, b, dx, dy), n2)
}

/// Quarter rotation by literal index remapping, one turn at a time, in the
/// same positive sense as `Encoding::rotated_quarter`.
pub fn naive_rotate(e: &Encoding, turns: u8) -> Encoding {
    let n = e.order();
    let mut cells = e.cells().to_vec();
    for _ in 0..(turns % 4) {
        let prev = cells.clone();
        for i in 0..n {
            for j in 0..n {
                cells[i * n + j] = prev[(n - 1 - j) * n + i];
            }
        }
    }
    Encoding::new(n, cells, None).unwrap()
}

/// S_L: most attractive score of A against its mate over every non-mating
/// scored pose — all non-origin translations plus the three centered quarter
/// turns; rotation composed with translation is not scored.
pub fn naive_local_score(e: &Encoding) -> Rational {
    let n = e.order() as i32;
    let mate = e.mate();
    let mut best = ratio(1, 1);
    for dy in -(n - 1)..n {
        for dx in -(n - 1)..n {
            if dx == 0 && dy == 0 {
                continue;
            }
            best = best.min(naive_score(e, &mate, dx, dy));
        }
    }
    for turns in 1..4u8 {
        best = best.min(naive_score(e, &naive_rotate(&mate, turns), 0, 0));
    }
    best
}

/// S_G for one pair: most attractive score over every translation and
/// centered quarter turn of all four sign pairings (a/b with either mate).
/// Scores all four sign pairings pose by pose rather than using the
/// (-A)⊙B = -(A⊙B) collapse, to check that symmetry independently.
pub fn naive_pair_score(a: &Encoding, b: &Encoding) -> Rational {
    let n = a.order() as i32;
    let mut best = ratio(1, 1);
    for (left, right) in [
        (a.clone(), b.clone()),
        (a.clone(), b.mate()),
        (a.mate(), b.clone()),
        (a.mate(), b.mate()),
    ] {
        for dy in -(n - 1)..n {
            for dx in -(n - 1)..n {
                best = best.min(naive_score(&left, &right, dx, dy));
            }
        }
        for turns in 1..4u8 {
            best = best.min(naive_score(&left, &naive_rotate(&right, turns), 0, 0));
        }
    }
    best
}

/// All maximum cliques by power-set scan. `nbr[v]` is a bitmask of v's
/// neighbors; vertices beyond bit `n` must be zero.
pub fn powerset_max_cliques(n: usize, nbr: &[u32]) -> (usize, Vec<Vec<u32>>) {
    assert!(n <= 20, "power-set oracle is exponential");
    let mut best = 0usize;
    let mut found: Vec<Vec<u32>> = Vec::new();
    for set in 1u32..(1 << n) {
        let mut ok = true;
        let mut rest = set;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if set & !(nbr[v] | (1 << v)) != 0 {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let size = set.count_ones() as usize;
        if size > best {
            best = size;
            found.clear();
        }
        if size == best {
            let members = (0..n as u32).filter(|v| set & (1 << v) != 0).collect();
            found.push(members);
        }
    }
    found.sort();
    (best, found)
}
