use crate::encoding::Encoding;
use crate::error::{Error, Result};
use crate::rational::{serde_ratio, Rational};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One face-pair placement on the exact lattice path. The scored pose set is
/// every pixel offset of the unrotated pair plus the three centered quarter
/// rotations; rotation composed with translation is not a scored pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Configuration {
    /// Second face shifted by (dx, dy) pixels, unrotated; cell (i, j) of the
    /// first face meets cell (i + dy, j + dx) of the second.
    Translation { dx: i32, dy: i32 },
    /// Second face rotated about its centre by `turns` quarter turns, aligned.
    QuarterRotation { turns: u8 },
}

/// Cross-correlation of two faces over all (2N-1)² pixel offsets.
///
/// Values are stored as integer numerators over N²; non-overlapping cells
/// contribute nothing. The (0, 0) entry is the aligned score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationMap {
    order: usize,
    nums: Vec<i64>,
}

impl CorrelationMap {
    fn index(&self, dx: i32, dy: i32) -> usize {
        let n = self.order as i32;
        debug_assert!(dx.abs() < n && dy.abs() < n);
        let side = 2 * n - 1;
        ((dy + n - 1) * side + (dx + n - 1)) as usize
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Integer numerator at (dx, dy); the score is this over N².
    pub fn numerator(&self, dx: i32, dy: i32) -> i64 {
        self.nums[self.index(dx, dy)]
    }

    pub fn denominator(&self) -> i64 {
        (self.order * self.order) as i64
    }

    pub fn score(&self, dx: i32, dy: i32) -> Rational {
        Rational::new(self.numerator(dx, dy), self.denominator())
    }

    /// All offsets in scan order: dy outer, dx inner, both ascending.
    pub fn iter(&self) -> impl Iterator<Item = (i32, i32, i64)> + '_ {
        let n = self.order as i32;
        (-(n - 1)..n).flat_map(move |dy| {
            (-(n - 1)..n).map(move |dx| (dx, dy, self.numerator(dx, dy)))
        })
    }

    /// Most negative entry outside the origin, first hit in scan order wins.
    /// Returns the numerator and its offset. Order 1 has no such entry.
    pub fn min_excluding_origin(&self) -> Option<(i64, (i32, i32))> {
        let mut best: Option<(i64, (i32, i32))> = None;
        for (dx, dy, num) in self.iter() {
            if (dx, dy) == (0, 0) {
                continue;
            }
            if best.is_none_or(|(b, _)| num < b) {
                best = Some((num, (dx, dy)));
            }
        }
        best
    }

    /// CSV rows `dx,dy,score_num,score_den,score_float` in scan order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "dx,dy,score_num,score_den,score_float")?;
        let den = self.denominator();
        for (dx, dy, num) in self.iter() {
            writeln!(w, "{dx},{dy},{num},{den},{}", num as f64 / den as f64)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("in-memory write");
        String::from_utf8(out).expect("csv is utf-8")
    }
}

fn check_orders(a: &Encoding, b: &Encoding) -> Result<usize> {
    if a.order() != b.order() {
        return Err(Error::OrderMismatch { left: a.order(), right: b.order() });
    }
    Ok(a.order())
}

pub(crate) fn translation_numerator(a: &Encoding, b: &Encoding, dx: i32, dy: i32) -> i64 {
    let n = a.order() as i32;
    let i_range = (-dy).max(0)..(n - dy).min(n);
    let mut sum = 0i64;
    for i in i_range {
        let j0 = (-dx).max(0);
        let j1 = (n - dx).min(n);
        for j in j0..j1 {
            let av = a.get(i as usize, j as usize) as i64;
            let bv = b.get((i + dy) as usize, (j + dx) as usize) as i64;
            sum += av * bv;
        }
    }
    sum
}

/// Normalized elementwise product of two aligned faces, in [-1, +1].
/// -1 is full attraction (exact mates), +1 full repulsion, 0 agnostic.
pub fn aligned_score(a: &Encoding, b: &Encoding) -> Result<Rational> {
    let n = check_orders(a, b)?;
    let sum: i64 = a
        .cells()
        .iter()
        .zip(b.cells())
        .map(|(&x, &y)| x as i64 * y as i64)
        .sum();
    Ok(Rational::new(sum, (n * n) as i64))
}

/// Cross-correlation over every offset pair; value at (0,0) equals the
/// aligned score.
pub fn translation_map(a: &Encoding, b: &Encoding) -> Result<CorrelationMap> {
    let n = check_orders(a, b)? as i32;
    let side = (2 * n - 1) as usize;
    let mut nums = Vec::with_capacity(side * side);
    for dy in -(n - 1)..n {
        for dx in -(n - 1)..n {
            nums.push(translation_numerator(a, b, dx, dy));
        }
    }
    Ok(CorrelationMap { order: n as usize, nums })
}

/// Aligned score of `a` against `b` rotated by `turns` quarter turns about
/// its centre. Exact lattice path, no resampling.
pub fn quarter_rotation_score(a: &Encoding, b: &Encoding, turns: u8) -> Result<Rational> {
    check_orders(a, b)?;
    aligned_score(a, &b.rotated_quarter(turns))
}

/// Worst attraction of a face toward its own mate over every disallowed
/// configuration, with the placement that attains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    #[serde(with = "serde_ratio")]
    pub value: Rational,
    pub config: Configuration,
}

/// S_L: minimum score between `e` and mate(e) over the scored poses — every
/// pixel offset except the intended (0, 0) mating pose, plus the three
/// centered quarter rotations.
pub fn local_score(e: &Encoding) -> ScoreReport {
    let mate = e.mate();
    let den = ((e.order() * e.order()) as i64).max(1);
    let mut best_num = i64::MAX;
    let mut config = Configuration::Translation { dx: 0, dy: 0 };
    let map = translation_map(e, &mate).expect("same order");
    for (dx, dy, num) in map.iter() {
        if (dx, dy) == (0, 0) {
            continue;
        }
        if num < best_num {
            best_num = num;
            config = Configuration::Translation { dx, dy };
        }
    }
    for turns in 1..4u8 {
        let num = translation_numerator(e, &mate.rotated_quarter(turns), 0, 0);
        if num < best_num {
            best_num = num;
            config = Configuration::QuarterRotation { turns };
        }
    }
    ScoreReport { value: Rational::new(best_num, den), config }
}

/// Pairwise agnosticism report: the score, the placement attaining it, and
/// whether the worst pairing flips one face to its mate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    #[serde(with = "serde_ratio")]
    pub score: Rational,
    pub config: Configuration,
    /// True when the worst attraction pairs one face with the other's mate.
    pub mate_flipped: bool,
}

/// S_G for one pair: the worst attraction over all four pairings
/// {A, A'} x {B, B'} and every scored pose (all pixel offsets plus the three
/// centered quarter rotations).
///
/// Since (-A)⊙B = -(A⊙B) and negation commutes with rotation, the four
/// pairings collapse to -max |score(A, B at pose)|; that symmetry is used
/// here instead of scoring each pairing.
pub fn pair_score(a: &Encoding, b: &Encoding) -> Result<Rational> {
    Ok(pair_report(a, b)?.score)
}

pub fn pair_report(a: &Encoding, b: &Encoding) -> Result<PairReport> {
    let n = check_orders(a, b)?;
    let den = ((n * n) as i64).max(1);
    let mut worst_num = -1i64;
    let mut config = Configuration::Translation { dx: 0, dy: 0 };
    let mut signed_at_worst = 0i64;
    let map = translation_map(a, b)?;
    for (dx, dy, num) in map.iter() {
        if num.abs() > worst_num {
            worst_num = num.abs();
            signed_at_worst = num;
            config = Configuration::Translation { dx, dy };
        }
    }
    for turns in 1..4u8 {
        let num = translation_numerator(a, &b.rotated_quarter(turns), 0, 0);
        if num.abs() > worst_num {
            worst_num = num.abs();
            signed_at_worst = num;
            config = Configuration::QuarterRotation { turns };
        }
    }
    Ok(PairReport {
        score: Rational::new(-worst_num, den),
        config,
        mate_flipped: signed_at_worst > 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{checkerboard, sylvester};
    use crate::rational::ratio;

    #[test]
    fn aligned_identities() {
        let h = sylvester(3).unwrap();
        assert_eq!(aligned_score(&h, &h).unwrap(), ratio(1, 1));
        assert_eq!(aligned_score(&h, &h.mate()).unwrap(), ratio(-1, 1));
    }

    #[test]
    fn order_mismatch_is_rejected() {
        let a = sylvester(2).unwrap();
        let b = sylvester(3).unwrap();
        assert!(matches!(
            aligned_score(&a, &b),
            Err(Error::OrderMismatch { left: 4, right: 8 })
        ));
        assert!(translation_map(&a, &b).is_err());
        assert!(quarter_rotation_score(&a, &b, 1).is_err());
        assert!(pair_score(&a, &b).is_err());
    }

    #[test]
    fn correlation_map_origin_is_aligned_score() {
        let h = sylvester(2).unwrap();
        let m = h.mate();
        let map = translation_map(&h, &m).unwrap();
        assert_eq!(map.numerator(0, 0), -16);
        assert_eq!(map.score(0, 0), ratio(-1, 1));
    }

    #[test]
    fn hadamard_axis_offsets_are_agnostic() {
        // Column orthogonality zeroes every pure-X offset; row orthogonality
        // every pure-Y offset.
        let h = sylvester(3).unwrap();
        let map = translation_map(&h, &h.mate()).unwrap();
        for d in -7..8i32 {
            if d != 0 {
                assert_eq!(map.numerator(d, 0), 0, "dx={d}");
                assert_eq!(map.numerator(0, d), 0, "dy={d}");
            }
        }
    }

    #[test]
    fn checkerboard_hand_sums() {
        // cb(i,j)·(-cb(i+dy,j+dx)) = -(-1)^(dx+dy), so each overlap cell
        // contributes the same sign and the numerator is ±overlap.
        let cb = checkerboard(8).unwrap();
        let map = translation_map(&cb, &cb.mate()).unwrap();
        assert_eq!(map.score(1, 0), ratio(56, 64));
        assert_eq!(map.score(1, 1), ratio(-49, 64));
        assert_eq!(map.score(-1, -1), ratio(-49, 64));
        assert_eq!(map.score(2, 1), ratio(42, 64));
        assert_eq!(map.score(7, 7), ratio(-1, 64));
    }

    #[test]
    fn checkerboard_local_score() {
        // rot180(cb) = cb, so the mate at a half turn aligns perfectly:
        // the rotation branch drags S_L all the way to −1, well past the
        // best translation (offset (±1,±1), 49 attracting overlap cells).
        let cb = checkerboard(8).unwrap();
        let report = local_score(&cb);
        assert_eq!(report.value, ratio(-1, 1));
        assert!(report.value <= ratio(-49, 64));
        assert!(matches!(report.config, Configuration::QuarterRotation { turns: 2 }));
        let translations_only = translation_map(&cb, &cb.mate()).unwrap();
        let (num, (dx, dy)) = translations_only.min_excluding_origin().unwrap();
        assert_eq!(num, -49);
        assert_eq!((dx.abs(), dy.abs()), (1, 1));
    }

    #[test]
    fn sylvester_quarter_rotations_vs_mate_are_agnostic() {
        // Symmetric Hadamard of even order: Tr(J·A·A) = N·Tr(J) = 0.
        for k in 1..=4 {
            let h = sylvester(k).unwrap();
            let m = h.mate();
            for turns in 1..=3 {
                assert_eq!(
                    quarter_rotation_score(&h, &m, turns).unwrap(),
                    ratio(0, 1),
                    "k={k} turns={turns}"
                );
            }
        }
    }

    #[test]
    fn checkerboard_quarter_rotation_is_self_mate() {
        // rot90(cb) = -cb, so rotating the mate reproduces cb itself.
        let cb = checkerboard(8).unwrap();
        let m = cb.mate();
        assert_eq!(quarter_rotation_score(&cb, &m, 1).unwrap(), ratio(1, 1));
        assert_eq!(quarter_rotation_score(&cb, &m, 2).unwrap(), ratio(-1, 1));
        assert_eq!(quarter_rotation_score(&cb, &m, 3).unwrap(), ratio(1, 1));
    }

    #[test]
    fn pair_score_self_is_full_attraction() {
        let h = sylvester(3).unwrap();
        let report = pair_report(&h, &h).unwrap();
        assert_eq!(report.score, ratio(-1, 1));
        assert_eq!(report.config, Configuration::Translation { dx: 0, dy: 0 });
        // A at (0,0) scores +1 against itself; the worst pairing mates it.
        assert!(report.mate_flipped);
        assert_eq!(pair_score(&h, &h.mate()).unwrap(), ratio(-1, 1));
    }

    #[test]
    fn pair_score_equals_four_pairing_minimum() {
        // Direct check of the sign symmetry on small random pairs: score all
        // four pairings over the scored poses instead of collapsing.
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = Encoding::random(4, &mut rng);
            let b = Encoding::random(4, &mut rng);
            let fast = pair_score(&a, &b).unwrap();
            let mut worst = ratio(1, 1);
            for (x, y) in [
                (a.clone(), b.clone()),
                (a.clone(), b.mate()),
                (a.mate(), b.clone()),
                (a.mate(), b.mate()),
            ] {
                let map = translation_map(&x, &y).unwrap();
                for (_, _, num) in map.iter() {
                    worst = worst.min(Rational::new(num, map.denominator()));
                }
                for turns in 1..4 {
                    worst = worst.min(quarter_rotation_score(&x, &y, turns).unwrap());
                }
            }
            assert_eq!(fast, worst);
        }
    }

    fn score_at(a: &Encoding, b: &Encoding, c: Configuration) -> Rational {
        let (turns, dx, dy) = match c {
            Configuration::Translation { dx, dy } => (0, dx, dy),
            Configuration::QuarterRotation { turns } => (turns, 0, 0),
        };
        translation_map(a, &b.rotated_quarter(turns)).unwrap().score(dx, dy)
    }

    #[test]
    fn reported_configs_recompute_to_reported_values() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let a = Encoding::random(5, &mut rng);
            let r = local_score(&a);
            assert_eq!(score_at(&a, &a.mate(), r.config), r.value);
            let b = Encoding::random(5, &mut rng);
            let p = pair_report(&a, &b).unwrap();
            let signed = score_at(&a, &b, p.config);
            let expect = if p.mate_flipped { -p.score } else { p.score };
            assert_eq!(signed, expect);
        }
    }

    #[test]
    fn local_score_order_one() {
        // No non-origin translations exist; the quarter rotations all score
        // -1 against the mate of a single cell.
        let e = Encoding::new(1, vec![1], None).unwrap();
        let report = local_score(&e);
        assert_eq!(report.value, ratio(-1, 1));
        assert_eq!(report.config, Configuration::QuarterRotation { turns: 1 });
    }

    #[test]
    fn csv_shape() {
        let h = sylvester(1).unwrap();
        let csv = translation_map(&h, &h.mate()).unwrap().to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "dx,dy,score_num,score_den,score_float");
        assert_eq!(lines.len(), 1 + 9);
        assert!(lines[1].starts_with("-1,-1,"));
        // Origin row carries the aligned score -4/4 = -1.
        assert!(lines.contains(&"0,0,-4,4,-1"));
    }
}
