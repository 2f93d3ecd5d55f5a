use crate::encoding::Encoding;
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::score::quarter_rotation_score;
use std::io::Write;

/// Default cell-replication factor for the discretized rotation path
/// (order 8 becomes an 80x80 grid).
pub const DEFAULT_UPSAMPLE: u32 = 10;

/// Score of `a` against `b` rotated by `theta_deg` about the face centre.
///
/// Angles that are exact quarter turns delegate to the lattice path and are
/// exact. Everything else runs the discretized path: both grids are
/// upsampled by cell replication, `b`'s grid is rotated by inverse-mapped
/// nearest-neighbour sampling, a 3x3 box filter smooths the rotated grid
/// (cells outside the rotated footprint contribute 0 to the window), and
/// the smoothed grid multiplies `a`'s unsmoothed grid, normalized by
/// (N·upsample)². The result is still an exact rational: an integer
/// numerator over 9·(N·upsample)².
pub fn arbitrary_rotation_score(
    a: &Encoding,
    b: &Encoding,
    theta_deg: f64,
    upsample: u32,
) -> Result<Rational> {
    if a.order() != b.order() {
        return Err(Error::OrderMismatch { left: a.order(), right: b.order() });
    }
    if !theta_deg.is_finite() {
        return Err(Error::Validation("rotation angle must be finite".into()));
    }
    if upsample == 0 {
        return Err(Error::Validation("upsample factor must be at least 1".into()));
    }
    let rem = theta_deg.rem_euclid(90.0);
    if rem == 0.0 {
        let turns = (theta_deg.rem_euclid(360.0) / 90.0) as u8;
        return quarter_rotation_score(a, b, turns);
    }
    discretized_rotation_score(a, b, theta_deg, upsample)
}

/// Upsamples by pure cell replication; values stay ±1.
fn upsampled(e: &Encoding, u: usize) -> Vec<i8> {
    let n = e.order();
    let s = n * u;
    let mut grid = vec![0i8; s * s];
    for i in 0..s {
        for j in 0..s {
            grid[i * s + j] = e.get(i / u, j / u);
        }
    }
    grid
}

pub(crate) fn discretized_rotation_score(
    a: &Encoding,
    b: &Encoding,
    theta_deg: f64,
    upsample: u32,
) -> Result<Rational> {
    let n = a.order();
    let u = upsample as usize;
    let s = n * u;
    let a_up = upsampled(a, u);
    let b_up = upsampled(b, u);

    // Inverse mapping: each destination cell centre is carried back through
    // R(-theta) about the grid centre and sampled nearest-neighbour.
    // Out-of-footprint destinations stay 0.
    let c = s as f64 / 2.0;
    let rad = theta_deg.to_radians();
    let (sin, cos) = rad.sin_cos();
    let mut rot = vec![0i8; s * s];
    for i in 0..s {
        let y = i as f64 + 0.5 - c;
        for j in 0..s {
            let x = j as f64 + 0.5 - c;
            let sx = cos * x + sin * y;
            let sy = -sin * x + cos * y;
            let col = (c + sx).floor();
            let row = (c + sy).floor();
            if row >= 0.0 && row < s as f64 && col >= 0.0 && col < s as f64 {
                rot[i * s + j] = b_up[row as usize * s + col as usize];
            }
        }
    }

    // 3x3 box filter over the rotated grid; the conceptual cell value is
    // window_sum / 9, folded into the denominator below.
    let mut num = 0i64;
    for i in 0..s {
        for j in 0..s {
            let mut window = 0i64;
            for di in -1i64..=1 {
                let ii = i as i64 + di;
                if ii < 0 || ii >= s as i64 {
                    continue;
                }
                for dj in -1i64..=1 {
                    let jj = j as i64 + dj;
                    if jj < 0 || jj >= s as i64 {
                        continue;
                    }
                    window += rot[ii as usize * s + jj as usize] as i64;
                }
            }
            num += a_up[i * s + j] as i64 * window;
        }
    }
    let den = 9 * (s as i64) * (s as i64);
    Ok(Rational::new(num, den))
}

/// Rotation profile of `a` against `b` at the standard sample angles:
/// -180° to +180° in 10° steps (37 samples).
#[derive(Debug, Clone, PartialEq)]
pub struct RotationProfile {
    pub theta_deg: Vec<f64>,
    pub scores: Vec<Rational>,
    pub upsample: u32,
}

impl RotationProfile {
    /// CSV rows `theta_deg,score_float`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "theta_deg,score_float")?;
        for (t, s) in self.theta_deg.iter().zip(&self.scores) {
            writeln!(w, "{t},{}", crate::rational::to_f64(*s))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("in-memory write");
        String::from_utf8(out).expect("csv is utf-8")
    }
}

pub fn rotation_profile(a: &Encoding, b: &Encoding, upsample: u32) -> Result<RotationProfile> {
    let thetas: Vec<f64> = (-18..=18).map(|k| k as f64 * 10.0).collect();
    rotation_profile_at(a, b, &thetas, upsample)
}

pub fn rotation_profile_at(
    a: &Encoding,
    b: &Encoding,
    thetas: &[f64],
    upsample: u32,
) -> Result<RotationProfile> {
    let scores = thetas
        .iter()
        .map(|&t| arbitrary_rotation_score(a, b, t, upsample))
        .collect::<Result<Vec<_>>>()?;
    Ok(RotationProfile {
        theta_deg: thetas.to_vec(),
        scores,
        upsample,
    })
}
