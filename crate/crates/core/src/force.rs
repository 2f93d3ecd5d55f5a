//! Dimensionless scores to physical forces. Attraction maps linearly through
//! the face's peak pressure; repulsion is additionally damped by an empirical
//! scale factor. Selectivity math elsewhere stays in score space — the
//! scaling exists only at this physical boundary.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::encoding::Encoding;
use crate::error::{Error, Result};
use crate::rational::{to_f64, Rational};
use crate::score::translation_map;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaceSpec {
    pub side_mm: f64,
    pub peak_pressure_pa: f64,
    /// Repulsive forces are multiplied by this; attraction is untouched.
    pub repulsion_scale: f64,
}

impl Default for FaceSpec {
    fn default() -> Self {
        Self { side_mm: 25.0, peak_pressure_pa: 256.0, repulsion_scale: 0.09 }
    }
}

impl FaceSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
            Ok(())
        };
        positive("side_mm", self.side_mm)?;
        positive("peak_pressure_pa", self.peak_pressure_pa)?;
        positive("repulsion_scale", self.repulsion_scale)?;
        if self.repulsion_scale > 1.0 {
            return Err(Error::Validation(format!(
                "repulsion_scale must not exceed 1, got {}",
                self.repulsion_scale
            )));
        }
        Ok(())
    }

    /// Magnitude of the full-strength force: pressure × face area, in mN.
    pub fn peak_force_mn(&self) -> f64 {
        let side_m = self.side_mm / 1000.0;
        self.peak_pressure_pa * side_m * side_m * 1000.0
    }
}

/// Signed force in millinewtons; negative attracts, positive repels.
pub fn score_to_force_mn(score: Rational, spec: &FaceSpec) -> Result<f64> {
    spec.validate()?;
    if score < Rational::new(-1, 1) || score > Rational::new(1, 1) {
        return Err(Error::Validation(format!("score {score} outside [-1, 1]")));
    }
    let base = to_f64(score) * spec.peak_force_mn();
    Ok(if score > Rational::new(0, 1) { base * spec.repulsion_scale } else { base })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcePoint {
    pub dx: i32,
    pub dy: i32,
    pub force_mn: f64,
}

/// Forces sampled over a set of pixel offsets. Offsets are unique; order is
/// preserved from the source (scan order for predictions, file order for
/// measurements).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceProfile {
    points: Vec<ForcePoint>,
}

impl ForceProfile {
    pub fn new(points: Vec<ForcePoint>) -> Result<Self> {
        let mut seen = HashMap::new();
        for p in &points {
            if !p.force_mn.is_finite() {
                return Err(Error::Validation(format!(
                    "force at ({}, {}) is not finite",
                    p.dx, p.dy
                )));
            }
            if seen.insert((p.dx, p.dy), ()).is_some() {
                return Err(Error::Validation(format!(
                    "offset ({}, {}) appears more than once",
                    p.dx, p.dy
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[ForcePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Most negative force; this is the normalization reference.
    pub fn peak_attraction_mn(&self) -> Option<f64> {
        self.points
            .iter()
            .map(|p| p.force_mn)
            .filter(|f| *f < 0.0)
            .min_by(|a, b| a.partial_cmp(b).expect("finite forces"))
    }

    /// `dx,dy,force_mN` rows at 0.1 mN resolution.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "dx,dy,force_mN")?;
        for p in &self.points {
            writeln!(w, "{},{},{:.1}", p.dx, p.dy, p.force_mn)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Validation("measurement CSV is empty".into()))??;
        if header.trim_end() != "dx,dy,force_mN" {
            return Err(Error::Validation(format!(
                "expected header 'dx,dy,force_mN', got {header:?}"
            )));
        }
        let mut points = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| {
                Error::Validation(format!("measurement CSV line {}: {what}", lineno + 2))
            };
            let mut fields = line.split(',');
            let mut next = |name: &str| fields.next().ok_or_else(|| bad(name));
            let dx: i32 =
                next("missing dx")?.trim().parse().map_err(|_| bad("dx is not an integer"))?;
            let dy: i32 =
                next("missing dy")?.trim().parse().map_err(|_| bad("dy is not an integer"))?;
            let force: f64 = next("missing force_mN")?
                .trim()
                .parse()
                .map_err(|_| bad("force_mN is not a number"))?;
            if fields.next().is_some() {
                return Err(bad("too many fields"));
            }
            points.push(ForcePoint { dx, dy, force_mn: force });
        }
        Self::new(points)
    }
}

/// Translation scores of `a` against `b` mapped to forces at every offset.
pub fn predicted_profile(a: &Encoding, b: &Encoding, spec: &FaceSpec) -> Result<ForceProfile> {
    let map = translation_map(a, b)?;
    let mut points = Vec::new();
    for (dx, dy, _) in map.iter() {
        points.push(ForcePoint { dx, dy, force_mn: score_to_force_mn(map.score(dx, dy), spec)? });
    }
    ForceProfile::new(points)
}

/// Mean squared difference after normalizing each profile by its own peak
/// attraction. Requires identical offset sets.
pub fn compare_sse(left: &ForceProfile, right: &ForceProfile) -> Result<f64> {
    let left_map: HashMap<(i32, i32), f64> =
        left.points.iter().map(|p| ((p.dx, p.dy), p.force_mn)).collect();
    let right_map: HashMap<(i32, i32), f64> =
        right.points.iter().map(|p| ((p.dx, p.dy), p.force_mn)).collect();
    let mut missing_left: Vec<(i32, i32)> =
        right_map.keys().filter(|k| !left_map.contains_key(k)).copied().collect();
    let mut missing_right: Vec<(i32, i32)> =
        left_map.keys().filter(|k| !right_map.contains_key(k)).copied().collect();
    if !missing_left.is_empty() || !missing_right.is_empty() {
        missing_left.sort();
        missing_right.sort();
        return Err(Error::AxisMismatch { missing_left, missing_right });
    }
    if left.is_empty() {
        return Err(Error::Validation("cannot compare empty profiles".into()));
    }
    let norm = |p: &ForceProfile, name: &str| -> Result<f64> {
        let peak = p.peak_attraction_mn().ok_or_else(|| {
            Error::Validation(format!("{name} profile has no attractive peak to normalize by"))
        })?;
        Ok(peak.abs())
    };
    let left_peak = norm(left, "left")?;
    let right_peak = norm(right, "right")?;
    let mut sum = 0.0;
    for p in &left.points {
        let rv = right_map[&(p.dx, p.dy)];
        let d = p.force_mn / left_peak - rv / right_peak;
        sum += d * d;
    }
    Ok(sum / left.points.len() as f64)
}
