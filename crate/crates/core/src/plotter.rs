//! Stamping G-code for a dual-magnet plotter head. Pixel (i, j) of an
//! encoding maps to one plunge: +1 pixels stamp at the face grid, −1 pixels
//! at a fixed X offset where the oppositely polarized magnet sits. The parser
//! reverses the mapping for round-trip verification.
//!
//! Dialect: G21/G90 declarations, G0/G1 moves with explicit feeds, G4 dwell
//! in seconds, `;` comments, LF endings, coordinates at 3 decimals.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::Encoding;
use crate::error::{Error, Result};

/// Plunge coordinates may drift this far (mm) from a pixel center and still
/// decode.
pub const PIXEL_SNAP_MM: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub pixel_pitch_mm: f64,
    /// X distance from the +1 magnet to the −1 magnet.
    pub dual_magnet_offset_mm: f64,
    pub plunge_z_mm: f64,
    pub travel_z_mm: f64,
    pub feed_xy_mm_min: f64,
    pub feed_z_mm_min: f64,
    /// Center of pixel (0, 0).
    pub face_origin_mm: (f64, f64),
    /// Machine travel limits in X and Y.
    pub travel_extent_mm: (f64, f64),
    pub dwell_s: f64,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self {
            pixel_pitch_mm: 3.125,
            dual_magnet_offset_mm: 40.0,
            plunge_z_mm: 0.0,
            travel_z_mm: 5.0,
            feed_xy_mm_min: 3000.0,
            feed_z_mm_min: 600.0,
            face_origin_mm: (20.0, 20.0),
            travel_extent_mm: (230.0, 250.0),
            dwell_s: 0.2,
        }
    }
}

impl ToolConfig {
    pub fn validate(&self, order: usize) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
            Ok(())
        };
        positive("pixel_pitch_mm", self.pixel_pitch_mm)?;
        positive("dual_magnet_offset_mm", self.dual_magnet_offset_mm)?;
        positive("feed_xy_mm_min", self.feed_xy_mm_min)?;
        positive("feed_z_mm_min", self.feed_z_mm_min)?;
        positive("travel_extent_mm.x", self.travel_extent_mm.0)?;
        positive("travel_extent_mm.y", self.travel_extent_mm.1)?;
        for (name, v) in [
            ("plunge_z_mm", self.plunge_z_mm),
            ("travel_z_mm", self.travel_z_mm),
            ("dwell_s", self.dwell_s),
            ("face_origin_mm.x", self.face_origin_mm.0),
            ("face_origin_mm.y", self.face_origin_mm.1),
        ] {
            if !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be finite")));
            }
        }
        if self.dwell_s < 0.0 {
            return Err(Error::Validation("dwell_s must not be negative".into()));
        }
        if self.travel_z_mm <= self.plunge_z_mm {
            return Err(Error::Validation(format!(
                "travel_z_mm ({}) must exceed plunge_z_mm ({})",
                self.travel_z_mm, self.plunge_z_mm
            )));
        }
        let clearance = order as f64 * self.pixel_pitch_mm;
        if self.dual_magnet_offset_mm <= clearance {
            return Err(Error::Validation(format!(
                "dual_magnet_offset_mm ({}) must exceed order × pitch ({clearance}) so the idle \
                 magnet clears the face",
                self.dual_magnet_offset_mm
            )));
        }
        if self.face_origin_mm.0 < 0.0 || self.face_origin_mm.1 < 0.0 {
            return Err(Error::Envelope("face origin lies outside the machine envelope".into()));
        }
        let span = (order - 1) as f64 * self.pixel_pitch_mm;
        let max_x = self.face_origin_mm.0 + span + self.dual_magnet_offset_mm;
        let max_y = self.face_origin_mm.1 + span;
        if max_x > self.travel_extent_mm.0 || max_y > self.travel_extent_mm.1 {
            return Err(Error::Envelope(format!(
                "face needs X {max_x:.3} mm, Y {max_y:.3} mm but travel is {} × {} mm",
                self.travel_extent_mm.0, self.travel_extent_mm.1
            )));
        }
        Ok(())
    }

    /// First 16 hex chars of the SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn stamp_position(&self, row: usize, col: usize, polarity: i8) -> (f64, f64) {
        let bank = if polarity < 0 { self.dual_magnet_offset_mm } else { 0.0 };
        (
            self.face_origin_mm.0 + col as f64 * self.pixel_pitch_mm + bank,
            self.face_origin_mm.1 + row as f64 * self.pixel_pitch_mm,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GCommand {
    UnitsMm,
    Absolute,
    Move {
        x: Option<f64>,
        y: Option<f64>,
        z: Option<f64>,
        feed: Option<f64>,
        rapid: bool,
    },
    Dwell {
        seconds: f64,
    },
}

impl GCommand {
    fn to_text(self) -> String {
        match self {
            GCommand::UnitsMm => "G21".into(),
            GCommand::Absolute => "G90".into(),
            GCommand::Move { x, y, z, feed, rapid } => {
                let mut s = String::from(if rapid { "G0" } else { "G1" });
                for (letter, v) in [("X", x), ("Y", y), ("Z", z)] {
                    if let Some(v) = v {
                        s.push_str(&format!(" {letter}{v:.3}"));
                    }
                }
                if let Some(f) = feed {
                    s.push_str(&format!(" F{f}"));
                }
                s
            }
            GCommand::Dwell { seconds } => format!("G4 P{seconds}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GCodeProgram {
    pub label: Option<String>,
    pub order: Option<usize>,
    pub config_hash: Option<String>,
    pub commands: Vec<GCommand>,
    pub estimated_seconds: f64,
}

impl GCodeProgram {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(label) = &self.label {
            out.push_str(&format!("; face: {label}\n"));
        }
        if let Some(order) = self.order {
            out.push_str(&format!("; order: {order}\n"));
        }
        if let Some(hash) = &self.config_hash {
            out.push_str(&format!("; config: {hash}\n"));
        }
        for c in &self.commands {
            out.push_str(&c.to_text());
            out.push('\n');
        }
        out
    }

    /// Parses the emitter's dialect. Unknown commands are geometry errors;
    /// unrecognized comment lines are ignored.
    pub fn parse(text: &str) -> Result<GCodeProgram> {
        let mut program = GCodeProgram {
            label: None,
            order: None,
            config_hash: None,
            commands: Vec::new(),
            estimated_seconds: 0.0,
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r').trim();
            let bad = |what: String| Error::Geometry(format!("line {}: {what}", idx + 1));
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix(';') {
                let comment = comment.trim();
                if let Some(v) = comment.strip_prefix("face:") {
                    program.label = Some(v.trim().to_string());
                } else if let Some(v) = comment.strip_prefix("order:") {
                    let order = v
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad order header {:?}", v.trim())))?;
                    program.order = Some(order);
                } else if let Some(v) = comment.strip_prefix("config:") {
                    program.config_hash = Some(v.trim().to_string());
                }
                continue;
            }
            let mut words = line.split_whitespace();
            let head = words.next().expect("non-empty line");
            let command = match head {
                "G21" => GCommand::UnitsMm,
                "G90" => GCommand::Absolute,
                "G0" | "G1" => {
                    let (mut x, mut y, mut z, mut feed) = (None, None, None, None);
                    for w in words.by_ref() {
                        let (letter, value) = w.split_at(1);
                        let value: f64 = value
                            .parse()
                            .map_err(|_| bad(format!("bad coordinate word {w:?}")))?;
                        if !value.is_finite() {
                            return Err(bad(format!("non-finite coordinate {w:?}")));
                        }
                        match letter {
                            "X" => x = Some(value),
                            "Y" => y = Some(value),
                            "Z" => z = Some(value),
                            "F" => feed = Some(value),
                            _ => return Err(bad(format!("unsupported word {w:?}"))),
                        }
                    }
                    GCommand::Move { x, y, z, feed, rapid: head == "G0" }
                }
                "G4" => {
                    let w = words.next().ok_or_else(|| bad("G4 without P word".into()))?;
                    let seconds = w
                        .strip_prefix('P')
                        .and_then(|v| v.parse::<f64>().ok())
                        .filter(|v| v.is_finite() && *v >= 0.0)
                        .ok_or_else(|| bad(format!("bad dwell word {w:?}")))?;
                    GCommand::Dwell { seconds }
                }
                other => return Err(bad(format!("unsupported command {other:?}"))),
            };
            if let Some(extra) = words.next() {
                return Err(bad(format!("unexpected trailing word {extra:?}")));
            }
            program.commands.push(command);
        }
        program.estimated_seconds = job_estimate(&program);
        Ok(program)
    }

    /// Number of pure-Z downward moves.
    pub fn plunge_count(&self) -> usize {
        collect_plunges(self).map(|p| p.len()).unwrap_or(0)
    }
}

/// Stamp coordinates in program order: every pure-Z move that descends.
fn collect_plunges(p: &GCodeProgram) -> Result<Vec<(f64, f64, f64)>> {
    let mut plunges = Vec::new();
    let (mut x, mut y, mut z): (Option<f64>, Option<f64>, Option<f64>) = (None, None, None);
    for c in &p.commands {
        let GCommand::Move { x: nx, y: ny, z: nz, .. } = c else { continue };
        let descends = match (nz, z) {
            (Some(new), Some(old)) => *new < old,
            _ => false,
        };
        if descends {
            if nx.is_some() || ny.is_some() {
                return Err(Error::Geometry(
                    "diagonal plunge: Z descends while X/Y move".into(),
                ));
            }
            match (x, y) {
                (Some(px), Some(py)) => plunges.push((px, py, nz.unwrap())),
                _ => return Err(Error::Geometry("plunge before any X/Y positioning".into())),
            }
        }
        if let Some(v) = nx {
            x = Some(*v);
        }
        if let Some(v) = ny {
            y = Some(*v);
        }
        if let Some(v) = nz {
            z = Some(*v);
        }
    }
    Ok(plunges)
}

pub fn encoding_to_gcode(e: &Encoding, cfg: &ToolConfig) -> Result<GCodeProgram> {
    let n = e.order();
    cfg.validate(n)?;
    if let Some(label) = e.label() {
        if label.chars().any(|c| c.is_control()) {
            return Err(Error::Validation(
                "encoding label contains control characters, refusing to embed in header".into(),
            ));
        }
    }
    let mut commands = vec![
        GCommand::UnitsMm,
        GCommand::Absolute,
        GCommand::Move {
            x: None,
            y: None,
            z: Some(cfg.travel_z_mm),
            feed: Some(cfg.feed_z_mm_min),
            rapid: false,
        },
    ];
    for i in 0..n {
        let cols: Vec<usize> =
            if i % 2 == 0 { (0..n).collect() } else { (0..n).rev().collect() };
        for j in cols {
            let (px, py) = cfg.stamp_position(i, j, e.get(i, j));
            commands.push(GCommand::Move {
                x: Some(px),
                y: Some(py),
                z: None,
                feed: Some(cfg.feed_xy_mm_min),
                rapid: false,
            });
            commands.push(GCommand::Move {
                x: None,
                y: None,
                z: Some(cfg.plunge_z_mm),
                feed: Some(cfg.feed_z_mm_min),
                rapid: false,
            });
            commands.push(GCommand::Dwell { seconds: cfg.dwell_s });
            commands.push(GCommand::Move {
                x: None,
                y: None,
                z: Some(cfg.travel_z_mm),
                feed: Some(cfg.feed_z_mm_min),
                rapid: false,
            });
        }
    }
    let mut program = GCodeProgram {
        label: e.label().map(str::to_string),
        order: Some(n),
        config_hash: Some(cfg.config_hash()),
        commands,
        estimated_seconds: 0.0,
    };
    program.estimated_seconds = job_estimate(&program);
    Ok(program)
}

pub fn gcode_to_encoding(p: &GCodeProgram, cfg: &ToolConfig) -> Result<Encoding> {
    let n = p
        .order
        .ok_or_else(|| Error::Geometry("program lacks the '; order:' header".into()))?;
    if n == 0 {
        return Err(Error::Geometry("order header must be positive".into()));
    }
    cfg.validate(n)?;
    if let Some(hash) = &p.config_hash {
        let expected = cfg.config_hash();
        if *hash != expected {
            return Err(Error::Validation(format!(
                "program was emitted for config {hash}, this config hashes to {expected}"
            )));
        }
    }
    let plunges = collect_plunges(p)?;
    let mut cells = vec![0i8; n * n];
    let mut stamped = vec![false; n * n];
    for (px, py, pz) in plunges {
        if (pz - cfg.plunge_z_mm).abs() > PIXEL_SNAP_MM {
            return Err(Error::Geometry(format!(
                "plunge bottoms at Z {pz:.3} but the config stamps at {:.3}",
                cfg.plunge_z_mm
            )));
        }
        let row = snap_axis(py - cfg.face_origin_mm.1, cfg.pixel_pitch_mm, n);
        let rel_x = px - cfg.face_origin_mm.0;
        let (col, polarity) = match snap_axis(rel_x, cfg.pixel_pitch_mm, n) {
            Some(col) => (Some(col), 1i8),
            None => (snap_axis(rel_x - cfg.dual_magnet_offset_mm, cfg.pixel_pitch_mm, n), -1i8),
        };
        let (Some(row), Some(col)) = (row, col) else {
            return Err(Error::Geometry(format!(
                "plunge at ({px:.3}, {py:.3}) maps to no pixel center within {PIXEL_SNAP_MM} mm"
            )));
        };
        let idx = row * n + col;
        if stamped[idx] {
            return Err(Error::DuplicateStamp { row, col });
        }
        stamped[idx] = true;
        cells[idx] = polarity;
    }
    let missing = stamped.iter().filter(|&&s| !s).count();
    if missing > 0 {
        return Err(Error::Geometry(format!(
            "program stamps {} of {} pixels",
            n * n - missing,
            n * n
        )));
    }
    Encoding::new(n, cells, p.label.clone())
}

fn snap_axis(rel_mm: f64, pitch_mm: f64, n: usize) -> Option<usize> {
    let grid = (rel_mm / pitch_mm).round();
    if grid < 0.0 || grid >= n as f64 {
        return None;
    }
    if (rel_mm - grid * pitch_mm).abs() > PIXEL_SNAP_MM {
        return None;
    }
    Some(grid as usize)
}

/// Seconds to run the program: distance over the prevailing feed for every
/// move, plus dwells. Moves before any position or feed is known cost zero.
pub fn job_estimate(p: &GCodeProgram) -> f64 {
    let mut t = 0.0;
    let (mut x, mut y, mut z): (Option<f64>, Option<f64>, Option<f64>) = (None, None, None);
    let mut feed: Option<f64> = None;
    for c in &p.commands {
        match c {
            GCommand::Move { x: nx, y: ny, z: nz, feed: f, .. } => {
                if let Some(f) = f {
                    if *f > 0.0 {
                        feed = Some(*f);
                    }
                }
                let mut dist_sq = 0.0;
                for (old, new) in [(x, nx), (y, ny), (z, nz)] {
                    if let (Some(old), Some(new)) = (old, new) {
                        dist_sq += (new - old) * (new - old);
                    }
                }
                if dist_sq > 0.0 {
                    if let Some(feed) = feed {
                        t += dist_sq.sqrt() / feed * 60.0;
                    }
                }
                if let Some(v) = nx {
                    x = Some(*v);
                }
                if let Some(v) = ny {
                    y = Some(*v);
                }
                if let Some(v) = nz {
                    z = Some(*v);
                }
            }
            GCommand::Dwell { seconds } => t += seconds,
            _ => {}
        }
    }
    t
}
