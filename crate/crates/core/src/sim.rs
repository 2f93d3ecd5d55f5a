//! Monte Carlo self-assembly of eight magnet-faced cube modules into a
//! 2×2×2 meta-cube. Bonds are abstract face pairings, not rigid-body
//! placements: a contact trial samples a pose and bonds two free faces iff
//! their score beats the fluid threshold; an agitation trial re-tests one
//! standing bond against the current threshold, so bonds formed under a
//! different threshold can shake loose.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits;
use crate::encoding::Encoding;
use crate::error::{Error, Result};
use crate::parallel;
use crate::rational::{parse_rational, ratio, serde_ratio, Rational};
use crate::rotation::{arbitrary_rotation_score, DEFAULT_UPSAMPLE};
use crate::score;
use crate::search::{select_clique, SweepResult};

pub const MODULE_COUNT: usize = 8;
pub const FACES_PER_MODULE: usize = 6;
pub const FACE_COUNT: usize = MODULE_COUNT * FACES_PER_MODULE;
pub const EDGE_COUNT: usize = 12;

/// Module `m` sits at octree corner (m&1, m>>1&1, m>>2&1).
pub fn module_position(m: usize) -> (u8, u8, u8) {
    ((m & 1) as u8, ((m >> 1) & 1) as u8, ((m >> 2) & 1) as u8)
}

/// Face 2b points toward +axis b, face 2b+1 toward −axis b.
pub fn face_id(module: usize, face: usize) -> usize {
    module * FACES_PER_MODULE + face
}

pub fn face_of(id: usize) -> (usize, usize) {
    (id / FACES_PER_MODULE, id % FACES_PER_MODULE)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub lower: usize,
    pub upper: usize,
    pub axis: usize,
}

/// The 12 cube edges in canonical order: modules ascending, axes ascending.
pub fn octree_edges() -> [Edge; EDGE_COUNT] {
    let mut edges = Vec::with_capacity(EDGE_COUNT);
    for m in 0..MODULE_COUNT {
        for axis in 0..3 {
            if m & (1 << axis) == 0 {
                edges.push(Edge { lower: m, upper: m | (1 << axis), axis });
            }
        }
    }
    edges.try_into().expect("8 modules yield 12 octree edges")
}

/// Eight modules, 12 designated face pairs (design on the lower module's
/// +axis face, its mate opposite), 24 exterior faces left neutral. Neutral
/// faces score 0 against everything and therefore never bond.
#[derive(Clone, Debug)]
pub struct TargetAssembly {
    order: usize,
    edges: [Edge; EDGE_COUNT],
    face_edge: [Option<usize>; FACE_COUNT],
    face_magnet: Vec<Option<Encoding>>,
    packed: Vec<Option<[u64; 4]>>,
}

pub fn build_meta_cube_target(designs: &[Encoding]) -> Result<TargetAssembly> {
    if designs.len() != EDGE_COUNT {
        return Err(Error::Validation(format!(
            "meta-cube target needs exactly {EDGE_COUNT} encodings, got {}",
            designs.len()
        )));
    }
    let order = designs[0].order();
    for d in designs {
        if d.order() != order {
            return Err(Error::OrderMismatch { left: order, right: d.order() });
        }
    }
    let edges = octree_edges();
    let mut face_edge = [None; FACE_COUNT];
    let mut face_magnet: Vec<Option<Encoding>> = vec![None; FACE_COUNT];
    for (k, edge) in edges.iter().enumerate() {
        let lower_face = face_id(edge.lower, 2 * edge.axis);
        let upper_face = face_id(edge.upper, 2 * edge.axis + 1);
        face_edge[lower_face] = Some(k);
        face_edge[upper_face] = Some(k);
        face_magnet[lower_face] = Some(designs[k].clone());
        face_magnet[upper_face] = Some(designs[k].mate());
    }
    let packed = face_magnet
        .iter()
        .map(|m| {
            m.as_ref()
                .filter(|e| e.order() <= bits::MAX_PACKED_ORDER)
                .map(bits::pack_rotations)
        })
        .collect();
    Ok(TargetAssembly { order, edges, face_edge, face_magnet, packed })
}

impl TargetAssembly {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge this face belongs to; `None` for neutral faces.
    pub fn face_edge(&self, face: usize) -> Option<usize> {
        self.face_edge[face]
    }

    pub fn face_encoding(&self, face: usize) -> Option<&Encoding> {
        self.face_magnet[face].as_ref()
    }

    pub fn module_degree(&self, module: usize) -> usize {
        (0..FACES_PER_MODULE).filter(|&f| self.face_edge[face_id(module, f)].is_some()).count()
    }

    pub fn neutral_face_count(&self) -> usize {
        self.face_edge.iter().filter(|e| e.is_none()).count()
    }

    pub fn designated_pair(&self, a: usize, b: usize) -> bool {
        a != b && self.face_edge[a].is_some() && self.face_edge[a] == self.face_edge[b]
    }

    /// Score of faces `a` against `b` with `b` rotated by `theta_deg` and,
    /// for lattice angles, shifted by (dx, dy) pixels. Off-lattice angles
    /// are evaluated centered; any face without a magnet scores 0.
    pub fn pose_score(&self, a: usize, b: usize, theta_deg: u16, dx: i32, dy: i32) -> Rational {
        let (Some(ea), Some(eb)) = (self.face_encoding(a), self.face_encoding(b)) else {
            return ratio(0, 1);
        };
        if !theta_deg.is_multiple_of(90) {
            return arbitrary_rotation_score(ea, eb, f64::from(theta_deg), DEFAULT_UPSAMPLE)
                .expect("target faces share one validated order");
        }
        let turns = (theta_deg / 90) % 4;
        let n = self.order as i32;
        let num = match (&self.packed[a], &self.packed[b]) {
            (Some(pa), Some(pb)) => {
                let table = bits::offset_table(self.order);
                let idx = ((dy + n - 1) * (2 * n - 1) + (dx + n - 1)) as usize;
                let entry = &table.entries[idx];
                debug_assert_eq!((entry.dx, entry.dy), (dx, dy));
                i64::from(bits::translation_num(pa[0], pb[turns as usize], entry))
            }
            _ => score::translation_numerator(ea, &eb.rotated_quarter(turns as u8), dx, dy),
        };
        ratio(num, (self.order * self.order) as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    /// Normalized bond-survival threshold; bonds need score < F_f.
    #[serde(with = "serde_ratio")]
    pub f_f: Rational,
    pub seed: u64,
}

impl FluidParams {
    pub fn validate(&self) -> Result<()> {
        if self.f_f <= ratio(-1, 1) || self.f_f >= ratio(0, 1) {
            return Err(Error::Validation(format!(
                "F_f must lie strictly inside (-1, 0), got {}",
                self.f_f
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub max_steps: u64,
    /// Events beyond this count are dropped and the report flags truncation.
    pub log_limit: usize,
    /// Sample contact angles from 10° steps instead of quarter turns;
    /// off-lattice angles score via the upsampled rotation model.
    pub arbitrary_angle_contacts: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { max_steps: 1_000_000, log_limit: 1_000, arbitrary_angle_contacts: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Event {
    BondFormed {
        step: u64,
        faces: (usize, usize),
        theta_deg: u16,
        dx: i32,
        dy: i32,
        #[serde(with = "serde_ratio")]
        score: Rational,
        correct: bool,
    },
    BondBroken {
        step: u64,
        faces: (usize, usize),
        correct: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bond {
    pub faces: (usize, usize),
    pub theta_deg: u16,
    pub dx: i32,
    pub dy: i32,
    pub score: Rational,
    /// Designated pair at identity pose (0°, offset (0,0)).
    pub correct: bool,
}

/// RNG draw order per step (stable reproducibility contract):
/// 1. event kind: `gen_range(0..2)` — 0 contact trial, 1 agitation.
/// 2. contact: first free-face index, then second index rejection-sampled
///    until it lands on another module, then the pose — quarter turns
///    `gen_range(0..4)` (or a 10° step index `gen_range(0..36)` when
///    `arbitrary_angle_contacts` is set), then dx, then dy over
///    `-(N-1)..=N-1`. Off-lattice angles skip the offset draws.
/// 3. agitation: bond index `gen_range(0..bonds.len())`; no draw while no
///    bonds stand.
#[derive(Clone, Debug)]
pub struct WorldState {
    rng: ChaCha8Rng,
    bonds: Vec<Bond>,
    face_bond: [Option<usize>; FACE_COUNT],
    steps: u64,
    misassembly_events: u64,
    correct_bonds: usize,
    events: Vec<Event>,
    events_truncated: bool,
}

impl WorldState {
    pub fn new(fluid: &FluidParams) -> Result<WorldState> {
        fluid.validate()?;
        Ok(WorldState {
            rng: ChaCha8Rng::seed_from_u64(fluid.seed),
            bonds: Vec::new(),
            face_bond: [None; FACE_COUNT],
            steps: 0,
            misassembly_events: 0,
            correct_bonds: 0,
            events: Vec::new(),
            events_truncated: false,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond_of(&self, face: usize) -> Option<usize> {
        self.face_bond[face]
    }

    pub fn misassembly_events(&self) -> u64 {
        self.misassembly_events
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn events_truncated(&self) -> bool {
        self.events_truncated
    }

    pub fn correct_bond_count(&self) -> usize {
        self.correct_bonds
    }

    /// All 12 designated bonds stand at the correct pose. Misassembled
    /// bonds occupy designated faces, so completion implies none are active.
    pub fn is_complete(&self) -> bool {
        self.correct_bonds == EDGE_COUNT
    }

    pub fn step(&mut self, target: &TargetAssembly, fluid: &FluidParams, opts: &RunOptions) {
        self.steps += 1;
        match self.rng.gen_range(0..2u32) {
            0 => self.contact_trial(target, fluid, opts),
            _ => self.agitation_trial(fluid, opts),
        }
    }

    fn contact_trial(&mut self, target: &TargetAssembly, fluid: &FluidParams, opts: &RunOptions) {
        let mut free = [0usize; FACE_COUNT];
        let mut free_len = 0;
        for f in 0..FACE_COUNT {
            if self.face_bond[f].is_none() {
                free[free_len] = f;
                free_len += 1;
            }
        }
        let free = &free[..free_len];
        // ≤ 12 bonds leave ≥ 24 free faces across ≥ 7 modules; the guard
        // keeps a malformed state from hanging the rejection loop.
        if !free.iter().any(|&f| f / FACES_PER_MODULE != free[0] / FACES_PER_MODULE) {
            return;
        }
        let a = free[self.rng.gen_range(0..free.len())];
        let b = loop {
            let cand = free[self.rng.gen_range(0..free.len())];
            if cand / FACES_PER_MODULE != a / FACES_PER_MODULE {
                break cand;
            }
        };
        let span = target.order() as i32 - 1;
        let (theta_deg, dx, dy) = if opts.arbitrary_angle_contacts {
            let theta = self.rng.gen_range(0..36u32) as u16 * 10;
            if theta.is_multiple_of(90) {
                (theta, self.rng.gen_range(-span..=span), self.rng.gen_range(-span..=span))
            } else {
                (theta, 0, 0)
            }
        } else {
            let turns = self.rng.gen_range(0..4u32) as u16;
            (turns * 90, self.rng.gen_range(-span..=span), self.rng.gen_range(-span..=span))
        };
        let score = target.pose_score(a, b, theta_deg, dx, dy);
        if score >= fluid.f_f {
            return;
        }
        let correct =
            target.designated_pair(a, b) && theta_deg == 0 && dx == 0 && dy == 0;
        let index = self.bonds.len();
        self.bonds.push(Bond { faces: (a, b), theta_deg, dx, dy, score, correct });
        self.face_bond[a] = Some(index);
        self.face_bond[b] = Some(index);
        if correct {
            self.correct_bonds += 1;
        } else {
            self.misassembly_events += 1;
        }
        let step = self.steps;
        self.log(opts, Event::BondFormed { step, faces: (a, b), theta_deg, dx, dy, score, correct });
    }

    fn agitation_trial(&mut self, fluid: &FluidParams, opts: &RunOptions) {
        if self.bonds.is_empty() {
            return;
        }
        let index = self.rng.gen_range(0..self.bonds.len());
        if self.bonds[index].score < fluid.f_f {
            return; // survives under the current threshold
        }
        let bond = self.bonds.swap_remove(index);
        self.face_bond[bond.faces.0] = None;
        self.face_bond[bond.faces.1] = None;
        if let Some(moved) = self.bonds.get(index) {
            self.face_bond[moved.faces.0] = Some(index);
            self.face_bond[moved.faces.1] = Some(index);
        }
        if bond.correct {
            self.correct_bonds -= 1;
        }
        let step = self.steps;
        self.log(opts, Event::BondBroken { step, faces: bond.faces, correct: bond.correct });
    }

    fn log(&mut self, opts: &RunOptions, event: Event) {
        if self.events.len() < opts.log_limit {
            self.events.push(event);
        } else {
            self.events_truncated = true;
        }
    }

    pub fn report(&self, fluid: &FluidParams) -> AssemblyReport {
        AssemblyReport {
            completed: self.is_complete(),
            steps: self.steps,
            misassembly_events: self.misassembly_events,
            permanent_misassemblies: self.bonds.iter().filter(|b| !b.correct).count() as u64,
            seed: fluid.seed,
            f_f: fluid.f_f,
            events: self.events.clone(),
            events_truncated: self.events_truncated,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssemblyReport {
    pub completed: bool,
    pub steps: u64,
    /// Bonds formed between non-designated pairs or at wrong poses,
    /// cumulative over the run.
    pub misassembly_events: u64,
    /// Misassembled bonds still standing at termination.
    pub permanent_misassemblies: u64,
    pub seed: u64,
    #[serde(with = "serde_ratio")]
    pub f_f: Rational,
    pub events: Vec<Event>,
    pub events_truncated: bool,
}

pub fn run(
    target: &TargetAssembly,
    fluid: &FluidParams,
    opts: &RunOptions,
) -> Result<AssemblyReport> {
    if opts.max_steps == 0 {
        return Err(Error::Validation("max_steps must be positive".into()));
    }
    let mut world = WorldState::new(fluid)?;
    while world.steps < opts.max_steps && !world.is_complete() {
        world.step(target, fluid, opts);
    }
    Ok(world.report(fluid))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleRow {
    pub seed: u64,
    pub completed: bool,
    pub steps: u64,
    pub misassembly_events: u64,
}

pub fn ensemble(
    target: &TargetAssembly,
    f_f: Rational,
    opts: &RunOptions,
    seeds: &[u64],
) -> Result<Vec<EnsembleRow>> {
    ensemble_impl(target, f_f, opts, seeds, true)
}

pub fn ensemble_seq(
    target: &TargetAssembly,
    f_f: Rational,
    opts: &RunOptions,
    seeds: &[u64],
) -> Result<Vec<EnsembleRow>> {
    ensemble_impl(target, f_f, opts, seeds, false)
}

fn ensemble_impl(
    target: &TargetAssembly,
    f_f: Rational,
    opts: &RunOptions,
    seeds: &[u64],
    par: bool,
) -> Result<Vec<EnsembleRow>> {
    FluidParams { f_f, seed: 0 }.validate()?;
    if opts.max_steps == 0 {
        return Err(Error::Validation("max_steps must be positive".into()));
    }
    let one = |i: usize| -> Result<EnsembleRow> {
        let fluid = FluidParams { f_f, seed: seeds[i] };
        let report = run(target, &fluid, opts)?;
        Ok(EnsembleRow {
            seed: report.seed,
            completed: report.completed,
            steps: report.steps,
            misassembly_events: report.misassembly_events,
        })
    };
    let rows = if par {
        parallel::map_indexed(seeds.len(), one)
    } else {
        parallel::map_indexed_seq(seeds.len(), one)
    };
    rows.into_iter().collect()
}

pub fn write_ensemble_csv<W: Write>(rows: &[EnsembleRow], mut w: W) -> Result<()> {
    writeln!(w, "seed,completed,steps,misassembly_events")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.seed, r.completed, r.steps, r.misassembly_events)?;
    }
    Ok(())
}

pub fn ensemble_csv_string(rows: &[EnsembleRow]) -> String {
    let mut buf = Vec::new();
    write_ensemble_csv(rows, &mut buf).expect("vec write cannot fail");
    String::from_utf8(buf).expect("csv is ascii")
}

/// Simulation input: the 12 designs come either from a sweep result file
/// (`clique_file` + `clique_index`) or inline, never both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clique_file: Option<String>,
    #[serde(default)]
    pub clique_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encodings: Option<Vec<Encoding>>,
    /// Rational literal, e.g. "-3/5" or "-0.6".
    pub f_f: String,
    pub seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default = "default_log_limit")]
    pub log_limit: usize,
    #[serde(default)]
    pub arbitrary_angle_contacts: bool,
}

fn default_max_steps() -> u64 {
    RunOptions::default().max_steps
}

fn default_log_limit() -> usize {
    RunOptions::default().log_limit
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Scenario> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read_json(path: &Path) -> Result<Scenario> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Loads the designs (relative `clique_file` paths resolve against
    /// `base_dir`) and validates every parameter.
    pub fn resolve(&self, base_dir: &Path) -> Result<(TargetAssembly, FluidParams, RunOptions)> {
        let designs = match (&self.clique_file, &self.encodings) {
            (Some(_), Some(_)) => {
                return Err(Error::Validation(
                    "scenario sets both clique_file and encodings; pick one".into(),
                ));
            }
            (None, None) => {
                return Err(Error::Validation(
                    "scenario needs either clique_file or encodings".into(),
                ));
            }
            (Some(file), None) => {
                let text = std::fs::read_to_string(base_dir.join(file))?;
                let sweep: SweepResult = serde_json::from_str(&text)?;
                select_clique(&sweep, self.clique_index)?.member_encodings
            }
            (None, Some(designs)) => designs.clone(),
        };
        let fluid = FluidParams { f_f: parse_rational(&self.f_f)?, seed: self.seed };
        fluid.validate()?;
        let target = build_meta_cube_target(&designs)?;
        let opts = RunOptions {
            max_steps: self.max_steps,
            log_limit: self.log_limit,
            arbitrary_angle_contacts: self.arbitrary_angle_contacts,
        };
        if opts.max_steps == 0 {
            return Err(Error::Validation("max_steps must be positive".into()));
        }
        Ok((target, fluid, opts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::sylvester;
    use crate::search::permute_rows;
    use crate::search::{CliqueSummary, Provenance, SweepParams};

    fn designs12() -> Vec<Encoding> {
        permute_rows(&sylvester(2).unwrap()).unwrap().into_iter().take(12).collect()
    }

    fn target12() -> TargetAssembly {
        build_meta_cube_target(&designs12()).unwrap()
    }

    fn check_world(w: &WorldState) {
        assert!(w.bonds().len() <= EDGE_COUNT);
        for (i, b) in w.bonds().iter().enumerate() {
            assert_eq!(w.bond_of(b.faces.0), Some(i));
            assert_eq!(w.bond_of(b.faces.1), Some(i));
            assert_ne!(b.faces.0 / FACES_PER_MODULE, b.faces.1 / FACES_PER_MODULE);
        }
        for f in 0..FACE_COUNT {
            if let Some(i) = w.bond_of(f) {
                let b = &w.bonds()[i];
                assert!(b.faces.0 == f || b.faces.1 == f);
            }
        }
    }

    #[test]
    fn octree_edges_are_the_cube_skeleton() {
        let edges = octree_edges();
        assert_eq!(edges.len(), EDGE_COUNT);
        let mut degree = [0usize; MODULE_COUNT];
        for e in edges {
            degree[e.lower] += 1;
            degree[e.upper] += 1;
            let (a, b) = (module_position(e.lower), module_position(e.upper));
            let diff = (b.0 - a.0) as usize + (b.1 - a.1) as usize + (b.2 - a.2) as usize;
            assert_eq!(diff, 1, "edge spans exactly one unit along axis {}", e.axis);
            assert_eq!(e.upper, e.lower | (1 << e.axis));
        }
        assert!(degree.iter().all(|&d| d == 3));
    }

    #[test]
    fn target_assigns_mates_across_each_edge() {
        let designs = designs12();
        let t = target12();
        assert_eq!(t.order(), 4);
        assert_eq!(t.neutral_face_count(), 24);
        for m in 0..MODULE_COUNT {
            assert_eq!(t.module_degree(m), 3);
        }
        for (k, edge) in t.edges().iter().enumerate() {
            let lower = face_id(edge.lower, 2 * edge.axis);
            let upper = face_id(edge.upper, 2 * edge.axis + 1);
            assert_eq!(t.face_encoding(lower).unwrap().cells(), designs[k].cells());
            assert_eq!(t.face_encoding(upper).unwrap().cells(), designs[k].mate().cells());
            assert!(t.designated_pair(lower, upper));
            assert!(t.designated_pair(upper, lower));
            // A designated pair at the identity pose scores exactly −1.
            assert_eq!(t.pose_score(lower, upper, 0, 0, 0), ratio(-1, 1));
        }
        assert!(!t.designated_pair(0, 0));
        assert!(!t.designated_pair(face_id(0, 0), face_id(0, 2)));
    }

    #[test]
    fn bad_design_lists_rejected() {
        let designs = designs12();
        assert!(matches!(
            build_meta_cube_target(&designs[..11]),
            Err(Error::Validation(_))
        ));
        let mut mixed = designs.clone();
        mixed[3] = sylvester(1).unwrap();
        assert!(matches!(
            build_meta_cube_target(&mixed),
            Err(Error::OrderMismatch { left: 4, right: 2 })
        ));
    }

    #[test]
    fn pose_score_matches_reference_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for order in [4usize, 9] {
            let designs: Vec<Encoding> =
                (0..12).map(|_| Encoding::random(order, &mut rng)).collect();
            let t = build_meta_cube_target(&designs).unwrap();
            let (a, b) = (face_id(0, 0), face_id(1, 1)); // designated pair of edge 0
            let ea = t.face_encoding(a).unwrap();
            let eb = t.face_encoding(b).unwrap();
            for turns in 0..4u16 {
                let map = score::translation_map(ea, &eb.rotated_quarter(turns as u8)).unwrap();
                for dy in -(order as i32 - 1)..order as i32 {
                    for dx in -(order as i32 - 1)..order as i32 {
                        assert_eq!(
                            t.pose_score(a, b, turns * 90, dx, dy),
                            map.score(dx, dy),
                            "order {order} turns {turns} offset ({dx},{dy})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn fluid_threshold_bounds_are_strict() {
        for (num, den, ok) in
            [(-1i64, 1i64, false), (0, 1, false), (1, 2, false), (-1, 2, true), (-999, 1000, true)]
        {
            let fluid = FluidParams { f_f: ratio(num, den), seed: 0 };
            assert_eq!(fluid.validate().is_ok(), ok, "{num}/{den}");
        }
    }

    #[test]
    fn max_steps_boundaries() {
        let t = target12();
        let fluid = FluidParams { f_f: ratio(-3, 5), seed: 1 };
        let opts = RunOptions { max_steps: 0, ..RunOptions::default() };
        assert!(matches!(run(&t, &fluid, &opts), Err(Error::Validation(_))));
        let opts = RunOptions { max_steps: 1, ..RunOptions::default() };
        let report = run(&t, &fluid, &opts).unwrap();
        assert!(!report.completed);
        assert_eq!(report.steps, 1);
    }

    #[test]
    fn only_designated_faces_ever_bond() {
        let t = target12();
        // Very weak fluid: anything below −1/100 sticks, so wrong poses bond
        // freely — but neutral faces score exactly 0 and never can.
        let fluid = FluidParams { f_f: ratio(-1, 100), seed: 7 };
        let opts = RunOptions { max_steps: 30_000, log_limit: usize::MAX, ..Default::default() };
        let report = run(&t, &fluid, &opts).unwrap();
        let mut formed = 0u64;
        for e in &report.events {
            if let Event::BondFormed { faces, .. } = e {
                formed += 1;
                assert!(t.face_edge(faces.0).is_some(), "neutral face bonded: {e:?}");
                assert!(t.face_edge(faces.1).is_some(), "neutral face bonded: {e:?}");
            }
        }
        assert!(formed > 0, "loose threshold must produce bonds");
        assert!(report.misassembly_events > 0, "loose threshold must misassemble");
    }

    #[test]
    fn world_invariants_hold_under_stepping() {
        let t = target12();
        let fluid = FluidParams { f_f: ratio(-1, 100), seed: 11 };
        let opts = RunOptions::default();
        let mut w = WorldState::new(&fluid).unwrap();
        for _ in 0..20_000 {
            w.step(&t, &fluid, &opts);
            check_world(&w);
            // Bonds only form when score beats the (fixed) threshold.
            assert!(w.bonds().iter().all(|b| b.score < fluid.f_f));
        }
    }

    /// Exhaustive scan over every non-correct pose reachable by contact
    /// trials: the worst such score bounds the sound fluid window from above.
    fn worst_wrong_pose(t: &TargetAssembly) -> Rational {
        let span = t.order() as i32 - 1;
        let mut worst = ratio(1, 1);
        for a in 0..FACE_COUNT {
            for b in 0..FACE_COUNT {
                if a / FACES_PER_MODULE == b / FACES_PER_MODULE {
                    continue;
                }
                if t.face_edge(a).is_none() || t.face_edge(b).is_none() {
                    continue; // neutral faces score 0, never below any F_f
                }
                for turns in 0..4u16 {
                    for dy in -span..=span {
                        for dx in -span..=span {
                            let identity = turns == 0 && dx == 0 && dy == 0;
                            if t.designated_pair(a, b) && identity {
                                continue;
                            }
                            let s = t.pose_score(a, b, turns * 90, dx, dy);
                            worst = worst.min(s);
                        }
                    }
                }
            }
        }
        worst
    }

    /// Twelve order-4 Hadamard designs with no ±1 wrong pose anywhere.
    /// Translations cannot alias (partial overlap bounds |num| below n²),
    /// so it suffices that no design is rotation-symmetric and no pair is a
    /// signed rotation of each other — both read off local/pair scores.
    fn nonaliasing_designs12() -> Vec<Encoding> {
        use crate::search::{enumerate_order4, filter_hadamard};
        let universe = filter_hadamard(&enumerate_order4()).unwrap();
        let mut picked: Vec<Encoding> = Vec::new();
        for m in universe.members() {
            if score::local_score(m).value <= ratio(-1, 1) {
                continue;
            }
            if picked.iter().all(|d| score::pair_score(d, m).unwrap() > ratio(-1, 1)) {
                picked.push(m.clone());
                if picked.len() == EDGE_COUNT {
                    break;
                }
            }
        }
        assert_eq!(picked.len(), EDGE_COUNT, "order-4 universe offers plenty of classes");
        picked
    }

    #[test]
    fn window_soundness_and_completion() {
        let t = build_meta_cube_target(&nonaliasing_designs12()).unwrap();
        let wrong_floor = worst_wrong_pose(&t);
        assert!(wrong_floor > ratio(-1, 1), "designs must not alias under rotation");
        // Any F_f strictly between −1 and every wrong-pose score admits
        // exactly the mate-at-identity bonds.
        let f_f = (ratio(-1, 1) + wrong_floor) / 2;
        let fluid = FluidParams { f_f, seed: 3 };
        let opts =
            RunOptions { max_steps: 2_000_000, log_limit: usize::MAX, ..Default::default() };
        let report = run(&t, &fluid, &opts).unwrap();
        assert!(report.completed, "sound window should assemble within {} steps", opts.max_steps);
        assert_eq!(report.misassembly_events, 0);
        assert_eq!(report.permanent_misassemblies, 0);
        for e in &report.events {
            match e {
                Event::BondFormed { theta_deg, dx, dy, correct, score, .. } => {
                    assert!(*correct);
                    assert_eq!((*theta_deg, *dx, *dy), (0, 0, 0));
                    assert_eq!(*score, ratio(-1, 1));
                }
                Event::BondBroken { .. } => panic!("nothing should break inside the window"),
            }
        }
    }

    #[test]
    fn agitation_reaps_bonds_after_threshold_drop() {
        let t = target12();
        let loose = FluidParams { f_f: ratio(-1, 100), seed: 13 };
        let opts = RunOptions::default();
        let mut w = WorldState::new(&loose).unwrap();
        for _ in 0..30_000 {
            w.step(&t, &loose, &opts);
        }
        assert!(w.bonds().iter().any(|b| b.score >= ratio(-9, 10)), "loose phase builds weak bonds");
        let strict = FluidParams { f_f: ratio(-9, 10), ..loose };
        for _ in 0..60_000 {
            w.step(&t, &strict, &opts);
        }
        assert!(w.bonds().iter().all(|b| b.score < strict.f_f));
        assert!(w.events().iter().any(|e| matches!(e, Event::BondBroken { .. })));
        check_world(&w);
    }

    #[test]
    fn identical_seeds_reproduce_reports() {
        let t = target12();
        let fluid = FluidParams { f_f: ratio(-2, 5), seed: 42 };
        let opts = RunOptions { max_steps: 5_000, ..Default::default() };
        let a = run(&t, &fluid, &opts).unwrap();
        let b = run(&t, &fluid, &opts).unwrap();
        assert_eq!(a, b);
        let other = run(&t, &FluidParams { seed: 43, ..fluid }, &opts).unwrap();
        assert_ne!(a.events, other.events);
    }

    #[test]
    fn arbitrary_angle_mode_runs_deterministically() {
        let t = target12();
        let fluid = FluidParams { f_f: ratio(-2, 5), seed: 21 };
        let opts = RunOptions {
            max_steps: 20_000,
            log_limit: usize::MAX,
            arbitrary_angle_contacts: true,
        };
        let a = run(&t, &fluid, &opts).unwrap();
        let b = run(&t, &fluid, &opts).unwrap();
        assert_eq!(a, b);
        let mut saw_off_lattice_trialed = false;
        for e in &a.events {
            if let Event::BondFormed { theta_deg, dx, dy, score, .. } = e {
                assert!(*theta_deg < 360 && theta_deg % 10 == 0);
                if theta_deg % 90 != 0 {
                    saw_off_lattice_trialed = true;
                    assert_eq!((*dx, *dy), (0, 0));
                }
                assert!(*score < fluid.f_f);
            }
        }
        // Off-lattice bonds are possible but not guaranteed; the mode must
        // at least not disturb lattice behavior.
        let _ = saw_off_lattice_trialed;
    }

    #[test]
    fn ensemble_rows_and_csv() {
        let t = target12();
        let opts = RunOptions { max_steps: 2_000, ..Default::default() };
        let seeds = [11u64, 12, 13];
        let rows = ensemble(&t, ratio(-3, 5), &opts, &seeds).unwrap();
        let rows_seq = ensemble_seq(&t, ratio(-3, 5), &opts, &seeds).unwrap();
        assert_eq!(rows, rows_seq);
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().zip(seeds).all(|(r, s)| r.seed == s));
        let csv = ensemble_csv_string(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("seed,completed,steps,misassembly_events"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("11,"), "{first}");
        assert_eq!(csv.lines().count(), 4);
        assert!(matches!(
            ensemble(&t, ratio(-3, 2), &opts, &seeds),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn scenario_inline_round_trip() {
        let scenario = Scenario {
            clique_file: None,
            clique_index: 0,
            encodings: Some(designs12()),
            f_f: "-3/5".into(),
            seed: 9,
            max_steps: 500,
            log_limit: 64,
            arbitrary_angle_contacts: false,
        };
        let json = serde_json::to_string(&scenario).unwrap();
        let back = Scenario::from_json_str(&json).unwrap();
        assert_eq!(back, scenario);
        let (target, fluid, opts) = back.resolve(Path::new(".")).unwrap();
        assert_eq!(target.order(), 4);
        assert_eq!(fluid.f_f, ratio(-3, 5));
        assert_eq!(opts.max_steps, 500);
        let report = run(&target, &fluid, &opts).unwrap();
        assert_eq!(report.steps, 500);
    }

    #[test]
    fn scenario_validation_failures() {
        let base = Scenario {
            clique_file: None,
            clique_index: 0,
            encodings: Some(designs12()),
            f_f: "-3/5".into(),
            seed: 0,
            max_steps: 100,
            log_limit: 10,
            arbitrary_angle_contacts: false,
        };
        let both = Scenario { clique_file: Some("x.json".into()), ..base.clone() };
        assert!(matches!(both.resolve(Path::new(".")), Err(Error::Validation(_))));
        let neither = Scenario { encodings: None, ..base.clone() };
        assert!(matches!(neither.resolve(Path::new(".")), Err(Error::Validation(_))));
        let bad_ff = Scenario { f_f: "tepid".into(), ..base.clone() };
        assert!(matches!(bad_ff.resolve(Path::new(".")), Err(Error::Validation(_))));
        let out_of_range = Scenario { f_f: "-3/2".into(), ..base.clone() };
        assert!(matches!(out_of_range.resolve(Path::new(".")), Err(Error::Validation(_))));
        let no_steps = Scenario { max_steps: 0, ..base };
        assert!(matches!(no_steps.resolve(Path::new(".")), Err(Error::Validation(_))));
    }

    #[test]
    fn scenario_reads_sweep_result_files() {
        let designs = designs12();
        let sweep = SweepResult {
            order: 4,
            universe_hash: "feedface".into(),
            provenance: Provenance::SylvesterRowPermutations { k: 2 },
            params: SweepParams::default(),
            schedule: vec![],
            final_tau: ratio(-1, 5),
            cliques: vec![CliqueSummary {
                members: (0..12).collect(),
                achieved_s_g: ratio(-1, 4),
                achieved_s_l: ratio(-1, 4),
                member_encodings: designs,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("sweep.json"), serde_json::to_string(&sweep).unwrap())
            .unwrap();
        let scenario = Scenario {
            clique_file: Some("sweep.json".into()),
            clique_index: 0,
            encodings: None,
            f_f: "-3/5".into(),
            seed: 1,
            max_steps: 100,
            log_limit: 10,
            arbitrary_angle_contacts: false,
        };
        let (target, _, _) = scenario.resolve(dir.path()).unwrap();
        assert_eq!(target.order(), 4);
        assert_eq!(target.neutral_face_count(), 24);
        let bad_index = Scenario { clique_index: 5, ..scenario };
        assert!(matches!(
            bad_index.resolve(dir.path()),
            Err(Error::CliqueIndex { index: 5, available: 1 })
        ));
    }

    #[test]
    fn report_serializes_for_downstream_tools() {
        let t = target12();
        let fluid = FluidParams { f_f: ratio(-2, 5), seed: 2 };
        let opts = RunOptions { max_steps: 200, ..Default::default() };
        let report = run(&t, &fluid, &opts).unwrap();
        let json = serde_json::to_string_pretty(&report).unwrap();
        assert!(json.contains("misassembly_events"));
        assert!(json.contains("\"den\": 5"));
    }
}
