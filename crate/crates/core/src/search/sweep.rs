//! Threshold sweep: walk the pair threshold downward on a fixed schedule
//! until the compatibility graph holds a clique of the target size, then
//! report every maximum clique at that threshold.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::encoding::Encoding;
use crate::error::{Error, Result};
use crate::rational::{ratio, serde_ratio, to_f64, Rational};
use crate::search::cliques::{self, DEFAULT_EXPANSION_BUDGET};
use crate::search::pairs::PairTable;
use crate::search::universe::{MatrixUniverse, Provenance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    /// Vertex floor: members with a worse local score are dropped.
    #[serde(with = "serde_ratio")]
    pub tau_l: Rational,
    /// First pair threshold tried.
    #[serde(with = "serde_ratio")]
    pub tau_start: Rational,
    /// Amount the threshold drops per round; positive.
    #[serde(with = "serde_ratio")]
    pub step: Rational,
    pub target_size: usize,
    /// Bron–Kerbosch expansion-call ceiling per round.
    pub budget: u64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            tau_l: ratio(-1, 4),
            tau_start: ratio(-1, 5),
            step: ratio(1, 50),
            target_size: 12,
            budget: DEFAULT_EXPANSION_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepStep {
    #[serde(with = "serde_ratio")]
    pub tau: Rational,
    pub max_clique_size: usize,
    pub max_clique_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliqueSummary {
    /// Universe member indices, ascending.
    pub members: Vec<u32>,
    /// Worst pair score inside the clique; 0 for singleton cliques.
    #[serde(with = "serde_ratio")]
    pub achieved_s_g: Rational,
    /// Worst member local score.
    #[serde(with = "serde_ratio")]
    pub achieved_s_l: Rational,
    pub member_encodings: Vec<Encoding>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub order: usize,
    pub universe_hash: String,
    pub provenance: Provenance,
    pub params: SweepParams,
    pub schedule: Vec<SweepStep>,
    #[serde(with = "serde_ratio")]
    pub final_tau: Rational,
    /// Every maximum clique at `final_tau`, canonically ordered.
    pub cliques: Vec<CliqueSummary>,
}

pub fn threshold_sweep(
    universe: &MatrixUniverse,
    table: &PairTable,
    params: SweepParams,
) -> Result<SweepResult> {
    sweep_impl(universe, table, params, true)
}

pub fn threshold_sweep_seq(
    universe: &MatrixUniverse,
    table: &PairTable,
    params: SweepParams,
) -> Result<SweepResult> {
    sweep_impl(universe, table, params, false)
}

fn sweep_impl(
    universe: &MatrixUniverse,
    table: &PairTable,
    params: SweepParams,
    par: bool,
) -> Result<SweepResult> {
    table.check_universe(universe)?;
    if params.step <= ratio(0, 1) {
        return Err(Error::Validation(format!(
            "sweep step must be positive, got {}",
            params.step
        )));
    }
    if params.target_size == 0 {
        return Err(Error::Validation("target clique size must be at least 1".into()));
    }
    for (name, tau) in [("tau_l", params.tau_l), ("tau_start", params.tau_start)] {
        if tau < ratio(-1, 1) || tau > ratio(0, 1) {
            return Err(Error::Validation(format!("{name} must lie in [-1, 0], got {tau}")));
        }
    }
    let (vertices, locals) = cliques::eligible_vertices_of(universe, params.tau_l, par);
    let mut schedule = Vec::new();
    let mut tau = params.tau_start;
    loop {
        let g = cliques::graph_at_tau(
            universe.order(),
            params.tau_l,
            tau,
            vertices.clone(),
            table,
        );
        let found = cliques::maximum_cliques(&g, params.target_size, params.budget, par)?;
        schedule.push(SweepStep {
            tau,
            max_clique_size: found.max_size,
            max_clique_count: found.count,
        });
        if found.max_size >= params.target_size {
            let summaries = summarize(found.cliques, universe, table, &locals);
            return Ok(SweepResult {
                order: universe.order(),
                universe_hash: universe.hash_hex(),
                provenance: universe.provenance().clone(),
                params,
                schedule,
                final_tau: tau,
                cliques: summaries,
            });
        }
        tau -= params.step;
        if tau < ratio(-1, 1) {
            return Err(Error::SweepExhausted { target: params.target_size, schedule });
        }
    }
}

fn summarize(
    found: Vec<cliques::Clique>,
    universe: &MatrixUniverse,
    table: &PairTable,
    locals: &[Rational],
) -> Vec<CliqueSummary> {
    found
        .into_iter()
        .map(|c| {
            let members = c.members;
            let mut s_g = ratio(0, 1);
            for (i, &a) in members.iter().enumerate() {
                for &b in &members[i + 1..] {
                    s_g = s_g.min(table.score(a as usize, b as usize));
                }
            }
            let s_l = members
                .iter()
                .map(|&m| locals[m as usize])
                .min()
                .expect("cliques are non-empty");
            let member_encodings =
                members.iter().map(|&m| universe.member(m as usize).clone()).collect();
            CliqueSummary { members, achieved_s_g: s_g, achieved_s_l: s_l, member_encodings }
        })
        .collect()
}

pub fn select_clique(result: &SweepResult, index: usize) -> Result<CliqueSummary> {
    result
        .cliques
        .get(index)
        .cloned()
        .ok_or(Error::CliqueIndex { index, available: result.cliques.len() })
}

/// One row per sweep round: largest clique, how many attain it, and the
/// threshold as a float.
pub fn write_fig_csv<W: Write>(result: &SweepResult, mut w: W) -> Result<()> {
    writeln!(w, "clique_size,count,S_G")?;
    for step in &result.schedule {
        writeln!(w, "{},{},{}", step.max_clique_size, step.max_clique_count, to_f64(step.tau))?;
    }
    Ok(())
}

/// Groups cliques that are images of one another under the score-preserving
/// face transforms: quarter rotations, transposition, and global negation
/// applied uniformly to all members.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetryAnalysis {
    /// Clique indices per class, each ascending; classes ordered by first
    /// member.
    pub classes: Vec<Vec<usize>>,
}

impl SymmetryAnalysis {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }
}

fn transform_cells(e: &Encoding, turns: u8, transpose: bool, negate: bool) -> Vec<i8> {
    let rotated = e.rotated_quarter(turns);
    let n = rotated.order();
    let mut cells = if transpose {
        let mut v = vec![0i8; n * n];
        for i in 0..n {
            for j in 0..n {
                v[j * n + i] = rotated.get(i, j);
            }
        }
        v
    } else {
        rotated.cells().to_vec()
    };
    if negate {
        for c in &mut cells {
            *c = -*c;
        }
    }
    cells
}

pub fn symmetry_classes(cliques: &[CliqueSummary]) -> SymmetryAnalysis {
    let mut groups: HashMap<Vec<Vec<i8>>, Vec<usize>> = HashMap::new();
    for (idx, c) in cliques.iter().enumerate() {
        let mut canon: Option<Vec<Vec<i8>>> = None;
        for turns in 0..4u8 {
            for transpose in [false, true] {
                for negate in [false, true] {
                    let mut form: Vec<Vec<i8>> = c
                        .member_encodings
                        .iter()
                        .map(|e| transform_cells(e, turns, transpose, negate))
                        .collect();
                    form.sort();
                    if canon.as_ref().is_none_or(|best| form < *best) {
                        canon = Some(form);
                    }
                }
            }
        }
        groups.entry(canon.expect("at least one transform")).or_default().push(idx);
    }
    let mut classes: Vec<Vec<usize>> = groups.into_values().collect();
    classes.sort_by_key(|c| c[0]);
    SymmetryAnalysis { classes }
}
