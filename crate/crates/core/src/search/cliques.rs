//! Compatibility graph over eligible encodings and Bron–Kerbosch maximal
//! clique enumeration (pivoting + degeneracy-ordered roots) under an
//! expansion-call budget. Maximum-clique statistics run in two passes: a
//! colouring-bounded branch and bound pins the exact size first, then the
//! enumeration pass reuses that size as a live prune.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicI64, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::bits;
use crate::error::{Error, Result};
use crate::parallel;
use crate::rational::{ratio, Rational};
use crate::score;
use crate::search::pairs::PairTable;
use crate::search::universe::MatrixUniverse;

/// Default ceiling on Bron–Kerbosch recursive expansions.
pub const DEFAULT_EXPANSION_BUDGET: u64 = 1_000_000_000;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Clique {
    /// Universe member indices, ascending.
    pub members: Vec<u32>,
}

/// Worst-case self score for every universe member (duplicates included).
pub fn local_scores(universe: &MatrixUniverse) -> Vec<Rational> {
    local_scores_impl(universe, true)
}

pub fn local_scores_seq(universe: &MatrixUniverse) -> Vec<Rational> {
    local_scores_impl(universe, false)
}

fn local_scores_impl(universe: &MatrixUniverse, par: bool) -> Vec<Rational> {
    let n = universe.order();
    let den = (n * n) as i64;
    let one = |i: usize| -> Rational {
        let m = universe.member(i);
        if n <= bits::MAX_PACKED_ORDER {
            let rots = bits::pack_rotations(m);
            let (num, _) = bits::local_score_num(&rots, bits::offset_table(n));
            ratio(num as i64, den)
        } else {
            score::local_score(m).value
        }
    };
    if par {
        parallel::map_indexed(universe.len(), one)
    } else {
        parallel::map_indexed_seq(universe.len(), one)
    }
}

/// Members that pass the local-score floor, minus duplicates (an exact cell
/// match keeps only the lowest index).
fn eligible_vertices(
    universe: &MatrixUniverse,
    locals: &[Rational],
    tau_l: Rational,
) -> Vec<u32> {
    let mut first: HashMap<&[i8], usize> = HashMap::with_capacity(universe.len());
    let mut keep = Vec::new();
    for (i, local) in locals.iter().enumerate() {
        if *first.entry(universe.member(i).cells()).or_insert(i) != i {
            continue;
        }
        if *local >= tau_l {
            keep.push(i as u32);
        }
    }
    keep
}

/// Symmetric adjacency over vertex positions, one bit per pair.
#[derive(Clone)]
struct BitMatrix {
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    fn new(n: usize) -> Self {
        let words_per_row = n.div_ceil(64).max(1);
        Self { words_per_row, bits: vec![0; n * words_per_row] }
    }

    #[inline]
    fn set_pair(&mut self, a: usize, b: usize) {
        self.bits[a * self.words_per_row + b / 64] |= 1u64 << (b % 64);
        self.bits[b * self.words_per_row + a / 64] |= 1u64 << (a % 64);
    }

    #[inline]
    fn row(&self, a: usize) -> &[u64] {
        &self.bits[a * self.words_per_row..(a + 1) * self.words_per_row]
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.words_per_row + b / 64] & (1u64 << (b % 64)) != 0
    }

    fn degree(&self, a: usize) -> usize {
        self.row(a).iter().map(|w| w.count_ones() as usize).sum()
    }

    fn total_bits(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }
}

#[inline]
fn row_has(row: &[u64], v: u32) -> bool {
    row[v as usize / 64] & (1u64 << (v % 64)) != 0
}

pub struct CompatibilityGraph {
    order: usize,
    tau_l: Rational,
    tau_g: Rational,
    vertices: Vec<u32>,
    adj: BitMatrix,
}

impl CompatibilityGraph {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tau_l(&self) -> Rational {
        self.tau_l
    }

    pub fn tau_g(&self) -> Rational {
        self.tau_g
    }

    /// Universe member indices of the surviving vertices, ascending.
    pub fn vertex_ids(&self) -> &[u32] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> u64 {
        self.adj.total_bits() / 2
    }

    /// Graph over vertices 0..masks.len() with the set bits of `masks[v]` as
    /// v's neighbors, symmetrized; thresholds are recorded as zero. Lets the
    /// clique search run on synthetic adjacency instead of a scored universe.
    pub fn from_neighbor_masks(masks: &[u32]) -> CompatibilityGraph {
        let n = masks.len();
        let mut adj = BitMatrix::new(n);
        for (v, &mask) in masks.iter().enumerate() {
            let mut rest = mask;
            while rest != 0 {
                let u = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                if u < n && u != v {
                    adj.set_pair(v, u);
                }
            }
        }
        CompatibilityGraph {
            order: 1,
            tau_l: ratio(0, 1),
            tau_g: ratio(0, 1),
            vertices: (0..n as u32).collect(),
            adj,
        }
    }

    /// Edge lookup by universe member indices.
    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        let (Ok(pa), Ok(pb)) = (self.vertices.binary_search(&a), self.vertices.binary_search(&b))
        else {
            return false;
        };
        pa != pb && self.adj.get(pa, pb)
    }
}

/// Smallest numerator (over order^2) that still satisfies `score >= tau`.
fn cutoff_numerator(tau: Rational, order: usize) -> i64 {
    let n2 = (order * order) as i64;
    (tau * ratio(n2, 1)).ceil().to_integer()
}

fn check_threshold(name: &str, tau: Rational) -> Result<()> {
    if tau < ratio(-1, 1) || tau > ratio(0, 1) {
        return Err(Error::Validation(format!("{name} must lie in [-1, 0], got {tau}")));
    }
    Ok(())
}

fn adjacency_for(verts: &[u32], table: &PairTable, cutoff: i64) -> BitMatrix {
    let v = verts.len();
    let mut adj = BitMatrix::new(v);
    for a in 0..v {
        let i = verts[a] as usize;
        for (b, &j) in verts.iter().enumerate().skip(a + 1) {
            if i64::from(table.numerator(i, j as usize)) >= cutoff {
                adj.set_pair(a, b);
            }
        }
    }
    adj
}

pub fn build_graph(
    universe: &MatrixUniverse,
    table: &PairTable,
    tau_l: Rational,
    tau_g: Rational,
) -> Result<CompatibilityGraph> {
    build_graph_impl(universe, table, tau_l, tau_g, true)
}

pub fn build_graph_seq(
    universe: &MatrixUniverse,
    table: &PairTable,
    tau_l: Rational,
    tau_g: Rational,
) -> Result<CompatibilityGraph> {
    build_graph_impl(universe, table, tau_l, tau_g, false)
}

fn build_graph_impl(
    universe: &MatrixUniverse,
    table: &PairTable,
    tau_l: Rational,
    tau_g: Rational,
    par: bool,
) -> Result<CompatibilityGraph> {
    table.check_universe(universe)?;
    check_threshold("tau_l", tau_l)?;
    check_threshold("tau_g", tau_g)?;
    let locals = local_scores_impl(universe, par);
    let vertices = eligible_vertices(universe, &locals, tau_l);
    let adj = adjacency_for(&vertices, table, cutoff_numerator(tau_g, universe.order()));
    Ok(CompatibilityGraph { order: universe.order(), tau_l, tau_g, vertices, adj })
}

pub(crate) fn graph_at_tau(
    order: usize,
    tau_l: Rational,
    tau_g: Rational,
    vertices: Vec<u32>,
    table: &PairTable,
) -> CompatibilityGraph {
    let adj = adjacency_for(&vertices, table, cutoff_numerator(tau_g, order));
    CompatibilityGraph { order, tau_l, tau_g, vertices, adj }
}

pub(crate) fn eligible_vertices_of(
    universe: &MatrixUniverse,
    tau_l: Rational,
    par: bool,
) -> (Vec<u32>, Vec<Rational>) {
    let locals = local_scores_impl(universe, par);
    let verts = eligible_vertices(universe, &locals, tau_l);
    (verts, locals)
}

/// Smallest-last vertex ranks; each maximal clique is expanded from exactly
/// one root: its minimum-rank member.
fn degeneracy_ranks(adj: &BitMatrix, n: usize) -> Vec<u32> {
    let mut cur: Vec<usize> = (0..n).map(|v| adj.degree(v)).collect();
    let max_deg = cur.iter().copied().max().unwrap_or(0);
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); max_deg + 1];
    for v in 0..n {
        buckets[cur[v]].push(v as u32);
    }
    let mut removed = vec![false; n];
    let mut rank = vec![0u32; n];
    let mut ptr = 0usize;
    for next_rank in 0..n {
        let v = loop {
            // Entries go stale when degrees drop; skip them lazily.
            while buckets[ptr].is_empty() {
                ptr += 1;
            }
            let cand = buckets[ptr].pop().unwrap() as usize;
            if !removed[cand] && cur[cand] == ptr {
                break cand;
            }
        };
        removed[v] = true;
        rank[v] = next_rank as u32;
        let row = adj.row(v);
        for (wi, &word) in row.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let u = wi * 64 + w.trailing_zeros() as usize;
                w &= w - 1;
                if !removed[u] {
                    cur[u] -= 1;
                    buckets[cur[u]].push(u as u32);
                    ptr = ptr.min(cur[u]);
                }
            }
        }
    }
    rank
}

/// Greedy colouring of `p` in list order. Returns the vertices regrouped by
/// ascending colour class alongside each vertex's 1-based colour; a clique
/// inside any prefix of the reordering is no larger than the prefix's last
/// colour.
fn color_order(adj: &BitMatrix, p: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut classes: Vec<Vec<u32>> = Vec::new();
    for &v in p {
        let vrow = adj.row(v as usize);
        match classes.iter_mut().find(|class| class.iter().all(|&u| !row_has(vrow, u))) {
            Some(class) => class.push(v),
            None => classes.push(vec![v]),
        }
    }
    let mut ordered = Vec::with_capacity(p.len());
    let mut colors = Vec::with_capacity(p.len());
    for (ci, class) in classes.iter().enumerate() {
        for &v in class {
            ordered.push(v);
            colors.push(ci as u32 + 1);
        }
    }
    (ordered, colors)
}

/// True when a greedy colouring of `p` needs fewer than `limit` colours, in
/// which case no clique of size `limit` fits inside `p`. Stops colouring as
/// soon as the limit is reached.
fn colors_below(adj: &BitMatrix, p: &[u32], limit: usize) -> bool {
    let mut classes: Vec<Vec<u32>> = Vec::new();
    for &v in p {
        let vrow = adj.row(v as usize);
        match classes.iter_mut().find(|class| class.iter().all(|&u| !row_has(vrow, u))) {
            Some(class) => class.push(v),
            None => {
                classes.push(vec![v]);
                if classes.len() >= limit {
                    return false;
                }
            }
        }
    }
    true
}

struct MaxSizeShared<'a> {
    adj: &'a BitMatrix,
    budget: AtomicI64,
    stop: AtomicBool,
    /// Largest clique size proven so far, shared across roots.
    best: AtomicUsize,
}

/// Branch and bound for the maximum clique size. Candidates are processed in
/// descending colour order; a branch dies once |r| plus the candidate's
/// colour cannot beat the shared best. Returns false on budget exhaustion.
fn max_size_expand(
    shared: &MaxSizeShared,
    r: &mut Vec<u32>,
    p: &[u32],
    witness: &Mutex<Vec<u32>>,
) -> bool {
    if shared.budget.fetch_sub(1, Ordering::Relaxed) <= 0 {
        shared.stop.store(true, Ordering::Relaxed);
        return false;
    }
    if p.is_empty() {
        let size = r.len();
        let prev = shared.best.fetch_max(size, Ordering::Relaxed);
        if size > prev {
            let mut w = witness.lock().unwrap();
            if size > w.len() {
                *w = r.clone();
            }
        }
        return true;
    }
    if r.len() + p.len() <= shared.best.load(Ordering::Relaxed) {
        return true;
    }
    let (ordered, colors) = color_order(shared.adj, p);
    for idx in (0..ordered.len()).rev() {
        let v = ordered[idx];
        if r.len() + colors[idx] as usize <= shared.best.load(Ordering::Relaxed) {
            return true;
        }
        let vrow = shared.adj.row(v as usize);
        let p2: Vec<u32> = ordered[..idx].iter().copied().filter(|&q| row_has(vrow, q)).collect();
        r.push(v);
        let keep_going = max_size_expand(shared, r, &p2, witness);
        r.pop();
        if !keep_going {
            return false;
        }
    }
    true
}

struct MaxSizeRun {
    best: usize,
    /// Positions of one clique attaining `best`.
    witness: Vec<u32>,
    calls: u64,
    exhausted: bool,
}

fn run_max_size(adj: &BitMatrix, n: usize, budget: u64, par: bool) -> MaxSizeRun {
    let rank = degeneracy_ranks(adj, n);
    let initial = budget.min(i64::MAX as u64) as i64;
    let shared = MaxSizeShared {
        adj,
        budget: AtomicI64::new(initial),
        stop: AtomicBool::new(false),
        best: AtomicUsize::new(0),
    };
    let witness: Mutex<Vec<u32>> = Mutex::new(Vec::new());
    let root = |v: usize| {
        if shared.stop.load(Ordering::Relaxed) {
            return;
        }
        let row = adj.row(v);
        let mut p = Vec::new();
        for (wi, &word) in row.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let u = wi * 64 + w.trailing_zeros() as usize;
                w &= w - 1;
                if rank[u] > rank[v] {
                    p.push(u as u32);
                }
            }
        }
        if 1 + p.len() <= shared.best.load(Ordering::Relaxed) {
            return;
        }
        let mut r = vec![v as u32];
        max_size_expand(&shared, &mut r, &p, &witness);
    };
    if par {
        parallel::map_indexed(n, root);
    } else {
        parallel::map_indexed_seq(n, root);
    }
    let remaining = shared.budget.load(Ordering::Relaxed).max(0);
    MaxSizeRun {
        best: shared.best.load(Ordering::Relaxed),
        witness: witness.into_inner().unwrap(),
        calls: (initial - remaining) as u64,
        exhausted: shared.stop.load(Ordering::Relaxed),
    }
}

struct BkShared<'a> {
    adj: &'a BitMatrix,
    budget: AtomicI64,
    stop: AtomicBool,
    /// Stats mode: largest maximal clique seen so far, used as a live bound.
    best: AtomicUsize,
    /// Cliques below this size are counted (stats mode) but not collected.
    floor: usize,
    stats: bool,
}

#[derive(Default)]
struct Found {
    cliques: Vec<Vec<u32>>,
    /// Maximal-clique tally by size; complete only at and above the final
    /// best size because smaller branches are pruned.
    counts: Vec<u64>,
}

fn merge_found(parts: Vec<Found>) -> Found {
    let mut all = Found::default();
    for p in parts {
        if p.counts.len() > all.counts.len() {
            all.counts.resize(p.counts.len(), 0);
        }
        for (i, c) in p.counts.iter().enumerate() {
            all.counts[i] += c;
        }
        all.cliques.extend(p.cliques);
    }
    all
}

/// One Bron–Kerbosch expansion. P and X are ascending vertex-position lists;
/// membership tests go through the bitset adjacency. Returns false once the
/// budget is exhausted.
fn bk(shared: &BkShared, r: &mut Vec<u32>, p: &[u32], x: &[u32], out: &mut Found) -> bool {
    if shared.budget.fetch_sub(1, Ordering::Relaxed) <= 0 {
        shared.stop.store(true, Ordering::Relaxed);
        return false;
    }
    if p.is_empty() && x.is_empty() {
        let size = r.len();
        if shared.stats {
            if size >= out.counts.len() {
                out.counts.resize(size + 1, 0);
            }
            out.counts[size] += 1;
            let prev = shared.best.fetch_max(size, Ordering::Relaxed);
            if size >= shared.floor && size >= prev {
                out.cliques.push(r.clone());
            }
        } else if size >= shared.floor {
            out.cliques.push(r.clone());
        }
        return true;
    }
    let needed = if shared.stats { shared.best.load(Ordering::Relaxed) } else { shared.floor };
    if r.len() + p.len() < needed {
        return true;
    }
    // Colouring bound: cliques reaching `needed` keep the class count at or
    // above the deficit, so pruning below it never drops one.
    if shared.stats
        && needed > r.len() + 1
        && colors_below(shared.adj, p, needed - r.len())
    {
        return true;
    }
    // Pivot: the P∪X vertex covering the most of P; its neighbours need no
    // expansion at this level.
    let mut pivot = usize::MAX;
    let mut covered = -1i64;
    for &u in p.iter().chain(x.iter()) {
        let row = shared.adj.row(u as usize);
        let cnt = p.iter().filter(|&&q| row_has(row, q)).count() as i64;
        if cnt > covered {
            covered = cnt;
            pivot = u as usize;
        }
    }
    let pivot_row = shared.adj.row(pivot);
    let ext: Vec<u32> = p.iter().copied().filter(|&v| !row_has(pivot_row, v)).collect();
    let mut cur_p = p.to_vec();
    let mut cur_x = x.to_vec();
    for v in ext {
        let vrow = shared.adj.row(v as usize);
        let p2: Vec<u32> = cur_p.iter().copied().filter(|&q| row_has(vrow, q)).collect();
        let x2: Vec<u32> = cur_x.iter().copied().filter(|&q| row_has(vrow, q)).collect();
        r.push(v);
        let keep_going = bk(shared, r, &p2, &x2, out);
        r.pop();
        if !keep_going {
            return false;
        }
        cur_p.retain(|&q| q != v);
        let at = cur_x.binary_search(&v).unwrap_err();
        cur_x.insert(at, v);
    }
    true
}

struct BkRun {
    found: Found,
    calls: u64,
    exhausted: bool,
}

fn run_bk(
    adj: &BitMatrix,
    n: usize,
    floor: usize,
    stats: bool,
    seed_best: usize,
    budget: u64,
    par: bool,
) -> BkRun {
    let rank = degeneracy_ranks(adj, n);
    let initial = budget.min(i64::MAX as u64) as i64;
    let shared = BkShared {
        adj,
        budget: AtomicI64::new(initial),
        stop: AtomicBool::new(false),
        best: AtomicUsize::new(seed_best),
        floor,
        stats,
    };
    let root = |v: usize| -> Found {
        let mut out = Found::default();
        if shared.stop.load(Ordering::Relaxed) {
            return out;
        }
        let mut p = Vec::new();
        let mut x = Vec::new();
        let row = adj.row(v);
        for (wi, &word) in row.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let u = wi * 64 + w.trailing_zeros() as usize;
                w &= w - 1;
                if rank[u] > rank[v] {
                    p.push(u as u32);
                } else {
                    x.push(u as u32);
                }
            }
        }
        let mut r = vec![v as u32];
        bk(&shared, &mut r, &p, &x, &mut out);
        out
    };
    let parts = if par {
        parallel::map_indexed(n, root)
    } else {
        parallel::map_indexed_seq(n, root)
    };
    let remaining = shared.budget.load(Ordering::Relaxed).max(0);
    BkRun {
        found: merge_found(parts),
        calls: (initial - remaining) as u64,
        exhausted: shared.stop.load(Ordering::Relaxed),
    }
}

fn positions_to_clique(positions: &[u32], vertices: &[u32]) -> Clique {
    let mut members: Vec<u32> = positions.iter().map(|&p| vertices[p as usize]).collect();
    members.sort_unstable();
    Clique { members }
}

fn budget_error(run: BkRun, vertices: &[u32]) -> Error {
    let mut partial: Vec<Clique> =
        run.found.cliques.iter().map(|c| positions_to_clique(c, vertices)).collect();
    partial.sort();
    Error::BudgetExhausted { calls: run.calls, partial }
}

/// All maximal cliques of size >= `size_floor`, members as universe indices,
/// canonically ordered.
pub fn max_cliques(g: &CompatibilityGraph, size_floor: usize, budget: u64) -> Result<Vec<Clique>> {
    max_cliques_impl(g, size_floor, budget, true)
}

pub fn max_cliques_seq(
    g: &CompatibilityGraph,
    size_floor: usize,
    budget: u64,
) -> Result<Vec<Clique>> {
    max_cliques_impl(g, size_floor, budget, false)
}

fn max_cliques_impl(
    g: &CompatibilityGraph,
    size_floor: usize,
    budget: u64,
    par: bool,
) -> Result<Vec<Clique>> {
    let run = run_bk(&g.adj, g.vertices.len(), size_floor, false, 0, budget, par);
    if run.exhausted {
        return Err(budget_error(run, &g.vertices));
    }
    let mut cliques: Vec<Clique> =
        run.found.cliques.iter().map(|c| positions_to_clique(c, &g.vertices)).collect();
    cliques.sort();
    Ok(cliques)
}

pub(crate) struct MaximumCliques {
    pub max_size: usize,
    pub count: u64,
    /// Every maximum clique, provided `max_size >= collect_floor`.
    pub cliques: Vec<Clique>,
}

/// Size of the maximum clique, how many maximal cliques attain it, and the
/// attaining cliques themselves when at least `collect_floor` large.
pub(crate) fn maximum_cliques(
    g: &CompatibilityGraph,
    collect_floor: usize,
    budget: u64,
    par: bool,
) -> Result<MaximumCliques> {
    let run = run_bk(&g.adj, g.vertices.len(), collect_floor.max(1), true, budget, par);
    if run.exhausted {
        return Err(budget_error(run, &g.vertices));
    }
    let max_size = run
        .found
        .counts
        .iter()
        .enumerate()
        .rev()
        .find(|(_, &c)| c > 0)
        .map(|(s, _)| s)
        .unwrap_or(0);
    let count = run.found.counts.get(max_size).copied().unwrap_or(0);
    let mut cliques: Vec<Clique> = run
        .found
        .cliques
        .iter()
        .filter(|c| c.len() == max_size)
        .map(|c| positions_to_clique(c, &g.vertices))
        .collect();
    cliques.sort();
    Ok(MaximumCliques { max_size, count, cliques })
}
