//! The acceptance gate. One test per shipped guarantee, each printing a
//! single `ACCEPTANCE Cn ... PASS/FAIL` line (run with `-- --nocapture` to
//! see them live).
//!
//! C4, C5, C6, and C10 share one threshold sweep over the 40,320 H8 row
//! permutations. The pair table behind it loads from `$MAGCODE_CACHE_DIR`
//! (default: `target/tmp/magcode-cache`) and is built there on first use;
//! the build scores ~8.1x10^8 pairs and takes on the order of an hour on
//! one core, while a cached run finishes in minutes.

mod common;

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use magcode_core::encoding::checkerboard;
use magcode_core::force::{compare_sse, predicted_profile, FaceSpec};
use magcode_core::plotter::{encoding_to_gcode, gcode_to_encoding, ToolConfig};
use magcode_core::rational::{ratio, to_f64};
use magcode_core::rotation::rotation_profile;
use magcode_core::score::{
    aligned_score, local_score, pair_score, quarter_rotation_score, translation_map,
};
use magcode_core::search::{
    max_cliques, select_clique, symmetry_classes, sylvester_permutation_universe, CliqueSummary,
    CompatibilityGraph, PairTable, SweepParams, SweepResult,
};
use magcode_core::sim::{self, build_meta_cube_target, FluidParams, RunOptions};
use magcode_core::Encoding;

fn criterion<T>(name: &str, body: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    match outcome {
        Ok(value) => {
            println!("ACCEPTANCE {name} ... PASS ({elapsed:.2?})");
            value
        }
        Err(panic) => {
            println!("ACCEPTANCE {name} ... FAIL ({elapsed:.2?})");
            resume_unwind(panic)
        }
    }
}

fn cache_dir() -> PathBuf {
    std::env::var_os("MAGCODE_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("magcode-cache"))
}

struct SweepFixture {
    result: SweepResult,
    selected: CliqueSummary,
}

static SWEEP: OnceLock<SweepFixture> = OnceLock::new();

fn sweep_fixture() -> &'static SweepFixture {
    SWEEP.get_or_init(|| {
        let universe = sylvester_permutation_universe(3).expect("H8 permutation universe");
        let (table, _) =
            PairTable::load_or_build(&universe, cache_dir(), true).expect("pair table");
        let result = magcode_core::search::threshold_sweep(&universe, &table, SweepParams::default())
            .expect("sweep reaches the target size");
        let selected = select_clique(&result, 0).expect("at least one clique");
        SweepFixture { result, selected }
    })
}

#[test]
fn c01_order4_census() {
    criterion("C1 order-4 census = 768", || {
        let start = Instant::now();
        let candidates = magcode_core::search::enumerate_order4();
        let census = magcode_core::search::filter_hadamard_seq(&candidates).expect("filter");
        let elapsed = start.elapsed();
        assert_eq!(census.len(), 768);
        assert!(elapsed.as_secs() < 60, "census took {elapsed:?}, budget 60 s");
    });
}

#[test]
fn c02_mate_algebra() {
    criterion("C2 mate algebra on 1,000 random encodings", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1_000 {
            let order = rng.gen_range(2..=8);
            let e = Encoding::random(order, &mut rng);
            assert_eq!(aligned_score(&e, &e).unwrap(), ratio(1, 1));
            assert_eq!(aligned_score(&e, &e.mate()).unwrap(), ratio(-1, 1));
        }
    });
}

#[test]
fn c03_axis_agnosticism() {
    criterion("C3 axis agnosticism over all 40,320 H8 permutations", || {
        let universe = sylvester_permutation_universe(3).expect("H8 permutation universe");
        for member in universe.members() {
            let map = translation_map(member, &member.mate()).expect("same order");
            for d in -7..=7i32 {
                if d == 0 {
                    continue;
                }
                assert_eq!(map.numerator(d, 0), 0, "pure-X offset {d} for {member:?}");
                assert_eq!(map.numerator(0, d), 0, "pure-Y offset {d} for {member:?}");
            }
        }
    });
}

#[test]
fn c04_threshold_sweep() {
    criterion("C4 sweep terminates at tau* = -0.36 with a size-12 clique", || {
        let fixture = sweep_fixture();
        let result = &fixture.result;
        assert_eq!(result.params.tau_l, ratio(-1, 4));
        assert_eq!(result.params.tau_start, ratio(-1, 5));
        assert_eq!(result.params.step, ratio(1, 50));
        assert_eq!(result.final_tau, ratio(-9, 25), "final tau {}", result.final_tau);
        let max_size = result.cliques.iter().map(|c| c.members.len()).max().unwrap_or(0);
        assert!(max_size >= 12, "largest clique has {max_size} members");

        // Soft check: the size-12 count. A mismatch prints a
        // symmetry-deduplication analysis instead of failing.
        let twelve = result.cliques.iter().filter(|c| c.members.len() == 12).count();
        if twelve == 4 {
            println!("C4 soft check: exactly 4 size-12 cliques");
        } else {
            let analysis = symmetry_classes(&result.cliques);
            println!(
                "C4 soft check MISMATCH: {twelve} size-12 cliques (expected 4); \
                 {} symmetry classes under rotation/transpose/negation:",
                analysis.classes.len()
            );
            for (i, class) in analysis.classes.iter().enumerate() {
                println!("  class {i}: {} cliques, representative {:?}", class.len(), class[0]);
            }
        }
    });
}

#[test]
fn c05_clique_bounds() {
    criterion("C5 clique bounds: S_L >= -1/4, pairs >= -23/64", || {
        let fixture = sweep_fixture();
        let members = &fixture.selected.member_encodings;
        assert_eq!(members.len(), 12);
        for member in members {
            let report = local_score(member);
            assert!(
                report.value >= ratio(-1, 4),
                "member local score {} below -1/4",
                report.value
            );
        }
        let floor = ratio(-23, 64);
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                let score = pair_score(a, b).expect("same order");
                assert!(score >= floor, "pair score {score} below -23/64");
            }
        }
        assert!(fixture.selected.achieved_s_g >= floor);
    });
}

#[test]
fn c06_rotation_profile() {
    criterion("C6 rotation profile: zeros at 90n, -1 at 0, bounded elsewhere", || {
        let fixture = sweep_fixture();
        let member = &fixture.selected.member_encodings[0];
        let mate = member.mate();
        let profile = rotation_profile(member, &mate, 10).expect("profile");
        assert_eq!(profile.theta_deg.len(), 37);
        for (theta, score) in profile.theta_deg.iter().zip(&profile.scores) {
            match *theta as i64 {
                0 => assert_eq!(*score, ratio(-1, 1), "0 degrees"),
                90 | -90 | 180 | -180 => assert_eq!(*score, ratio(0, 1), "{theta} degrees"),
                _ => assert!(
                    *score >= ratio(-1, 4),
                    "score {score} at {theta} degrees below -1/4"
                ),
            }
        }
        let fine = rotation_profile(member, &mate, 20).expect("profile");
        for ((theta, coarse), fine) in
            profile.theta_deg.iter().zip(&profile.scores).zip(&fine.scores)
        {
            let gap = (to_f64(*coarse) - to_f64(*fine)).abs();
            assert!(gap <= 0.05, "upsample 10 vs 20 differ by {gap} at {theta} degrees");
        }
    });
}

#[test]
fn c07_oracle_equivalence() {
    criterion("C7 scoring and cliques match brute-force oracles", || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1_000 {
            let order = rng.gen_range(1..=4);
            let a = Encoding::random(order, &mut rng);
            let b = Encoding::random(order, &mut rng);
            assert_eq!(aligned_score(&a, &b).unwrap(), common::naive_score(&a, &b, 0, 0), "aligned");
            let map = translation_map(&a, &b).unwrap();
            let n = order as i32;
            for dy in -(n - 1)..n {
                for dx in -(n - 1)..n {
                    assert_eq!(
                        map.numerator(dx, dy),
                        common::naive_translation_num(&a, &b, dx, dy),
                        "offset ({dx}, {dy})"
                    );
                }
            }
            for turns in 0..4 {
                assert_eq!(
                    quarter_rotation_score(&a, &b, turns).unwrap(),
                    common::naive_score(&a, &common::naive_rotate(&b, turns), 0, 0),
                    "turns {turns}"
                );
            }
            assert_eq!(local_score(&a).value, common::naive_local_score(&a), "local");
            assert_eq!(pair_score(&a, &b).unwrap(), common::naive_pair_score(&a, &b), "pair");
        }

        for case in 0..200 {
            let n = rng.gen_range(1..=20usize);
            let mut nbr = vec![0u32; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(0.5) {
                        nbr[i] |= 1 << j;
                        nbr[j] |= 1 << i;
                    }
                }
            }
            let graph = CompatibilityGraph::from_neighbor_masks(&nbr);
            let maximal = max_cliques(&graph, 1, 1 << 40).expect("within budget");
            // Every reported clique is a clique and is maximal.
            for clique in &maximal {
                for (i, &a) in clique.members.iter().enumerate() {
                    for &b in &clique.members[i + 1..] {
                        assert!(nbr[a as usize] & (1 << b) != 0, "case {case}: non-edge {a}-{b}");
                    }
                }
                let inside: u32 = clique.members.iter().map(|&v| 1 << v).sum();
                for v in 0..n as u32 {
                    if inside & (1 << v) != 0 {
                        continue;
                    }
                    assert!(
                        inside & !nbr[v as usize] != 0,
                        "case {case}: clique {:?} extends by {v}",
                        clique.members
                    );
                }
            }
            // The maximum-size subset matches the power-set oracle exactly.
            let (want_size, want) = common::powerset_max_cliques(n, &nbr);
            let got_size = maximal.iter().map(|c| c.members.len()).max().unwrap_or(0);
            assert_eq!(got_size, want_size, "case {case}");
            let mut got: Vec<Vec<u32>> = maximal
                .into_iter()
                .filter(|c| c.members.len() == want_size)
                .map(|c| c.members)
                .collect();
            got.sort();
            assert_eq!(got, want, "case {case} with {n} vertices");
        }
    });
}

#[test]
fn c08_checkerboard_force() {
    criterion("C8 checkerboard force profile and SSE identity", || {
        let board = checkerboard(8).expect("order 8");
        let mate = board.mate();
        let map = translation_map(&board, &mate).expect("same order");
        assert_eq!(map.numerator(1, 0), 56, "+56/64 at (1, 0)");
        assert_eq!(map.numerator(1, 1), -49, "-49/64 at (1, 1)");

        let close = |x: f64, y: f64| (x - y).abs() < 1e-9;
        let spec = FaceSpec::default();
        assert!(close(spec.peak_force_mn(), 160.0));
        let profile = predicted_profile(&board, &mate, &spec).expect("profile");
        let peak = profile
            .points()
            .iter()
            .map(|p| p.force_mn)
            .fold(f64::INFINITY, f64::min);
        assert!(close(peak, -160.0), "peak attraction {peak}");
        let origin = profile.points().iter().find(|p| (p.dx, p.dy) == (0, 0)).unwrap();
        assert!(close(origin.force_mn, -160.0));
        assert_eq!(compare_sse(&profile, &profile).expect("same grid"), 0.0);
    });
}

#[test]
fn c09_gcode_round_trip() {
    criterion("C9 G-code round-trip over 500 encodings x 10 configs", || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let configs: Vec<ToolConfig> = (0..10)
            .map(|_| {
                // The idle-magnet clearance needs offset > 8 x pitch.
                let cfg = ToolConfig {
                    pixel_pitch_mm: rng.gen_range(1.0..4.0),
                    dual_magnet_offset_mm: rng.gen_range(33.0..60.0),
                    plunge_z_mm: rng.gen_range(-1.0..1.0),
                    travel_z_mm: rng.gen_range(3.0..9.0),
                    feed_xy_mm_min: rng.gen_range(500.0..4000.0),
                    feed_z_mm_min: rng.gen_range(100.0..1000.0),
                    face_origin_mm: (rng.gen_range(15.0..40.0), rng.gen_range(15.0..40.0)),
                    travel_extent_mm: (300.0, 300.0),
                    dwell_s: rng.gen_range(0.0..1.0),
                };
                cfg.validate(8).expect("generated config is valid");
                cfg
            })
            .collect();
        for case in 0..500 {
            let order = rng.gen_range(1..=8usize);
            let e = Encoding::random(order, &mut rng);
            let cfg = &configs[case % configs.len()];
            let program = encoding_to_gcode(&e, cfg).expect("emit");
            assert_eq!(program.plunge_count(), order * order, "stamp count");
            let back = gcode_to_encoding(&program, cfg).expect("parse back");
            assert_eq!(back.order(), e.order());
            assert_eq!(back.cells(), e.cells(), "case {case}");
        }
    });
}

#[test]
fn c10_assembly_window() {
    criterion("C10 assembly window: -0.6 completes cleanly, -0.2 misassembles", || {
        let fixture = sweep_fixture();
        let target = build_meta_cube_target(&fixture.selected.member_encodings)
            .expect("clique designs form a target");

        let opts = RunOptions { max_steps: 10_000_000, log_limit: 0, ..Default::default() };
        for seed in 0..20u64 {
            let fluid = FluidParams { f_f: ratio(-3, 5), seed };
            let report = sim::run(&target, &fluid, &opts).expect("run");
            assert!(report.completed, "seed {seed} did not complete in 1e7 steps");
            assert_eq!(
                report.permanent_misassemblies, 0,
                "seed {seed} ended with wrong bonds standing"
            );
        }

        let opts = RunOptions { max_steps: 100_000, log_limit: 0, ..Default::default() };
        let mut events = 0u64;
        for seed in 0..20u64 {
            let fluid = FluidParams { f_f: ratio(-1, 5), seed };
            let report = sim::run(&target, &fluid, &opts).expect("run");
            events += report.misassembly_events;
        }
        assert!(events >= 1, "no misassembly events at F_f = -0.2 across 20 seeds");
    });
}
