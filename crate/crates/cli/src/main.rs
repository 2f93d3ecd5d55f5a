//! Command-line front end: encoding generation, scoring, the clique sweep,
//! plotter G-code in both directions, and the assembly simulator.
//!
//! Every file-writing run leaves a `<output>.manifest.json` next to its
//! primary output recording the command, the full parameter set, input
//! hashes, and output paths; re-runs are byte-identical except the
//! timestamp line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use magcode_core::encoding::sylvester;
use magcode_core::force::{predicted_profile, FaceSpec};
use magcode_core::plotter::{
    encoding_to_gcode, gcode_to_encoding, job_estimate, GCodeProgram, ToolConfig,
};
use magcode_core::rational::parse_rational;
use magcode_core::score::{local_score, pair_report, translation_map};
use magcode_core::rotation::rotation_profile;
use magcode_core::search::{
    symmetry_classes, sylvester_permutation_universe, threshold_sweep, threshold_sweep_seq,
    write_fig_csv, PairTable, SweepParams, UniverseManifest, DEFAULT_EXPANSION_BUDGET,
};
use magcode_core::sim::{self, Scenario};
use magcode_core::{Encoding, Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "magcode", version, about = "Selective magnetic face encoding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Sylvester encoding, optionally with its row-permutation universe
    Gen(GenArgs),
    /// Score encodings: self vs mate, a pair, a translation map, or a rotation profile
    Score(ScoreArgs),
    /// Walk the pair threshold down until a clique of the target size appears
    Sweep(SweepArgs),
    /// Emit plotter G-code that stamps an encoding
    Gcode(GcodeArgs),
    /// Parse a G-code job back into the encoding it stamps
    VerifyGcode(VerifyGcodeArgs),
    /// Run the stochastic self-assembly simulator
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Sylvester exponent; the encoding has order 2^k
    #[arg(long, default_value_t = 3)]
    k: u32,
    /// Also enumerate the row-permutation universe and write its manifest
    #[arg(long)]
    permutations: bool,
    /// Encoding output path [default: h<order>.json]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Universe manifest output path [default: h<order>-universe.json]
    #[arg(long)]
    universe_out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ScoreMode {
    /// S_L of one encoding against its own mate
    Local,
    /// S_G of a pair over all four sign pairings and every pose
    Pair,
    /// Full per-offset correlation map of two encodings
    Translation,
    /// Centered rotation profile of two encodings, -180..180 in 10-degree steps
    Rotation,
}

#[derive(Args)]
struct ScoreArgs {
    /// local | pair | translation | rotation
    #[arg(long, value_enum)]
    mode: ScoreMode,
    /// Encoding JSON files: one for local mode, two otherwise
    #[arg(required = true, num_args = 1..=2)]
    encodings: Vec<PathBuf>,
    /// Grid subdivisions per cell on the rotation path
    #[arg(long, default_value_t = 10)]
    upsample: u32,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the force-domain profile CSV (translation mode only)
    #[arg(long)]
    force_csv: Option<PathBuf>,
    /// Face hardware parameters JSON for --force-csv [default: reference build]
    #[arg(long)]
    face_spec: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sylvester exponent of the universe; order 2^k, members (2^k)!
    #[arg(long, default_value_t = 3)]
    k: u32,
    /// Vertex floor on S_L; members scoring worse are dropped
    #[arg(long, default_value = "-1/4", allow_hyphen_values = true)]
    tau_l: String,
    /// First pair threshold tried
    #[arg(long, default_value = "-1/5", allow_hyphen_values = true)]
    tau_start: String,
    /// Threshold decrement per round; positive
    #[arg(long, default_value = "1/50", allow_hyphen_values = true)]
    step: String,
    /// Clique size that stops the walk
    #[arg(long, default_value_t = 12)]
    target: usize,
    /// Bron-Kerbosch expansion-call ceiling per round
    #[arg(long, default_value_t = DEFAULT_EXPANSION_BUDGET)]
    budget: u64,
    /// Fail if the pair cache is missing instead of building it
    #[arg(long)]
    no_build_cache: bool,
    /// Pair-cache directory [default: $MAGCODE_CACHE_DIR or ./magcode-cache]
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Sweep result output path
    #[arg(long, default_value = "sweep.json")]
    out: PathBuf,
    /// Also write clique_size,count,S_G rows for the size-distribution figure
    #[arg(long)]
    fig_csv: Option<PathBuf>,
    /// Run the search single-threaded
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct GcodeArgs {
    /// Encoding JSON file
    encoding: PathBuf,
    /// Tool configuration JSON [default: reference plotter]
    #[arg(long)]
    config: Option<PathBuf>,
    /// G-code output path [default: encoding path with .gcode extension]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyGcodeArgs {
    /// G-code file to parse
    gcode: PathBuf,
    /// Tool configuration JSON; must match the one used to emit the job
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the recovered encoding JSON here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fail unless the recovered encoding equals this encoding JSON
    #[arg(long)]
    expect: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON file
    scenario: PathBuf,
    /// Report output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run this many seeds (scenario seed upward) and emit per-seed CSV
    #[arg(long)]
    ensemble: Option<u64>,
    /// Run ensemble members single-threaded
    #[arg(long)]
    sequential: bool,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage errors are validation failures; --help/--version succeed.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = dispatch(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(match err.kind() {
            ErrorKind::Validation => 1,
            ErrorKind::Io => 2,
            ErrorKind::Budget => 3,
        });
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Score(args) => cmd_score(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gcode(args) => cmd_gcode(args),
        Command::VerifyGcode(args) => cmd_verify_gcode(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

/// Accumulates the reproducibility record for one run. Written as
/// `<primary output>.manifest.json`; field order is fixed and `parameters`
/// and `inputs` are sorted maps, so bytes differ only on the timestamp line.
#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    tool_version: &'static str,
    parameters: BTreeMap<&'static str, Value>,
    /// Input path -> SHA-256 of its bytes.
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    timestamp_unix_ms: u128,
}

impl RunManifest {
    fn new(command: &'static str) -> Self {
        Self {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            parameters: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            timestamp_unix_ms: 0,
        }
    }

    fn param(&mut self, key: &'static str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("manifest parameters are plain data");
        self.parameters.insert(key, value);
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// No-op when the run produced no files (stdout-only).
    fn write(mut self) -> Result<()> {
        let Some(primary) = self.outputs.first() else {
            return Ok(());
        };
        let mut name = PathBuf::from(primary).into_os_string();
        name.push(".manifest.json");
        self.timestamp_unix_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        let text = serde_json::to_string_pretty(&self)?;
        write_file(Path::new(&name), text.as_bytes())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn cache_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("MAGCODE_CACHE_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("magcode-cache"))
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let encoding = sylvester(args.k)?;
    let order = encoding.order();
    let out = args.out.unwrap_or_else(|| PathBuf::from(format!("h{order}.json")));

    let mut manifest = RunManifest::new("gen");
    manifest.param("k", args.k);
    manifest.param("permutations", args.permutations);
    manifest.param("out", out.display().to_string());

    encoding.write_json(&out)?;
    manifest.output(&out);
    println!("wrote {} (order {order}, hadamard: {})", out.display(), encoding.is_hadamard());

    if args.permutations {
        let universe = sylvester_permutation_universe(args.k)?;
        let upath = args
            .universe_out
            .unwrap_or_else(|| PathBuf::from(format!("h{order}-universe.json")));
        manifest.param("universe_out", upath.display().to_string());
        let described = UniverseManifest::describe(&universe);
        write_file(&upath, serde_json::to_string_pretty(&described)?.as_bytes())?;
        manifest.output(&upath);
        println!(
            "wrote {} ({} members, hash {})",
            upath.display(),
            universe.len(),
            universe.hash_hex()
        );
    }
    manifest.write()
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let want = if args.mode == ScoreMode::Local { 1 } else { 2 };
    if args.encodings.len() != want {
        return Err(Error::Validation(format!(
            "mode {:?} takes exactly {want} encoding file(s), got {}",
            args.mode,
            args.encodings.len()
        )));
    }
    if args.force_csv.is_some() && args.mode != ScoreMode::Translation {
        return Err(Error::Validation("--force-csv applies to translation mode only".into()));
    }
    if args.face_spec.is_some() && args.force_csv.is_none() {
        return Err(Error::Validation("--face-spec needs --force-csv".into()));
    }

    let mut manifest = RunManifest::new("score");
    manifest.param("mode", format!("{:?}", args.mode).to_lowercase());
    manifest.param(
        "encodings",
        args.encodings.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    );
    for path in &args.encodings {
        manifest.input(path)?;
    }

    let a = Encoding::read_json(&args.encodings[0])?;
    let (data, summary) = match args.mode {
        ScoreMode::Local => {
            let report = local_score(&a);
            let text = serde_json::to_string_pretty(&report)?;
            let line = format!("S_L = {} at {}", report.value, serde_json::to_string(&report.config)?);
            (text.into_bytes(), line)
        }
        ScoreMode::Pair => {
            let b = Encoding::read_json(&args.encodings[1])?;
            let report = pair_report(&a, &b)?;
            let text = serde_json::to_string_pretty(&report)?;
            let line = format!(
                "S_G = {} at {} (mate_flipped: {})",
                report.score,
                serde_json::to_string(&report.config)?,
                report.mate_flipped
            );
            (text.into_bytes(), line)
        }
        ScoreMode::Translation => {
            let b = Encoding::read_json(&args.encodings[1])?;
            let map = translation_map(&a, &b)?;
            if let Some(force_path) = &args.force_csv {
                let spec = match &args.face_spec {
                    Some(path) => {
                        manifest.input(path)?;
                        manifest.param("face_spec", path.display().to_string());
                        let spec: FaceSpec = read_json_file(path)?;
                        spec
                    }
                    None => FaceSpec::default(),
                };
                let profile = predicted_profile(&a, &b, &spec)?;
                let mut buf = Vec::new();
                profile.write_csv(&mut buf)?;
                write_file(force_path, &buf)?;
                manifest.param("force_csv", force_path.display().to_string());
                manifest.output(force_path);
                println!("wrote {}", force_path.display());
            }
            let runner_up = map
                .min_excluding_origin()
                .map(|(num, (dx, dy))| format!("{num}/{} at ({dx}, {dy})", map.denominator()))
                .unwrap_or_else(|| "none".into());
            let line = format!(
                "origin {}/{}, worst off-origin attraction {}",
                map.numerator(0, 0),
                map.denominator(),
                runner_up
            );
            (map.to_csv_string().into_bytes(), line)
        }
        ScoreMode::Rotation => {
            let b = Encoding::read_json(&args.encodings[1])?;
            manifest.param("upsample", args.upsample);
            let profile = rotation_profile(&a, &b, args.upsample)?;
            let line = format!("{} angles, upsample {}", profile.theta_deg.len(), args.upsample);
            (profile.to_csv_string().into_bytes(), line)
        }
    };

    match &args.out {
        Some(path) => {
            manifest.param("out", path.display().to_string());
            write_file(path, &data)?;
            // Manifest lists the report first so it names the manifest file.
            manifest.outputs.insert(0, path.display().to_string());
            println!("wrote {}", path.display());
            println!("{summary}");
            manifest.write()
        }
        None => {
            let text = String::from_utf8(data).expect("reports are utf-8");
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            manifest.write()
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let params = SweepParams {
        tau_l: parse_rational(&args.tau_l)?,
        tau_start: parse_rational(&args.tau_start)?,
        step: parse_rational(&args.step)?,
        target_size: args.target,
        budget: args.budget,
    };
    let dir = cache_dir(args.cache_dir.clone());
    let universe = sylvester_permutation_universe(args.k)?;

    let mut manifest = RunManifest::new("sweep");
    manifest.param("k", args.k);
    manifest.param("tau_l", params.tau_l.to_string());
    manifest.param("tau_start", params.tau_start.to_string());
    manifest.param("step", params.step.to_string());
    manifest.param("target", args.target);
    manifest.param("budget", args.budget);
    manifest.param("sequential", args.sequential);
    manifest.param("cache_dir", dir.display().to_string());
    manifest.param("universe_hash", universe.hash_hex());
    manifest.param("out", args.out.display().to_string());

    let (table, reused) = PairTable::load_or_build(&universe, &dir, !args.no_build_cache)?;
    manifest.param("cache_file", PairTable::cache_file_name(&universe));
    manifest.param("cache_reused", reused);
    eprintln!(
        "pair table {} ({} members)",
        if reused { "loaded from cache" } else { "built and cached" },
        universe.len()
    );

    let result = if args.sequential {
        threshold_sweep_seq(&universe, &table, params)?
    } else {
        threshold_sweep(&universe, &table, params)?
    };

    for step in &result.schedule {
        println!(
            "tau {}: max clique size {} ({} cliques)",
            step.tau, step.max_clique_size, step.max_clique_count
        );
    }
    let analysis = symmetry_classes(&result.cliques);
    println!(
        "final tau {}: {} maximum clique(s), {} symmetry class(es)",
        result.final_tau,
        result.cliques.len(),
        analysis.classes.len()
    );
    if let Some(best) = result.cliques.first() {
        println!(
            "clique 0: size {}, S_G {}, S_L {}",
            best.members.len(),
            best.achieved_s_g,
            best.achieved_s_l
        );
    }

    write_file(&args.out, serde_json::to_string_pretty(&result)?.as_bytes())?;
    manifest.output(&args.out);
    println!("wrote {}", args.out.display());
    if let Some(fig) = &args.fig_csv {
        manifest.param("fig_csv", fig.display().to_string());
        let mut buf = Vec::new();
        write_fig_csv(&result, &mut buf)?;
        write_file(fig, &buf)?;
        manifest.output(fig);
        println!("wrote {}", fig.display());
    }
    manifest.write()
}

fn load_tool_config(path: Option<&Path>, manifest: &mut RunManifest) -> Result<ToolConfig> {
    match path {
        Some(path) => {
            manifest.input(path)?;
            manifest.param("config", path.display().to_string());
            read_json_file(path)
        }
        None => Ok(ToolConfig::default()),
    }
}

fn cmd_gcode(args: GcodeArgs) -> Result<()> {
    let mut manifest = RunManifest::new("gcode");
    manifest.param("encoding", args.encoding.display().to_string());
    manifest.input(&args.encoding)?;
    let cfg = load_tool_config(args.config.as_deref(), &mut manifest)?;

    let encoding = Encoding::read_json(&args.encoding)?;
    let program = encoding_to_gcode(&encoding, &cfg)?;
    let out = args.out.unwrap_or_else(|| args.encoding.with_extension("gcode"));
    manifest.param("out", out.display().to_string());

    write_file(&out, program.to_text().as_bytes())?;
    manifest.output(&out);
    println!(
        "wrote {} ({} stamps, est {:.0} s)",
        out.display(),
        program.plunge_count(),
        job_estimate(&program)
    );
    manifest.write()
}

fn cmd_verify_gcode(args: VerifyGcodeArgs) -> Result<()> {
    let mut manifest = RunManifest::new("verify-gcode");
    manifest.param("gcode", args.gcode.display().to_string());
    manifest.input(&args.gcode)?;
    let cfg = load_tool_config(args.config.as_deref(), &mut manifest)?;

    let text = std::fs::read_to_string(&args.gcode)?;
    let program = GCodeProgram::parse(&text)?;
    let encoding = gcode_to_encoding(&program, &cfg)?;
    println!("stamps: {}", program.plunge_count());
    println!("order: {}", encoding.order());

    if let Some(expect_path) = &args.expect {
        manifest.input(expect_path)?;
        manifest.param("expect", expect_path.display().to_string());
        let expected = Encoding::read_json(expect_path)?;
        if expected.order() != encoding.order() || expected.cells() != encoding.cells() {
            return Err(Error::Validation(format!(
                "recovered encoding does not match {}",
                expect_path.display()
            )));
        }
        println!("matches {}", expect_path.display());
    }
    if let Some(out) = &args.out {
        manifest.param("out", out.display().to_string());
        encoding.write_json(out)?;
        manifest.output(out);
        println!("wrote {}", out.display());
    }
    manifest.write()
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("simulate");
    manifest.param("scenario", args.scenario.display().to_string());
    manifest.input(&args.scenario)?;

    let scenario = Scenario::read_json(&args.scenario)?;
    let base = args.scenario.parent().unwrap_or_else(|| Path::new("."));
    if let Some(clique_file) = &scenario.clique_file {
        let resolved = base.join(clique_file);
        manifest.input(&resolved)?;
        manifest.param("clique_index", scenario.clique_index);
    }
    let (target, fluid, opts) = scenario.resolve(base)?;
    manifest.param("f_f", fluid.f_f.to_string());
    manifest.param("seed", fluid.seed);
    manifest.param("max_steps", opts.max_steps);
    manifest.param("sequential", args.sequential);

    let (data, summary) = match args.ensemble {
        Some(0) => return Err(Error::Validation("--ensemble needs at least one run".into())),
        Some(n) => {
            manifest.param("ensemble", n);
            let seeds: Vec<u64> = (0..n).map(|i| fluid.seed.wrapping_add(i)).collect();
            let rows = if args.sequential {
                sim::ensemble_seq(&target, fluid.f_f, &opts, &seeds)?
            } else {
                sim::ensemble(&target, fluid.f_f, &opts, &seeds)?
            };
            let completed = rows.iter().filter(|r| r.completed).count();
            let events: u64 = rows.iter().map(|r| r.misassembly_events).sum();
            let line = format!("{completed}/{n} runs completed, {events} misassembly events");
            (sim::ensemble_csv_string(&rows).into_bytes(), line)
        }
        None => {
            let report = sim::run(&target, &fluid, &opts)?;
            let line = format!(
                "completed: {} after {} steps ({} misassembly events, {} permanent)",
                report.completed, report.steps, report.misassembly_events,
                report.permanent_misassemblies
            );
            (serde_json::to_string_pretty(&report)?.into_bytes(), line)
        }
    };

    match &args.out {
        Some(path) => {
            manifest.param("out", path.display().to_string());
            write_file(path, &data)?;
            manifest.output(path);
            println!("wrote {}", path.display());
            println!("{summary}");
            manifest.write()
        }
        None => {
            let text = String::from_utf8(data).expect("reports are utf-8");
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            manifest.write()
        }
    }
}

