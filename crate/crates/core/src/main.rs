use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chansem::dsp::Window;
use chansem::engine::{default_rules, LabelMap, RuleSet};
use chansem::io::{read_trace, write_pdp_csv, write_trace, Framing};
use chansem::pipeline::{characterize, PipelineConfig};
use chansem::scene::{run_scene, Scene};
use chansem::semantic::{
    read_map, validate_map, write_map, BehaviorKind, Record, RecordType, SemanticQuery,
    SemanticStore,
};
use chansem::tracking::trajectory_stats;
use chansem::{Error, Result};

#[derive(Parser)]
#[command(
    name = "chansem",
    version,
    about = "Semantic characterization of multipath channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a sounding trace from a scene description.
    Simulate(SimulateArgs),
    /// Run the characterization pipeline and write the semantic map.
    Characterize(CharacterizeArgs),
    /// Query a semantic store; prints matching records as JSON lines.
    Query(QueryArgs),
    /// Check a semantic map export against the model invariants.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceFormat {
    Binary,
    Jsonl,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    format: TraceFormat,
    /// Overrides the scene's noise seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CharacterizeArgs {
    #[arg(long, conflicts_with = "trace", required_unless_present = "trace")]
    scene: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// JSON pipeline configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Event rule file (defaults to the bundled rule set).
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Delay/distance label windows; overrides trace ground truth.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    window: Option<WindowArg>,
    #[arg(long)]
    noise_margin_db: Option<f64>,
    #[arg(long)]
    no_interpolation: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    gate_ns: Option<f64>,
    #[arg(long)]
    max_gap: Option<usize>,
    #[arg(long)]
    epsilon_ns_per_s: Option<f64>,
    #[arg(long)]
    behavior_window: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Rectangular,
    Hann,
    BlackmanHarris,
}

#[derive(Clone, Copy, ValueEnum)]
enum TypeArg {
    Status,
    Behavior,
    Event,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    store: PathBuf,
    /// Start of the time window [s].
    #[arg(long)]
    from: Option<f64>,
    /// End of the time window [s].
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    kind: Option<BehaviorKind>,
    #[arg(long)]
    delay_min_ns: Option<f64>,
    #[arg(long)]
    delay_max_ns: Option<f64>,
    /// Restrict to one record id.
    #[arg(long)]
    id: Option<String>,
    /// Also print everything each match (transitively) contains.
    #[arg(long)]
    descendants: bool,
    /// Also print everything that (transitively) contains each match.
    #[arg(long)]
    ancestors: bool,
    /// Only print records of this type.
    #[arg(long = "type", value_enum)]
    record_type: Option<TypeArg>,
}

#[derive(Args)]
struct ValidateArgs {
    map: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CHANSEM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Characterize(a) => run_characterize(a),
        Command::Query(a) => query(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn simulate(a: SimulateArgs) -> Result<ExitCode> {
    let mut scene = Scene::load(&a.scene)?;
    if let Some(seed) = a.seed {
        scene.rng_seed = seed;
    }
    let trace = run_scene(&scene)?;
    create_dir(&a.out)?;
    let name = match a.format {
        TraceFormat::Binary => "trace.bin",
        TraceFormat::Jsonl => "trace.jsonl",
    };
    let path = a.out.join(name);
    debug_assert_eq!(
        Framing::for_path(&path),
        match a.format {
            TraceFormat::Binary => Framing::Binary,
            TraceFormat::Jsonl => Framing::JsonLines,
        }
    );
    write_trace(&path, &trace)?;
    let s = &scene.sounding;
    println!(
        "{}: {} snapshots, {} scatterers, {:.3} GHz ± {:.1} MHz, {} tones -> {}",
        scene.id,
        trace.len(),
        scene.scatterers.len(),
        s.carrier / 1e9,
        s.bandwidth / 2e6,
        s.n_tones,
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_config(a: &CharacterizeArgs) -> Result<PipelineConfig> {
    let mut c = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(w) = a.window {
        c.window = match w {
            WindowArg::Rectangular => Window::Rectangular,
            WindowArg::Hann => Window::Hann,
            WindowArg::BlackmanHarris => Window::BlackmanHarris,
        };
    }
    if let Some(v) = a.noise_margin_db {
        c.noise_margin_db = v;
    }
    if a.no_interpolation {
        c.interpolate = false;
    }
    if a.k.is_some() {
        c.k = a.k;
    }
    if let Some(v) = a.k_max {
        c.k_max = v;
    }
    if let Some(v) = a.restarts {
        c.restarts = v;
    }
    if let Some(v) = a.gate_ns {
        c.tracker.gate = v * 1e-9;
    }
    if let Some(v) = a.max_gap {
        c.tracker.max_gap = v;
    }
    if let Some(v) = a.epsilon_ns_per_s {
        c.behavior.epsilon_ns_per_s = v;
    }
    if let Some(v) = a.behavior_window {
        c.behavior.window = v;
    }
    c.validate()?;
    Ok(c)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn run_characterize(a: CharacterizeArgs) -> Result<ExitCode> {
    let config = load_config(&a)?;
    let rules = match &a.rules {
        Some(p) => RuleSet::from_json(&read_text(p)?)?,
        None => default_rules(),
    };
    let labels = match &a.labels {
        Some(p) => Some(LabelMap::from_json(&read_text(p)?)?),
        None => None,
    };
    let trace = match (&a.scene, &a.trace) {
        (Some(scene), _) => run_scene(&Scene::load(scene)?)?,
        (None, Some(trace)) => read_trace(trace)?,
        (None, None) => unreachable!("clap enforces one input"),
    };
    log::info!("characterizing {} snapshots", trace.len());
    let out = characterize(&trace, &config, &rules, labels.as_ref())?;

    create_dir(&a.out)?;
    write_map(&out.map, &a.out.join("semantic_map.jsonl"))?;

    let path = a.out.join("trajectories.jsonl");
    let ctx = |e| Error::io(format!("writing {}", path.display()), e);
    let mut w = BufWriter::new(File::create(&path).map_err(ctx)?);
    for tr in &out.trajectories {
        let line = serde_json::json!({ "trajectory": tr, "stats": trajectory_stats(tr) });
        writeln!(w, "{line}").map_err(ctx)?;
    }
    w.flush().map_err(ctx)?;

    let path = a.out.join("pdp.csv");
    let ctx = |e| Error::io(format!("writing {}", path.display()), e);
    write_pdp_csv(
        &out.pdps(),
        BufWriter::new(File::create(&path).map_err(ctx)?),
    )
    .map_err(ctx)?;

    let store_path = a.out.join("semantics.store");
    if store_path.exists() {
        fs::remove_file(&store_path)
            .map_err(|e| Error::io(format!("replacing {}", store_path.display()), e))?;
    }
    let mut store = SemanticStore::open(&store_path)?;
    store.store(&out.map)?;

    println!(
        "{}: {} statuses, {} behaviors, {} events, {} trajectories -> {}",
        out.map.meta.trace_id,
        out.map.statuses.len(),
        out.map.behaviors.len(),
        out.map.events.len(),
        out.trajectories.len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn query(a: QueryArgs) -> Result<ExitCode> {
    let store = SemanticStore::open_existing(&a.store)?;
    let mut filters = Vec::new();
    if a.from.is_some() || a.to.is_some() {
        filters.push(SemanticQuery::TimeInterval {
            start: a.from.unwrap_or(f64::NEG_INFINITY),
            end: a.to.unwrap_or(f64::INFINITY),
        });
    }
    if let Some(l) = &a.label {
        filters.push(SemanticQuery::Label(l.clone()));
    }
    if let Some(k) = a.kind {
        filters.push(SemanticQuery::Kind(k));
    }
    if a.delay_min_ns.is_some() || a.delay_max_ns.is_some() {
        filters.push(SemanticQuery::DelayWindow {
            min: a.delay_min_ns.map_or(f64::NEG_INFINITY, |v| v * 1e-9),
            max: a.delay_max_ns.map_or(f64::INFINITY, |v| v * 1e-9),
        });
    }

    let mut matched: Vec<Record> = if filters.is_empty() {
        store.to_map().records().collect()
    } else {
        store.query(&SemanticQuery::And(filters))?
    };
    if let Some(id) = &a.id {
        matched.retain(|r| r.id() == id);
    }

    let mut out = matched.clone();
    for r in &matched {
        if a.descendants {
            out.extend(store.query(&SemanticQuery::DescendantsOf(r.id().to_string()))?);
        }
        if a.ancestors {
            out.extend(store.query(&SemanticQuery::AncestorsOf(r.id().to_string()))?);
        }
    }
    if let Some(t) = a.record_type {
        let t = match t {
            TypeArg::Status => RecordType::Status,
            TypeArg::Behavior => RecordType::Behavior,
            TypeArg::Event => RecordType::Event,
        };
        out.retain(|r| r.record_type() == t);
    }
    out.sort_by(|x, y| {
        x.start_time()
            .total_cmp(&y.start_time())
            .then_with(|| x.id().cmp(y.id()))
    });
    let mut seen = BTreeSet::new();
    out.retain(|r| seen.insert(r.id().to_string()));

    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    let ctx = |e| Error::io("writing stdout", e);
    for r in &out {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io("writing stdout", e.into()))?;
        writeln!(w).map_err(ctx)?;
    }
    w.flush().map_err(ctx)?;
    Ok(ExitCode::SUCCESS)
}

fn validate(a: ValidateArgs) -> Result<ExitCode> {
    let map = read_map(&a.map)?;
    let report = validate_map(&map);
    if report.is_valid() {
        println!(
            "valid: {} statuses, {} behaviors, {} events",
            map.statuses.len(),
            map.behaviors.len(),
            map.events.len()
        );
        Ok(ExitCode::SUCCESS)
    } else {
        eprint!("{report}");
        eprintln!("{} violation(s)", report.len());
        Ok(ExitCode::from(1))
    }
}
