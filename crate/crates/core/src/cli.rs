//! `dockaug` command-line front end.
//!
//! Exit codes: 0 success, 2 bad configuration, 3 unreadable or inconsistent
//! data, 4 no feasible docks for some source, 5 verification failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::augment::{augment_batch, BatchConfig, SourceFailure};
use crate::dataset::{Dataset, DatasetError, DatasetSpec, FailureEntry, SourceStats, Stats, STATS};
use crate::demo::{validate_demo, Demonstration, Provenance, ValidationRules};
use crate::harness::nn::{nn_policy_eval, NnConfig, SuccessTable};
use crate::harness::replay::replay;
use crate::harness::scenes::{pick_scene, place_scene, source_dock};
use crate::harness::scripted::{scripted_demo, ScriptConfig};
use crate::parser::{parse, ParsedTrajectory, DEFAULT_MIN_SEG_LEN, DEFAULT_THRESHOLD};
use crate::planner::{PlannerConfig, RetimePolicy};
use crate::sampler::{sample_docks, FeasibilityReport, SampleError, SamplerConfig};
use crate::scene::Scene;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{0}")]
    Exhausted(String),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Exhausted(_) => 4,
            CliError::Verify(_) => 5,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

/// Effective settings: defaults, then the config file, then flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub threshold: f64,
    pub min_seg_len: usize,
    pub points: usize,
    pub docks: usize,
    pub range: (f64, f64),
    pub yaw_jitter: f64,
    pub max_attempts: usize,
    pub seed: u64,
    pub retime: RetimePolicy,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    pub report: ReportFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SamplerConfig::default();
        Self {
            threshold: DEFAULT_THRESHOLD,
            min_seg_len: DEFAULT_MIN_SEG_LEN,
            points: 1024,
            docks: s.n_docks,
            range: s.range_ratio,
            yaw_jitter: s.yaw_jitter,
            max_attempts: s.max_attempts,
            seed: 0,
            retime: RetimePolicy::MatchSourceSpacing,
            jobs: None,
            report: ReportFormat::Text,
        }
    }
}

impl RunConfig {
    pub fn batch(&self) -> BatchConfig {
        BatchConfig {
            threshold: self.threshold,
            min_seg_len: self.min_seg_len,
            sampler: SamplerConfig {
                n_docks: self.docks,
                range_ratio: self.range,
                yaw_jitter: self.yaw_jitter,
                seed: self.seed,
                max_attempts: self.max_attempts,
            },
            planner: PlannerConfig {
                retime: self.retime,
                ..PlannerConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.threshold > 0.0) {
            return Err(CliError::Config(format!("threshold must be positive, got {}", self.threshold)));
        }
        if !matches!(self.points, 1024 | 2048) {
            return Err(CliError::Config(format!("points must be 1024 or 2048, got {}", self.points)));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        self.batch().sampler.validate().map_err(|e| CliError::Config(e.to_string()))
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let lo = lo.trim().parse::<f64>().map_err(|e| format!("range `{s}`: {e}"))?;
    let hi = hi.trim().parse::<f64>().map_err(|e| format!("range `{s}`: {e}"))?;
    Ok((lo, hi))
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub points: Option<usize>,
    #[arg(long, global = true)]
    pub docks: Option<usize>,
    /// Range ratio bounds as lo:hi.
    #[arg(long, global = true, value_parser = parse_range)]
    pub range: Option<(f64, f64)>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// match | source | fixed:<n>
    #[arg(long, global = true)]
    pub retime: Option<RetimePolicy>,
    #[arg(long, global = true, value_enum)]
    pub report: Option<ReportFormat>,
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        if let Some(v) = self.points {
            cfg.points = v;
        }
        if let Some(v) = self.docks {
            cfg.docks = v;
        }
        if let Some(v) = self.range {
            cfg.range = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = Some(v);
        }
        if let Some(v) = self.retime {
            cfg.retime = v;
        }
        if let Some(v) = self.report {
            cfg.report = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(name = "dockaug", version, about = "Augment manipulation demonstrations across docking poses")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record scripted source demos on the bundled scenes.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// pick, place or all
        #[arg(long, default_value = "all")]
        scene: String,
        /// Source demos per scene.
        #[arg(long, default_value_t = 1)]
        sources: u64,
    },
    /// Print the motion/skill segment table of every demo.
    Parse {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Sample feasible docks for every source demo.
    Sample {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Write a dataset with the sources plus their augmentations.
    Augment {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check checksums, decoding, validation rules and harness replay.
    Verify {
        #[arg(long)]
        dataset: PathBuf,
        /// Skip the harness replay of demos whose scene has a task.
        #[arg(long)]
        no_replay: bool,
    },
    /// Summarize an augmented dataset.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Fit the nearest-neighbour policy on a dataset and roll it out from
    /// freshly sampled test docks.
    EvalNn {
        #[arg(long)]
        dataset: PathBuf,
        /// Test docks per scene.
        #[arg(long, default_value_t = 8)]
        test_docks: usize,
        /// Sampler seed for the test docks.
        #[arg(long, default_value_t = 1000)]
        test_seed: u64,
        /// Also write the success tables here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Report text for stdout; errors go to stderr with an exit code.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = cli.common.resolve()?;
    if cli.common.print_config {
        return Ok(pretty(&cfg));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Generate { out, scene, sources } => cmd_generate(&cfg, out, scene, *sources),
        Command::Parse { dataset } => cmd_parse(&cfg, dataset),
        Command::Sample { dataset } => cmd_sample(&cfg, dataset),
        Command::Augment { dataset, out } => cmd_augment(&cfg, dataset, out),
        Command::Verify { dataset, no_replay } => cmd_verify(&cfg, dataset, !*no_replay),
        Command::Stats { dataset } => cmd_stats(&cfg, dataset),
        Command::EvalNn { dataset, test_docks, test_seed, out } => cmd_eval_nn(&cfg, dataset, *test_docks, *test_seed, out.as_deref()),
    })
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("dockaug: {e}");
            e.exit_code()
        }
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

pub fn bundled_scenes() -> Vec<Scene> {
    vec![pick_scene(), place_scene()]
}

fn cmd_generate(cfg: &RunConfig, out: &Path, which: &str, sources: u64) -> Result<String, CliError> {
    let scenes: Vec<Scene> = match which {
        "all" => bundled_scenes(),
        "pick" => vec![pick_scene()],
        "place" => vec![place_scene()],
        other => return Err(CliError::Config(format!("unknown scene `{other}` (pick | place | all)"))),
    };
    let script = ScriptConfig::for_points(cfg.points);
    let mut demos = Vec::new();
    for scene in &scenes {
        for k in 0..sources {
            let s = scripted_demo(scene, &source_dock(), cfg.seed + k, &script).map_err(|e| CliError::Data(format!("{}: {e}", scene.id)))?;
            demos.push(s.demo);
        }
    }
    let spec = DatasetSpec {
        rules: ValidationRules {
            point_count: Some(cfg.points),
            binary_gripper: true,
        },
        fps_seed: script.fps_seed,
        config: None,
        scenes: &scenes,
        demos: demos.iter().map(|d| (d, None)).collect(),
        failures: Vec::new(),
        stats: None,
    };
    let m = crate::dataset::write_dataset(out, &spec)?;
    Ok(match cfg.report {
        ReportFormat::Json => pretty(&m.demos.iter().map(|d| (&d.id, d.frames)).collect::<Vec<_>>()),
        ReportFormat::Text => {
            let mut s = String::new();
            for d in &m.demos {
                let _ = writeln!(s, "{:<24} {:>5} frames", d.id, d.frames);
            }
            let _ = writeln!(s, "wrote {} demos to {}", m.demos.len(), out.display());
            s
        }
    })
}

fn open_with_sources(path: &Path) -> Result<(Dataset, Vec<Demonstration>), CliError> {
    let ds = Dataset::open(path)?;
    let demos = ds.load_all()?;
    Ok((ds, demos))
}

fn scene_for<'a>(ds: &'a Dataset, d: &Demonstration) -> Result<&'a Scene, CliError> {
    ds.scene(&d.scene_id).ok_or_else(|| CliError::Data(format!("demo `{}`: scene `{}` missing", d.id, d.scene_id)))
}

#[derive(Serialize)]
struct ParseRow<'a> {
    demo: &'a str,
    parsed: ParsedTrajectory,
}

fn cmd_parse(cfg: &RunConfig, path: &Path) -> Result<String, CliError> {
    let (ds, demos) = open_with_sources(path)?;
    let mut rows = Vec::new();
    for d in &demos {
        let parsed = parse(d, scene_for(&ds, d)?, cfg.threshold, cfg.min_seg_len).map_err(|e| CliError::Data(format!("demo `{}`: {e}", d.id)))?;
        rows.push(ParseRow { demo: &d.id, parsed });
    }
    Ok(match cfg.report {
        ReportFormat::Json => pretty(&rows),
        ReportFormat::Text => {
            let mut s = String::new();
            for r in &rows {
                let _ = writeln!(s, "{}", r.demo);
                for seg in &r.parsed.segments {
                    let obj = seg.object.map(|o| o.to_string()).unwrap_or_else(|| "-".into());
                    let _ = writeln!(s, "  {:<6} {:>5} {:>5}  {obj}", format!("{:?}", seg.kind).to_lowercase(), seg.start, seg.end);
                }
            }
            s
        }
    })
}

#[derive(Serialize)]
struct SampleRow<'a> {
    demo: &'a str,
    accepted: Vec<FeasibilityReport>,
    rejected: Vec<FeasibilityReport>,
    error: Option<String>,
}

fn cmd_sample(cfg: &RunConfig, path: &Path) -> Result<String, CliError> {
    let (ds, demos) = open_with_sources(path)?;
    let batch = cfg.batch();
    let mut rows = Vec::new();
    let mut exhausted = Vec::new();
    for d in demos.iter().filter(|d| d.provenance == Provenance::Source) {
        let scene = scene_for(&ds, d)?;
        let parsed = parse(d, scene, cfg.threshold, cfg.min_seg_len).map_err(|e| CliError::Data(format!("demo `{}`: {e}", d.id)))?;
        match sample_docks(scene, d, &parsed, &batch.sampler, &batch.planner) {
            Ok(o) => rows.push(SampleRow {
                demo: &d.id,
                accepted: o.accepted,
                rejected: o.rejected,
                error: None,
            }),
            Err(e @ SampleError::Exhausted { .. }) => {
                exhausted.push(format!("{}: {e}", d.id));
                rows.push(SampleRow {
                    demo: &d.id,
                    accepted: Vec::new(),
                    rejected: Vec::new(),
                    error: Some(e.to_string()),
                });
            }
            Err(e) => return Err(CliError::Data(format!("demo `{}`: {e}", d.id))),
        }
    }
    let report = match cfg.report {
        ReportFormat::Json => pretty(&rows),
        ReportFormat::Text => {
            let mut s = String::new();
            for r in &rows {
                let _ = writeln!(s, "{}: {} accepted, {} rejected", r.demo, r.accepted.len(), r.rejected.len());
                for f in r.accepted.iter().chain(&r.rejected) {
                    let _ = writeln!(
                        s,
                        "  #{:<3} x {:>7.3} y {:>7.3} yaw {:>6.3}  vis {:.2}{}  reach {:>6.3}{}  coll {}  {}",
                        f.attempt,
                        f.dock.x,
                        f.dock.y,
                        f.dock.yaw,
                        f.visibility.value,
                        mark(f.visibility.pass),
                        f.reachability.value,
                        mark(f.reachability.pass),
                        mark(f.collision_free.pass),
                        if f.accepted { "accepted" } else { "rejected" }
                    );
                }
                if let Some(e) = &r.error {
                    let _ = writeln!(s, "  error: {e}");
                }
            }
            s
        }
    };
    if exhausted.is_empty() {
        Ok(report)
    } else {
        print!("{report}");
        Err(CliError::Exhausted(exhausted.join("; ")))
    }
}

fn mark(pass: bool) -> &'static str {
    if pass {
        "+"
    } else {
        "-"
    }
}

fn cmd_augment(cfg: &RunConfig, path: &Path, out: &Path) -> Result<String, CliError> {
    let (ds, demos) = open_with_sources(path)?;
    let rules = ds.manifest.rules();
    let sources: Vec<Demonstration> = demos.into_iter().filter(|d| d.provenance == Provenance::Source).collect();
    if sources.is_empty() {
        return Err(CliError::Data(format!("{}: no source demos", path.display())));
    }
    let batch = cfg.batch();
    let results = augment_batch(&sources, &ds.scenes, &batch, &rules);

    let mut stats = Stats::default();
    let mut failures = Vec::new();
    let mut exhausted = false;
    let mut out_demos: Vec<(&Demonstration, Option<Vec<crate::parser::Segment>>)> = Vec::new();
    for (src, r) in sources.iter().zip(&results) {
        out_demos.push((src, r.parsed.as_ref().map(|p| p.segments.clone())));
        for a in &r.augmented {
            out_demos.push((&a.demo, Some(a.segments.segments.clone())));
        }
        if let Some(f) = &r.failure {
            exhausted |= matches!(f, SourceFailure::Sample(SampleError::Exhausted { .. }));
            failures.push(FailureEntry {
                source_id: r.source_id.clone(),
                error: f.to_string(),
            });
        }
        stats.push(SourceStats {
            source_id: r.source_id.clone(),
            segments: r.parsed.as_ref().map(|p| p.segments.clone()).unwrap_or_default(),
            attempts: r.attempts,
            accepted: r.accepted.iter().map(|a| a.dock).collect(),
            rejections: r.rejections,
            augmented: r.augmented.len(),
            error: r.failure.as_ref().map(ToString::to_string),
        });
    }
    let spec = DatasetSpec {
        rules,
        fps_seed: ds.manifest.fps_seed,
        config: Some(batch),
        scenes: &ds.scenes,
        demos: out_demos,
        failures: failures.clone(),
        stats: Some(stats.clone()),
    };
    crate::dataset::write_dataset(out, &spec)?;
    let report = stats_report(cfg.report, &stats);
    if failures.is_empty() {
        return Ok(report);
    }
    print!("{report}");
    let msg = failures.iter().map(|f| format!("{}: {}", f.source_id, f.error)).collect::<Vec<_>>().join("; ");
    Err(if exhausted { CliError::Exhausted(msg) } else { CliError::Data(msg) })
}

fn stats_report(format: ReportFormat, stats: &Stats) -> String {
    match format {
        ReportFormat::Json => pretty(stats),
        ReportFormat::Text => {
            let mut s = String::new();
            for src in &stats.sources {
                let _ = writeln!(
                    s,
                    "{:<24} segments {:>2}  attempts {:>4}  augmented {:>2}  rejected vis/reach/coll {}/{}/{}{}",
                    src.source_id,
                    src.segments.len(),
                    src.attempts,
                    src.augmented,
                    src.rejections.visibility,
                    src.rejections.reachability,
                    src.rejections.collision,
                    src.error.as_ref().map(|e| format!("  error: {e}")).unwrap_or_default()
                );
            }
            let _ = writeln!(
                s,
                "total: {} augmented from {} sources, {} attempts, rejected vis/reach/coll {}/{}/{}",
                stats.total_augmented,
                stats.sources.len(),
                stats.total_attempts,
                stats.rejections.visibility,
                stats.rejections.reachability,
                stats.rejections.collision
            );
            s
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyRow {
    pub demo: String,
    pub ok: bool,
    pub detail: String,
}

fn verify_entry(ds: &Dataset, entry: &crate::dataset::DemoEntry, rules: &ValidationRules, with_replay: bool) -> VerifyRow {
    let row = |ok: bool, detail: String| VerifyRow {
        demo: entry.id.clone(),
        ok,
        detail,
    };
    let demo = match ds.load(entry) {
        Ok(d) => d,
        Err(e) => return row(false, e.to_string()),
    };
    if demo.len() != entry.frames || demo.id != entry.id {
        return row(false, format!("manifest lists {} frames as `{}`, file has {} as `{}`", entry.frames, entry.id, demo.len(), demo.id));
    }
    if let Some(v) = validate_demo(&demo, rules).first() {
        return row(false, v.to_string());
    }
    if let Some(segs) = &entry.segments {
        let p = ParsedTrajectory {
            segments: segs.clone(),
            threshold: 0.0,
        };
        if let Err(e) = p.check(demo.len()) {
            return row(false, format!("segment table: {e}"));
        }
    }
    let Some(scene) = ds.scene(&demo.scene_id) else {
        return row(false, format!("scene `{}` missing", demo.scene_id));
    };
    match (&scene.task, with_replay) {
        (Some(task), true) => {
            let r = replay(scene, &demo, task);
            if r.passed() {
                row(true, format!("replay ok, max step {:.4}", r.max_step))
            } else {
                row(
                    false,
                    format!(
                        "replay: success {}, {} collisions, {} unreachable, visible fraction {:.2}",
                        r.task_success,
                        r.collisions.len(),
                        r.unreachable.len(),
                        r.min_visible_fraction
                    ),
                )
            }
        }
        _ => row(true, "ok".into()),
    }
}

fn cmd_verify(cfg: &RunConfig, path: &Path, with_replay: bool) -> Result<String, CliError> {
    let ds = Dataset::open(path)?;
    let rules = ds.manifest.rules();
    use rayon::prelude::*;
    let rows: Vec<VerifyRow> = ds.manifest.demos.par_iter().map(|e| verify_entry(&ds, e, &rules, with_replay)).collect();
    let report = match cfg.report {
        ReportFormat::Json => pretty(&rows),
        ReportFormat::Text => {
            let mut s = String::new();
            for r in &rows {
                let _ = writeln!(s, "{:<4} {:<28} {}", if r.ok { "ok" } else { "FAIL" }, r.demo, r.detail);
            }
            s
        }
    };
    let bad: Vec<&str> = rows.iter().filter(|r| !r.ok).map(|r| r.demo.as_str()).collect();
    if bad.is_empty() {
        Ok(report)
    } else {
        print!("{report}");
        Err(CliError::Verify(format!("{} of {} demos: {}", bad.len(), rows.len(), bad.join(", "))))
    }
}

fn cmd_stats(cfg: &RunConfig, path: &Path) -> Result<String, CliError> {
    let ds = Dataset::open(path)?;
    let stats_path = path.join(STATS);
    if stats_path.exists() {
        let text = std::fs::read_to_string(&stats_path).map_err(|e| CliError::Data(format!("{}: {e}", stats_path.display())))?;
        let stats: Stats = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", stats_path.display())))?;
        return Ok(stats_report(cfg.report, &stats));
    }
    let sources = ds.manifest.demos.iter().filter(|d| d.provenance == Provenance::Source).count();
    let frames: usize = ds.manifest.demos.iter().map(|d| d.frames).sum();
    Ok(match cfg.report {
        ReportFormat::Json => pretty(&serde_json::json!({
            "demos": ds.manifest.demos.len(),
            "sources": sources,
            "frames": frames,
        })),
        ReportFormat::Text => format!("{} demos ({sources} sources), {frames} frames, no augmentation stats\n", ds.manifest.demos.len()),
    })
}

#[derive(Serialize)]
struct SceneTable<'a> {
    scene: &'a str,
    train_demos: usize,
    table: SuccessTable,
}

fn cmd_eval_nn(cfg: &RunConfig, path: &Path, test_docks: usize, test_seed: u64, out: Option<&Path>) -> Result<String, CliError> {
    let (ds, demos) = open_with_sources(path)?;
    let batch = cfg.batch();
    let mut tables = Vec::new();
    for scene in &ds.scenes {
        let train: Vec<Demonstration> = demos.iter().filter(|d| d.scene_id == scene.id).cloned().collect();
        let Some(src) = train.iter().find(|d| d.provenance == Provenance::Source) else {
            continue;
        };
        let parsed = parse(src, scene, cfg.threshold, cfg.min_seg_len).map_err(|e| CliError::Data(format!("demo `{}`: {e}", src.id)))?;
        let sampler = SamplerConfig {
            n_docks: test_docks,
            seed: test_seed,
            ..batch.sampler.clone()
        };
        let docks = sample_docks(scene, src, &parsed, &sampler, &batch.planner).map_err(|e| CliError::Exhausted(format!("test docks for `{}`: {e}", scene.id)))?;
        let docks: Vec<_> = docks.accepted.iter().map(|r| r.dock).collect();
        let table = nn_policy_eval(&train, scene, &docks, &NnConfig::default()).map_err(|e| CliError::Data(e.to_string()))?;
        tables.push(SceneTable {
            scene: &scene.id,
            train_demos: train.len(),
            table,
        });
    }
    if let Some(out) = out {
        std::fs::write(out, pretty(&tables)).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    }
    Ok(match cfg.report {
        ReportFormat::Json => pretty(&tables),
        ReportFormat::Text => {
            let mut s = String::new();
            for t in &tables {
                let _ = writeln!(s, "{}: {} training demos, success {:.3} over {} docks", t.scene, t.train_demos, t.table.rate(), t.table.docks.len());
            }
            s
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("dockaug").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"docks": 6, "range": [0.9, 1.1], "seed": 5}"#).unwrap();
        let c = cli(&["--config", path.to_str().unwrap(), "--seed", "9", "stats", "--dataset", "x"]);
        let cfg = c.common.resolve().unwrap();
        assert_eq!((cfg.docks, cfg.range, cfg.seed), (6, (0.9, 1.1), 9));
        assert_eq!(cfg.threshold, 0.1);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for args in [
            &["--range", "1.2:0.8", "stats", "--dataset", "x"][..],
            &["--points", "500", "stats", "--dataset", "x"],
            &["--threshold=-1", "stats", "--dataset", "x"],
        ] {
            assert_eq!(cli(args).common.resolve().unwrap_err().exit_code(), 2);
        }
        assert!(Cli::try_parse_from(["dockaug", "--retime", "slow", "stats", "--dataset", "x"]).is_err());
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"dock": 6}"#).unwrap();
        let c = cli(&["--config", path.to_str().unwrap(), "stats", "--dataset", "x"]);
        assert_eq!(c.common.resolve().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn print_config_round_trips() {
        let out = run(&cli(&["--docks", "3", "--retime", "fixed:7", "--print-config", "stats", "--dataset", "x"])).unwrap();
        let cfg: RunConfig = serde_json::from_str(&out).unwrap();
        assert_eq!(cfg.docks, 3);
        assert_eq!(cfg.retime, RetimePolicy::Fixed(7));
    }

    #[test]
    fn missing_manifest_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let e = run(&cli(&["verify", "--dataset", dir.path().to_str().unwrap()])).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("manifest.json"));
    }
}
