//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
//! error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

use crate::alignment::merge_into;
use crate::codec::{read_graph, write_graph};
use crate::error::{Error, Result};
use crate::harness::run::stream;
use crate::harness::{
    read_metrics, run_scenario, stream_rng, write_csv, MetricsReport, Scenario, ScenarioConfig, TrafficMode,
};
use crate::metrics::evaluate;
use crate::worldsim::{generate_world, write_world};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScenarioArg {
    Scp,
    Ldcp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TrafficArg {
    Graphs,
    Points,
}

#[derive(Debug, Parser)]
#[command(name = "scenefuse", version, about = "Multi-agent 3D scene graph fusion simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario configuration (JSON)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the configured seed
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the scenario
    #[arg(long, global = true, value_enum)]
    scenario: Option<ScenarioArg>,
    /// Override the number of rooms
    #[arg(long, global = true, value_name = "N")]
    rooms: Option<usize>,
    /// Override the number of agents
    #[arg(long, global = true, value_name = "N")]
    agents: Option<usize>,
    /// Override the requested overlap ratio
    #[arg(long, global = true, value_name = "F")]
    overlap: Option<f64>,
    /// Count graphs only, or graphs plus synthetic point clouds
    #[arg(long = "traffic-mode", global = true, value_enum)]
    traffic_mode: Option<TrafficArg>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated ground-truth world
    Generate,
    /// Run an SCP or LDCP scenario from a config file
    Simulate,
    /// Merge one query graph into a reference graph
    Align {
        #[arg(short = 'q', long = "query", value_name = "PATH")]
        query: PathBuf,
        #[arg(short = 'r', long = "reference", value_name = "PATH")]
        reference: PathBuf,
    },
    /// Score a predicted graph against a ground-truth graph
    Eval {
        #[arg(short = 'p', long = "pred", value_name = "PATH")]
        pred: PathBuf,
        #[arg(short = 'g', long = "gt", value_name = "PATH")]
        gt: PathBuf,
    },
    /// Convert 3DSSG annotations into a world file
    #[command(name = "ingest-3dssg")]
    Ingest3dssg {
        #[arg(long, value_name = "PATH")]
        objects: PathBuf,
        #[arg(long, value_name = "PATH")]
        relationships: PathBuf,
    },
    /// Collect run reports or metrics files into one CSV
    Report {
        #[arg(required = true, value_name = "FILE")]
        files: Vec<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl Cli {
    /// Config from `--config` (or defaults with the given seed) plus
    /// command-line overrides.
    fn config(&self, require_file: bool) -> std::result::Result<ScenarioConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let bytes = std::fs::read(path)
                    .map_err(|e| Failure::Data(Error::Config(format!("cannot read {}: {e}", path.display()))))?;
                let mut value: serde_json::Value = serde_json::from_slice(&bytes).map_err(Error::from)?;
                if let (Some(seed), Some(obj)) = (self.seed, value.as_object_mut()) {
                    obj.insert("seed".into(), seed.into());
                }
                serde_json::from_value::<ScenarioConfig>(value).map_err(|e| Error::Config(e.to_string()))?
            }
            None if require_file => return Err(Failure::Usage("--config is required".into())),
            None => match self.seed {
                Some(seed) => ScenarioConfig::new(seed),
                None => return Err(Failure::Usage("--seed or --config is required".into())),
            },
        };
        if let Some(s) = self.scenario {
            cfg.scenario = match s {
                ScenarioArg::Scp => Scenario::Scp,
                ScenarioArg::Ldcp => Scenario::Ldcp,
            };
        }
        if let Some(n) = self.rooms {
            cfg.n_rooms = n;
        }
        if let Some(k) = self.agents {
            cfg.k_agents = k;
        }
        if let Some(o) = self.overlap {
            cfg.overlap_ratio = o;
        }
        if let Some(t) = self.traffic_mode {
            cfg.traffic_mode = match t {
                TrafficArg::Graphs => TrafficMode::GraphsOnly,
                TrafficArg::Points => TrafficMode::GraphsPlusPoints,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: Option<&ScenarioConfig>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn execute(cli: &Cli) -> std::result::Result<(), Failure> {
    match &cli.command {
        Command::Generate => {
            let cfg = cli.config(false)?;
            let world = generate_world(&cfg.world_params(), &mut stream_rng(cfg.seed, &[stream::WORLD]))?;
            let dir = cli.out_dir(Some(&cfg));
            ensure_dir(&dir)?;
            let path = dir.join("world.json");
            write_world(&path, &world)?;
            say!(
                "wrote {} ({} rooms, {} nodes, {} edges)",
                path.display(),
                world.rooms.len(),
                world.graph.node_count(),
                world.graph.edge_count()
            );
        }
        Command::Simulate => {
            let cfg = cli.config(true)?;
            let run = run_scenario(&cfg)?;
            let dir = cli.out_dir(Some(&cfg));
            run.write_to(&dir)?;
            let m = &run.report.metrics;
            say!(
                "{} rooms={} agents={} triplet_f1={:.4} object_f1={:.4} predicate_f1={:.4} traffic_mb={:.4} align_s={:.4}",
                m.scenario, m.domain_size, m.k_agents, m.triplet.f1, m.object.f1, m.predicate.f1, m.traffic_mb, m.align_seconds
            );
            say!("outputs in {}", dir.display());
        }
        Command::Align { query, reference } => {
            let cfg = match (&cli.config, cli.seed) {
                (None, None) => ScenarioConfig::new(0),
                _ => cli.config(false)?,
            };
            let g_q = read_graph(query)?;
            let g_r = read_graph(reference)?;
            let mut rng = stream_rng(cfg.seed, &[stream::ALIGNMENT]);
            let (merged, mut report) = merge_into(&g_q, g_r, &cfg.thresholds, cfg.max_anchors, &mut rng)?;
            if !cfg.record_timings {
                report.align_seconds = 0.0;
            }
            let dir = cli.out_dir(Some(&cfg));
            ensure_dir(&dir)?;
            write_graph(dir.join("merged_graph.json"), &merged)?;
            std::fs::write(
                dir.join("alignment_report.json"),
                serde_json::to_string_pretty(&report).expect("report serializes"),
            )
            .map_err(Error::from)?;
            say!(
                "{:?}: map size {}, {} nodes, {} edges",
                report.branch,
                report.map_size,
                merged.node_count(),
                merged.edge_count()
            );
        }
        Command::Eval { pred, gt } => {
            let spec = match (&cli.config, cli.seed) {
                (None, None) => Default::default(),
                _ => cli.config(false)?.eval,
            };
            let p = read_graph(pred)?;
            let g = read_graph(gt)?;
            let gated = evaluate(&p, &g, &spec);
            let ungated = evaluate(&p, &g, &crate::metrics::MatchSpec::ungated(spec.k));
            let body = serde_json::json!({ "gated": gated, "ungated": ungated, "k": spec.k });
            let text = serde_json::to_string_pretty(&body).expect("scores serialize");
            if let Some(dir) = &cli.out {
                ensure_dir(dir)?;
                std::fs::write(dir.join("eval.json"), &text).map_err(Error::from)?;
            }
            say!("{text}");
        }
        Command::Ingest3dssg { objects, relationships } => ingest(cli, objects, relationships)?,
        Command::Report { files } => {
            let rows = files.iter().map(read_metrics).collect::<Result<Vec<MetricsReport>>>()?;
            match &cli.out {
                Some(dir) => {
                    ensure_dir(dir)?;
                    let path = dir.join("results.csv");
                    write_csv(std::fs::File::create(&path).map_err(Error::from)?, &rows)?;
                    say!("wrote {} ({} rows)", path.display(), rows.len());
                }
                None => write_csv(std::io::stdout().lock(), &rows)?,
            }
        }
    }
    Ok(())
}

#[cfg(feature = "ingest-3dssg")]
fn ingest(cli: &Cli, objects: &Path, relationships: &Path) -> std::result::Result<(), Failure> {
    let world = crate::worldsim::ingest_3dssg(objects, relationships)?;
    let dir = cli.out_dir(None);
    ensure_dir(&dir)?;
    let path = dir.join("world.json");
    write_world(&path, &world)?;
    say!(
        "wrote {} ({} rooms, {} nodes, {} edges)",
        path.display(),
        world.rooms.len(),
        world.graph.node_count(),
        world.graph.edge_count()
    );
    Ok(())
}

#[cfg(not(feature = "ingest-3dssg"))]
fn ingest(_: &Cli, _: &Path, _: &Path) -> std::result::Result<(), Failure> {
    Err(Failure::Usage("built without the ingest-3dssg feature".into()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n");
            eprintln!("{}", Cli::command().render_usage());
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}
