use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hypfill::filling::{FillingError, FillingGraph};
use hypfill::halfplane;
use hypfill::metric::{InputFormat, MetricError, MetricKind};
use hypfill::verify::{self, RunConfig, Suite, VerifyError};
use hypfill::IntersectionMode;

const EXIT_INPUT: u8 = 2;
const EXIT_ORACLE: u8 = 3;
const EXIT_ASSERTION: u8 = 4;

/// DOT export is skipped above this many vertices.
const DOT_LIMIT: usize = 2000;

#[derive(Parser)]
#[command(name = "hypfill", version, about = "Hyperbolic fillings of finite metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the metric axioms of the input.
    Validate(ConfigArgs),
    /// Build the filling graph and write graph.json, graph.dot and a summary.
    Build(ConfigArgs),
    /// Build the filling and run the verification suites; writes report.json and pairs.csv.
    Verify(ConfigArgs),
    /// Run the upper half-plane checks.
    OracleHalfplane,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    PointCloud,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Max,
    Snowflake,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    WitnessScan,
    CenterSum,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Filling,
    Hyperbolicity,
    Busemann,
    Uniformization,
    Boundary,
    Halfplane,
}

/// Every flag overrides the matching field of `--config`.
#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Snowflake exponent, used with `--metric snowflake`.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Repeat for several values.
    #[arg(long = "epsilon", allow_hyphen_values = true)]
    epsilons: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    n_min: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    n_max: Option<i32>,
    #[arg(long)]
    pad_below: Option<i32>,
    #[arg(long)]
    max_levels: Option<usize>,
    #[arg(long, value_enum)]
    intersection_mode: Option<ModeArg>,
    /// Shuffle the net order with this seed instead of using input order.
    #[arg(long)]
    order_seed: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample this many quadruples for the four-point constant.
    #[arg(long)]
    delta_samples: Option<u64>,
    #[arg(long)]
    triangle_samples: Option<usize>,
    /// Repeat for several suites; default is all.
    #[arg(long = "suite", value_enum)]
    suites: Vec<SuiteArg>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, VerifyError> {
        let mut c = match &self.config {
            Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
                .map_err(|e| VerifyError::Config(format!("{}: {e}", p.display())))?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.input {
            c.input = Some(v.clone());
        }
        if let Some(v) = self.format {
            c.format = match v {
                FormatArg::Csv => InputFormat::Csv,
                FormatArg::PointCloud => InputFormat::PointCloud,
            };
        }
        match (self.metric, self.theta) {
            (Some(MetricArg::Euclidean), _) => c.metric = MetricKind::Euclidean,
            (Some(MetricArg::Max), _) => c.metric = MetricKind::Max,
            (Some(MetricArg::Snowflake), Some(theta)) => c.metric = MetricKind::Snowflake { theta },
            (Some(MetricArg::Snowflake), None) => {
                return Err(VerifyError::Config("--metric snowflake needs --theta".into()))
            }
            (None, Some(theta)) => match &mut c.metric {
                MetricKind::Snowflake { theta: t } => *t = theta,
                _ => return Err(VerifyError::Config("--theta needs --metric snowflake".into())),
            },
            (None, None) => {}
        }
        if let Some(v) = self.a {
            c.a = v;
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if !self.epsilons.is_empty() {
            c.epsilons = self.epsilons.clone();
        }
        if self.n_min.is_some() {
            c.n_min = self.n_min;
        }
        if self.n_max.is_some() {
            c.n_max = self.n_max;
        }
        if let Some(v) = self.pad_below {
            c.pad_below = v;
        }
        if let Some(v) = self.max_levels {
            c.max_levels = v;
        }
        if let Some(v) = self.intersection_mode {
            c.intersection_mode = match v {
                ModeArg::WitnessScan => IntersectionMode::WitnessScan,
                ModeArg::CenterSum => IntersectionMode::CenterSum,
            };
        }
        if self.order_seed.is_some() {
            c.order_seed = self.order_seed;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if self.delta_samples.is_some() {
            c.delta_samples = self.delta_samples;
        }
        if let Some(v) = self.triangle_samples {
            c.triangle_samples = v;
        }
        if !self.suites.is_empty() {
            c.suites = self
                .suites
                .iter()
                .map(|s| match s {
                    SuiteArg::Filling => Suite::Filling,
                    SuiteArg::Hyperbolicity => Suite::Hyperbolicity,
                    SuiteArg::Busemann => Suite::Busemann,
                    SuiteArg::Uniformization => Suite::Uniformization,
                    SuiteArg::Boundary => Suite::Boundary,
                    SuiteArg::Halfplane => Suite::Halfplane,
                })
                .collect();
        }
        if let Some(v) = &self.out_dir {
            c.out_dir = v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), VerifyError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn validate(args: &ConfigArgs) -> Result<u8, VerifyError> {
    let c = args.resolve()?;
    let space = c.load_space()?;
    let rep = space.validate();
    print!("{}", pretty(&rep));
    Ok(if rep.violations.is_empty() { 0 } else { EXIT_INPUT })
}

fn build(args: &ConfigArgs) -> Result<u8, VerifyError> {
    let c = args.resolve()?;
    let space = c.load_space()?;
    let (params, _) = c.filling_params(&space);
    let g = FillingGraph::build(std::sync::Arc::new(space), params)?;
    let summary = g.summary();
    write(&c.out_dir, "graph.json", &pretty(&g.to_json()))?;
    write(&c.out_dir, "summary.json", &pretty(&summary))?;
    if g.len() < DOT_LIMIT {
        write(&c.out_dir, "graph.dot", &g.to_dot()?)?;
    }
    eprintln!(
        "levels {}..={}: {} vertices, {} edges, connected: {}",
        params.n_min, params.n_max, summary.vertices, summary.edges, summary.connected
    );
    for l in &summary.levels {
        eprintln!(
            "  n={:>3}  vertices {:>6}  horizontal {:>7}  up {:>7}",
            l.n, l.vertices, l.horizontal_edges, l.vertical_edges_up
        );
    }
    Ok(0)
}

fn run(args: &ConfigArgs) -> Result<u8, VerifyError> {
    let c = args.resolve()?;
    let space = c.load_space()?;
    let out = verify::run_verify(&c, space)?;
    let rep = &out.report;
    write(&c.out_dir, "report.json", &pretty(rep))?;
    write(&c.out_dir, "graph.json", &pretty(&out.filling.to_json()))?;
    if out.filling.len() < DOT_LIMIT {
        write(&c.out_dir, "graph.dot", &out.filling.to_dot()?)?;
    }
    write(&c.out_dir, "pairs.csv", &verify::pairs_csv(&out.pairs)?)?;
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    for v in &rep.violations {
        eprintln!("violation: {}: {}", v.check, v.witness);
    }
    let oracle_breach = rep
        .suites
        .iter()
        .filter(|s| s.suite == Suite::Halfplane)
        .flat_map(|s| &s.records)
        .any(|r| r.within_bound == Some(false));
    eprintln!(
        "{} vertices, {} edges, {} hard violations; report in {}",
        rep.graph.vertices,
        rep.graph.edges,
        rep.violations.len(),
        c.out_dir.display()
    );
    Ok(if !rep.passed() {
        EXIT_ASSERTION
    } else if oracle_breach {
        EXIT_ORACLE
    } else {
        0
    })
}

fn oracle() -> u8 {
    let r = halfplane::run_oracle();
    print!("{}", pretty(&r));
    if r.passed {
        0
    } else {
        EXIT_ORACLE
    }
}

fn exit_code(e: &VerifyError) -> u8 {
    match e {
        VerifyError::Metric(_) | VerifyError::Config(_) | VerifyError::Io(_) => EXIT_INPUT,
        VerifyError::Filling(f) => match f {
            FillingError::RayGap { .. } | FillingError::RayBroken(..) | FillingError::NoConePoint(..) => EXIT_ASSERTION,
            _ => EXIT_INPUT,
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Build(a) => build(a),
        Command::Verify(a) => run(a),
        Command::OracleHalfplane => Ok(oracle()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            if let VerifyError::Metric(MetricError::Invalid(vs)) = &e {
                for v in vs {
                    eprintln!("violation: {v}");
                }
            }
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
