use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use mmt_core::{
    backward_determinism_score, barcode, build_chain, left_curtain, monge_approximate,
    sample_paths, shadow, uniqueness_check, value_gap, Coupling, Measure, MmtError,
};
use serde::Serialize;
use serde_json::{json, Value};

mod svg;

#[derive(Parser)]
#[command(name = "mmt", version, about = "Martingale transport constructions on the real line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Directory receiving the result files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct Pair {
    /// Source measure (JSON).
    #[arg(long)]
    mu: PathBuf,
    /// Target measure (JSON).
    #[arg(long)]
    nu: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Cost {
    /// |x - y|
    Abs,
    /// (x - y)^2
    Square,
    /// -x y
    NegProduct,
}

impl Cost {
    fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Cost::Abs => (x - y).abs(),
            Cost::Square => (x - y).powi(2),
            Cost::NegProduct => -x * y,
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn resolution(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        _ => Err(format!("expected an integer of at least 2, got {s:?}")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Shadow of the source in the target.
    Shadow {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 2048, value_parser = resolution)]
        resolution: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Left-curtain coupling.
    LeftCurtain {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 2048, value_parser = resolution)]
        resolution: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Barcode coupling with its iteration trace.
    Barcode {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 2048, value_parser = resolution)]
        resolution: usize,
        /// Residual source mass at which the peeling stops.
        #[arg(long, default_value_t = mmt_core::DEFAULT_STOP_EPS, value_parser = positive)]
        stop_eps: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Monge approximation of a martingale coupling.
    Approx {
        /// Coupling (JSON).
        #[arg(long)]
        coupling: PathBuf,
        #[arg(long, value_parser = positive)]
        eps: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Whether the pair admits a single martingale coupling.
    Uniqueness {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        output: Output,
    },
    /// Backward-deterministic chain through the marginals, with sampled paths.
    Mimic {
        /// Marginals in order (JSON), at least two.
        #[arg(long = "marginal", required = true, num_args = 1..)]
        marginals: Vec<PathBuf>,
        #[arg(long, default_value_t = 2048, value_parser = resolution)]
        resolution: usize,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Weak cost E[f(E[Y|X] - X) - g(E[X|Y])] with f = g = square.
    WeakCost {
        #[arg(long)]
        coupling: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Best Monge cost against the martingale optimum on a grid.
    ValueGap {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, value_enum, default_value_t = Cost::Abs)]
        cost: Cost,
        /// Cell widths, comma separated.
        #[arg(long, value_delimiter = ',', required = true, value_parser = positive)]
        eps: Vec<f64>,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug)]
enum Failure {
    Parse(String),
    Io(String),
    Core(MmtError),
}

impl From<MmtError> for Failure {
    fn from(e: MmtError) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Parse(_) => 2,
            Failure::Io(_) => 1,
            Failure::Core(e) => match e {
                MmtError::InvalidMeasure(_) | MmtError::InvalidArgument(_) => 2,
                MmtError::NotInConvexOrder { .. }
                | MmtError::NotDominated { .. }
                | MmtError::NotDominatedE { .. }
                | MmtError::NotMartingale { .. }
                | MmtError::MarginalMismatch { .. }
                | MmtError::AtomAtComponentEndpoint { .. } => 3,
                MmtError::NoConvergence { .. } => 4,
                MmtError::SizeCap { .. } => 5,
                _ => 1,
            },
        }
    }

    fn report(&self) -> Value {
        let (kind, message, detail) = match self {
            Failure::Parse(m) => ("Parse".to_string(), m.clone(), Value::Null),
            Failure::Io(m) => ("Io".to_string(), m.clone(), Value::Null),
            Failure::Core(e) => {
                let (kind, detail) = match serde_json::to_value(e).unwrap_or(Value::Null) {
                    Value::Object(map) => map.into_iter().next().unwrap_or(("Unknown".into(), Value::Null)),
                    Value::String(s) => (s, Value::Null),
                    _ => ("Unknown".into(), Value::Null),
                };
                (kind, e.to_string(), detail)
            }
        };
        json!({ "code": self.code(), "error": kind, "message": message, "detail": detail })
    }
}

type Run = Result<Vec<PathBuf>, Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Parse(format!("cannot parse {}: {e}", path.display())))
}

fn read_pair(pair: &Pair) -> Result<(Measure, Measure), Failure> {
    Ok((read_json(&pair.mu)?, read_json(&pair.nu)?))
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn new(out: &Output) -> Result<Self, Failure> {
        fs::create_dir_all(&out.out)
            .map_err(|e| Failure::Io(format!("cannot create {}: {e}", out.out.display())))?;
        Ok(Writer { dir: out.out.clone(), written: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, body)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut body = serde_json::to_string_pretty(value)
            .map_err(|e| Failure::Io(format!("cannot serialize {name}: {e}")))?;
        body.push('\n');
        self.text(name, &body)
    }

    fn coupling(&mut self, c: &Coupling, format: Format) -> Result<(), Failure> {
        match format {
            Format::Csv => self.text("coupling.csv", &c.to_csv()),
            _ => self.json("coupling.json", c),
        }
    }
}

fn only(format: Format, allowed: &[Format], command: &str) -> Result<(), Failure> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        Err(Failure::Parse(format!("format not available for {command}")))
    }
}

fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Shadow { pair, resolution, output } => {
            only(output.format, &[Format::Json], "shadow")?;
            let (mu, nu) = read_pair(&pair)?;
            let r = shadow(&mu, &nu, resolution)?;
            let mut w = Writer::new(&output)?;
            w.json("shadow.json", &r)?;
            Ok(w.written)
        }
        Command::LeftCurtain { pair, resolution, output } => {
            only(output.format, &[Format::Json, Format::Csv], "left-curtain")?;
            let (mu, nu) = read_pair(&pair)?;
            let c = left_curtain(&mu, &nu, resolution)?;
            let mut w = Writer::new(&output)?;
            w.coupling(&c, output.format)?;
            Ok(w.written)
        }
        Command::Barcode { pair, resolution, stop_eps, output } => {
            let (mu, nu) = read_pair(&pair)?;
            let (c, trace) = barcode(&mu, &nu, resolution, stop_eps)?;
            let mut w = Writer::new(&output)?;
            w.coupling(&c, output.format)?;
            w.json("trace.json", &trace)?;
            if output.format == Format::Svg {
                w.text("barcode.svg", &svg::render_barcode_svg(&trace, &mu, &nu))?;
            }
            Ok(w.written)
        }
        Command::Approx { coupling, eps, output } => {
            only(output.format, &[Format::Json, Format::Csv], "approx")?;
            let pi: Coupling = read_json(&coupling)?;
            let c = monge_approximate(&pi, eps)?;
            let mut w = Writer::new(&output)?;
            w.coupling(&c, output.format)?;
            Ok(w.written)
        }
        Command::Uniqueness { pair, output } => {
            only(output.format, &[Format::Json], "uniqueness")?;
            let (mu, nu) = read_pair(&pair)?;
            let r = uniqueness_check(&mu, &nu)?;
            println!("{:?}", r.verdict);
            let mut w = Writer::new(&output)?;
            w.json("uniqueness.json", &r)?;
            Ok(w.written)
        }
        Command::Mimic { marginals, resolution, paths, seed, output } => {
            only(output.format, &[Format::Json, Format::Csv], "mimic")?;
            if marginals.len() < 2 {
                return Err(Failure::Parse("mimic needs at least two marginals".into()));
            }
            let ms = marginals
                .iter()
                .map(|p| read_json::<Measure>(p))
                .collect::<Result<Vec<_>, _>>()?;
            let chain = build_chain(&ms, resolution)?;
            let sample = sample_paths(&chain, paths, seed)?;
            let (lo, hi) = ms
                .iter()
                .filter_map(Measure::support)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |a, s| (a.0.min(s.0), a.1.max(s.1)));
            let bin = if hi > lo { (hi - lo) / resolution as f64 } else { 1.0 };
            let scores = backward_determinism_score(&sample, bin)?;
            let mut w = Writer::new(&output)?;
            w.json("chain.json", &chain)?;
            w.text("paths.csv", &sample.to_csv())?;
            w.json("mimic.json", &json!({ "bin_width": bin, "backward_determinism": scores }))?;
            Ok(w.written)
        }
        Command::WeakCost { coupling, output } => {
            only(output.format, &[Format::Json], "weak-cost")?;
            let pi: Coupling = read_json(&coupling)?;
            let sq = |t: f64| t * t;
            let value = pi.weak_cost(sq, sq);
            let monge = -pi.first_marginal().second_moment();
            let mut w = Writer::new(&output)?;
            w.json(
                "weak_cost.json",
                &json!({ "weak_cost": value, "monge_value": monge, "excess": value - monge }),
            )?;
            Ok(w.written)
        }
        Command::ValueGap { pair, cost, eps, output } => {
            only(output.format, &[Format::Json, Format::Csv], "value-gap")?;
            let (mu, nu) = read_pair(&pair)?;
            let g = value_gap(&mu, &nu, |x, y| cost.eval(x, y), &eps)?;
            let mut w = Writer::new(&output)?;
            if output.format == Format::Csv {
                let mut body = String::from("eps,mmt_value,lp_value,gap\n");
                for r in &g.rows {
                    body.push_str(&format!("{},{},{},{}\n", r.eps, r.mmt_value, r.lp_value, r.gap()));
                }
                w.text("value_gap.csv", &body)?;
            } else {
                let rows: Vec<Value> = g
                    .rows
                    .iter()
                    .map(|r| json!({ "eps": r.eps, "mmt_value": r.mmt_value, "lp_value": r.lp_value, "gap": r.gap() }))
                    .collect();
                w.json("value_gap.json", &json!({ "rows": rows, "grid_width": g.grid_width }))?;
            }
            Ok(w.written)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MMT_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure::Parse(e.to_string().trim_end().to_string());
            eprintln!("{}", f.report());
            return ExitCode::from(f.code());
        }
    };
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.report());
            ExitCode::from(f.code())
        }
    }
}
