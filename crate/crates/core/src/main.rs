use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ltp_bpod::bench::experiment::{experiment_system, reduce_with_mode};
use ltp_bpod::bench::{base_time_sweep, run_experiment, ExperimentConfig, Mode};
use ltp_bpod::io::write_text;
use ltp_bpod::{Error, Result};

const DEFAULT_OUT: &str = "ltp-bpod-out";

#[derive(Parser)]
#[command(name = "ltp-bpod", version, about = "Balanced truncation for linear time-periodic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random system and write it as system.json.
    Generate(Common),
    /// Reduce a system with one method and write the reduced model.
    Reduce {
        #[command(flatten)]
        common: Common,
        /// Reduced order.
        #[arg(long, short = 'r')]
        order: usize,
    },
    /// Compare Hankel values and H∞ error curves across methods.
    Experiment(Common),
    /// Hankel values for every base time in one period.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Orders for which the best base time is reported.
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
        orders: Vec<usize>,
        /// Also compute exact Hankel values at each base time.
        #[arg(long)]
        exact: bool,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "LTP_BPOD_OUT")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    /// Period T.
    #[arg(long)]
    period: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    base_time: Option<i64>,
    #[arg(long)]
    m_c: Option<usize>,
    #[arg(long)]
    m_o: Option<usize>,
    /// Output-projection ranks, comma separated.
    #[arg(long, value_delimiter = ',')]
    r_op: Option<Vec<usize>>,
    /// exact, snapshot, bpod-periodic, bpod-single (comma separated).
    #[arg(long, value_delimiter = ',')]
    mode: Option<Vec<String>>,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long)]
    hinf_grid: Option<usize>,
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Bounds of the diagonal of A(k), as lo,hi.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    a_bounds: Option<Vec<f64>>,
    /// Bounds of the entries of B(k) and C(k), as lo,hi.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
    bc_bounds: Option<Vec<f64>>,
    /// Periods of impulse-response data for the output projection.
    #[arg(long)]
    projection_horizon: Option<usize>,
    /// Read the system from a JSON file instead of generating one.
    #[arg(long)]
    system: Option<PathBuf>,
}

fn pair(v: &[f64]) -> (f64, f64) {
    (v[0], v[1])
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        set!(seed, n, p, q, period, base_time, m_c, m_o, r_op, max_order, hinf_grid, rank_tol);
        if let Some(v) = &self.a_bounds {
            cfg.a_bounds = pair(v);
        }
        if let Some(v) = &self.bc_bounds {
            cfg.bc_bounds = pair(v);
        }
        if let Some(v) = self.projection_horizon {
            cfg.projection_horizon = Some(v);
        }
        if let Some(v) = &self.system {
            cfg.system = Some(v.clone());
        }
        if let Some(modes) = &self.mode {
            cfg.modes = modes.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok((cfg, out))
    }
}

fn written(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(common) => {
            let (mut cfg, out) = common.resolve()?;
            cfg.modes = vec![Mode::Exact];
            cfg.validate()?;
            let sys = experiment_system(&cfg)?;
            let path = out.join("system.json");
            write_text(&path, &sys.to_json()?)?;
            written(&path);
        }
        Command::Reduce { common, order } => {
            let (cfg, out) = common.resolve()?;
            for w in cfg.validate()? {
                eprintln!("warning: {w}");
            }
            let mode = match cfg.modes.as_slice() {
                [m] => *m,
                _ if common.mode.is_none() => Mode::Snapshot,
                _ => return Err(Error::Config("reduce takes exactly one --mode".into())),
            };
            let r_op = cfg.r_op.first().copied();
            let sys = experiment_system(&cfg)?;
            let (basis, model) = reduce_with_mode(&sys, &cfg, mode, r_op, order)?;
            for w in &model.warnings {
                eprintln!("warning: {w}");
            }
            for (name, text) in [
                ("reduced.json", model.to_json()?),
                ("hankel.csv", basis.hankel_csv()),
            ] {
                let path = out.join(name);
                write_text(&path, &text)?;
                written(&path);
            }
        }
        Command::Experiment(common) => {
            let (cfg, out) = common.resolve()?;
            let report = run_experiment(&cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for m in &report.methods {
                for w in &m.warnings {
                    eprintln!("warning [{}]: {w}", m.label);
                }
            }
            write_text(&out.join("system.json"), &experiment_system(&cfg)?.to_json()?)?;
            report.write(&out)?;
            println!(
                "‖G̃‖∞ ≈ {:.6e}; {} methods over orders 1..={}; {:.2} s",
                report.hinf_full,
                report.methods.len(),
                report.orders.len(),
                report.total_seconds
            );
            written(&out);
        }
        Command::Sweep {
            common,
            orders,
            exact,
        } => {
            let (mut cfg, out) = common.resolve()?;
            // Projection settings do not apply to the sweep.
            cfg.modes = vec![Mode::Snapshot];
            for w in cfg.validate()? {
                eprintln!("warning: {w}");
            }
            let sys = experiment_system(&cfg)?;
            let report = base_time_sweep(&sys, cfg.m_c, cfg.m_o, &orders, exact, cfg.rank_tol)?;
            for b in &report.best {
                println!("r = {}: best j = {} (σ_r+1 = {:e})", b.order, b.base_time, b.next_hankel);
            }
            for (name, text) in [("sweep.csv", report.to_csv()), ("sweep.json", report.to_json()?)] {
                let path = out.join(name);
                write_text(&path, &text)?;
                written(&path);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = if matches!(e.root(), Error::Config(_)) {
                2
            } else if e.is_numerical() {
                3
            } else {
                1
            };
            ExitCode::from(code)
        }
    }
}
