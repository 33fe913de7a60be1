//! Command-line front end. JSON goes to stdout (or `--out`), one document per
//! run; tables are CSV with a `#` metadata line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or domain error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use delayed_hedge::convergence::{default_h_grid, default_logratio_grid};
use delayed_hedge::dual::build_dual;
use delayed_hedge::kernel::{limit_static_coeff, limit_value, KernelSpec};
use delayed_hedge::montecarlo::{estimate_utility, generate};
use delayed_hedge::solver::{solve, StrategyWeights};
use delayed_hedge::toeplitz::{build_a, inverse_via_v};
use delayed_hedge::verify::{self, Suite, VerifyConfig};
use delayed_hedge::{figure1_data, figure2_data, ContinuousMarket, DiscreteMarket, Table};

const SCHEMA_VERSION: u32 = 1;
const THREADS_ENV: &str = "DELAYED_HEDGE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "delayed-hedge", version, about = "Optimal semistatic hedging with delayed information")]
struct Cli {
    /// Cap on worker threads (also read from DELAYED_HEDGE_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct MarketArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    delay: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long = "sigma-hat")]
    sigma_hat: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    s0: f64,
}

impl MarketArgs {
    fn market(&self) -> Result<DiscreteMarket, CliError> {
        Ok(DiscreteMarket::new(self.n, self.delay, self.mu, self.sigma, self.sigma_hat)?
            .with_s0(self.s0))
    }

    fn config(&self) -> Value {
        json!({
            "n": self.n,
            "delay": self.delay,
            "mu": self.mu,
            "sigma": self.sigma,
            "sigma_hat": self.sigma_hat,
            "s0": self.s0,
        })
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal root, weights, static coefficient and value.
    Solve(MarketArgs),
    /// Run the identity and property suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        /// Largest n of the discrete grid.
        #[arg(long = "grid-size", default_value_t = 32)]
        grid_size: usize,
        #[arg(long, default_value_t = 100)]
        paths: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Monte Carlo utility of the optimal (or perturbed) strategy.
    Simulate {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Scale factor on the dynamic kernel weights.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        perturb: f64,
        /// Scale factor on the static coefficient.
        #[arg(long = "perturb-static", default_value_t = 1.0, allow_negative_numbers = true)]
        perturb_static: f64,
    },
    /// The limiting kernel on a uniform grid of [0, 1].
    Kernel {
        #[arg(long = "H", alias = "h")]
        h: f64,
        /// varsigma_hat^2 / varsigma^2.
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 500)]
        grid: usize,
    },
    /// Continuous-time limit constants.
    Limit {
        #[arg(long = "H", alias = "h")]
        h: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        vsigma: f64,
        #[arg(long = "vsigma-hat")]
        vsigma_hat: f64,
    },
    /// Discrete weights against the limiting kernel.
    Fig1 {
        #[arg(long = "H", alias = "h", default_value_t = 0.2)]
        h: f64,
        #[arg(long, default_value_t = 0.5)]
        ratio: f64,
        #[arg(long, value_delimiter = ',', default_value = "100,1000")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        grid: usize,
        /// Also emit kappa and n b_i without the level shift.
        #[arg(long)]
        unshifted: bool,
    },
    /// Limit value over a grid of delays and log volatility ratios.
    Fig2 {
        #[arg(long = "h-grid", value_delimiter = ',')]
        h_grid: Option<Vec<f64>>,
        #[arg(long = "logratio-grid", value_delimiter = ',', allow_hyphen_values = true)]
        logratio_grid: Option<Vec<f64>>,
    },
    /// Dump A (or its inverse) as CSV with 17 significant digits.
    Matrix {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long)]
        inverse: bool,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(delayed_hedge::Error),
    Io(std::io::Error),
}

impl From<delayed_hedge::Error> for CliError {
    fn from(e: delayed_hedge::Error) -> Self {
        CliError::Domain(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Domain(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

/// Output of one run and whether it counts as success.
struct Outcome {
    text: String,
    ok: bool,
}

fn json_doc(command: &str, config: Value, body: Value) -> Outcome {
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
    });
    if let (Some(d), Value::Object(b)) = (doc.as_object_mut(), body) {
        d.extend(b);
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
    text.push('\n');
    Outcome { text, ok: true }
}

fn csv_doc(command: &str, table: Table) -> Outcome {
    let mut table = table;
    table.metadata.insert(0, ("command".into(), command.into()));
    Outcome {
        text: table.to_csv(),
        ok: true,
    }
}

fn run(cmd: &Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Solve(args) => {
            let m = args.market()?;
            let sol = solve(&m)?;
            let c_hat = build_dual(&m)?.c_hat;
            Ok(json_doc(
                "solve",
                args.config(),
                json!({
                    "a": sol.a,
                    "b": sol.b,
                    "static_coeff": sol.static_coeff,
                    "merton": sol.merton,
                    "value": sol.value,
                    "c_hat": c_hat,
                }),
            ))
        }
        Command::Verify {
            suite,
            grid_size,
            paths,
            seed,
        } => {
            let suite: Suite = suite.parse()?;
            let cfg = VerifyConfig {
                grid_size: *grid_size,
                paths: *paths,
                seed: *seed,
            };
            let report = verify::run(suite, &cfg)?;
            let mut out = json_doc(
                "verify",
                serde_json::to_value(cfg).expect("config serializes"),
                serde_json::to_value(&report).expect("report serializes"),
            );
            out.ok = report.passed;
            Ok(out)
        }
        Command::Simulate {
            market,
            paths,
            seed,
            perturb,
            perturb_static,
        } => {
            if *paths < 100 {
                return Err(CliError::Usage(format!("--paths must be at least 100 (got {paths})")));
            }
            let m = market.market()?;
            let sol = solve(&m)?;
            let w = StrategyWeights::from_solution(&sol, &m)
                .with_kernel_scaled(*perturb)
                .with_static_scaled(*perturb_static);
            let batch = generate(&m, *paths, *seed)?;
            let report = estimate_utility(&batch, &w, &m)?;
            let mut config = market.config();
            config["paths"] = json!(paths);
            config["seed"] = json!(seed);
            config["perturb"] = json!(perturb);
            config["perturb_static"] = json!(perturb_static);
            let mut body = serde_json::to_value(&report).expect("report serializes");
            body["optimal_value"] = json!(sol.value);
            Ok(json_doc("simulate", config, body))
        }
        Command::Kernel { h, ratio, grid } => {
            if *grid == 0 {
                return Err(CliError::Usage("--grid must be at least 1".into()));
            }
            let c = ContinuousMarket::from_ratio(*h, 0.0, *ratio)?;
            let spec = KernelSpec::from_market(&c)?;
            let mut table = Table::new(&["t", "kappa", "gamma_kernel"])
                .with_meta("H", h)
                .with_meta("ratio", ratio)
                .with_meta("grid", grid)
                .with_meta("alpha", spec.alpha);
            for i in 0..=*grid {
                let t = i as f64 / *grid as f64;
                table
                    .rows
                    .push(vec![t, spec.kappa(t)?, spec.gamma_kernel(t)?]);
            }
            Ok(csv_doc("kernel", table))
        }
        Command::Limit {
            h,
            theta,
            vsigma,
            vsigma_hat,
        } => {
            let c = ContinuousMarket::new(*h, *theta, *vsigma, *vsigma_hat)?;
            let spec = KernelSpec::from_market(&c)?;
            Ok(json_doc(
                "limit",
                json!({ "H": h, "theta": theta, "vsigma": vsigma, "vsigma_hat": vsigma_hat }),
                json!({
                    "alpha": spec.alpha,
                    "limit_value": limit_value(&c)?,
                    "limit_static_coeff": limit_static_coeff(&c)?,
                }),
            ))
        }
        Command::Fig1 {
            h,
            ratio,
            ns,
            grid,
            unshifted,
        } => {
            let c = ContinuousMarket::from_ratio(*h, 0.0, *ratio)?;
            let table = figure1_data(&c, ns, *grid, *unshifted)?.with_meta("ratio", ratio);
            Ok(csv_doc("fig1", table))
        }
        Command::Fig2 {
            h_grid,
            logratio_grid,
        } => {
            let hs = h_grid.clone().unwrap_or_else(default_h_grid);
            let lrs = logratio_grid.clone().unwrap_or_else(default_logratio_grid);
            Ok(csv_doc("fig2", figure2_data(&hs, &lrs)?))
        }
        Command::Matrix { market, inverse } => {
            let m = market.market()?;
            let sol = solve(&m)?;
            let mat = if *inverse {
                inverse_via_v(sol.a, m.delay, m.n)?
            } else {
                build_a(&sol, m.n)?.to_dense()
            };
            let which = if *inverse { "inverse" } else { "A" };
            let mut text = format!(
                "# command=matrix matrix={which} n={} delay={} mu={} sigma={} sigma_hat={} a={}\n",
                m.n, m.delay, m.mu, m.sigma, m.sigma_hat, sol.a
            );
            text.push_str(&mat.to_csv());
            Ok(Outcome { text, ok: true })
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
            CliError::Usage(format!("{THREADS_ENV} must be a positive integer (got {v:?})"))
        })?),
        Err(_) => None,
    };
    if let Some(n) = flag.or(from_env) {
        if n == 0 {
            return Err(CliError::Usage("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads(cli.threads).and_then(|_| run(&cli.command));
    match result {
        Ok(out) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &out.text).map_err(CliError::Io),
                None => {
                    print!("{}", out.text);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
