mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use borrowsize::design::sweep_surface;
use borrowsize::report::{self, PipelineOptions};
use borrowsize::scenario::FieldError;
use borrowsize::{AggregationMethod, Execution, Scenario, ScenarioError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::output::Fmt;

/// Bayesian sample sizes for trials that borrow from historical data.
#[derive(Parser)]
#[command(name = "borrowsize", version, about)]
struct Cli {
    /// Print numbers at full precision instead of 6 significant digits.
    #[arg(long, global = true)]
    exact: bool,
    /// Report errors on stderr as JSON.
    #[arg(long, global = true)]
    json_errors: bool,
    /// Run Monte Carlo and sweeps on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print elicited weights next to their transformed values.
    TransformWeights {
        scenario: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print the collective prior.
    Prior {
        scenario: PathBuf,
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(long)]
        json: bool,
    },
    /// Print the sample size.
    SampleSize {
        scenario: PathBuf,
        #[command(flatten)]
        prior: PriorArgs,
        /// Use the no-borrow prior N(mu0, s0_sq) instead of the historical data.
        #[arg(long, conflicts_with = "frequentist")]
        no_borrow: bool,
        /// Conventional z-test size from alpha and beta.
        #[arg(long)]
        frequentist: bool,
        #[arg(long)]
        json: bool,
    },
    /// Simulate trials and tally decisions.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        prior: PriorArgs,
        /// Trial size; defaults to the designed size.
        #[arg(long)]
        n: Option<u64>,
        /// True effect; repeat for several.
        #[arg(long = "mu-delta", allow_negative_numbers = true)]
        mu_delta: Vec<f64>,
        #[arg(long)]
        replicates: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Emit CSV instead of a table.
        #[arg(long, conflicts_with = "json")]
        csv: bool,
        #[arg(long)]
        json: bool,
    },
    /// Write prior precision and sample size over a weight grid as CSV.
    Sweep {
        scenario: PathBuf,
        /// One or two sources to vary, as w<k> (1-based) or source ids.
        #[arg(long, value_delimiter = ',', required = true)]
        axes: Vec<String>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the full pipeline and write a JSON report.
    Report {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Star)]
        method: Method,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Copy)]
struct PriorArgs {
    #[arg(long, value_enum, default_value_t = Method::Star)]
    method: Method,
    /// Use the elicited weights as they are, without linearizing.
    #[arg(long)]
    skip_transform: bool,
    /// Allow untransformed weights with --skip-transform.
    #[arg(long)]
    raw_ok: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Star,
    Legacy,
}

impl From<Method> for AggregationMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Star => AggregationMethod::Star,
            Method::Legacy => AggregationMethod::Legacy,
        }
    }
}

/// Input the user can fix; exits with status 1.
#[derive(Debug)]
struct Invalid {
    message: String,
    fields: Vec<FieldError>,
}

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)?;
        for e in &self.fields {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Invalid {}

fn invalid(message: impl Into<String>) -> anyhow::Error {
    Invalid {
        message: message.into(),
        fields: Vec::new(),
    }
    .into()
}

fn load(path: &Path) -> Result<Scenario> {
    match Scenario::from_path(path) {
        Ok(s) => Ok(s),
        Err(ScenarioError::Invalid(fields)) => Err(Invalid {
            message: format!("{} is not a valid scenario", path.display()),
            fields,
        }
        .into()),
        Err(e) => Err(e.into()),
    }
}

/// Core computation errors are argument errors.
fn core<T>(r: borrowsize::Result<T>) -> Result<T> {
    r.map_err(|e| invalid(e.to_string()))
}

struct Ctx {
    fmt: Fmt,
    mode: Execution,
}

impl Ctx {
    fn options(&self, p: &PriorArgs) -> PipelineOptions {
        PipelineOptions {
            method: p.method.into(),
            skip_transform: p.skip_transform,
            mode: self.mode,
        }
    }

    /// Refuses untransformed weights unless explicitly allowed.
    fn guarded_options(&self, s: &Scenario, p: &PriorArgs) -> Result<PipelineOptions> {
        let opts = self.options(p);
        if report::uses_raw_weights(s, &opts) && !p.raw_ok {
            let h = core(report::raw_weight_hazard(s))?
                .ok_or_else(|| anyhow!("raw weights without a hazard comparison"))?;
            return Err(invalid(format!(
                "--skip-transform would use the elicited weights untransformed. Raw weights over-discount \
                 the historical data: they give n = {} here instead of n = {}, the same hazard that inflates the \
                 seven-trial Alzheimer's example to n = 332. Pass --raw-ok to proceed anyway.",
                h.n_untransformed, h.n_transformed
            )));
        }
        Ok(opts)
    }
}

fn print(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn axis_index(s: &Scenario, axis: &str) -> Result<usize> {
    if let Some(k) = axis.strip_prefix('w').and_then(|k| k.parse::<usize>().ok()) {
        if (1..=s.sources.len()).contains(&k) {
            return Ok(k - 1);
        }
    }
    s.sources
        .iter()
        .position(|src| src.id == axis)
        .ok_or_else(|| {
            invalid(format!(
                "unknown axis {axis:?}; use w1..w{} or a source id",
                s.sources.len()
            ))
        })
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        fmt: Fmt { exact: cli.exact },
        mode: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
    };
    let f = ctx.fmt;
    match cli.command {
        Command::TransformWeights { scenario, json } => {
            let s = load(&scenario)?;
            let rows = core(report::transform_table(&s))?;
            print(&if json {
                f.to_json(&rows)?
            } else {
                output::weights_table(&rows, f)
            })
        }
        Command::Prior {
            scenario,
            prior,
            json,
        } => {
            let s = load(&scenario)?;
            let opts = ctx.guarded_options(&s, &prior)?;
            let cp = core(report::collective_prior(&s, &opts))?;
            if json {
                return print(&f.to_json(&cp)?);
            }
            let w = core(report::design_weights(&s, opts.skip_transform))?;
            let ids: Vec<String> = s.sources.iter().map(|x| x.id.clone()).collect();
            print(&output::prior_text(&cp, &ids, w.values(), f))
        }
        Command::SampleSize {
            scenario,
            prior,
            no_borrow,
            frequentist,
            json,
        } => {
            let s = load(&scenario)?;
            let (label, r) = if frequentist {
                ("frequentist", core(report::frequentist_sample_size(&s))?)
            } else if no_borrow {
                ("no borrowing", core(report::no_borrow_sample_size(&s))?)
            } else {
                if s.sources.is_empty() {
                    return Err(invalid(
                        "the scenario has no historical sources; use --no-borrow or --frequentist",
                    ));
                }
                let opts = ctx.guarded_options(&s, &prior)?;
                ("borrowing", core(report::borrow_sample_size(&s, &opts))?)
            };
            print(&if json {
                f.to_json(&r)?
            } else {
                output::sample_size_text(label, &r, f)
            })
        }
        Command::Simulate {
            scenario,
            prior,
            n,
            mu_delta,
            replicates,
            seed,
            csv,
            json,
        } => {
            let s = load(&scenario)?;
            let opts = ctx.guarded_options(&s, &prior)?;
            let spec = s.simulation.as_ref();
            let seed = seed
                .or(spec.map(|x| x.seed))
                .ok_or_else(|| invalid("a seed is required: pass --seed or set simulation.seed"))?;
            let replicates = replicates.or(spec.map(|x| x.replicates)).unwrap_or(10_000);
            let mu = if mu_delta.is_empty() {
                spec.map_or_else(|| vec![1.0, 0.0], |x| x.true_mu_delta.clone())
            } else {
                mu_delta
            };
            let n = n.or(spec.and_then(|x| x.n));
            let results = core(report::simulate_scenario(
                &s, &opts, n, &mu, replicates, seed,
            ))?;
            if csv {
                output::write_simulation_csv(&results, io::stdout().lock(), f)
            } else if json {
                print(&f.to_json(&results)?)
            } else {
                print(&output::simulation_table(&results, f))
            }
        }
        Command::Sweep {
            scenario,
            axes,
            step,
            output,
        } => {
            let s = load(&scenario)?;
            let idx = axes
                .iter()
                .map(|a| axis_index(&s, a))
                .collect::<Result<Vec<_>>>()?;
            if idx.len() == 2 && idx[0] == idx[1] {
                return Err(invalid("the two sweep axes must differ"));
            }
            let rows = core(sweep_surface(
                &s.historical_sources(),
                &s.weights(),
                &s.hyper,
                &s.design,
                &idx,
                step,
                ctx.mode,
            ))?;
            let names: Vec<String> = idx.iter().map(|k| format!("w{}", k + 1)).collect();
            output::write_sweep_csv(&names, &rows, sink(output.as_deref())?, f)
        }
        Command::Report {
            scenario,
            method,
            output,
        } => {
            let s = load(&scenario)?;
            let opts = PipelineOptions {
                method: method.into(),
                skip_transform: false,
                mode: ctx.mode,
            };
            let r = core(report::build_report(&s, &opts))?;
            let mut out = sink(output.as_deref())?;
            out.write_all(f.to_json(&r)?.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'static str,
    message: String,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    fields: &'a [FieldError],
}

fn report_error(e: &anyhow::Error, json: bool) -> ExitCode {
    let validation = e.downcast_ref::<Invalid>();
    let (kind, code) = match validation {
        Some(_) => ("validation", 1),
        None => ("runtime", 2),
    };
    if json {
        let body = ErrorBody {
            kind,
            message: validation.map_or_else(|| format!("{e:#}"), |v| v.message.clone()),
            fields: validation.map_or(&[], |v| v.fields.as_slice()),
        };
        let text = serde_json::to_string(&serde_json::json!({ "error": body })).unwrap_or_default();
        eprintln!("{text}");
    } else {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            if json_errors {
                return report_error(&invalid(e.to_string().trim_end().to_string()), true);
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let json = cli.json_errors;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => report_error(&e, json),
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<io::Error>())
        .any(|io| io.kind() == io::ErrorKind::BrokenPipe)
}
