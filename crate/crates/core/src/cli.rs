//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{read_config_or_manifest, read_json, ModelConfig, ResolvedModel, RunConfig};
use crate::diagnostics::{bound_expressions, theory_quantities, BoundRecord, TheoryQuantities};
use crate::error::{Error, Result};
use crate::exact::{exact_mle, ExactMleOptions, ExactModel, MleStatus, DEFAULT_CAP};
use crate::inference::{fisher_hat, qq_points, wald_intervals, WaldInterval};
use crate::io::{self, csv_number, RunManifest};
use crate::linalg::{self, Matrix};
use crate::mcmle::{fit, FitResult, FitStatus};
use crate::sampler::{sample_graph, BetweenMode};
use crate::studies::{run_study1, run_study2, write_study1, write_study2, StudyConfig};

const AFTER_HELP: &str = "\
Exit codes: 0 success, 1 usage error, 2 data or model error, 3 numerical failure.

File formats (tab separated, 1-based ids, `#` comments):
  blocks  node_id  block_id  [node_group]  [block_group]
  edges   source  target

CSV column orders:
  errors.csv    case,n,p,replication,status,l2_error
  coverage.csv  n,p,replication,status,theta_true,estimate,std_error,lower,upper,covered,z,std_error_block,covered_block
  qq.csv        n,theoretical,sample
  fit --format csv    term,estimate,std_error[,lower,upper]
  exact --format csv  term,value[,mean,std_error]";

#[derive(Parser, Debug)]
#[command(name = "locdep", version, about = "Local dependence random graph models", after_help = AFTER_HELP)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    /// Node-to-block assignment.
    #[arg(long)]
    pub blocks: PathBuf,
    /// Model terms and optional parameter vector (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Sampler and fitting settings (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed; overrides the seeds in `--config`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (default: stdout). A manifest is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw one graph from the model at its `theta` and write the edge list.
    Simulate {
        #[command(flatten)]
        graph: GraphArgs,
        /// Also sample between-block subgraphs.
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        between: bool,
    },
    /// Monte-Carlo maximum likelihood fit.
    Fit {
        #[command(flatten)]
        graph: GraphArgs,
        /// Observed edge list.
        #[arg(long)]
        edges: PathBuf,
        /// Add Wald intervals at level 1 - alpha.
        #[arg(long)]
        ci: Option<f64>,
        /// Draws per fitting iteration; overrides `--config`.
        #[arg(long)]
        n_mcmc: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Enumeration: exact MLE of an observed graph, or moments at the model `theta`.
    Exact {
        #[command(flatten)]
        graph: GraphArgs,
        /// Observed edge list; without it, report moments at the model `theta`.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Largest number of edge variables per subgraph.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Bound quantities from exact information at `theta`, or from block
    /// moment estimates of an observed graph.
    Diagnose {
        #[command(flatten)]
        graph: GraphArgs,
        /// Use block moment estimates from this graph instead of enumeration.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Constant multiplying the bounds.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Estimation error as the network grows.
    Study1(StudyArgs),
    /// Interval coverage for the transitive-edge parameter.
    Study2(StudyArgs),
    /// Normal QQ points of a column of standardized values.
    Qq {
        /// CSV with a header row.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "z")]
        column: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct StudyArgs {
    /// Study configuration (JSON), or the manifest.json of an earlier run;
    /// defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Root seed; overrides the configured one.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    crate::par::init_threads(cli.threads);
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

struct Loaded {
    model: ResolvedModel,
    run: RunConfig,
}

fn load(args: &GraphArgs) -> Result<Loaded> {
    let partition = Arc::new(io::read_blocks(&args.blocks)?);
    let model: ModelConfig = read_json(&args.model)?;
    let model = model.resolve(partition)?;
    let mut run: RunConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        run.mcmc.seed = s;
        run.fit.seed = s;
    }
    run.validate()?;
    Ok(Loaded { model, run })
}

fn require_theta(m: &ResolvedModel) -> Result<&crate::model::ParamVector> {
    m.theta.as_ref().ok_or_else(|| Error::config("theta", "this command needs a parameter vector in the model file"))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(text.as_bytes())?;
            s.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ManifestConfig<'a> {
    model: &'a ModelConfig,
    run: &'a RunConfig,
}

fn emit_with_manifest(args: &GraphArgs, command: &str, loaded: &Loaded, text: &str) -> Result<()> {
    let manifest = RunManifest::start(
        command,
        &ManifestConfig { model: &loaded.model.canonical, run: &loaded.run },
        loaded.run.fit.seed,
    )?;
    emit(args.out.as_deref(), text)?;
    if let Some(out) = &args.out {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        io::write_json(Path::new(&name), &manifest.finish())?;
    }
    Ok(())
}

fn json_text<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct ThetaOut<'a> {
    within: &'a [f64],
    between: &'a [f64],
}

#[derive(Serialize)]
struct InfoOut {
    within: Vec<Vec<f64>>,
    between: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct IntervalOut {
    term: String,
    #[serde(flatten)]
    interval: WaldInterval,
}

#[derive(Serialize)]
struct FitOut<'a> {
    terms: Vec<String>,
    theta_hat: ThetaOut<'a>,
    std_errors: Vec<f64>,
    info_hat: InfoOut,
    n_mcmc: usize,
    ess_trace: &'a [f64],
    outer_iterations: [usize; 2],
    status: FitStatus,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intervals: Option<Vec<IntervalOut>>,
}

fn intervals(spec: &crate::model::ModelSpec, r: &FitResult, alpha: f64) -> Result<Vec<IntervalOut>> {
    let mut out = wald_intervals(&r.theta_hat.within, &r.info_w, alpha)?;
    out.extend(wald_intervals(&r.theta_hat.between, &r.info_b, alpha)?);
    Ok(spec.term_names().into_iter().zip(out).map(|(term, interval)| IntervalOut { term, interval }).collect())
}

fn run(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Simulate { graph, between } => {
            let loaded = load(&graph)?;
            let theta = require_theta(&loaded.model)?;
            let mut mcmc = loaded.run.mcmc.clone();
            mcmc.n_samples = 1;
            let mode = if between { BetweenMode::Sample } else { BetweenMode::Empty };
            let g = sample_graph(&loaded.model.spec, theta, &mcmc, 0, mode)?.remove(0);
            emit_with_manifest(&graph, "simulate", &loaded, &io::format_edges(&g))?;
            Ok(0)
        }
        Command::Fit { graph, edges, ci, n_mcmc, format } => {
            let mut loaded = load(&graph)?;
            if let Some(n) = n_mcmc {
                loaded.run.fit.n_mcmc = n;
                loaded.run.validate()?;
            }
            let spec = &loaded.model.spec;
            let g = io::read_edges(&edges, spec.partition_arc().clone())?;
            let r = fit(&g, spec, &loaded.run.fit)?;
            let ivs = match ci {
                Some(a) if r.status != FitStatus::Nonexistence => Some(intervals(spec, &r, a)?),
                _ => None,
            };
            let se = r.standard_errors();
            let text = match format {
                Format::Json => json_text(&FitOut {
                    terms: spec.term_names(),
                    theta_hat: ThetaOut { within: &r.theta_hat.within, between: &r.theta_hat.between },
                    std_errors: se,
                    info_hat: InfoOut { within: linalg::to_rows(&r.info_w), between: linalg::to_rows(&r.info_b) },
                    n_mcmc: r.n_mcmc,
                    ess_trace: &r.ess_trace,
                    outer_iterations: [
                        r.within.as_ref().map_or(0, |p| p.outer_iterations),
                        r.between.as_ref().map_or(0, |p| p.outer_iterations),
                    ],
                    status: r.status,
                    seed: r.seed,
                    alpha: ci,
                    intervals: ivs,
                })?,
                Format::Csv => {
                    let mut s = String::from(if ivs.is_some() {
                        "term,estimate,std_error,lower,upper\n"
                    } else {
                        "term,estimate,std_error\n"
                    });
                    let est = r.theta_hat.to_flat();
                    for (j, name) in spec.term_names().iter().enumerate() {
                        s.push_str(&format!("{name},{},{}", csv_number(est[j]), csv_number(se[j])));
                        if let Some(iv) = &ivs {
                            s.push_str(&format!(
                                ",{},{}",
                                csv_number(iv[j].interval.lower),
                                csv_number(iv[j].interval.upper)
                            ));
                        }
                        s.push('\n');
                    }
                    s
                }
            };
            emit_with_manifest(&graph, "fit", &loaded, &text)?;
            Ok(if r.status == FitStatus::Nonexistence { 3 } else { 0 })
        }
        Command::Exact { graph, edges, cap, format } => {
            let loaded = load(&graph)?;
            let spec = &loaded.model.spec;
            let names = spec.term_names();
            match edges {
                Some(e) => {
                    let g = io::read_edges(&e, spec.partition_arc().clone())?;
                    let r = exact_mle(&g, spec, &ExactMleOptions { cap, ..Default::default() })?;
                    let text = match format {
                        Format::Json => json_text(&serde_json::json!({
                            "terms": names,
                            "theta_hat": { "within": r.theta.within, "between": r.theta.between },
                            "status": r.status,
                            "iterations": r.iterations,
                            "gradient_norm": r.gradient_norm,
                            "log_likelihood": r.log_likelihood,
                        }))?,
                        Format::Csv => {
                            let mut s = String::from("term,value\n");
                            for (n, v) in names.iter().zip(r.theta.to_flat()) {
                                s.push_str(&format!("{n},{}\n", csv_number(v)));
                            }
                            s
                        }
                    };
                    emit_with_manifest(&graph, "exact", &loaded, &text)?;
                    Ok(if r.status == MleStatus::SuspectedNonexistence { 3 } else { 0 })
                }
                None => {
                    let theta = require_theta(&loaded.model)?;
                    let model = ExactModel::build(spec, cap)?;
                    let (psi, mu, info) = model.moments(&theta.to_flat());
                    let text = match format {
                        Format::Json => json_text(&serde_json::json!({
                            "terms": names,
                            "log_normalizer": psi,
                            "mean": mu,
                            "fisher_info": linalg::to_rows(&info),
                        }))?,
                        Format::Csv => {
                            let mut s = String::from("term,value,mean,std_error\n");
                            s.push_str(&format!("log_normalizer,{},,\n", csv_number(psi)));
                            for (j, n) in names.iter().enumerate() {
                                s.push_str(&format!(
                                    "{n},{},{},{}\n",
                                    csv_number(theta.to_flat()[j]),
                                    csv_number(mu[j]),
                                    csv_number(info[(j, j)].max(0.0).sqrt())
                                ));
                            }
                            s
                        }
                    };
                    emit_with_manifest(&graph, "exact", &loaded, &text)?;
                    Ok(0)
                }
            }
        }
        Command::Diagnose { graph, edges, c, cap } => {
            let loaded = load(&graph)?;
            let spec = &loaded.model.spec;
            let (p, source) = (spec.p(), if edges.is_some() { "block_moments" } else { "exact_at_theta" });
            let (info_w, info_b) = match &edges {
                Some(e) => {
                    let g = io::read_edges(e, spec.partition_arc().clone())?;
                    let est = fisher_hat(&g, spec)?;
                    (est.full_w, est.full_b)
                }
                None => {
                    let theta = require_theta(&loaded.model)?;
                    let (_, _, info) = ExactModel::build(spec, cap)?.moments(&theta.to_flat());
                    split_info(&info, p)
                }
            };
            let tq = theory_quantities(&info_w, &info_b, spec.partition());
            let bounds = bound_expressions(&tq, c);
            let report = DiagnoseOut {
                source,
                note: "eigenvalue quantities are evaluated at one parameter value, not over a ball",
                quantities: &tq,
                bounds: bounds.as_ref().ok(),
                bounds_error: bounds.as_ref().err().map(ToString::to_string),
            };
            emit_with_manifest(&graph, "diagnose", &loaded, &json_text(&report)?)?;
            Ok(0)
        }
        Command::Study1(args) => {
            let (cfg, manifest) = study_setup(&args, "study1")?;
            let out = run_study1(&cfg)?;
            write_study1(&args.out, &cfg, &out, &manifest.finish())?;
            Ok(0)
        }
        Command::Study2(args) => {
            let (cfg, manifest) = study_setup(&args, "study2")?;
            let out = run_study2(&cfg)?;
            write_study2(&args.out, &cfg, &out, &manifest.finish())?;
            Ok(0)
        }
        Command::Qq { input, column, out } => {
            let values = read_column(&input, &column)?;
            let mut s = String::from("theoretical,sample\n");
            for (t, v) in qq_points(&values) {
                s.push_str(&format!("{},{}\n", csv_number(t), csv_number(v)));
            }
            emit(out.as_deref(), &s)?;
            Ok(0)
        }
    }
}

#[derive(Serialize)]
struct DiagnoseOut<'a> {
    source: &'a str,
    note: &'a str,
    quantities: &'a TheoryQuantities,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<&'a BoundRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds_error: Option<String>,
}

fn split_info(info: &Matrix, p: usize) -> (Matrix, Matrix) {
    let q = info.nrows() - p;
    (info.view((0, 0), (p, p)).into_owned(), info.view((p, p), (q, q)).into_owned())
}

fn study_setup(args: &StudyArgs, command: &str) -> Result<(StudyConfig, RunManifest)> {
    let mut cfg: StudyConfig = match &args.config {
        Some(p) => read_config_or_manifest(p)?,
        None => StudyConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let manifest = RunManifest::start(command, &cfg, cfg.seed)?;
    Ok((cfg, manifest))
}

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let file = path.display().to_string();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) =
        lines.next().ok_or_else(|| Error::Parse { file: file.clone(), line: 0, message: "empty file".into() })?;
    let idx = header.split(',').position(|h| h.trim() == column).ok_or_else(|| Error::Parse {
        file: file.clone(),
        line: 1,
        message: format!("no column `{column}`"),
    })?;
    let mut out = Vec::new();
    for (i, l) in lines {
        let field = l.split(',').nth(idx).unwrap_or("").trim();
        let v: f64 = field.parse().map_err(|_| Error::Parse {
            file: file.clone(),
            line: i + 1,
            message: format!("`{field}` is not a number"),
        })?;
        if v.is_finite() {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(Error::Parse { file, line: 0, message: format!("column `{column}` has no finite values") });
    }
    Ok(out)
}
