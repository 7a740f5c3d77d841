//! Command-line front end: flag and config-file parsing, dispatch, and
//! CSV/JSON emission.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{branch_report, BranchTag};
use crate::config::Limits;
use crate::engine::{clustering_report, clustering_report_for, evaluate_all, Observable, RateMatch};
use crate::error::{Error, Result};
use crate::kernels::{model_params, ModelParams};
use crate::verify::{run_all, LAYER_DEPTH};

const DEFAULT_D_MAX: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Derived model coefficients.
    Params,
    /// Boundary field branches.
    Solve,
    /// Observable value by every route.
    Evaluate,
    /// Spine correlation decay.
    Correlate,
    /// Coefficients, branches and decay rate over a (beta, J) grid.
    Sweep,
    /// The full acceptance battery.
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub beta: Vec<f64>,
    #[serde(rename = "J")]
    pub j: Vec<f64>,
}

/// Everything a run needs. Read from a JSON file, then overridden by flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub beta: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    pub n: Option<usize>,
    pub d_max: Option<usize>,
    pub observable: Option<Observable>,
    pub grid: Option<Grid>,
    pub output_path: Option<PathBuf>,
    pub format: Option<Format>,
    pub oracle: bool,
}

#[derive(Debug, Parser)]
#[command(name = "comb-qmc", version, about = "Quantum Markov chains on the comb graph", allow_negative_numbers = true)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "J")]
    pub j: Option<f64>,
    /// Volume level (for `verify`: depth of the layer identity check).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Inclusive range `start:stop:step`.
    #[arg(long, value_parser = parse_axis)]
    pub grid_beta: Option<Axis>,
    /// Inclusive range `start:stop:step`.
    #[arg(long = "grid-J", value_parser = parse_axis)]
    pub grid_j: Option<Axis>,
    /// JSON observable file.
    #[arg(long)]
    pub observable: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also evaluate with the brute-force oracle.
    #[arg(long)]
    pub oracle: bool,
}

/// Grid values along one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis(pub Vec<f64>);

fn parse_axis(s: &str) -> std::result::Result<Axis, String> {
    parse_range(s).map(Axis)
}

/// Parses `start:stop:step` into the inclusive list of values.
pub fn parse_range(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, step] = parts[..] else {
        return Err(format!("expected start:stop:step, got {s:?}"));
    };
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("{x:?} is not a number"));
    let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
    if !(a.is_finite() && b.is_finite() && step.is_finite()) || step <= 0.0 || b < a {
        return Err(format!("range {s:?} needs start <= stop and a positive step"));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(format!("range {s:?} has {count} points"));
    }
    Ok((0..count).map(|i| a + i as f64 * step).collect())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl Cli {
    /// Config file (if any) with the flags laid over it.
    pub fn into_config(self) -> Result<RunConfig> {
        let mut cfg: RunConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => RunConfig::default(),
        };
        if let Some(c) = cfg.command {
            if c != self.command {
                return Err(Error::Config(format!("config file is for {c:?}, command line asks for {:?}", self.command)));
            }
        }
        cfg.command = Some(self.command);
        cfg.beta = self.beta.or(cfg.beta);
        cfg.j = self.j.or(cfg.j);
        cfg.n = self.n.or(cfg.n);
        cfg.d_max = self.d_max.or(cfg.d_max);
        if let Some(path) = &self.observable {
            cfg.observable = Some(read_json(path)?);
        }
        if self.grid_beta.is_some() || self.grid_j.is_some() {
            let mut grid = cfg.grid.take().unwrap_or_default();
            if let Some(b) = self.grid_beta {
                grid.beta = b.0;
            }
            if let Some(j) = self.grid_j {
                grid.j = j.0;
            }
            cfg.grid = Some(grid);
        }
        cfg.output_path = self.output.or(cfg.output_path);
        cfg.format = self.format.or(cfg.format);
        cfg.oracle |= self.oracle;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<Command> {
        let command = self.command.ok_or_else(|| Error::Config("no command given".into()))?;
        if self.grid.is_some() && command != Command::Sweep {
            return Err(Error::Config("a grid is only used by sweep".into()));
        }
        if self.observable.is_some() && !matches!(command, Command::Evaluate | Command::Correlate) {
            return Err(Error::Config("an observable is only used by evaluate and correlate".into()));
        }
        if matches!(command, Command::Params | Command::Solve | Command::Evaluate | Command::Correlate)
            && (self.beta.is_none() || self.j.is_none())
        {
            return Err(Error::Config(format!("{} needs --beta and --J", format!("{command:?}").to_lowercase())));
        }
        match command {
            Command::Evaluate if self.observable.is_none() => {
                return Err(Error::Config("evaluate needs --observable".into()));
            }
            Command::Correlate => {
                if let Some(o) = &self.observable {
                    if o.factors().len() != 1 {
                        return Err(Error::Config("correlate needs a single-site observable".into()));
                    }
                }
            }
            Command::Sweep => {
                let grid = self.grid.as_ref().ok_or_else(|| Error::Config("sweep needs --grid-beta and --grid-J".into()))?;
                if grid.beta.is_empty() || grid.j.is_empty() {
                    return Err(Error::Config("sweep needs non-empty beta and J grids".into()));
                }
            }
            _ => {}
        }
        if self.d_max.is_some_and(|d| d < 3) {
            return Err(Error::Config("--d-max must be at least 3".into()));
        }
        Ok(command)
    }

    fn params(&self) -> Result<ModelParams> {
        model_params(self.beta.unwrap_or_default(), self.j.unwrap_or_default())
    }

    fn d_max(&self) -> usize {
        self.d_max.unwrap_or(DEFAULT_D_MAX)
    }
}

/// What a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub command: Command,
    pub format: Format,
    /// The document to write (file or stdout).
    pub body: String,
    /// Human-readable lines for stderr.
    pub notes: Vec<String>,
    pub passed: bool,
}

/// Round-trip formatting: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_document(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json_document<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub alpha: f64,
    pub admissible_branches: usize,
    pub disordered_admissible: bool,
    pub ordered_candidate: bool,
    pub lambda_star: Option<f64>,
    pub ratio_spread: f64,
    pub rate_paper: f64,
    pub rate_direct: f64,
    pub matched: RateMatch,
    pub clustering: bool,
}

const SWEEP_HEADER: [&str; 15] = [
    "beta",
    "J",
    "tau1",
    "tau2",
    "tau3",
    "alpha",
    "admissible_branches",
    "disordered_admissible",
    "ordered_candidate",
    "lambda_star",
    "ratio_spread",
    "rate_paper",
    "rate_direct",
    "matched",
    "clustering",
];

fn rate_label(m: RateMatch) -> &'static str {
    match m {
        RateMatch::Paper => "paper",
        RateMatch::Direct => "direct",
        RateMatch::Both => "both",
        RateMatch::Neither => "neither",
        RateMatch::Undefined => "undefined",
    }
}

/// One sweep row.
pub fn sweep_row(beta: f64, j: f64, d_max: usize, limits: &Limits) -> Result<SweepRow> {
    let p = model_params(beta, j)?;
    let branches = branch_report(&p)?;
    let clustering = clustering_report(&p, d_max, limits)?;
    Ok(SweepRow {
        beta,
        j,
        tau1: p.tau1,
        tau2: p.tau2,
        tau3: p.tau3,
        alpha: p.alpha,
        admissible_branches: branches.branches.iter().filter(|b| b.admissible).count(),
        disordered_admissible: branches.branches.iter().any(|b| b.admissible && b.tag == BranchTag::Disordered),
        ordered_candidate: branches.branches.iter().any(|b| b.tag == BranchTag::OrderedCandidate),
        lambda_star: clustering.lambda_star,
        ratio_spread: clustering.ratio_spread,
        rate_paper: p.rate_paper,
        rate_direct: p.rate_direct,
        matched: clustering.matched,
        clustering: clustering.clustering,
    })
}

/// Executes a validated configuration.
pub fn run(cfg: &RunConfig, limits: &Limits) -> Result<Outcome> {
    let command = cfg.validate()?;
    let default_format = match command {
        Command::Params | Command::Correlate | Command::Sweep => Format::Csv,
        Command::Solve | Command::Evaluate | Command::Verify => Format::Json,
    };
    let format = cfg.format.unwrap_or(default_format);
    let mut notes = Vec::new();

    let (body, passed) = match command {
        Command::Params => {
            let p = cfg.params()?;
            let body = match format {
                Format::Json => json_document(&p)?,
                Format::Csv => csv_document(&ModelParams::CSV_HEADER, vec![p.csv_values().iter().map(|x| num(*x)).collect()])?,
            };
            (body, true)
        }
        Command::Solve => {
            let report = branch_report(&cfg.params()?)?;
            let admissible = report.branches.iter().filter(|b| b.admissible).count();
            notes.push(format!("{admissible} admissible branch(es) of {}", report.branches.len()));
            let body = match format {
                Format::Json => json_document(&report)?,
                Format::Csv => {
                    let header = [
                        "tag", "h11", "h12", "h21", "h22", "satisfies_l1", "satisfies_l2", "positive", "admissible",
                        "residual_norm",
                    ];
                    let rows = report
                        .branches
                        .iter()
                        .map(|b| {
                            let mut r = vec![format!("{:?}", b.tag)];
                            r.extend(b.h.iter().map(|x| num(*x)));
                            r.extend([b.satisfies_l1, b.satisfies_l2, b.positive, b.admissible].map(|x| x.to_string()));
                            r.push(num(b.residual_norm));
                            r
                        })
                        .collect();
                    csv_document(&header, rows)?
                }
            };
            (body, admissible == 1)
        }
        Command::Evaluate => {
            let obs = cfg.observable.as_ref().expect("validated");
            let n = cfg.n.unwrap_or_else(|| obs.depth().max(1));
            let report = evaluate_all(obs, n, &cfg.params()?, cfg.oracle, limits)?;
            notes.push(format!("max cross-route gap {:.3e}", report.max_cross_residual));
            let body = match format {
                Format::Json => json_document(&report)?,
                Format::Csv => {
                    let header = [
                        "volume_n", "iterative_re", "iterative_im", "product_re", "product_im", "oracle_re", "oracle_im",
                        "max_cross_residual",
                    ];
                    let row = vec![
                        report.volume_n.to_string(),
                        num(report.value_iterative.re),
                        num(report.value_iterative.im),
                        num(report.value_product.re),
                        num(report.value_product.im),
                        opt_num(report.value_oracle.map(|z| z.re)),
                        opt_num(report.value_oracle.map(|z| z.im)),
                        num(report.max_cross_residual),
                    ];
                    csv_document(&header, vec![row])?
                }
            };
            (body, report.routes_agree())
        }
        Command::Correlate => {
            let p = cfg.params()?;
            let report = match &cfg.observable {
                Some(o) => clustering_report_for(&p, &o.factors()[0].1, cfg.d_max(), limits)?,
                None => clustering_report(&p, cfg.d_max(), limits)?,
            };
            notes.push(format!(
                "lambda* = {}, matches {}",
                report.lambda_star.map_or("undefined".to_string(), num),
                rate_label(report.matched)
            ));
            let body = match format {
                Format::Json => json_document(&report)?,
                Format::Csv => {
                    let rows = report
                        .rows
                        .iter()
                        .map(|r| vec![r.d.to_string(), num(r.correlation.re), num(r.defect), opt_num(r.ratio), num(r.correlation.im)])
                        .collect();
                    csv_document(&["d", "correlation", "defect", "ratio", "correlation_im"], rows)?
                }
            };
            (body, report.clustering && report.ratio_spread <= 1e-8)
        }
        Command::Sweep => {
            let grid = cfg.grid.as_ref().expect("validated");
            let points: Vec<(f64, f64)> = grid.beta.iter().flat_map(|b| grid.j.iter().map(move |j| (*b, *j))).collect();
            let d_max = cfg.d_max();
            let rows: Vec<SweepRow> =
                points.par_iter().map(|&(b, j)| sweep_row(b, j, d_max, limits)).collect::<Result<_>>()?;
            let passed = rows.iter().all(|r| r.admissible_branches == 1 && r.disordered_admissible && r.clustering);
            notes.push(format!("{} grid points", rows.len()));
            let body = match format {
                Format::Json => json_document(&rows)?,
                Format::Csv => {
                    let records = rows
                        .iter()
                        .map(|r| {
                            vec![
                                num(r.beta),
                                num(r.j),
                                num(r.tau1),
                                num(r.tau2),
                                num(r.tau3),
                                num(r.alpha),
                                r.admissible_branches.to_string(),
                                r.disordered_admissible.to_string(),
                                r.ordered_candidate.to_string(),
                                opt_num(r.lambda_star),
                                num(r.ratio_spread),
                                num(r.rate_paper),
                                num(r.rate_direct),
                                rate_label(r.matched).to_string(),
                                r.clustering.to_string(),
                            ]
                        })
                        .collect();
                    csv_document(&SWEEP_HEADER, records)?
                }
            };
            (body, passed)
        }
        Command::Verify => {
            let results = run_all(limits, cfg.n.unwrap_or(LAYER_DEPTH));
            notes.extend(results.iter().map(|r| r.to_string()));
            let passed = results.iter().all(|r| r.passed);
            let body = match format {
                Format::Json => json_document(&results)?,
                Format::Csv => {
                    let rows = results
                        .iter()
                        .map(|r| vec![r.id.to_string(), r.name.clone(), r.passed.to_string(), num(r.seconds), r.detail.clone()])
                        .collect();
                    csv_document(&["id", "name", "passed", "seconds", "detail"], rows)?
                }
            };
            (body, passed)
        }
    };
    Ok(Outcome { command, format, body, notes, passed })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Process entry point; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("comb-qmc: {line}");
            return 2;
        }
    };
    let result = Limits::from_env().and_then(|limits| {
        let cfg = cli.into_config()?;
        let outcome = run(&cfg, &limits)?;
        match &cfg.output_path {
            Some(path) => write_atomic(path, &outcome.body)?,
            None => print!("{}", outcome.body),
        }
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("{note}");
            }
            if outcome.passed {
                0
            } else {
                eprintln!("comb-qmc: checks failed");
                1
            }
        }
        Err(e) => {
            eprintln!("comb-qmc: {e}");
            2
        }
    }
}
