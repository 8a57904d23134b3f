mod exit;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use twowayfe::bootstrap::{bootstrap_se, Estimator};
use twowayfe::panel::{load_panel_named, read_csv_rows, LoadOptions, PanelDataset};
use twowayfe::sim::{decomposition_rhs, delta_ell_oracle, delta_s_oracle, generate, DgpSpec};
use twowayfe::staggered::{
    build_cohorts, combined_effects, did_ell_linear_trends, first_treatment_effects, second_treatment_effects,
    AdoptionDates,
};
use twowayfe::{decompose, didm, report, summarize, Error, Result};

#[derive(Parser)]
#[command(name = "twowayfe", version, about = "Weight diagnostics for two-way fixed effects regressions and heterogeneity-robust DID estimators", after_help = exit::HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Serialize)]
struct Input {
    /// Long-format CSV with columns g,t,y[,n] and one column per treatment; `-` reads stdin.
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated treatment columns [default: every `d<k>` column, by k].
    #[arg(long, value_delimiter = ',')]
    treatments: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "json")]
    output: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    /// Second-treatment effects within first-treatment cohorts, with placebos.
    Second,
    /// First-treatment effects on cells not yet exposed to the second treatment.
    First,
    /// Effects of the summed treatment, dated from the first adoption.
    Combined,
    /// Second-treatment effects against each group's own linear trend.
    LinearTrends,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EstimatorKind {
    Didm,
    DidEll,
    Twfe,
}

#[derive(Subcommand)]
enum Command {
    /// TWFE coefficient on one treatment and its per-cell weight decomposition.
    Decompose {
        #[command(flatten)]
        input: Input,
        /// Target treatment column [default: the first treatment].
        #[arg(long)]
        target: Option<String>,
    },
    /// Switchers-versus-stayers estimator for one treatment among several.
    Didm {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        target: Option<String>,
        /// Reject non-binary treatments instead of scaling discrete changes.
        #[arg(long)]
        binary: bool,
    },
    /// Dynamic effects for two staggered treatments, the second adopted after the first.
    Dynamic {
        #[command(flatten)]
        input: Input,
        /// First treatment column [default: the first treatment].
        #[arg(long)]
        first: Option<String>,
        /// Second treatment column [default: the second treatment].
        #[arg(long)]
        second: Option<String>,
        #[arg(long, value_enum, default_value = "second")]
        mode: Mode,
    },
    /// Generate a synthetic panel from a JSON spec and write it as CSV.
    Simulate {
        /// JSON data-generating process spec.
        #[arg(long)]
        spec: PathBuf,
        /// Panel CSV destination [default: stdout].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the seed of the spec.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the true target parameters as JSON here.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Group-level bootstrap standard error of an estimator.
    Bootstrap {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        estimator: EstimatorKind,
        /// Target treatment for didm and twfe [default: the first treatment].
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        first: Option<String>,
        #[arg(long)]
        second: Option<String>,
        /// Horizon for did-ell.
        #[arg(long, default_value_t = 0)]
        ell: usize,
        #[arg(long, default_value_t = 200)]
        replications: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; 0 uses every core.
        #[arg(long, env = "TWOWAYFE_JOBS", default_value_t = 0)]
        jobs: usize,
        /// Include every replication estimate in the report.
        #[arg(long)]
        dump: bool,
    },
}

struct Loaded {
    panel: PanelDataset,
    digest: String,
}

fn read_source(path: &Path) -> Result<Vec<u8>> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf)?;
        Ok(buf)
    } else {
        fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

fn load(input: &Input, binary_required: bool) -> Result<Loaded> {
    let bytes = read_source(&input.input)?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let csv = read_csv_rows(bytes.as_slice(), input.treatments.as_deref())?;
    if !csv.ignored_columns.is_empty() {
        log::warn!("ignoring columns: {}", csv.ignored_columns.join(", "));
    }
    let panel = load_panel_named(&csv.rows, csv.treatment_names, LoadOptions { binary_required })?;
    Ok(Loaded { panel, digest })
}

fn treatment(panel: &PanelDataset, name: Option<&str>, default: usize) -> Result<usize> {
    match name {
        Some(name) => panel.treatment_index(name).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown treatment `{name}`; available: {}",
                panel.treatment_names().join(", ")
            ))
        }),
        None if default < panel.n_treatments() => Ok(default),
        None => Err(Error::InvalidConfig(format!(
            "need at least {} treatment columns, found {}",
            default + 1,
            panel.n_treatments()
        ))),
    }
}

fn provenance(config: Value, input: &Path, digest: &str) -> Value {
    json!({
        "tool": "twowayfe",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "input": {"path": input.display().to_string(), "sha256": digest},
    })
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(
            fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
        ),
        None => Box::new(Stdout { inner: io::stdout().lock(), closed: false }),
    })
}

/// Stdout that discards output once the reader has gone away, so piping a
/// report into `head` is not an error.
struct Stdout {
    inner: io::StdoutLock<'static>,
    closed: bool,
}

impl Write for Stdout {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        if self.closed {
            return Ok(buf.len());
        }
        match self.inner.write(buf) {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {
                self.closed = true;
                Ok(buf.len())
            }
            other => other,
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self.inner.flush() {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
            other => other,
        }
    }
}

fn emit_json(mut body: Value, prov: Value, out: Option<&Path>) -> Result<()> {
    body["provenance"] = prov;
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, &body).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

/// CSV reports start with `#` comment lines carrying the provenance.
fn emit_csv(prov: &Value, out: Option<&Path>, table: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut w = sink(out)?;
    writeln!(w, "# {} {}", prov["tool"].as_str().unwrap_or_default(), prov["version"].as_str().unwrap_or_default())?;
    writeln!(w, "# input {} sha256={}", prov["input"]["path"].as_str().unwrap_or_default(), prov["input"]["sha256"].as_str().unwrap_or_default())?;
    writeln!(w, "# config {}", prov["config"])?;
    table(&mut w)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Decompose { input, target } => {
            let Loaded { panel, digest } = load(&input, false)?;
            let k = treatment(&panel, target.as_deref(), 0)?;
            let config = json!({"subcommand": "decompose", "input": &input, "target": panel.treatment_names()[k]});
            let prov = provenance(config, &input.input, &digest);
            let decomp = decompose(&panel, k)?;
            let summary = summarize(&decomp, &panel);
            if summary.own.negative_count > 0 {
                log::warn!(
                    "{} of {} own-effect weights are negative (sum {})",
                    summary.own.negative_count,
                    summary.own.cells,
                    summary.own.negative_sum
                );
            }
            match input.output {
                Format::Json => emit_json(report::decomposition_json(&panel, &decomp, &summary), prov, input.out.as_deref()),
                Format::Csv => emit_csv(&prov, input.out.as_deref(), |w| report::decomposition_csv(&panel, &decomp, w)),
            }
        }
        Command::Didm { input, target, binary } => {
            let Loaded { panel, digest } = load(&input, binary)?;
            let k = treatment(&panel, target.as_deref(), 0)?;
            let config = json!({"subcommand": "didm", "input": &input, "target": panel.treatment_names()[k], "binary": binary});
            let prov = provenance(config, &input.input, &digest);
            let res = didm(&panel, k)?;
            if res.n_s == 0.0 {
                log::warn!("no switching cell has a matching stayer; the estimate is set to 0");
            }
            if res.n_dropped() > 0 {
                log::warn!("{} switching cells excluded (see `dropped`)", res.n_dropped());
            }
            match input.output {
                Format::Json => emit_json(report::didm_json(&panel, &res), prov, input.out.as_deref()),
                Format::Csv => emit_csv(&prov, input.out.as_deref(), |w| report::didm_csv(&panel, &res, w)),
            }
        }
        Command::Dynamic {
            input,
            first,
            second,
            mode,
        } => {
            let Loaded { panel, digest } = load(&input, true)?;
            let k1 = treatment(&panel, first.as_deref(), 0)?;
            let k2 = treatment(&panel, second.as_deref(), 1)?;
            if k1 == k2 {
                return Err(Error::InvalidConfig("first and second treatments must differ".into()));
            }
            let names = panel.treatment_names();
            let config = json!({"subcommand": "dynamic", "input": &input, "first": names[k1], "second": names[k2], "mode": mode});
            let prov = provenance(config, &input.input, &digest);
            if let Mode::LinearTrends = mode {
                let dates = AdoptionDates::new(&panel, k1, k2)?;
                let mut estimates = Vec::new();
                let mut first_err = None;
                for ell in 0..panel.n_periods() {
                    match did_ell_linear_trends(&panel, &dates, ell) {
                        Ok(e) => estimates.push(e),
                        Err(e) => {
                            first_err.get_or_insert(e);
                        }
                    }
                }
                if estimates.is_empty() {
                    return Err(first_err.expect("at least one horizon attempted"));
                }
                for e in &estimates {
                    let dropped = e
                        .dropped
                        .iter()
                        .filter(|(_, r)| !matches!(r, twowayfe::staggered::LinearTrendDrop::BeyondPanel))
                        .count();
                    if dropped > 0 && e.ell == 0 {
                        log::warn!("{dropped} adopting groups dropped from the linear-trend estimates");
                    }
                }
                let body = report::linear_trends_json(&panel, &estimates);
                return match input.output {
                    Format::Json => emit_json(body, prov, input.out.as_deref()),
                    Format::Csv => Err(Error::InvalidConfig("linear-trends output is JSON only".into())),
                };
            }
            let res = match mode {
                Mode::Second => {
                    let structure = build_cohorts(&panel, k1, k2)?;
                    let simultaneous = (0..panel.n_groups()).filter(|&g| structure.dates.simultaneous(g)).count();
                    if simultaneous > 0 {
                        log::warn!("{simultaneous} groups adopt both treatments in the same period and never enter a comparison");
                    }
                    let res = second_treatment_effects(&panel, &structure)?;
                    if res.placebos.is_empty() {
                        log::warn!("no placebo horizon has enough pre-adoption periods");
                    }
                    res
                }
                Mode::First => first_treatment_effects(&panel, k1, k2)?,
                Mode::Combined => combined_effects(&panel, k1, k2)?,
                Mode::LinearTrends => unreachable!(),
            };
            match input.output {
                Format::Json => emit_json(report::dynamic_json(&panel, &res), prov, input.out.as_deref()),
                Format::Csv => emit_csv(&prov, input.out.as_deref(), |w| report::dynamic_csv(&panel, &res, w)),
            }
        }
        Command::Simulate { spec, out, seed, truth } => {
            let text = read_source(&spec)?;
            let text = String::from_utf8(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let mut dgp = DgpSpec::from_json(&text)?;
            if let Some(seed) = seed {
                dgp.seed = seed;
            }
            let syn = generate(&dgp)?;
            syn.panel.write_csv(sink(out.as_deref())?)?;
            if let Some(path) = truth {
                let mut body = json!({"spec": dgp});
                if syn.static_truth.is_some() {
                    let per_treatment: Vec<Value> = (0..syn.panel.n_treatments())
                        .map(|k| {
                            let rhs = decompose(&syn.panel, k)
                                .ok()
                                .and_then(|d| decomposition_rhs(&syn, &d).ok().map(|r| (d.beta_fe, r)));
                            json!({
                                "treatment": syn.panel.treatment_names()[k],
                                "delta_s": delta_s_oracle(&syn, k).ok(),
                                "decomposition_rhs": rhs.map(|r| r.1),
                            })
                        })
                        .collect();
                    body["static"] = json!(per_treatment);
                }
                if syn.staggered_truth.is_some() {
                    if let Ok(structure) = build_cohorts(&syn.panel, 0, 1) {
                        let deltas: Vec<Value> = (0..=structure.l_nt)
                            .map(|ell| json!({"ell": ell, "delta": delta_ell_oracle(&syn, &structure, ell).ok()}))
                            .collect();
                        body["dynamic"] = json!(deltas);
                    }
                }
                let digest = hex::encode(Sha256::digest(text.as_bytes()));
                let config = json!({"subcommand": "simulate", "spec": spec.display().to_string(), "seed": dgp.seed});
                emit_json(body, provenance(config, &spec, &digest), Some(&path))?;
            }
            Ok(())
        }
        Command::Bootstrap {
            input,
            estimator,
            target,
            first,
            second,
            ell,
            replications,
            seed,
            jobs,
            dump,
        } => {
            let Loaded { panel, digest } = load(&input, false)?;
            let names = panel.treatment_names();
            let (est, config) = match estimator {
                EstimatorKind::Didm | EstimatorKind::Twfe => {
                    let k = treatment(&panel, target.as_deref(), 0)?;
                    let est = match estimator {
                        EstimatorKind::Didm => Estimator::Didm { target: k },
                        _ => Estimator::Twfe { target: k },
                    };
                    (est, json!({"target": names[k]}))
                }
                EstimatorKind::DidEll => {
                    let k1 = treatment(&panel, first.as_deref(), 0)?;
                    let k2 = treatment(&panel, second.as_deref(), 1)?;
                    (
                        Estimator::DidEll { first: k1, second: k2, ell },
                        json!({"first": names[k1], "second": names[k2], "ell": ell}),
                    )
                }
            };
            let mut config = config;
            config["subcommand"] = json!("bootstrap");
            config["input"] = json!(&input);
            config["estimator"] = json!(estimator);
            config["replications"] = json!(replications);
            config["seed"] = json!(seed);
            config["jobs"] = json!(jobs);
            let prov = provenance(config, &input.input, &digest);
            let res = bootstrap_se(est, &panel, replications, seed, jobs)?;
            match input.output {
                Format::Json => emit_json(report::bootstrap_json(&res, dump), prov, input.out.as_deref()),
                Format::Csv => emit_csv(&prov, input.out.as_deref(), |w| {
                    let mut out = csv::Writer::from_writer(w);
                    out.write_record(["replication", "estimate"])?;
                    for (r, e) in res.estimates.iter().enumerate() {
                        out.write_record([r.to_string(), e.map(|v| v.to_string()).unwrap_or_default()])?;
                    }
                    out.flush()?;
                    Ok(())
                }),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, record| {
            let level = match record.level() {
                log::Level::Warn => "warning".to_owned(),
                other => other.as_str().to_lowercase(),
            };
            writeln!(buf, "{level}: {}", record.args())
        })
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit::code(&err);
            eprintln!(
                "{}",
                json!({"error": {"kind": exit::kind(&err), "message": err.to_string(), "exit_code": code}})
            );
            ExitCode::from(code)
        }
    }
}
