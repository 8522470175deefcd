//! `gini-drm`: Gini indices of two semicontinuous samples under a density
//! ratio model.
//!
//! Exit status is 0 on success, 2 on a usage error and 1 when the data cannot
//! be read or a computation fails.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gini_drm::drm::FitSummary;
use gini_drm::inference::{
    confidence_interval, gof_test, test_equality, InferenceOptions, IntervalEstimate, IntervalMethod, Target,
    TestMethod, TestResult,
};
use gini_drm::montecarlo::{run_ci_study, run_point_study, run_test_study, IntervalProcedure, ScenarioConfig, TestProcedure};
use gini_drm::sample::{load_two_files, load_two_samples};
use gini_drm::{emp_gini, fit_theta, jel_gini, mele_gini, Basis, BasisKind, FitOptions, GiniEstimate, TwoSampleData};
use serde_json::{json, Value};

/// Version of the JSON report layout.
const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "gini-drm", version, about = "Gini indices of two semicontinuous samples under a density ratio model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the density ratio model and report theta, zero proportions and diagnostics.
    Fit(DataArgs),
    /// Point estimates of G0, G1 and G0 - G1 by DRM, EMP and JEL.
    Estimate(EstimateArgs),
    /// Confidence intervals.
    Ci(CiArgs),
    /// Tests of G0 = G1.
    Test(TestArgs),
    /// Bootstrap goodness-of-fit test of the basis function.
    Gof(GofArgs),
    /// Monte Carlo study of one scenario.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV with columns `group` (0 or 1) and `value`.
    #[arg(long, conflicts_with_all = ["group0", "group1"], required_unless_present_all = ["group0", "group1"])]
    input: Option<PathBuf>,
    /// Group 0 values, one per line.
    #[arg(long, requires = "group1")]
    group0: Option<PathBuf>,
    /// Group 1 values, one per line.
    #[arg(long, requires = "group0")]
    group1: Option<PathBuf>,
    /// Basis q(x): log, identity or log+identity.
    #[arg(long, default_value = "log")]
    basis: BasisKind,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct SeedArgs {
    /// Bootstrap replicates.
    #[arg(long = "B", default_value_t = 1000)]
    b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Also run the goodness-of-fit test.
    #[arg(long)]
    gof: bool,
    #[command(flatten)]
    boot: SeedArgs,
}

#[derive(Args, Debug)]
struct CiArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "NA-DRM")]
    methods: Vec<IntervalMethod>,
    #[arg(long, value_delimiter = ',', default_value = "g0,g1,diff")]
    targets: Vec<Target>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[command(flatten)]
    boot: SeedArgs,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "NA-DRM")]
    methods: Vec<TestMethod>,
}

#[derive(Args, Debug)]
struct GofArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    boot: SeedArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Study {
    Point,
    Ci,
    Test,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("scenario").required(true).multiple(true).args(["preset", "config", "family"]))]
struct SimulateArgs {
    /// Named cell such as chisq-100-00 or exp-300-null3.
    #[arg(long)]
    preset: Option<String>,
    /// Scenario file, key=value lines or a JSON object.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long, value_enum, default_value = "point")]
    study: Study,
    /// Interval or test methods; defaults depend on the study.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "g0,g1,diff")]
    targets: Vec<Target>,
    /// Zero proportions, `a,b`.
    #[arg(long)]
    nu: Option<String>,
    /// Group sizes, `a,b`.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    basis: Option<BasisKind>,
    #[arg(long = "R")]
    r: Option<usize>,
    #[arg(long = "B")]
    b: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run replicates on one thread.
    #[arg(long)]
    serial: bool,
    /// Defaults to tsv.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

type CliResult = Result<String, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Ci(a) => cmd_ci(&a),
        Command::Test(a) => cmd_test(&a),
        Command::Gof(a) => cmd_gof(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    };
    match out {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, String> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| format!("cannot open {}: {e}", path.display()))
}

fn load(args: &DataArgs) -> Result<TwoSampleData<f64>, String> {
    let data = match (&args.input, &args.group0, &args.group1) {
        (Some(p), _, _) => load_two_samples(open(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        (None, Some(p0), Some(p1)) => {
            load_two_files(open(p0)?, open(p1)?).map_err(|e| format!("{} / {}: {e}", p0.display(), p1.display()))?
        }
        _ => return Err("give --input or both --group0 and --group1".into()),
    };
    Ok(data)
}

fn basis(args: &DataArgs) -> Basis<f64> {
    Basis::from_kind(args.basis.clone())
}

fn report(command: &str, mut body: Value) -> String {
    let obj = body.as_object_mut().expect("report body is an object");
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    let mut s = serde_json::to_string_pretty(&body).expect("serializable report");
    s.push('\n');
    s
}

fn sample_info(data: &TwoSampleData<f64>) -> Value {
    json!({
        "n": [data.n(0), data.n(1)],
        "n_zero": [data.n_zero(0), data.n_zero(1)],
    })
}

fn fit_summary(data: &TwoSampleData<f64>, b: &Basis<f64>) -> Result<FitSummary, String> {
    fit_theta(data, b, &FitOptions::default())
        .map(|f| f.summary())
        .map_err(|e| format!("model fit failed: {e}"))
}

fn tsv_fit(s: &FitSummary) -> String {
    let mut out = String::from("parameter\tvalue\n");
    for (k, t) in s.theta_hat.iter().enumerate() {
        out.push_str(&format!("theta{k}\t{t}\n"));
    }
    out.push_str(&format!("nu0\t{}\nnu1\t{}\nrho\t{}\n", s.nu_hat[0], s.nu_hat[1], s.rho_hat));
    out.push_str(&format!(
        "loglik\t{}\ngrad_norm\t{}\niterations\t{}\nconverged\t{}\n",
        s.loglik, s.grad_norm, s.iterations, s.converged
    ));
    out
}

fn cmd_fit(a: &DataArgs) -> CliResult {
    let data = load(a)?;
    let s = fit_summary(&data, &basis(a))?;
    Ok(match a.format {
        Format::Json => report("fit", json!({ "sample": sample_info(&data), "fit": s })),
        Format::Tsv => tsv_fit(&s),
    })
}

fn gof(data: &TwoSampleData<f64>, b: &Basis<f64>, boot: &SeedArgs) -> Result<TestResult, String> {
    gof_test(data, b, &FitOptions::default(), boot.b, boot.seed).map_err(|e| format!("goodness of fit: {e}"))
}

fn cmd_estimate(a: &EstimateArgs) -> CliResult {
    let data = load(&a.data)?;
    let b = basis(&a.data);
    let fit = fit_theta(&data, &b, &FitOptions::default()).map_err(|e| format!("model fit failed: {e}"))?;
    let estimates: Vec<GiniEstimate<f64>> = vec![
        mele_gini(&fit),
        emp_gini(&data),
        jel_gini(&data).map_err(|e| format!("JEL estimate: {e}"))?,
    ];
    let gof = a.gof.then(|| gof(&data, &b, &a.boot)).transpose()?;
    Ok(match a.data.format {
        Format::Json => {
            let mut body = json!({
                "sample": sample_info(&data),
                "fit": fit.summary(),
                "estimates": estimates,
            });
            if let Some(g) = gof {
                body["gof"] = json!(g);
                body["seed"] = json!(a.boot.seed);
                body["B"] = json!(a.boot.b);
            }
            report("estimate", body)
        }
        Format::Tsv => {
            let mut out = String::new();
            if let Some(g) = &gof {
                out.push_str(&format!("# seed={} B={} gof_p_value={}\n", a.boot.seed, a.boot.b, g.p_value));
            }
            out.push_str("method\tG0\tG1\tDIFF\n");
            for e in &estimates {
                let name = serde_json::to_value(e.method).expect("method name");
                out.push_str(&format!("{}\t{}\t{}\t{}\n", name.as_str().unwrap_or(""), e.g0, e.g1, e.diff));
            }
            out
        }
    })
}

fn cmd_ci(a: &CiArgs) -> CliResult {
    let data = load(&a.data)?;
    let options = InferenceOptions {
        basis: basis(&a.data),
        fit: FitOptions::default(),
        level: a.level,
        replicates: a.boot.b,
        seed: a.boot.seed,
    };
    let mut intervals: Vec<IntervalEstimate> = Vec::new();
    for &m in &a.methods {
        for &t in &a.targets {
            let logit = matches!(m, IntervalMethod::NlDrm | IntervalMethod::NlEmp | IntervalMethod::BlDrm);
            if logit && t == Target::Diff {
                if a.targets.len() == 1 {
                    return Err(format!("{m} gives intervals for G0 or G1 only"));
                }
                continue;
            }
            intervals.push(confidence_interval(&data, t, m, &options).map_err(|e| format!("{m} {t}: {e}"))?);
        }
    }
    Ok(match a.data.format {
        Format::Json => report(
            "ci",
            json!({
                "sample": sample_info(&data),
                "basis": a.data.basis.to_string(),
                "level": a.level,
                "seed": a.boot.seed,
                "B": a.boot.b,
                "intervals": intervals,
            }),
        ),
        Format::Tsv => {
            let mut out = format!("# seed={} B={}\ntarget\tmethod\tlevel\tlower\tupper\n", a.boot.seed, a.boot.b);
            for i in &intervals {
                out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", i.target, i.method, i.level, i.lower, i.upper));
            }
            out
        }
    })
}

fn cmd_test(a: &TestArgs) -> CliResult {
    let data = load(&a.data)?;
    let options = InferenceOptions {
        basis: basis(&a.data),
        ..InferenceOptions::default()
    };
    let tests: Vec<TestResult> = a
        .methods
        .iter()
        .map(|&m| test_equality(&data, m, &options).map_err(|e| format!("{m}: {e}")))
        .collect::<Result<_, _>>()?;
    Ok(match a.data.format {
        Format::Json => report(
            "test",
            json!({ "sample": sample_info(&data), "basis": a.data.basis.to_string(), "tests": tests }),
        ),
        Format::Tsv => {
            let mut out = String::from("method\tstatistic\tp_value\treject_0.05\n");
            for t in &tests {
                out.push_str(&format!("{}\t{}\t{}\t{}\n", t.method, t.statistic, t.p_value, t.rejects_at(0.05)));
            }
            out
        }
    })
}

fn cmd_gof(a: &GofArgs) -> CliResult {
    let data = load(&a.data)?;
    let b = basis(&a.data);
    let s = fit_summary(&data, &b)?;
    let t = gof(&data, &b, &a.boot)?;
    Ok(match a.data.format {
        Format::Json => report(
            "gof",
            json!({ "sample": sample_info(&data), "fit": s, "seed": a.boot.seed, "B": a.boot.b, "test": t }),
        ),
        Format::Tsv => format!(
            "# seed={} B={}\nstatistic\tp_value\n{}\t{}\n",
            a.boot.seed, a.boot.b, t.statistic, t.p_value
        ),
    })
}

fn scenario(a: &SimulateArgs) -> Result<ScenarioConfig, String> {
    let mut cfg = match &a.preset {
        Some(p) => ScenarioConfig::preset(p).map_err(|e| e.to_string())?,
        None => ScenarioConfig::preset("chisq-100-00").expect("built-in preset"),
    };
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        cfg = cfg.apply_config_text(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let overrides = [
        ("family", a.family.clone()),
        ("nu", a.nu.clone()),
        ("n", a.n.clone()),
        ("basis", a.basis.as_ref().map(|b| b.to_string())),
        ("replications", a.r.map(|v| v.to_string())),
        ("bootstrap", a.b.map(|v| v.to_string())),
        ("level", a.level.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
    ];
    for (k, v) in overrides {
        if let Some(v) = v {
            cfg.set(k, &v).map_err(|e| e.to_string())?;
        }
    }
    cfg.parallel = !a.serial;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn parse_all<T: std::str::FromStr<Err = String>>(names: &[String], default: &[&str]) -> Result<Vec<T>, String> {
    if names.is_empty() {
        default.iter().map(|s| s.parse()).collect()
    } else {
        names.iter().map(|s| s.parse()).collect()
    }
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult {
    let cfg = scenario(a)?;
    let summary = match a.study {
        Study::Point => {
            if !a.methods.is_empty() {
                return Err("the point study always reports EMP, JEL and DRM; drop --methods".into());
            }
            run_point_study(&cfg)
        }
        Study::Ci => {
            let methods: Vec<IntervalMethod> = parse_all(&a.methods, &["NA-EMP", "JEL", "AJEL", "NA-DRM"])?;
            let procs: Vec<&dyn IntervalProcedure> = methods.iter().map(|m| m as &dyn IntervalProcedure).collect();
            run_ci_study(&cfg, &procs, &a.targets)
        }
        Study::Test => {
            let methods: Vec<TestMethod> = parse_all(&a.methods, &["NA-EMP", "NL-EMP", "JEL", "AJEL", "NA-DRM", "NL-DRM"])?;
            let procs: Vec<&dyn TestProcedure> = methods.iter().map(|m| m as &dyn TestProcedure).collect();
            run_test_study(&cfg, &procs)
        }
    }
    .map_err(|e| e.to_string())?;
    Ok(match a.format.unwrap_or(Format::Tsv) {
        Format::Json => report(
            "simulate",
            json!({ "seed": cfg.seed, "summary": summary }),
        ),
        Format::Tsv => format!("# seed={} R={}\n{}", cfg.seed, cfg.replications, summary.to_tsv()),
    })
}
