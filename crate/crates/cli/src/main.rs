mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use qsc_core::channel::{
    capacity_bsc, capacity_qsc, marginal_bsc_eps, relative_capacity_loss, ChannelParams,
};
use qsc_core::code::save_alist;
use qsc_core::construct::{peg_construct, ConstructionReport, ConstructionSpec};
use qsc_core::design::{
    design_sweep, optimize_rho, predict_threshold, DesignProblem, FrontEndModel, ThresholdOptions,
};
use qsc_core::exit::{uniform_grid, ExitCurve, PriorModel};
use qsc_core::harness::{run_ber, write_csv, SimConfig};
use qsc_core::layered::{layer_params, thick_layer_rate};
use qsc_core::{verify, Error, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use config::Common;

#[derive(Parser, Debug)]
#[command(
    name = "qsc",
    version,
    about = "Binary LDPC coding over q-ary symmetric channels"
)]
struct Cli {
    /// JSON file with options for the subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// q-SC capacity against independent-BSC decoding.
    Capacity(CapacityArgs),
    /// Layered-scheme rates, per layer or with one thick last layer.
    Layered(LayeredArgs),
    /// Front-end EXIT curves.
    Exit(ExitArgs),
    /// Optimise the check degree distribution.
    Design(DesignArgs),
    /// Build a code by progressive edge growth.
    Construct(ConstructArgs),
    /// Monte-Carlo bit error rates.
    Simulate(SimulateArgs),
    /// Run the self-check suite.
    Verify,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapacityArgs {
    /// Symbol widths (repeatable or comma separated).
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<u32>>,
    /// Symbol error probabilities.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayeredArgs {
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Emit eps_i, delta_i and capacity of every layer instead.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    per_layer: bool,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExitArgs {
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Prior models: bec, gauss.
    #[arg(long, value_delimiter = ',')]
    model: Option<Vec<String>>,
    /// Number of uniform a-priori information points.
    #[arg(long)]
    points: Option<usize>,
    /// Monte-Carlo samples per point of a Gaussian curve.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignArgs {
    #[arg(long)]
    m: Option<u32>,
    /// One value gives a JSON design, several give a rate sweep CSV.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    d_v: Option<usize>,
    #[arg(long)]
    d_c_max: Option<usize>,
    /// Front-end model: gauss, bec or marginal-bsc.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    /// Also predict the decoding threshold of the result.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    threshold: bool,
    /// Force sweep output for a single value.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    sweep: bool,
}

/// `degree:fraction` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
struct DegreeWeight(usize, f64);

impl FromStr for DegreeWeight {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (d, w) = s
            .split_once(':')
            .ok_or_else(|| format!("expected degree:fraction, got `{s}`"))?;
        let d = d.trim().parse().map_err(|e| format!("degree `{d}`: {e}"))?;
        let w = w
            .trim()
            .parse()
            .map_err(|e| format!("fraction `{w}`: {e}"))?;
        Ok(DegreeWeight(d, w))
    }
}

impl Serialize for DegreeWeight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}:{}", self.0, self.1))
    }
}

impl<'de> Deserialize<'de> for DegreeWeight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstructArgs {
    /// Code length in bits.
    #[arg(long)]
    n: Option<usize>,
    /// Bits per symbol.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d_v: Option<usize>,
    /// Check degree fractions, e.g. `--rho 4:0.1,5:0.9`.
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<DegreeWeight>>,
    /// Take rho from the JSON written by `design`.
    #[arg(long)]
    design: Option<PathBuf>,
    /// Path of the JSON construction report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Sweep points (replaces the configured list).
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Parity-check matrix in alist format.
    #[arg(long)]
    alist: Option<PathBuf>,
    /// Bits per symbol of a q-SC (sets the channel when none is configured).
    #[arg(long)]
    m: Option<u32>,
    /// Also run the independent-BSC baseline decoder.
    #[arg(long)]
    baseline: bool,
    /// Transmit the all-zero codeword.
    #[arg(long)]
    all_zero: bool,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    min_bit_errors: Option<u64>,
    #[arg(long)]
    max_codewords: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Numerical(_) => 3,
                _ => 2,
            })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut file = config::read_config(cli.config.as_deref())?;
    let flags = Common {
        seed: cli.seed,
        workers: cli.workers,
        out: cli.out.clone(),
    };
    if let Command::Simulate(args) = &cli.command {
        return simulate(file, &flags, args);
    }
    let cmd_flags = match &cli.command {
        Command::Capacity(a) => serde_json::to_value(a)?,
        Command::Layered(a) => serde_json::to_value(a)?,
        Command::Exit(a) => serde_json::to_value(a)?,
        Command::Design(a) => serde_json::to_value(a)?,
        Command::Construct(a) => serde_json::to_value(a)?,
        Command::Simulate(_) | Command::Verify => Value::Null,
    };
    config::overlay(&mut file, cmd_flags);
    let common = config::split_common(&mut file, &flags)?;
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(Error::InvalidParam {
                field: "workers".into(),
                reason: "must be positive".into(),
            });
        }
        std::env::set_var("RAYON_NUM_THREADS", w.to_string());
    }
    match cli.command {
        Command::Capacity(_) => capacity(config::parse(file)?, &common),
        Command::Layered(_) => layered(config::parse(file)?, &common),
        Command::Exit(_) => exit_curves(config::parse(file)?, &common),
        Command::Design(_) => design(config::parse(file)?, &common),
        Command::Construct(_) => construct(config::parse(file)?, &common),
        Command::Verify => {
            if !file.is_empty() {
                let key = file.keys().next().cloned().unwrap_or_default();
                return Err(Error::InvalidParam {
                    field: key,
                    reason: "verify takes no options".into(),
                });
            }
            run_verify(&common)
        }
        Command::Simulate(_) => unreachable!("handled above"),
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn seed_or_warn(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        eprintln!("warning: no seed given, using 0; pass --seed for a reproducible record");
        0
    })
}

fn param(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        field: field.into(),
        reason: reason.into(),
    }
}

fn default_eps_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 * 0.05).collect()
}

fn capacity(a: CapacityArgs, common: &Common) -> Result<ExitCode> {
    let ms = a.m.unwrap_or_else(|| vec![1, 2, 4, 8, 16]);
    let eps = a.eps.unwrap_or_else(default_eps_grid);
    let mut w = sink(common.out.as_deref())?;
    writeln!(
        w,
        "m,epsilon,c_qsc,m_c_bsc,relative_loss,beyond_zero_capacity"
    )?;
    for &m in &ms {
        for &e in &eps {
            let p = ChannelParams::new(m, e)?;
            let loss = relative_capacity_loss(&p)
                .map(|l| l.to_string())
                .unwrap_or_default();
            let m_c_bsc = m as f64 * capacity_bsc(marginal_bsc_eps(&p));
            let beyond = e > p.capacity_zero_eps();
            writeln!(w, "{m},{e},{},{m_c_bsc},{loss},{beyond}", capacity_qsc(&p))?;
        }
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn layered(a: LayeredArgs, common: &Common) -> Result<ExitCode> {
    let ms = a.m.unwrap_or_else(|| vec![2, 4, 8]);
    let eps = a.eps.unwrap_or_else(|| vec![0.05, 0.1, 0.25, 0.4]);
    let mut w = sink(common.out.as_deref())?;
    if a.per_layer {
        writeln!(w, "m,epsilon,layer,eps_i,delta_i,capacity")?;
    } else {
        writeln!(w, "m,epsilon,mu,rate,capacity")?;
    }
    for &m in &ms {
        for &e in &eps {
            let p = ChannelParams::new(m, e)?;
            if a.per_layer {
                let prof = layer_params(&p);
                for i in 1..=m as usize {
                    let (ei, di) = (prof.eps_i[i - 1], prof.delta_i[i - 1]);
                    writeln!(w, "{m},{e},{i},{ei},{di},{}", prof.layer_capacity(i))?;
                }
            } else {
                let c = capacity_qsc(&p);
                for mu in 0..m {
                    writeln!(w, "{m},{e},{mu},{},{c}", thick_layer_rate(&p, mu)?)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn exit_curves(a: ExitArgs, common: &Common) -> Result<ExitCode> {
    let ms = a.m.unwrap_or_else(|| vec![4, 8]);
    let eps = a.eps.unwrap_or_else(|| vec![0.25]);
    let names = a
        .model
        .unwrap_or_else(|| vec!["bec".into(), "gauss".into()]);
    let grid = uniform_grid(a.points.unwrap_or(21));
    let samples = a.samples.unwrap_or(100_000);
    let mut models = Vec::new();
    for name in &names {
        models.push(match name.as_str() {
            "bec" => PriorModel::Bec,
            "gauss" | "gaussian" => PriorModel::Gaussian {
                n_samples: samples,
                seed: 0,
            },
            other => {
                return Err(param(
                    "model",
                    format!("unknown model `{other}` (bec, gauss)"),
                ))
            }
        });
    }
    if models
        .iter()
        .any(|m| matches!(m, PriorModel::Gaussian { .. }))
    {
        let seed = seed_or_warn(common.seed);
        for m in &mut models {
            if let PriorModel::Gaussian { seed: s, .. } = m {
                *s = seed;
            }
        }
    }
    let mut w = sink(common.out.as_deref())?;
    writeln!(w, "{}", ExitCurve::CSV_HEADER)?;
    for &m in &ms {
        for &e in &eps {
            let p = ChannelParams::new(m, e)?;
            for &model in &models {
                ExitCurve::compute(&p, &grid, model)?.write_csv_rows(&mut w)?;
            }
        }
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn front_end_model(name: &str, samples: usize, seed: u64) -> Result<FrontEndModel> {
    Ok(match name {
        "gauss" | "gaussian" => FrontEndModel::Gaussian {
            n_samples: samples,
            seed,
        },
        "bec" => FrontEndModel::Bec,
        "marginal-bsc" => FrontEndModel::MarginalBsc,
        other => {
            return Err(param(
                "model",
                format!("unknown model `{other}` (gauss, bec, marginal-bsc)"),
            ))
        }
    })
}

fn design(a: DesignArgs, common: &Common) -> Result<ExitCode> {
    let m = a.m.unwrap_or(4);
    let eps = a.eps.unwrap_or_else(|| vec![0.26]);
    let name = a.model.as_deref().unwrap_or("gauss");
    let gaussian = matches!(name, "gauss" | "gaussian");
    let seed = if gaussian {
        seed_or_warn(common.seed)
    } else {
        0
    };
    let samples = a.samples.unwrap_or(100_000);
    let mut base = DesignProblem::new(
        m,
        eps.first()
            .copied()
            .ok_or_else(|| param("eps", "empty list"))?,
    );
    base.model = front_end_model(name, samples, seed)?;
    if let Some(d) = a.d_v {
        base.d_v = d;
    }
    if let Some(d) = a.d_c_max {
        base.d_c_max = d;
    }
    if let Some(g) = a.margin {
        base.margin = g;
    }
    let mut w = sink(common.out.as_deref())?;
    if eps.len() > 1 || a.sweep {
        writeln!(w, "m,epsilon,rate,normalized_capacity")?;
        for pt in design_sweep(&base, &eps)? {
            let rate = pt.rate.map(|r| r.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{rate},{}",
                pt.m, pt.epsilon, pt.normalized_capacity
            )?;
        }
    } else {
        let r = optimize_rho(&base)?;
        let threshold = if a.threshold {
            let opts = ThresholdOptions {
                model: base.model,
                ..ThresholdOptions::default()
            };
            Some(predict_threshold(&r.distribution, m, &opts)?)
        } else {
            None
        };
        let doc = json!({
            "m": m,
            "epsilon": base.epsilon,
            "d_v": base.d_v,
            "d_c_max": base.d_c_max,
            "lambda": r.distribution.lambda,
            "rho": r.distribution.rho,
            "rate": r.rate,
            "min_slack": r.min_slack(),
            "threshold": threshold,
        });
        writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn rho_from_design(path: &Path) -> Result<BTreeMap<usize, f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| param("design", format!("{}: {e}", path.display())))?;
    let doc: Map<String, Value> = serde_json::from_str(&text)?;
    let rho = doc
        .get("rho")
        .cloned()
        .ok_or_else(|| param("design", "no `rho` entry"))?;
    serde_json::from_value(rho).map_err(|e| param("design", e.to_string()))
}

fn construct(a: ConstructArgs, common: &Common) -> Result<ExitCode> {
    let rho = match (&a.rho, &a.design) {
        (Some(_), Some(_)) => return Err(param("rho", "give either rho or design, not both")),
        (Some(list), None) => {
            let mut map = BTreeMap::new();
            for &DegreeWeight(d, f) in list {
                if map.insert(d, f).is_some() {
                    return Err(param("rho", format!("degree {d} listed twice")));
                }
            }
            map
        }
        (None, Some(path)) => rho_from_design(path)?,
        (None, None) => BTreeMap::from([(6, 1.0)]),
    };
    let spec = ConstructionSpec {
        n_bits: a.n.unwrap_or(12_000),
        symbol_width: a.m.unwrap_or(4),
        d_v: a.d_v.unwrap_or(3),
        rho,
        seed: seed_or_warn(common.seed),
    };
    let code = peg_construct(&spec)?;
    let report = serde_json::to_string_pretty(&ConstructionReport::new(&spec, &code)?)?;
    let mut w = sink(common.out.as_deref())?;
    w.write_all(save_alist(&code).as_bytes())?;
    w.flush()?;
    match (&a.report, &common.out) {
        (Some(path), _) => std::fs::write(path, report + "\n")?,
        (None, Some(_)) => println!("{report}"),
        (None, None) => eprintln!("{report}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(mut file: Map<String, Value>, flags: &Common, a: &SimulateArgs) -> Result<ExitCode> {
    let out = match file.remove("out") {
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(Value::Null) | None => None,
        Some(_) => return Err(param("out", "must be a path string")),
    };
    let out = flags.out.clone().or(out);
    if let Some(e) = &a.eps {
        file.insert("epsilon".into(), json!(e));
    }
    if let Some(p) = &a.alist {
        file.insert("code".into(), json!({ "alist": { "path": p } }));
    }
    if let Some(m) = a.m {
        match file.get_mut("channel") {
            Some(Value::Object(ch)) => {
                ch.insert("m".into(), json!(m));
            }
            _ => {
                file.insert("channel".into(), json!({ "kind": "qsc", "m": m }));
            }
        }
    }
    if a.baseline {
        file.insert("decoders".into(), json!(["frontend", "baseline"]));
    }
    if a.all_zero {
        file.insert("all_zero".into(), json!(true));
    }
    if let Some(n) = a.max_iter {
        file.insert("max_iter".into(), json!(n));
    }
    for (key, v) in [
        ("min_bit_errors", a.min_bit_errors),
        ("max_codewords", a.max_codewords),
    ] {
        if let Some(v) = v {
            let stop = file.entry("stopping").or_insert_with(|| json!({}));
            match stop {
                Value::Object(s) => {
                    s.insert(key.into(), json!(v));
                }
                _ => return Err(param("stopping", "must be an object")),
            }
        }
    }
    if let Some(s) = flags.seed {
        file.insert("seed".into(), json!(s));
    }
    if let Some(w) = flags.workers {
        file.insert("workers".into(), json!(w));
    }
    let cfg: SimConfig = config::parse(file)?;
    cfg.validate()?;
    if cfg.seed.is_none() {
        seed_or_warn(None);
    }
    let records = run_ber(&cfg)?;
    let mut w = sink(out.as_deref())?;
    write_csv(&records, &mut w)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn run_verify(common: &Common) -> Result<ExitCode> {
    let results = verify::run_all();
    for r in &results {
        println!(
            "{} {}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    if let Some(path) = &common.out {
        std::fs::write(path, serde_json::to_string_pretty(&results)? + "\n")?;
    }
    Ok(if results.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}
