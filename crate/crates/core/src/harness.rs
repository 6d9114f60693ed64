//! Monte-Carlo bit error rate experiments.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{transmit, ChannelParams, QscStarChannel, QscStarParams, SymbolBlock};
use crate::code::{load_alist, Decoder, DecoderConfig, ParityCheckCode};
use crate::construct::{peg_construct, validate_symbol_constraint, ConstructionSpec};
use crate::error::{Error, Result};
use crate::frontend::{FrontEndChannel, SymbolFrontEnd};
use crate::rng::{substream, trial_stream};

pub const CONFIG_VERSION: u32 = 1;

/// Where the parity-check matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CodeSource {
    Alist { path: PathBuf },
    Construct(ConstructionSpec),
}

impl CodeSource {
    /// Loads or builds the code, with bits grouped into symbols of `m`.
    pub fn load(&self, m: usize) -> Result<ParityCheckCode> {
        let code = match self {
            CodeSource::Alist { path } => load_alist(&std::fs::read_to_string(path)?)?,
            CodeSource::Construct(spec) => {
                if spec.symbol_width != m {
                    return Err(Error::param(
                        "code.construct.symbol_width",
                        format!("{} does not match channel m = {m}", spec.symbol_width),
                    ));
                }
                peg_construct(spec)?
            }
        };
        code.with_symbol_width(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    Qsc,
    QscStar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub m: u32,
    /// Conditional bit error probabilities given a symbol error (q-SC* only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_cond: Option<Vec<f64>>,
}

/// A channel instance at one sweep point.
#[derive(Debug, Clone)]
pub enum SimChannel {
    Qsc(ChannelParams),
    QscStar(QscStarChannel),
}

impl SimChannel {
    pub fn new(cfg: &ChannelConfig, epsilon: f64) -> Result<Self> {
        match cfg.kind {
            ChannelKind::Qsc => {
                if cfg.eps_cond.is_some() {
                    return Err(Error::param("channel.eps_cond", "only valid for qsc-star"));
                }
                Ok(SimChannel::Qsc(ChannelParams::new(cfg.m, epsilon)?))
            }
            ChannelKind::QscStar => {
                let cond = cfg
                    .eps_cond
                    .clone()
                    .ok_or_else(|| Error::param("channel.eps_cond", "required for qsc-star"))?;
                if cond.len() != cfg.m as usize {
                    return Err(Error::param(
                        "channel.eps_cond",
                        format!("need {} entries", cfg.m),
                    ));
                }
                Ok(SimChannel::QscStar(QscStarChannel::new(
                    QscStarParams::new(epsilon, cond)?,
                )))
            }
        }
    }

    pub fn transmit<R: Rng + ?Sized>(&self, x: &SymbolBlock, rng: &mut R) -> SymbolBlock {
        match self {
            SimChannel::Qsc(p) => transmit(x, p, rng),
            SimChannel::QscStar(c) => c.transmit(x, rng),
        }
    }

    pub fn front_end(&self) -> FrontEndChannel {
        match self {
            SimChannel::Qsc(p) => FrontEndChannel::Qsc(*p),
            SimChannel::QscStar(c) => FrontEndChannel::QscStar(c.params().clone()),
        }
    }
}

/// Per-point stopping rule. Frames are simulated in fixed batches and the
/// rule is checked between batches, so the frame count does not depend on
/// the number of workers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingRule {
    #[serde(default = "default_min_bit_errors")]
    pub min_bit_errors: u64,
    #[serde(default = "default_max_codewords")]
    pub max_codewords: u64,
    #[serde(default = "default_batch")]
    pub batch: u64,
}

fn default_min_bit_errors() -> u64 {
    100
}
fn default_max_codewords() -> u64 {
    10_000
}
fn default_batch() -> u64 {
    32
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            min_bit_errors: default_min_bit_errors(),
            max_codewords: default_max_codewords(),
            batch: default_batch(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    /// Front-end refreshed from the decoder's extrinsic beliefs.
    Frontend,
    /// Front-end frozen at the marginal BSC LLRs.
    Baseline,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Frontend => "frontend",
            DecoderKind::Baseline => "baseline",
        }
    }
}

fn default_version() -> u32 {
    CONFIG_VERSION
}
fn default_max_iter() -> usize {
    100
}
fn default_refresh() -> usize {
    1
}
fn default_decoders() -> Vec<DecoderKind> {
    vec![DecoderKind::Frontend]
}

/// `simulate` configuration (JSON, `version: 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub code: CodeSource,
    pub channel: ChannelConfig,
    pub epsilon: Vec<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_refresh")]
    pub frontend_refresh_period: usize,
    #[serde(default)]
    pub stopping: StoppingRule,
    #[serde(default = "default_decoders")]
    pub decoders: Vec<DecoderKind>,
    /// Transmit the all-zero codeword instead of random codewords.
    #[serde(default)]
    pub all_zero: bool,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::param(
                "version",
                format!("unsupported version {}", self.version),
            ));
        }
        if self.epsilon.is_empty() {
            return Err(Error::param("epsilon", "sweep list is empty"));
        }
        if let Some(e) = self.epsilon.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::param("epsilon", format!("{e} outside [0, 1]")));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be positive"));
        }
        if self.frontend_refresh_period == 0 {
            return Err(Error::param("frontend_refresh_period", "must be positive"));
        }
        if self.stopping.batch == 0 || self.stopping.max_codewords == 0 {
            return Err(Error::param(
                "stopping",
                "batch and max_codewords must be positive",
            ));
        }
        if self.decoders.is_empty() {
            return Err(Error::param("decoders", "no decoder selected"));
        }
        if self.workers == Some(0) {
            return Err(Error::param("workers", "must be positive"));
        }
        for &e in &self.epsilon {
            SimChannel::new(&self.channel, e)?;
        }
        Ok(())
    }

    fn decoder_config(&self) -> DecoderConfig {
        DecoderConfig {
            max_iter: self.max_iter,
            refresh_period: self.frontend_refresh_period,
            early_stop: true,
        }
    }
}

/// Counts at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub decoder: String,
    pub epsilon: f64,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub frame_errors: u64,
    pub fer: f64,
    pub mean_iterations: f64,
    pub wall_time_s: f64,
}

impl BerRecord {
    pub const CSV_HEADER: &'static str =
        "decoder,epsilon,frames,bits,bit_errors,ber,frame_errors,fer,mean_iterations,wall_time_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.3}",
            self.decoder,
            self.epsilon,
            self.frames,
            self.bits,
            self.bit_errors,
            self.ber,
            self.frame_errors,
            self.fer,
            self.mean_iterations,
            self.wall_time_s
        )
    }

    /// 95% Wilson score interval for the bit error rate.
    pub fn ber_interval(&self) -> (f64, f64) {
        wilson_interval(self.bit_errors, self.bits, Z_95)
    }
}

pub fn write_csv<W: Write>(records: &[BerRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", BerRecord::CSV_HEADER)?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    frames: u64,
    bit_errors: u64,
    frame_errors: u64,
    iterations: u64,
}

impl Tally {
    fn add(self, o: Tally) -> Tally {
        Tally {
            frames: self.frames + o.frames,
            bit_errors: self.bit_errors + o.bit_errors,
            frame_errors: self.frame_errors + o.frame_errors,
            iterations: self.iterations + o.iterations,
        }
    }
}

/// Everything needed to simulate one sweep point.
struct Point<'a> {
    code: &'a ParityCheckCode,
    channel: SimChannel,
    kind: DecoderKind,
    dec: DecoderConfig,
    all_zero: bool,
    seed: u64,
    index: usize,
}

impl Point<'_> {
    fn frame(&self, decoder: &mut Decoder, trial: u64) -> Tally {
        let mut rng = substream(self.seed, trial_stream(self.index, trial));
        let code = self.code;
        let m = code.symbol_width() as u32;
        let x = if self.all_zero {
            vec![0u8; code.n_bits()]
        } else {
            let info: Vec<u8> = (0..code.dimension())
                .map(|_| rng.random_range(0..2u8))
                .collect();
            code.encode(&info)
        };
        let tx = SymbolBlock::from_bits(m, x).expect("codeword length is a multiple of m");
        let y = self.channel.transmit(&tx, &mut rng);
        let fe = SymbolFrontEnd::new(self.channel.front_end(), y.into_bits())
            .expect("sized by the code");
        let mut fe = match self.kind {
            DecoderKind::Frontend => fe,
            DecoderKind::Baseline => fe.frozen(),
        };
        let out = decoder.decode(code, &mut fe, &self.dec);
        let errors = out
            .bits
            .iter()
            .zip(tx.bits())
            .filter(|(a, b)| a != b)
            .count() as u64;
        Tally {
            frames: 1,
            bit_errors: errors,
            frame_errors: (errors > 0) as u64,
            iterations: out.iterations as u64,
        }
    }

    fn run(&self, rule: &StoppingRule) -> BerRecord {
        let start = Instant::now();
        let mut total = Tally::default();
        while total.frames < rule.max_codewords && total.bit_errors < rule.min_bit_errors {
            let n = rule.batch.min(rule.max_codewords - total.frames);
            let first = total.frames;
            let batch = (first..first + n)
                .into_par_iter()
                .map_init(|| Decoder::new(self.code), |dec, t| self.frame(dec, t))
                .reduce(Tally::default, Tally::add);
            total = total.add(batch);
        }
        let bits = total.frames * self.code.n_bits() as u64;
        BerRecord {
            decoder: self.kind.name().to_string(),
            epsilon: match &self.channel {
                SimChannel::Qsc(p) => p.epsilon(),
                SimChannel::QscStar(c) => c.params().epsilon(),
            },
            frames: total.frames,
            bits,
            bit_errors: total.bit_errors,
            ber: total.bit_errors as f64 / bits as f64,
            frame_errors: total.frame_errors,
            fer: total.frame_errors as f64 / total.frames as f64,
            mean_iterations: total.iterations as f64 / total.frames as f64,
            wall_time_s: start.elapsed().as_secs_f64(),
        }
    }
}

/// Checks that `code` fits the configured channel and symbol constraint.
pub fn check_code(config: &SimConfig, code: &ParityCheckCode) -> Result<()> {
    let m = config.channel.m as usize;
    if code.symbol_width() != m {
        return Err(Error::param(
            "channel.m",
            format!(
                "code symbol width {} differs from m = {m}",
                code.symbol_width()
            ),
        ));
    }
    let violations = validate_symbol_constraint(code);
    if !violations.is_empty() {
        return Err(Error::SymbolConstraint {
            count: violations.len(),
        });
    }
    Ok(())
}

/// Runs every configured decoder over the sweep on `code`. Records are
/// ordered by decoder, then sweep point. A missing seed means seed 0; the
/// caller is expected to warn.
pub fn run_ber_on(config: &SimConfig, code: &ParityCheckCode) -> Result<Vec<BerRecord>> {
    config.validate()?;
    check_code(config, code)?;
    let run = || -> Result<Vec<BerRecord>> {
        let mut out = Vec::new();
        for &kind in &config.decoders {
            for (index, &eps) in config.epsilon.iter().enumerate() {
                let point = Point {
                    code,
                    channel: SimChannel::new(&config.channel, eps)?,
                    kind,
                    dec: config.decoder_config(),
                    all_zero: config.all_zero,
                    seed: config.seed.unwrap_or(0),
                    index,
                };
                out.push(point.run(&config.stopping));
            }
        }
        Ok(out)
    };
    match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Loads the configured code and runs the sweep.
pub fn run_ber(config: &SimConfig) -> Result<Vec<BerRecord>> {
    config.validate()?;
    let code = config.code.load(config.channel.m as usize)?;
    run_ber_on(config, &code)
}

/// The same sweep with the front-end frozen at its initial marginal LLRs,
/// i.e. decoding the q-SC as `m` independent BSCs.
pub fn run_comparison_bsc_decomposition(config: &SimConfig) -> Result<Vec<BerRecord>> {
    run_ber(&SimConfig {
        decoders: vec![DecoderKind::Baseline],
        ..config.clone()
    })
}
