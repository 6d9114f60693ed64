//! Flooding sum-product decoder with a pluggable channel-LLR source.

use super::ParityCheckCode;

/// Magnitude limit for every message and a-posteriori value.
pub const LLR_CLIP: f64 = 30.0;

#[inline]
fn clip(x: f64) -> f64 {
    x.clamp(-LLR_CLIP, LLR_CLIP)
}

#[inline]
fn log1p_exp_neg(x: f64) -> f64 {
    (-x).exp().ln_1p()
}

/// Pairwise check combination `2 atanh(tanh(a/2) tanh(b/2))`, evaluated as
/// `sign(a) sign(b) min(|a|, |b|) + log(1 + e^-|a+b|) - log(1 + e^-|a-b|)`.
///
/// The correction terms are symmetric in the signs, so
/// `boxplus(-a, b) == -boxplus(a, b)` holds bit for bit. An input at the
/// clip level is treated as a certain bit and passes the other through.
#[inline]
pub fn boxplus(a: f64, b: f64) -> f64 {
    let (aa, ab) = (a.abs(), b.abs());
    let mag = if aa >= LLR_CLIP {
        ab
    } else if ab >= LLR_CLIP {
        aa
    } else {
        aa.min(ab) + log1p_exp_neg(aa + ab) - log1p_exp_neg((aa - ab).abs())
    };
    let neg = (a < 0.0) != (b < 0.0);
    if a == 0.0 || b == 0.0 {
        0.0
    } else if neg {
        -mag
    } else {
        mag
    }
}

/// Extrinsic check-node outputs for one check, equal to the boxplus of the
/// other inputs. A degree-1 check forces its bit to zero and emits
/// `+LLR_CLIP`.
pub fn check_node_update(incoming: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; incoming.len()];
    let mut scratch = vec![0.0; incoming.len()];
    cn_update_into(incoming, &mut out, &mut scratch);
    out
}

/// Reference product form `2 atanh(prod tanh(x/2))` for testing.
pub fn check_node_update_tanh(incoming: &[f64]) -> Vec<f64> {
    (0..incoming.len())
        .map(|k| {
            if incoming.len() == 1 {
                return LLR_CLIP;
            }
            let prod: f64 = incoming
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, &x)| (x / 2.0).tanh())
                .product();
            clip(2.0 * prod.atanh())
        })
        .collect()
}

/// `phi(x) = -ln tanh(x / 2) = ln(1 + 2 e^-x / (1 - e^-x))`, an involution on
/// `[0, inf]`. Clip-level inputs count as certain and map to 0.
#[inline]
fn phi(x: f64) -> f64 {
    if x >= LLR_CLIP {
        return 0.0;
    }
    let e = (-x).exp();
    // 1 - e is exact enough once e <= 1/2
    let one_minus_e = if e <= 0.5 { 1.0 - e } else { -(-x).exp_m1() };
    (2.0 * e / one_minus_e).ln_1p()
}

/// Extrinsic outputs `prod sign * phi(sum phi(|x|))` over the other inputs,
/// with the sums formed by prefix/suffix passes so no subtraction occurs.
fn cn_update_into(incoming: &[f64], out: &mut [f64], suffix: &mut [f64]) {
    let d = incoming.len();
    if d == 0 {
        return;
    }
    let mut parity = false;
    for (o, &x) in out.iter_mut().zip(incoming) {
        *o = phi(x.abs());
        parity ^= x < 0.0;
    }
    let mut acc = 0.0;
    for k in (0..d).rev() {
        suffix[k] = acc;
        acc += out[k];
    }
    // suffix[k] now holds the sum over j > k
    let mut prefix = 0.0;
    for k in 0..d {
        let own = out[k];
        let mag = phi(prefix + suffix[k]).min(LLR_CLIP);
        let neg = parity ^ (incoming[k] < 0.0);
        out[k] = if mag == 0.0 {
            0.0
        } else if neg {
            -mag
        } else {
            mag
        };
        prefix += own;
    }
}

/// Source of channel LLRs: an initial value per bit, optionally refreshed
/// from the decoder's current extrinsic LLRs.
pub trait ChannelLlrProvider {
    /// Writes `L_ch^(0)` for every bit.
    fn init(&mut self, ch: &mut [f64]);

    /// Overwrites `ch` given the summed check messages of every bit.
    /// Providers without feedback leave `ch` untouched.
    fn refresh(&mut self, extrinsic: &[f64], ch: &mut [f64]);
}

/// Channel LLRs fixed at construction, never refreshed.
#[derive(Debug, Clone)]
pub struct FixedLlrs(pub Vec<f64>);

impl ChannelLlrProvider for FixedLlrs {
    fn init(&mut self, ch: &mut [f64]) {
        ch.copy_from_slice(&self.0);
    }

    fn refresh(&mut self, _extrinsic: &[f64], _ch: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    pub max_iter: usize,
    /// Refresh channel LLRs after every `refresh_period`-th iteration.
    pub refresh_period: usize,
    /// Stop as soon as the hard decision satisfies every check.
    pub early_stop: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            max_iter: 100,
            refresh_period: 1,
            early_stop: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub bits: Vec<u8>,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-decoder message memory.
#[derive(Debug, Clone, Default)]
pub struct LlrState {
    pub channel_llr: Vec<f64>,
    /// Bit-to-check messages, indexed by edge.
    pub v2c: Vec<f64>,
    /// Check-to-bit messages, indexed by edge.
    pub c2v: Vec<f64>,
    /// Sum of incoming check messages per bit.
    pub extrinsic: Vec<f64>,
    pub app_llr: Vec<f64>,
}

/// Reusable decoder buffers sized for one code.
#[derive(Debug, Clone)]
pub struct Decoder {
    state: LlrState,
    hard: Vec<u8>,
    scratch_in: Vec<f64>,
    scratch_out: Vec<f64>,
    scratch_suffix: Vec<f64>,
}

impl Decoder {
    pub fn new(code: &ParityCheckCode) -> Self {
        let (n, e) = (code.n_bits(), code.n_edges());
        let max_deg = (0..code.n_checks())
            .map(|c| code.check_degree(c))
            .max()
            .unwrap_or(0);
        Decoder {
            state: LlrState {
                channel_llr: vec![0.0; n],
                v2c: vec![0.0; e],
                c2v: vec![0.0; e],
                extrinsic: vec![0.0; n],
                app_llr: vec![0.0; n],
            },
            hard: vec![0; n],
            scratch_in: vec![0.0; max_deg],
            scratch_out: vec![0.0; max_deg],
            scratch_suffix: vec![0.0; max_deg],
        }
    }

    pub fn state(&self) -> &LlrState {
        &self.state
    }

    fn hard_decide(&mut self) {
        for (h, &a) in self.hard.iter_mut().zip(&self.state.app_llr) {
            *h = (a < 0.0) as u8;
        }
    }

    fn satisfied(&self, code: &ParityCheckCode) -> bool {
        (0..code.n_checks())
            .all(|c| code.check(c).iter().fold(0u8, |acc, &b| acc ^ self.hard[b]) == 0)
    }

    pub fn decode<P: ChannelLlrProvider + ?Sized>(
        &mut self,
        code: &ParityCheckCode,
        provider: &mut P,
        cfg: &DecoderConfig,
    ) -> DecodeOutput {
        assert_eq!(
            self.state.channel_llr.len(),
            code.n_bits(),
            "decoder sized for another code"
        );
        assert_eq!(
            self.state.c2v.len(),
            code.n_edges(),
            "decoder sized for another code"
        );
        let period = cfg.refresh_period.max(1);
        let st = &mut self.state;
        provider.init(&mut st.channel_llr);
        st.c2v.fill(0.0);
        st.extrinsic.fill(0.0);
        for (a, &c) in st.app_llr.iter_mut().zip(&st.channel_llr) {
            *a = clip(c);
        }
        self.hard_decide();
        let mut converged = self.satisfied(code);
        if converged && cfg.early_stop {
            return self.output(0, true);
        }

        let mut iterations = 0;
        for it in 1..=cfg.max_iter {
            iterations = it;
            let st = &mut self.state;
            for b in 0..code.n_bits() {
                let total = st.channel_llr[b] + st.extrinsic[b];
                for &e in code.bit_edges(b) {
                    st.v2c[e] = clip(total - st.c2v[e]);
                }
            }
            for c in 0..code.n_checks() {
                let r = code.check_range(c);
                let d = r.len();
                self.scratch_in[..d].copy_from_slice(&st.v2c[r.clone()]);
                cn_update_into(
                    &self.scratch_in[..d],
                    &mut self.scratch_out[..d],
                    &mut self.scratch_suffix[..d],
                );
                st.c2v[r].copy_from_slice(&self.scratch_out[..d]);
            }
            for b in 0..code.n_bits() {
                st.extrinsic[b] = code.bit_edges(b).iter().map(|&e| st.c2v[e]).sum();
            }
            if it % period == 0 {
                provider.refresh(&st.extrinsic, &mut st.channel_llr);
            }
            for b in 0..code.n_bits() {
                st.app_llr[b] = clip(st.channel_llr[b] + st.extrinsic[b]);
            }
            self.hard_decide();
            converged = self.satisfied(code);
            if converged && cfg.early_stop {
                break;
            }
        }
        self.output(iterations, converged)
    }

    fn output(&self, iterations: usize, converged: bool) -> DecodeOutput {
        DecodeOutput {
            bits: self.hard.clone(),
            iterations,
            converged,
        }
    }
}

/// One-shot decode with freshly allocated buffers.
pub fn decode<P: ChannelLlrProvider + ?Sized>(
    code: &ParityCheckCode,
    provider: &mut P,
    cfg: &DecoderConfig,
) -> DecodeOutput {
    Decoder::new(code).decode(code, provider, cfg)
}
