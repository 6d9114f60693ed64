//! Symbol front-end: turns extrinsic bit beliefs into refreshed channel LLRs.
//!
//! For a received symbol `y` and a-priori LLRs `l_a` on its bits, let
//! `p_k` be the probability that bit `k` agrees with `y_k` and
//! `beta_[i] = prod_{k != i} p_k`. The refreshed crossover probability of
//! bit `i` is `eps_i = eps / (2 eps + beta_[i] (q - eps q - 1))` and its
//! channel LLR is `(1 - 2 y_i) log((1 - eps_i) / eps_i)`.

use std::ops::Mul;

use crate::channel::{ChannelParams, QscStarParams};
use crate::code::{ChannelLlrProvider, LLR_CLIP};
use crate::error::{Error, Result};

/// Agreement probabilities are kept inside `[P_FLOOR, 1 - P_FLOOR]`.
pub const P_FLOOR: f64 = 1e-12;

/// Widest symbol accepted by the enumeration oracles.
pub const BRUTE_FORCE_MAX_BITS: usize = 16;

#[inline]
fn sign(y: u8) -> f64 {
    if y & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn clip(x: f64) -> f64 {
    x.clamp(-LLR_CLIP, LLR_CLIP)
}

/// `P(X = y)` from the LLR of `X` and the received bit.
#[inline]
pub fn agreement_prob(y: u8, llr: f64) -> f64 {
    let x = sign(y) * llr;
    (1.0 / (1.0 + (-x).exp())).clamp(P_FLOOR, 1.0 - P_FLOOR)
}

/// Exclusive folds `out[i] = vals[0] op ... op vals[i-1] op vals[i+1] ...`
/// by one prefix and one suffix pass, `3 (n - 2)` applications of `op`.
pub fn exclusion_fold<T: Copy>(vals: &[T], identity: T, op: impl Fn(T, T) -> T, out: &mut [T]) {
    let n = vals.len();
    assert_eq!(out.len(), n);
    if n == 0 {
        return;
    }
    out[n - 1] = identity;
    if n == 1 {
        out[0] = identity;
        return;
    }
    // suffix products stored in out, shifted by one
    out[n - 2] = vals[n - 1];
    for k in (0..n - 2).rev() {
        out[k] = op(vals[k + 1], out[k + 1]);
    }
    let mut prefix = vals[0];
    for k in 1..n - 1 {
        out[k] = op(prefix, out[k]);
        prefix = op(prefix, vals[k]);
    }
    out[n - 1] = prefix;
}

/// Exclusion products `out[i] = prod_{k != i} vals[k]` without division.
pub fn exclusion_products<T: Copy + Mul<Output = T>>(vals: &[T], one: T, out: &mut [T]) {
    exclusion_fold(vals, one, |a, b| a * b, out)
}

/// Channel LLR of the marginal BSC, `log((2 (1 - 2^-m) - eps) / eps)`.
pub fn init_llr(p: &ChannelParams) -> Result<f64> {
    let top = 2.0 * (1.0 - (-(p.m() as f64)).exp2());
    let eps = p.epsilon();
    if !(eps > 0.0 && eps < top) {
        return Err(Error::Domain(format!(
            "marginal channel LLR needs 0 < eps < {top}, got {eps}"
        )));
    }
    Ok(((top - eps) / eps).ln())
}

/// Scratch buffers for per-symbol computations.
#[derive(Debug, Clone, Default)]
pub struct SymbolScratch {
    p: Vec<f64>,
    excl: Vec<f64>,
}

impl SymbolScratch {
    fn prepare(&mut self, m: usize) {
        self.p.resize(m, 0.0);
        self.excl.resize(m, 0.0);
    }
}

/// Refreshed crossover probabilities `eps_i` of one symbol.
pub fn refreshed_eps(y: &[u8], l_a: &[f64], p: &ChannelParams) -> Vec<f64> {
    let mut s = SymbolScratch::default();
    let m = y.len();
    s.prepare(m);
    fill_beta_excl(y, l_a, &mut s);
    let (eps, q) = (p.epsilon(), p.q_f64());
    s.excl
        .iter()
        .map(|&b| eps / (2.0 * eps + b * (q - eps * q - 1.0)))
        .collect()
}

fn fill_beta_excl(y: &[u8], l_a: &[f64], s: &mut SymbolScratch) {
    for ((pk, &yk), &lk) in s.p.iter_mut().zip(y).zip(l_a) {
        *pk = agreement_prob(yk, lk);
    }
    exclusion_products(&s.p, 1.0, &mut s.excl);
}

/// Refreshed channel LLRs of one symbol.
pub fn refresh(y: &[u8], l_a: &[f64], p: &ChannelParams) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    refresh_into(y, l_a, p, &mut SymbolScratch::default(), &mut out);
    out
}

/// Allocation-free form of [`refresh`].
pub fn refresh_into(
    y: &[u8],
    l_a: &[f64],
    p: &ChannelParams,
    s: &mut SymbolScratch,
    out: &mut [f64],
) {
    let m = y.len();
    debug_assert!(l_a.len() == m && out.len() == m);
    s.prepare(m);
    fill_beta_excl(y, l_a, s);
    let (eps, q) = (p.epsilon(), p.q_f64());
    let k = q - eps * q - 1.0;
    for i in 0..m {
        let eps_i = eps / (2.0 * eps + s.excl[i] * k);
        let l = if s.excl[i] == 0.0 {
            0.0
        } else {
            ((1.0 - eps_i) / eps_i).ln()
        };
        out[i] = clip(sign(y[i]) * l);
    }
}

/// A-posteriori LLRs `L(X_i)` evaluated in the direct form
/// `log(1 + beta_[i] (q - q eps - 1) / eps) + L_extr(X_i = y_i)`, with the
/// exclusion products taken in the log domain.
pub fn app_llr_direct(y: &[u8], l_extr: &[f64], p: &ChannelParams) -> Vec<f64> {
    let m = y.len();
    let logp: Vec<f64> = y
        .iter()
        .zip(l_extr)
        .map(|(&yk, &lk)| agreement_prob(yk, lk).ln())
        .collect();
    let mut log_excl = vec![0.0; m];
    exclusion_fold(&logp, 0.0, |a, b| a + b, &mut log_excl);
    let (eps, q) = (p.epsilon(), p.q_f64());
    let ratio = (q - q * eps - 1.0) / eps;
    (0..m)
        .map(|i| {
            let channel = (log_excl[i].exp() * ratio).ln_1p();
            let agree = channel + sign(y[i]) * l_extr[i];
            sign(y[i]) * agree
        })
        .collect()
}

fn check_width(m: usize) -> Result<()> {
    if m == 0 || m > BRUTE_FORCE_MAX_BITS {
        return Err(Error::param(
            "m",
            format!("enumeration needs 1..={BRUTE_FORCE_MAX_BITS} bits, got {m}"),
        ));
    }
    Ok(())
}

/// Bit posteriors `P(X_i = y_i)` by summing the symbol posterior
/// `P(y | x) prod_k P_extr(x_k)` over all `2^m` symbols.
pub fn brute_force_marginal(y: &[u8], extr_probs: &[f64], p: &ChannelParams) -> Result<Vec<f64>> {
    check_width(y.len())?;
    let masses = marginal_masses(extr_probs, |e| p.pattern_prob(e))?;
    Ok(masses.into_iter().map(|(a, d)| a / (a + d)).collect())
}

/// Bitwise APP LLRs `log P(X_i = y_i) / P(X_i != y_i)` by enumeration.
pub fn brute_force_app_llr(y: &[u8], extr_probs: &[f64], p: &ChannelParams) -> Result<Vec<f64>> {
    check_width(y.len())?;
    let masses = marginal_masses(extr_probs, |e| p.pattern_prob(e))?;
    Ok(masses.into_iter().map(|(a, d)| (a / d).ln()).collect())
}

/// [`brute_force_app_llr`] for the q-SC*.
pub fn brute_force_app_llr_star(
    y: &[u8],
    extr_probs: &[f64],
    p: &QscStarParams,
) -> Result<Vec<f64>> {
    check_width(y.len())?;
    if y.len() != p.m() as usize {
        return Err(Error::param("y", "symbol width differs from channel"));
    }
    let masses = marginal_masses(extr_probs, |e| p.pattern_prob(e))?;
    Ok(masses.into_iter().map(|(a, d)| (a / d).ln()).collect())
}

/// Unnormalised (agree, disagree) posterior masses per bit;
/// `extr_probs[k]` is the prior probability that bit `k` is not flipped.
fn marginal_masses(extr_probs: &[f64], pattern: impl Fn(u64) -> f64) -> Result<Vec<(f64, f64)>> {
    let m = extr_probs.len();
    let mut masses = vec![(0.0, 0.0); m];
    for e in 0..1u64 << m {
        let prior: f64 = (0..m)
            .map(|k| {
                if (e >> k) & 1 == 0 {
                    extr_probs[k]
                } else {
                    1.0 - extr_probs[k]
                }
            })
            .product();
        let w = pattern(e) * prior;
        for (k, (a, d)) in masses.iter_mut().enumerate() {
            if (e >> k) & 1 == 0 {
                *a += w;
            } else {
                *d += w;
            }
        }
    }
    if !masses.first().is_some_and(|(a, d)| a + d > 0.0) {
        return Err(Error::Numerical("symbol posterior has zero mass".into()));
    }
    Ok(masses)
}

/// Refreshed channel LLRs of one q-SC* symbol:
/// `log((1 - e_i) / e_i + (1 - alpha) R_i / (alpha e_i))` with
/// `R_i = prod_{k != i} p_k / (e_k + p_k - 2 e_k p_k)` and `e_k = eps_{k|*}`.
pub fn refresh_qsc_star(y: &[u8], l_a: &[f64], p: &QscStarParams) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    refresh_qsc_star_into(y, l_a, p, &mut SymbolScratch::default(), &mut out);
    out
}

pub fn refresh_qsc_star_into(
    y: &[u8],
    l_a: &[f64],
    p: &QscStarParams,
    s: &mut SymbolScratch,
    out: &mut [f64],
) {
    let m = y.len();
    debug_assert!(m == p.m() as usize && l_a.len() == m && out.len() == m);
    s.prepare(m);
    let ec = p.eps_cond();
    for k in 0..m {
        let pk = agreement_prob(y[k], l_a[k]);
        s.p[k] = pk / (ec[k] + pk - 2.0 * ec[k] * pk);
    }
    exclusion_products(&s.p, 1.0, &mut s.excl);
    let alpha = p.alpha();
    for i in 0..m {
        let e = ec[i];
        let arg = (1.0 - e) / e + (1.0 - alpha) * s.excl[i] / (alpha * e);
        out[i] = clip(sign(y[i]) * arg.max(f64::MIN_POSITIVE).ln());
    }
}

/// Which channel model the front-end inverts.
#[derive(Debug, Clone, PartialEq)]
pub enum FrontEndChannel {
    Qsc(ChannelParams),
    QscStar(QscStarParams),
}

impl FrontEndChannel {
    pub fn m(&self) -> usize {
        match self {
            FrontEndChannel::Qsc(p) => p.m() as usize,
            FrontEndChannel::QscStar(p) => p.m() as usize,
        }
    }

    pub fn refresh_into(&self, y: &[u8], l_a: &[f64], s: &mut SymbolScratch, out: &mut [f64]) {
        match self {
            FrontEndChannel::Qsc(p) => refresh_into(y, l_a, p, s, out),
            FrontEndChannel::QscStar(p) => refresh_qsc_star_into(y, l_a, p, s, out),
        }
    }
}

/// Decoder-facing provider for one received word. With `frozen` set the
/// initial marginal LLRs are kept for the whole decode.
#[derive(Debug, Clone)]
pub struct SymbolFrontEnd {
    channel: FrontEndChannel,
    received: Vec<u8>,
    frozen: bool,
    scratch: SymbolScratch,
    zeros: Vec<f64>,
}

impl SymbolFrontEnd {
    pub fn new(channel: FrontEndChannel, received: Vec<u8>) -> Result<Self> {
        let m = channel.m();
        if received.len() % m != 0 {
            return Err(Error::param(
                "received",
                format!("length {} not a multiple of m = {m}", received.len()),
            ));
        }
        Ok(SymbolFrontEnd {
            channel,
            received,
            frozen: false,
            scratch: SymbolScratch::default(),
            zeros: vec![0.0; m],
        })
    }

    /// Independent-BSC baseline: never refreshes.
    pub fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Reuses the provider for another received word of the same length.
    pub fn set_received(&mut self, received: &[u8]) {
        assert_eq!(received.len(), self.received.len());
        self.received.copy_from_slice(received);
    }

    pub fn received(&self) -> &[u8] {
        &self.received
    }
}

impl ChannelLlrProvider for SymbolFrontEnd {
    fn init(&mut self, ch: &mut [f64]) {
        let m = self.channel.m();
        for (y, out) in self.received.chunks_exact(m).zip(ch.chunks_exact_mut(m)) {
            self.channel
                .refresh_into(y, &self.zeros, &mut self.scratch, out);
        }
    }

    fn refresh(&mut self, extrinsic: &[f64], ch: &mut [f64]) {
        if self.frozen {
            return;
        }
        let m = self.channel.m();
        for ((y, la), out) in self
            .received
            .chunks_exact(m)
            .zip(extrinsic.chunks_exact(m))
            .zip(ch.chunks_exact_mut(m))
        {
            self.channel.refresh_into(y, la, &mut self.scratch, out);
        }
    }
}
