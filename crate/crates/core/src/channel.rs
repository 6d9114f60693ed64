//! The q-ary symmetric channel (q-SC), its conditionally independent
//! generalization (q-SC*), and their closed-form capacities.
//!
//! Symbols are `m`-bit vectors; bit `i` of a symbol contributes `2^i` to the
//! integer value used for sampling and error-pattern enumeration.
//! Capacities are in bits (log2).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported symbol width. Keeps `q = 2^m` representable as `u64`.
pub const MAX_SYMBOL_BITS: u32 = 62;

/// Widest q-SC* channel that gets an exact cumulative pattern table.
const PATTERN_TABLE_MAX_BITS: u32 = 20;

/// `x * log2(x)` with the continuous extension `0 * log2(0) = 0`.
pub(crate) fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Unchecked binary entropy; callers guarantee `x` in `[0, 1]`.
pub(crate) fn h2(x: f64) -> f64 {
    -xlog2x(x) - xlog2x(1.0 - x)
}

/// Binary entropy function `h(x)` in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("binary entropy undefined at {x}")));
    }
    Ok(h2(x))
}

/// Parameters of a q-SC with `q = 2^m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    m: u32,
    epsilon: f64,
}

impl ChannelParams {
    pub fn new(m: u32, epsilon: f64) -> Result<Self> {
        if m == 0 || m > MAX_SYMBOL_BITS {
            return Err(Error::param(
                "m",
                format!("must be in 1..={MAX_SYMBOL_BITS}, got {m}"),
            ));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::param(
                "epsilon",
                format!("must be in [0, 1], got {epsilon}"),
            ));
        }
        Ok(ChannelParams { m, epsilon })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn q(&self) -> u64 {
        1u64 << self.m
    }

    pub fn q_f64(&self) -> f64 {
        (self.m as f64).exp2()
    }

    /// Probability of the error pattern `e = x XOR y`.
    pub fn pattern_prob(&self, e: u64) -> f64 {
        if e == 0 {
            1.0 - self.epsilon
        } else {
            self.epsilon / (self.q_f64() - 1.0)
        }
    }

    /// Transition probability `P(y | x)`.
    pub fn transition_prob(&self, x: u64, y: u64) -> f64 {
        self.pattern_prob(x ^ y)
    }

    /// Symbol error probability at which the capacity vanishes, `1 - 1/q`.
    pub fn capacity_zero_eps(&self) -> f64 {
        1.0 - 1.0 / self.q_f64()
    }
}

/// `C = m - h(eps) - eps * log2(2^m - 1)`.
pub fn capacity_qsc(p: &ChannelParams) -> f64 {
    let m = p.m as f64;
    let alternatives = p.q_f64() - 1.0;
    m - h2(p.epsilon) - p.epsilon * alternatives.log2()
}

/// Crossover probability of each marginal binary sub-channel.
pub fn marginal_bsc_eps(p: &ChannelParams) -> f64 {
    let q = p.q_f64();
    q * p.epsilon / (2.0 * (q - 1.0))
}

pub fn capacity_bsc(eps_bsc: f64) -> f64 {
    1.0 - h2(eps_bsc.clamp(0.0, 1.0))
}

pub(crate) fn bsec_unchecked(delta: f64, eps: f64) -> f64 {
    let kept = 1.0 - delta;
    if kept <= 0.0 {
        return 0.0;
    }
    kept * (1.0 - h2((eps / kept).clamp(0.0, 1.0)))
}

/// Capacity of the binary symmetric erasure channel with erasure probability
/// `delta` and crossover probability `eps`.
pub fn capacity_bsec(delta: f64, eps: f64) -> Result<f64> {
    if delta < 0.0 || eps < 0.0 || delta + eps > 1.0 + 1e-15 {
        return Err(Error::Domain(format!(
            "BSEC needs delta, eps >= 0 and delta + eps <= 1 (got {delta}, {eps})"
        )));
    }
    Ok(bsec_unchecked(delta, eps))
}

/// `1 - m * C_BSC / C_qSC`; `None` where the q-SC capacity is zero.
pub fn relative_capacity_loss(p: &ChannelParams) -> Option<f64> {
    let c = capacity_qsc(p);
    if c <= 1e-15 {
        return None;
    }
    let c_bsc = capacity_bsc(marginal_bsc_eps(p));
    Some(1.0 - p.m as f64 * c_bsc / c)
}

/// A block of `n` symbols, each `width` bits, stored bit-flat: bit `i` of
/// symbol `j` sits at index `j * width + i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolBlock {
    width: u32,
    bits: Vec<u8>,
}

impl SymbolBlock {
    pub fn from_bits(width: u32, bits: Vec<u8>) -> Result<Self> {
        if width == 0 || width > MAX_SYMBOL_BITS {
            return Err(Error::param(
                "width",
                format!("unsupported symbol width {width}"),
            ));
        }
        if bits.len() % width as usize != 0 {
            return Err(Error::param(
                "bits",
                format!("length {} is not a multiple of width {width}", bits.len()),
            ));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::param("bits", format!("non-binary entry {b}")));
        }
        Ok(SymbolBlock { width, bits })
    }

    pub fn zeros(n_symbols: usize, width: u32) -> Self {
        SymbolBlock {
            width,
            bits: vec![0; n_symbols * width as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn n_symbols(&self) -> usize {
        self.bits.len() / self.width as usize
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    pub fn symbol(&self, j: usize) -> &[u8] {
        let w = self.width as usize;
        &self.bits[j * w..(j + 1) * w]
    }

    pub fn symbol_value(&self, j: usize) -> u64 {
        bits_to_value(self.symbol(j))
    }

    pub fn set_symbol_value(&mut self, j: usize, value: u64) {
        let w = self.width as usize;
        value_to_bits(value, &mut self.bits[j * w..(j + 1) * w]);
    }
}

pub(crate) fn bits_to_value(bits: &[u8]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | ((b as u64 & 1) << i))
}

pub(crate) fn value_to_bits(value: u64, out: &mut [u8]) {
    for (i, b) in out.iter_mut().enumerate() {
        *b = ((value >> i) & 1) as u8;
    }
}

/// Passes `x` through the q-SC. Each symbol survives with probability
/// `1 - eps`; otherwise it is replaced by one of the other `q - 1` values,
/// uniformly.
pub fn transmit<R: Rng + ?Sized>(x: &SymbolBlock, p: &ChannelParams, rng: &mut R) -> SymbolBlock {
    assert_eq!(x.width, p.m, "symbol width must match the channel");
    let mut y = x.clone();
    let q = p.q();
    for j in 0..x.n_symbols() {
        if rng.random::<f64>() < p.epsilon {
            let xv = x.symbol_value(j);
            // uniform over [0, q-1), shifted past x
            let r = rng.random_range(0..q - 1);
            let yv = if r >= xv { r + 1 } else { r };
            y.set_symbol_value(j, yv);
        }
    }
    y
}

/// Parameters of the q-SC*: symbol error probability `epsilon` and the
/// conditional bit error probabilities given a symbol error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QscStarParams {
    m: u32,
    epsilon: f64,
    eps_cond: Vec<f64>,
    alpha: f64,
}

impl QscStarParams {
    pub fn new(epsilon: f64, eps_cond: Vec<f64>) -> Result<Self> {
        let m = eps_cond.len() as u32;
        if m == 0 || m > MAX_SYMBOL_BITS {
            return Err(Error::param(
                "eps_cond",
                format!("need 1..={MAX_SYMBOL_BITS} entries"),
            ));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::param(
                "epsilon",
                format!("must be in [0, 1], got {epsilon}"),
            ));
        }
        if let Some(e) = eps_cond.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::param(
                "eps_cond",
                format!("entries must lie in (0, 1), got {e}"),
            ));
        }
        let all_clean: f64 = eps_cond.iter().map(|e| 1.0 - e).product();
        if all_clean >= 1.0 {
            return Err(Error::param(
                "eps_cond",
                "product of (1 - eps_cond) must be < 1",
            ));
        }
        let alpha = epsilon / (1.0 - all_clean);
        Ok(QscStarParams {
            m,
            epsilon,
            eps_cond,
            alpha,
        })
    }

    /// The q-SC* equivalent of an ordinary q-SC (all conditionals 1/2).
    pub fn from_qsc(p: &ChannelParams) -> Result<Self> {
        Self::new(p.epsilon, vec![0.5; p.m as usize])
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eps_cond(&self) -> &[f64] {
        &self.eps_cond
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Marginal bit error probabilities `alpha * eps_cond[i]`.
    pub fn marginal_eps(&self) -> Vec<f64> {
        self.eps_cond.iter().map(|e| self.alpha * e).collect()
    }

    /// Product over bits of `eps^e_i (1 - eps)^(1 - e_i)`.
    fn independent_prob(&self, e: u64) -> f64 {
        self.eps_cond
            .iter()
            .enumerate()
            .map(|(i, &c)| if (e >> i) & 1 == 1 { c } else { 1.0 - c })
            .product()
    }

    pub fn pattern_prob(&self, e: u64) -> f64 {
        if e == 0 {
            1.0 - self.epsilon
        } else {
            self.alpha * self.independent_prob(e)
        }
    }

    pub fn transition_prob(&self, x: u64, y: u64) -> f64 {
        self.pattern_prob(x ^ y)
    }
}

/// `m - alpha sum h(eps_i|*) + (1-eps) log2(1-eps) + alpha log2 alpha - (alpha-eps) log2(alpha-eps)`.
pub fn capacity_qsc_star(p: &QscStarParams) -> f64 {
    let sum_h: f64 = p.eps_cond.iter().map(|&e| h2(e)).sum();
    let gap = (p.alpha - p.epsilon).max(0.0);
    p.m as f64 - p.alpha * sum_h + xlog2x(1.0 - p.epsilon) + xlog2x(p.alpha) - xlog2x(gap)
}

/// Sampler for the q-SC*, holding the conditional error-pattern
/// distribution for the given parameters.
#[derive(Debug, Clone)]
pub struct QscStarChannel {
    params: QscStarParams,
    // cumulative distribution over nonzero patterns 1..q-1 (small m only)
    cdf: Option<Vec<f64>>,
}

impl QscStarChannel {
    pub fn new(params: QscStarParams) -> Self {
        let cdf = (params.m <= PATTERN_TABLE_MAX_BITS).then(|| {
            let q = 1u64 << params.m;
            let mut acc = 0.0;
            let mut cdf: Vec<f64> = (1..q)
                .map(|e| {
                    acc += params.independent_prob(e);
                    acc
                })
                .collect();
            let total = acc;
            for c in cdf.iter_mut() {
                *c /= total;
            }
            cdf
        });
        QscStarChannel { params, cdf }
    }

    pub fn params(&self) -> &QscStarParams {
        &self.params
    }

    fn sample_pattern<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.cdf {
            Some(cdf) => {
                let u: f64 = rng.random();
                let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                k as u64 + 1
            }
            None => loop {
                let e = self
                    .params
                    .eps_cond
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (i, &c)| {
                        acc | ((rng.random::<f64>() < c) as u64) << i
                    });
                if e != 0 {
                    break e;
                }
            },
        }
    }

    pub fn transmit<R: Rng + ?Sized>(&self, x: &SymbolBlock, rng: &mut R) -> SymbolBlock {
        assert_eq!(
            x.width, self.params.m,
            "symbol width must match the channel"
        );
        let mut y = x.clone();
        for j in 0..x.n_symbols() {
            if rng.random::<f64>() < self.params.epsilon {
                let e = self.sample_pattern(rng);
                y.set_symbol_value(j, x.symbol_value(j) ^ e);
            }
        }
        y
    }
}

/// One-shot q-SC* transmission; builds the pattern table on every call, so
/// prefer [`QscStarChannel`] for repeated use.
pub fn transmit_qsc_star<R: Rng + ?Sized>(
    x: &SymbolBlock,
    p: &QscStarParams,
    rng: &mut R,
) -> SymbolBlock {
    QscStarChannel::new(p.clone()).transmit(x, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!(close(
            binary_entropy(0.2).unwrap(),
            0.721928094887362,
            1e-13
        ));
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn qsc_capacity_values() {
        let c = |m, e| capacity_qsc(&ChannelParams::new(m, e).unwrap());
        assert!(close(c(1, 0.1), 0.531004406410719, 1e-13));
        assert!(close(c(4, 0.25), 2.211999226638738, 1e-12));
        assert!(close(c(2, 0.2), 0.961079404968406, 1e-12));
        assert!(close(c(3, 0.0), 3.0, 1e-15));
        assert!(close(c(3, 1.0 - 1.0 / 8.0), 0.0, 1e-12));
    }

    #[test]
    fn marginal_bsc_values() {
        let eb = |m, e| marginal_bsc_eps(&ChannelParams::new(m, e).unwrap());
        assert_eq!(eb(1, 0.3), 0.3);
        assert!(close(eb(4, 0.25), 2.0 / 15.0, 1e-15));
        assert!(close(eb(40, 0.3), 0.15, 1e-10));
        assert_eq!(capacity_bsc(0.5), 0.0);
        assert_eq!(capacity_bsc(0.0), 1.0);
        assert!(close(capacity_bsc(2.0 / 15.0), 0.433490493447095, 1e-12));
    }

    #[test]
    fn bsec_values() {
        assert!(close(
            capacity_bsec(0.0, 0.1).unwrap(),
            1.0 - h2(0.1),
            1e-15
        ));
        assert!(close(capacity_bsec(0.5, 0.0).unwrap(), 0.5, 1e-15));
        assert!(close(
            capacity_bsec(0.2, 0.1).unwrap(),
            0.365148445440323,
            1e-12
        ));
        assert_eq!(capacity_bsec(1.0, 0.0).unwrap(), 0.0);
        assert!(capacity_bsec(0.7, 0.4).is_err());
    }

    #[test]
    fn relative_loss() {
        let p = ChannelParams::new(1, 0.2).unwrap();
        assert!(relative_capacity_loss(&p).unwrap().abs() < 1e-14);
        let p = ChannelParams::new(4, 0.25).unwrap();
        assert!(close(
            relative_capacity_loss(&p).unwrap(),
            0.216110949359040,
            1e-12
        ));
        let p = ChannelParams::new(2, 0.75).unwrap();
        assert!(relative_capacity_loss(&p).is_none());
    }

    #[test]
    fn large_m_normalized_loss_approaches_asymptote() {
        let eps = 0.1;
        let asym = h2(eps / 2.0) - eps;
        assert_eq!((asym * 100.0).round() / 100.0, 0.19);
        let mut prev = f64::NEG_INFINITY;
        for m in [4, 8, 12, 16, 20] {
            let p = ChannelParams::new(m, eps).unwrap();
            let delta = capacity_qsc(&p) / m as f64 - capacity_bsc(marginal_bsc_eps(&p));
            assert!(delta > prev);
            prev = delta;
            if m == 20 {
                assert!(close(delta + h2(eps) / m as f64, asym, 1e-3));
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(ChannelParams::new(0, 0.1).is_err());
        assert!(ChannelParams::new(3, 1.2).is_err());
        assert_eq!(ChannelParams::new(5, 0.1).unwrap().q(), 32);
        assert!(QscStarParams::new(0.1, vec![]).is_err());
        assert!(QscStarParams::new(0.1, vec![0.0, 0.5]).is_err());
        // alpha > 1 is a valid channel: the error-free pattern is merely rarer
        assert!(QscStarParams::new(0.9, vec![0.05, 0.05]).unwrap().alpha() > 1.0);
    }

    #[test]
    fn transition_rows_sum_to_one() {
        for m in 1..=10u32 {
            for &eps in &[0.0, 0.01, 0.25, 0.5, 0.9] {
                let p = ChannelParams::new(m, eps).unwrap();
                let s: f64 = (0..p.q()).map(|y| p.transition_prob(3 % p.q(), y)).sum();
                assert!(close(s, 1.0, 1e-12), "q-SC m={m} eps={eps} sum={s}");
                let conds: Vec<f64> = (0..m).map(|i| 0.1 + 0.07 * i as f64 % 0.8).collect();
                if let Ok(ps) = QscStarParams::new(eps, conds) {
                    let s: f64 = (0..1u64 << ps.m()).map(|y| ps.transition_prob(1, y)).sum();
                    assert!(close(s, 1.0, 1e-12), "q-SC* m={m} eps={eps} sum={s}");
                }
            }
        }
    }

    #[test]
    fn normalized_capacity_decreases_in_eps() {
        for m in 1..=10u32 {
            let zero = 1.0 - (-(m as f64)).exp2();
            let mut prev = f64::INFINITY;
            for k in 0..=200 {
                let eps = zero * k as f64 / 200.0;
                let c = capacity_qsc(&ChannelParams::new(m, eps).unwrap()) / m as f64;
                assert!(c <= prev + 1e-15, "m={m} eps={eps}");
                prev = c;
            }
        }
    }

    #[test]
    fn star_capacity_reductions() {
        for m in 1..=10u32 {
            for &eps in &[0.001, 0.05, 0.1, 0.25, 0.4, 0.6] {
                let p = ChannelParams::new(m, eps).unwrap();
                let s = QscStarParams::from_qsc(&p).unwrap();
                assert!(
                    close(capacity_qsc_star(&s), capacity_qsc(&p), 1e-12),
                    "m={m} eps={eps}"
                );
            }
        }
        // alpha = 1: independent BSCs
        let eps = 1.0 - 0.9f64 * 0.9;
        let s = QscStarParams::new(eps, vec![0.1, 0.1]).unwrap();
        assert!(close(s.alpha(), 1.0, 1e-15));
        assert!(close(capacity_qsc_star(&s), 1.062008812821438, 1e-12));
        // single sub-channel: BSC at the marginal crossover
        let s = QscStarParams::new(0.2, vec![0.7]).unwrap();
        assert!(close(s.marginal_eps()[0], 0.2, 1e-15));
        assert!(close(capacity_qsc_star(&s), capacity_bsc(0.2), 1e-12));
    }

    #[test]
    fn transmit_corner_cases() {
        let mut rng = substream(1, 0);
        let x = SymbolBlock::from_bits(3, vec![1, 0, 1, 0, 0, 0, 1, 1, 1]).unwrap();
        let p = ChannelParams::new(3, 0.0).unwrap();
        assert_eq!(transmit(&x, &p, &mut rng), x);

        let x = SymbolBlock::from_bits(1, vec![0, 1, 1, 0]).unwrap();
        let p = ChannelParams::new(1, 1.0).unwrap();
        assert_eq!(transmit(&x, &p, &mut rng).bits(), &[1, 0, 0, 1]);
    }

    #[test]
    fn transmit_is_deterministic_and_never_returns_input_on_error() {
        let x = SymbolBlock::zeros(2000, 4);
        let p = ChannelParams::new(4, 1.0).unwrap();
        let y1 = transmit(&x, &p, &mut substream(9, 1));
        let y2 = transmit(&x, &p, &mut substream(9, 1));
        assert_eq!(y1, y2);
        assert!((0..y1.n_symbols()).all(|j| y1.symbol_value(j) != 0));
        // all 15 alternatives are reachable
        let mut seen = [false; 16];
        for j in 0..y1.n_symbols() {
            seen[y1.symbol_value(j) as usize] = true;
        }
        assert!(seen[1..].iter().all(|&s| s));
    }

    #[test]
    fn star_sampler_wide_symbols_use_rejection() {
        let s = QscStarParams::new(0.5, vec![0.3; 24]).unwrap();
        let ch = QscStarChannel::new(s);
        assert!(ch.cdf.is_none());
        let x = SymbolBlock::zeros(500, 24);
        let y = ch.transmit(&x, &mut substream(3, 0));
        let errors = (0..500).filter(|&j| y.symbol_value(j) != 0).count();
        assert!(errors > 180 && errors < 320);
    }
}
