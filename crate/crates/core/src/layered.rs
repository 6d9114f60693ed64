//! Layered successive decoding over bit layers.
//!
//! Layer `i` (1-based) sees a binary symmetric erasure channel: bits of
//! symbols already found in error at an earlier layer are erased, and the
//! remaining positions are in error with probability `eps_i`. Summing the
//! layer capacities recovers the q-SC capacity exactly.

use crate::channel::{bsec_unchecked, ChannelParams};
use crate::error::{Error, Result};

/// Per-layer crossover and erasure probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerProfile {
    pub m: u32,
    pub epsilon: f64,
    /// `eps_i[i - 1] = 2^(m-i) / (2^m - 1) * eps`.
    pub eps_i: Vec<f64>,
    /// `delta_i[i - 1] = sum_{j < i} eps_j`.
    pub delta_i: Vec<f64>,
    /// `bit_order[k]` is the symbol bit decoded at layer `k + 1`.
    pub bit_order: Vec<usize>,
}

impl LayerProfile {
    /// Total erasure probability after the last layer; equals `epsilon`.
    pub fn final_delta(&self) -> f64 {
        let last = self.eps_i.len() - 1;
        self.delta_i[last] + self.eps_i[last]
    }

    /// BSEC capacity of layer `layer` (1-based).
    pub fn layer_capacity(&self, layer: usize) -> f64 {
        bsec_unchecked(self.delta_i[layer - 1], self.eps_i[layer - 1])
    }
}

/// Layer parameters with the identity bit order.
pub fn layer_params(p: &ChannelParams) -> LayerProfile {
    let order: Vec<usize> = (0..p.m() as usize).collect();
    layer_params_ordered(p, &order).expect("identity order is a permutation")
}

/// Layer parameters for an arbitrary decoding order of the symbol bits.
/// The layer statistics depend only on the layer position, so `order` only
/// relabels which physical bit each layer carries.
pub fn layer_params_ordered(p: &ChannelParams, order: &[usize]) -> Result<LayerProfile> {
    let m = p.m() as usize;
    let mut seen = vec![false; m];
    if order.len() != m
        || !order
            .iter()
            .all(|&b| b < m && !std::mem::replace(&mut seen[b], true))
    {
        return Err(Error::param(
            "order",
            format!("must be a permutation of 0..{m}"),
        ));
    }
    let q = p.q_f64();
    let eps = p.epsilon();
    let eps_i = (1..=m)
        .map(|i| ((m - i) as f64).exp2() / (q - 1.0) * eps)
        .collect();
    let delta_i = (1..=m)
        .map(|i| (q - ((m - i + 1) as f64).exp2()) / (q - 1.0) * eps)
        .collect();
    Ok(LayerProfile {
        m: p.m(),
        epsilon: eps,
        eps_i,
        delta_i,
        bit_order: order.to_vec(),
    })
}

/// Sum of the layer BSEC capacities.
pub fn layered_rate_sum(p: &ChannelParams) -> f64 {
    let prof = layer_params(p);
    (1..=p.m() as usize).map(|i| prof.layer_capacity(i)).sum()
}

/// `mu` ordinary layers followed by one layer carrying the remaining
/// `m - mu` bits over BSEC(delta_{mu+1}, eps_{mu+1}).
pub fn thick_layer_rate(p: &ChannelParams, mu: u32) -> Result<f64> {
    if mu >= p.m() {
        return Err(Error::param(
            "mu",
            format!("must be < m = {}, got {mu}", p.m()),
        ));
    }
    let prof = layer_params(p);
    let mu = mu as usize;
    let thin: f64 = (1..=mu).map(|i| prof.layer_capacity(i)).sum();
    Ok(thin + (p.m() as usize - mu) as f64 * prof.layer_capacity(mu + 1))
}
