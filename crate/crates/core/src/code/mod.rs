//! Sparse binary parity-check codes and the sum-product decoder core.

mod alist;
mod decoder;
mod gf2;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use alist::{load_alist, save_alist};
pub use decoder::{
    boxplus, check_node_update, check_node_update_tanh, decode, ChannelLlrProvider, DecodeOutput,
    Decoder, DecoderConfig, FixedLlrs, LlrState, LLR_CLIP,
};
pub use gf2::Encoder;

/// A binary LDPC code given by its sparse parity-check matrix `H`.
///
/// Bits are grouped into symbols of `symbol_width` consecutive columns.
/// Edges are stored check-major; `edge_bit[e]` is the column of edge `e`.
#[derive(Debug)]
pub struct ParityCheckCode {
    n_bits: usize,
    check_ptr: Vec<usize>,
    edge_bit: Vec<usize>,
    bit_ptr: Vec<usize>,
    bit_edges: Vec<usize>,
    symbol_width: usize,
    encoder: OnceLock<Encoder>,
}

impl Clone for ParityCheckCode {
    fn clone(&self) -> Self {
        ParityCheckCode {
            n_bits: self.n_bits,
            check_ptr: self.check_ptr.clone(),
            edge_bit: self.edge_bit.clone(),
            bit_ptr: self.bit_ptr.clone(),
            bit_edges: self.bit_edges.clone(),
            symbol_width: self.symbol_width,
            encoder: OnceLock::new(),
        }
    }
}

impl PartialEq for ParityCheckCode {
    fn eq(&self, other: &Self) -> bool {
        self.n_bits == other.n_bits
            && self.symbol_width == other.symbol_width
            && self.check_ptr == other.check_ptr
            && self.edge_bit == other.edge_bit
    }
}

impl ParityCheckCode {
    /// Builds a code from its check rows. Rows are sorted; duplicate edges,
    /// out-of-range columns and uncovered bits are rejected.
    pub fn from_checks(n_bits: usize, checks: Vec<Vec<usize>>) -> Result<Self> {
        let mut check_ptr = Vec::with_capacity(checks.len() + 1);
        let mut edge_bit = Vec::with_capacity(checks.iter().map(Vec::len).sum());
        check_ptr.push(0);
        let mut bit_deg = vec![0usize; n_bits];
        for (c, mut row) in checks.into_iter().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::param(
                    "checks",
                    format!("check {c} has a duplicate edge"),
                ));
            }
            if let Some(&b) = row.iter().find(|&&b| b >= n_bits) {
                return Err(Error::param(
                    "checks",
                    format!("check {c} references bit {b} >= {n_bits}"),
                ));
            }
            for &b in &row {
                bit_deg[b] += 1;
            }
            edge_bit.extend(row);
            check_ptr.push(edge_bit.len());
        }
        if let Some(b) = bit_deg.iter().position(|&d| d == 0) {
            return Err(Error::param(
                "checks",
                format!("bit {b} is not covered by any check"),
            ));
        }
        let mut bit_ptr = vec![0usize; n_bits + 1];
        for b in 0..n_bits {
            bit_ptr[b + 1] = bit_ptr[b] + bit_deg[b];
        }
        let mut fill = bit_ptr.clone();
        let mut bit_edges = vec![0usize; edge_bit.len()];
        for (e, &b) in edge_bit.iter().enumerate() {
            bit_edges[fill[b]] = e;
            fill[b] += 1;
        }
        Ok(ParityCheckCode {
            n_bits,
            check_ptr,
            edge_bit,
            bit_ptr,
            bit_edges,
            symbol_width: 1,
            encoder: OnceLock::new(),
        })
    }

    /// Builds a code from a dense 0/1 matrix, row-major.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let checks = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0)
                    .map(|(b, _)| b)
                    .collect()
            })
            .collect();
        Self::from_checks(n, checks)
    }

    /// Groups bits into symbols of `m` consecutive columns.
    pub fn with_symbol_width(mut self, m: usize) -> Result<Self> {
        if m == 0 || self.n_bits % m != 0 {
            return Err(Error::param(
                "symbol_width",
                format!("{} bits cannot be split into symbols of {m}", self.n_bits),
            ));
        }
        self.symbol_width = m;
        Ok(self)
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn n_checks(&self) -> usize {
        self.check_ptr.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.edge_bit.len()
    }

    pub fn symbol_width(&self) -> usize {
        self.symbol_width
    }

    pub fn n_symbols(&self) -> usize {
        self.n_bits / self.symbol_width
    }

    pub fn symbol_of(&self, bit: usize) -> usize {
        bit / self.symbol_width
    }

    /// Sorted bit indices of check `c`.
    pub fn check(&self, c: usize) -> &[usize] {
        &self.edge_bit[self.check_ptr[c]..self.check_ptr[c + 1]]
    }

    pub fn check_degree(&self, c: usize) -> usize {
        self.check_ptr[c + 1] - self.check_ptr[c]
    }

    pub fn bit_degree(&self, b: usize) -> usize {
        self.bit_ptr[b + 1] - self.bit_ptr[b]
    }

    /// Edge indices incident to bit `b`.
    pub(crate) fn bit_edges(&self, b: usize) -> &[usize] {
        &self.bit_edges[self.bit_ptr[b]..self.bit_ptr[b + 1]]
    }

    pub(crate) fn check_range(&self, c: usize) -> std::ops::Range<usize> {
        self.check_ptr[c]..self.check_ptr[c + 1]
    }

    #[cfg(test)]
    pub(crate) fn edge_bit(&self, e: usize) -> usize {
        self.edge_bit[e]
    }

    /// Checks incident to bit `b`, ascending.
    pub fn bit_checks(&self, b: usize) -> Vec<usize> {
        self.bit_edges(b)
            .iter()
            .map(|&e| self.check_ptr.partition_point(|&p| p <= e) - 1)
            .collect()
    }

    /// Column-major neighbor lists (checks per bit).
    pub fn columns(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.n_bits];
        for c in 0..self.n_checks() {
            for &b in self.check(c) {
                cols[b].push(c);
            }
        }
        cols
    }

    /// `H x` over GF(2).
    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        assert_eq!(bits.len(), self.n_bits);
        (0..self.n_checks())
            .map(|c| {
                self.check(c)
                    .iter()
                    .fold(0u8, |acc, &b| acc ^ (bits[b] & 1))
            })
            .collect()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        assert_eq!(bits.len(), self.n_bits);
        (0..self.n_checks()).all(|c| self.check(c).iter().fold(0u8, |acc, &b| acc ^ bits[b]) == 0)
    }

    /// Systematic encoder, built on first use by Gaussian elimination.
    pub fn encoder(&self) -> &Encoder {
        self.encoder.get_or_init(|| Encoder::new(self))
    }

    /// Number of information bits `K = N - rank(H)`.
    pub fn dimension(&self) -> usize {
        self.encoder().dimension()
    }

    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        self.encoder().encode(info)
    }

    pub fn rate(&self) -> f64 {
        self.dimension() as f64 / self.n_bits as f64
    }

    /// Node-perspective check degree histogram.
    pub fn check_degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for c in 0..self.n_checks() {
            *h.entry(self.check_degree(c)).or_insert(0) += 1;
        }
        h
    }

    pub fn bit_degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for b in 0..self.n_bits {
            *h.entry(self.bit_degree(b)).or_insert(0) += 1;
        }
        h
    }

    /// Edge-perspective degree distribution realised by this matrix.
    pub fn degree_distribution(&self) -> DegreeDistribution {
        let e = self.n_edges() as f64;
        let edge_frac = |h: BTreeMap<usize, usize>| {
            h.into_iter()
                .map(|(d, n)| (d, (d * n) as f64 / e))
                .collect()
        };
        DegreeDistribution {
            lambda: edge_frac(self.bit_degree_histogram()),
            rho: edge_frac(self.check_degree_histogram()),
        }
    }
}

/// Edge-perspective degree distributions `lambda(x)`, `rho(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    pub lambda: BTreeMap<usize, f64>,
    pub rho: BTreeMap<usize, f64>,
}

impl DegreeDistribution {
    pub fn new(lambda: BTreeMap<usize, f64>, rho: BTreeMap<usize, f64>) -> Result<Self> {
        for (name, side) in [("lambda", &lambda), ("rho", &rho)] {
            if side.is_empty() {
                return Err(Error::param(name, "empty distribution"));
            }
            if side.keys().any(|&d| d == 0) || side.values().any(|&f| !(f >= 0.0) || !f.is_finite())
            {
                return Err(Error::param(
                    name,
                    "degrees must be >= 1 and fractions nonnegative",
                ));
            }
            let s: f64 = side.values().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::param(name, format!("fractions sum to {s}, not 1")));
            }
        }
        let dist = DegreeDistribution { lambda, rho };
        let r = dist.design_rate();
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::param(
                "rho",
                format!("design rate {r} outside (0, 1)"),
            ));
        }
        Ok(dist)
    }

    /// Variable-regular distribution with degree `d_v`.
    pub fn variable_regular(d_v: usize, rho: BTreeMap<usize, f64>) -> Result<Self> {
        Self::new(BTreeMap::from([(d_v, 1.0)]), rho)
    }

    pub fn regular(d_v: usize, d_c: usize) -> Result<Self> {
        Self::variable_regular(d_v, BTreeMap::from([(d_c, 1.0)]))
    }

    /// `sum_d f_d / d`, i.e. the integral of the polynomial over [0, 1].
    fn integral(side: &BTreeMap<usize, f64>) -> f64 {
        side.iter().map(|(&d, &f)| f / d as f64).sum()
    }

    /// `R = 1 - int(rho) / int(lambda)`.
    pub fn design_rate(&self) -> f64 {
        1.0 - Self::integral(&self.rho) / Self::integral(&self.lambda)
    }

    /// Fraction of checks with each degree (node perspective).
    pub fn check_node_fractions(&self) -> BTreeMap<usize, f64> {
        let total = Self::integral(&self.rho);
        self.rho
            .iter()
            .map(|(&d, &f)| (d, f / d as f64 / total))
            .collect()
    }
}
