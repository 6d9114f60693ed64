//! Progressive edge-growth construction with symbol separation.
//!
//! Bits of one symbol never share a parity check, so the intra-symbol
//! correlation handled by the front-end does not create short loops.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::code::ParityCheckCode;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Target code for [`peg_construct`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionSpec {
    pub n_bits: usize,
    pub symbol_width: usize,
    pub d_v: usize,
    /// Edge-perspective check degree fractions.
    pub rho: BTreeMap<usize, f64>,
    pub seed: u64,
}

impl ConstructionSpec {
    pub fn validate(&self) -> Result<()> {
        let m = self.symbol_width;
        if m == 0 || self.n_bits == 0 || self.n_bits % m != 0 {
            return Err(Error::param(
                "n_bits",
                format!("{} bits cannot be split into symbols of {m}", self.n_bits),
            ));
        }
        if self.d_v == 0 {
            return Err(Error::param("d_v", "must be at least 1"));
        }
        let support: Vec<(usize, f64)> = self.support();
        if support.is_empty() {
            return Err(Error::param("rho", "empty distribution"));
        }
        if self.rho.values().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::param(
                "rho",
                "fractions must be finite and nonnegative",
            ));
        }
        let s: f64 = self.rho.values().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::param("rho", format!("fractions sum to {s}, not 1")));
        }
        let n_symbols = self.n_bits / m;
        if let Some(&(d, _)) = support.iter().find(|&&(d, _)| d == 0 || d > n_symbols) {
            return Err(Error::param(
                "rho",
                format!("check degree {d} impossible with {n_symbols} symbols"),
            ));
        }
        Ok(())
    }

    fn support(&self) -> Vec<(usize, f64)> {
        self.rho
            .iter()
            .filter(|(_, &f)| f > 0.0)
            .map(|(&d, &f)| (d, f))
            .collect()
    }

    /// Integer check counts per degree by largest remainder over the
    /// node-perspective fractions.
    pub fn target_check_counts(&self) -> Result<BTreeMap<usize, usize>> {
        self.validate()?;
        let support = self.support();
        let edges = (self.n_bits * self.d_v) as f64;
        let ideal: Vec<f64> = support.iter().map(|&(d, f)| edges * f / d as f64).collect();
        let total = ideal.iter().sum::<f64>().round() as usize;
        let mut counts: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = ideal[a] - ideal[a].floor();
            let fb = ideal[b] - ideal[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        let assigned: usize = counts.iter().sum();
        for &k in order.iter().cycle().take(total.saturating_sub(assigned)) {
            counts[k] += 1;
        }
        Ok(support
            .iter()
            .zip(counts)
            .filter(|(_, c)| *c > 0)
            .map(|(&(d, _), c)| (d, c))
            .collect())
    }

    /// Per-check target degrees: the rounded counts with the degree sum
    /// fixed up to `n_bits * d_v`, assigned to check indices in a seeded
    /// random order.
    pub fn check_degrees(&self) -> Result<Vec<usize>> {
        let mut counts = self.target_check_counts()?;
        let edges = (self.n_bits * self.d_v) as i64;
        let max_deg = self.n_bits / self.symbol_width;
        let mut delta = edges - counts.iter().map(|(&d, &c)| (d * c) as i64).sum::<i64>();
        while delta != 0 {
            // move one check to another degree, preferring a move inside the support
            let options: Vec<(usize, usize)> = counts
                .iter()
                .filter(|(_, &c)| c > 0)
                .filter_map(|(&d, _)| {
                    let to = (d as i64 + delta).clamp(1, max_deg as i64) as usize;
                    (to != d).then_some((d, to))
                })
                .collect();
            let pick = options
                .iter()
                .find(|(_, to)| counts.contains_key(to))
                .or_else(|| {
                    options
                        .iter()
                        .max_by_key(|(d, to)| (d.abs_diff(*to), std::cmp::Reverse(*d)))
                })
                .copied();
            let Some((from, to)) = pick else {
                return Err(Error::param(
                    "rho",
                    "cannot match the edge count with valid check degrees",
                ));
            };
            *counts.get_mut(&from).unwrap() -= 1;
            *counts.entry(to).or_insert(0) += 1;
            delta -= to as i64 - from as i64;
        }
        let mut degrees: Vec<usize> = counts
            .iter()
            .flat_map(|(&d, &c)| std::iter::repeat_n(d, c))
            .collect();
        if degrees.len() < self.d_v {
            return Err(Error::param(
                "d_v",
                format!("only {} checks available", degrees.len()),
            ));
        }
        degrees.shuffle(&mut substream(self.seed, 0));
        Ok(degrees)
    }
}

struct Builder {
    target: Vec<usize>,
    check_adj: Vec<Vec<u32>>,
    bit_adj: Vec<Vec<u32>>,
    check_mark: Vec<u32>,
    bit_mark: Vec<u32>,
    blocked: Vec<u32>,
    stamp: u32,
}

impl Builder {
    fn fuller(&self, a: usize, b: usize) -> bool {
        self.target[a] - self.check_adj[a].len() < self.target[b] - self.check_adj[b].len()
    }

    fn is_candidate(&self, c: usize) -> bool {
        self.check_adj[c].len() < self.target[c] && self.blocked[c] != self.stamp
    }

    fn least_filled(&self, pool: impl Iterator<Item = usize>) -> Option<usize> {
        pool.filter(|&c| self.is_candidate(c))
            .fold(None, |best, c| match best {
                Some(b) if !self.fuller(b, c) => Some(b),
                _ => Some(c),
            })
    }

    fn choose(&mut self, bit: usize, m: usize) -> Option<usize> {
        self.stamp += 1;
        let stamp = self.stamp;
        let sym = bit / m;
        for b in sym * m..=bit {
            for &c in &self.bit_adj[b] {
                self.blocked[c as usize] = stamp;
            }
        }
        let n_checks = self.target.len();
        if self.bit_adj[bit].is_empty() {
            return self.least_filled(0..n_checks);
        }
        let total = (0..n_checks).filter(|&c| self.is_candidate(c)).count();
        if total == 0 {
            return None;
        }
        let mut reached = 0;
        let mut frontier = vec![bit as u32];
        self.bit_mark[bit] = stamp;
        loop {
            let mut level = Vec::new();
            for &b in &frontier {
                for &c in &self.bit_adj[b as usize] {
                    if self.check_mark[c as usize] != stamp {
                        self.check_mark[c as usize] = stamp;
                        if self.is_candidate(c as usize) {
                            reached += 1;
                        }
                        level.push(c);
                    }
                }
            }
            if level.is_empty() {
                // tree stopped growing: any unreached candidate closes no cycle
                return self.least_filled((0..n_checks).filter(|&c| self.check_mark[c] != stamp));
            }
            if reached == total {
                // every candidate is reachable; take the deepest ones
                return self.least_filled(level.iter().map(|&c| c as usize));
            }
            frontier.clear();
            for &c in &level {
                for &b in &self.check_adj[c as usize] {
                    if self.bit_mark[b as usize] != stamp {
                        self.bit_mark[b as usize] = stamp;
                        frontier.push(b);
                    }
                }
            }
        }
    }
}

impl Builder {
    fn closes_four(&self, b: usize, c: usize) -> bool {
        self.bit_adj[b]
            .iter()
            .filter(|&&c2| c2 as usize != c)
            .any(|&c2| {
                self.check_adj[c2 as usize]
                    .iter()
                    .any(|&b2| b2 as usize != b && self.bit_adj[b2 as usize].contains(&(c as u32)))
            })
    }

    fn has_symbol_mate(&self, c: usize, b: usize, except: usize, m: usize) -> bool {
        self.check_adj[c]
            .iter()
            .any(|&x| x as usize != except && x as usize / m == b / m)
    }

    fn move_edge(&mut self, b: usize, from: usize, to: usize) {
        let e = self.bit_adj[b]
            .iter()
            .position(|&x| x as usize == from)
            .unwrap();
        self.bit_adj[b][e] = to as u32;
        let e = self.check_adj[from]
            .iter()
            .position(|&x| x as usize == b)
            .unwrap();
        self.check_adj[from].swap_remove(e);
        self.check_adj[to].push(b as u32);
    }

    /// Swaps the endpoint of edge (b, c) with another edge so that neither
    /// closes a 4-cycle; degrees and the symbol constraint are preserved.
    fn repair_four(&mut self, b: usize, c: usize, m: usize) -> bool {
        for c2 in 0..self.target.len() {
            if c2 == c
                || self.bit_adj[b].contains(&(c2 as u32))
                || self.has_symbol_mate(c2, b, usize::MAX, m)
            {
                continue;
            }
            for k in 0..self.check_adj[c2].len() {
                let b2 = self.check_adj[c2][k] as usize;
                if b2 / m == b / m
                    || self.bit_adj[b2].contains(&(c as u32))
                    || self.has_symbol_mate(c, b2, b, m)
                {
                    continue;
                }
                self.move_edge(b, c, c2);
                self.move_edge(b2, c2, c);
                if !self.closes_four(b, c2) && !self.closes_four(b2, c) {
                    return true;
                }
                self.move_edge(b2, c, c2);
                self.move_edge(b, c2, c);
            }
        }
        false
    }
}

/// Builds a variable-regular code by progressive edge growth.
///
/// Bits are placed in ascending order, `d_v` edges each. An edge goes to a
/// check with spare capacity that holds no bit of the same symbol; among
/// those, to one outside the bit's current computation tree if possible,
/// else to one at its deepest level. Ties go to the largest residual capacity,
/// then the lowest index. Placements forced into a 4-cycle by exhausted
/// capacity at the end are repaired by a degree-preserving edge swap when
/// one exists.
pub fn peg_construct(spec: &ConstructionSpec) -> Result<ParityCheckCode> {
    let target = spec.check_degrees()?;
    let n = spec.n_bits;
    let m = spec.symbol_width;
    let n_checks = target.len();
    let mut b = Builder {
        check_adj: target.iter().map(|&d| Vec::with_capacity(d)).collect(),
        bit_adj: vec![Vec::with_capacity(spec.d_v); n],
        check_mark: vec![0; n_checks],
        bit_mark: vec![0; n],
        blocked: vec![0; n_checks],
        stamp: 0,
        target,
    };
    for bit in 0..n {
        for _ in 0..spec.d_v {
            let Some(c) = b.choose(bit, m) else {
                return Err(Error::Construction {
                    bit,
                    reason: "no check with spare capacity satisfies the symbol constraint".into(),
                });
            };
            b.check_adj[c].push(bit as u32);
            b.bit_adj[bit].push(c as u32);
        }
    }
    for bit in 0..n {
        for k in 0..spec.d_v {
            let c = b.bit_adj[bit][k] as usize;
            if b.closes_four(bit, c) {
                b.repair_four(bit, c, m);
            }
        }
    }
    let checks = b
        .check_adj
        .into_iter()
        .map(|row| row.into_iter().map(|x| x as usize).collect())
        .collect();
    ParityCheckCode::from_checks(n, checks)?.with_symbol_width(m)
}

/// A check containing more than one bit of a symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub check: usize,
    pub symbol: usize,
    pub bits: usize,
}

/// Every (check, symbol) pair with at least two incident bits, using the
/// code's own symbol width.
pub fn validate_symbol_constraint(code: &ParityCheckCode) -> Vec<Violation> {
    let mut out = Vec::new();
    for c in 0..code.n_checks() {
        // rows are sorted, so bits of a symbol are adjacent
        let row = code.check(c);
        let mut k = 0;
        while k < row.len() {
            let symbol = code.symbol_of(row[k]);
            let run = row[k..]
                .iter()
                .take_while(|&&b| code.symbol_of(b) == symbol)
                .count();
            if run > 1 {
                out.push(Violation {
                    check: c,
                    symbol,
                    bits: run,
                });
            }
            k += run;
        }
    }
    out
}

/// Length of the shortest cycle of the Tanner graph, `None` if it has none.
pub fn girth(code: &ParityCheckCode) -> Option<usize> {
    let n = code.n_bits();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|b| code.bit_checks(b).into_iter().map(|c| n + c).collect())
        .chain((0..code.n_checks()).map(|c| code.check(c).to_vec()))
        .collect();
    let mut dist = vec![usize::MAX; adj.len()];
    let mut parent = vec![usize::MAX; adj.len()];
    let mut touched = Vec::new();
    let mut queue = VecDeque::new();
    let mut best = usize::MAX;
    // every cycle passes through a bit node
    for s in 0..n {
        for &v in &touched {
            dist[v] = usize::MAX;
        }
        touched.clear();
        queue.clear();
        dist[s] = 0;
        parent[s] = usize::MAX;
        touched.push(s);
        queue.push_back(s);
        'bfs: while let Some(u) = queue.pop_front() {
            if 2 * dist[u] + 1 >= best {
                break;
            }
            for &w in &adj[u] {
                if w == parent[u] {
                    continue;
                }
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    parent[w] = u;
                    touched.push(w);
                    queue.push_back(w);
                } else {
                    best = best.min(dist[u] + dist[w] + 1);
                    if 2 * dist[u] + 1 >= best {
                        break 'bfs;
                    }
                }
            }
        }
        if best == 4 {
            break;
        }
    }
    (best != usize::MAX).then_some(best)
}

/// Summary of a constructed code, emitted next to its alist file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub n_bits: usize,
    pub n_checks: usize,
    pub symbol_width: usize,
    pub rate: f64,
    pub bit_degrees: BTreeMap<usize, usize>,
    pub check_degrees: BTreeMap<usize, usize>,
    pub target_check_degrees: BTreeMap<usize, usize>,
    pub girth: Option<usize>,
    pub symbol_violations: usize,
}

impl ConstructionReport {
    pub fn new(spec: &ConstructionSpec, code: &ParityCheckCode) -> Result<Self> {
        Ok(ConstructionReport {
            n_bits: code.n_bits(),
            n_checks: code.n_checks(),
            symbol_width: code.symbol_width(),
            rate: code.rate(),
            bit_degrees: code.bit_degree_histogram(),
            check_degrees: code.check_degree_histogram(),
            target_check_degrees: spec.target_check_counts()?,
            girth: girth(code),
            symbol_violations: validate_symbol_constraint(code).len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn spec(n: usize, m: usize, d_v: usize, rho: &[(usize, f64)], seed: u64) -> ConstructionSpec {
        ConstructionSpec {
            n_bits: n,
            symbol_width: m,
            d_v,
            rho: rho.iter().copied().collect(),
            seed,
        }
    }

    /// Scans every check against every symbol.
    fn violations_by_scan(code: &ParityCheckCode) -> Vec<Violation> {
        let m = code.symbol_width();
        let mut out = Vec::new();
        for c in 0..code.n_checks() {
            for s in 0..code.n_symbols() {
                let bits = (s * m..(s + 1) * m)
                    .filter(|b| code.check(c).contains(b))
                    .count();
                if bits > 1 {
                    out.push(Violation {
                        check: c,
                        symbol: s,
                        bits,
                    });
                }
            }
        }
        out
    }

    /// Shortest cycle by removing each edge and measuring the distance
    /// between its endpoints.
    fn girth_by_edge_removal(code: &ParityCheckCode) -> Option<usize> {
        let n = code.n_bits();
        let total = n + code.n_checks();
        let mut adj = vec![Vec::new(); total];
        for c in 0..code.n_checks() {
            for &b in code.check(c) {
                adj[b].push(n + c);
                adj[n + c].push(b);
            }
        }
        let mut best = None::<usize>;
        for c in 0..code.n_checks() {
            for &b in code.check(c) {
                let mut dist = vec![usize::MAX; total];
                let mut q = VecDeque::from([b]);
                dist[b] = 0;
                while let Some(u) = q.pop_front() {
                    for &w in &adj[u] {
                        if (u == b && w == n + c) || dist[w] != usize::MAX {
                            continue;
                        }
                        dist[w] = dist[u] + 1;
                        q.push_back(w);
                    }
                }
                if dist[n + c] != usize::MAX {
                    let len = dist[n + c] + 1;
                    best = Some(best.map_or(len, |x| x.min(len)));
                }
            }
        }
        best
    }

    #[test]
    fn small_constrained_code() {
        let s = spec(8, 2, 2, &[(4, 1.0)], 3);
        let code = peg_construct(&s).unwrap();
        assert_eq!(code.n_checks(), 4);
        assert!(violations_by_scan(&code).is_empty());
        assert!(validate_symbol_constraint(&code).is_empty());
        assert!((0..8).all(|b| code.bit_degree(b) == 2));
        assert!((0..4).all(|c| code.check_degree(c) == 4));
    }

    #[test]
    fn symbol_width_one_is_plain_peg() {
        let code = peg_construct(&spec(504, 1, 3, &[(6, 1.0)], 1)).unwrap();
        assert!(validate_symbol_constraint(&code).is_empty());
        assert_eq!(code.check_degree_histogram(), BTreeMap::from([(6, 252)]));
        assert!(girth(&code).unwrap() >= 6);
    }

    #[test]
    fn planted_violations_found() {
        // m = 2: check 0 holds bits 0,1 (symbol 0); check 1 holds 2,3 and 4,5
        let code = ParityCheckCode::from_checks(
            6,
            vec![vec![0, 1, 2], vec![2, 3, 4, 5], vec![0, 3, 5], vec![1, 4]],
        )
        .unwrap()
        .with_symbol_width(2)
        .unwrap();
        let want = vec![
            Violation {
                check: 0,
                symbol: 0,
                bits: 2,
            },
            Violation {
                check: 1,
                symbol: 1,
                bits: 2,
            },
            Violation {
                check: 1,
                symbol: 2,
                bits: 2,
            },
        ];
        assert_eq!(validate_symbol_constraint(&code), want);
        assert_eq!(violations_by_scan(&code), want);
    }

    #[test]
    fn random_matrix_violates() {
        let mut rng = substream(5, 0);
        let n = 400;
        let checks: Vec<Vec<usize>> = (0..200)
            .map(|_| {
                let mut row: Vec<usize> = (0..n).collect();
                row.shuffle(&mut rng);
                row.truncate(6);
                row
            })
            .collect();
        let mut checks = checks;
        checks.push((0..n).collect());
        let code = ParityCheckCode::from_checks(n, checks)
            .unwrap()
            .with_symbol_width(4)
            .unwrap();
        let v = validate_symbol_constraint(&code);
        assert!(v.len() > 1);
        assert_eq!(v, violations_by_scan(&code));
    }

    #[test]
    fn girth_small_cases() {
        let tree =
            ParityCheckCode::from_checks(4, vec![vec![0, 1], vec![1, 2], vec![2, 3]]).unwrap();
        assert_eq!(girth(&tree), None);
        let four = ParityCheckCode::from_checks(3, vec![vec![0, 1], vec![0, 1, 2]]).unwrap();
        assert_eq!(girth(&four), Some(4));
        let six =
            ParityCheckCode::from_checks(3, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        assert_eq!(girth(&six), Some(6));
    }

    #[test]
    fn girth_matches_edge_removal() {
        let mut rng = substream(9, 0);
        for trial in 0..60 {
            let n = rng.random_range(4..30);
            let n_checks = rng.random_range(2..15);
            let mut checks: Vec<Vec<usize>> = (0..n_checks)
                .map(|_| (0..n).filter(|_| rng.random::<f64>() < 0.15).collect())
                .collect();
            for b in 0..n {
                if !checks.iter().any(|r| r.contains(&b)) {
                    checks[b % n_checks].push(b);
                }
            }
            let code = ParityCheckCode::from_checks(n, checks).unwrap();
            assert_eq!(girth(&code), girth_by_edge_removal(&code), "trial {trial}");
        }
    }

    #[test]
    fn irregular_counts_and_degree_sum() {
        let s = spec(
            1200,
            4,
            3,
            &[(4, 0.1087), (5, 0.6753), (49, 0.0299), (50, 0.1861)],
            7,
        );
        let target = s.target_check_counts().unwrap();
        let code = peg_construct(&s).unwrap();
        assert_eq!(code.n_edges(), 3600);
        assert!((0..1200).all(|b| code.bit_degree(b) == 3));
        let got = code.check_degree_histogram();
        for d in target.keys().chain(got.keys()) {
            let a = *target.get(d).unwrap_or(&0) as i64;
            let b = *got.get(d).unwrap_or(&0) as i64;
            assert!((a - b).abs() <= 1, "degree {d}: target {a}, got {b}");
        }
        assert!(validate_symbol_constraint(&code).is_empty());
        assert!(girth(&code).unwrap() >= 6);
    }

    #[test]
    fn deterministic_for_seed() {
        let s = spec(240, 4, 3, &[(5, 0.5), (7, 0.5)], 11);
        let a = peg_construct(&s).unwrap();
        assert_eq!(a, peg_construct(&s).unwrap());
        let other = peg_construct(&ConstructionSpec { seed: 12, ..s }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn spec_validation() {
        assert!(spec(10, 4, 3, &[(6, 1.0)], 0).validate().is_err());
        assert!(spec(12, 4, 3, &[(6, 1.0)], 0).validate().is_err());
        assert!(spec(24, 4, 3, &[(6, 0.5)], 0).validate().is_err());
        assert!(spec(24, 4, 0, &[(6, 1.0)], 0).validate().is_err());
        assert!(spec(24, 4, 3, &[(6, 1.0)], 0).validate().is_ok());
    }

    #[test]
    fn infeasible_capacity_reports_bit() {
        // the degree-3 checks fill up before the last symbol is reached
        match peg_construct(&spec(6, 2, 3, &[(1, 0.5), (3, 0.5)], 0)) {
            Err(Error::Construction { bit, .. }) => assert!(bit < 6),
            other => panic!("{other:?}"),
        }
    }
}
