//! Systematic encoding by GF(2) Gauss-Jordan elimination.

use super::ParityCheckCode;

type Word = u64;
const BITS: usize = 64;

fn words(n: usize) -> usize {
    n.div_ceil(BITS)
}

#[inline]
fn get(row: &[Word], j: usize) -> bool {
    (row[j / BITS] >> (j % BITS)) & 1 == 1
}

#[inline]
fn set(row: &mut [Word], j: usize) {
    row[j / BITS] |= 1 << (j % BITS);
}

/// Encoder derived from the reduced row echelon form of `H`.
///
/// Columns are scanned left to right; the first column with a pivot in the
/// remaining rows becomes a parity position, others carry information bits
/// in ascending order.
#[derive(Debug, Clone)]
pub struct Encoder {
    n_bits: usize,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    // row k: parity bit at parity_positions[k] = <row, info> over GF(2)
    parity_rows: Vec<Vec<Word>>,
}

impl Encoder {
    pub fn new(code: &ParityCheckCode) -> Self {
        let n = code.n_bits();
        let nw = words(n);
        let mut rows: Vec<Vec<Word>> = (0..code.n_checks())
            .map(|c| {
                let mut r = vec![0; nw];
                for &b in code.check(c) {
                    set(&mut r, b);
                }
                r
            })
            .collect();

        let mut pivots = Vec::new();
        let mut info = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let Some(found) = (rank..rows.len()).find(|&r| get(&rows[r], col)) else {
                info.push(col);
                continue;
            };
            rows.swap(rank, found);
            // rows at or below `rank` are zero left of `col`
            let start = col / BITS;
            let (upper, lower) = rows.split_at_mut(rank + 1);
            let pivot = &upper[rank];
            for r in lower.iter_mut() {
                if get(r, col) {
                    for w in start..nw {
                        r[w] ^= pivot[w];
                    }
                }
            }
            pivots.push(col);
            rank += 1;
        }
        rows.truncate(rank);
        // back substitution to reduced form
        for k in (0..rank).rev() {
            let col = pivots[k];
            let start = col / BITS;
            let (upper, lower) = rows.split_at_mut(k);
            let pivot = &lower[0];
            for r in upper.iter_mut() {
                if get(r, col) {
                    for w in start..nw {
                        r[w] ^= pivot[w];
                    }
                }
            }
        }

        let kw = words(info.len());
        let parity_rows = rows
            .iter()
            .map(|r| {
                let mut packed = vec![0; kw];
                for (i, &col) in info.iter().enumerate() {
                    if get(r, col) {
                        set(&mut packed, i);
                    }
                }
                packed
            })
            .collect();
        Encoder {
            n_bits: n,
            info_positions: info,
            parity_positions: pivots,
            parity_rows,
        }
    }

    pub fn dimension(&self) -> usize {
        self.info_positions.len()
    }

    pub fn rank(&self) -> usize {
        self.parity_positions.len()
    }

    /// Columns of `H` that carry the information bits, in input order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        assert_eq!(
            info.len(),
            self.dimension(),
            "wrong number of information bits"
        );
        let mut packed = vec![0 as Word; words(info.len())];
        let mut cw = vec![0u8; self.n_bits];
        for (i, (&b, &pos)) in info.iter().zip(&self.info_positions).enumerate() {
            if b & 1 == 1 {
                set(&mut packed, i);
                cw[pos] = 1;
            }
        }
        for (row, &pos) in self.parity_rows.iter().zip(&self.parity_positions) {
            let ones: u32 = row
                .iter()
                .zip(&packed)
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            cw[pos] = (ones & 1) as u8;
        }
        cw
    }

    /// Recovers the information bits from a codeword.
    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| codeword[p]).collect()
    }
}
