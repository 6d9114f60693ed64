//! alist text format.
//!
//! ```text
//! n_bits n_checks
//! max_bit_degree max_check_degree
//! <n_bits bit degrees>
//! <n_checks check degrees>
//! <n_bits lines: 1-based check indices of each bit, zero padded>
//! <n_checks lines: 1-based bit indices of each check, zero padded>
//! ```
//!
//! Adjacency lines may either carry exactly `degree` entries or be padded
//! with zeros up to the maximum degree. Blank lines are ignored.

use std::fmt::Write;

use super::ParityCheckCode;
use crate::error::{Error, Result};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_numbers(&mut self) -> Result<(usize, Vec<usize>)> {
        for (k, line) in self.inner.by_ref() {
            let line_no = k + 1;
            self.last = line_no;
            if line.trim().is_empty() {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|_| Error::Alist {
                        line: line_no,
                        reason: format!("`{t}` is not a nonnegative integer"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok((line_no, nums));
        }
        Err(Error::Alist {
            line: self.last + 1,
            reason: "unexpected end of input".into(),
        })
    }

    fn expect_len(&mut self, n: usize, what: &str) -> Result<(usize, Vec<usize>)> {
        let (line, nums) = self.next_numbers()?;
        if nums.len() != n {
            return Err(Error::Alist {
                line,
                reason: format!("expected {n} {what}, found {}", nums.len()),
            });
        }
        Ok((line, nums))
    }
}

/// Parses one adjacency line: `degree` entries in `1..=bound`, then
/// optional zero padding to exactly `max_degree` entries.
fn adjacency(
    line: usize,
    nums: &[usize],
    degree: usize,
    max_degree: usize,
    bound: usize,
) -> Result<Vec<usize>> {
    let err = |reason: String| Error::Alist { line, reason };
    if nums.len() != degree && nums.len() != max_degree {
        return Err(err(format!(
            "malformed padding: {} entries, expected {degree} or {max_degree}",
            nums.len()
        )));
    }
    let (head, pad) = nums.split_at(degree);
    if let Some(p) = pad.iter().find(|&&p| p != 0) {
        return Err(err(format!(
            "malformed padding: nonzero entry {p} after {degree} indices"
        )));
    }
    head.iter()
        .map(|&v| {
            if v == 0 || v > bound {
                Err(err(format!("index {v} outside 1..={bound}")))
            } else {
                Ok(v - 1)
            }
        })
        .collect()
}

pub fn load_alist(text: &str) -> Result<ParityCheckCode> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (_, dims) = lines.expect_len(2, "header values (n_bits n_checks)")?;
    let (n, m) = (dims[0], dims[1]);
    let (max_line, maxes) = lines.expect_len(2, "maximum degrees")?;
    let (max_col, max_row) = (maxes[0], maxes[1]);
    let (col_line, col_deg) = lines.expect_len(n, "bit degrees")?;
    let (row_line, row_deg) = lines.expect_len(m, "check degrees")?;
    if col_deg.iter().max().copied().unwrap_or(0) != max_col {
        return Err(Error::Alist {
            line: col_line,
            reason: format!(
                "bit degrees do not reach declared maximum {max_col} (line {max_line})"
            ),
        });
    }
    if row_deg.iter().max().copied().unwrap_or(0) != max_row {
        return Err(Error::Alist {
            line: row_line,
            reason: format!(
                "check degrees do not reach declared maximum {max_row} (line {max_line})"
            ),
        });
    }

    let mut cols = Vec::with_capacity(n);
    for &d in &col_deg {
        let (line, nums) = lines.next_numbers()?;
        cols.push(adjacency(line, &nums, d, max_col, m)?);
    }
    let mut rows = Vec::with_capacity(m);
    for &d in &row_deg {
        let (line, nums) = lines.next_numbers()?;
        rows.push(adjacency(line, &nums, d, max_row, n)?);
    }

    // the two adjacency halves must describe the same edge set
    let mut from_cols = vec![Vec::new(); m];
    for (b, col) in cols.iter().enumerate() {
        for &c in col {
            from_cols[c].push(b);
        }
    }
    for (c, (a, b)) in rows.iter_mut().zip(from_cols.iter_mut()).enumerate() {
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(Error::InconsistentDegree(format!(
                "check {} lists bits {:?} but bit lists imply {:?}",
                c + 1,
                a.iter().map(|x| x + 1).collect::<Vec<_>>(),
                b.iter().map(|x| x + 1).collect::<Vec<_>>()
            )));
        }
    }
    ParityCheckCode::from_checks(n, rows)
}

/// Canonical alist: sorted adjacency, zero padded, single spaces.
pub fn save_alist(code: &ParityCheckCode) -> String {
    let cols = code.columns();
    let max_col = cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = (0..code.n_checks())
        .map(|c| code.check_degree(c))
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let join = |out: &mut String, it: &mut dyn Iterator<Item = usize>| {
        let mut first = true;
        for v in it {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    };
    writeln!(out, "{} {}", code.n_bits(), code.n_checks()).unwrap();
    writeln!(out, "{max_col} {max_row}").unwrap();
    join(&mut out, &mut cols.iter().map(Vec::len));
    join(
        &mut out,
        &mut (0..code.n_checks()).map(|c| code.check_degree(c)),
    );
    for col in &cols {
        join(
            &mut out,
            &mut col
                .iter()
                .map(|c| c + 1)
                .chain(std::iter::repeat(0).take(max_col - col.len())),
        );
    }
    for c in 0..code.n_checks() {
        let row = code.check(c);
        join(
            &mut out,
            &mut row
                .iter()
                .map(|b| b + 1)
                .chain(std::iter::repeat(0).take(max_row - row.len())),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smallest_code() {
        let text = "3 1\n1 3\n1 1 1\n3\n1\n1\n1\n1 2 3\n";
        let code = load_alist(text).unwrap();
        assert_eq!(code.n_bits(), 3);
        assert_eq!(code.n_checks(), 1);
        assert_eq!(code.check_degree(0), 3);
        assert_eq!(save_alist(&code), text);
    }

    #[test]
    fn unpadded_lines_are_accepted_and_canonicalised() {
        let text = "4 2\n2 3\n1 1 2 1\n3 2\n1\n1\n1 2\n2\n1 2 3\n3 4\n";
        let code = load_alist(text).unwrap();
        let canon = save_alist(&code);
        assert_eq!(
            canon,
            "4 2\n2 3\n1 1 2 1\n3 2\n1 0\n1 0\n1 2\n2 0\n1 2 3\n3 4 0\n"
        );
        assert_eq!(load_alist(&canon).unwrap(), code);
    }

    #[test]
    fn malformed_padding_names_line() {
        let text = "4 2\n2 3\n1 1 2 1\n3 2\n1 0\n1 5 0\n1 2\n2 0\n1 2 3\n3 4 0\n";
        match load_alist(text) {
            Err(Error::Alist { line, reason }) => {
                assert_eq!(line, 6);
                assert!(reason.contains("malformed padding"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "4 2\n2 3\n1 1 2 1\n3 2\n1\n1\n1 2\n2\n1 0 2 3\n3 4 0\n";
        assert!(matches!(
            load_alist(text),
            Err(Error::Alist { line: 9, .. })
        ));
    }

    #[test]
    fn header_and_token_errors() {
        assert!(matches!(
            load_alist("3\n"),
            Err(Error::Alist { line: 1, .. })
        ));
        assert!(matches!(
            load_alist("3 1\n1 x\n"),
            Err(Error::Alist { line: 2, .. })
        ));
        assert!(matches!(
            load_alist("3 1\n1 3\n1 1 1\n3\n1\n"),
            Err(Error::Alist { line: 6, .. })
        ));
    }

    #[test]
    fn inconsistent_halves() {
        let text = "4 2\n2 3\n1 1 2 1\n3 2\n1\n1\n1 2\n2\n1 2 4\n3 4\n";
        assert!(matches!(
            load_alist(text),
            Err(Error::InconsistentDegree(_))
        ));
    }

    fn arb_code() -> impl Strategy<Value = ParityCheckCode> {
        (2usize..30, 1usize..15).prop_flat_map(|(n, m)| {
            proptest::collection::vec(proptest::collection::btree_set(0..n, 1..=n.min(6)), m)
                .prop_map(move |rows| {
                    let mut rows: Vec<Vec<usize>> =
                        rows.into_iter().map(|s| s.into_iter().collect()).collect();
                    // cover every bit
                    for b in 0..n {
                        if !rows.iter().any(|r| r.contains(&b)) {
                            let k = b % rows.len();
                            rows[k].push(b);
                        }
                    }
                    ParityCheckCode::from_checks(n, rows).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip(code in arb_code()) {
            let text = save_alist(&code);
            let back = load_alist(&text).unwrap();
            prop_assert_eq!(&back, &code);
            prop_assert_eq!(save_alist(&back), text);
        }
    }
}
