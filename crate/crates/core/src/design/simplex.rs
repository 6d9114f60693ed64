//! Dense two-phase simplex with Bland's rule.

use crate::error::Result;

/// `minimize c.x` subject to `a_ge x >= b_ge`, `a_eq x = b_eq`, `x >= 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_ge: Vec<Vec<f64>>,
    pub b_ge: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

pub trait LpSolver {
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome>;
}

#[derive(Debug, Clone, Copy)]
pub struct DenseSimplex {
    pub tol: f64,
    pub max_pivots: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex {
            tol: 1e-10,
            max_pivots: 100_000,
        }
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width;
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k != r {
                let f = row[j];
                if f != 0.0 {
                    for c in 0..=w {
                        row[c] -= f * pivot_row[c];
                    }
                }
            }
        }
        let f = self.obj[j];
        if f != 0.0 {
            for c in 0..=w {
                self.obj[c] -= f * pivot_row[c];
            }
        }
        self.basis[r] = j;
    }

    /// Optimises the current objective row over columns `< allowed`.
    /// Returns false when unbounded.
    fn run(&mut self, allowed: usize, tol: f64, max_pivots: usize) -> Result<bool> {
        let w = self.width;
        for _ in 0..max_pivots {
            let Some(j) = (0..allowed).find(|&j| self.obj[j] < -tol) else {
                return Ok(true);
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[j] > tol {
                    let ratio = row[w] / row[j];
                    let better = match best {
                        None => true,
                        Some((br, _, bb)) => {
                            ratio < br - tol || (ratio <= br + tol && self.basis[r] < bb)
                        }
                    };
                    if better {
                        best = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            match best {
                None => return Ok(false),
                Some((_, r, _)) => self.pivot(r, j),
            }
        }
        Err(crate::Error::Numerical(
            "simplex pivot limit reached".into(),
        ))
    }
}

impl LpSolver for DenseSimplex {
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome> {
        let n = lp.c.len();
        let n_ge = lp.a_ge.len();
        let n_rows = n_ge + lp.a_eq.len();
        let n_real = n + n_ge;
        let width = n_real + n_rows;
        let tol = self.tol;

        let mut rows = Vec::with_capacity(n_rows);
        for (k, (a, &b)) in lp
            .a_ge
            .iter()
            .zip(&lp.b_ge)
            .chain(lp.a_eq.iter().zip(&lp.b_eq))
            .enumerate()
        {
            assert_eq!(a.len(), n, "constraint row width");
            let mut row = vec![0.0; width + 1];
            row[..n].copy_from_slice(a);
            if k < n_ge {
                row[n + k] = -1.0;
            }
            row[width] = b;
            if b < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
            row[n_real + k] = 1.0;
            rows.push(row);
        }

        // phase 1: minimise the sum of artificials
        let mut obj = vec![0.0; width + 1];
        for row in &rows {
            for c in 0..n_real {
                obj[c] -= row[c];
            }
            obj[width] -= row[width];
        }
        let mut t = Tableau {
            rows,
            obj,
            basis: (n_real..width).collect(),
            width,
        };
        t.run(width, tol, self.max_pivots)?;
        let scale = 1.0
            + lp.b_ge
                .iter()
                .chain(&lp.b_eq)
                .fold(0.0f64, |a, b| a.max(b.abs()));
        if -t.obj[width] > 1e-8 * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // drive remaining artificials out of the basis
        let mut r = 0;
        while r < t.rows.len() {
            if t.basis[r] >= n_real {
                if let Some(j) = (0..n_real).find(|&j| t.rows[r][j].abs() > 1e-9) {
                    t.pivot(r, j);
                } else {
                    // redundant constraint
                    t.rows.remove(r);
                    t.basis.remove(r);
                    continue;
                }
            }
            r += 1;
        }

        // phase 2
        let mut obj = vec![0.0; width + 1];
        obj[..n].copy_from_slice(&lp.c);
        for (row, &b) in t.rows.iter().zip(&t.basis) {
            let cb = if b < n { lp.c[b] } else { 0.0 };
            if cb != 0.0 {
                for c in 0..=width {
                    obj[c] -= cb * row[c];
                }
            }
        }
        t.obj = obj;
        if !t.run(n_real, tol, self.max_pivots)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![0.0; n];
        for (row, &b) in t.rows.iter().zip(&t.basis) {
            if b < n {
                x[b] = row[width].max(0.0);
            }
        }
        let objective = lp.c.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpOutcome::Optimal { x, objective })
    }
}
