//! Check degree distribution design for variable-regular codes.
//!
//! A degree-`d_v` bit together with its symbol front-end is treated as one
//! node. With `sigma_A = J^-1(I_A)` on each incoming check edge, the bit's
//! total check information `J(sqrt(d_v) sigma_A)` is what the front-end sees
//! from that bit; the front-end curve returns `I_fe` and the message back
//! toward a check is `J(sqrt((d_v - 1) sigma_A^2 + J^-1(I_fe)^2))`.
//! Checks use the Gaussian duality approximation
//! `I_C,d(x) = 1 - J(sqrt(d - 1) J^-1(1 - x))`, which is linear in `rho`.

mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use simplex::{DenseSimplex, LinearProgram, LpOutcome, LpSolver};

use crate::channel::{capacity_bsc, capacity_qsc, marginal_bsc_eps, ChannelParams};
use crate::code::DegreeDistribution;
use crate::error::{Error, Result};
use crate::exit::{exit_bec, j_inv, j_map, uniform_grid, ExitCurve, PriorModel};

/// How the front-end transfer curve is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FrontEndModel {
    /// Monte-Carlo curve under Gaussian priors, interpolated.
    Gaussian { n_samples: usize, seed: u64 },
    /// Closed-form erasure-prior curve.
    Bec,
    /// No symbol feedback: constant marginal-BSC information.
    MarginalBsc,
}

impl Default for FrontEndModel {
    fn default() -> Self {
        FrontEndModel::Gaussian {
            n_samples: 100_000,
            seed: 1,
        }
    }
}

/// Front-end transfer function `I_fe(I_in)`.
#[derive(Debug, Clone)]
pub enum FrontEndCurve {
    Sampled(ExitCurve),
    Bec(ChannelParams),
    Constant(f64),
}

impl FrontEndCurve {
    pub fn build(p: &ChannelParams, model: FrontEndModel, curve_points: usize) -> Result<Self> {
        Ok(match model {
            FrontEndModel::Gaussian { n_samples, seed } => {
                FrontEndCurve::Sampled(ExitCurve::compute(
                    p,
                    &uniform_grid(curve_points),
                    PriorModel::Gaussian { n_samples, seed },
                )?)
            }
            FrontEndModel::Bec => FrontEndCurve::Bec(*p),
            FrontEndModel::MarginalBsc => {
                FrontEndCurve::Constant(capacity_bsc(marginal_bsc_eps(p)))
            }
        })
    }

    pub fn eval(&self, i_in: f64) -> Result<f64> {
        match self {
            FrontEndCurve::Sampled(c) => c.interpolate(i_in),
            FrontEndCurve::Bec(p) => Ok(exit_bec(i_in, p)),
            FrontEndCurve::Constant(v) => Ok(*v),
        }
    }
}

/// Largest information value passed to `J^-1`.
const I_CAP: f64 = 1.0 - 1e-15;

fn j_inv_capped(i: f64) -> f64 {
    j_inv(i.clamp(0.0, I_CAP)).expect("argument clamped into range")
}

/// Variable-node-plus-front-end EXIT toward the checks.
#[derive(Debug, Clone)]
pub struct CombinedVn {
    pub d_v: usize,
    pub front_end: FrontEndCurve,
}

impl CombinedVn {
    pub fn exit(&self, i_a: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&i_a) {
            return Err(Error::Domain(format!("I_A = {i_a} outside [0, 1]")));
        }
        if i_a >= 1.0 {
            return Ok(1.0);
        }
        let dv = self.d_v as f64;
        let s_a = j_inv_capped(i_a);
        let i_fe = self.front_end.eval(j_map(dv.sqrt() * s_a))?;
        let s_ch = j_inv_capped(i_fe);
        Ok(j_map(((dv - 1.0) * s_a * s_a + s_ch * s_ch).sqrt()))
    }
}

/// Check-node EXIT of degree `d` at input information `x`.
pub fn check_exit(d: usize, x: f64) -> f64 {
    check_exits(&[d], x)[0]
}

/// [`check_exit`] for several degrees, sharing one `J^-1` evaluation.
pub fn check_exits(degrees: &[usize], x: f64) -> Vec<f64> {
    let s = if degrees.iter().any(|&d| d > 2) {
        j_inv_capped(1.0 - x)
    } else {
        0.0
    };
    degrees
        .iter()
        .map(|&d| match d {
            0 | 1 => 1.0,
            2 => x,
            _ => 1.0 - j_map(((d - 1) as f64).sqrt() * s),
        })
        .collect()
}

/// Inputs of the check distribution optimisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    pub m: u32,
    pub epsilon: f64,
    pub d_v: usize,
    pub d_c_max: usize,
    /// Check-side a-priori information values at which convergence is required.
    pub grid: Vec<f64>,
    pub model: FrontEndModel,
    /// Number of uniform points of the front-end curve.
    pub curve_points: usize,
    pub margin: f64,
}

/// 101 uniform points on [0, 0.99].
pub fn default_design_grid() -> Vec<f64> {
    (0..=100).map(|k| 0.99 * k as f64 / 100.0).collect()
}

impl DesignProblem {
    pub fn new(m: u32, epsilon: f64) -> Self {
        DesignProblem {
            m,
            epsilon,
            d_v: 3,
            d_c_max: 50,
            grid: default_design_grid(),
            model: FrontEndModel::default(),
            curve_points: 101,
            margin: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<ChannelParams> {
        if self.d_v < 2 {
            return Err(Error::param("d_v", "must be >= 2"));
        }
        if self.d_c_max < self.d_v {
            return Err(Error::param("d_c_max", "must be >= d_v"));
        }
        if !(self.margin > 0.0) {
            return Err(Error::param("margin", "must be positive"));
        }
        if self.grid.is_empty() || self.grid.iter().any(|g| !(0.0..1.0).contains(g)) {
            return Err(Error::param("grid", "needs values in [0, 1)"));
        }
        if self.curve_points < 2 {
            return Err(Error::param("curve_points", "must be >= 2"));
        }
        ChannelParams::new(self.m, self.epsilon)
    }

    pub fn combined_vn(&self) -> Result<CombinedVn> {
        let p = self.validate()?;
        Ok(CombinedVn {
            d_v: self.d_v,
            front_end: FrontEndCurve::build(&p, self.model, self.curve_points)?,
        })
    }
}

/// One-shot combined curve evaluation (rebuilds the front-end curve).
pub fn combined_vn_exit(i_a: f64, problem: &DesignProblem) -> Result<f64> {
    problem.combined_vn()?.exit(i_a)
}

/// Designed distribution with its constraint slacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub distribution: DegreeDistribution,
    pub rate: f64,
    /// `I_C(V(I_g)) - I_g - margin` per grid point, recomputed from the curves.
    pub slacks: Vec<f64>,
}

impl DesignResult {
    pub fn min_slack(&self) -> f64 {
        self.slacks.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `V(I_g)` for every grid point.
fn vn_outputs(vn: &CombinedVn, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter().map(|&g| vn.exit(g)).collect()
}

/// Smallest feasible entries are dropped from the output.
const RHO_FLOOR: f64 = 1e-12;

pub fn optimize_rho(problem: &DesignProblem) -> Result<DesignResult> {
    optimize_rho_with(problem, &DenseSimplex::default())
}

/// Minimises `sum_d rho_d / d` (maximising the rate) subject to
/// `sum_d rho_d I_C,d(V(I_g)) >= I_g + margin` on the grid.
pub fn optimize_rho_with(problem: &DesignProblem, solver: &dyn LpSolver) -> Result<DesignResult> {
    let vn = problem.combined_vn()?;
    let v = vn_outputs(&vn, &problem.grid)?;
    let infeasible: Vec<f64> = problem
        .grid
        .iter()
        .zip(&v)
        .filter(|(g, v)| **v < **g + problem.margin)
        .map(|(g, _)| *g)
        .collect();
    if !infeasible.is_empty() {
        // rho_2 = 1 dominates every other choice pointwise
        return Err(Error::Infeasible { points: infeasible });
    }
    let degrees: Vec<usize> = (2..=problem.d_c_max).collect();
    let lp = LinearProgram {
        c: degrees.iter().map(|&d| 1.0 / d as f64).collect(),
        a_ge: v.iter().map(|&x| check_exits(&degrees, x)).collect(),
        b_ge: problem.grid.iter().map(|g| g + problem.margin).collect(),
        a_eq: vec![vec![1.0; degrees.len()]],
        b_eq: vec![1.0],
    };
    let x = match solver.solve(&lp)? {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible => {
            return Err(Error::Infeasible {
                points: problem.grid.clone(),
            })
        }
        LpOutcome::Unbounded => return Err(Error::Numerical("design LP unbounded".into())),
    };
    let mut rho: BTreeMap<usize, f64> = degrees
        .iter()
        .zip(&x)
        .filter(|(_, &r)| r > RHO_FLOOR)
        .map(|(&d, &r)| (d, r))
        .collect();
    let total: f64 = rho.values().sum();
    rho.values_mut().for_each(|r| *r /= total);
    let lambda = BTreeMap::from([(problem.d_v, 1.0)]);
    let dist = DegreeDistribution { lambda, rho };
    let rate = dist.design_rate();
    if !(rate > 0.0) {
        return Err(Error::Domain(format!(
            "best achievable design rate {rate} is not positive"
        )));
    }
    let slacks = problem
        .grid
        .iter()
        .zip(&v)
        .map(|(&g, &x)| check_side_exit(&dist.rho, x) - g - problem.margin)
        .collect();
    Ok(DesignResult {
        distribution: dist,
        rate,
        slacks,
    })
}

/// Edge-averaged check EXIT `sum_d rho_d I_C,d(x)`.
pub fn check_side_exit(rho: &BTreeMap<usize, f64>, x: f64) -> f64 {
    let degrees: Vec<usize> = rho.keys().copied().collect();
    check_exits(&degrees, x)
        .iter()
        .zip(rho.values())
        .map(|(i, r)| i * r)
        .sum()
}

/// Options of the threshold search.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdOptions {
    pub model: FrontEndModel,
    pub grid: Vec<f64>,
    pub curve_points: usize,
    /// Bisection stops when the bracket is narrower than this.
    pub tol: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            model: FrontEndModel::Gaussian {
                n_samples: 20_000,
                seed: 1,
            },
            grid: default_design_grid(),
            curve_points: 101,
            tol: 1e-3,
        }
    }
}

/// Whether the decoding tunnel is open at `p` (margin 0).
pub fn tunnel_open(
    dist: &DegreeDistribution,
    p: &ChannelParams,
    opts: &ThresholdOptions,
) -> Result<bool> {
    if dist.lambda.len() != 1 {
        return Err(Error::param(
            "lambda",
            "only variable-regular distributions are supported",
        ));
    }
    let d_v = *dist.lambda.keys().next().expect("nonempty");
    let vn = CombinedVn {
        d_v,
        front_end: FrontEndCurve::build(p, opts.model, opts.curve_points)?,
    };
    for &g in &opts.grid {
        if check_side_exit(&dist.rho, vn.exit(g)?) <= g {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest `eps` with an open tunnel, by bisection on `(0, 1 - 1/q)`.
pub fn predict_threshold(
    dist: &DegreeDistribution,
    m: u32,
    opts: &ThresholdOptions,
) -> Result<f64> {
    let top = 1.0 - (-(m as f64)).exp2();
    let (mut lo, mut hi) = (0.0, top);
    if !tunnel_open(dist, &ChannelParams::new(m, 1e-9)?, opts)? {
        return Ok(0.0);
    }
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        if tunnel_open(dist, &ChannelParams::new(m, mid)?, opts)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One point of a rate-versus-epsilon sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub m: u32,
    pub epsilon: f64,
    /// `None` where no positive-rate design exists.
    pub rate: Option<f64>,
    pub normalized_capacity: f64,
}

/// Optimised rate over `eps_list`, with `C_qSC / m` for reference.
pub fn design_sweep(base: &DesignProblem, eps_list: &[f64]) -> Result<Vec<SweepPoint>> {
    eps_list
        .iter()
        .map(|&eps| {
            let prob = DesignProblem {
                epsilon: eps,
                ..base.clone()
            };
            let p = prob.validate()?;
            let rate = match optimize_rho(&prob) {
                Ok(r) => Some(r.rate),
                Err(Error::Infeasible { .. }) | Err(Error::Domain(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(SweepPoint {
                m: base.m,
                epsilon: eps,
                rate,
                normalized_capacity: capacity_qsc(&p) / base.m as f64,
            })
        })
        .collect()
}
