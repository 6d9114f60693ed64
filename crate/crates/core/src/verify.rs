//! Self-check suite run by `qsc verify`: identities, oracle agreements and
//! structural invariants, each at a size that finishes in seconds.

use rand::Rng;
use serde::Serialize;

use crate::channel::{
    capacity_bsc, capacity_qsc, marginal_bsc_eps, transmit, ChannelParams, QscStarChannel,
    QscStarParams, SymbolBlock,
};
use crate::code::{Decoder, DecoderConfig, FixedLlrs, ParityCheckCode, LLR_CLIP};
use crate::construct::{girth, peg_construct, validate_symbol_constraint, ConstructionSpec};
use crate::design::{optimize_rho, DesignProblem, FrontEndModel};
use crate::exit::{area_identity, exit_bec};
use crate::frontend::{
    agreement_prob, app_llr_direct, brute_force_app_llr, brute_force_app_llr_star, init_llr,
    refresh, refresh_qsc_star, FrontEndChannel, SymbolFrontEnd,
};
use crate::layered::layered_rate_sum;
use crate::rng::substream;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, worst: f64, tol: f64) -> CheckResult {
    CheckResult {
        name,
        passed: worst <= tol,
        detail: format!("max deviation {worst:.3e} (tolerance {tol:.0e})"),
    }
}

const EPS_GRID: [f64; 7] = [0.001, 0.01, 0.05, 0.1, 0.25, 0.4, 0.6];

pub fn layered_identity() -> CheckResult {
    let mut worst: f64 = 0.0;
    for m in 1..=16 {
        for &e in &EPS_GRID {
            let p = ChannelParams::new(m, e).expect("grid");
            worst = worst.max((layered_rate_sum(&p) - capacity_qsc(&p)).abs());
        }
    }
    result("layered rate sum equals capacity", worst, 1e-9)
}

pub fn exit_area() -> CheckResult {
    let (mut analytic, mut quad): (f64, f64) = (0.0, 0.0);
    for m in 1..=8 {
        for &e in &EPS_GRID {
            let p = ChannelParams::new(m, e).expect("grid");
            let a = area_identity(&p, 2_001);
            analytic = analytic.max(a.difference().abs());
            quad = quad.max((a.quadrature - a.capacity).abs());
        }
    }
    CheckResult {
        name: "EXIT area equals capacity",
        passed: analytic <= 1e-9 && quad <= 1e-6,
        detail: format!(
            "analytic {analytic:.3e} (tolerance 1e-9), trapezoid {quad:.3e} (tolerance 1e-6)"
        ),
    }
}

pub fn exit_anchor() -> CheckResult {
    let mut worst: f64 = 0.0;
    for m in 1..=8 {
        for &e in &EPS_GRID {
            let p = ChannelParams::new(m, e).expect("grid");
            worst = worst.max((exit_bec(0.0, &p) - capacity_bsc(marginal_bsc_eps(&p))).abs());
        }
    }
    result(
        "BEC EXIT at zero prior equals marginal BSC capacity",
        worst,
        1e-12,
    )
}

pub fn frontend_equivalence() -> CheckResult {
    let mut rng = substream(101, 0);
    let mut worst: f64 = 0.0;
    for m in 1..=6u32 {
        for &e in &[0.05, 0.25, 0.4] {
            let p = ChannelParams::new(m, e).expect("grid");
            for _ in 0..300 {
                let y: Vec<u8> = (0..m).map(|_| rng.random_range(0..2)).collect();
                let la: Vec<f64> = (0..m).map(|_| rng.random_range(-8.0..8.0)).collect();
                let message = refresh(&y, &la, &p);
                let direct = app_llr_direct(&y, &la, &p);
                let probs: Vec<f64> = y
                    .iter()
                    .zip(&la)
                    .map(|(&b, &l)| agreement_prob(b, l))
                    .collect();
                let exact = brute_force_app_llr(&y, &probs, &p).expect("small m");
                for i in 0..m as usize {
                    let s = if y[i] == 0 { 1.0 } else { -1.0 };
                    let app = message[i] + la[i];
                    worst = worst
                        .max((app - direct[i]).abs())
                        .max((s * app - exact[i]).abs());
                }
            }
        }
    }
    result(
        "front-end message, direct and enumeration forms agree",
        worst,
        1e-10,
    )
}

pub fn qsc_star_reductions() -> CheckResult {
    let mut rng = substream(102, 0);
    let mut worst: f64 = 0.0;
    for m in 1..=6u32 {
        let p = ChannelParams::new(m, 0.3).expect("valid");
        let star = QscStarParams::from_qsc(&p).expect("valid");
        let cond: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..0.9)).collect();
        let general = QscStarParams::new(0.3, cond).expect("valid");
        for _ in 0..200 {
            let y: Vec<u8> = (0..m).map(|_| rng.random_range(0..2)).collect();
            let la: Vec<f64> = (0..m).map(|_| rng.random_range(-8.0..8.0)).collect();
            let a = refresh(&y, &la, &p);
            let b = refresh_qsc_star(&y, &la, &star);
            let c = refresh_qsc_star(&y, &la, &general);
            let probs: Vec<f64> = y
                .iter()
                .zip(&la)
                .map(|(&b, &l)| agreement_prob(b, l))
                .collect();
            let exact = brute_force_app_llr_star(&y, &probs, &general).expect("small m");
            for i in 0..m as usize {
                let s = if y[i] == 0 { 1.0 } else { -1.0 };
                worst = worst
                    .max((a[i] - b[i]).abs())
                    .max((s * (c[i] + la[i]) - exact[i]).abs());
            }
        }
    }
    result(
        "q-SC* front-end reduces to q-SC and matches enumeration",
        worst,
        1e-9,
    )
}

pub fn initialization() -> CheckResult {
    let mut worst: f64 = 0.0;
    for m in 1..=20u32 {
        for &e in &[0.01, 0.1, 0.3] {
            let p = ChannelParams::new(m, e).expect("grid");
            let eb = marginal_bsc_eps(&p);
            worst = worst.max((init_llr(&p).expect("inside range") - ((1.0 - eb) / eb).ln()).abs());
        }
    }
    result("initial LLR equals marginal BSC LLR", worst, 1e-12)
}

/// Cycle-free toy code with two-bit symbols; degree-1 checks are needed to
/// cover every bit without closing a loop through the symbol nodes.
/// Bits covered by a degree-1 check in [`tree_toy_code`].
pub const FORCED_BITS: [usize; 4] = [0, 7, 9, 11];

pub fn tree_toy_code() -> ParityCheckCode {
    let checks = vec![
        vec![1, 2, 4],
        vec![3, 6],
        vec![5, 8, 10],
        vec![0],
        vec![7],
        vec![9],
        vec![11],
    ];
    ParityCheckCode::from_checks(12, checks)
        .and_then(|c| c.with_symbol_width(2))
        .expect("valid toy code")
}

/// Bitwise MAP LLRs of `code` under the q-SC by enumerating its codebook.
pub fn codebook_map_llr(code: &ParityCheckCode, y: &[u8], p: &ChannelParams) -> Vec<f64> {
    let n = code.n_bits();
    let m = p.m() as usize;
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for word in 0u64..1 << n {
        let bits: Vec<u8> = (0..n).map(|b| ((word >> b) & 1) as u8).collect();
        if !code.is_codeword(&bits) {
            continue;
        }
        let w: f64 = (0..n / m)
            .map(|s| {
                let x = (0..m).fold(0u64, |a, k| a | (bits[s * m + k] as u64) << k);
                let r = (0..m).fold(0u64, |a, k| a | (y[s * m + k] as u64) << k);
                p.transition_prob(x, r)
            })
            .product();
        for b in 0..n {
            if bits[b] == 0 {
                num[b] += w;
            } else {
                den[b] += w;
            }
        }
    }
    num.iter().zip(&den).map(|(a, d)| (a / d).ln()).collect()
}

pub fn exact_map_toy() -> CheckResult {
    let code = tree_toy_code();
    let mut rng = substream(103, 0);
    let mut worst: f64 = 0.0;
    let mut dec = Decoder::new(&code);
    let cfg = DecoderConfig {
        max_iter: 30,
        refresh_period: 1,
        early_stop: false,
    };
    for &e in &[0.1, 0.3] {
        let p = ChannelParams::new(2, e).expect("valid");
        for _ in 0..20 {
            let y: Vec<u8> = (0..12).map(|_| rng.random_range(0..2)).collect();
            let exact = codebook_map_llr(&code, &y, &p);
            let mut fe = SymbolFrontEnd::new(FrontEndChannel::Qsc(p), y).expect("sized");
            dec.decode(&code, &mut fe, &cfg);
            let st = dec.state();
            for (b, (&got, &want)) in st.app_llr.iter().zip(&exact).enumerate() {
                // a forced bit's exact LLR is infinite; its check delivers +clip
                let dev = if FORCED_BITS.contains(&b) {
                    (st.extrinsic[b] - LLR_CLIP).abs()
                } else {
                    (got - want).abs()
                };
                worst = worst.max(dev);
            }
        }
    }
    result(
        "decoder equals codebook MAP on a cycle-free code",
        worst,
        1e-9,
    )
}

/// Flipping channel LLR signs on a codeword's support flips exactly those
/// bits' a-posteriori values, the property behind all-zero simulation.
pub fn codeword_symmetry() -> CheckResult {
    let spec = ConstructionSpec {
        n_bits: 120,
        symbol_width: 4,
        d_v: 3,
        rho: [(6, 1.0)].into_iter().collect(),
        seed: 5,
    };
    let code = peg_construct(&spec).expect("small code");
    let mut rng = substream(104, 0);
    let info: Vec<u8> = (0..code.dimension())
        .map(|_| rng.random_range(0..2))
        .collect();
    let cw = code.encode(&info);
    let ch: Vec<f64> = (0..code.n_bits())
        .map(|_| rng.random_range(-3.0..5.0))
        .collect();
    let flipped: Vec<f64> = ch
        .iter()
        .zip(&cw)
        .map(|(&l, &c)| if c == 1 { -l } else { l })
        .collect();
    let cfg = DecoderConfig {
        max_iter: 15,
        refresh_period: 1,
        early_stop: false,
    };
    let mut d1 = Decoder::new(&code);
    let mut d2 = Decoder::new(&code);
    d1.decode(&code, &mut FixedLlrs(ch), &cfg);
    d2.decode(&code, &mut FixedLlrs(flipped), &cfg);
    let worst = d1
        .state()
        .app_llr
        .iter()
        .zip(&d2.state().app_llr)
        .zip(&cw)
        .map(|((&a, &b), &c)| if c == 1 { (a + b).abs() } else { (a - b).abs() })
        .fold(0.0, f64::max);
    result("codeword sign symmetry", worst, 0.0)
}

pub fn construction() -> CheckResult {
    let spec = ConstructionSpec {
        n_bits: 1200,
        symbol_width: 4,
        d_v: 3,
        rho: [(4, 0.1087), (5, 0.6753), (49, 0.0299), (50, 0.1861)]
            .into_iter()
            .collect(),
        seed: 1,
    };
    match peg_construct(&spec) {
        Ok(code) => {
            let violations = validate_symbol_constraint(&code).len();
            let g = girth(&code);
            let regular = (0..code.n_bits()).all(|b| code.bit_degree(b) == 3);
            CheckResult {
                name: "PEG construction respects symbols",
                passed: violations == 0 && regular && g.is_none_or(|g| g >= 6),
                detail: format!("violations {violations}, girth {g:?}, variable-regular {regular}"),
            }
        }
        Err(e) => CheckResult {
            name: "PEG construction respects symbols",
            passed: false,
            detail: e.to_string(),
        },
    }
}

pub fn design_feasibility() -> CheckResult {
    let prob = DesignProblem {
        model: FrontEndModel::Bec,
        ..DesignProblem::new(4, 0.25)
    };
    match optimize_rho(&prob) {
        Ok(r) => {
            let cap = capacity_qsc(&prob.validate().expect("valid")) / 4.0;
            CheckResult {
                name: "designed distribution satisfies its constraints",
                passed: r.min_slack() >= -1e-9 && r.rate <= cap,
                detail: format!(
                    "rate {:.4}, normalized capacity {cap:.4}, min slack {:.2e}",
                    r.rate,
                    r.min_slack()
                ),
            }
        }
        Err(e) => CheckResult {
            name: "designed distribution satisfies its constraints",
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Observed error counts within 4 binomial standard deviations.
pub fn channel_statistics() -> CheckResult {
    let n = 200_000usize;
    let mut rng = substream(105, 0);
    let p = ChannelParams::new(4, 0.25).expect("valid");
    let x = SymbolBlock::zeros(n, 4);
    let y = transmit(&x, &p, &mut rng);
    let errs = (0..n).filter(|&j| y.symbol_value(j) != 0).count() as f64;
    let sd = (n as f64 * 0.25 * 0.75).sqrt();
    let mut worst = (errs - 0.25 * n as f64).abs() / sd;

    let star = QscStarParams::new(0.3, vec![0.2, 0.5, 0.7, 0.4]).expect("valid");
    let y = QscStarChannel::new(star.clone()).transmit(&x, &mut rng);
    for (i, &pi) in star.marginal_eps().iter().enumerate() {
        let k = (0..n).filter(|&j| y.symbol(j)[i] == 1).count() as f64;
        let sd = (n as f64 * pi * (1.0 - pi)).sqrt();
        worst = worst.max((k - pi * n as f64).abs() / sd);
    }
    CheckResult {
        name: "channel error statistics",
        passed: worst <= 4.0,
        detail: format!("largest deviation {worst:.2} standard deviations"),
    }
}

pub fn run_all() -> Vec<CheckResult> {
    vec![
        layered_identity(),
        exit_area(),
        exit_anchor(),
        frontend_equivalence(),
        qsc_star_reductions(),
        initialization(),
        exact_map_toy(),
        codeword_symmetry(),
        construction(),
        design_feasibility(),
        channel_statistics(),
    ]
}
