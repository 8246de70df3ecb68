//! The per-box tests: certified LP infeasibility over the relaxation of
//! `C ∩ S ∩ E`, and the midpoint derivative bound on `f/g`.

use super::boxes::{ConfigBox, Derived};
use super::lp::{LinearSystem, LpStatus};
use super::CertifyParams;
use crate::cutratio::{cut_probability_raw, f_derivative_bound};

/// Variable layout of the box LP.
const X: usize = 0;
const W: usize = 3;
const A: usize = 6;
const S: usize = 9;
const NVAR: usize = 12;

/// Sum of `α` as an objective.
const ALPHA_SUM: [f64; NVAR] = [0., 0., 0., 0., 0., 0., 1., 1., 1., 0., 0., 0.];

/// Slack allowed for the midpoint evaluation of `f`.
const F_EVAL_ERR: f64 = 1e-12;

fn row(terms: &[(usize, f64)]) -> Vec<f64> {
    let mut r = vec![0.0; NVAR];
    for &(j, c) in terms {
        r[j] += c;
    }
    r
}

/// Linear relaxation of the configurations in `b` that lie in `C ∩ S ∩ E`.
pub fn build_system(b: &ConfigBox, d: &Derived, p: &CertifyParams) -> LinearSystem {
    let mut lo = vec![0.0; NVAR];
    let mut hi = vec![1.0; NVAR];
    let xs = [b.x(0), b.x(1), d.x3];
    let ws = [b.w(0), b.w(1), d.w3];
    for i in 0..3 {
        (lo[X + i], hi[X + i]) = (xs[i].lo, xs[i].hi);
        (lo[W + i], hi[W + i]) = (ws[i].lo, ws[i].hi);
        (lo[A + i], hi[A + i]) = (d.alpha[i].lo, d.alpha[i].hi);
    }
    let mut s = LinearSystem::new(NVAR, lo, hi);
    s.eq(row(&[(X, 1.), (X + 1, 1.), (X + 2, 1.)]), 1.0);
    s.eq(row(&[(W, 1.), (W + 1, 1.), (W + 2, 1.)]), 1.0);
    for i in 0..3 {
        s.le(row(&[(A + i, 1.), (X + i, -1.)]), 0.0);
        s.le(row(&[(A + i, 1.), (W + i, -1.)]), 0.0);
    }
    // Off-diagonal elimination: each of 0, A, B is at most each of C, D, E.
    let lower: [Vec<(usize, f64)>; 3] = [
        vec![],
        vec![(X + 2, 1.), (A + 2, -1.), (A, 1.), (W, -1.)],
        vec![(W + 1, 1.), (A + 1, -1.), (A, 1.), (X, -1.)],
    ];
    let upper: [Vec<(usize, f64)>; 3] = [
        vec![(W + 1, 1.), (A + 1, -1.)],
        vec![(X + 2, 1.), (A + 2, -1.)],
        vec![(X + 1, 1.), (X + 2, 1.), (W, -1.), (A, 1.), (A + 1, -1.), (A + 2, -1.)],
    ];
    for l in &lower {
        for u in &upper {
            let mut terms = l.clone();
            terms.extend(u.iter().map(|&(j, c)| (j, -c)));
            s.le(row(&terms), 0.0);
        }
    }
    for other in [X + 1, X + 2, W, W + 1, W + 2] {
        s.le(row(&[(X, 1.), (other, -1.)]), 0.0);
    }
    s.le(row(&[(X + 1, 1.), (X + 2, -1.)]), 0.0);
    for i in 0..3 {
        s.le(row(&[(X + i, 1.), (W + i, -1.), (S + i, -1.)]), 0.0);
        s.le(row(&[(W + i, 1.), (X + i, -1.), (S + i, -1.)]), 0.0);
    }
    s.le(row(&[(S, 0.5), (S + 1, 0.5), (S + 2, 0.5), (A, p.rho), (A + 1, p.rho), (A + 2, p.rho)]), p.rho);
    s.le(row(&[(A, 1.), (A + 1, 1.), (A + 2, 1.)]), 1.0 - p.delta_prime);
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpVerdict {
    /// Verified infeasible with the given normalized margin.
    InfeasibleCertified(f64),
    /// Not proven infeasible; carries a rigorous upper bound on `g` over the
    /// relaxation when one was computed.
    Feasible { g_upper: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatioVerdict {
    Eliminated(f64),
    Undecided(f64),
}

/// Upper bound on `g` from the `α` lower enclosures alone.
fn interval_g_upper(d: &Derived) -> f64 {
    (1.0 - d.alpha.iter().map(|a| a.lo).sum::<f64>()).min(1.0)
}

/// Certified LP infeasibility test. When `want_g` is set and the box is not
/// eliminated, also bounds `max g` over the relaxation.
pub fn lp_feasible(b: &ConfigBox, p: &CertifyParams, want_g: bool) -> LpVerdict {
    let d = b.derived();
    let gap = d.emptiness_gap();
    if gap >= p.tau_num {
        return LpVerdict::InfeasibleCertified(gap);
    }
    let d = d.repaired();
    let sys = build_system(b, &d, p);
    let cap = interval_g_upper(&d);
    match sys.solve(want_g.then_some(&ALPHA_SUM[..])) {
        LpStatus::Infeasible(lambda) => {
            let margin = sys.farkas_margin(&lambda);
            if margin >= p.tau_num {
                LpVerdict::InfeasibleCertified(margin)
            } else {
                LpVerdict::Feasible { g_upper: cap }
            }
        }
        LpStatus::Optimal { multipliers, .. } if want_g => {
            let lb = sys.objective_lower_bound(&ALPHA_SUM, &multipliers);
            LpVerdict::Feasible { g_upper: (1.0 - lb).min(cap) }
        }
        _ => LpVerdict::Feasible { g_upper: cap },
    }
}

/// Midpoint of the marginal coordinates moved into `x₁+x₂ ≤ 1−1e−12`,
/// `w₁+w₂ ≤ 1−1e−12` while staying in the box; `None` if the box misses that set.
pub fn projected_midpoint(b: &ConfigBox) -> Option<[f64; 4]> {
    const CAP: f64 = 1.0 - 1e-12;
    let mut m = [b.x(0).mid(), b.x(1).mid(), b.w(0).mid(), b.w(1).mid()];
    for k in [0, 2] {
        let (i1, i2) = (b.iv[k], b.iv[k + 1]);
        let excess = m[k] + m[k + 1] - CAP;
        if excess > 0.0 {
            if i1.lo + i2.lo > CAP {
                return None;
            }
            let mut a = m[k] - excess / 2.0;
            let mut c = m[k + 1] - excess / 2.0;
            if a < i1.lo {
                a = i1.lo;
                c = CAP - i1.lo;
            } else if c < i2.lo {
                c = i2.lo;
                a = CAP - i2.lo;
            }
            m[k] = a;
            m[k + 1] = c;
        }
    }
    Some(m)
}

/// Lower bound on `f` over the box: `f` at the projected midpoint with every
/// `tᵢ` at its upper end, less the derivative bound times the distance to the
/// farthest face in each marginal coordinate.
pub fn f_lower_bound(b: &ConfigBox) -> f64 {
    let Some(m) = projected_midpoint(b) else { return f64::NEG_INFINITY };
    let x = [m[0], m[1], (1.0 - m[0] - m[1]).max(0.0)];
    let w = [m[2], m[3], (1.0 - m[2] - m[3]).max(0.0)];
    let t = [b.t(0).hi, b.t(1).hi, b.t(2).hi];
    let f = cut_probability_raw(x, w, t) - F_EVAL_ERR;
    let bounds = f_derivative_bound(b.x(1).hi, b.x(0).hi, b.w(1).hi, b.w(0).hi);
    let penalty: f64 = (0..4)
        .map(|k| {
            let iv = b.iv[k];
            bounds[k] * (m[k] - iv.lo).max(iv.hi - m[k])
        })
        .sum();
    f - penalty * (1.0 + 4.0 * f64::EPSILON)
}

/// `L − ρ·ḡ`, eliminated when at least `tau_num`.
pub fn ratio_bound_holds(b: &ConfigBox, p: &CertifyParams, g_upper: f64) -> RatioVerdict {
    let margin = f_lower_bound(b) - p.rho * g_upper;
    if margin >= p.tau_num {
        RatioVerdict::Eliminated(margin)
    } else {
        RatioVerdict::Undecided(margin)
    }
}
