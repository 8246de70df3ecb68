//! Separation probability of the two-threshold rounding for a single edge,
//! the edge's SDP contribution, and helpers used by the certifier.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{Configuration, PERMUTATIONS_3};
use crate::gaussian::{gamma_cdf, phi_inv};

/// `a / (1 − b)` clamped to `[0, 1]`, with `0/0 → 0`.
#[inline]
pub(crate) fn conditional(a: f64, b: f64) -> f64 {
    let d = 1.0 - b;
    if d <= 0.0 {
        0.0
    } else {
        (a / d).clamp(0.0, 1.0)
    }
}

/// Probability that `u` and `v` land in the same part, one entry per
/// permutation in [`PERMUTATIONS_3`] order.
pub fn permutation_terms(x: [f64; 3], w: [f64; 3], t: [f64; 3]) -> [f64; 6] {
    let both_in: [f64; 3] = std::array::from_fn(|i| gamma_cdf(t[i], x[i], w[i]));
    let both_out: [f64; 3] = std::array::from_fn(|i| gamma_cdf(t[i], 1.0 - x[i], 1.0 - w[i]));
    PERMUTATIONS_3.map(|[a, b, _]| {
        let xt = conditional(x[b], x[a]);
        let wt = conditional(w[b], w[a]);
        let second = gamma_cdf(t[b], 1.0 - xt, 1.0 - wt) + gamma_cdf(t[b], xt, wt);
        both_in[a] + both_out[a] * second
    })
}

/// `f` as a function of marginals and correlations.
pub fn cut_probability_raw(x: [f64; 3], w: [f64; 3], t: [f64; 3]) -> f64 {
    let same: f64 = permutation_terms(x, w, t).iter().sum::<f64>() / 6.0;
    (1.0 - same).clamp(0.0, 1.0)
}

pub fn cut_probability(c: &Configuration) -> f64 {
    cut_probability_raw(c.x, c.w, c.t)
}

/// Same formula with the parts always generated in the order 1, 2, 3.
pub fn cut_probability_fixed_order(c: &Configuration) -> f64 {
    let (x, w, t) = (c.x, c.w, c.t);
    let xt = conditional(x[1], x[0]);
    let wt = conditional(w[1], w[0]);
    let same = gamma_cdf(t[0], x[0], w[0])
        + gamma_cdf(t[0], 1.0 - x[0], 1.0 - w[0]) * (gamma_cdf(t[1], 1.0 - xt, 1.0 - wt) + gamma_cdf(t[1], xt, wt));
    (1.0 - same).clamp(0.0, 1.0)
}

pub fn sdp_contribution(c: &Configuration) -> f64 {
    1.0 - c.alpha.iter().sum::<f64>()
}

/// `Σ|xᵢ − wᵢ| / 2`, the total variation distance of the two marginals.
pub fn marginal_lower_bound(c: &Configuration) -> f64 {
    (0..3).map(|i| (c.x[i] - c.w[i]).abs()).sum::<f64>() / 2.0
}

/// Bounds on `|∂f/∂x₁|, |∂f/∂x₂|, |∂f/∂w₁|, |∂f/∂w₂|` over a box, given the
/// box upper bounds of `x₂, x₁, w₂, w₁` (the partner coordinate of each).
pub fn f_derivative_bound(box_upper_x2: f64, box_upper_x1: f64, box_upper_w2: f64, box_upper_w1: f64) -> [f64; 4] {
    let b = |z: f64| 5.0 / 3.0 - (1.0 - z) / 3.0;
    [b(box_upper_x2), b(box_upper_x1), b(box_upper_w2), b(box_upper_w1)]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioReport {
    pub f: f64,
    pub g: f64,
    /// `None` when `g = 0`.
    pub ratio: Option<f64>,
    pub lower_bound_marginal: f64,
}

impl RatioReport {
    pub fn new(c: &Configuration) -> Self {
        let f = cut_probability(c);
        let g = sdp_contribution(c);
        Self { f, g, ratio: (g > 0.0).then(|| f / g), lower_bound_marginal: marginal_lower_bound(c) }
    }
}

/// Monte Carlo estimate of the separation probability by simulating the two
/// threshold tests on correlated Gaussian projections. Returns
/// `(estimate, standard error)`.
pub fn mc_cut_probability(c: &Configuration, samples: u64, seed: u64) -> (f64, f64) {
    struct Stage {
        a: usize,
        b: usize,
        c: usize,
        thr: [[f64; 2]; 2],
    }
    let stages: Vec<Stage> = PERMUTATIONS_3
        .iter()
        .map(|&[a, b, cc]| Stage {
            a,
            b,
            c: cc,
            thr: [
                [phi_inv(1.0 - c.x[a]), phi_inv(1.0 - c.w[a])],
                [phi_inv(1.0 - conditional(c.x[b], c.x[a])), phi_inv(1.0 - conditional(c.w[b], c.w[a]))],
            ],
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..samples {
        let s = &stages[rand::Rng::random_range(&mut rng, 0..6)];
        let mut draw = |corr: f64| -> (f64, f64) {
            let g1: f64 = StandardNormal.sample(&mut rng);
            let g2: f64 = StandardNormal.sample(&mut rng);
            (g1, corr * g1 + (1.0 - corr * corr).max(0.0).sqrt() * g2)
        };
        let (p1u, p1v) = draw(c.t[s.a]);
        let (p2u, p2v) = draw(c.t[s.b]);
        let part = |p1: f64, p2: f64, k: usize| {
            if p1 >= s.thr[0][k] {
                s.a
            } else if p2 >= s.thr[1][k] {
                s.b
            } else {
                s.c
            }
        };
        if part(p1u, p2u, 0) != part(p1v, p2v, 1) {
            hits += 1;
        }
    }
    let n = samples as f64;
    let p = hits as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}
