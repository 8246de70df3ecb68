//! Separation probability for the k-part version of the rounding, and a
//! multi-start local search estimating the worst ratio `f/g` over joint
//! label distributions.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::certifier::CertifyParams;

use crate::config::PairJoint;
use crate::cutratio::conditional;
use crate::error::{Error, Result};
use crate::gaussian::{gamma_cdf, phi_inv};

/// Largest `k` handled by the exact permutation average.
pub const MAX_K: usize = 6;

/// Joint distribution `joint[i][j] = y_uⁱ·y_vʲ` of the labels of two vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct KConfiguration {
    pub k: usize,
    joint: Vec<f64>,
}

impl KConfiguration {
    /// Row-major `k × k` table.
    pub fn new(k: usize, joint: Vec<f64>) -> Result<Self> {
        if !(2..=MAX_K).contains(&k) || joint.len() != k * k {
            return Err(Error::InvalidInput(format!("need k in 2..={MAX_K} and k*k entries")));
        }
        let c = Self { k, joint };
        let v = c.violations(1e-9);
        if v.is_empty() {
            Ok(c)
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn from_pair_joint(p: &PairJoint) -> Self {
        Self { k: 3, joint: p.p.iter().flatten().copied().collect() }
    }

    pub fn identical(x: &[f64]) -> Self {
        let k = x.len();
        let mut joint = vec![0.0; k * k];
        for (i, &v) in x.iter().enumerate() {
            joint[i * k + i] = v;
        }
        Self { k, joint }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.joint[i * self.k + j]
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn x(&self) -> Vec<f64> {
        (0..self.k).map(|i| (0..self.k).map(|j| self.entry(i, j)).sum()).collect()
    }

    pub fn w(&self) -> Vec<f64> {
        (0..self.k).map(|j| (0..self.k).map(|i| self.entry(i, j)).sum()).collect()
    }

    /// Correlation of the z-vectors of cluster `i`, zero for integral marginals.
    pub fn t(&self) -> Vec<f64> {
        let (x, w) = (self.x(), self.w());
        (0..self.k)
            .map(|i| {
                let r = ((x[i] - x[i] * x[i]) * (w[i] - w[i] * w[i])).max(0.0).sqrt();
                if r <= 0.0 {
                    0.0
                } else {
                    ((self.entry(i, i) - x[i] * w[i]) / r).clamp(-1.0, 1.0)
                }
            })
            .collect()
    }

    pub fn g(&self) -> f64 {
        1.0 - (0..self.k).map(|i| self.entry(i, i)).sum::<f64>()
    }

    /// The same distribution with an extra label that neither vertex uses.
    pub fn embed(&self) -> Self {
        let k = self.k + 1;
        let mut joint = vec![0.0; k * k];
        for i in 0..self.k {
            for j in 0..self.k {
                joint[i * k + j] = self.entry(i, j);
            }
        }
        Self { k, joint }
    }

    pub fn violations(&self, tol: f64) -> Vec<String> {
        let mut v = Vec::new();
        for (idx, &e) in self.joint.iter().enumerate() {
            if !(e >= -tol) {
                v.push(format!("joint[{}][{}] = {e} is negative", idx / self.k, idx % self.k));
            }
        }
        let total: f64 = self.joint.iter().sum();
        if (total - 1.0).abs() > tol {
            v.push(format!("joint table sums to {total}"));
        }
        v
    }
}

/// Same-part probability given both vertices are still unassigned after the
/// clusters in `used`, averaged over the order of the remaining clusters.
fn same_part(used: usize, k: usize, x: &[f64], w: &[f64], t: &[f64], memo: &mut [f64]) -> f64 {
    let remaining: Vec<usize> = (0..k).filter(|c| used & (1 << c) == 0).collect();
    if remaining.len() == 1 {
        return 1.0;
    }
    if !memo[used].is_nan() {
        return memo[used];
    }
    let (mut xu, mut wu) = (0.0, 0.0);
    for c in 0..k {
        if used & (1 << c) != 0 {
            xu += x[c];
            wu += w[c];
        }
    }
    let mut total = 0.0;
    for &c in &remaining {
        let xt = conditional(x[c], xu);
        let wt = conditional(w[c], wu);
        let both_in = gamma_cdf(t[c], xt, wt);
        let both_out = gamma_cdf(t[c], 1.0 - xt, 1.0 - wt);
        total += both_in + both_out * same_part(used | (1 << c), k, x, w, t, memo);
    }
    let v = total / remaining.len() as f64;
    memo[used] = v;
    v
}

/// Probability that the k-part rounding separates the two vertices: one minus
/// the permutation-averaged sum over parts of the probability that both
/// vertices survive every earlier stage and are both taken at this one.
pub fn k_cut_probability(c: &KConfiguration) -> f64 {
    let (x, w, t) = (c.x(), c.w(), c.t());
    let mut memo = vec![f64::NAN; 1 << c.k];
    (1.0 - same_part(0, c.k, &x, &w, &t, &mut memo)).clamp(0.0, 1.0)
}

/// Direct simulation of the `k − 1` threshold stages. Returns
/// `(estimate, standard error)`.
pub fn k_mc_cut_probability(c: &KConfiguration, samples: u64, seed: u64) -> (f64, f64) {
    let (x, w, t) = (c.x(), c.w(), c.t());
    let k = c.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..k).collect();
    let mut hits = 0u64;
    for _ in 0..samples {
        order.shuffle(&mut rng);
        let mut label = [usize::MAX; 2];
        let mut used = [0.0f64; 2];
        for (stage, &cl) in order.iter().enumerate() {
            if stage + 1 == k {
                for l in label.iter_mut().filter(|l| **l == usize::MAX) {
                    *l = cl;
                }
                break;
            }
            let g1: f64 = StandardNormal.sample(&mut rng);
            let g2: f64 = StandardNormal.sample(&mut rng);
            let proj = [g1, t[cl] * g1 + (1.0 - t[cl] * t[cl]).max(0.0).sqrt() * g2];
            let marg = [x[cl], w[cl]];
            for s in 0..2 {
                if label[s] == usize::MAX {
                    let q = conditional(marg[s], used[s]);
                    if proj[s] >= phi_inv(1.0 - q) {
                        label[s] = cl;
                    }
                    used[s] += marg[s];
                }
            }
        }
        if label[0] != label[1] {
            hits += 1;
        }
    }
    let n = samples as f64;
    let p = hits as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let cand = (cum - 1.0) / (i + 1) as f64;
        if ui - cand > 0.0 {
            theta = cand;
        }
    }
    v.iter().map(|&a| (a - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KEstimate {
    pub k: usize,
    pub min_ratio: f64,
    pub argmin: KConfiguration,
    pub starts: usize,
}

struct RatioObjective {
    k: usize,
    delta_prime: f64,
}

impl RatioObjective {
    fn config(&self, theta: &[f64]) -> KConfiguration {
        KConfiguration { k: self.k, joint: project_to_simplex(theta) }
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let c = self.config(theta);
        let g = c.g();
        if g < self.delta_prime {
            return 10.0 + (self.delta_prime - g);
        }
        k_cut_probability(&c) / g
    }
}

impl CostFunction for RatioObjective {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.value(theta))
    }
}

/// Nelder–Mead rounds per start; each round restarts the simplex around the
/// current best point.
const ROUNDS: usize = 3;

fn local_search(obj: &RatioObjective, start: Vec<f64>, step: f64, iters: u64) -> (f64, Vec<f64>) {
    let dim = start.len();
    let mut best = (obj.value(&start), start);
    for round in 0..ROUNDS {
        let h = step / (1 << round) as f64;
        let mut simplex = vec![best.1.clone()];
        for i in 0..dim {
            let mut p = best.1.clone();
            p[i] += h;
            simplex.push(p);
        }
        let Ok(solver) = NelderMead::new(simplex).with_sd_tolerance(1e-12) else { break };
        let problem = RatioObjective { k: obj.k, delta_prime: obj.delta_prime };
        let Ok(res) = Executor::new(problem, solver).configure(|s| s.max_iters(iters)).run() else { break };
        let state = res.state();
        if let Some(p) = state.get_best_param() {
            let v = obj.value(p);
            if v < best.0 {
                best = (v, p.clone());
            }
        }
    }
    let projected = project_to_simplex(&best.1);
    (best.0, projected)
}

/// Random joint table: exponential weights on a random support.
fn random_start(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let density = rng.random_range(0.3..1.0);
    let mut v: Vec<f64> = (0..k * k)
        .map(|_| if rng.random_bool(density) { -rng.random::<f64>().max(1e-300).ln() } else { 0.0 })
        .collect();
    if v.iter().all(|&e| e == 0.0) {
        v[rng.random_range(0..k * k)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|e| *e /= s);
    v
}

/// Multi-start minimization of `f/g` over k-label joint distributions with
/// `g ≥ δ′`, using the certifier's default `δ′`. The result is an estimate
/// only.
pub fn estimate_mu_k(k: usize, starts: usize, seed: u64) -> Result<KEstimate> {
    estimate_mu_k_with(k, starts, seed, CertifyParams::default().delta_prime)
}

/// As [`estimate_mu_k`] with an explicit floor. For `k ≥ 4` the best
/// `(k−1)` witness, embedded with an empty label, is added as one more start.
pub fn estimate_mu_k_with(k: usize, starts: usize, seed: u64, delta_prime: f64) -> Result<KEstimate> {
    if !(3..=5).contains(&k) {
        return Err(Error::InvalidInput(format!("k = {k} not in 3..=5")));
    }
    if starts == 0 {
        return Err(Error::InvalidInput("starts must be positive".into()));
    }
    let obj = RatioObjective { k, delta_prime };
    let iters = 400 * (k * k) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut initial: Vec<Vec<f64>> = (0..starts).map(|_| random_start(&mut rng, k)).collect();
    if k > 3 {
        let lower = estimate_mu_k_with(k - 1, starts, seed, delta_prime)?;
        initial.push(lower.argmin.embed().joint);
    }
    let results: Vec<(f64, Vec<f64>)> = initial.into_par_iter().map(|s| local_search(&obj, s, 0.05, iters)).collect();
    let (_, joint) = results.into_iter().reduce(|a, b| if b.0 < a.0 { b } else { a }).expect("at least one start");
    let argmin = KConfiguration { k, joint };
    let min_ratio = k_cut_probability(&argmin) / argmin.g();
    Ok(KEstimate { k, min_ratio, argmin, starts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Configuration;
    use crate::cutratio::cut_probability;

    fn random_table(rng: &mut ChaCha8Rng, k: usize) -> KConfiguration {
        KConfiguration { k, joint: random_start(rng, k) }
    }

    #[test]
    fn k3_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let kc = random_table(&mut rng, 3);
            let mut p = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    p[i][j] = kc.entry(i, j);
                }
            }
            let c = PairJoint { p }.to_config();
            assert!((k_cut_probability(&kc) - cut_probability(&c)).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_preserves_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let kc = random_table(&mut rng, 3);
            let e = kc.embed();
            assert!((k_cut_probability(&kc) - k_cut_probability(&e)).abs() < 1e-10);
            assert!((k_cut_probability(&e) - k_cut_probability(&e.embed())).abs() < 1e-10);
            assert_eq!(kc.g(), e.g());
        }
    }

    #[test]
    fn identical_vertices_never_separate() {
        let kc = KConfiguration::identical(&[0.1, 0.2, 0.3, 0.4]);
        assert!(k_cut_probability(&kc) < 1e-12);
        assert_eq!(k_mc_cut_probability(&kc, 5000, 1).0, 0.0);
    }

    #[test]
    fn simulation_agrees_for_k4() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kc = random_table(&mut rng, 4);
        let (est, se) = k_mc_cut_probability(&kc, 200_000, 5);
        assert!((est - k_cut_probability(&kc)).abs() <= 4.0 * se);
    }

    #[test]
    fn embedded_worst_configuration() {
        let c = Configuration::from_alpha([0.4146, 0.0657, 0.5197], [0.0657, 0.4146, 0.5197], [0.0, 0.0, 0.0394]);
        let kc = KConfiguration::from_pair_joint(&PairJoint::from_config(&c).unwrap()).embed();
        let (est, se) = k_mc_cut_probability(&kc, 200_000, 9);
        assert!((est - k_cut_probability(&kc)).abs() <= 4.0 * se);
        assert!((k_cut_probability(&kc) / kc.g() - 0.8192).abs() < 2e-3);
    }

    #[test]
    fn simplex_projection() {
        let p = project_to_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = project_to_simplex(&[2.0, 0.0, -1.0]);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        let p = project_to_simplex(&[0.2, 0.3, 0.5]);
        assert!((p[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_k() {
        assert!(estimate_mu_k(2, 10, 0).is_err());
        assert!(KConfiguration::new(3, vec![0.5; 9]).is_err());
    }
}
