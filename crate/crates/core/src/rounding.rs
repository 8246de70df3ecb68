//! Vector solutions of the relaxation, the permutation-plus-two-hyperplane
//! rounding, and exact rebalancing of a nearly balanced partition.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{dot, Realization, PERMUTATIONS_3};
use crate::cutratio::conditional;
use crate::error::{Error, Result};
use crate::gaussian::phi_inv;

/// Tolerance for ingesting vector solutions.
pub const SOLUTION_TOL: f64 = 1e-6;

/// `y_∅` and per-vertex cluster vectors `y_v¹, y_v², y_v³`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSolution {
    pub n: usize,
    pub dimension: usize,
    pub y_empty: Vec<f64>,
    y: Vec<f64>,
}

impl VectorSolution {
    /// `vectors[v][i]` is `y_vⁱ`. Only shapes are checked; see [`Self::validate`].
    pub fn new(y_empty: Vec<f64>, vectors: Vec<[Vec<f64>; 3]>) -> Result<Self> {
        let d = y_empty.len();
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        let mut y = Vec::with_capacity(vectors.len() * 3 * d);
        for (v, vs) in vectors.iter().enumerate() {
            for (i, vec) in vs.iter().enumerate() {
                if vec.len() != d {
                    return Err(Error::InvalidInput(format!(
                        "vector y_{v}^{} has length {}, expected {d}",
                        i + 1,
                        vec.len()
                    )));
                }
                y.extend_from_slice(vec);
            }
        }
        Ok(Self { n: vectors.len(), dimension: d, y_empty, y })
    }

    /// The two-vertex solution given by an edge realization.
    pub fn from_realization(r: &Realization) -> Self {
        let vectors = vec![r.yu.clone(), r.yv.clone()];
        Self::new(r.y_empty.clone(), vectors).expect("realization vectors share one dimension")
    }

    pub fn vector(&self, v: usize, i: usize) -> &[f64] {
        let d = self.dimension;
        &self.y[(3 * v + i) * d..(3 * v + i + 1) * d]
    }

    pub fn marginal(&self, v: usize, i: usize) -> f64 {
        let y = self.vector(v, i);
        dot(y, y)
    }

    pub fn marginals(&self, v: usize) -> [f64; 3] {
        std::array::from_fn(|i| self.marginal(v, i))
    }

    /// `Σᵢ y_uⁱ·y_vⁱ`.
    pub fn same_cluster(&self, u: usize, v: usize) -> f64 {
        (0..3).map(|i| dot(self.vector(u, i), self.vector(v, i))).sum()
    }

    /// Every violated SDP constraint, each described once per offending entry.
    /// `balance` toggles the cluster-size constraint.
    pub fn violations(&self, tol: f64, balance: bool) -> Vec<String> {
        let mut out = Vec::new();
        let e = &self.y_empty;
        let ne = dot(e, e);
        if (ne - 1.0).abs() > tol {
            out.push(format!("|y_empty|^2 = {ne}"));
        }
        let mut col = [0.0; 3];
        for v in 0..self.n {
            let mut total = 0.0;
            for i in 0..3 {
                let m = self.marginal(v, i);
                col[i] += m;
                total += m;
                let p = dot(e, self.vector(v, i));
                if (m - p).abs() > tol {
                    out.push(format!("vertex {v} cluster {}: |y|^2 = {m} but y_empty.y = {p}", i + 1));
                }
                for j in (i + 1)..3 {
                    let o = dot(self.vector(v, i), self.vector(v, j));
                    if o.abs() > tol {
                        out.push(format!("vertex {v}: clusters {} and {} not orthogonal ({o})", i + 1, j + 1));
                    }
                }
            }
            if (total - 1.0).abs() > tol {
                out.push(format!("vertex {v}: marginals sum to {total}"));
            }
        }
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                for i in 0..3 {
                    for j in 0..3 {
                        let p = dot(self.vector(u, i), self.vector(v, j));
                        if p < -tol {
                            out.push(format!("y_{u}^{} . y_{v}^{} = {p} < 0", i + 1, j + 1));
                        }
                    }
                }
            }
        }
        if balance {
            let target = self.n as f64 / 3.0;
            for (i, c) in col.iter().enumerate() {
                if (c - target).abs() > tol * (1.0 + target) {
                    out.push(format!("cluster {} has total marginal {c}, expected {target}", i + 1));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations(SOLUTION_TOL, true);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines =
            text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let nums = |(no, line): (usize, &str)| -> Result<Vec<f64>> {
            line.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::parse(no + 1, format!("{t:?}: {e}"))))
                .collect()
        };
        let (hno, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Error::parse(hno + 1, format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        let [n, d] = h[..] else { return Err(Error::parse(hno + 1, "expected \"n d\"")) };
        let mut row = |what: &str| -> Result<Vec<f64>> {
            let l = lines.next().ok_or_else(|| Error::parse(0, format!("missing {what}")))?;
            let no = l.0 + 1;
            let r = nums(l)?;
            if r.len() != d {
                return Err(Error::parse(no, format!("{what}: expected {d} numbers, found {}", r.len())));
            }
            Ok(r)
        };
        let y_empty = row("y_empty")?;
        let mut vectors = Vec::with_capacity(n);
        for v in 0..n {
            let a = row(&format!("vertex {v}"))?;
            let b = row(&format!("vertex {v}"))?;
            let c = row(&format!("vertex {v}"))?;
            vectors.push([a, b, c]);
        }
        if let Some((no, _)) = lines.next() {
            return Err(Error::parse(no + 1, "trailing data"));
        }
        Self::new(y_empty, vectors)
    }

    pub fn to_text(&self) -> String {
        let fmt_row = |r: &[f64]| r.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(" ");
        let mut s = format!("{} {}\n{}\n", self.n, self.dimension, fmt_row(&self.y_empty));
        for v in 0..self.n {
            for i in 0..3 {
                s.push_str(&fmt_row(self.vector(v, i)));
                s.push('\n');
            }
        }
        s
    }
}

/// Labels in `0..k` per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    pub k: usize,
    pub labels: Vec<usize>,
}

impl Partition {
    pub fn new(k: usize, labels: Vec<usize>) -> Result<Self> {
        if let Some((v, l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::InvalidInput(format!("vertex {v} has label {l} >= {k}")));
        }
        Ok(Self { k, labels })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    pub fn is_balanced(&self) -> bool {
        let n = self.n();
        n.is_multiple_of(self.k) && self.sizes().iter().all(|&s| s * self.k == n)
    }

    /// Every part within `(1 ± ε)·n/k`.
    pub fn is_eps_unbalanced(&self, eps: f64) -> bool {
        let target = self.n() as f64 / self.k as f64;
        self.sizes()
            .iter()
            .all(|&s| (s as f64) >= target * (1.0 - eps) - 1e-12 && (s as f64) <= target * (1.0 + eps) + 1e-12)
    }

    /// Largest relative deviation of a part size from `n/k`.
    pub fn imbalance(&self) -> f64 {
        let target = self.n() as f64 / self.k as f64;
        self.sizes().iter().map(|&s| (s as f64 - target).abs() / target).fold(0.0, f64::max)
    }
}

/// Choices made by one rounding pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundingTrace {
    pub permutation: [usize; 3],
    /// Per vertex, the stage-1 and stage-2 thresholds.
    pub thresholds: Vec<[f64; 2]>,
    pub in_s1: Vec<bool>,
    pub in_s2: Vec<bool>,
}

/// Unit component of `y_vⁱ` orthogonal to `y_∅`. For integral marginals,
/// the first canonical direction not parallel to `y_∅`, orthogonalized
/// against it; in dimension one no such vector exists and zero is returned.
pub fn z_vector(sol: &VectorSolution, v: usize, i: usize) -> Vec<f64> {
    let y = sol.vector(v, i);
    let m = dot(y, y);
    let e = &sol.y_empty;
    let denom = (m - m * m).max(0.0).sqrt();
    if m > 0.0 && m < 1.0 && denom > 1e-12 {
        return y.iter().zip(e).map(|(a, b)| (a - m * b) / denom).collect();
    }
    fallback_direction(e)
}

fn fallback_direction(e: &[f64]) -> Vec<f64> {
    let d = e.len();
    let ee = dot(e, e);
    for k in 0..d {
        let mut z: Vec<f64> = e.iter().map(|b| -e[k] * b / ee).collect();
        z[k] += 1.0;
        let norm = dot(&z, &z).sqrt();
        if norm > 1e-6 {
            z.iter_mut().for_each(|c| *c /= norm);
            return z;
        }
    }
    vec![0.0; d]
}

fn gaussian_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// One pass of the rounding: a uniform permutation, then two Gaussian
/// threshold tests that carve out the first two parts.
pub fn round_once(sol: &VectorSolution, seed: u64) -> (Partition, RoundingTrace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perm = PERMUTATIONS_3[rng.random_range(0..6)];
    let g1 = gaussian_vector(&mut rng, sol.dimension);
    let g2 = gaussian_vector(&mut rng, sol.dimension);
    let [a, b, c] = perm;
    let mut trace = RoundingTrace {
        permutation: perm,
        thresholds: Vec::with_capacity(sol.n),
        in_s1: Vec::with_capacity(sol.n),
        in_s2: Vec::with_capacity(sol.n),
    };
    let mut labels = Vec::with_capacity(sol.n);
    for u in 0..sol.n {
        let ma = sol.marginal(u, a).clamp(0.0, 1.0);
        let mb = conditional(sol.marginal(u, b).clamp(0.0, 1.0), ma);
        let thr = [phi_inv(1.0 - ma), phi_inv(1.0 - mb)];
        let s1 = dot(&z_vector(sol, u, a), &g1) >= thr[0];
        let s2 = dot(&z_vector(sol, u, b), &g2) >= thr[1];
        labels.push(if s1 {
            a
        } else if s2 {
            b
        } else {
            c
        });
        trace.thresholds.push(thr);
        trace.in_s1.push(s1);
        trace.in_s2.push(s2);
    }
    (Partition { k: 3, labels }, trace)
}

/// Moves uniformly random vertices out of oversized parts into undersized
/// ones until every part has exactly `n/k` vertices.
///
/// With two oversized parts this moves a uniform excess subset of each into
/// the single deficient part. With one oversized part it takes a uniform
/// excess subset `S`, sends a uniform subset of `S` of the second deficit's
/// size to the second deficient part, and the rest of `S` to the first.
pub fn rebalance(partition: &Partition, seed: u64) -> Result<Partition> {
    let n = partition.n();
    let k = partition.k;
    if !n.is_multiple_of(k) {
        return Err(Error::InvalidInput(format!("n = {n} is not divisible by {k}")));
    }
    let target = n / k;
    let sizes = partition.sizes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut moved = Vec::new();
    for (part, &s) in sizes.iter().enumerate() {
        if s > target {
            let members: Vec<usize> = (0..n).filter(|&v| partition.labels[v] == part).collect();
            let pick = rand::seq::index::sample(&mut rng, members.len(), s - target);
            moved.extend(pick.into_iter().map(|j| members[j]));
        }
    }
    moved.shuffle(&mut rng);
    let mut labels = partition.labels.clone();
    let mut it = moved.into_iter();
    for (part, &s) in sizes.iter().enumerate() {
        for v in it.by_ref().take(target.saturating_sub(s)) {
            labels[v] = part;
        }
    }
    Ok(Partition { k, labels })
}

/// Result of [`round_pipeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub partition: Partition,
    /// Rounding passes used.
    pub attempts: usize,
    /// No pass was ε-unbalanced; the least unbalanced pass was rebalanced.
    pub exhausted: bool,
}

/// Default number of rounding passes before falling back.
pub const DEFAULT_MAX_ATTEMPTS: usize = 100;

fn sub_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Rounds until the partition is ε-unbalanced (or attempts run out), then
/// rebalances exactly.
pub fn round_pipeline(sol: &VectorSolution, epsilon: f64, max_attempts: usize, seed: u64) -> Result<PipelineOutcome> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon = {epsilon} not in (0,1)")));
    }
    if max_attempts == 0 {
        return Err(Error::InvalidInput("max_attempts must be positive".into()));
    }
    sol.validate()?;
    let mut best: Option<Partition> = None;
    for attempt in 0..max_attempts {
        let (p, _) = round_once(sol, sub_seed(seed, attempt as u64));
        if p.is_eps_unbalanced(epsilon) {
            let partition = rebalance(&p, sub_seed(seed, u64::MAX))?;
            return Ok(PipelineOutcome { partition, attempts: attempt + 1, exhausted: false });
        }
        if best.as_ref().is_none_or(|b| p.imbalance() < b.imbalance()) {
            best = Some(p);
        }
    }
    let partition = rebalance(&best.expect("at least one attempt"), sub_seed(seed, u64::MAX))?;
    Ok(PipelineOutcome { partition, attempts: max_attempts, exhausted: true })
}
