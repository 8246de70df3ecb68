//! Edge configurations: the twelve numbers describing the SDP geometry of one
//! edge, their linear feasibility characterization, the symmetry group used to
//! canonicalize them, and explicit vector realizations.

use std::fmt;

use crate::error::{Error, Result};

/// Uniform tolerance for feasibility and invariant checks.
pub const FEAS_TOL: f64 = 1e-9;

/// `(x, w, α, t)` for an edge `(u, v)`: marginals of `u`, marginals of `v`,
/// same-cluster joint probabilities, and z-vector correlations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Configuration {
    pub x: [f64; 3],
    pub w: [f64; 3],
    pub alpha: [f64; 3],
    pub t: [f64; 3],
}

#[inline]
fn radical(x: f64, w: f64) -> f64 {
    ((x - x * x) * (w - w * w)).max(0.0).sqrt()
}

/// `αᵢ = xᵢwᵢ + tᵢ·√((xᵢ−xᵢ²)(wᵢ−wᵢ²))`.
pub fn alpha_from_t(x: [f64; 3], w: [f64; 3], t: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| x[i] * w[i] + t[i] * radical(x[i], w[i]))
}

/// Inverse of [`alpha_from_t`], clamped to `[−1, 1]`; `tᵢ = 0` when the
/// radical vanishes.
pub fn t_from_alpha(x: [f64; 3], w: [f64; 3], alpha: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| {
        let r = radical(x[i], w[i]);
        if r <= 0.0 {
            0.0
        } else {
            ((alpha[i] - x[i] * w[i]) / r).clamp(-1.0, 1.0)
        }
    })
}

impl Configuration {
    pub fn from_alpha(x: [f64; 3], w: [f64; 3], alpha: [f64; 3]) -> Self {
        Self { x, w, alpha, t: t_from_alpha(x, w, alpha) }
    }

    pub fn from_t(x: [f64; 3], w: [f64; 3], t: [f64; 3]) -> Self {
        Self { x, w, alpha: alpha_from_t(x, w, t), t }
    }

    /// The configuration of the two endpoints placed deterministically
    /// in the same way: `x = w`, `α = x`, `t = 1`.
    pub fn identical(x: [f64; 3]) -> Self {
        Self { x, w: x, alpha: x, t: [1.0; 3] }
    }

    pub fn as_array(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[0..3].copy_from_slice(&self.x);
        out[3..6].copy_from_slice(&self.w);
        out[6..9].copy_from_slice(&self.alpha);
        out[9..12].copy_from_slice(&self.t);
        out
    }

    pub fn from_array(a: [f64; 12]) -> Self {
        Self { x: [a[0], a[1], a[2]], w: [a[3], a[4], a[5]], alpha: [a[6], a[7], a[8]], t: [a[9], a[10], a[11]] }
    }

    /// Checks the linear characterization of feasible configurations:
    /// simplex sums, `0 ≤ αᵢ ≤ min(xᵢ, wᵢ)`, and the projected off-diagonal
    /// inequalities.
    pub fn is_feasible(&self) -> FeasibilityReport {
        self.feasibility_with_tol(FEAS_TOL)
    }

    /// Allocation-free form of [`Self::is_feasible`] at a given tolerance.
    pub fn feasible_within(&self, tol: f64) -> bool {
        let (x, w, a) = (self.x, self.w, self.alpha);
        let unit = -tol..=1.0 + tol;
        let ranges = (0..3).all(|i| {
            unit.contains(&x[i])
                && unit.contains(&w[i])
                && unit.contains(&a[i])
                && (-1.0 - tol..=1.0 + tol).contains(&self.t[i])
                && a[i] <= x[i].min(w[i]) + tol
        });
        let sums = (x.iter().sum::<f64>() - 1.0).abs() <= tol && (w.iter().sum::<f64>() - 1.0).abs() <= tol;
        let (lo, hi) = beta6_interval(self);
        let lo = lo.into_iter().fold(f64::NEG_INFINITY, f64::max);
        let hi = hi.into_iter().fold(f64::INFINITY, f64::min);
        ranges && sums && lo <= hi + tol
    }

    pub fn feasibility_with_tol(&self, tol: f64) -> FeasibilityReport {
        let mut v = Vec::new();
        let (x, w, a) = (self.x, self.w, self.alpha);
        for i in 0..3 {
            for (name, val) in [("x", x[i]), ("w", w[i]), ("alpha", a[i])] {
                if !(-tol..=1.0 + tol).contains(&val) {
                    v.push(format!("{name}{} = {val} outside [0,1]", i + 1));
                }
            }
            if !(-1.0 - tol..=1.0 + tol).contains(&self.t[i]) {
                v.push(format!("t{} = {} outside [-1,1]", i + 1, self.t[i]));
            }
        }
        let sx: f64 = x.iter().sum();
        let sw: f64 = w.iter().sum();
        if (sx - 1.0).abs() > tol {
            v.push(format!("x sums to {sx}"));
        }
        if (sw - 1.0).abs() > tol {
            v.push(format!("w sums to {sw}"));
        }
        for i in 0..3 {
            if a[i] > x[i].min(w[i]) + tol {
                v.push(format!("alpha{} = {} exceeds min(x, w) = {}", i + 1, a[i], x[i].min(w[i])));
            }
        }
        let (lo, hi) = beta6_interval(self);
        for (k, l) in lo.iter().enumerate() {
            for (j, h) in hi.iter().enumerate() {
                if *l > *h + tol {
                    v.push(format!("off-diagonal bound: lower[{k}] = {l} > upper[{j}] = {h}"));
                }
            }
        }
        FeasibilityReport { violations: v }
    }

    /// Deviation of the stored `α` from the value implied by `t` through the
    /// z-vector inner product identity, over clusters with fractional marginals.
    pub fn consistency_error(&self) -> f64 {
        let implied = alpha_from_t(self.x, self.w, self.t);
        (0..3)
            .filter(|&i| radical(self.x[i], self.w[i]) > 0.0)
            .map(|i| (implied[i] - self.alpha[i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn in_polytope_s(&self, tol: f64) -> bool {
        let (x, w) = (self.x, self.w);
        let m = x[1].min(x[2]).min(w[0]).min(w[1]).min(w[2]);
        x[0] <= m + tol && x[1] <= x[2] + tol
    }

    pub fn apply(&self, s: Symmetry) -> Self {
        let p = s.perm;
        let permute = |v: [f64; 3]| [v[p[0]], v[p[1]], v[p[2]]];
        let (x, w) = if s.swap { (self.w, self.x) } else { (self.x, self.w) };
        Self { x: permute(x), w: permute(w), alpha: permute(self.alpha), t: permute(self.t) }
    }

    /// Maps a configuration into the canonical polytope
    /// `x₁ ≤ min(x₂, x₃, w₁, w₂, w₃), x₂ ≤ x₃`, choosing the lexicographically
    /// smallest admissible image among the twelve symmetries.
    pub fn canonicalize(&self) -> Result<Self> {
        Symmetry::all()
            .map(|s| self.apply(s))
            .filter(|c| c.in_polytope_s(0.0))
            .min_by(|a, b| {
                a.as_array()
                    .iter()
                    .zip(b.as_array().iter())
                    .map(|(p, q)| p.total_cmp(q))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or(Error::NoCanonicalImage)
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self> {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|e| Error::parse(line_no, format!("{tok:?}: {e}"))))
            .collect::<Result<_>>()?;
        let arr: [f64; 12] = vals
            .try_into()
            .map_err(|v: Vec<f64>| Error::parse(line_no, format!("expected 12 numbers, found {}", v.len())))?;
        Ok(Self::from_array(arr))
    }

    /// Parses the line-oriented configuration format; `#` lines and blank
    /// lines are skipped.
    pub fn parse_many(text: &str) -> Result<Vec<Self>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| {
                let l = l.trim();
                !l.is_empty() && !l.starts_with('#')
            })
            .map(|(i, l)| Self::parse_line(l, i + 1))
            .collect()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.as_array();
        for (i, v) in a.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Lower and upper bounds on the free off-diagonal entry `y_u³·y_v²` left
/// after eliminating the other five off-diagonal inner products.
fn beta6_interval(c: &Configuration) -> ([f64; 3], [f64; 3]) {
    let (x, w, a) = (c.x, c.w, c.alpha);
    let lo = [0.0, x[2] - a[2] + a[0] - w[0], w[1] - a[1] + a[0] - x[0]];
    let hi = [w[1] - a[1], x[2] - a[2], x[1] + x[2] - w[0] + a[0] - a[1] - a[2]];
    (lo, hi)
}

#[derive(Debug, Clone, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<String>,
}

impl FeasibilityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A simultaneous relabeling of clusters, optionally composed with swapping
/// the roles of the two endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Symmetry {
    pub perm: [usize; 3],
    pub swap: bool,
}

pub const PERMUTATIONS_3: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

impl Symmetry {
    pub fn all() -> impl Iterator<Item = Symmetry> {
        [false, true].into_iter().flat_map(|swap| PERMUTATIONS_3.into_iter().map(move |perm| Symmetry { perm, swap }))
    }
}

/// Joint distribution of the cluster labels of two vertices:
/// `p[i][j] = Pr[X_u = i, X_v = j] = y_uⁱ·y_vʲ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairJoint {
    pub p: [[f64; 3]; 3],
}

impl PairJoint {
    pub fn new(p: [[f64; 3]; 3]) -> Result<Self> {
        let j = Self { p };
        let v = j.violations(FEAS_TOL);
        if v.is_empty() {
            Ok(j)
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn violations(&self, tol: f64) -> Vec<String> {
        let mut v = Vec::new();
        for (i, row) in self.p.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                if e < -tol || !e.is_finite() {
                    v.push(format!("p[{i}][{j}] = {e} is negative"));
                }
            }
        }
        let total: f64 = self.p.iter().flatten().sum();
        if (total - 1.0).abs() > tol {
            v.push(format!("table sums to {total}"));
        }
        v
    }

    pub fn row_sums(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.p[i].iter().sum())
    }

    pub fn col_sums(&self) -> [f64; 3] {
        std::array::from_fn(|j| self.p.iter().map(|r| r[j]).sum())
    }

    /// Reads off `x`, `w`, `α` and derives `t`.
    pub fn to_config(&self) -> Configuration {
        let alpha = [self.p[0][0], self.p[1][1], self.p[2][2]];
        Configuration::from_alpha(self.row_sums(), self.col_sums(), alpha)
    }

    /// Back-substitutes the off-diagonal entries of a feasible configuration,
    /// placing the single free entry at the midpoint of its admissible range.
    pub fn from_config(c: &Configuration) -> Result<Self> {
        let report = c.is_feasible();
        if !report.is_ok() {
            return Err(Error::Infeasible(report.violations));
        }
        let (x, w, a) = (c.x, c.w, c.alpha);
        let (lo, hi) = beta6_interval(c);
        let lo = lo.into_iter().fold(f64::NEG_INFINITY, f64::max);
        let hi = hi.into_iter().fold(f64::INFINITY, f64::min);
        let b6 = 0.5 * (lo + hi.max(lo));
        let b5 = x[2] - b6 - a[2];
        let b1 = w[1] - a[1] - b6;
        let b3 = w[0] - a[0] - b5;
        let b2 = x[0] - a[0] - b1;
        let b4 = x[1] - a[1] - b3;
        let mut p = [[a[0], b1, b2], [b3, a[1], b4], [b5, b6, a[2]]];
        for e in p.iter_mut().flatten() {
            if *e < -FEAS_TOL {
                return Err(Error::Infeasible(vec![format!("reconstructed entry {e} < 0")]));
            }
            *e = e.max(0.0);
        }
        Ok(Self { p })
    }

    /// Explicit vectors in dimension 9 (one axis per label pair) whose inner
    /// products reproduce the table.
    pub fn realize(&self) -> Realization {
        let dim = 9;
        let idx = |i: usize, j: usize| 3 * i + j;
        let mut y_empty = vec![0.0; dim];
        let mut yu: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; dim]);
        let mut yv: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; dim]);
        for i in 0..3 {
            for j in 0..3 {
                let s = self.p[i][j].max(0.0).sqrt();
                y_empty[idx(i, j)] = s;
                yu[i][idx(i, j)] = s;
                yv[j][idx(i, j)] = s;
            }
        }
        Realization { dimension: dim, y_empty, yu, yv }
    }
}

/// Seven vectors realizing a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub dimension: usize,
    pub y_empty: Vec<f64>,
    pub yu: [Vec<f64>; 3],
    pub yv: [Vec<f64>; 3],
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

impl Realization {
    /// Vectors in the order `y_∅, y_u¹, y_u², y_u³, y_v¹, y_v², y_v³`.
    pub fn vectors(&self) -> [&[f64]; 7] {
        [&self.y_empty, &self.yu[0], &self.yu[1], &self.yu[2], &self.yv[0], &self.yv[1], &self.yv[2]]
    }

    pub fn gram(&self) -> [[f64; 7]; 7] {
        let v = self.vectors();
        std::array::from_fn(|i| std::array::from_fn(|j| dot(v[i], v[j])))
    }

    /// SDP constraints restricted to the two vertices.
    pub fn violations(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let g = self.gram();
        if (g[0][0] - 1.0).abs() > tol {
            out.push(format!("|y_empty|^2 = {}", g[0][0]));
        }
        for (name, base) in [("u", 1), ("v", 4)] {
            let mut total = 0.0;
            for i in 0..3 {
                let a = base + i;
                total += g[a][a];
                if (g[a][a] - g[0][a]).abs() > tol {
                    out.push(format!("|y_{name}^{}|^2 != y_empty . y_{name}^{}", i + 1, i + 1));
                }
                for j in (i + 1)..3 {
                    if g[a][base + j].abs() > tol {
                        out.push(format!("y_{name}^{} . y_{name}^{} = {}", i + 1, j + 1, g[a][base + j]));
                    }
                }
            }
            if (total - 1.0).abs() > tol {
                out.push(format!("marginals of {name} sum to {total}"));
            }
        }
        for (i, row) in g.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                if e < -tol {
                    out.push(format!("negative inner product g[{i}][{j}] = {e}"));
                }
            }
        }
        out
    }

    pub fn to_config(&self) -> Configuration {
        let g = self.gram();
        let x = [g[1][1], g[2][2], g[3][3]];
        let w = [g[4][4], g[5][5], g[6][6]];
        let alpha = [g[1][4], g[2][5], g[3][6]];
        Configuration::from_alpha(x, w, alpha)
    }
}
