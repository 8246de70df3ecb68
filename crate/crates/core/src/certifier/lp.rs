//! Dense two-phase simplex over a bounded box, with a posteriori verification
//! of dual multipliers. The simplex only proposes multipliers; soundness rests
//! on [`LinearSystem::farkas_margin`] and [`LinearSystem::objective_lower_bound`],
//! which re-check them against the original rows and the box.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coef: Vec<f64>,
    pub rhs: f64,
    pub kind: RowKind,
}

/// Rows `aᵀx ≤ b` or `aᵀx = b` over variables with box bounds `lo ≤ x ≤ hi`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub n: usize,
    pub rows: Vec<Row>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    /// Phase 1 ended with positive infeasibility; multipliers for the original rows.
    Infeasible(Vec<f64>),
    /// Optimal value of the requested minimization and row multipliers.
    Optimal { value: f64, multipliers: Vec<f64> },
    /// Iteration cap or numerical breakdown.
    Failed,
}

const PIV_TOL: f64 = 1e-9;
const MAX_ITER: usize = 5000;

struct Tableau {
    m: usize,
    width: usize,
    /// `m` constraint rows followed by the reduced-cost row; rhs in the last column.
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width + c]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.t[r * w + c];
        let inv = 1.0 / p;
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v *= inv;
        }
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (v, &q) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * q;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes with the reduced-cost row already set; columns `>= allowed`
    /// never enter. Returns false on failure.
    fn run(&mut self, allowed: usize) -> bool {
        let m = self.m;
        let rhs = self.width - 1;
        for iter in 0..MAX_ITER {
            let bland = iter > 200;
            let mut enter = None;
            let mut best = -PIV_TOL;
            for c in 0..allowed {
                let d = self.at(m, c);
                if d < best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = enter else { return true };
            let mut leave = None;
            let mut ratio = f64::INFINITY;
            for r in 0..m {
                let a = self.at(r, c);
                if a > PIV_TOL {
                    let q = self.at(r, rhs) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => q < ratio - 1e-12 || (q <= ratio + 1e-12 && self.basis[r] < self.basis[l]),
                    };
                    if better {
                        ratio = q;
                        leave = Some(r);
                    }
                }
            }
            let Some(r) = leave else { return false };
            self.pivot(r, c);
        }
        false
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let (m, w) = (self.m, self.width);
        for c in 0..w {
            let mut d = if c < cost.len() { cost[c] } else { 0.0 };
            for r in 0..m {
                d -= cost[self.basis[r]] * self.at(r, c);
            }
            self.t[m * w + c] = d;
        }
    }
}

impl LinearSystem {
    pub fn new(n: usize, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { n, rows: Vec::new(), lo, hi }
    }

    pub fn le(&mut self, coef: Vec<f64>, rhs: f64) {
        self.rows.push(Row { coef, rhs, kind: RowKind::Le });
    }

    pub fn eq(&mut self, coef: Vec<f64>, rhs: f64) {
        self.rows.push(Row { coef, rhs, kind: RowKind::Eq });
    }

    /// Phase 1, then (when feasible and `objective` is given) phase 2
    /// minimizing `objectiveᵀx`.
    pub fn solve(&self, objective: Option<&[f64]>) -> LpStatus {
        if self.lo.iter().zip(&self.hi).any(|(l, h)| l > h) {
            return LpStatus::Failed;
        }
        let free: Vec<usize> = (0..self.n).filter(|&j| self.hi[j] > self.lo[j]).collect();
        let nf = free.len();
        let m0 = self.rows.len();
        let m = m0 + nf;
        // Column layout: free structurals, one slack per Le row, artificials.
        let mut slack_of = vec![usize::MAX; m];
        let mut ncol = nf;
        for (i, row) in self.rows.iter().enumerate() {
            if row.kind == RowKind::Le {
                slack_of[i] = ncol;
                ncol += 1;
            }
        }
        for i in m0..m {
            slack_of[i] = ncol;
            ncol += 1;
        }
        let n_real = ncol;
        let mut rhs = vec![0.0; m];
        let mut sigma = vec![1.0; m];
        for (i, row) in self.rows.iter().enumerate() {
            let mut b = row.rhs;
            for j in 0..self.n {
                b -= row.coef[j] * self.lo[j];
            }
            rhs[i] = b;
        }
        for (k, &j) in free.iter().enumerate() {
            rhs[m0 + k] = self.hi[j] - self.lo[j];
        }
        let mut art_of = vec![usize::MAX; m];
        for i in 0..m {
            if rhs[i] < 0.0 {
                sigma[i] = -1.0;
            }
            let is_eq = i < m0 && self.rows[i].kind == RowKind::Eq;
            if is_eq || sigma[i] < 0.0 {
                art_of[i] = ncol;
                ncol += 1;
            }
        }
        let width = ncol + 1;
        let mut tab = Tableau { m, width, t: vec![0.0; (m + 1) * width], basis: vec![0; m] };
        for i in 0..m {
            let s = sigma[i];
            let base = i * width;
            if i < m0 {
                for (k, &j) in free.iter().enumerate() {
                    tab.t[base + k] = s * self.rows[i].coef[j];
                }
            } else {
                tab.t[base + (i - m0)] = s;
            }
            if slack_of[i] != usize::MAX {
                tab.t[base + slack_of[i]] = s;
            }
            if art_of[i] != usize::MAX {
                tab.t[base + art_of[i]] = 1.0;
                tab.basis[i] = art_of[i];
            } else {
                tab.basis[i] = slack_of[i];
            }
            tab.t[base + ncol] = s * rhs[i];
        }
        let id_col: Vec<usize> = tab.basis.clone();

        let mut cost1 = vec![0.0; ncol];
        for &a in art_of.iter().filter(|&&a| a != usize::MAX) {
            cost1[a] = 1.0;
        }
        tab.set_costs(&cost1);
        if !tab.run(ncol) {
            return LpStatus::Failed;
        }
        let infeas = -tab.at(m, ncol);
        let duals = |tab: &Tableau, cost: &[f64]| -> Vec<f64> {
            (0..m0).map(|i| -sigma[i] * (cost[id_col[i]] - tab.at(m, id_col[i]))).collect()
        };
        if infeas > 1e-9 {
            return LpStatus::Infeasible(duals(&tab, &cost1));
        }
        let Some(obj) = objective else {
            return LpStatus::Optimal { value: 0.0, multipliers: vec![0.0; m0] };
        };
        for r in 0..m {
            if tab.basis[r] >= n_real {
                if let Some(c) = (0..n_real).find(|&c| tab.at(r, c).abs() > PIV_TOL) {
                    tab.pivot(r, c);
                }
            }
        }
        let mut cost2 = vec![0.0; ncol];
        for (k, &j) in free.iter().enumerate() {
            cost2[k] = obj[j];
        }
        tab.set_costs(&cost2);
        if !tab.run(n_real) {
            return LpStatus::Failed;
        }
        let constant: f64 = (0..self.n).map(|j| obj[j] * self.lo[j]).sum();
        LpStatus::Optimal { value: constant - tab.at(m, ncol), multipliers: duals(&tab, &cost2) }
    }

    /// Combines rows with multipliers `λ` (negative entries on `≤` rows are
    /// dropped) into `rᵀx`, `β`, and a floating-point error allowance.
    fn combine(&self, lambda: &[f64], base: Option<&[f64]>) -> (Vec<f64>, f64, f64, f64) {
        let mut r: Vec<f64> = base.map_or_else(|| vec![0.0; self.n], <[f64]>::to_vec);
        let mut beta = 0.0;
        let mut err = 0.0;
        let mut norm = 0.0;
        let scale: Vec<f64> = (0..self.n).map(|j| self.lo[j].abs().max(self.hi[j].abs())).collect();
        for (row, &l) in self.rows.iter().zip(lambda) {
            let l = if row.kind == RowKind::Le { l.max(0.0) } else { l };
            if l == 0.0 || !l.is_finite() {
                continue;
            }
            norm += l.abs();
            beta += l * row.rhs;
            let mut mag = row.rhs.abs();
            for j in 0..self.n {
                r[j] += l * row.coef[j];
                mag += row.coef[j].abs() * scale[j];
            }
            err += l.abs() * mag;
        }
        (r, beta, err * 64.0 * f64::EPSILON, norm)
    }

    fn box_min(&self, r: &[f64]) -> f64 {
        (0..self.n).map(|j| if r[j] >= 0.0 { r[j] * self.lo[j] } else { r[j] * self.hi[j] }).sum()
    }

    /// Normalized slack by which `λ` proves the system empty on the box:
    /// `(min_box (Aᵀλ)ᵀx − λᵀb − err) / ‖λ‖₁`. Positive means infeasible.
    pub fn farkas_margin(&self, lambda: &[f64]) -> f64 {
        let (r, beta, err, norm) = self.combine(lambda, None);
        if norm == 0.0 {
            return f64::NEG_INFINITY;
        }
        let min = self.box_min(&r);
        let err = err + 64.0 * f64::EPSILON * (min.abs() + beta.abs());
        (min - beta - err) / norm
    }

    /// Rigorous lower bound on `min cᵀx` over the system, valid for any `λ`.
    pub fn objective_lower_bound(&self, c: &[f64], lambda: &[f64]) -> f64 {
        let (r, beta, err, _) = self.combine(lambda, Some(c));
        let min = self.box_min(&r);
        min - beta - err - 64.0 * f64::EPSILON * (min.abs() + beta.abs())
    }

    /// Largest violation of the rows and bounds at a point.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for j in 0..self.n {
            v = v.max(self.lo[j] - x[j]).max(x[j] - self.hi[j]);
        }
        for row in &self.rows {
            let lhs: f64 = row.coef.iter().zip(x).map(|(a, b)| a * b).sum();
            let d = lhs - row.rhs;
            v = v.max(if row.kind == RowKind::Eq { d.abs() } else { d });
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_infeasible_system_has_certificate() {
        // x + y ≥ 3 with x, y ∈ [0, 1].
        let mut s = LinearSystem::new(2, vec![0.0; 2], vec![1.0; 2]);
        s.le(vec![-1.0, -1.0], -3.0);
        match s.solve(None) {
            LpStatus::Infeasible(l) => assert!(s.farkas_margin(&l) > 0.4, "{}", s.farkas_margin(&l)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equality_infeasibility() {
        let mut s = LinearSystem::new(3, vec![0.0; 3], vec![1.0; 3]);
        s.eq(vec![1.0, 1.0, 1.0], 1.0);
        s.le(vec![-1.0, 0.0, 0.0], -0.6);
        s.le(vec![0.0, -1.0, 0.0], -0.6);
        let LpStatus::Infeasible(l) = s.solve(None) else { panic!() };
        assert!(s.farkas_margin(&l) > 0.0);
    }

    #[test]
    fn optimum_and_dual_bound() {
        // min -x - 2y s.t. x + y ≤ 1.5, x, y ∈ [0, 1]: optimum -2.5 at (0.5, 1).
        let mut s = LinearSystem::new(2, vec![0.0; 2], vec![1.0; 2]);
        s.le(vec![1.0, 1.0], 1.5);
        let c = [-1.0, -2.0];
        let LpStatus::Optimal { value, multipliers } = s.solve(Some(&c)) else { panic!() };
        assert!((value + 2.5).abs() < 1e-12);
        let lb = s.objective_lower_bound(&c, &multipliers);
        assert!(lb <= value && lb > value - 1e-9, "{lb}");
        assert!(s.objective_lower_bound(&c, &[0.0]) <= value);
    }

    #[test]
    fn fixed_variables_and_shifted_bounds() {
        let mut s = LinearSystem::new(3, vec![0.2, 0.3, -1.0], vec![0.2, 0.9, 1.0]);
        s.eq(vec![1.0, 1.0, 0.0], 1.0);
        s.le(vec![0.0, 1.0, 1.0], 0.5);
        let c = [0.0, 0.0, -1.0];
        let LpStatus::Optimal { value, multipliers } = s.solve(Some(&c)) else { panic!() };
        assert!((value - 0.3).abs() < 1e-12, "{value}");
        assert!(s.objective_lower_bound(&c, &multipliers) > value - 1e-9);
    }

    #[test]
    fn random_systems_agree_with_sampling() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let (mut certified, mut optimal) = (0, 0);
        for _ in 0..300 {
            let n = rng.random_range(2..6);
            let mut s = LinearSystem::new(n, vec![-1.0; n], vec![1.0; n]);
            for _ in 0..rng.random_range(1..8) {
                let coef: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                s.le(coef, rng.random_range(-1.0..0.5));
            }
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            match s.solve(Some(&c)) {
                LpStatus::Infeasible(l) => {
                    let margin = s.farkas_margin(&l);
                    certified += usize::from(margin > 0.0);
                    for _ in 0..200 {
                        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                        assert!(margin <= 0.0 || s.max_violation(&x) > 0.0);
                    }
                }
                LpStatus::Optimal { value, multipliers } => {
                    optimal += 1;
                    let lb = s.objective_lower_bound(&c, &multipliers);
                    assert!(lb <= value + 1e-12 && lb > value - 1e-7, "{lb} {value}");
                    for _ in 0..200 {
                        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                        if s.max_violation(&x) <= 0.0 {
                            let v: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
                            assert!(v >= lb);
                        }
                    }
                }
                LpStatus::Failed => panic!("failed"),
            }
        }
        assert!(certified > 20 && optimal > 20, "{certified} {optimal}");
    }
}
