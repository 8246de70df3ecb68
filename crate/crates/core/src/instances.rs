//! Weighted graphs, constructed feasible solutions, the relaxation objective,
//! and an exhaustive Max-3-Section oracle for small graphs.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rounding::{Partition, VectorSolution};

/// Largest vertex count accepted by [`brute_force_opt`].
pub const BRUTE_FORCE_MAX_N: usize = 18;

/// Undirected graph with non-negative weights; edges are stored once with
/// `u < v`, sorted, duplicates merged.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at {u}")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!("edge ({u}, {v}) has weight {w}")));
            }
            *merged.entry((u.min(v), u.max(v))).or_insert(0.0) += w;
        }
        Ok(Self { n, edges: merged.into_iter().map(|((u, v), w)| (u, v, w)).collect() })
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    pub fn cut_value(&self, p: &Partition) -> f64 {
        self.edges.iter().filter(|(u, v, _)| p.labels[*u] != p.labels[*v]).map(|e| e.2).sum()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hno, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::parse(hno + 1, format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        let [n, m] = h[..] else { return Err(Error::parse(hno + 1, "expected \"n m\"")) };
        let mut edges = Vec::with_capacity(m);
        for (no, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let [u, v, w] = toks[..] else {
                return Err(Error::parse(no + 1, format!("expected \"u v w\", found {line:?}")));
            };
            let idx = |t: &str| t.parse::<usize>().map_err(|e| Error::parse(no + 1, format!("{t:?}: {e}")));
            let (u, v) = (idx(u)?, idx(v)?);
            let w: f64 = w.parse().map_err(|e| Error::parse(no + 1, format!("{w:?}: {e}")))?;
            if w < 0.0 {
                return Err(Error::parse(no + 1, format!("negative weight {w}")));
            }
            if u >= n || v >= n || u == v {
                return Err(Error::parse(no + 1, format!("invalid edge ({u}, {v})")));
            }
            edges.push((u, v, w));
        }
        if edges.len() != m {
            return Err(Error::parse(hno + 1, format!("header declares {m} edges, found {}", edges.len())));
        }
        Self::new(n, edges)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.edges.len());
        for (u, v, w) in &self.edges {
            s.push_str(&format!("{u} {v} {w}\n"));
        }
        s
    }
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    Graph::parse(&std::fs::read_to_string(path)?)
}

pub fn save_graph(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, g.to_text())?)
}

pub fn load_solution(path: impl AsRef<Path>) -> Result<VectorSolution> {
    VectorSolution::parse(&std::fs::read_to_string(path)?)
}

pub fn save_solution(s: &VectorSolution, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, s.to_text())?)
}

pub fn complete_graph(n: usize) -> Graph {
    Graph::new(n, (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v, 1.0)))).expect("valid edges")
}

pub fn cycle_graph(n: usize) -> Graph {
    Graph::new(n, (0..n).map(|u| (u, (u + 1) % n, 1.0))).expect("valid edges")
}

/// Erdős–Rényi graph with unit weights.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<_> = (0..n)
        .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
        .filter(|_| rng.random_bool(p))
        .map(|(u, v)| (u, v, 1.0))
        .collect();
    Graph::new(n, edges).expect("valid edges")
}

/// Uniformly random balanced partition into three parts.
pub fn random_balanced_partition(n: usize, seed: u64) -> Partition {
    use rand::seq::SliceRandom;
    let mut labels: Vec<usize> = (0..n).map(|v| v % 3).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Partition { k: 3, labels }
}

/// Each vertex's cluster vector is `y_∅` for its own part and zero otherwise.
pub fn integral_solution(p: &Partition) -> Result<VectorSolution> {
    if p.k != 3 || !p.is_balanced() {
        return Err(Error::InvalidInput(format!("partition sizes {:?} are not balanced", p.sizes())));
    }
    let vectors = p.labels.iter().map(|&l| std::array::from_fn(|i| vec![if i == l { 1.0 } else { 0.0 }])).collect();
    VectorSolution::new(vec![1.0], vectors)
}

/// Eigenvalues below this are treated as round-off and dropped.
const EIG_FLOOR: f64 = 1e-10;

/// Convex combination of integral solutions, factorized from the mixed Gram
/// matrix. Indices: `0` is `y_∅`, `1 + 3v + i` is `y_vⁱ`.
pub fn mixture_solution(partitions: &[Partition], weights: &[f64]) -> Result<VectorSolution> {
    if partitions.is_empty() || partitions.len() != weights.len() {
        return Err(Error::InvalidInput("need one weight per partition and at least one partition".into()));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("weights {weights:?} are not convex coefficients")));
    }
    let n = partitions[0].n();
    for p in partitions {
        if p.n() != n || p.k != 3 || !p.is_balanced() {
            return Err(Error::InvalidInput(format!("partition sizes {:?} are not balanced", p.sizes())));
        }
    }
    let dim = 1 + 3 * n;
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    for (p, &w) in partitions.iter().zip(weights) {
        let mut ind = vec![0usize; n + 1];
        ind[0] = 0;
        for (v, &l) in p.labels.iter().enumerate() {
            ind[v + 1] = 1 + 3 * v + l;
        }
        for &a in &ind {
            for &b in &ind {
                gram[(a, b)] += w;
            }
        }
    }
    let eig = SymmetricEigen::new(gram);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !min.is_finite() || min < -1e-8 {
        return Err(Error::Factorization(format!("mixed Gram matrix has eigenvalue {min}")));
    }
    let keep: Vec<usize> = (0..dim).filter(|&k| eig.eigenvalues[k] > EIG_FLOOR).collect();
    let coords =
        |a: usize| -> Vec<f64> { keep.iter().map(|&k| eig.eigenvectors[(a, k)] * eig.eigenvalues[k].sqrt()).collect() };
    let y_empty = coords(0);
    let vectors = (0..n).map(|v| std::array::from_fn(|i| coords(1 + 3 * v + i))).collect();
    VectorSolution::new(y_empty, vectors)
}

/// `Σ_{(u,v)} w·(1 − Σᵢ y_uⁱ·y_vⁱ)`.
pub fn sdp_objective(g: &Graph, s: &VectorSolution) -> Result<f64> {
    if g.n != s.n {
        return Err(Error::InvalidInput(format!("graph has {} vertices, solution {}", g.n, s.n)));
    }
    Ok(g.edges.iter().map(|&(u, v, w)| w * (1.0 - s.same_cluster(u, v))).sum())
}

fn subsets(pool: &[usize], size: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(pool: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if cur.len() == size {
            visit(cur);
            return;
        }
        let need = size - cur.len();
        for i in start..=pool.len().saturating_sub(need) {
            cur.push(pool[i]);
            rec(pool, size, i + 1, cur, visit);
            cur.pop();
        }
    }
    rec(pool, size, 0, &mut Vec::with_capacity(size), &mut visit);
}

/// Exact Max-3-Section optimum by enumeration. Label symmetry is removed by
/// placing vertex 0 in the first part and the smallest remaining vertex in
/// the second.
pub fn brute_force_opt(g: &Graph) -> Result<(f64, Partition)> {
    let n = g.n;
    if !n.is_multiple_of(3) {
        return Err(Error::InvalidInput(format!("n = {n} is not divisible by 3")));
    }
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::InvalidInput(format!("n = {n} exceeds the enumeration limit {BRUTE_FORCE_MAX_N}")));
    }
    if n == 0 {
        return Ok((0.0, Partition { k: 3, labels: Vec::new() }));
    }
    let m = n / 3;
    let mut adj = vec![vec![0.0; n]; n];
    for &(u, v, w) in &g.edges {
        adj[u][v] += w;
        adj[v][u] += w;
    }
    let internal = |set: &[usize]| -> f64 {
        let mut s = 0.0;
        for (a, &u) in set.iter().enumerate() {
            for &v in &set[a + 1..] {
                s += adj[u][v];
            }
        }
        s
    };
    let total = g.total_weight();
    let mut best = (f64::NEG_INFINITY, vec![0usize; n]);
    let rest: Vec<usize> = (1..n).collect();
    subsets(&rest, m - 1, |a_tail| {
        let mut a = vec![0];
        a.extend_from_slice(a_tail);
        let ia = internal(&a);
        let remaining: Vec<usize> = (1..n).filter(|v| !a.contains(v)).collect();
        let (first, pool) = remaining.split_first().expect("at least two parts remain");
        subsets(pool, m - 1, |b_tail| {
            let mut b = vec![*first];
            b.extend_from_slice(b_tail);
            let c: Vec<usize> = remaining.iter().copied().filter(|v| !b.contains(v)).collect();
            let value = total - ia - internal(&b) - internal(&c);
            if value > best.0 {
                let mut labels = vec![0; n];
                b.iter().for_each(|&v| labels[v] = 1);
                c.iter().for_each(|&v| labels[v] = 2);
                best = (value, labels);
            }
        });
    });
    Ok((best.0, Partition { k: 3, labels: best.1 }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_triangle_and_errors() {
        let g = Graph::parse("3 3\n0 1 1\n1 2 1\n0 2 1\n").unwrap();
        assert_eq!(g.n, 3);
        assert_eq!(g.total_weight(), 3.0);
        let empty = Graph::parse("6 0\n").unwrap();
        assert!(empty.edges.is_empty());
        let sol = integral_solution(&Partition::new(3, vec![0, 1, 2, 0, 1, 2]).unwrap()).unwrap();
        assert_eq!(sdp_objective(&empty, &sol).unwrap(), 0.0);
        assert!(matches!(Graph::parse("3 1\n0 1 -1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Graph::parse("3 2\n0 1 1\n1 x 1\n"), Err(Error::Parse { line: 3, .. })));
        let dup = Graph::parse("3 2\n0 1 1\n1 0 2.5\n").unwrap();
        assert_eq!(dup.edges, vec![(0, 1, 3.5)]);
        assert_eq!(Graph::parse(&dup.to_text()).unwrap(), dup);
    }

    #[test]
    fn integral_objectives() {
        let tri = complete_graph(3);
        let p = Partition::new(3, vec![0, 1, 2]).unwrap();
        let s = integral_solution(&p).unwrap();
        assert!(s.validate().is_ok());
        assert_eq!(sdp_objective(&tri, &s).unwrap(), 3.0);
        let k6 = complete_graph(6);
        let p = Partition::new(3, vec![0, 0, 1, 1, 2, 2]).unwrap();
        assert_eq!(sdp_objective(&k6, &integral_solution(&p).unwrap()).unwrap(), 12.0);
        assert!(integral_solution(&Partition::new(3, vec![0, 0, 1]).unwrap()).is_err());
    }

    #[test]
    fn brute_force_small_cases() {
        assert_eq!(brute_force_opt(&complete_graph(3)).unwrap().0, 3.0);
        assert_eq!(brute_force_opt(&complete_graph(6)).unwrap().0, 12.0);
        let (v, p) = brute_force_opt(&cycle_graph(9)).unwrap();
        assert_eq!(v, 9.0);
        assert!(p.is_balanced());
        assert!(brute_force_opt(&complete_graph(4)).is_err());
        assert!(brute_force_opt(&complete_graph(21)).is_err());
    }

    #[test]
    fn brute_force_matches_complete_graph_formula() {
        for m in 1..=4usize {
            let n = 3 * m;
            let want = (n * (n - 1) / 2 - 3 * (m * (m - 1) / 2)) as f64;
            assert_eq!(brute_force_opt(&complete_graph(n)).unwrap().0, want);
        }
    }

    #[test]
    fn brute_force_value_is_its_partition_cut() {
        for seed in 0..5 {
            let g = random_graph(9, 0.5, seed);
            let (v, p) = brute_force_opt(&g).unwrap();
            assert_eq!(g.cut_value(&p), v);
            for s in 0..20 {
                assert!(g.cut_value(&random_balanced_partition(9, s)) <= v);
            }
        }
    }

    #[test]
    fn mixture_examples() {
        let p = Partition::new(3, vec![0, 1, 2, 0, 1, 2, 0, 1, 2]).unwrap();
        let single = mixture_solution(std::slice::from_ref(&p), &[1.0]).unwrap();
        let integral = integral_solution(&p).unwrap();
        for u in 0..9 {
            for v in 0..9 {
                assert!((single.same_cluster(u, v) - integral.same_cluster(u, v)).abs() < 1e-9);
            }
        }
        let cyc = |s: usize| Partition::new(3, p.labels.iter().map(|l| (l + s) % 3).collect()).unwrap();
        let uni = mixture_solution(&[cyc(0), cyc(1), cyc(2)], &[1.0 / 3.0; 3]).unwrap();
        assert!(uni.validate().is_ok());
        for v in 0..9 {
            for m in uni.marginals(v) {
                assert!((m - 1.0 / 3.0).abs() < 1e-9);
            }
        }
        let half = mixture_solution(&[cyc(0), cyc(1)], &[0.5, 0.5]).unwrap();
        for v in 0..9 {
            let mut ms = half.marginals(v);
            ms.sort_by(f64::total_cmp);
            assert!(ms[0].abs() < 1e-9 && (ms[1] - 0.5).abs() < 1e-9 && (ms[2] - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn mixture_objective_is_weighted_average() {
        let g = random_graph(12, 0.4, 7);
        let parts: Vec<Partition> = (0..4).map(|s| random_balanced_partition(12, s)).collect();
        let w = [0.1, 0.2, 0.3, 0.4];
        let sol = mixture_solution(&parts, &w).unwrap();
        assert!(sol.validate().is_ok());
        let want: f64 = parts.iter().zip(&w).map(|(p, w)| w * g.cut_value(p)).sum();
        assert!((sdp_objective(&g, &sol).unwrap() - want).abs() < 1e-6);
        assert!(mixture_solution(&parts, &[0.5, 0.5, 0.5, -0.5]).is_err());
    }

    #[test]
    fn mismatched_sizes_rejected() {
        let g = complete_graph(6);
        let s = integral_solution(&Partition::new(3, vec![0, 1, 2]).unwrap()).unwrap();
        assert!(sdp_objective(&g, &s).is_err());
    }
}
