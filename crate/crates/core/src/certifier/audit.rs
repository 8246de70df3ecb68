//! Independent re-check of a certificate: random probes (with a short local
//! descent) inside every eliminated box, and a structural coverage check of
//! the split tree against the stage-1 tiling.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::boxes::ConfigBox;
use super::search::{children_of, stage1_tiles, CertifyParams, CubeRecord};
use crate::config::{t_from_alpha, Configuration, FEAS_TOL};
use crate::cutratio::{cut_probability, marginal_lower_bound, sdp_contribution};

#[derive(Debug, Clone, Default)]
pub struct AuditOutcome {
    pub coverage_errors: Vec<String>,
    /// A configuration in `C ∩ S ∩ E` inside an eliminated box with `f/g < ρ`.
    pub witness: Option<Configuration>,
    pub probes: usize,
    pub admissible_probes: usize,
}

impl AuditOutcome {
    pub fn passed(&self) -> bool {
        self.coverage_errors.is_empty() && self.witness.is_none()
    }
}

/// Turns box coordinates into an admissible configuration, if possible:
/// `α` from the correlations, clamped into `[0, min(x, w)]` with `t`
/// recomputed when that keeps `t` in the box.
pub fn admissible(p7: &[f64; 7], cube: &ConfigBox, params: &CertifyParams) -> Option<Configuration> {
    let x = [p7[0], p7[1], 1.0 - p7[0] - p7[1]];
    let w = [p7[2], p7[3], 1.0 - p7[2] - p7[3]];
    if x[2] < 0.0 || w[2] < 0.0 {
        return None;
    }
    let mut c = Configuration::from_t(x, w, [p7[4], p7[5], p7[6]]);
    if !c.feasible_within(FEAS_TOL) {
        let alpha: [f64; 3] = std::array::from_fn(|i| c.alpha[i].clamp(0.0, x[i].min(w[i])));
        let t = t_from_alpha(x, w, alpha);
        let in_box = (0..3).all(|i| {
            let iv = cube.t(i);
            (iv.lo - 1e-12..=iv.hi + 1e-12).contains(&t[i])
        });
        if !in_box {
            return None;
        }
        c = Configuration { x, w, alpha, t };
        if !c.feasible_within(FEAS_TOL) {
            return None;
        }
    }
    let g = sdp_contribution(&c);
    let in_e = g >= params.delta_prime && marginal_lower_bound(&c) <= params.rho * g;
    (c.in_polytope_s(0.0) && in_e).then_some(c)
}

fn ratio_at(p7: &[f64; 7], cube: &ConfigBox, params: &CertifyParams) -> Option<(f64, Configuration)> {
    admissible(p7, cube, params).map(|c| (cut_probability(&c) / sdp_contribution(&c), c))
}

/// Compass search for a small ratio inside the box, from an admissible start.
fn descend(
    start: [f64; 7],
    start_val: f64,
    cube: &ConfigBox,
    params: &CertifyParams,
    budget: usize,
) -> (f64, Option<Configuration>) {
    let mut cur = start;
    let mut val = start_val;
    let mut best_c = None;
    let mut step: [f64; 7] = std::array::from_fn(|k| 0.25 * cube.iv[k].width());
    let mut evals = 0;
    while evals < budget && step.iter().any(|&s| s > 1e-9) {
        let mut improved = false;
        for k in 0..7 {
            if step[k] <= 1e-12 {
                continue;
            }
            for dir in [-1.0, 1.0] {
                let mut cand = cur;
                cand[k] = (cand[k] + dir * step[k]).clamp(cube.iv[k].lo, cube.iv[k].hi);
                evals += 1;
                if let Some((v, c)) = ratio_at(&cand, cube, params) {
                    if v < val {
                        cur = cand;
                        val = v;
                        best_c = Some(c);
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    (val, best_c)
}

/// Probes within this distance of `ρ` trigger a local descent.
const DESCENT_WINDOW: f64 = 0.01;
const DESCENT_BUDGET: usize = 400;

fn probe_record(
    rec: &CubeRecord,
    params: &CertifyParams,
    probes: usize,
    rng: &mut ChaCha8Rng,
) -> (usize, Option<Configuration>) {
    let cube = &rec.cube;
    let mut admissible_count = 0;
    let mut best: Option<(f64, [f64; 7])> = None;
    for _ in 0..probes {
        let p7: [f64; 7] = std::array::from_fn(|k| {
            let iv = cube.iv[k];
            if iv.width() > 0.0 {
                rng.random_range(iv.lo..=iv.hi)
            } else {
                iv.lo
            }
        });
        if let Some((r, c)) = ratio_at(&p7, cube, params) {
            admissible_count += 1;
            if r < params.rho {
                return (admissible_count, Some(c));
            }
            if best.is_none_or(|(b, _)| r < b) {
                best = Some((r, p7));
            }
        }
    }
    if let Some((r, p7)) = best {
        if r < params.rho + DESCENT_WINDOW {
            let (v, c) = descend(p7, r, cube, params, DESCENT_BUDGET);
            if v < params.rho {
                return (admissible_count, c);
            }
        }
    }
    (admissible_count, None)
}

/// Checks that the records form the split tree of the stage-1 tiling:
/// every tile is a root, every split record's children are present exactly
/// once, and every leaf is an elimination.
pub fn coverage_errors(log: &[CubeRecord], params: &CertifyParams) -> Vec<String> {
    let mut errs = Vec::new();
    let mut index: HashMap<[u64; 14], usize> = HashMap::with_capacity(log.len());
    for (i, r) in log.iter().enumerate() {
        if index.insert(r.cube.key(), i).is_some() {
            errs.push(format!("record {i}: duplicate box"));
        }
    }
    let mut hits = vec![0usize; log.len()];
    for tile in stage1_tiles(params) {
        match index.get(&tile.key()) {
            Some(&i) => {
                hits[i] += 1;
                if log[i].depth != 0 {
                    errs.push(format!("record {i}: tile at depth {}", log[i].depth));
                }
            }
            None => errs.push(format!("tile {tile} has no record")),
        }
    }
    for (i, r) in log.iter().enumerate() {
        for child in children_of(r) {
            match index.get(&child.key()) {
                Some(&j) => {
                    hits[j] += 1;
                    if log[j].depth != r.depth + 1 {
                        errs.push(format!("record {j}: depth {} under parent depth {}", log[j].depth, r.depth));
                    }
                }
                None => errs.push(format!("record {i}: child {child} missing")),
            }
        }
        if r.reason.is_elimination() && r.margin < params.tau_num {
            errs.push(format!("record {i}: margin {} below tau_num", r.margin));
        }
    }
    for (i, h) in hits.iter().enumerate() {
        if *h != 1 {
            errs.push(format!("record {i}: referenced {h} times"));
        }
    }
    errs.truncate(100);
    errs
}

/// Probes every eliminated box and checks coverage, using `params.workers`
/// threads. Each record gets its own
/// generator derived from `seed` and its index, so the result does not
/// depend on evaluation order.
pub fn audit_certificate(
    log: &[CubeRecord],
    params: &CertifyParams,
    probes_per_cube: usize,
    seed: u64,
) -> AuditOutcome {
    let mut out = AuditOutcome { coverage_errors: coverage_errors(log, params), ..AuditOutcome::default() };
    let run = || -> Vec<(usize, Option<Configuration>)> {
        log.par_iter()
            .enumerate()
            .filter(|(_, r)| r.reason.is_elimination())
            .map(|(i, rec)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                probe_record(rec, params, probes_per_cube, &mut rng)
            })
            .collect()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(params.workers.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    for (adm, witness) in results {
        out.probes += probes_per_cube;
        out.admissible_probes += adm;
        if out.witness.is_none() {
            out.witness = witness;
        }
    }
    out
}
