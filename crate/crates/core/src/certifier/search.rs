//! Two-stage subdivision search and the certificate log format.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::boxes::{ConfigBox, Interval};
use super::model::{f_lower_bound, lp_feasible, LpVerdict};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyParams {
    pub rho: f64,
    pub delta_prime: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub tau_num: f64,
    /// Number of splits allowed below a stage-1 tile.
    pub max_depth: u32,
    pub region: Option<ConfigBox>,
    pub workers: usize,
}

impl Default for CertifyParams {
    fn default() -> Self {
        Self {
            rho: 0.80,
            delta_prime: 0.01,
            eta1: 0.05,
            eta2: 0.25,
            tau_num: 1e-8,
            max_depth: 12,
            region: None,
            workers: 1,
        }
    }
}

impl CertifyParams {
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !(self.rho > 0.0 && self.rho < 1.0) {
            v.push(format!("rho = {} not in (0,1)", self.rho));
        }
        if !(self.delta_prime > 0.0 && self.delta_prime < 1.0) {
            v.push(format!("delta_prime = {} not in (0,1)", self.delta_prime));
        }
        for (name, val) in [("eta1", self.eta1), ("eta2", self.eta2), ("tau_num", self.tau_num)] {
            if !(val > 0.0 && val.is_finite()) {
                v.push(format!("{name} = {val} must be positive"));
            }
        }
        if self.workers == 0 {
            v.push("workers must be at least 1".into());
        }
        if let Some(r) = &self.region {
            if r.is_empty() || !ConfigBox::full().contains_box(r) {
                v.push("region must be a non-empty sub-box of the domain".into());
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reason {
    LpInfeasible,
    RatioBound,
    SplitMarginals,
    SplitT,
}

impl Reason {
    pub fn is_elimination(self) -> bool {
        matches!(self, Reason::LpInfeasible | Reason::RatioBound)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Reason::LpInfeasible => "LP_INFEASIBLE",
            Reason::RatioBound => "RATIO_BOUND",
            Reason::SplitMarginals => "SPLIT_MARGINALS",
            Reason::SplitT => "SPLIT_T",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Reason {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "LP_INFEASIBLE" => Ok(Reason::LpInfeasible),
            "RATIO_BOUND" => Ok(Reason::RatioBound),
            "SPLIT_MARGINALS" => Ok(Reason::SplitMarginals),
            "SPLIT_T" => Ok(Reason::SplitT),
            other => Err(format!("unknown reason {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeRecord {
    pub cube: ConfigBox,
    pub reason: Reason,
    pub margin: f64,
    pub depth: u32,
}

impl fmt::Display for CubeRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {:.16e} {}", self.depth, self.reason, self.margin, self.cube)
    }
}

impl CubeRecord {
    pub fn parse_line(line: &str, line_no: usize) -> Result<Self> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 17 {
            return Err(Error::parse(line_no, format!("expected 17 fields, found {}", toks.len())));
        }
        let depth = toks[0].parse().map_err(|e| Error::parse(line_no, format!("depth: {e}")))?;
        let reason = toks[1].parse().map_err(|e: String| Error::parse(line_no, e))?;
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::parse(line_no, format!("{s:?}: {e}")));
        let margin = num(toks[2])?;
        let mut e = [0.0; 14];
        for (k, tok) in toks[3..].iter().enumerate() {
            e[k] = num(tok)?;
        }
        Ok(Self { cube: ConfigBox::from_endpoints(e), reason, margin, depth })
    }
}

/// Parses a certificate log, skipping `#` and blank lines.
pub fn parse_log(text: &str) -> Result<Vec<CubeRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| CubeRecord::parse_line(l, i + 1))
        .collect()
}

fn header_field<T: FromStr>(k: &str, v: &str, line_no: usize) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e: T::Err| Error::parse(line_no, format!("{k}: {e}")))
}

/// Recovers the parameters recorded in a log header, if present.
pub fn parse_log_params(text: &str) -> Result<Option<CertifyParams>> {
    let mut params: Option<CertifyParams> = None;
    for (i, line) in text.lines().enumerate() {
        let Some(rest) = line.strip_prefix('#') else { continue };
        let rest = rest.trim();
        if let Some(r) = rest.strip_prefix("region ") {
            let vals: Vec<f64> = r
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(i + 1, format!("region: {e}")))?;
            let e: [f64; 14] = vals.try_into().map_err(|_| Error::parse(i + 1, "region needs 14 endpoints"))?;
            params.get_or_insert_with(CertifyParams::default).region = Some(ConfigBox::from_endpoints(e));
        } else if rest.starts_with("rho=") {
            let p = params.get_or_insert_with(CertifyParams::default);
            for kv in rest.split_whitespace() {
                let (k, v) = kv.split_once('=').ok_or_else(|| Error::parse(i + 1, format!("bad field {kv:?}")))?;
                match k {
                    "rho" => p.rho = header_field(k, v, i + 1)?,
                    "delta_prime" => p.delta_prime = header_field(k, v, i + 1)?,
                    "eta1" => p.eta1 = header_field(k, v, i + 1)?,
                    "eta2" => p.eta2 = header_field(k, v, i + 1)?,
                    "tau_num" => p.tau_num = header_field(k, v, i + 1)?,
                    "max_depth" => p.max_depth = header_field(k, v, i + 1)?,
                    _ => return Err(Error::parse(i + 1, format!("unknown field {k:?}"))),
                }
            }
        }
    }
    Ok(params)
}

pub fn write_log(records: &[CubeRecord], params: &CertifyParams) -> String {
    let mut out = String::new();
    out.push_str(
        "# depth reason margin x1_lo x1_hi x2_lo x2_hi w1_lo w1_hi w2_lo w2_hi t1_lo t1_hi t2_lo t2_hi t3_lo t3_hi\n",
    );
    out.push_str(&format!(
        "# rho={} delta_prime={} eta1={} eta2={} tau_num={} max_depth={}\n",
        params.rho, params.delta_prime, params.eta1, params.eta2, params.tau_num, params.max_depth
    ));
    if let Some(r) = &params.region {
        out.push_str(&format!("# region {r}\n"));
    }
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertifyStatus {
    Certified,
    Exhausted,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub tiles: usize,
    pub lp_infeasible: usize,
    pub ratio_bound: usize,
    pub splits: usize,
    pub survivors: usize,
}

#[derive(Debug, Clone)]
pub struct CertifyOutcome {
    pub status: CertifyStatus,
    pub records: Vec<CubeRecord>,
    pub survivors: Vec<ConfigBox>,
    pub stats: SearchStats,
}

/// Grid cells `[origin + kη, origin + (k+1)η] ∩ [lo, hi]` of positive length;
/// a degenerate `[lo, lo]` yields the single point.
fn tiles_1d(lo: f64, hi: f64, origin: f64, end: f64, eta: f64) -> Vec<Interval> {
    if hi <= lo {
        return vec![Interval::point(lo)];
    }
    let cells = ((end - origin) / eta).ceil() as usize;
    (0..cells)
        .filter_map(|k| {
            let a = origin + k as f64 * eta;
            let b = if k + 1 == cells { end } else { origin + (k + 1) as f64 * eta };
            let iv = Interval::new(a.max(lo), b.min(hi));
            (iv.hi > iv.lo).then_some(iv)
        })
        .collect()
}

/// Stage-1 tiling of the region, in lexicographic order.
pub fn stage1_tiles(p: &CertifyParams) -> Vec<ConfigBox> {
    let region = p.region.unwrap_or_else(ConfigBox::full);
    let axes: Vec<Vec<Interval>> = (0..7)
        .map(|k| {
            let iv = region.iv[k];
            if k < 4 {
                tiles_1d(iv.lo, iv.hi, 0.0, 1.0, p.eta1)
            } else {
                tiles_1d(iv.lo, iv.hi, -1.0, 1.0, p.eta2)
            }
        })
        .collect();
    let mut out = vec![region];
    for (k, axis) in axes.iter().enumerate() {
        out = out
            .into_iter()
            .flat_map(|b| {
                axis.iter().map(move |iv| {
                    let mut c = b;
                    c.iv[k] = *iv;
                    c
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    LpInfeasible(f64),
    RatioBound(f64),
    Undecided(f64),
}

/// Runs the LP test and, on feasible boxes, the ratio bound.
pub fn evaluate(b: &ConfigBox, p: &CertifyParams) -> Verdict {
    let l = f_lower_bound(b);
    let want_g = l - p.rho * p.delta_prime >= p.tau_num;
    match lp_feasible(b, p, want_g) {
        LpVerdict::InfeasibleCertified(m) => Verdict::LpInfeasible(m),
        LpVerdict::Feasible { g_upper } => {
            let margin = l - p.rho * g_upper;
            if margin >= p.tau_num {
                Verdict::RatioBound(margin)
            } else {
                Verdict::Undecided(margin)
            }
        }
    }
}

#[derive(Default)]
struct TileResult {
    records: Vec<CubeRecord>,
    survivors: Vec<ConfigBox>,
}

fn explore(b: ConfigBox, depth: u32, marginal_phase: bool, p: &CertifyParams, out: &mut TileResult) {
    let margin = match evaluate(&b, p) {
        Verdict::LpInfeasible(m) => {
            out.records.push(CubeRecord { cube: b, reason: Reason::LpInfeasible, margin: m, depth });
            return;
        }
        Verdict::RatioBound(m) => {
            out.records.push(CubeRecord { cube: b, reason: Reason::RatioBound, margin: m, depth });
            return;
        }
        Verdict::Undecided(m) => m,
    };
    if depth >= p.max_depth {
        out.survivors.push(b);
        return;
    }
    let (mut children, mut reason) = split(&b, marginal_phase);
    if children.len() == 1 {
        (children, reason) = split(&b, !marginal_phase);
        if children.len() == 1 {
            out.survivors.push(b);
            return;
        }
    }
    out.records.push(CubeRecord { cube: b, reason, margin, depth });
    let next_phase = reason == Reason::SplitT;
    for c in children {
        explore(c, depth + 1, next_phase, p, out);
    }
}

pub(crate) fn split(b: &ConfigBox, marginal_phase: bool) -> (Vec<ConfigBox>, Reason) {
    if marginal_phase {
        (b.split_marginals(), Reason::SplitMarginals)
    } else {
        (b.split_t(), Reason::SplitT)
    }
}

/// Children of a split record, as produced by the search.
pub fn children_of(r: &CubeRecord) -> Vec<ConfigBox> {
    match r.reason {
        Reason::SplitMarginals => r.cube.split_marginals(),
        Reason::SplitT => r.cube.split_t(),
        _ => Vec::new(),
    }
}

/// Runs the search over the stage-1 tiling of `params.region`.
pub fn certify(params: &CertifyParams) -> Result<CertifyOutcome> {
    params.validate()?;
    let tiles = stage1_tiles(params);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(params.workers)
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let results: Vec<TileResult> = pool.install(|| {
        tiles
            .par_iter()
            .map(|t| {
                let mut r = TileResult::default();
                explore(*t, 0, true, params, &mut r);
                r
            })
            .collect()
    });
    let mut stats = SearchStats { tiles: tiles.len(), ..SearchStats::default() };
    let mut records = Vec::new();
    let mut survivors = Vec::new();
    for r in results {
        records.extend(r.records);
        survivors.extend(r.survivors);
    }
    for r in &records {
        match r.reason {
            Reason::LpInfeasible => stats.lp_infeasible += 1,
            Reason::RatioBound => stats.ratio_bound += 1,
            _ => stats.splits += 1,
        }
    }
    stats.survivors = survivors.len();
    let status = if survivors.is_empty() { CertifyStatus::Certified } else { CertifyStatus::Exhausted };
    Ok(CertifyOutcome { status, records, survivors, stats })
}
