//! Axis-aligned boxes over `(x₁, x₂, w₁, w₂, t₁, t₂, t₃)` with enclosures of
//! the derived coordinates `x₃, w₃, α₁, α₂, α₃`.

use std::fmt;

use crate::error::{Error, Result};

/// Outward widening applied to every derived enclosure.
const NUDGE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn intersect(&self, o: &Interval) -> Interval {
        Interval::new(self.lo.max(o.lo), self.hi.min(o.hi))
    }

    /// Collapses an empty interval onto its lower end.
    pub fn repaired(self) -> Interval {
        if self.is_empty() {
            Interval::point(self.lo)
        } else {
            self
        }
    }

    fn nudged(self) -> Interval {
        Interval::new(self.lo - NUDGE, self.hi + NUDGE)
    }

    /// Halves at the midpoint; a zero-width interval is returned unchanged.
    pub fn halves(&self) -> Vec<Interval> {
        if self.hi > self.lo {
            let m = self.mid();
            vec![Interval::new(self.lo, m), Interval::new(m, self.hi)]
        } else {
            vec![*self]
        }
    }
}

/// Exact range of `s ↦ s − s²` over `iv ⊆ [0, 1]`.
pub fn hump_range(iv: Interval) -> Interval {
    let f = |s: f64| s - s * s;
    let (a, b) = (f(iv.lo), f(iv.hi));
    let hi = if iv.contains(0.5) { 0.25 } else { a.max(b) };
    Interval::new(a.min(b).max(0.0), hi)
}

/// Enclosure of `{xw + t·√((x−x²)(w−w²)) : x ∈ ix, w ∈ iw, t ∈ it}`.
pub fn alpha_enclosure(ix: Interval, iw: Interval, it: Interval) -> Interval {
    let prod = Interval::new(ix.lo.max(0.0) * iw.lo.max(0.0), ix.hi * iw.hi);
    let hx = hump_range(ix);
    let hw = hump_range(iw);
    let rad = Interval::new((hx.lo * hw.lo).sqrt(), (hx.hi * hw.hi).sqrt());
    let cands = [it.lo * rad.lo, it.lo * rad.hi, it.hi * rad.lo, it.hi * rad.hi];
    let tl = cands.iter().cloned().fold(f64::INFINITY, f64::min);
    let th = cands.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Interval::new(prod.lo + tl, prod.hi + th).nudged()
}

/// Coordinates in the order x₁, x₂, w₁, w₂, t₁, t₂, t₃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigBox {
    pub iv: [Interval; 7],
}

pub const COORD_NAMES: [&str; 7] = ["x1", "x2", "w1", "w2", "t1", "t2", "t3"];

/// Derived enclosures, possibly empty.
#[derive(Debug, Clone, Copy)]
pub struct Derived {
    pub x3: Interval,
    pub w3: Interval,
    pub alpha: [Interval; 3],
}

impl Derived {
    /// Largest amount by which some derived enclosure is empty after
    /// intersecting with the unit interval; `≤ 0` when none is empty.
    pub fn emptiness_gap(&self) -> f64 {
        std::iter::once(&self.x3)
            .chain(std::iter::once(&self.w3))
            .chain(self.alpha.iter())
            .map(|iv| iv.lo - iv.hi)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same enclosures with empty ones collapsed to a point. Any system built
    /// from them contains the (empty) set of configurations in the box.
    pub fn repaired(&self) -> Derived {
        Derived { x3: self.x3.repaired(), w3: self.w3.repaired(), alpha: self.alpha.map(Interval::repaired) }
    }
}

impl ConfigBox {
    pub fn new(iv: [Interval; 7]) -> Self {
        Self { iv }
    }

    pub fn full() -> Self {
        let u = Interval::new(0.0, 1.0);
        let t = Interval::new(-1.0, 1.0);
        Self { iv: [u, u, u, u, t, t, t] }
    }

    pub fn x(&self, i: usize) -> Interval {
        self.iv[i]
    }

    pub fn w(&self, i: usize) -> Interval {
        self.iv[2 + i]
    }

    pub fn t(&self, i: usize) -> Interval {
        self.iv[4 + i]
    }

    /// Box of the given half-width around a point, clipped to the domain.
    pub fn around(center: [f64; 7], half_width: f64) -> Self {
        let full = Self::full();
        Self {
            iv: std::array::from_fn(|k| {
                Interval::new(center[k] - half_width, center[k] + half_width).intersect(&full.iv[k])
            }),
        }
    }

    pub fn intersect(&self, o: &ConfigBox) -> ConfigBox {
        Self { iv: std::array::from_fn(|k| self.iv[k].intersect(&o.iv[k])) }
    }

    pub fn is_empty(&self) -> bool {
        self.iv.iter().any(Interval::is_empty)
    }

    pub fn contains(&self, p: &[f64; 7]) -> bool {
        self.iv.iter().zip(p).all(|(iv, v)| iv.contains(*v))
    }

    pub fn contains_box(&self, o: &ConfigBox) -> bool {
        self.iv.iter().zip(&o.iv).all(|(a, b)| a.lo <= b.lo && b.hi <= a.hi)
    }

    pub fn volume(&self) -> f64 {
        self.iv.iter().map(Interval::width).product()
    }

    /// Derived enclosures; `x₃, w₃` and `α` are intersected with `[0, 1]`.
    pub fn derived(&self) -> Derived {
        let unit = Interval::new(0.0, 1.0);
        let x3 = Interval::new(1.0 - self.iv[0].hi - self.iv[1].hi, 1.0 - self.iv[0].lo - self.iv[1].lo)
            .nudged()
            .intersect(&unit);
        let w3 = Interval::new(1.0 - self.iv[2].hi - self.iv[3].hi, 1.0 - self.iv[2].lo - self.iv[3].lo)
            .nudged()
            .intersect(&unit);
        let xs = [self.iv[0], self.iv[1], x3.repaired()];
        let ws = [self.iv[2], self.iv[3], w3.repaired()];
        let clip = |iv: Interval| Interval::new(iv.lo.clamp(0.0, 1.0), iv.hi.clamp(0.0, 1.0));
        let alpha = std::array::from_fn(|i| alpha_enclosure(clip(xs[i]), clip(ws[i]), self.t(i)).intersect(&unit));
        Derived { x3, w3, alpha }
    }

    fn split_coords(&self, coords: std::ops::Range<usize>) -> Vec<ConfigBox> {
        let mut out = vec![*self];
        for k in coords {
            let halves = self.iv[k].halves();
            if halves.len() == 1 {
                continue;
            }
            out = out
                .into_iter()
                .flat_map(|b| {
                    halves.iter().map(move |h| {
                        let mut c = b;
                        c.iv[k] = *h;
                        c
                    })
                })
                .collect();
        }
        out
    }

    /// Up to 16 children halving `x₁, x₂, w₁, w₂`.
    pub fn split_marginals(&self) -> Vec<ConfigBox> {
        self.split_coords(0..4)
    }

    /// Up to 8 children halving `t₁, t₂, t₃`.
    pub fn split_t(&self) -> Vec<ConfigBox> {
        self.split_coords(4..7)
    }

    pub fn endpoints(&self) -> [f64; 14] {
        std::array::from_fn(|k| if k % 2 == 0 { self.iv[k / 2].lo } else { self.iv[k / 2].hi })
    }

    pub fn from_endpoints(e: [f64; 14]) -> Self {
        Self { iv: std::array::from_fn(|k| Interval::new(e[2 * k], e[2 * k + 1])) }
    }

    /// Reads a region file. Each non-comment line is either `name lo hi` for
    /// one of [`COORD_NAMES`], or `center v1 … v7` together with
    /// `half_width h`. Coordinates not mentioned keep the full domain.
    pub fn parse_region(text: &str) -> Result<Self> {
        let mut out = Self::full();
        let mut center: Option<[f64; 7]> = None;
        let mut half_width: Option<f64> = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::parse(line_no, format!("{s:?}: {e}")));
            match toks[0] {
                "center" if toks.len() == 8 => {
                    let mut c = [0.0; 7];
                    for (k, t) in toks[1..].iter().enumerate() {
                        c[k] = num(t)?;
                    }
                    center = Some(c);
                }
                "half_width" if toks.len() == 2 => half_width = Some(num(toks[1])?),
                name if toks.len() == 3 => {
                    let k = COORD_NAMES
                        .iter()
                        .position(|n| *n == name)
                        .ok_or_else(|| Error::parse(line_no, format!("unknown coordinate {name:?}")))?;
                    out.iv[k] = Interval::new(num(toks[1])?, num(toks[2])?);
                }
                _ => return Err(Error::parse(line_no, format!("cannot read {line:?}"))),
            }
        }
        match (center, half_width) {
            (Some(c), Some(h)) => Ok(Self::around(c, h).intersect(&out)),
            (None, None) => Ok(out),
            _ => Err(Error::parse(0, "center and half_width must appear together")),
        }
    }

    pub(crate) fn key(&self) -> [u64; 14] {
        self.endpoints().map(f64::to_bits)
    }
}

impl fmt::Display for ConfigBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.endpoints().iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v:.16e}")?;
        }
        Ok(())
    }
}
