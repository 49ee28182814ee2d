//! Path measures, the rate functional and entropy bookkeeping along shocks.

use crate::burgers::{BurgersError, HeightField, Provenance, ShockClass, ShockRecord, SliceSource};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use thiserror::Error;

/// Snap distance for the disjointness test.
pub const SNAP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("atom {atom}: {reason}")]
    Shape { atom: usize, reason: &'static str },
    #[error("atoms {0} and {1} intersect away from their endpoints at t = {2}")]
    Overlap(usize, usize, f64),
    #[error("measures share part of a path but not a common refinement")]
    Incomparable,
    #[error("approximation of atom {0} could not be made disjoint")]
    Surgery(usize),
    #[error(transparent)]
    Burgers(#[from] BurgersError),
}

/// A polygonal path with piecewise constant density.
///
/// `rho[k]` is the density on `[t[k], t[k+1]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
}

impl Atom {
    /// Straight path `x = x0 + v·(t − b)` on `[b, e]` with constant density.
    pub fn segment(b: f64, e: f64, x0: f64, v: f64, rho: f64) -> Self {
        Atom { t: vec![b, e], x: vec![x0, x0 + v * (e - b)], rho: vec![rho] }
    }

    fn check(&self, i: usize) -> Result<(), MeasureError> {
        let bad = |reason| Err(MeasureError::Shape { atom: i, reason });
        if self.t.len() < 2 || self.x.len() != self.t.len() || self.rho.len() + 1 != self.t.len() {
            return bad("need n >= 2 nodes, n positions and n - 1 densities");
        }
        if self.t.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("times must increase strictly");
        }
        if self.t[0] < 0.0 || self.t[self.t.len() - 1] > 1.0 {
            return bad("times must lie in [0, 1]");
        }
        if self.x.iter().any(|x| !x.is_finite()) {
            return bad("positions must be finite");
        }
        if self.rho.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return bad("densities must be finite and nonnegative");
        }
        Ok(())
    }

    pub fn span(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    /// Position at `t`, `None` outside the span.
    pub fn position(&self, t: f64) -> Option<f64> {
        let (b, e) = self.span();
        if t < b || t > e {
            return None;
        }
        let k = self.t.partition_point(|s| *s <= t).clamp(1, self.t.len() - 1);
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        Some(self.x[k - 1] + (self.x[k] - self.x[k - 1]) * (t - t0) / (t1 - t0))
    }

    /// Density on the piece containing `t` (right-continuous).
    pub fn density(&self, t: f64) -> Option<f64> {
        let (b, e) = self.span();
        if t < b || t > e {
            return None;
        }
        let k = self.t.partition_point(|s| *s <= t).clamp(1, self.t.len() - 1);
        Some(self.rho[k - 1])
    }

    /// `∫(4/3)ρ^{3/2} dt`.
    pub fn rate(&self) -> f64 {
        self.t.windows(2).zip(&self.rho).map(|(w, r)| 4.0 / 3.0 * r.powf(1.5) * (w[1] - w[0])).sum()
    }

    /// `∫γ̇² dt`.
    pub fn kinetic(&self) -> f64 {
        self.t
            .windows(2)
            .zip(self.x.windows(2))
            .map(|(t, x)| (x[1] - x[0]).powi(2) / (t[1] - t[0]))
            .sum()
    }

    fn is_endpoint(&self, t: f64, x: f64) -> bool {
        let (b, e) = self.span();
        let near = |s: f64, y: f64| (s - t).abs() <= SNAP_TOL && (y - x).abs() <= SNAP_TOL * (1.0 + x.abs());
        near(b, self.x[0]) || near(e, self.x[self.x.len() - 1])
    }
}

/// First point where two graphs meet away from the endpoints of either.
fn crossing(a: &Atom, b: &Atom) -> Option<f64> {
    let lo = a.t[0].max(b.t[0]);
    let hi = a.span().1.min(b.span().1);
    if lo > hi {
        return None;
    }
    let mut knots: Vec<f64> = a.t.iter().chain(&b.t).copied().filter(|t| *t >= lo && *t <= hi).collect();
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let gap = |t: f64| a.position(t).unwrap() - b.position(t).unwrap();
    let meets = |t: f64| {
        let x = a.position(t).unwrap();
        gap(t).abs() <= SNAP_TOL * (1.0 + x.abs()) && !(a.is_endpoint(t, x) || b.is_endpoint(t, x))
    };
    let mids = knots.windows(2).map(|w| 0.5 * (w[0] + w[1]));
    if let Some(t) = knots.iter().copied().chain(mids).find(|&t| meets(t)) {
        return Some(t);
    }
    for w in knots.windows(2) {
        let (g0, g1) = (gap(w[0]), gap(w[1]));
        if g0 * g1 < 0.0 {
            return Some(w[0] + (w[1] - w[0]) * g0 / (g0 - g1));
        }
    }
    None
}

/// A finite sum of densities on internally disjoint polygonal paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathMeasure {
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub cone_radius: f64,
}

impl PathMeasure {
    pub fn zero() -> Self {
        PathMeasure { atoms: Vec::new(), cone_radius: 0.0 }
    }

    /// Validates shapes and internal disjointness. `cone_radius` is widened to
    /// contain every path.
    pub fn new(atoms: Vec<Atom>, cone_radius: f64) -> Result<Self, MeasureError> {
        for (i, a) in atoms.iter().enumerate() {
            a.check(i)?;
        }
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                if let Some(t) = crossing(&atoms[i], &atoms[j]) {
                    return Err(MeasureError::Overlap(i, j, t));
                }
            }
        }
        let c = atoms
            .iter()
            .flat_map(|a| a.t.iter().zip(&a.x))
            .filter(|(t, _)| **t > 0.0)
            .fold(cone_radius, |c, (t, x)| c.max(x.abs() / t));
        Ok(PathMeasure { atoms, cone_radius: c })
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.rho.iter().all(|r| *r == 0.0))
    }

    /// `atom_id,t,x,rho` rows; `rho` is the density on the following piece
    /// (empty on the last node).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("atom_id,t,x,rho\n");
        for (i, a) in self.atoms.iter().enumerate() {
            for k in 0..a.t.len() {
                let r = a.rho.get(k).map(|r| r.to_string()).unwrap_or_default();
                let _ = writeln!(s, "{i},{},{},{r}", a.t[k], a.x[k]);
            }
        }
        s
    }

    /// Whether `self ≤ other`: every atom of `self` lies on an atom of
    /// `other` carrying at least its density.
    pub fn dominated_by(&self, other: &PathMeasure) -> Result<bool, MeasureError> {
        for a in self.atoms.iter().filter(|a| a.rho.iter().any(|r| *r > 0.0)) {
            let mut verdict = None;
            for b in &other.atoms {
                match relation(a, b) {
                    Relation::Disjoint => {}
                    Relation::Partial => return Err(MeasureError::Incomparable),
                    Relation::Covered => {
                        verdict = Some(covered_density_le(a, b));
                        break;
                    }
                }
            }
            if verdict != Some(true) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

enum Relation {
    Disjoint,
    Partial,
    Covered,
}

fn on_path(b: &Atom, t: f64, x: f64) -> bool {
    b.position(t).is_some_and(|y| (y - x).abs() <= SNAP_TOL * (1.0 + x.abs()))
}

fn relation(a: &Atom, b: &Atom) -> Relation {
    let hits = a.t.iter().zip(&a.x).filter(|(t, x)| on_path(b, **t, **x)).count();
    let inner_b = b
        .t
        .iter()
        .zip(&b.x)
        .filter(|(t, _)| **t > a.t[0] && **t < a.span().1)
        .all(|(t, x)| on_path(a, *t, *x));
    let mids = a.t.windows(2).zip(a.x.windows(2)).filter(|(t, x)| on_path(b, 0.5 * (t[0] + t[1]), 0.5 * (x[0] + x[1])));
    match (hits, mids.count()) {
        (h, m) if h == a.t.len() && m == a.rho.len() && inner_b => Relation::Covered,
        (_, 0) => Relation::Disjoint,
        _ => Relation::Partial,
    }
}

fn covered_density_le(a: &Atom, b: &Atom) -> bool {
    let (lo, hi) = a.span();
    let mut knots: Vec<f64> = a.t.iter().chain(b.t.iter().filter(|t| **t > lo && **t < hi)).copied().collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots.windows(2).all(|w| {
        let m = 0.5 * (w[0] + w[1]);
        a.density(m).unwrap() <= b.density(m).unwrap()
    })
}

/// `Σ ∫(4/3)ρ^{3/2} dt`.
pub fn rate(mu: &PathMeasure) -> f64 {
    mu.atoms.iter().map(Atom::rate).fold(0.0, |a, r| a + r)
}

fn atom_of(r: &ShockRecord) -> Atom {
    let t: Vec<f64> = r.samples.iter().map(|s| s.t).collect();
    let x = r.samples.iter().map(|s| s.x).collect();
    // density whose rate reproduces the panel's entropy production
    let rho = t.windows(2).zip(&r.production).map(|(w, p)| (0.75 * p / (w[1] - w[0])).powf(2.0 / 3.0)).collect();
    Atom { t, x, rho }
}

fn measure_of<'a>(records: impl Iterator<Item = &'a ShockRecord>) -> Result<PathMeasure, MeasureError> {
    PathMeasure::new(records.filter(|r| r.samples.len() >= 2).map(atom_of).collect(), 0.0)
}

/// `M[h]`: one atom per non-contact shock, density `(v₋ − v₊)²/16` in the
/// `L^{3/2}` mean over each panel.
pub fn measure_from_shocks(records: &[ShockRecord]) -> Result<PathMeasure, MeasureError> {
    measure_of(records.iter().filter(|r| r.class != ShockClass::Contact))
}

/// `(M_non, M_ent)`.
pub fn split_measure(records: &[ShockRecord]) -> Result<(PathMeasure, PathMeasure), MeasureError> {
    Ok((
        measure_of(records.iter().filter(|r| r.class == ShockClass::NonEntropy))?,
        measure_of(records.iter().filter(|r| r.class == ShockClass::Entropy))?,
    ))
}

/// `(Entp₊, Entp₋)`: production along non-entropy and entropy shocks.
pub fn entropy_production(records: &[ShockRecord]) -> (f64, f64) {
    records.iter().fold((0.0, 0.0), |(p, m), r| match r.class {
        ShockClass::NonEntropy => (p + r.total_production(), m),
        ShockClass::Entropy => (p, m + r.total_production()),
        ShockClass::Contact => (p, m),
    })
}

/// `|Entp₊ − Entp₋ − (E(h(1)) − E(h(s)))|` with `E` the energy relative to
/// the tail parabola; `E(h(0)) = 0` for backward evolutions. The terminal
/// slice (and for forward fields the initial one) must be stored.
pub fn key_identity_residual(field: &HeightField, records: &[ShockRecord]) -> Result<f64, MeasureError> {
    let end = field.slice(1.0).ok_or(BurgersError::MissingSlice(1.0))?;
    let start = match field.provenance {
        Provenance::Backward => 0.0,
        Provenance::Forward => {
            let (s, h) = field.slices.first().ok_or(BurgersError::MissingSlice(0.0))?;
            if records.iter().any(|r| r.samples[0].t < *s) {
                return Err(BurgersError::MissingSlice(*s).into());
            }
            h.tail_energy()
        }
    };
    let (plus, minus) = entropy_production(records);
    Ok((plus - minus - (end.tail_energy() - start)).abs())
}

/// Shock-integral and boundary-flux sides on `[t_lo, t_hi]`:
/// `Σ ∫|v₋ − v₊|³/48 · sign` against `E(h(t_hi)) − E(h(t_lo))`.
///
/// `t_lo` must be a sample time of every record alive there.
pub fn flux_route(
    src: &dyn SliceSource,
    records: &[ShockRecord],
    t_lo: f64,
    t_hi: f64,
) -> Result<(f64, f64), MeasureError> {
    let mut shock = 0.0;
    for r in records {
        let sign = match r.class {
            ShockClass::NonEntropy => 1.0,
            ShockClass::Entropy => -1.0,
            ShockClass::Contact => 0.0,
        };
        for (w, p) in r.samples.windows(2).zip(&r.production) {
            if w[0].t >= t_lo * (1.0 - 1e-14) && w[1].t <= t_hi * (1.0 + 1e-14) {
                shock += sign * p;
            }
        }
    }
    let flux = src.slice(t_hi)?.tail_energy() - src.slice(t_lo)?.tail_energy();
    Ok((shock, flux))
}

/// Kruzhkov entropy `q(α) = α²/4` and flux `r(α) = α³/12`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KruzhkovPair {
    pub entropy: f64,
    pub flux: f64,
}

impl KruzhkovPair {
    pub fn at(alpha: f64) -> Self {
        KruzhkovPair { entropy: alpha * alpha / 4.0, flux: alpha.powi(3) / 12.0 }
    }

    /// `(q′(α), r′(α)) = (α/2, α²/4)`.
    pub fn derivatives(alpha: f64) -> (f64, f64) {
        (alpha / 2.0, alpha * alpha / 4.0)
    }

    /// Production across a jump from `v₋` to `v₊`:
    /// `[r] − s·[q]` with `s` the Rankine–Hugoniot speed, equal to `(v₋ − v₊)³/48`.
    pub fn production(v_left: f64, v_right: f64) -> f64 {
        let (l, r) = (Self::at(v_left), Self::at(v_right));
        let s = -(v_left + v_right) / 4.0;
        // ∂ₜq = ∂ₓ r for smooth solutions of ∂ₜu = ¼∂ₓ(u²)
        -(r.flux - l.flux) - s * (r.entropy - l.entropy)
    }
}

/// A path with density given as functions of time.
pub trait ContinuousAtom {
    fn span(&self) -> (f64, f64);
    fn path(&self, t: f64) -> f64;
    fn density(&self, t: f64) -> f64;
}

fn gauss_mean(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const NODES: [(f64, f64); 5] = [
        (0.0, 0.568_888_888_888_888_9),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    NODES.iter().map(|(x, w)| w * f(m + h * x)).sum::<f64>() / 2.0
}

/// Polygonalization on `n` equal pieces per atom with matching endpoints and
/// averaged densities. An atom whose polygon meets an earlier one away from
/// the endpoints loses its first piece until the two separate.
pub fn approximate(atoms: &[&dyn ContinuousAtom], n: usize) -> Result<PathMeasure, MeasureError> {
    let n = n.max(1);
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for (i, c) in atoms.iter().enumerate() {
        let (b, e) = c.span();
        let t: Vec<f64> = (0..=n).map(|k| if k == n { e } else { b + (e - b) * k as f64 / n as f64 }).collect();
        let x: Vec<f64> = t.iter().map(|s| c.path(*s)).collect();
        let rho: Vec<f64> = t.windows(2).map(|w| gauss_mean(|s| c.density(s), w[0], w[1])).collect();
        let mut a = Atom { t, x, rho };
        a.check(i)?;
        while out.iter().any(|o| crossing(o, &a).is_some()) {
            if a.t.len() <= 2 {
                return Err(MeasureError::Surgery(i));
            }
            a.t.remove(0);
            a.x.remove(0);
            a.rho.remove(0);
        }
        out.push(a);
    }
    PathMeasure::new(out, 0.0)
}
