//! Shock extraction and adaptive tracking in time.

use super::{a_wedge_slice, BurgersError, JUMP_TOL};
use crate::par::Exec;
use crate::pwfn::PiecewisePoly;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Anything that yields height slices `h(t, ·)` on a time span.
pub trait SliceSource: Sync {
    fn slice(&self, t: f64) -> Result<PiecewisePoly, BurgersError>;
    /// `(lo, hi)`: slices exist on `(lo, hi]` (or `[lo, hi]` when `lo > 0`).
    fn span(&self) -> (f64, f64);
    /// Time the data is given at and the class of kink that opens into a
    /// fan from there.
    fn opening(&self) -> Option<(f64, ShockClass)> {
        None
    }
}

/// Maximum of single-wedge solutions `A_{α,β}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WedgeMax {
    pub wedges: Vec<(f64, f64)>,
}

impl SliceSource for WedgeMax {
    fn slice(&self, t: f64) -> Result<PiecewisePoly, BurgersError> {
        let parts: Vec<PiecewisePoly> = self.wedges.iter().map(|&(a, b)| a_wedge_slice(a, b, t)).collect();
        let refs: Vec<&PiecewisePoly> = parts.iter().collect();
        Ok(PiecewisePoly::max_of(&refs)?)
    }

    fn span(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockClass {
    Entropy,
    NonEntropy,
    Contact,
}

impl ShockClass {
    pub fn of(v_left: f64, v_right: f64) -> Self {
        if v_left > v_right {
            ShockClass::NonEntropy
        } else if v_left < v_right {
            ShockClass::Entropy
        } else {
            ShockClass::Contact
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ShockClass::Entropy => "entropy",
            ShockClass::NonEntropy => "non_entropy",
            ShockClass::Contact => "contact",
        }
    }
}

/// A derivative jump of one slice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockPoint {
    pub x: f64,
    pub v_left: f64,
    pub v_right: f64,
}

impl ShockPoint {
    pub fn jump(&self) -> f64 {
        self.v_left - self.v_right
    }

    pub fn class(&self) -> ShockClass {
        ShockClass::of(self.v_left, self.v_right)
    }

    /// Entropy production rate `|v₋ − v₊|³/48`.
    pub fn production_rate(&self) -> f64 {
        self.jump().abs().powi(3) / 48.0
    }
}

/// Jumps of `∂ₓh` in increasing `x`.
pub fn shocks_in(h: &PiecewisePoly) -> Vec<ShockPoint> {
    h.derivative()
        .jumps(JUMP_TOL)
        .into_iter()
        .map(|j| ShockPoint { x: j.x, v_left: j.left, v_right: j.right })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockSample {
    pub t: f64,
    pub x: f64,
    pub v_left: f64,
    pub v_right: f64,
}

/// `ℓ(t) = p1(t) + sign·√p2(t)` with `p1` linear and `p2` quadratic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub p1: [f64; 2],
    pub p2: [f64; 3],
    pub sign: f64,
    pub residual: f64,
}

impl ClosedForm {
    pub fn eval(&self, t: f64) -> f64 {
        let p1 = self.p1[0] + self.p1[1] * t;
        let p2 = self.p2[0] + t * (self.p2[1] + t * self.p2[2]);
        p1 + self.sign * p2.max(0.0).sqrt()
    }

    /// Least-squares fit of `ℓ² = 2·p1·ℓ + r` (linear in the unknowns).
    pub fn fit(samples: &[ShockSample]) -> Option<ClosedForm> {
        if samples.len() < 7 {
            return None;
        }
        let n = samples.len();
        let a = DMatrix::from_fn(n, 5, |i, j| {
            let (t, l) = (samples[i].t, samples[i].x);
            [2.0 * l, 2.0 * l * t, 1.0, t, t * t][j]
        });
        let b = DVector::from_fn(n, |i, _| samples[i].x * samples[i].x);
        let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
        let (a0, a1) = (sol[0], sol[1]);
        let p1 = [a0, a1];
        let p2 = [sol[2] + a0 * a0, sol[3] + 2.0 * a0 * a1, sol[4] + a1 * a1];
        let above = samples.iter().filter(|s| s.x >= a0 + a1 * s.t).count();
        let sign = if 2 * above >= n { 1.0 } else { -1.0 };
        let mut cf = ClosedForm { p1, p2, sign, residual: 0.0 };
        let scale = samples.iter().fold(1.0_f64, |m, s| m.max(s.x.abs()));
        cf.residual = samples.iter().fold(0.0_f64, |m, s| m.max((cf.eval(s.t) - s.x).abs()));
        (cf.residual < 1e-8 * scale).then_some(cf)
    }
}

/// A shock path sampled in time, with the entropy produced on each panel
/// between consecutive samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockRecord {
    pub samples: Vec<ShockSample>,
    /// `∫|v₋ − v₊|³/48 dt` over `[samples[k].t, samples[k+1].t]`.
    pub production: Vec<f64>,
    pub class: ShockClass,
    pub closed_form: Option<ClosedForm>,
}

impl ShockRecord {
    pub fn total_production(&self) -> f64 {
        self.production.iter().sum()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.samples[0].t, self.samples[self.samples.len() - 1].t)
    }

    /// Linear interpolation of the sampled path.
    pub fn position_at(&self, t: f64) -> Option<f64> {
        let k = self.samples.partition_point(|s| s.t < t);
        if k == 0 {
            return (self.samples[0].t == t).then_some(self.samples[0].x);
        }
        let b = self.samples.get(k)?;
        let a = &self.samples[k - 1];
        Some(a.x + (b.x - a.x) * (t - a.t) / (b.t - a.t))
    }
}

/// Tolerances for [`track_shocks`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackOptions {
    /// Smallest time sampled when the span reaches `t = 0`.
    pub t_floor: f64,
    /// Quadrature tolerance per unit time.
    pub tol: f64,
    /// Allowed deviation of a path from its chord on each panel.
    pub path_tol: f64,
    /// Width at which topology changes are considered located.
    pub event_tol: f64,
    pub uniform_panels: usize,
    pub geometric_panels: usize,
    pub max_depth: u32,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions {
            t_floor: 1e-6,
            tol: 1e-10,
            path_tol: 1e-7,
            event_tol: 1e-11,
            uniform_panels: 32,
            geometric_panels: 24,
            max_depth: 60,
        }
    }
}

enum Piece {
    Stable { a: f64, b: f64, sa: Vec<ShockPoint>, sb: Vec<ShockPoint>, prod: Vec<f64> },
    Event,
}

struct Tracker<'a> {
    src: &'a dyn SliceSource,
    opts: &'a TrackOptions,
}

fn compatible(sa: &[ShockPoint], sb: &[ShockPoint], ta: f64, tb: f64) -> bool {
    sa.len() == sb.len()
        && sa.iter().zip(sb).all(|(p, q)| {
            let vmax = p.v_left.abs().max(p.v_right.abs()).max(q.v_left.abs()).max(q.v_right.abs());
            p.class() == q.class() && (q.x - p.x).abs() <= 0.75 * vmax * (tb - ta) + 1e-12 * (1.0 + p.x.abs())
        })
}

fn simpson(w: f64, fa: &[ShockPoint], fm: &[ShockPoint], fb: &[ShockPoint]) -> Vec<f64> {
    (0..fa.len())
        .map(|k| w / 6.0 * (fa[k].production_rate() + 4.0 * fm[k].production_rate() + fb[k].production_rate()))
        .collect()
}

fn chord_gap(sa: &[ShockPoint], sm: &[ShockPoint], sb: &[ShockPoint]) -> f64 {
    (0..sa.len()).fold(0.0, |m, k| m.max((sm[k].x - 0.5 * (sa[k].x + sb[k].x)).abs()))
}

impl Tracker<'_> {
    fn at(&self, t: f64) -> Result<Vec<ShockPoint>, BurgersError> {
        let mut s = shocks_in(&self.src.slice(t)?);
        if let Some((t0, fan)) = self.src.opening() {
            if t == t0 {
                s.retain(|p| p.class() != fan);
            }
        }
        Ok(s)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &self,
        a: f64,
        m: f64,
        b: f64,
        sa: Vec<ShockPoint>,
        sm: Vec<ShockPoint>,
        sb: Vec<ShockPoint>,
        depth: u32,
        out: &mut Vec<Piece>,
    ) -> Result<(), BurgersError> {
        let w = b - a;
        let tiny = w <= self.opts.event_tol * b.max(1.0) || depth >= self.opts.max_depth;
        if tiny {
            if compatible(&sa, &sb, a, b) {
                let prod = (0..sa.len()).map(|k| 0.5 * w * (sa[k].production_rate() + sb[k].production_rate())).collect();
                out.push(Piece::Stable { a, b, sa, sb, prod });
            } else {
                out.push(Piece::Event);
            }
            return Ok(());
        }
        let (q1, q3) = (0.5 * (a + m), 0.5 * (m + b));
        let (s1, s3) = (self.at(q1)?, self.at(q3)?);
        let stable = compatible(&sa, &s1, a, q1)
            && compatible(&s1, &sm, q1, m)
            && compatible(&sm, &s3, m, q3)
            && compatible(&s3, &sb, q3, b);
        if stable {
            let whole = simpson(w, &sa, &sm, &sb);
            let left = simpson(m - a, &sa, &s1, &sm);
            let right = simpson(b - m, &sm, &s3, &sb);
            let err = (0..whole.len()).fold(0.0_f64, |e, k| e.max((left[k] + right[k] - whole[k]).abs()));
            let gap = chord_gap(&sa, &s1, &sm).max(chord_gap(&sm, &s3, &sb));
            if err <= 15.0 * self.opts.tol * w && gap <= self.opts.path_tol {
                out.push(Piece::Stable { a, b: m, sa, sb: sm.clone(), prod: left });
                out.push(Piece::Stable { a: m, b, sa: sm, sb, prod: right });
                return Ok(());
            }
        }
        self.refine(a, q1, m, sa, s1, sm.clone(), depth + 1, out)?;
        self.refine(m, q3, b, sm, s3, sb, depth + 1, out)
    }
}

fn base_nodes(lo: f64, hi: f64, opts: &TrackOptions) -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..=opts.uniform_panels)
        .map(|k| lo + (hi - lo) * k as f64 / opts.uniform_panels as f64)
        .collect();
    if lo > 0.0 && opts.geometric_panels > 0 {
        let r = (hi / lo).ln();
        nodes.extend((1..opts.geometric_panels).map(|k| lo * (r * k as f64 / opts.geometric_panels as f64).exp()));
    }
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1e-300));
    *nodes.last_mut().unwrap() = hi;
    nodes[0] = lo;
    nodes
}

/// Follow every shock of `src` through its span, integrating entropy
/// production per panel by adaptive Simpson quadrature and splitting records
/// at topology changes.
pub fn track_shocks(src: &dyn SliceSource, opts: &TrackOptions, exec: Exec) -> Result<Vec<ShockRecord>, BurgersError> {
    let (lo, hi) = src.span();
    let t_lo = if lo == 0.0 { opts.t_floor.min(hi) } else { lo };
    let nodes = base_nodes(t_lo, hi, opts);
    let mids: Vec<f64> = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let tracker = Tracker { src, opts };

    let at_nodes: Result<Vec<_>, _> = exec.map(&nodes, |&t| tracker.at(t)).into_iter().collect();
    let at_nodes = at_nodes?;
    let panels: Result<Vec<Vec<Piece>>, BurgersError> = exec
        .map_range(mids.len(), |i| {
            let mut out = Vec::new();
            let sm = tracker.at(mids[i])?;
            tracker.refine(nodes[i], mids[i], nodes[i + 1], at_nodes[i].clone(), sm, at_nodes[i + 1].clone(), 0, &mut out)?;
            Ok(out)
        })
        .into_iter()
        .collect();

    let mut records: Vec<ShockRecord> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    let mut last_end: Option<f64> = None;
    for piece in panels?.into_iter().flatten() {
        match piece {
            Piece::Event => {
                open.clear();
                last_end = None;
            }
            Piece::Stable { a, b, sa, sb, prod } => {
                if last_end != Some(a) || open.len() != sa.len() {
                    open = sa
                        .iter()
                        .map(|p| {
                            records.push(ShockRecord {
                                samples: vec![ShockSample { t: a, x: p.x, v_left: p.v_left, v_right: p.v_right }],
                                production: Vec::new(),
                                class: p.class(),
                                closed_form: None,
                            });
                            records.len() - 1
                        })
                        .collect();
                }
                for (k, p) in sb.iter().enumerate() {
                    let r = &mut records[open[k]];
                    r.samples.push(ShockSample { t: b, x: p.x, v_left: p.v_left, v_right: p.v_right });
                    r.production.push(prod[k]);
                }
                last_end = Some(b);
            }
        }
    }

    for r in &mut records {
        if lo == 0.0 && r.samples[0].t == t_lo && t_lo > 0.0 {
            let s = r.samples[0];
            let rate = ShockPoint { x: s.x, v_left: s.v_left, v_right: s.v_right }.production_rate();
            r.samples.insert(0, ShockSample { t: 0.0, x: 0.0, ..s });
            r.production.insert(0, rate * t_lo);
        }
        r.closed_form = ClosedForm::fit(&r.samples);
    }
    Ok(records)
}
