//! Parabola-constrained interpolation: the concave extension of data on `I`
//! lying above the parabola, and the energy of that extension.

use crate::pwfn::{IntervalUnion, PiecewisePoly, PwError, Quad, RawPiecewise};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed when checking `f ≥ −x²`.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvelopeError {
    #[error("point ({x}, {y}) lies below the parabola")]
    Infeasible { x: f64, y: f64 },
    #[error("profile is discontinuous at x = {x} inside the support")]
    Discontinuous { x: f64 },
    #[error("empty support")]
    EmptySupport,
    #[error("abscissas must be strictly increasing (index {0})")]
    Unsorted(usize),
    #[error(transparent)]
    Piecewise(#[from] PwError),
}

/// Why an energy is infinite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfiniteReason {
    Infeasible,
    Discontinuous,
}

/// A rate value, possibly `+∞` with a reason.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Energy {
    Finite(f64),
    Infinite(InfiniteReason),
}

impl Energy {
    pub fn value(&self) -> Option<f64> {
        match self {
            Energy::Finite(v) => Some(*v),
            Energy::Infinite(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Energy::Finite(_))
    }
}

/// Apex of the parabola class `−(x−z)² + g`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wedge {
    pub z: f64,
    pub shift: f64,
}

/// Conditioning data `(I, f)` relative to a wedge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningData {
    #[serde(rename = "intervals")]
    pub support: IntervalUnion,
    pub profile: RawPiecewise,
    #[serde(default)]
    pub wedge: Wedge,
}

impl ConditioningData {
    pub fn new(support: IntervalUnion, profile: RawPiecewise) -> Self {
        ConditioningData { support, profile, wedge: Wedge::default() }
    }

    /// `I = {α}` with `f(α) = β − α²`.
    pub fn single_wedge(alpha: f64, beta: f64) -> Self {
        let support = IntervalUnion::points(&[alpha]).expect("single point");
        let profile = RawPiecewise { breakpoints: vec![], segments: vec![Quad::new(beta - alpha * alpha, 0.0, 0.0)] };
        Self::new(support, profile)
    }
}

/// Tangency abscissas `x0 ∓ √(x0² + y0)` of the tangents to `−x²` through `(x0, y0)`.
pub fn tangent_abscissas(x0: f64, y0: f64) -> Result<(f64, f64), EnvelopeError> {
    let d = x0 * x0 + y0;
    if d < -FEASIBILITY_TOL * (1.0 + x0 * x0) {
        return Err(EnvelopeError::Infeasible { x: x0, y: y0 });
    }
    let r = d.max(0.0).sqrt();
    Ok((x0 - r, x0 + r))
}

/// A piece of data on `I`: the endpoint values and the segments in between.
struct Block {
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    inner: Vec<(f64, f64, Quad)>,
}

fn point_block(x: f64, v: f64) -> Block {
    Block { a: x, fa: v, b: x, fb: v, inner: Vec::new() }
}

fn check_above(q: &Quad, lo: f64, hi: f64) -> Result<(), EnvelopeError> {
    let lift = q.add(&Quad::new(0.0, 0.0, 1.0));
    let mut probes = vec![lo, hi];
    if lift.c2 > 0.0 {
        let v = -lift.c1 / (2.0 * lift.c2);
        if v > lo && v < hi {
            probes.push(v);
        }
    }
    for x in probes {
        if lift.eval(x) < -FEASIBILITY_TOL * (1.0 + q.scale_at(x) + x * x) {
            return Err(EnvelopeError::Infeasible { x, y: q.eval(x) });
        }
    }
    Ok(())
}

/// Concave extension in the unshifted frame.
fn extend(blocks: &[Block]) -> Result<PiecewisePoly, EnvelopeError> {
    let first = blocks.first().ok_or(EnvelopeError::EmptySupport)?;
    let mut pieces: Vec<(f64, f64, Quad)> = Vec::new();

    let (p, _) = tangent_abscissas(first.a, first.fa)?;
    pieces.push((f64::NEG_INFINITY, p, Quad::NEG_PARABOLA));
    pieces.push((p, first.a, Quad::tangent_at(p)));

    for (k, blk) in blocks.iter().enumerate() {
        if k > 0 {
            let prev = &blocks[k - 1];
            let (_, p) = tangent_abscissas(prev.b, prev.fb)?;
            let (q, _) = tangent_abscissas(blk.a, blk.fa)?;
            if p < q {
                pieces.push((prev.b, p, Quad::tangent_at(p)));
                pieces.push((p, q, Quad::NEG_PARABOLA));
                pieces.push((q, blk.a, Quad::tangent_at(q)));
            } else {
                pieces.push((prev.b, blk.a, Quad::chord(prev.b, prev.fb, blk.a, blk.fa)));
            }
        }
        pieces.extend_from_slice(&blk.inner);
    }

    let last = blocks.last().unwrap();
    let (_, p) = tangent_abscissas(last.b, last.fb)?;
    pieces.push((last.b, p, Quad::tangent_at(p)));
    pieces.push((p, f64::INFINITY, Quad::NEG_PARABOLA));
    Ok(PiecewisePoly::from_pieces(&pieces)?)
}

fn blocks_from_data(support: &IntervalUnion, profile: &RawPiecewise) -> Result<Vec<Block>, EnvelopeError> {
    profile.check_shape()?;
    if support.is_empty() {
        return Err(EnvelopeError::EmptySupport);
    }
    let mut out = Vec::with_capacity(support.intervals().len());
    for &(a, b) in support.intervals() {
        if a == b {
            let v = profile.eval(a);
            check_above(&Quad::new(v, 0.0, 0.0), a, a)?;
            out.push(point_block(a, v));
            continue;
        }
        if let Some((x, _)) = profile.first_jump_in(a, b) {
            return Err(EnvelopeError::Discontinuous { x });
        }
        let mut inner = Vec::new();
        let mut lo = a;
        let mut i = profile.segment_index(a);
        loop {
            let hi = profile.breakpoints.get(i).copied().unwrap_or(f64::INFINITY).min(b);
            let q = profile.segments[i];
            check_above(&q, lo, hi)?;
            inner.push((lo, hi, q));
            if hi >= b {
                break;
            }
            lo = hi;
            i += 1;
        }
        let fa = inner[0].2.eval(a);
        let fb = inner.last().unwrap().2.eval(b);
        out.push(Block { a, fa, b, fb, inner });
    }
    Ok(out)
}

/// The minimizer `f*`: equal to the profile on `I`, concave envelope with the
/// wedge parabola elsewhere.
pub fn interpolate(data: &ConditioningData) -> Result<PiecewisePoly, EnvelopeError> {
    let Wedge { z, shift } = data.wedge;
    let (support, profile) = unshift(data)?;
    let f = extend(&blocks_from_data(&support, &profile)?)?;
    Ok(if z == 0.0 && shift == 0.0 { f } else { f.translate(z, shift) })
}

fn unshift(data: &ConditioningData) -> Result<(IntervalUnion, RawPiecewise), EnvelopeError> {
    let Wedge { z, shift } = data.wedge;
    if z == 0.0 && shift == 0.0 {
        return Ok((data.support.clone(), data.profile.clone()));
    }
    let support = IntervalUnion::new(data.support.intervals().iter().map(|&(a, b)| (a - z, b - z)).collect())?;
    let profile = RawPiecewise {
        breakpoints: data.profile.breakpoints.iter().map(|b| b - z).collect(),
        segments: data.profile.segments.iter().map(|q| q.translate(-z, -shift)).collect(),
    };
    Ok((support, profile))
}

/// `E_bm(I, f)`: energy of the minimizer, `+∞` with a reason when undefined.
pub fn e_bm(data: &ConditioningData) -> Energy {
    let energy = unshift(data)
        .and_then(|(s, p)| blocks_from_data(&s, &p))
        .and_then(|b| extend(&b))
        .and_then(|f| Ok(f.q_bm()?));
    match energy {
        Ok(v) => Energy::Finite(v),
        Err(EnvelopeError::Discontinuous { .. }) => Energy::Infinite(InfiniteReason::Discontinuous),
        Err(_) => Energy::Infinite(InfiniteReason::Infeasible),
    }
}

/// Finite-dimensional energy through points `(y_i, α_i)` and its minimizer.
pub fn e_bm_finite(points: &[(f64, f64)]) -> Result<(f64, PiecewisePoly), EnvelopeError> {
    if points.is_empty() {
        return Err(EnvelopeError::EmptySupport);
    }
    for (i, w) in points.windows(2).enumerate() {
        if w[1].0 <= w[0].0 {
            return Err(EnvelopeError::Unsorted(i + 1));
        }
    }
    let mut blocks = Vec::with_capacity(points.len());
    for &(y, a) in points {
        check_above(&Quad::new(a, 0.0, 0.0), y, y)?;
        blocks.push(point_block(y, a));
    }
    let f = extend(&blocks)?;
    Ok((f.q_bm()?, f))
}
