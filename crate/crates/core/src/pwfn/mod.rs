//! Continuous piecewise quadratic functions of one variable with parabolic tails.

mod quad;
pub(crate) mod select;

pub use quad::Quad;

use quad::close;
use select::{Branch, Pick};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Continuity tolerance (relative to the magnitude of the evaluated terms).
pub const CONTINUITY_TOL: f64 = 1e-12;
/// Looser continuity tolerance for slices assembled from branch crossings.
pub const CUT_CONTINUITY_TOL: f64 = 1e-9;
/// Breakpoints closer than this (relative) are merged.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PwError {
    #[error("expected {expected} segments for {breakpoints} breakpoints, got {got}")]
    SegmentCount { breakpoints: usize, expected: usize, got: usize },
    #[error("breakpoints must be finite and strictly increasing (index {0})")]
    Unsorted(usize),
    #[error("discontinuity of size {jump:e} at x = {x}")]
    Discontinuous { x: f64, jump: f64 },
    #[error("left and right tails differ")]
    TailMismatch,
    #[error("tails are not the parabola -x^2")]
    TailNotParabola,
    #[error("envelope branches leave a gap near x = {0}")]
    Coverage(f64),
    #[error("intervals must satisfy a <= b, be sorted and disjoint (index {0})")]
    BadIntervals(usize),
}

/// Breakpoints and segments without any continuity or tail requirement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPiecewise {
    pub breakpoints: Vec<f64>,
    pub segments: Vec<Quad>,
}

impl RawPiecewise {
    pub fn check_shape(&self) -> Result<(), PwError> {
        let n = self.breakpoints.len();
        if self.segments.len() != n + 1 {
            return Err(PwError::SegmentCount { breakpoints: n, expected: n + 1, got: self.segments.len() });
        }
        for (i, b) in self.breakpoints.iter().enumerate() {
            if !b.is_finite() || (i > 0 && *b <= self.breakpoints[i - 1]) {
                return Err(PwError::Unsorted(i));
            }
        }
        Ok(())
    }

    /// Index of the segment containing `x`; breakpoints belong to the right segment.
    pub fn segment_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|b| *b <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.segments[self.segment_index(x)].eval(x)
    }

    /// First breakpoint in the open interval `(a, b)` where the two sides disagree.
    pub fn first_jump_in(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        self.first_jump_with(a, b, CONTINUITY_TOL)
    }

    fn first_jump_with(&self, a: f64, b: f64, tol: f64) -> Option<(f64, f64)> {
        self.breakpoints.iter().enumerate().find_map(|(i, &x)| {
            if x <= a || x >= b {
                return None;
            }
            let (l, r) = (&self.segments[i], &self.segments[i + 1]);
            let (vl, vr) = (l.eval(x), r.eval(x));
            let scale = l.scale_at(x).max(r.scale_at(x));
            (!close(vl, vr, scale, tol)).then_some((x, vr - vl))
        })
    }
}

/// Continuous piecewise polynomial of degree ≤ 2 whose two unbounded segments
/// coincide (the tail parabola).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise", into = "RawPiecewise")]
pub struct PiecewisePoly {
    breakpoints: Vec<f64>,
    segments: Vec<Quad>,
}

impl TryFrom<RawPiecewise> for PiecewisePoly {
    type Error = PwError;
    fn try_from(r: RawPiecewise) -> Result<Self, PwError> {
        PiecewisePoly::new(r.breakpoints, r.segments)
    }
}

impl From<PiecewisePoly> for RawPiecewise {
    fn from(p: PiecewisePoly) -> Self {
        RawPiecewise { breakpoints: p.breakpoints, segments: p.segments }
    }
}

impl PiecewisePoly {
    pub fn new(breakpoints: Vec<f64>, segments: Vec<Quad>) -> Result<Self, PwError> {
        Self::new_with_tol(breakpoints, segments, CONTINUITY_TOL)
    }

    fn new_with_tol(breakpoints: Vec<f64>, segments: Vec<Quad>, tol: f64) -> Result<Self, PwError> {
        let raw = RawPiecewise { breakpoints, segments };
        raw.check_shape()?;
        if raw.segments[0] != *raw.segments.last().unwrap() {
            return Err(PwError::TailMismatch);
        }
        if let Some((x, jump)) = raw.first_jump_with(f64::NEG_INFINITY, f64::INFINITY, tol) {
            return Err(PwError::Discontinuous { x, jump });
        }
        Ok(PiecewisePoly { breakpoints: raw.breakpoints, segments: raw.segments })
    }

    /// The bare tail parabola, no breakpoints.
    pub fn parabola(tail: Quad) -> Self {
        PiecewisePoly { breakpoints: vec![], segments: vec![tail] }
    }

    /// `−x²`.
    pub fn neg_parabola() -> Self {
        Self::parabola(Quad::NEG_PARABOLA)
    }

    /// Assemble from consecutive pieces `(lo, hi, q)` covering ℝ. Zero-length
    /// pieces are dropped and equal neighbours merged.
    pub fn from_pieces(pieces: &[(f64, f64, Quad)]) -> Result<Self, PwError> {
        Self::from_pieces_with_tol(pieces, CONTINUITY_TOL)
    }

    /// [`Self::from_pieces`] with continuity checked to relative `tol`.
    pub fn from_pieces_with_tol(pieces: &[(f64, f64, Quad)], tol: f64) -> Result<Self, PwError> {
        let mut kept: Vec<(f64, f64, Quad)> = Vec::with_capacity(pieces.len());
        for &(lo, hi, q) in pieces {
            let tiny = hi - lo <= DEDUP_TOL * (1.0 + lo.abs().max(hi.abs()));
            if tiny && lo.is_finite() && hi.is_finite() {
                continue;
            }
            match kept.last_mut() {
                Some(p) if p.2 == q => p.1 = hi,
                _ => kept.push((lo, hi, q)),
            }
        }
        let breakpoints = kept[..kept.len() - 1].iter().map(|p| p.1).collect();
        let segments = kept.iter().map(|p| p.2).collect();
        Self::new_with_tol(breakpoints, segments, tol)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Quad] {
        &self.segments
    }

    pub fn tail(&self) -> Quad {
        self.segments[0]
    }

    /// Time `t` such that the tail is `−x²/t`, when the tail has that form.
    pub fn tail_time(&self) -> Option<f64> {
        let q = self.tail();
        (q.c0 == 0.0 && q.c1 == 0.0 && q.c2 < 0.0).then(|| -1.0 / q.c2)
    }

    /// Smallest `c > 0` with all breakpoints in `[−c, c]`.
    pub fn compact_support_radius(&self) -> f64 {
        let lo = self.breakpoints.first().map_or(0.0, |x| x.abs());
        let hi = self.breakpoints.last().map_or(0.0, |x| x.abs());
        lo.max(hi).max(f64::MIN_POSITIVE)
    }

    pub fn pieces(&self) -> Vec<(f64, f64, Quad)> {
        let n = self.breakpoints.len();
        (0..=n)
            .map(|i| {
                let lo = if i == 0 { f64::NEG_INFINITY } else { self.breakpoints[i - 1] };
                let hi = if i == n { f64::INFINITY } else { self.breakpoints[i] };
                (lo, hi, self.segments[i])
            })
            .collect()
    }

    pub fn segment_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|b| *b <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.segments[self.segment_index(x)].eval(x)
    }

    /// Left and right derivative at `x`.
    pub fn slopes_at(&self, x: f64) -> (f64, f64) {
        let r = self.segment_index(x);
        let l = if r > 0 && self.breakpoints[r - 1] == x { r - 1 } else { r };
        (self.segments[l].slope(x), self.segments[r].slope(x))
    }

    pub fn derivative(&self) -> PiecewiseLinear {
        PiecewiseLinear {
            breakpoints: self.breakpoints.clone(),
            segments: self.segments.iter().map(|q| [q.c1, 2.0 * q.c2]).collect(),
        }
    }

    /// `(1/4)∫((φ′)² − (τ′)²) dx` where `τ` is the tail parabola.
    pub fn tail_energy(&self) -> f64 {
        let t = self.tail();
        let mut acc = 0.0;
        for (i, w) in self.breakpoints.windows(2).enumerate() {
            let q = self.segments[i + 1];
            let integrand = Quad::new(
                q.c1 * q.c1 - t.c1 * t.c1,
                4.0 * (q.c1 * q.c2 - t.c1 * t.c2),
                4.0 * (q.c2 * q.c2 - t.c2 * t.c2),
            );
            acc += integrand.integrate(w[0], w[1]);
        }
        0.25 * acc
    }

    /// Dirichlet energy relative to `−x²`.
    pub fn q_bm(&self) -> Result<f64, PwError> {
        if self.tail() != Quad::NEG_PARABOLA {
            return Err(PwError::TailNotParabola);
        }
        Ok(self.tail_energy())
    }

    /// Pointwise maximum of two functions sharing a tail.
    pub fn upper_envelope(&self, other: &PiecewisePoly) -> Result<PiecewisePoly, PwError> {
        Self::envelope_of(&[self, other], Pick::Upper)
    }

    /// Pointwise minimum of two functions sharing a tail.
    pub fn lower_envelope(&self, other: &PiecewisePoly) -> Result<PiecewisePoly, PwError> {
        Self::envelope_of(&[self, other], Pick::Lower)
    }

    /// Pointwise maximum of any number of functions sharing a tail.
    pub fn max_of(fs: &[&PiecewisePoly]) -> Result<PiecewisePoly, PwError> {
        Self::envelope_of(fs, Pick::Upper)
    }

    fn envelope_of(fs: &[&PiecewisePoly], pick: Pick) -> Result<PiecewisePoly, PwError> {
        let tail = fs[0].tail();
        if fs.iter().any(|f| f.tail() != tail) {
            return Err(PwError::TailMismatch);
        }
        let branches: Vec<Branch> = fs
            .iter()
            .flat_map(|f| f.pieces())
            .map(|(lo, hi, q)| Branch { lo, hi, q })
            .collect();
        PiecewisePoly::from_pieces(&select::select(&branches, pick)?)
    }

    /// `x ↦ φ(x − z) + g`.
    pub fn translate(&self, z: f64, g: f64) -> PiecewisePoly {
        PiecewisePoly {
            breakpoints: self.breakpoints.iter().map(|b| b + z).collect(),
            segments: self.segments.iter().map(|q| q.translate(z, g)).collect(),
        }
    }

    /// `x ↦ φ(−x)`.
    pub fn reflect(&self) -> PiecewisePoly {
        PiecewisePoly {
            breakpoints: self.breakpoints.iter().rev().map(|b| -b).collect(),
            segments: self.segments.iter().rev().map(Quad::reflect).collect(),
        }
    }
}

/// Piecewise linear function, possibly discontinuous at breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    pub breakpoints: Vec<f64>,
    /// `[c0, c1]` meaning `c0 + c1·x`.
    pub segments: Vec<[f64; 2]>,
}

/// A jump discontinuity `(x, left limit, right limit)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump {
    pub x: f64,
    pub left: f64,
    pub right: f64,
}

impl PiecewiseLinear {
    pub fn eval(&self, x: f64) -> f64 {
        let s = self.segments[self.breakpoints.partition_point(|b| *b <= x)];
        s[0] + s[1] * x
    }

    pub fn limits(&self, i: usize) -> (f64, f64) {
        let x = self.breakpoints[i];
        let (l, r) = (self.segments[i], self.segments[i + 1]);
        (l[0] + l[1] * x, r[0] + r[1] * x)
    }

    /// All breakpoints where the limits differ by more than `tol` relative to
    /// the size of the terms evaluated.
    pub fn jumps(&self, tol: f64) -> Vec<Jump> {
        (0..self.breakpoints.len())
            .filter_map(|i| {
                let (left, right) = self.limits(i);
                let x = self.breakpoints[i];
                let (l, r) = (self.segments[i], self.segments[i + 1]);
                let scale = (l[0].abs() + (l[1] * x).abs()).max(r[0].abs() + (r[1] * x).abs());
                (!close(left, right, scale, tol)).then_some(Jump { x: self.breakpoints[i], left, right })
            })
            .collect()
    }

    /// Antiderivative taking `value` at `anchor`.
    pub fn integrate(&self, anchor: f64, value: f64) -> PiecewisePoly {
        let n = self.breakpoints.len();
        let mut segs: Vec<Quad> = self.segments.iter().map(|s| Quad::new(0.0, s[0], 0.5 * s[1])).collect();
        let k = self.breakpoints.partition_point(|b| *b <= anchor);
        segs[k].c0 = value - segs[k].eval(anchor);
        for i in k..n {
            let x = self.breakpoints[i];
            segs[i + 1].c0 += segs[i].eval(x) - segs[i + 1].eval(x);
        }
        for i in (0..k).rev() {
            let x = self.breakpoints[i];
            segs[i].c0 += segs[i + 1].eval(x) - segs[i].eval(x);
        }
        PiecewisePoly { breakpoints: self.breakpoints.clone(), segments: segs }
    }
}

/// Finite union of disjoint closed intervals, sorted; single points allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl TryFrom<Vec<[f64; 2]>> for IntervalUnion {
    type Error = PwError;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self, PwError> {
        IntervalUnion::new(v.into_iter().map(|[a, b]| (a, b)).collect())
    }
}

impl From<IntervalUnion> for Vec<[f64; 2]> {
    fn from(u: IntervalUnion) -> Self {
        u.intervals.into_iter().map(|(a, b)| [a, b]).collect()
    }
}

impl IntervalUnion {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self, PwError> {
        for (i, &(a, b)) in intervals.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a <= b) || (i > 0 && a <= intervals[i - 1].1) {
                return Err(PwError::BadIntervals(i));
            }
        }
        Ok(IntervalUnion { intervals })
    }

    pub fn points(xs: &[f64]) -> Result<Self, PwError> {
        Self::new(xs.iter().map(|&x| (x, x)).collect())
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }

    /// `I ∩ (ℤ/m)`.
    pub fn lattice_points(&self, m: u32) -> Vec<f64> {
        let m = m as f64;
        self.intervals
            .iter()
            .flat_map(|&(a, b)| {
                let (lo, hi) = ((a * m).ceil() as i64, (b * m).floor() as i64);
                (lo..=hi).map(move |k| k as f64 / m)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wedge(alpha: f64, beta: f64) -> PiecewisePoly {
        let r = beta.sqrt();
        let (a, b) = (alpha - r, alpha + r);
        PiecewisePoly::from_pieces(&[
            (f64::NEG_INFINITY, a, Quad::NEG_PARABOLA),
            (a, alpha, Quad::tangent_at(a)),
            (alpha, b, Quad::tangent_at(b)),
            (b, f64::INFINITY, Quad::NEG_PARABOLA),
        ])
        .unwrap()
    }

    fn hat() -> PiecewisePoly {
        PiecewisePoly::new(
            vec![-1.0, 0.0, 1.0],
            vec![Quad::NEG_PARABOLA, Quad::line(1.0, 0.0), Quad::line(-1.0, 0.0), Quad::NEG_PARABOLA],
        )
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(PiecewisePoly::neg_parabola().eval(2.0), -4.0);
        let f = wedge(0.0, 1.0);
        assert_eq!(f.eval(0.0), 1.0);
        assert_eq!(f.eval(0.5), 0.0);
    }

    #[test]
    fn derivative_examples() {
        let d = PiecewisePoly::neg_parabola().derivative();
        assert_eq!(d.eval(1.5), -3.0);
        assert!(d.jumps(1e-12).is_empty());

        let d = wedge(0.0, 1.0).derivative();
        assert_eq!(d.eval(-0.5), 2.0);
        assert_eq!(d.eval(0.5), -2.0);
        assert_eq!(d.eval(3.0), -6.0);
        let j = d.jumps(1e-12);
        assert_eq!(j, vec![Jump { x: 0.0, left: 2.0, right: -2.0 }]);

        let j = hat().derivative().jumps(1e-12);
        let at0 = j.iter().find(|j| j.x == 0.0).unwrap();
        assert_eq!(at0.right - at0.left, -2.0);
    }

    #[test]
    fn q_bm_examples() {
        assert_eq!(PiecewisePoly::neg_parabola().q_bm().unwrap(), 0.0);
        assert!((wedge(0.0, 1.0).q_bm().unwrap() - 4.0 / 3.0).abs() < 1e-14);
        for (a, b) in [(-1.0, 0.25), (2.0, 4.0), (0.3, 2.0)] {
            let want = 4.0 / 3.0 * f64::powf(b, 1.5);
            assert!((wedge(a, b).q_bm().unwrap() - want).abs() < 1e-12 * (1.0 + want));
        }
        let shifted = PiecewisePoly::parabola(Quad::new(1.0, 0.0, -1.0));
        assert_eq!(shifted.q_bm(), Err(PwError::TailNotParabola));
    }

    #[test]
    fn q_bm_against_quadrature() {
        let f = wedge(0.4, 1.7);
        let n = 200_000;
        let (a, b) = (-3.0, 3.0);
        let h = (b - a) / n as f64;
        let d = f.derivative();
        let s: f64 = (0..n)
            .map(|i| {
                let x = a + (i as f64 + 0.5) * h;
                let u = d.eval(x);
                u * u - 4.0 * x * x
            })
            .sum();
        assert!((0.25 * s * h - f.q_bm().unwrap()).abs() < 1e-4);
    }

    #[test]
    fn upper_envelope_examples() {
        let f = wedge(0.0, 1.0);
        assert_eq!(f.upper_envelope(&f).unwrap(), f);
        let m = wedge(1.0, 1.0).upper_envelope(&wedge(-1.0, 1.0)).unwrap();
        assert!(m.eval(0.0).abs() < 1e-15);
        assert!(m.eval(1.0).abs() < 1e-15);
        assert!(m.eval(-1.0).abs() < 1e-15);
    }

    #[test]
    fn crossing_envelope_has_kink() {
        let m = wedge(0.5, 1.0).upper_envelope(&wedge(-0.5, 1.0)).unwrap();
        let (l, r) = m.slopes_at(0.0);
        assert!((l + 1.0).abs() < 1e-14 && (r - 1.0).abs() < 1e-14);
        assert!((m.eval(0.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_discontinuity_and_tail_mismatch() {
        let e = PiecewisePoly::new(vec![0.0], vec![Quad::NEG_PARABOLA, Quad::new(1.0, 0.0, -1.0)]);
        assert_eq!(e, Err(PwError::TailMismatch));
        let e = PiecewisePoly::new(
            vec![0.0, 1.0],
            vec![Quad::NEG_PARABOLA, Quad::new(1.0, 0.0, 0.0), Quad::NEG_PARABOLA],
        );
        assert!(matches!(e, Err(PwError::Discontinuous { .. })));
    }

    #[test]
    fn json_round_trip() {
        let f = wedge(0.3, 2.0);
        let s = serde_json::to_string(&f).unwrap();
        let g: PiecewisePoly = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        assert!(s.contains("breakpoints") && s.contains("segments"));
    }

    #[test]
    fn interval_union_validation() {
        assert!(IntervalUnion::new(vec![(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(IntervalUnion::new(vec![(1.0, 0.0)]).is_err());
        let u = IntervalUnion::new(vec![(-1.0, -0.5), (0.2, 0.2)]).unwrap();
        assert!(u.contains(0.2) && !u.contains(0.0));
        assert_eq!(u.lattice_points(4), vec![-1.0, -0.75, -0.5]);
    }

    #[test]
    fn integrate_round_trip() {
        let f = wedge(-0.7, 0.9);
        let g = f.derivative().integrate(0.3, f.eval(0.3));
        for x in [-3.0, -1.1, -0.7, 0.0, 0.25, 2.0] {
            assert!((f.eval(x) - g.eval(x)).abs() < 1e-12);
        }
    }
}
