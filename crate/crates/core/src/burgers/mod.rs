//! Front tracking for `∂ₜu = ¼∂ₓ(u²)`, `u = ∂ₓh`, by shearing the complete
//! graph of `u` along characteristics and cutting overhangs.

mod export;
mod track;

pub use export::{characteristics_svg, height_slices_csv, shocks_csv};
pub use track::{
    shocks_in, track_shocks, ClosedForm, ShockClass, ShockPoint, ShockRecord, ShockSample, SliceSource,
    TrackOptions, WedgeMax,
};

use crate::par::Exec;
use crate::pwfn::select::{select, Branch, Pick};
use crate::pwfn::{PiecewisePoly, PwError, Quad, CUT_CONTINUITY_TOL};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative size below which a derivative jump is treated as continuous.
pub const JUMP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BurgersError {
    #[error(transparent)]
    Piecewise(#[from] PwError),
    #[error("tails are not of the form -x^2/t")]
    NotTailLaw,
    #[error("equal states on both sides: contact discontinuity")]
    Contact,
    #[error("time {t} outside the evolution range ({lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("no slice at t = {0}")]
    MissingSlice(f64),
}

/// Shock speed `−(v₋ + v₊)/4`.
pub fn rh_velocity(v_left: f64, v_right: f64) -> Result<f64, BurgersError> {
    if v_left == v_right {
        return Err(BurgersError::Contact);
    }
    Ok(-(v_left + v_right) / 4.0)
}

/// Characteristic speed `−u/2`.
pub fn characteristic_velocity(u: f64) -> f64 {
    -u / 2.0
}

/// `A_{α,β}(t, x) = t·A_{α,β}(1, x/t)`.
pub fn a_wedge(alpha: f64, beta: f64, t: f64, x: f64) -> f64 {
    let r = beta.sqrt();
    let (a, b) = (alpha - r, alpha + r);
    let y = x / t;
    let v = if y >= a && y <= alpha {
        -2.0 * a * y + a * a
    } else if y > alpha && y <= b {
        -2.0 * b * y + b * b
    } else {
        -y * y
    };
    t * v
}

/// `A_{α,β}(t, ·)` as a piecewise polynomial.
pub fn a_wedge_slice(alpha: f64, beta: f64, t: f64) -> PiecewisePoly {
    let tail = Quad::new(0.0, 0.0, -1.0 / t);
    if beta <= 0.0 {
        return PiecewisePoly::parabola(tail);
    }
    let r = beta.sqrt();
    let (a, b) = (alpha - r, alpha + r);
    PiecewisePoly::from_pieces(&[
        (f64::NEG_INFINITY, a * t, tail),
        (a * t, alpha * t, Quad::new(a * a * t, -2.0 * a, 0.0)),
        (alpha * t, b * t, Quad::new(b * b * t, -2.0 * b, 0.0)),
        (b * t, f64::INFINITY, tail),
    ])
    .expect("wedge slice is continuous")
}

/// The complete graph of `u(t, ·)`: a polyline in the `(x, u)` plane with
/// vertical segments at jumps, continued by the rays `u = −2x/t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontState {
    pub time: f64,
    pub vertices: Vec<(f64, f64)>,
    pub cone_radius: f64,
    pub suspect: bool,
}

impl FrontState {
    /// Complete graph of the derivative of a slice whose tails are `−x²/t`.
    pub fn from_slice(h: &PiecewisePoly) -> Result<Self, BurgersError> {
        let t = h.tail_time().ok_or(BurgersError::NotTailLaw)?;
        let d = h.derivative();
        let mut vertices = Vec::with_capacity(2 * d.breakpoints.len());
        for i in 0..d.breakpoints.len() {
            let x = d.breakpoints[i];
            let (l, r) = d.limits(i);
            vertices.push((x, l));
            if (l - r).abs() > JUMP_TOL * (1.0 + l.abs().max(r.abs())) {
                vertices.push((x, r));
            }
        }
        let cone_radius = (h.compact_support_radius() / t).max(f64::MIN_POSITIVE);
        let c = cone_radius.max(1.0);
        let suspect = vertices.iter().any(|v| v.1.abs() > 10.0 * c);
        Ok(FrontState { time: t, vertices, cone_radius, suspect })
    }

    /// Vertical segments `(x, u_top_or_left, u_other)` in order.
    pub fn verticals(&self) -> Vec<(f64, f64, f64)> {
        self.vertices
            .windows(2)
            .filter(|w| w[0].0 == w[1].0 && w[0].1 != w[1].1)
            .map(|w| (w[0].0, w[0].1, w[1].1))
            .collect()
    }
}

/// Complete graph of `∂ₓφ` at the time encoded in the tail of `φ`.
pub fn complete_graph(phi: &PiecewisePoly) -> Result<FrontState, BurgersError> {
    FrontState::from_slice(phi)
}

/// A sheared complete graph, possibly with overhangs.
#[derive(Clone, Debug, PartialEq)]
pub struct ShearedCurve {
    pub from: f64,
    pub time: f64,
    pub vertices: Vec<(f64, f64)>,
    pub cone_radius: f64,
}

/// Move every point of the graph along its characteristic from `state.time` to `t`.
pub fn shear(state: &FrontState, t: f64) -> ShearedCurve {
    let k = (t - state.time) / 2.0;
    ShearedCurve {
        from: state.time,
        time: t,
        vertices: state.vertices.iter().map(|&(x, u)| (x - k * u, u)).collect(),
        cone_radius: state.cone_radius,
    }
}

/// Result of resolving the overhangs of a sheared graph.
#[derive(Clone, Debug)]
pub struct CutOutcome {
    pub state: FrontState,
    pub height: PiecewisePoly,
    /// Mismatch between the integrated height at the right tail and the tail law.
    pub area_defect: f64,
}

/// Replace overhangs by vertical cuts with equal lobe areas.
///
/// Integrating `u` along the sheared curve from the left tail gives every
/// branch a height; the cut keeps the lowest branch going backward and the
/// highest going forward, which is the same as cutting with equal areas.
pub fn cut(curve: &ShearedCurve) -> Result<CutOutcome, BurgersError> {
    let t = curve.time;
    let tail = Quad::new(0.0, 0.0, -1.0 / t);
    let origin = [(0.0, 0.0)];
    let v: &[(f64, f64)] = if curve.vertices.is_empty() { &origin } else { &curve.vertices };

    let mut branches = Vec::with_capacity(v.len() + 1);
    branches.push(Branch { lo: f64::NEG_INFINITY, hi: v[0].0, q: tail });
    let mut h = tail.eval(v[0].0);
    for w in v.windows(2) {
        let ((xa, ua), (xb, ub)) = (w[0], w[1]);
        let dx = xb - xa;
        if dx != 0.0 {
            let m = (ub - ua) / dx;
            let q = Quad::new(h - ua * xa + 0.5 * m * xa * xa, ua - m * xa, 0.5 * m);
            branches.push(Branch { lo: xa.min(xb), hi: xa.max(xb), q });
            h += 0.5 * (ua + ub) * dx;
        }
    }
    let x_end = v[v.len() - 1].0;
    branches.push(Branch { lo: x_end, hi: f64::INFINITY, q: tail });
    let area_defect = (h - tail.eval(x_end)).abs();

    let pick = if t < curve.from { Pick::Lower } else { Pick::Upper };
    let height = PiecewisePoly::from_pieces_with_tol(&select(&branches, pick)?, CUT_CONTINUITY_TOL)?;
    let mut state = FrontState::from_slice(&height)?;
    state.cone_radius = curve.cone_radius;
    Ok(CutOutcome { state, height, area_defect })
}

/// Direction of a Hopf–Lax evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Backward,
    Forward,
}

/// Evolution of a fixed complete graph to arbitrary times.
#[derive(Clone, Debug)]
pub struct Evolution {
    origin: FrontState,
    provenance: Provenance,
}

impl Evolution {
    /// Backward evolution from terminal data with tails `−x²`.
    pub fn backward(f_star: &PiecewisePoly) -> Result<Self, BurgersError> {
        if f_star.tail() != Quad::NEG_PARABOLA {
            return Err(BurgersError::NotTailLaw);
        }
        Ok(Evolution { origin: complete_graph(f_star)?, provenance: Provenance::Backward })
    }

    /// Backward evolution from a slice at time `s` (tails `−x²/s`).
    pub fn backward_from(h: &PiecewisePoly) -> Result<Self, BurgersError> {
        let s = h.tail_time().ok_or(BurgersError::NotTailLaw)?;
        if !(s > 0.0 && s <= 1.0) {
            return Err(BurgersError::NotTailLaw);
        }
        Ok(Evolution { origin: complete_graph(h)?, provenance: Provenance::Backward })
    }

    /// Forward evolution from data with tails `−x²/s`.
    pub fn forward(phi: &PiecewisePoly) -> Result<Self, BurgersError> {
        Ok(Evolution { origin: complete_graph(phi)?, provenance: Provenance::Forward })
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn origin(&self) -> &FrontState {
        &self.origin
    }

    /// Time range on which the evolution is defined.
    pub fn range(&self) -> (f64, f64) {
        match self.provenance {
            Provenance::Backward => (0.0, self.origin.time),
            Provenance::Forward => (self.origin.time, 1.0),
        }
    }

    pub fn cut_at(&self, t: f64) -> Result<CutOutcome, BurgersError> {
        let (lo, hi) = self.range();
        let ok = match self.provenance {
            Provenance::Backward => t > lo && t <= hi,
            Provenance::Forward => t >= lo && t <= hi,
        };
        if !ok {
            return Err(BurgersError::TimeOutOfRange { t, lo, hi });
        }
        cut(&shear(&self.origin, t))
    }
}

impl SliceSource for Evolution {
    fn slice(&self, t: f64) -> Result<PiecewisePoly, BurgersError> {
        Ok(self.cut_at(t)?.height)
    }

    fn span(&self) -> (f64, f64) {
        self.range()
    }

    fn opening(&self) -> Option<(f64, ShockClass)> {
        let fan = match self.provenance {
            Provenance::Backward => ShockClass::Entropy,
            Provenance::Forward => ShockClass::NonEntropy,
        };
        Some((self.origin.time, fan))
    }
}

/// Height slices `t ↦ h(t, ·)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub provenance: Provenance,
    pub slices: Vec<(f64, PiecewisePoly)>,
}

impl HeightField {
    pub fn slice(&self, t: f64) -> Option<&PiecewisePoly> {
        self.slices.iter().find(|s| s.0 == t).map(|s| &s.1)
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<f64, BurgersError> {
        Ok(self.slice(t).ok_or(BurgersError::MissingSlice(t))?.eval(x))
    }
}

fn evolve(
    evo: &Evolution,
    times: &[f64],
    opts: &TrackOptions,
    exec: Exec,
) -> Result<(HeightField, Vec<ShockRecord>), BurgersError> {
    let slices: Result<Vec<_>, _> = exec.map(times, |&t| evo.slice(t).map(|h| (t, h))).into_iter().collect();
    let field = HeightField { provenance: evo.provenance, slices: slices? };
    let shocks = track_shocks(evo, opts, exec)?;
    Ok((field, shocks))
}

/// Backward evolution of terminal data: height slices at `times` and the shock records.
pub fn backward_evolve(
    f_star: &PiecewisePoly,
    times: &[f64],
    opts: &TrackOptions,
    exec: Exec,
) -> Result<(HeightField, Vec<ShockRecord>), BurgersError> {
    evolve(&Evolution::backward(f_star)?, times, opts, exec)
}

/// Forward (entropy) evolution of data given at the time encoded in its tail.
pub fn forward_evolve(
    phi: &PiecewisePoly,
    times: &[f64],
    opts: &TrackOptions,
    exec: Exec,
) -> Result<(HeightField, Vec<ShockRecord>), BurgersError> {
    evolve(&Evolution::forward(phi)?, times, opts, exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wedge(alpha: f64, beta: f64) -> PiecewisePoly {
        a_wedge_slice(alpha, beta, 1.0)
    }

    #[test]
    fn rh_and_characteristics() {
        assert_eq!(rh_velocity(2.0, -2.0).unwrap(), 0.0);
        let (a, b) = (0.7_f64, 2.0_f64);
        let v = rh_velocity(-2.0 * (a - b.sqrt()), -2.0 * (a + b.sqrt())).unwrap();
        assert!((v - a).abs() < 1e-15);
        assert_eq!(rh_velocity(0.0, 0.0), Err(BurgersError::Contact));
        assert_eq!(characteristic_velocity(-2.0), 1.0);
        assert_eq!(characteristic_velocity(-2.0 * 0.3 / 0.5), 0.6);
    }

    #[test]
    fn a_wedge_examples() {
        assert_eq!(a_wedge(0.0, 1.0, 1.0, 0.0), 1.0);
        assert_eq!(a_wedge(0.0, 1.0, 0.5, 0.0), 0.5);
        assert_eq!(a_wedge(0.3, 0.0, 0.5, 0.7), -0.7 * 0.7 / 0.5);
        let s = a_wedge_slice(-0.4, 2.0, 0.6);
        for k in 0..50 {
            let x = -3.0 + 0.12 * k as f64;
            assert!((s.eval(x) - a_wedge(-0.4, 2.0, 0.6, x)).abs() < 1e-14);
        }
    }

    #[test]
    fn complete_graph_examples() {
        let g = complete_graph(&PiecewisePoly::neg_parabola()).unwrap();
        assert!(g.vertices.is_empty());
        let g = complete_graph(&wedge(0.0, 1.0)).unwrap();
        assert_eq!(g.vertices, vec![(-1.0, 2.0), (0.0, 2.0), (0.0, -2.0), (1.0, -2.0)]);
        assert_eq!(g.verticals(), vec![(0.0, 2.0, -2.0)]);
    }

    #[test]
    fn shear_moves_along_characteristics() {
        let s = FrontState { time: 1.0, vertices: vec![(0.0, 2.0), (3.0, -6.0)], cone_radius: 3.0, suspect: false };
        let c = shear(&s, 0.5);
        assert_eq!(c.vertices[0], (0.5, 2.0));
        assert_eq!(c.vertices[1], (1.5, -6.0));
        assert_eq!(-2.0 * c.vertices[1].0 / 0.5, -6.0);
    }

    #[test]
    fn no_overhang_is_identity() {
        let f = wedge(0.2, 1.5);
        let out = cut(&shear(&complete_graph(&f).unwrap(), 1.0)).unwrap();
        for k in 0..60 {
            let x = -3.0 + 0.1 * k as f64;
            assert!((out.height.eval(x) - f.eval(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn single_wedge_shock_along_ray() {
        let (alpha, beta) = (0.6, 2.0);
        let evo = Evolution::backward(&wedge(alpha, beta)).unwrap();
        for t in [0.9, 0.5, 0.1, 1e-4] {
            let out = evo.cut_at(t).unwrap();
            let v = out.state.verticals();
            assert_eq!(v.len(), 1);
            assert!((v[0].0 - alpha * t).abs() < 1e-12);
            assert!(v[0].1 > v[0].2);
            assert!(out.area_defect < 1e-10);
            for k in 0..=40 {
                let x = -3.0 * t + 0.15 * t * k as f64;
                assert!((out.height.eval(x) - a_wedge(alpha, beta, t, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parabola_is_stationary() {
        let evo = Evolution::backward(&PiecewisePoly::neg_parabola()).unwrap();
        let h = evo.slice(0.3).unwrap();
        assert_eq!(h, PiecewisePoly::parabola(Quad::new(0.0, 0.0, -1.0 / 0.3)));
    }

    #[test]
    fn forward_of_dirichlet_shape() {
        let phi = PiecewisePoly::parabola(Quad::new(0.0, 0.0, -1.0 / 0.25));
        let evo = Evolution::forward(&phi).unwrap();
        let h = evo.slice(0.8).unwrap();
        for x in [-2.0, 0.0, 1.0] {
            assert!((h.eval(x) + x * x / 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn single_wedge_tracking() {
        let (alpha, beta) = (0.6, 2.0);
        let evo = Evolution::backward(&wedge(alpha, beta)).unwrap();
        let recs = track_shocks(&evo, &TrackOptions::default(), Exec::default()).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.class, ShockClass::NonEntropy);
        assert_eq!(r.span(), (0.0, 1.0));
        let want = 4.0 / 3.0 * beta.powf(1.5);
        assert!((r.total_production() - want).abs() < 1e-9, "{}", r.total_production());
        let cf = r.closed_form.unwrap();
        assert!((cf.eval(0.37) - alpha * 0.37).abs() < 1e-9);
        assert!((r.position_at(0.5).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn m_shape_production_matches_energy() {
        let (e, f) = crate::envelope::e_bm_finite(&[(-1.0, 3.0), (0.0, 1.0), (1.0, 3.0)]).unwrap();
        let evo = Evolution::backward(&f).unwrap();
        let recs = track_shocks(&evo, &TrackOptions::default(), Exec::default()).unwrap();
        assert!(recs.iter().all(|r| r.class == ShockClass::NonEntropy));
        let total: f64 = recs.iter().map(ShockRecord::total_production).sum();
        assert!((total - e).abs() < 1e-8, "{total} vs {e}, {} records", recs.len());
        let serial = track_shocks(&evo, &TrackOptions::default(), Exec::Serial).unwrap();
        assert_eq!(serial, recs);
    }

    #[test]
    fn semigroup_backward() {
        let (_, f) = crate::envelope::e_bm_finite(&[(-1.0, 3.0), (0.0, 1.0), (1.0, 3.0)]).unwrap();
        let evo = Evolution::backward(&f).unwrap();
        let mid = evo.slice(0.6).unwrap();
        let evo2 = Evolution::backward_from(&mid).unwrap();
        let a = evo.slice(0.25).unwrap();
        let b = evo2.slice(0.25).unwrap();
        for k in 0..=80 {
            let x = -2.0 + 0.05 * k as f64;
            assert!((a.eval(x) - b.eval(x)).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn slices_solve_hamilton_jacobi_off_shocks() {
        let (_, f) = crate::envelope::e_bm_finite(&[(-1.0, 3.0), (0.0, 1.0), (1.0, 3.0)]).unwrap();
        let evo = Evolution::backward(&f).unwrap();
        let (t, dt) = (0.5, 1e-6);
        let (h0, h1) = (evo.slice(t - dt).unwrap(), evo.slice(t + dt).unwrap());
        let h = evo.slice(t).unwrap();
        let d = h.derivative();
        for k in 0..=60 {
            let x = -1.5 + 0.05 * k as f64 + 0.0123;
            let ht = (h1.eval(x) - h0.eval(x)) / (2.0 * dt);
            let hx = d.eval(x);
            assert!((ht - hx * hx / 4.0).abs() < 1e-5, "x={x} residual {}", ht - hx * hx / 4.0);
        }
    }

    #[test]
    fn rankine_hugoniot_along_tracks() {
        let (_, f) = crate::envelope::e_bm_finite(&[(-1.0, 3.0), (0.0, 1.0), (1.0, 3.0)]).unwrap();
        let evo = Evolution::backward(&f).unwrap();
        let recs = track_shocks(&evo, &TrackOptions::default(), Exec::default()).unwrap();
        let dt = 1e-6;
        let mut checked = 0;
        for r in &recs {
            let (lo, hi) = r.span();
            for s in r.samples.iter().filter(|s| s.t > lo.max(0.05) + 1e-4 && s.t < hi.min(0.95) - 1e-4) {
                let near = |t: f64| {
                    shocks_in(&evo.slice(t).unwrap())
                        .into_iter()
                        .min_by(|a, b| (a.x - s.x).abs().total_cmp(&(b.x - s.x).abs()))
                        .unwrap()
                        .x
                };
                let speed = (near(s.t + dt) - near(s.t - dt)) / (2.0 * dt);
                let v = rh_velocity(s.v_left, s.v_right).unwrap();
                assert!((speed - v).abs() < 1e-6 * (1.0 + v.abs()), "{speed} vs {v}");
                checked += 1;
            }
        }
        assert!(checked > 10);
    }
}
