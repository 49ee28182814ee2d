//! Lattice dynamic programs for the Hopf–Lax evolutions and for the height
//! function `Hfn[μ](t, x) = e_μ(0, 0; t, x)` of a path measure.
//!
//! Each time level stores values on knots: the lattice nodes plus, for
//! measure problems, the positions of the atoms alive at that time. Between
//! knots a level is interpolated linearly. A free step maximizes (or
//! minimizes) `h(y) ∓ (x − y)²/Δt` over the interpolant in closed form on each
//! cell inside the hop window; a step along an atom collects
//! `∫(ρ − γ̇²) dt` exactly.

use crate::burgers::{BurgersError, SliceSource};
use crate::measures::{Atom, MeasureError, PathMeasure};
use crate::par::Exec;
use crate::pwfn::PiecewisePoly;
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use thiserror::Error;

const SNAP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("invalid lattice: {0}")]
    BadLattice(&'static str),
    #[error("atom {atom} leaves the lattice at (t, x) = ({t}, {x})")]
    AtomOutside { atom: usize, t: f64, x: f64 },
    #[error("initial profile does not have the tail law of the seed time")]
    NotTailLaw,
    #[error("measures do not share a common support")]
    Incomparable,
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Burgers(#[from] BurgersError),
}

/// Uniform space-time lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    /// Hop window, in space cells per time step.
    pub max_hop: usize,
}

impl LatticeSpec {
    /// `[t_min, 1] × [−x_max, x_max]`.
    pub fn symmetric(t_min: f64, n_t: usize, x_max: f64, n_x: usize, max_hop: usize) -> Self {
        LatticeSpec { t_min, t_max: 1.0, n_t, x_min: -x_max, x_max, n_x, max_hop }
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.n_t == 0 || self.n_x == 0 {
            return Err(MetricError::BadLattice("need at least one step in each direction"));
        }
        if !(self.t_min > 0.0 && self.t_min < self.t_max) {
            return Err(MetricError::BadLattice("need 0 < t_min < t_max"));
        }
        if !(self.x_min < self.x_max) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(MetricError::BadLattice("need finite x_min < x_max"));
        }
        if self.max_hop == 0 {
            return Err(MetricError::BadLattice("max_hop must be positive"));
        }
        Ok(())
    }

    /// Both step counts multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        LatticeSpec { n_t: self.n_t * factor, n_x: self.n_x * factor, ..*self }
    }

    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_min) / self.n_t as f64
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_x as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_t {
            self.t_max
        } else {
            self.t_min + k as f64 * self.dt()
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_x {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_x).map(|i| self.node(i)).collect()
    }

    fn window(&self) -> f64 {
        self.max_hop as f64 * self.dx()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sense {
    Max,
    Min,
}

impl Sense {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Max => a > b,
            Sense::Min => a < b,
        }
    }

    fn worst(self) -> f64 {
        match self {
            Sense::Max => f64::NEG_INFINITY,
            Sense::Min => f64::INFINITY,
        }
    }

    fn objective(self, h: f64, d: f64, dt: f64) -> f64 {
        match self {
            Sense::Max => h - d * d / dt,
            Sense::Min => h + d * d / dt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tag {
    Node(usize),
    Atom(usize),
}

/// Where the best value at a knot came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Back {
    Seed,
    /// Free step from the previous level; re-solved when tracing.
    Free,
    /// Along an atom from this knot index on the previous level.
    Track(usize),
    /// Event index within the same step.
    Event(usize),
}

#[derive(Clone, Debug)]
struct Event {
    t: f64,
    x: f64,
    value: f64,
    back: Back,
}

#[derive(Clone, Debug, Default)]
struct Level {
    xs: Vec<f64>,
    hs: Vec<f64>,
    tags: Vec<Tag>,
    back: Vec<Back>,
}

impl Level {
    fn node_values(&self, n: usize) -> Vec<f64> {
        let mut v = vec![f64::NAN; n + 1];
        for (k, tag) in self.tags.iter().enumerate() {
            if let Tag::Node(i) = tag {
                v[*i] = self.hs[k];
            }
        }
        v
    }

    fn atom_knot(&self, a: usize) -> Option<usize> {
        self.tags.iter().position(|t| *t == Tag::Atom(a))
    }
}

/// One level collapsed onto distinct abscissas.
struct Profile {
    xs: Vec<f64>,
    hs: Vec<f64>,
    rep: Vec<usize>,
}

impl Profile {
    fn of(level: &Level, sense: Sense) -> Self {
        let mut order: Vec<usize> = (0..level.xs.len()).collect();
        order.sort_by(|&a, &b| level.xs[a].total_cmp(&level.xs[b]).then(a.cmp(&b)));
        let mut p = Profile { xs: Vec::new(), hs: Vec::new(), rep: Vec::new() };
        for k in order {
            let (x, h) = (level.xs[k], level.hs[k]);
            match p.xs.last() {
                Some(&last) if x - last <= SNAP * (1.0 + x.abs()) => {
                    let j = p.xs.len() - 1;
                    if sense.better(h, p.hs[j]) {
                        p.hs[j] = h;
                        p.rep[j] = k;
                    }
                }
                _ => {
                    p.xs.push(x);
                    p.hs.push(h);
                    p.rep.push(k);
                }
            }
        }
        p
    }

    /// Adds a knot inside every cell that hides an isolated kink: where the
    /// secant slopes on either side differ by much more than the neighboring
    /// slope changes, the two outer secants are extended to their crossing.
    fn with_kinks(self) -> Profile {
        let n = self.xs.len();
        if n < 6 {
            return self;
        }
        let slope = |j: usize| (self.hs[j + 1] - self.hs[j]) / (self.xs[j + 1] - self.xs[j]);
        let mut out = Profile {
            xs: Vec::with_capacity(n + 8),
            hs: Vec::with_capacity(n + 8),
            rep: Vec::with_capacity(n + 8),
        };
        for j in 0..n {
            out.xs.push(self.xs[j]);
            out.hs.push(self.hs[j]);
            out.rep.push(self.rep[j]);
            if j < 2 || j + 3 >= n || !self.hs[j - 2..j + 4].iter().all(|h| h.is_finite()) {
                continue;
            }
            let (sl, sr) = (slope(j - 1), slope(j + 1));
            let jump = (sr - sl).abs();
            let side = (slope(j - 1) - slope(j - 2)).abs().max((slope(j + 2) - slope(j + 1)).abs());
            if jump <= 4.0 * side || jump <= 1e-12 * (1.0 + sl.abs().max(sr.abs())) {
                continue;
            }
            // h_j + sl (x − x_j) = h_{j+1} + sr (x − x_{j+1})
            let x = (self.hs[j + 1] - self.hs[j] + sl * self.xs[j] - sr * self.xs[j + 1]) / (sl - sr);
            if x > self.xs[j] && x < self.xs[j + 1] {
                let near = if x - self.xs[j] <= self.xs[j + 1] - x { j } else { j + 1 };
                out.xs.push(x);
                out.hs.push(self.hs[j] + sl * (x - self.xs[j]));
                out.rep.push(self.rep[near]);
            }
        }
        out
    }

    /// Best `h(y) ∓ (x − y)²/dt` over `|y − x| ≤ w`: value, optimizer, knot
    /// nearest to it, and whether the window edge was binding.
    fn best(&self, x: f64, dt: f64, w: f64, sense: Sense) -> Option<(f64, f64, usize, bool)> {
        let (lo, hi) = (x - w, x + w);
        let n = self.xs.len();
        let mut j = self.xs.partition_point(|v| *v < lo).saturating_sub(1);
        let mut best: Option<(f64, f64, usize)> = None;
        let mut consider = |val: f64, y: f64, near: usize| {
            if val.is_finite() && best.is_none_or(|(b, _, _)| sense.better(val, b)) {
                best = Some((val, y, near));
            }
        };
        while j < n && self.xs[j] <= hi {
            let (xa, ha) = (self.xs[j], self.hs[j]);
            if xa >= lo {
                consider(sense.objective(ha, xa - x, dt), xa, j);
            }
            if j + 1 < n && ha.is_finite() && self.hs[j + 1].is_finite() {
                let (xb, hb) = (self.xs[j + 1], self.hs[j + 1]);
                let s = (hb - ha) / (xb - xa);
                // stationary point of h(y) ∓ (y − x)²/dt on the cell
                let y = match sense {
                    Sense::Max => x + s * dt / 2.0,
                    Sense::Min => x - s * dt / 2.0,
                }
                .clamp(xa.max(lo), xb.min(hi));
                let near = if y - xa <= xb - y { j } else { j + 1 };
                consider(sense.objective(ha + s * (y - xa), y - x, dt), y, near);
            }
            j += 1;
        }
        best.map(|(v, y, near)| {
            let edge = ((y - lo).abs() <= SNAP * (1.0 + lo.abs()) && lo > self.xs[0])
                || ((y - hi).abs() <= SNAP * (1.0 + hi.abs()) && hi < self.xs[n - 1]);
            (v, y, self.rep[near], edge)
        })
    }
}

/// Values of a lattice dynamic program.
#[derive(Clone, Debug)]
pub struct GridField {
    pub lattice: LatticeSpec,
    /// `values[k][i]` at `(time(k), node(i))`; `NaN` on levels not computed.
    pub values: Vec<Vec<f64>>,
    /// Some optimizer sat on the edge of the hop window.
    pub clipped: bool,
    levels: Vec<Level>,
    /// `events[k]`: atom starts and ends strictly between levels `k` and `k + 1`.
    events: Vec<Vec<Event>>,
    from_origin: bool,
    backward: bool,
    measure: bool,
}

/// A backtraced optimal path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geodesic {
    /// `(t, x)` in increasing time.
    pub points: Vec<(f64, f64)>,
    /// The query was moved to the nearest lattice knot.
    pub snapped: bool,
}

impl Geodesic {
    /// Position at `t` by linear interpolation.
    pub fn position(&self, t: f64) -> Option<f64> {
        let k = self.points.partition_point(|p| p.0 < t);
        if k == 0 {
            return (self.points.first()?.0 == t).then(|| self.points[0].1);
        }
        let (a, b) = (self.points[k - 1], *self.points.get(k)?);
        Some(a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0))
    }
}

impl GridField {
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k][i]
    }

    /// Last level at `x` by linear interpolation between nodes.
    pub fn final_value(&self, x: f64) -> Option<f64> {
        let lat = &self.lattice;
        let u = (x - lat.x_min) / lat.dx();
        if !(0.0..=lat.n_x as f64).contains(&u) {
            return None;
        }
        let row = self.values.last()?;
        let i = (u.floor() as usize).min(lat.n_x.saturating_sub(1));
        let w = u - i as f64;
        if w == 0.0 {
            return Some(row[i]);
        }
        Some(row[i] + w * (row[i + 1] - row[i]))
    }

    /// `t,x,h` for every computed node.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,h\n");
        for (k, row) in self.values.iter().enumerate() {
            let t = self.lattice.time(k);
            for (i, h) in row.iter().enumerate().filter(|(_, h)| !h.is_nan()) {
                let _ = writeln!(s, "{t},{},{h}", self.lattice.node(i));
            }
        }
        s
    }

    /// Largest `|h − exact|` over nodes with `|x| ≤ c·t` on computed levels
    /// with `t ≥ t_from`.
    pub fn cone_sup_diff(
        &self,
        exact: &dyn SliceSource,
        cone_radius: f64,
        t_from: f64,
        exec: Exec,
    ) -> Result<f64, MetricError> {
        let rows: Result<Vec<f64>, BurgersError> = exec
            .map_range(self.values.len(), |k| {
                let t = self.lattice.time(k);
                let row = &self.values[k];
                if t < t_from || row.iter().all(|v| v.is_nan()) {
                    return Ok(0.0);
                }
                let h = exact.slice(t)?;
                Ok((0..row.len())
                    .filter(|&i| self.lattice.node(i).abs() <= cone_radius * t + SNAP && row[i].is_finite())
                    .map(|i| (row[i] - h.eval(self.lattice.node(i))).abs())
                    .fold(0.0, f64::max))
            })
            .into_iter()
            .collect();
        Ok(rows?.into_iter().fold(0.0, f64::max))
    }

    /// Optimal path ending at the knot nearest `(t, x)`, traced back to the
    /// seed level (and to the origin for measure heights).
    pub fn geodesic(&self, t: f64, x: f64) -> Geodesic {
        let lat = &self.lattice;
        let k = (((t - lat.t_min) / lat.dt()).round().max(0.0) as usize).min(lat.n_t);
        let level = &self.levels[k];
        let j = (0..level.xs.len())
            .filter(|&j| level.hs[j].is_finite())
            .min_by(|&a, &b| (level.xs[a] - x).abs().total_cmp(&(level.xs[b] - x).abs()))
            .unwrap_or(0);
        let snapped = (lat.time(k) - t).abs() > SNAP || (level.xs[j] - x).abs() > SNAP * (1.0 + x.abs());
        let mut pts = vec![(lat.time(k), level.xs[j])];
        let sense = if self.backward { Sense::Min } else { Sense::Max };
        let (mut k, mut x, mut knot) = (k, level.xs[j], Some(j));
        loop {
            let prev = if self.backward { k + 1 } else { k.wrapping_sub(1) };
            if prev > lat.n_t {
                break;
            }
            let step = if self.backward { k } else { prev };
            let mut b = knot.map_or(Back::Free, |j| self.levels[k].back[j]);
            let (mut bt, mut bx) = (lat.time(k), x);
            while let Back::Event(e) = b {
                let ev = &self.events[step][e];
                pts.push((ev.t, ev.x));
                (bt, bx, b) = (ev.t, ev.x, ev.back);
            }
            match b {
                Back::Seed | Back::Event(_) => break,
                Back::Track(i) => {
                    (k, x, knot) = (prev, self.levels[prev].xs[i], Some(i));
                }
                Back::Free => {
                    let mut profile = Profile::of(&self.levels[prev], sense);
                    if !self.measure {
                        profile = profile.with_kinks();
                    }
                    let dt = (bt - lat.time(prev)).abs().max(SNAP);
                    let Some((_, y, near, _)) = profile.best(bx, dt, lat.window(), sense) else { break };
                    let on_knot = (self.levels[prev].xs[near] - y).abs() <= SNAP * (1.0 + y.abs());
                    (k, x, knot) = (prev, y, on_knot.then_some(near));
                }
            }
            pts.push((lat.time(k), x));
        }
        if self.from_origin {
            pts.push((0.0, 0.0));
        }
        pts.reverse();
        Geodesic { points: pts, snapped }
    }
}

fn empty_field(lat: &LatticeSpec, backward: bool, from_origin: bool, measure: bool) -> GridField {
    GridField {
        lattice: *lat,
        values: vec![vec![f64::NAN; lat.n_x + 1]; lat.n_t + 1],
        clipped: false,
        levels: vec![Level::default(); lat.n_t + 1],
        events: vec![Vec::new(); lat.n_t],
        from_origin,
        backward,
        measure,
    }
}

fn node_level(lat: &LatticeSpec, f: impl Fn(f64) -> f64) -> Level {
    let xs = lat.nodes();
    Level {
        hs: xs.iter().map(|x| f(*x)).collect(),
        tags: (0..xs.len()).map(Tag::Node).collect(),
        back: vec![Back::Seed; xs.len()],
        xs,
    }
}

fn free_step(prev: &Level, lat: &LatticeSpec, sense: Sense, exec: Exec) -> (Level, bool) {
    let profile = Profile::of(prev, sense).with_kinks();
    let (dt, w) = (lat.dt(), lat.window());
    let xs = lat.nodes();
    let res = exec.map(&xs, |x| profile.best(*x, dt, w, sense));
    let clipped = res.iter().any(|r| r.is_some_and(|(_, _, _, e)| e));
    let level = Level {
        hs: res.iter().map(|r| r.map_or(sense.worst(), |(v, _, _, _)| v)).collect(),
        tags: (0..xs.len()).map(Tag::Node).collect(),
        back: res.iter().map(|r| r.map_or(Back::Seed, |_| Back::Free)).collect(),
        xs,
    };
    (level, clipped)
}

fn store(field: &mut GridField, k: usize, level: Level) {
    field.values[k] = level.node_values(field.lattice.n_x);
    field.levels[k] = level;
}

/// Backward Bellman recursion `h[k][i] = min_y ((y − x_i)²/Δt + h[k+1](y))`
/// seeded by `φ` at `t_max`.
pub fn grid_hopflax_bk(phi: &PiecewisePoly, lat: &LatticeSpec, exec: Exec) -> Result<GridField, MetricError> {
    lat.validate()?;
    if phi.tail_time().is_none_or(|s| (s - lat.t_max).abs() > 1e-12 * lat.t_max) {
        return Err(MetricError::NotTailLaw);
    }
    let mut field = empty_field(lat, true, false, false);
    let mut level = node_level(lat, |x| phi.eval(x));
    for k in (0..lat.n_t).rev() {
        let (next, clip) = free_step(&level, lat, Sense::Min, exec);
        field.clipped |= clip;
        store(&mut field, k + 1, level);
        level = next;
    }
    store(&mut field, 0, level);
    Ok(field)
}

/// Forward recursion `h[k+1][i] = max_y (h[k](y) − (x_i − y)²/Δt)` seeded by
/// `φ` at `t_min`.
pub fn grid_hopflax_fwd(phi: &PiecewisePoly, lat: &LatticeSpec, exec: Exec) -> Result<GridField, MetricError> {
    lat.validate()?;
    if phi.tail_time().is_none_or(|s| (s - lat.t_min).abs() > 1e-12 * lat.t_min) {
        return Err(MetricError::NotTailLaw);
    }
    let mut field = empty_field(lat, false, false, false);
    let mut level = node_level(lat, |x| phi.eval(x));
    for k in 0..lat.n_t {
        let (next, clip) = free_step(&level, lat, Sense::Max, exec);
        field.clipped |= clip;
        store(&mut field, k, level);
        level = next;
    }
    store(&mut field, lat.n_t, level);
    Ok(field)
}

/// `∫(ρ − γ̇²) dt` along `a` over `[t0, t1]`.
fn reward(a: &Atom, t0: f64, t1: f64) -> f64 {
    let mut acc = 0.0;
    for (k, w) in a.t.windows(2).enumerate() {
        let (lo, hi) = (w[0].max(t0), w[1].min(t1));
        if hi > lo {
            let v = (a.x[k + 1] - a.x[k]) / (w[1] - w[0]);
            acc += (a.rho[k] - v * v) * (hi - lo);
        }
    }
    acc
}

fn single_wedge(alpha: f64, rho: f64, t: f64, x: f64) -> f64 {
    crate::burgers::a_wedge(alpha, rho, t, x)
}

fn alive(a: &Atom, t: f64) -> bool {
    let (b, e) = a.span();
    b <= t && t <= e
}

fn knots_at(lat: &LatticeSpec, atoms: &[Atom], t: f64) -> (Vec<f64>, Vec<Tag>) {
    let mut xs = lat.nodes();
    let mut tags: Vec<Tag> = (0..xs.len()).map(Tag::Node).collect();
    for (a, atom) in atoms.iter().enumerate() {
        if alive(atom, t) {
            xs.push(atom.position(t).unwrap());
            tags.push(Tag::Atom(a));
        }
    }
    (xs, tags)
}

/// Knots at the same abscissa are one point: give them the best value.
fn merge_coincident(level: &mut Level) {
    let p = Profile::of(level, Sense::Max);
    for j in 0..level.xs.len() {
        let r = p.rep[p.xs.partition_point(|v| *v < level.xs[j] - SNAP * (1.0 + level.xs[j].abs()))];
        if level.hs[r] > level.hs[j] {
            level.hs[j] = level.hs[r];
            level.back[j] = level.back[r];
        }
    }
}

/// Value reaching `(t, x)` from an event that happened earlier in the step.
fn from_event(ev: &Event, t: f64, x: f64) -> f64 {
    let (dt, d) = (t - ev.t, x - ev.x);
    if dt > SNAP {
        ev.value - d * d / dt
    } else if dt >= -SNAP && d.abs() <= 1e-9 {
        ev.value
    } else {
        f64::NEG_INFINITY
    }
}

/// Which knot receives the first level's seed.
enum Seed {
    /// `max(−x²/t, A_{α,ρ}(t, x))` over atoms leaving the origin.
    Origin,
    /// Zero at node `i`, `−∞` elsewhere, from level `k`.
    Point { k: usize, i: usize },
}

fn measure_dp(mu: &PathMeasure, lat: &LatticeSpec, seed: Seed, exec: Exec) -> Result<GridField, MetricError> {
    lat.validate()?;
    let atoms = &mu.atoms;
    for (a, atom) in atoms.iter().enumerate() {
        for (t, x) in atom.t.iter().zip(&atom.x) {
            if *x < lat.x_min || *x > lat.x_max || *t > lat.t_max {
                return Err(MetricError::AtomOutside { atom: a, t: *t, x: *x });
            }
        }
    }
    let k0 = match seed {
        Seed::Origin => 0,
        Seed::Point { k, .. } => k,
    };
    let t0 = lat.time(k0);
    let mut field = empty_field(lat, false, matches!(seed, Seed::Origin), true);
    let (xs, tags) = knots_at(lat, atoms, t0);
    let hs: Vec<f64> = match seed {
        Seed::Origin => {
            let wedges: Vec<(f64, f64)> = atoms
                .iter()
                .filter(|a| a.t[0] == 0.0 && a.x[0].abs() <= SNAP && alive(a, t0))
                .map(|a| (a.position(t0).unwrap() / t0, a.density(t0).unwrap()))
                .collect();
            xs.iter()
                .map(|&x| wedges.iter().fold(-x * x / t0, |m, &(al, r)| m.max(single_wedge(al, r, t0, x))))
                .collect()
        }
        Seed::Point { i, .. } => {
            tags.iter().map(|t| if *t == Tag::Node(i) { 0.0 } else { f64::NEG_INFINITY }).collect()
        }
    };
    let mut level = Level { back: vec![Back::Seed; xs.len()], xs, hs, tags };

    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&a, &b| atoms[a].t[0].total_cmp(&atoms[b].t[0]).then(a.cmp(&b)));

    for k in k0..lat.n_t {
        let (ta, tb) = (lat.time(k), lat.time(k + 1));
        let profile = Profile::of(&level, Sense::Max);
        let w = lat.window();
        let mut events: Vec<Event> = Vec::new();
        // (value, back) arriving at each atom alive at tb along the atom
        let mut tracked: Vec<Option<(f64, Back)>> = vec![None; atoms.len()];
        for &a in &order {
            let atom = &atoms[a];
            let (b, e) = atom.span();
            let (start, v0, back0) = if b <= ta && e > ta {
                let j = level.atom_knot(a).expect("atom alive at level");
                (ta, level.hs[j], Back::Track(j))
            } else if b > ta && b <= tb {
                let xb = atom.x[0];
                let mut best = match profile.best(xb, (b - ta).max(SNAP), w, Sense::Max) {
                    Some((v, _, _, clip)) => {
                        field.clipped |= clip;
                        (v, Back::Free)
                    }
                    None => (f64::NEG_INFINITY, Back::Seed),
                };
                for (i, ev) in events.iter().enumerate() {
                    let v = from_event(ev, b, xb);
                    if v > best.0 {
                        best = (v, Back::Event(i));
                    }
                }
                events.push(Event { t: b, x: xb, value: best.0, back: best.1 });
                (b, best.0, Back::Event(events.len() - 1))
            } else {
                continue;
            };
            let end = e.min(tb);
            let v = v0 + reward(atom, start, end);
            if e < tb {
                events.push(Event { t: e, x: atom.x[atom.x.len() - 1], value: v, back: back0 });
            } else {
                tracked[a] = Some((v, back0));
            }
        }

        let (xs, tags) = knots_at(lat, atoms, tb);
        let dt = tb - ta;
        let res = exec.map_range(xs.len(), |j| {
            let x = xs[j];
            let mut best = match profile.best(x, dt, w, Sense::Max) {
                Some((v, _, _, clip)) => (v, Back::Free, clip),
                None => (f64::NEG_INFINITY, Back::Seed, false),
            };
            for (i, ev) in events.iter().enumerate() {
                let v = from_event(ev, tb, x);
                if v > best.0 {
                    best = (v, Back::Event(i), false);
                }
            }
            if let Tag::Atom(a) = tags[j] {
                if let Some((v, back)) = tracked[a] {
                    if v > best.0 {
                        best = (v, back, false);
                    }
                }
            }
            best
        });
        field.clipped |= res.iter().any(|r| r.2);
        let mut next = Level {
            hs: res.iter().map(|r| r.0).collect(),
            back: res.iter().map(|r| r.1).collect(),
            xs,
            tags,
        };
        merge_coincident(&mut next);
        store(&mut field, k, level);
        field.events[k] = events;
        level = next;
    }
    store(&mut field, lat.n_t, level);
    Ok(field)
}

/// `Hfn[μ]` on the lattice: paths leave the origin, pay `(Δx)²/Δt` per free
/// step and collect `∫(ρ − γ̇²) dt` along atoms. The first level is seeded by
/// the exact single-wedge heights of the atoms leaving the origin.
pub fn grid_height(mu: &PathMeasure, lat: &LatticeSpec, exec: Exec) -> Result<GridField, MetricError> {
    measure_dp(mu, lat, Seed::Origin, exec)
}

/// Two-point values `e_μ(time(k), node(i); ·, ·)`.
pub fn grid_point_source(
    mu: &PathMeasure,
    lat: &LatticeSpec,
    k: usize,
    i: usize,
    exec: Exec,
) -> Result<GridField, MetricError> {
    if k > lat.n_t || i > lat.n_x {
        return Err(MetricError::BadLattice("source outside the lattice"));
    }
    measure_dp(mu, lat, Seed::Point { k, i }, exec)
}

/// `small` rewritten on the atoms of `big` (zero density where `small` has
/// none), so both share one knot set. Every atom of `small` must coincide with
/// an atom of `big`.
pub fn shared_support(small: &PathMeasure, big: &PathMeasure) -> Result<PathMeasure, MetricError> {
    let mut atoms: Vec<Atom> =
        big.atoms.iter().map(|a| Atom { rho: vec![0.0; a.rho.len()], ..a.clone() }).collect();
    for s in &small.atoms {
        let j = big.atoms.iter().position(|b| b.t == s.t && b.x == s.x).ok_or(MetricError::Incomparable)?;
        atoms[j].rho = s.rho.clone();
    }
    Ok(PathMeasure { atoms, cone_radius: big.cone_radius })
}

/// `sup |h − grid_height(M[h])|` over cone nodes, with `M[h]` built from the
/// tracked shocks of `src`.
pub fn reconstruct_check(
    src: &dyn SliceSource,
    records: &[crate::burgers::ShockRecord],
    cone_radius: f64,
    lat: &LatticeSpec,
    exec: Exec,
) -> Result<f64, MetricError> {
    let mu = crate::measures::measure_from_shocks(records)?;
    let g = grid_height(&mu, lat, exec)?;
    g.cone_sup_diff(src, cone_radius, 0.0, exec)
}
