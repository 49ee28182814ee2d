use serde::{Deserialize, Serialize};

/// Polynomial `c0 + c1·x + c2·x²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Quad {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl From<[f64; 3]> for Quad {
    fn from(c: [f64; 3]) -> Self {
        Quad::new(c[0], c[1], c[2])
    }
}

impl From<Quad> for [f64; 3] {
    fn from(q: Quad) -> Self {
        [q.c0, q.c1, q.c2]
    }
}

impl Quad {
    pub const ZERO: Quad = Quad { c0: 0.0, c1: 0.0, c2: 0.0 };
    /// The reference parabola `−x²`.
    pub const NEG_PARABOLA: Quad = Quad { c0: 0.0, c1: 0.0, c2: -1.0 };

    pub const fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Quad { c0, c1, c2 }
    }

    pub fn line(slope: f64, intercept: f64) -> Self {
        Quad::new(intercept, slope, 0.0)
    }

    /// `−(x−z)²/t + g`, the Dirichlet shape at time `t` seen from `(0, z)` lifted by `g`.
    pub fn shifted_parabola(z: f64, g: f64, t: f64) -> Self {
        Quad::new(g - z * z / t, 2.0 * z / t, -1.0 / t)
    }

    /// Tangent line to `−x²` at abscissa `a`: `−2a·x + a²`.
    pub fn tangent_at(a: f64) -> Self {
        Quad::new(a * a, -2.0 * a, 0.0)
    }

    /// Line through two points.
    pub fn chord(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let m = (y1 - y0) / (x1 - x0);
        Quad::new(y0 - m * x0, m, 0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.c0 + x * (self.c1 + x * self.c2)
    }

    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * x
    }

    /// Magnitude of the individual terms at `x`, used to scale tolerances.
    pub fn scale_at(&self, x: f64) -> f64 {
        self.c0.abs() + (self.c1 * x).abs() + (self.c2 * x * x).abs()
    }

    pub fn sub(&self, o: &Quad) -> Quad {
        Quad::new(self.c0 - o.c0, self.c1 - o.c1, self.c2 - o.c2)
    }

    pub fn add(&self, o: &Quad) -> Quad {
        Quad::new(self.c0 + o.c0, self.c1 + o.c1, self.c2 + o.c2)
    }

    pub fn scale(&self, k: f64) -> Quad {
        Quad::new(self.c0 * k, self.c1 * k, self.c2 * k)
    }

    /// `x ↦ q(x − z) + g`.
    pub fn translate(&self, z: f64, g: f64) -> Quad {
        Quad::new(
            self.c0 - self.c1 * z + self.c2 * z * z + g,
            self.c1 - 2.0 * self.c2 * z,
            self.c2,
        )
    }

    /// `x ↦ q(−x)`.
    pub fn reflect(&self) -> Quad {
        Quad::new(self.c0, -self.c1, self.c2)
    }

    /// Exact integral over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let p = |x: f64| x * (self.c0 + x * (self.c1 / 2.0 + x * self.c2 / 3.0));
        p(b) - p(a)
    }

    /// Roots strictly inside `(lo, hi)`, ascending. Double roots are dropped.
    pub fn roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let (a, b, c) = (self.c2, self.c1, self.c0);
        let mut out = Vec::with_capacity(2);
        if a == 0.0 {
            if b != 0.0 {
                out.push(-c / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            let guard = 1e-14 * (b * b + (4.0 * a * c).abs());
            if disc > guard {
                let sq = disc.sqrt();
                let s = if b >= 0.0 { 1.0 } else { -1.0 };
                let q = -0.5 * (b + s * sq);
                let r1 = q / a;
                let r2 = if q != 0.0 { c / q } else { -r1 };
                out.push(r1.min(r2));
                out.push(r1.max(r2));
            }
        }
        out.retain(|r| *r > lo && *r < hi && r.is_finite());
        out
    }
}

/// Relative closeness used for continuity checks and dedup.
pub(crate) fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_line_touches_parabola() {
        let q = Quad::tangent_at(1.5);
        assert_eq!(q.eval(1.5), -2.25);
        assert_eq!(q.slope(1.5), -3.0);
    }

    #[test]
    fn roots_simple_and_double() {
        let q = Quad::new(-1.0, 0.0, 1.0);
        assert_eq!(q.roots_in(-5.0, 5.0), vec![-1.0, 1.0]);
        let d = Quad::new(1.0, -2.0, 1.0);
        assert!(d.roots_in(-5.0, 5.0).is_empty());
        let l = Quad::new(2.0, -1.0, 0.0);
        assert_eq!(l.roots_in(0.0, 3.0), vec![2.0]);
    }

    #[test]
    fn translate_matches_composition() {
        let q = Quad::new(0.3, -1.2, 0.7);
        let t = q.translate(0.4, 2.0);
        for x in [-1.0, 0.0, 0.5, 2.0] {
            assert!((t.eval(x) - (q.eval(x - 0.4) + 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn integrate_against_antiderivative() {
        let q = Quad::new(1.0, 2.0, 3.0);
        assert!((q.integrate(0.0, 1.0) - 3.0).abs() < 1e-15);
    }
}
