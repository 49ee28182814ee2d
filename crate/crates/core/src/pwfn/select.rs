//! Lower/upper envelope of finitely many quadratic branches, each living on a
//! closed x-range. Used for pointwise maxima and for resolving overhangs.

use super::quad::Quad;
use super::PwError;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Branch {
    pub lo: f64,
    pub hi: f64,
    pub q: Quad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Pick {
    Lower,
    Upper,
}

/// Pieces `(lo, hi, quad)` covering ℝ in order.
pub(crate) fn select(branches: &[Branch], pick: Pick) -> Result<Vec<(f64, f64, Quad)>, PwError> {
    let mut ends: Vec<f64> = branches
        .iter()
        .flat_map(|b| [b.lo, b.hi])
        .filter(|v| v.is_finite())
        .collect();
    ends.sort_by(f64::total_cmp);
    ends.dedup();

    let mut cells = Vec::with_capacity(ends.len() + 1);
    let mut prev = f64::NEG_INFINITY;
    for &e in &ends {
        cells.push((prev, e));
        prev = e;
    }
    cells.push((prev, f64::INFINITY));

    let better = |a: f64, b: f64| match pick {
        Pick::Lower => a < b,
        Pick::Upper => a > b,
    };

    let mut out: Vec<(f64, f64, Quad)> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    for &(l, r) in &cells {
        active.clear();
        active.extend((0..branches.len()).filter(|&i| branches[i].lo <= l && branches[i].hi >= r));
        if active.is_empty() {
            return Err(PwError::Coverage(if l.is_finite() { l } else { r }));
        }
        let mut splits = vec![l];
        for (n, &i) in active.iter().enumerate() {
            for &j in &active[n + 1..] {
                splits.extend(branches[i].q.sub(&branches[j].q).roots_in(l, r));
            }
        }
        splits.push(r);
        splits.sort_by(f64::total_cmp);
        splits.dedup();

        for w in splits.windows(2) {
            let (a, b) = (w[0], w[1]);
            let probe = match (a.is_finite(), b.is_finite()) {
                (true, true) => 0.5 * (a + b),
                (false, true) => b - b.abs().max(1.0),
                (true, false) => a + a.abs().max(1.0),
                (false, false) => 0.0,
            };
            let mut best = active[0];
            let mut best_v = branches[best].q.eval(probe);
            for &i in &active[1..] {
                let v = branches[i].q.eval(probe);
                if better(v, best_v) {
                    best = i;
                    best_v = v;
                }
            }
            let q = branches[best].q;
            match out.last_mut() {
                Some(p) if p.2 == q => p.1 = b,
                _ => out.push((a, b, q)),
            }
        }
    }
    Ok(out)
}
