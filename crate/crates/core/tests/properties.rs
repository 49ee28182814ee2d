use proptest::prelude::*;
use wedge_ldp::burgers::{a_wedge, a_wedge_slice, rh_velocity, track_shocks, Evolution, ShockClass, SliceSource, TrackOptions};
use wedge_ldp::envelope::e_bm_finite;
use wedge_ldp::measures::{rate, Atom, KruzhkovPair, PathMeasure};
use wedge_ldp::multiwedge::{multi_rate, MultiWedgeProblem, Source, Target};
use wedge_ldp::par::Exec;
use wedge_ldp::pwfn::{PiecewisePoly, Quad};

/// Sorted points on `[−1.5, 1.5]`, at least `0.1` apart, strictly above `−y²`.
fn points(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.5f64..1.5, 0.1f64..2.0), 1..=max).prop_map(|raw| {
        let mut raw = raw;
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (y, m) in raw {
            if out.last().is_none_or(|p| y - p.0 >= 0.1) {
                out.push((y, m - y * y));
            }
        }
        out
    })
}

fn quadrature_q_bm(f: &PiecewisePoly, c: f64) -> f64 {
    let mut cuts: Vec<f64> = f.breakpoints().iter().copied().filter(|b| b.abs() < c).collect();
    cuts.insert(0, -c);
    cuts.push(c);
    let d = f.derivative();
    let n = 200;
    cuts.windows(2)
        .map(|w| {
            let h = (w[1] - w[0]) / n as f64;
            (0..n)
                .map(|k| {
                    let x = w[0] + (k as f64 + 0.5) * h;
                    let dpsi = d.eval(x) + 2.0 * x;
                    (0.25 * dpsi * dpsi + f.eval(x) + x * x) * h
                })
                .sum::<f64>()
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_the_profile_functional(pts in points(5)) {
        let (e, f) = e_bm_finite(&pts).unwrap();
        prop_assert!((f.q_bm().unwrap() - e).abs() <= 1e-12 * (1.0 + e));
        let c = f.compact_support_radius();
        let q = quadrature_q_bm(&f, c);
        prop_assert!((q - e).abs() <= 1e-4 * (1.0 + e), "{q} vs {e}");
    }

    #[test]
    fn minimizer_interpolates_and_stays_above(pts in points(5)) {
        let (_, f) = e_bm_finite(&pts).unwrap();
        for &(y, a) in &pts {
            prop_assert!((f.eval(y) - a).abs() < 1e-10);
        }
        for k in 0..=60 {
            let x = -3.0 + 0.1 * k as f64;
            prop_assert!(f.eval(x) >= -x * x - 1e-12);
        }
    }

    #[test]
    fn energy_is_reflection_invariant(pts in points(5)) {
        let (e, f) = e_bm_finite(&pts).unwrap();
        let mirrored: Vec<(f64, f64)> = pts.iter().rev().map(|&(y, a)| (-y, a)).collect();
        let (e2, f2) = e_bm_finite(&mirrored).unwrap();
        prop_assert!((e - e2).abs() <= 1e-12 * (1.0 + e));
        for k in 0..=30 {
            let x = -1.5 + 0.1 * k as f64;
            prop_assert!((f.reflect().eval(x) - f2.eval(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_is_shear_invariant(pts in points(5), d in -1.0f64..1.0) {
        let (e, _) = e_bm_finite(&pts).unwrap();
        let moved: Vec<(f64, f64)> = pts.iter().map(|&(y, a)| (y + d, a + y * y - (y + d) * (y + d))).collect();
        let (e2, _) = e_bm_finite(&moved).unwrap();
        prop_assert!((e - e2).abs() <= 1e-9 * (1.0 + e), "{e} vs {e2}");
    }

    #[test]
    fn more_data_never_lowers_energy(pts in points(6)) {
        prop_assume!(pts.len() >= 2);
        let (e, _) = e_bm_finite(&pts).unwrap();
        let (e_sub, _) = e_bm_finite(&pts[1..]).unwrap();
        prop_assert!(e >= e_sub - 1e-12);
    }

    #[test]
    fn rate_is_additive_and_monotone(
        a in -1.0f64..1.0, b in 0.1f64..3.0, extra in 0.0f64..2.0, gap in 0.2f64..1.0,
    ) {
        let one = PathMeasure::new(vec![Atom::segment(0.0, 1.0, 0.0, a, b)], 0.0).unwrap();
        let other = Atom::segment(0.0, 1.0, gap, a + gap, b);
        let two = PathMeasure::new(vec![Atom::segment(0.0, 1.0, 0.0, a, b), other], 0.0).unwrap();
        prop_assert!((rate(&two) - 2.0 * rate(&one)).abs() <= 1e-12 * rate(&two));
        let heavier = PathMeasure::new(vec![Atom::segment(0.0, 1.0, 0.0, a, b + extra)], 0.0).unwrap();
        prop_assert_eq!(one.dominated_by(&heavier), Ok(true));
        prop_assert!(rate(&one) <= rate(&heavier));
        prop_assert!((rate(&one) - 4.0 / 3.0 * b.powf(1.5)).abs() < 1e-12 * (1.0 + b * b));
    }

    #[test]
    fn shock_production_sign_matches_class(l in -5.0f64..5.0, r in -5.0f64..5.0) {
        prop_assume!((l - r).abs() > 1e-6);
        let p = KruzhkovPair::production(l, r);
        prop_assert_eq!(p > 0.0, ShockClass::of(l, r) == ShockClass::NonEntropy);
        let v = rh_velocity(l, r).unwrap();
        prop_assert!((v + (l + r) / 4.0).abs() < 1e-14);
        prop_assert_eq!(rh_velocity(r, l).unwrap(), v);
    }

    #[test]
    fn single_wedge_evolution_is_closed_form(alpha in -2.0f64..2.0, beta in 0.1f64..4.0, t in 0.05f64..1.0) {
        let evo = Evolution::backward(&a_wedge_slice(alpha, beta, 1.0)).unwrap();
        let h = evo.slice(t).unwrap();
        for k in 0..=20 {
            let x = alpha * t + (k as f64 - 10.0) * 0.2 * t;
            prop_assert!((h.eval(x) - a_wedge(alpha, beta, t, x)).abs() < 1e-9);
        }
    }

    #[test]
    fn translating_profiles_commutes_with_evaluation(pts in points(4), z in -1.0f64..1.0, g in -1.0f64..1.0) {
        let (_, f) = e_bm_finite(&pts).unwrap();
        let moved = f.translate(z, g);
        for k in 0..=20 {
            let x = -2.0 + 0.2 * k as f64;
            prop_assert!((moved.eval(x + z) - f.eval(x) - g).abs() < 1e-10);
        }
    }
}

fn problem() -> impl Strategy<Value = MultiWedgeProblem> {
    (
        prop::collection::vec((-1.5f64..1.5, -0.5f64..0.5), 1..=2),
        prop::collection::vec((-1.5f64..1.5, 0.2f64..3.0), 1..=3),
    )
        .prop_filter_map("distinct positions", |(src, tgt)| {
            let sources: Vec<Source> = src.iter().map(|&(z, g)| Source { z, g }).collect();
            let targets: Vec<Target> = tgt
                .iter()
                .map(|&(y, m)| {
                    let f = sources.iter().map(|s| s.g - (y - s.z) * (y - s.z)).fold(f64::NEG_INFINITY, f64::max) + m;
                    Target { y, f }
                })
                .collect();
            let mut zs: Vec<f64> = sources.iter().map(|s| s.z).chain(targets.iter().map(|t| t.y)).collect();
            zs.sort_by(f64::total_cmp);
            if zs.windows(2).any(|w| w[1] - w[0] < 0.05) {
                return None;
            }
            MultiWedgeProblem::new(sources, targets).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn multi_rate_is_reflection_and_translation_invariant(p in problem(), d in -1.0f64..1.0) {
        let base = multi_rate(&p, Exec::Serial).unwrap().value;
        let r = multi_rate(&p.reflect(), Exec::Serial).unwrap().value;
        let t = multi_rate(&p.translate(d), Exec::Serial).unwrap().value;
        prop_assert!((base - r).abs() <= 1e-9 * (1.0 + base), "{base} vs {r}");
        prop_assert!((base - t).abs() <= 1e-9 * (1.0 + base), "{base} vs {t}");
    }

    #[test]
    fn multi_rate_serial_equals_parallel(p in problem()) {
        let a = multi_rate(&p, Exec::Serial).unwrap();
        let b = multi_rate(&p, Exec::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn one_source_reduces_to_finite_energy(p in problem()) {
        let s = p.sources[0];
        let single = MultiWedgeProblem::new(
            vec![s],
            p.targets.iter().filter(|t| t.f > s.g - (t.y - s.z) * (t.y - s.z)).cloned().collect(),
        );
        prop_assume!(single.as_ref().is_ok_and(|q| !q.targets.is_empty()));
        let single = single.unwrap();
        let pts: Vec<(f64, f64)> =
            single.targets.iter().map(|t| (t.y - s.z, t.f - s.g)).collect();
        let (e, _) = e_bm_finite(&pts).unwrap();
        prop_assert_eq!(multi_rate(&single, Exec::Serial).unwrap().value.to_bits(), e.to_bits());
    }
}

#[test]
fn backward_evolutions_have_no_entropy_shocks() {
    let (_, f) = e_bm_finite(&[(-1.0, 3.0), (0.0, 1.0), (1.0, 3.0)]).unwrap();
    let evo = Evolution::backward(&f).unwrap();
    let recs = track_shocks(&evo, &TrackOptions::default(), Exec::default()).unwrap();
    assert!(!recs.is_empty());
    assert!(recs.iter().all(|r| r.class == ShockClass::NonEntropy));
}

#[test]
fn parabola_energy_is_zero() {
    assert_eq!(PiecewisePoly::neg_parabola().q_bm().unwrap(), 0.0);
    let tail = Quad::new(0.0, 0.0, -1.0);
    assert_eq!(PiecewisePoly::parabola(tail).q_bm().unwrap(), 0.0);
}
