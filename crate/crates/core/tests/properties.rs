//! Invariants over random instances.

use gsprt::expfam::{max_loglik_ratio, GaussianParams, ParamBox};
use gsprt::gsprt::{GsprtState, Thresholds, TypeStatistic};
use gsprt::{Distribution, EmpiricalType, LinearFamily, Projector};
use proptest::prelude::*;

fn running() -> Projector {
    let fam = LinearFamily::new(vec![vec![1.0, 0.0, 0.0]], vec![0.3], 0.05).unwrap();
    Projector::new(Distribution::new(vec![0.5, 0.3, 0.2]).unwrap(), fam).unwrap()
}

fn simplex_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, d).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

/// A random polytope around a strictly positive center, with a null and a type.
fn instance() -> impl Strategy<Value = (Projector, Distribution)> {
    (2usize..=6)
        .prop_flat_map(|d| {
            (
                simplex_point(d),
                simplex_point(d),
                simplex_point(d),
                prop::collection::vec((prop::collection::vec(-1.0f64..1.0, d), 0.01f64..0.3), 1..=3),
            )
        })
        .prop_filter_map("family must be usable", |(center, p0, q, rows)| {
            let (w, xi): (Vec<_>, Vec<_>) = rows
                .into_iter()
                .map(|(r, slack)| {
                    let at: f64 = r.iter().zip(&center).map(|(a, b)| a * b).sum();
                    (r, at + slack)
                })
                .unzip();
            let fam = LinearFamily::new(w, xi, 0.005).ok()?;
            let proj = Projector::new(Distribution::new(p0).ok()?, fam).ok()?;
            Some((proj, Distribution::new(q).ok()?))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_certified_and_unique((proj, q) in instance()) {
        let a = proj.project(&q).unwrap();
        prop_assert!(a.kkt_residual <= 1e-10);
        prop_assert!(proj.family().max_violation(a.gamma_tilde.probs()) <= 1e-12);
        // second start: halfway between the interior point and the answer
        let mid: Vec<f64> = proj.interior_point().probs().iter().zip(a.gamma_tilde.probs()).map(|(x, y)| 0.5 * (x + y)).collect();
        let b = proj.project_from(&q, &Distribution::normalized(mid).unwrap()).unwrap();
        prop_assert!(a.gamma_tilde.max_abs_diff(&b.gamma_tilde) <= 1e-8);
    }

    #[test]
    fn projection_value_is_a_lower_bound_over_the_family((proj, q) in instance(), t in 0.0f64..1.0) {
        // any feasible point scores no better than the projection
        let r = proj.project(&q).unwrap();
        let interior = proj.interior_point();
        let g: Vec<f64> = interior.probs().iter().zip(r.gamma_tilde.probs()).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let p0 = proj.p0().probs();
        let v: f64 = (0..q.dim()).map(|i| q[i] * (p0[i] / g[i]).ln()).sum();
        prop_assert!(r.f_value <= v + 1e-12);
    }

    #[test]
    fn f_is_continuous(a in simplex_point(3), b in simplex_point(3), t in 0.0f64..1e-4) {
        let proj = running();
        let qa = Distribution::new(a.clone()).unwrap();
        let mixed: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (1.0 - t) * x + t * y).collect();
        let qb = Distribution::new(mixed).unwrap();
        let (fa, fb) = (proj.f_of_type(&qa).unwrap(), proj.f_of_type(&qb).unwrap());
        // |d f / d q| is bounded by max |log p0 / gamma| <= log(1 / 0.05)
        prop_assert!((fa - fb).abs() <= 2.0 * t * (1.0f64 / 0.05).ln() + 1e-12);
    }

    #[test]
    fn statistic_dominates_every_member(symbols in prop::collection::vec(0usize..3, 1..200), s in simplex_point(3)) {
        let proj = running();
        let ty = EmpiricalType::from_symbols(3, &symbols).unwrap();
        let q = ty.to_distribution().unwrap();
        let s_n = -(ty.n() as f64) * proj.f_of_type(&q).unwrap();
        // a member: the projection of an arbitrary point
        let member = proj.project(&Distribution::new(s).unwrap()).unwrap().gamma_tilde;
        let p0 = proj.p0().probs();
        let llr: f64 = symbols.iter().map(|&x| (member[x] / p0[x]).ln()).sum();
        prop_assert!(s_n >= llr - 1e-9 * (1.0 + llr.abs()));
    }

    #[test]
    fn incremental_run_matches_batch(symbols in prop::collection::vec(0usize..3, 1..150)) {
        let proj = running();
        let th = Thresholds::new(1e6, 1e6).unwrap();
        let mut state = GsprtState::new(TypeStatistic::new(&proj), th, 10_000).unwrap();
        for &x in &symbols {
            state.step(x).unwrap();
        }
        let ty = EmpiricalType::from_symbols(3, &symbols).unwrap();
        let batch = -(ty.n() as f64) * proj.f_of_type(&ty.to_distribution().unwrap()).unwrap();
        prop_assert!((state.s_n() - batch).abs() <= 1e-9 * (1.0 + batch.abs()));
    }

    #[test]
    fn larger_box_gives_larger_statistic(xs in prop::collection::vec(-3.0f64..4.0, 1..60), grow in 0.0f64..0.5) {
        let g0 = GaussianParams::new(0.0, 1.0).unwrap();
        let small = ParamBox::mean_variance([0.5, 1.0], [1.5, 2.0]).unwrap();
        let big = ParamBox::mean_variance([0.5 - grow * 0.5, 1.0 + grow], [1.5 - grow, 2.0 + grow]).unwrap();
        let a = max_loglik_ratio(&xs, &g0, &small).unwrap().value;
        let b = max_loglik_ratio(&xs, &g0, &big).unwrap().value;
        prop_assert!(b >= a - 1e-9 * (1.0 + a.abs()));
    }
}
