use emu_core::discriminator::disc_loss;
use emu_core::evaluator::{binomial_ci, loo_intent_acc, EvalSet};
use emu_core::nn::{clip_parameters, l2_normalize_scale, Matrix};
use proptest::prelude::*;

fn eval_set(points: &[(usize, Vec<i8>)]) -> EvalSet {
    let d = points[0].1.len();
    let rows: Vec<Vec<f64>> = points.iter().map(|p| p.1.iter().map(|&x| x as f64).collect()).collect();
    EvalSet::new(
        (0..points.len()).map(|i| format!("s{i:03}")).collect(),
        (0..points.len()).map(|i| format!("g{}", i / 2)).collect(),
        points.iter().enumerate().map(|(i, _)| if i % 2 == 0 { "en" } else { "de" }.to_string()).collect(),
        points.iter().map(|p| p.0).collect(),
        Matrix::new(rows.len(), d, rows.concat()).unwrap(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn normalized_norm_is_alpha(v in prop::collection::vec(-1e3f64..1e3, 1..40), alpha in 0.1f64..100.0) {
        prop_assume!(v.iter().any(|x| *x != 0.0));
        let z = l2_normalize_scale(&v, alpha).unwrap();
        let n = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((n - alpha).abs() <= 1e-9 * alpha);
    }

    #[test]
    fn clipping_is_bounded_and_idempotent(mut v in prop::collection::vec(-5f64..5.0, 0..50), c in 0.001f64..1.0) {
        clip_parameters(&mut v, c);
        prop_assert!(v.iter().all(|x| x.abs() <= c));
        let once = v.clone();
        clip_parameters(&mut v, c);
        prop_assert_eq!(once, v);
    }

    #[test]
    fn disc_loss_is_nonnegative(pt in prop::collection::vec(0.0f64..=1.0, 1..8), pa in prop::collection::vec(0.0f64..=1.0, 1..8)) {
        let r = disc_loss(&pt, &pa).unwrap();
        prop_assert!(r.value >= 0.0 && r.value.is_finite());
    }

    #[test]
    fn loo_is_invariant_to_power_of_two_row_scaling(
        pts in prop::collection::vec((0usize..3, prop::collection::vec(-3i8..4, 3)), 6..16),
        exps in prop::collection::vec(-4i32..5, 16),
    ) {
        // Integer coordinates and power-of-two scales keep every cosine exact.
        let mut pts = pts;
        if pts.len() % 2 == 1 { pts.pop(); }
        let set = eval_set(&pts);
        let mut scaled = set.clone();
        for r in 0..scaled.len() {
            let k = 2f64.powi(exps[r]);
            for x in scaled.embeddings.row_mut(r) { *x *= k; }
        }
        for (s, t) in [("en", "en"), ("en", "de"), ("de", "en")] {
            match (loo_intent_acc(&set, s, t, true), loo_intent_acc(&scaled, s, t, true)) {
                (Ok(a), Ok(b)) => {
                    let key = |r: &emu_core::evaluator::LooResult| -> Vec<(String, String, usize)> {
                        r.trace.iter().map(|q| (q.query.clone(), q.neighbor.clone(), q.predicted)).collect()
                    };
                    prop_assert_eq!(key(&a), key(&b));
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "feasibility changed under scaling"),
            }
        }
    }

    #[test]
    fn wald_interval_contains_estimate(k in 0usize..200, extra in 0usize..200) {
        let n = k + extra + 1;
        let ci = binomial_ci(k, n, 1.96).unwrap();
        prop_assert!(ci.low <= ci.p_hat && ci.p_hat <= ci.high);
        let p = k as f64 / n as f64;
        prop_assert!((ci.half_width - 1.96 * (p * (1.0 - p) / n as f64).sqrt()).abs() <= 1e-15);
        prop_assert!(((ci.high - ci.p_hat) - (ci.p_hat - ci.low)).abs() <= 1e-15);
    }
}
