use pointmatch_core::assignment::{brute_force_max_matching, BoolMatrix};
use pointmatch_core::evaluation::{
    count_thresholded, match_greedy, match_raw_hungarian, match_thresholded, match_with, ClassCounts, Protocol,
};
use pointmatch_core::LabeledPoint;
use proptest::prelude::*;

const RADIUS: f64 = 6.0;

fn points(max: usize, classes: u32) -> impl Strategy<Value = Vec<LabeledPoint>> {
    prop::collection::vec(
        (0.0f64..30.0, 0.0f64..30.0, 1..=classes).prop_map(|(x, y, c)| LabeledPoint::new(x, y, c)),
        0..=max,
    )
}

fn grid_points(max: usize) -> impl Strategy<Value = Vec<LabeledPoint>> {
    prop::collection::vec(
        (0i32..30, 0i32..30, 1u32..=2).prop_map(|(x, y, c)| LabeledPoint::new(x as f64, y as f64, c)),
        0..=max,
    )
}

fn class_count(points: &[LabeledPoint], class_id: u32) -> usize {
    points.iter().filter(|p| p.class_id == class_id).count()
}

fn lookup(counts: &[ClassCounts], class_id: u32) -> ClassCounts {
    counts.iter().find(|c| c.class_id == class_id).copied().unwrap_or(ClassCounts::zero(class_id))
}

fn transform(points: &[LabeledPoint], angle: f64, dx: f64, dy: f64) -> Vec<LabeledPoint> {
    let (s, c) = angle.sin_cos();
    points
        .iter()
        .map(|p| LabeledPoint::new(c * p.x - s * p.y + dx, s * p.x + c * p.y + dy, p.class_id))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn count_identities_and_dominance(gts in points(12, 2), preds in points(12, 2)) {
        let matched = match_thresholded(&gts, &preds, RADIUS);
        let raw = match_raw_hungarian(&gts, &preds, RADIUS);
        let greedy = match_greedy(&gts, &preds, RADIUS);
        for class_id in 1..=2 {
            let (n, m) = (class_count(&gts, class_id), class_count(&preds, class_id));
            let (a, b, g) = (lookup(&matched, class_id), lookup(&raw, class_id), lookup(&greedy, class_id));
            for c in [a, b] {
                prop_assert_eq!(c.tp + c.fn_, n);
                prop_assert_eq!(c.tp + c.fp, m);
                let identity = if n + m == 0 { 0.0 } else { 2.0 * c.tp as f64 / (n + m) as f64 };
                prop_assert_eq!(c.f1(), identity);
            }
            prop_assert_eq!(g.tp + g.fp, m);
            prop_assert!(g.fn_ <= n);
            prop_assert!(a.tp >= b.tp);
            prop_assert!(g.tp >= a.tp);
            prop_assert!(a.f1() >= b.f1());
            prop_assert!(g.f1() >= a.f1());
        }
    }

    #[test]
    fn rigid_motion_invariance(
        gts in points(10, 2),
        preds in points(10, 2),
        angle in 0.0f64..std::f64::consts::TAU,
        dx in -100.0f64..100.0,
        dy in -100.0f64..100.0,
    ) {
        let (tg, tp) = (transform(&gts, angle, dx, dy), transform(&preds, angle, dx, dy));
        for protocol in Protocol::ALL {
            let a = match_with(protocol, &gts, &preds, RADIUS);
            let b = match_with(protocol, &tg, &tp, RADIUS);
            prop_assert_eq!(a, b, "{}", protocol);
        }
    }

    #[test]
    fn exact_motion_invariance(gts in grid_points(10), preds in grid_points(10), dx in -50i32..50, dy in -50i32..50) {
        // integer points sit exactly on the radius boundary often; quarter turns
        // and integer shifts keep distances bit-identical
        let quarter = |pts: &[LabeledPoint]| -> Vec<LabeledPoint> {
            pts.iter().map(|p| LabeledPoint::new(-p.y + dx as f64, p.x + dy as f64, p.class_id)).collect()
        };
        for protocol in Protocol::ALL {
            prop_assert_eq!(
                match_with(protocol, &gts, &preds, RADIUS),
                match_with(protocol, &quarter(&gts), &quarter(&preds), RADIUS)
            );
        }
    }

    #[test]
    fn permutation_invariance(gts in points(10, 2), preds in points(10, 2), shift in 0usize..10) {
        let rotate = |v: &[LabeledPoint]| {
            let mut v = v.to_vec();
            if !v.is_empty() {
                let k = shift % v.len();
                v.rotate_left(k);
            }
            v
        };
        let mut rev = preds.clone();
        rev.reverse();
        for protocol in Protocol::ALL {
            let base = match_with(protocol, &gts, &preds, RADIUS);
            prop_assert_eq!(&base, &match_with(protocol, &rotate(&gts), &preds, RADIUS));
            prop_assert_eq!(&base, &match_with(protocol, &gts, &rev, RADIUS));
        }
    }

    #[test]
    fn thresholded_matches_oracle(gts in grid_points(7), preds in grid_points(7)) {
        for class_id in 1..=2 {
            let g: Vec<_> = gts.iter().filter(|p| p.class_id == class_id).copied().collect();
            let p: Vec<_> = preds.iter().filter(|p| p.class_id == class_id).copied().collect();
            let adj = BoolMatrix::from_fn(g.len(), p.len(), |i, j| g[i].distance_to(p[j].x, p[j].y) <= RADIUS);
            let oracle = brute_force_max_matching(&adj).unwrap().len();
            prop_assert_eq!(count_thresholded(&g, &p, RADIUS).0, oracle);
        }
    }
}
