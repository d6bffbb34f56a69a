use pointmatch_core::anchors::{apply_offsets, make_grid, threshold_predictions, GridSpec};
use pointmatch_core::PredictedPoint;
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = GridSpec> {
    (1usize..8, 1usize..8, 1usize..17, 1usize..4, 1usize..4)
        .prop_map(|(h, w, s, kr, kc)| GridSpec::new(h, w, s, (kr, kc)).unwrap())
}

proptest! {
    #[test]
    fn grid_count_and_extent(spec in spec()) {
        let grid = make_grid(spec);
        prop_assert_eq!(grid.len(), spec.feature_height * spec.feature_width * spec.per_cell.0 * spec.per_cell.1);
        let (w, h) = spec.extent();
        for &(x, y) in &grid.positions {
            prop_assert!(x > 0.0 && x < w && y > 0.0 && y < h);
        }
        let mut sorted = grid.positions.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.dedup();
        prop_assert_eq!(sorted.len(), grid.len());
    }

    #[test]
    fn threshold_monotone(
        confs in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 0..40),
        lo in prop::collection::vec(0.0f64..1.0, 2),
        bump in prop::collection::vec(0.0f64..0.5, 2),
    ) {
        let pts: Vec<_> = confs.into_iter().map(|c| PredictedPoint::new(0.0, 0.0, c)).collect();
        let hi: Vec<f64> = lo.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let n_lo = threshold_predictions(&pts, &lo).unwrap().len();
        let n_hi = threshold_predictions(&pts, &hi).unwrap().len();
        prop_assert!(n_hi <= n_lo);
    }

    #[test]
    fn offsets_then_zero_threshold_is_bijection(spec in spec(), seed in any::<u64>()) {
        let grid = make_grid(spec);
        let m = grid.len();
        let offsets: Vec<(f64, f64)> = (0..m)
            .map(|j| {
                let v = seed.wrapping_mul(j as u64 + 1) % 1000;
                (v as f64 / 100.0 - 5.0, 5.0 - v as f64 / 200.0)
            })
            .collect();
        // foreground-dominant confidences
        let confs: Vec<Vec<f64>> = (0..m).map(|j| if j % 2 == 0 { vec![0.1, 0.7, 0.2] } else { vec![0.1, 0.2, 0.7] }).collect();
        let pts = apply_offsets(&grid, &offsets, &confs).unwrap();
        let kept = threshold_predictions(&pts, &[0.0, 0.0]).unwrap();
        prop_assert_eq!(kept.len(), m);
        for ((lp, _), p) in kept.iter().zip(&pts) {
            prop_assert_eq!((lp.x, lp.y), (p.x, p.y));
        }
    }
}
