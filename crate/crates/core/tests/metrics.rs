mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roiseg::detection::Detection;
use roiseg::imaging::{BinaryMask, ProbMask};
use roiseg::metrics::{
    average_precision, dice_coefficient, dice_loss, evaluate, match_detections, pixel_rmse, DetectionTally,
    ImageEval, MAP_IOU,
};
use roiseg::{BoundingBox, ClassLabel, ImageSize};

use common::{ap_oracle, random_mask};

fn masks(seed: u64, w: u32, h: u32) -> (BinaryMask, BinaryMask, ProbMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = ImageSize::new(w, h);
    let (da, db) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
    let a = random_mask(&mut rng, size, da);
    let b = random_mask(&mut rng, size, db);
    let p = ProbMask::from_fn(size, |_, _| rng.random_range(0.0f32..=1.0));
    (a, b, p)
}

fn bb(x: i32, y: i32, w: u32, h: u32) -> BoundingBox {
    BoundingBox::new(x, y, w, h).unwrap()
}

fn det(b: BoundingBox, label: ClassLabel, score: f64) -> Detection {
    Detection::new(b, label, score).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dice_loss_symmetric_on_binary_masks(seed in any::<u64>(), w in 1u32..24, h in 1u32..24) {
        let (a, b, _) = masks(seed, w, h);
        prop_assert_eq!(dice_loss(&a.to_prob(), &b).unwrap(), dice_loss(&b.to_prob(), &a).unwrap());
    }

    #[test]
    fn dice_loss_bounded_and_stable(seed in any::<u64>(), w in 1u32..24, h in 1u32..24) {
        let (_, g, p) = masks(seed, w, h);
        let l = dice_loss(&p, &g).unwrap();
        prop_assert!((-0.5..=0.0).contains(&l));
        // epsilon only matters when both inputs are empty
        let exact = {
            let pg: f64 = p.as_slice().iter().zip(g.as_slice()).map(|(&p, &g)| if g { p as f64 } else { 0.0 }).sum();
            let pp: f64 = p.as_slice().iter().map(|&p| (p as f64).powi(2)).sum();
            let gg = g.count_ones() as f64;
            if pp + gg == 0.0 { 0.0 } else { -pg / (pp + gg) }
        };
        prop_assert!((l - exact).abs() <= 1e-5 * exact.abs().max(1e-3));
    }

    #[test]
    fn coefficient_is_minus_twice_loss(seed in any::<u64>(), w in 1u32..24, h in 1u32..24) {
        let (a, b, _) = masks(seed, w, h);
        prop_assume!(!(a.is_empty_mask() && b.is_empty_mask()));
        let c = dice_coefficient(&a, &b).unwrap();
        let l = dice_loss(&a.to_prob(), &b).unwrap();
        prop_assert!((c + 2.0 * l).abs() <= 1e-5);
    }

    #[test]
    fn rmse_invariant_under_pixel_permutation(seed in any::<u64>(), n in 1u32..60) {
        let (_, g, p) = masks(seed, n, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut order: Vec<usize> = (0..n as usize).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let size = ImageSize::new(n, 1);
        let p2 = ProbMask::from_vec(size, order.iter().map(|&i| p.as_slice()[i]).collect()).unwrap();
        let g2 = BinaryMask::from_vec(size, order.iter().map(|&i| g.as_slice()[i]).collect()).unwrap();
        let (r1, r2) = (pixel_rmse(&p, &g).unwrap(), pixel_rmse(&p2, &g2).unwrap());
        prop_assert!((r1 - r2).abs() <= 1e-12);
    }

    #[test]
    fn ap_matches_threshold_enumeration(flags in prop::collection::vec((0u32..8, any::<bool>()), 0..12), extra in 0usize..4) {
        let scored: Vec<(f64, bool)> = flags.iter().map(|&(s, tp)| (s as f64 / 8.0, tp)).collect();
        let n_gt = scored.iter().filter(|s| s.1).count() + extra;
        prop_assert!((average_precision(&scored, n_gt) - ap_oracle(&scored, n_gt)).abs() <= 1e-12);
    }
}

#[test]
fn dice_loss_hand_values() {
    let p = ProbMask::from_vec(ImageSize::new(2, 1), vec![0.5, 0.5]).unwrap();
    let g = BinaryMask::from_vec(ImageSize::new(2, 1), vec![true, false]).unwrap();
    assert!((dice_loss(&p, &g).unwrap() + 1.0 / 3.0).abs() < 1e-6);
}

#[test]
fn dice_coefficient_half_overlap() {
    let size = ImageSize::new(6, 1);
    let a = BinaryMask::from_vec(size, vec![true, true, true, true, false, false]).unwrap();
    let b = BinaryMask::from_vec(size, vec![false, false, true, true, true, true]).unwrap();
    assert_eq!(dice_coefficient(&a, &b).unwrap(), 0.5);
}

#[test]
fn ap_ordering_examples() {
    assert_eq!(average_precision(&[(0.9, true), (0.8, false)], 1), 1.0);
    assert_eq!(average_precision(&[(0.9, false), (0.8, true)], 1), 0.5);
    assert_eq!(ap_oracle(&[(0.9, false), (0.8, true)], 1), 0.5);
}

#[test]
fn matching_is_one_to_one_and_class_aware() {
    let gt = vec![(bb(0, 0, 10, 10), ClassLabel::Benign)];
    let preds = vec![
        det(bb(0, 0, 10, 10), ClassLabel::Benign, 0.9),
        det(bb(1, 0, 10, 10), ClassLabel::Benign, 0.8),
        det(bb(0, 0, 10, 10), ClassLabel::Malignant, 0.95),
    ];
    assert_eq!(match_detections(&preds, &gt, MAP_IOU), vec![true, false, false]);
}

#[test]
fn oracle_detections_score_full_map() {
    let mut tally = DetectionTally::new(MAP_IOU);
    let gts = vec![(bb(2, 2, 8, 8), ClassLabel::Benign), (bb(20, 20, 5, 9), ClassLabel::Malignant)];
    let preds: Vec<Detection> = gts.iter().map(|&(b, l)| det(b, l, 1.0)).collect();
    tally.add_image(&preds, &gts);
    assert_eq!(tally.mean_ap(), 1.0);
}

#[test]
fn normal_only_report_has_zero_rmse_and_no_detections() {
    let size = ImageSize::new(8, 8);
    let images: Vec<ImageEval> = (0..3)
        .map(|i| ImageEval {
            image_id: format!("n{i}"),
            label: ClassLabel::Normal,
            gt_mask: BinaryMask::filled(size, false),
            gt_boxes: vec![],
            pred_mask: BinaryMask::filled(size, false),
            pred_detections: vec![],
        })
        .collect();
    let report = evaluate(&images).unwrap();
    assert_eq!(report.per_class_rmse["normal"], 0.0);
    assert!(report.detections.is_empty());
    assert_eq!(report.rows.len(), 3);
    let json = report.to_json();
    assert!(json.contains("\"map_50\""));
    assert!(report.to_csv().starts_with("image_id,class,rmse,dice,matched\n"));
}
