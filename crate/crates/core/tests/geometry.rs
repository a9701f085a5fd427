mod common;

use proptest::prelude::*;
use roiseg::geometry::{clip_box, expand_box, from_roi, iou, to_roi};
use roiseg::{BoundingBox, ImageSize, Point};

use common::{corner_iou, Raster};

fn box_in(extent: i32) -> impl Strategy<Value = BoundingBox> {
    (0..extent, 0..extent)
        .prop_flat_map(move |(x, y)| (Just(x), Just(y), 1..=(extent - x) as u32, 1..=(extent - y) as u32))
        .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h).unwrap())
}

#[test]
fn quarter_overlap_matches_raster_count() {
    let grid = Raster::new(30, 30);
    let a = BoundingBox::new(0, 0, 10, 10).unwrap();
    let b = BoundingBox::new(5, 5, 10, 10).unwrap();
    let want = Raster::iou(&grid.rasterize(&a), &grid.rasterize(&b));
    assert_eq!(iou(&a, &b), want);
    assert!((want - 25.0 / 175.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn iou_matches_pixel_count_on_32x32(a in box_in(32), b in box_in(32)) {
        let grid = Raster::new(32, 32);
        let want = Raster::iou(&grid.rasterize(&a), &grid.rasterize(&b));
        prop_assert_eq!(iou(&a, &b), want);
        prop_assert_eq!(iou(&b, &a), want);
        prop_assert_eq!(iou(&a, &a), 1.0);
        prop_assert_eq!(corner_iou(&a, &b), want);
    }

    #[test]
    fn expansion_contains_original_and_stays_in_bounds(b in box_in(64), half in 0u32..12) {
        let bounds = ImageSize::new(64, 64);
        let e = expand_box(&b, 2 * half, bounds).unwrap();
        prop_assert!(e.fits_within(bounds));
        prop_assert_eq!(e.intersection(&b), Some(b));
        prop_assert!(e.w() <= b.w() + 2 * half && e.h() <= b.h() + 2 * half);
        // the unclipped box is centered: each side moves by exactly half or hits the border
        prop_assert_eq!(e.x() as i64, (b.x() as i64 - half as i64).max(0));
        prop_assert_eq!(e.bottom(), (b.bottom() + half as i64).min(64));
    }

    #[test]
    fn clipping_is_intersection_with_frame(x in -40i32..80, y in -40i32..80, w in 1u32..60, h in 1u32..60) {
        let b = BoundingBox::new(x, y, w, h).unwrap();
        let bounds = ImageSize::new(48, 32);
        match clip_box(&b, bounds) {
            Ok(c) => {
                prop_assert!(c.fits_within(bounds));
                prop_assert_eq!(c.area(), b.intersection_area(&bounds.full_box()));
            }
            Err(_) => prop_assert_eq!(b.intersection_area(&bounds.full_box()), 0),
        }
    }

    #[test]
    fn roi_coordinates_roundtrip(roi in box_in(100), px in -50i32..150, py in -50i32..150) {
        let p = Point::new(px, py);
        prop_assert_eq!(from_roi(to_roi(p, &roi), &roi), p);
        prop_assert_eq!(to_roi(from_roi(p, &roi), &roi), p);
    }
}

#[test]
fn odd_offset_rejected() {
    let b = BoundingBox::new(4, 4, 4, 4).unwrap();
    assert!(expand_box(&b, 9, ImageSize::new(20, 20)).is_err());
}
