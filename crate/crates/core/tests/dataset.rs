mod common;

use std::collections::BTreeSet;

use roiseg::dataset::{
    augment, augment_with_params, ingest, make_split, split_holdout, synth_generate, write_dataset, AugmentParams,
    DatasetRecord, FoldSplit, GtInstance, HoldoutRatios, SplitItem, SYNTH_DEFAULT_SIZE,
};
use roiseg::imaging::{write_binary_mask, write_gray, BinaryMask, Image};
use roiseg::metrics::dice_coefficient;
use roiseg::{ClassLabel, ImageSize};

use common::warp_oracle;

fn items(label: ClassLabel, n: usize) -> Vec<SplitItem> {
    (0..n).map(|i| SplitItem { id: format!("{label}_{i:03}"), label }).collect()
}

#[test]
fn written_dataset_ingests_back_unchanged() {
    let records = synth_generate(3, ImageSize::new(48, 40), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&records, dir.path()).unwrap();
    let loaded = ingest(dir.path()).unwrap();
    assert!(loaded.report.is_clean(), "{:?}", loaded.report.errors);
    assert_eq!(loaded.report.records, 9);
    let mut want = records.clone();
    want.sort_by(|a, b| (a.label, &a.id).cmp(&(b.label, &b.id)));
    assert_eq!(loaded.records, want);
}

#[test]
fn two_blobs_in_one_mask_become_two_instances() {
    let dir = tempfile::tempdir().unwrap();
    let size = ImageSize::new(30, 30);
    let mask = BinaryMask::from_fn(size, |x, y| (x < 5 && y < 5) || (x > 20 && y > 20));
    write_gray(&dir.path().join("benign/a.png"), &Image::filled(size, 90)).unwrap();
    write_binary_mask(&dir.path().join("benign/a_mask.png"), &mask).unwrap();
    let loaded = ingest(dir.path()).unwrap();
    assert_eq!(loaded.records[0].instances.len(), 2);
    assert_eq!(loaded.records[0].gt_mask(), mask);
}

#[test]
fn broken_files_reported_per_file() {
    let dir = tempfile::tempdir().unwrap();
    let size = ImageSize::new(10, 10);
    write_gray(&dir.path().join("benign/ok.png"), &Image::filled(size, 1)).unwrap();
    write_binary_mask(&dir.path().join("benign/ok_mask.png"), &BinaryMask::filled(size, true)).unwrap();
    write_gray(&dir.path().join("malignant/bad.png"), &Image::filled(size, 1)).unwrap();
    write_binary_mask(&dir.path().join("malignant/bad_mask.png"), &BinaryMask::filled(ImageSize::new(4, 4), true))
        .unwrap();
    std::fs::create_dir_all(dir.path().join("normal")).unwrap();
    std::fs::write(dir.path().join("normal/junk.png"), b"not a png").unwrap();
    let loaded = ingest(dir.path()).unwrap();
    assert_eq!(loaded.records.len(), 1);
    let paths: BTreeSet<&str> = loaded.report.errors.iter().map(|e| e.path.as_str()).collect();
    assert!(paths.iter().any(|p| p.starts_with("malignant/bad")));
    assert!(paths.contains("normal/junk.png"));
    assert!(paths.iter().all(|p| !p.starts_with('/')));
}

#[test]
fn holdout_of_one_hundred() {
    let split = split_holdout(&items(ClassLabel::Benign, 100), HoldoutRatios::default(), 4).unwrap();
    assert_eq!((split.train.len(), split.val.len(), split.test.len()), (80, 10, 10));
    let all: BTreeSet<&String> = split.train.iter().chain(&split.val).chain(&split.test).collect();
    assert_eq!(all.len(), 100);
}

#[test]
fn same_seed_same_split_and_manifest_roundtrips() {
    let mut pool = items(ClassLabel::Benign, 435);
    pool.extend(items(ClassLabel::Malignant, 210));
    let (a, _) = make_split(&pool, HoldoutRatios::default(), 9, 1).unwrap();
    let (b, _) = make_split(&pool, HoldoutRatios::default(), 9, 1).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let (c, _) = make_split(&pool, HoldoutRatios::default(), 9, 2).unwrap();
    assert_ne!(a, c);

    for label in [ClassLabel::Benign, ClassLabel::Malignant] {
        let counts: Vec<usize> =
            a.folds.iter().map(|f| f.iter().filter(|id| id.starts_with(label.as_str())).count()).collect();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1, "{label}: {counts:?}");
    }
    for (train, val) in a.rounds() {
        assert_eq!(train.len() + val.len(), a.pool().len());
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("splits/split.json");
    a.write(&path).unwrap();
    assert_eq!(FoldSplit::read(&path).unwrap(), a);
    let value: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
    let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["folds", "seed", "test"]);
}

#[test]
fn augment_yields_six_records_with_consistent_geometry() {
    let records = synth_generate(4, SYNTH_DEFAULT_SIZE, 2).unwrap();
    for r in &records {
        let out = augment(r, 5, 17).unwrap();
        assert_eq!(out.records.len(), 6, "{:?}", out.warnings);
        assert_eq!(&out.records[0], r);
        for (c, aug) in out.records[1..].iter().enumerate() {
            assert_eq!(aug.id, format!("{}_aug{}", r.id, c + 1));
            assert_eq!(aug.size(), r.size());
            for inst in &aug.instances {
                assert_eq!(roiseg::imaging::tight_box(&inst.mask), Some(inst.tight));
                assert!(inst.expanded.intersection(&inst.tight) == Some(inst.tight));
            }
        }
    }
}

#[test]
fn flip_only_copy_matches_pixel_flip_oracle() {
    let record = synth_generate(1, ImageSize::new(41, 33), 8).unwrap().remove(0);
    let params = AugmentParams { flip: true, ..Default::default() };
    let flipped = augment_with_params(&record, &params, "f".into()).unwrap().unwrap();
    let gt = record.gt_mask();
    let oracle = BinaryMask::from_fn(gt.size(), |x, y| gt.get(gt.width() - 1 - x, y));
    assert_eq!(dice_coefficient(&flipped.gt_mask(), &oracle).unwrap(), 1.0);
    assert_eq!(warp_oracle(&gt, &params), oracle);
    let img = &record.image;
    assert_eq!(flipped.image, Image::from_fn(img.size(), |x, y| img.get(img.width() - 1 - x, y)));
}

#[test]
fn lesion_pushed_out_of_frame_is_rejected() {
    let size = ImageSize::new(40, 40);
    let mask = BinaryMask::from_fn(size, |x, y| x < 2 && y < 2);
    let record = DatasetRecord {
        id: "corner".into(),
        label: ClassLabel::Benign,
        image: Image::filled(size, 100),
        instances: GtInstance::split_mask(&mask, ClassLabel::Benign).unwrap(),
    };
    let params = AugmentParams { scale: 2.0, ..Default::default() };
    assert!(augment_with_params(&record, &params, "x".into()).unwrap().is_none());
}

#[test]
fn synth_is_reproducible() {
    let a = synth_generate(3, SYNTH_DEFAULT_SIZE, 5).unwrap();
    assert_eq!(a, synth_generate(3, SYNTH_DEFAULT_SIZE, 5).unwrap());
    assert_ne!(a, synth_generate(3, SYNTH_DEFAULT_SIZE, 6).unwrap());
    assert!(a.iter().filter(|r| r.label == ClassLabel::Normal).all(|r| r.instances.is_empty()));
    assert!(a.iter().filter(|r| r.label.is_lesion()).all(|r| !r.instances.is_empty()));
}
