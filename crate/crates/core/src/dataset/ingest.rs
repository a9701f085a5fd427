//! Reading and writing the class-folder dataset layout:
//!
//! ```text
//! root/{benign,malignant,normal}/<name>.png
//!                               /<name>_mask.png
//!                               /<name>_mask_1.png ...
//! ```
//!
//! Every connected component of every mask file becomes its own instance.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{read_binary_mask, read_gray, write_binary_mask, write_gray, BinaryMask};
use crate::label::ClassLabel;

use super::{DatasetRecord, GtInstance};

/// A per-file problem found while loading. Paths are relative to the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadIssue {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub records: usize,
    pub instances: usize,
    pub per_class: BTreeMap<ClassLabel, usize>,
    pub errors: Vec<LoadIssue>,
}

impl LoadReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub records: Vec<DatasetRecord>,
    pub report: LoadReport,
}

/// Splits `name_mask` / `name_mask_3` into (`name`, index).
fn parse_mask_stem(stem: &str) -> Option<(&str, u32)> {
    if let Some(base) = stem.strip_suffix("_mask") {
        return Some((base, 0));
    }
    let (head, tail) = stem.rsplit_once("_mask_")?;
    let idx = tail.parse().ok()?;
    Some((head, idx))
}

struct Candidate {
    class: ClassLabel,
    stem: String,
    image: PathBuf,
    masks: Vec<PathBuf>,
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

fn scan_class_dir(root: &Path, class: ClassLabel, issues: &mut Vec<LoadIssue>) -> Result<Vec<Candidate>> {
    let dir = root.join(class.as_str());
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut images: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut masks: BTreeMap<String, Vec<(u32, PathBuf)>> = BTreeMap::new();
    for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
        let path = entry.map_err(|e| Error::io(&dir, e))?.path();
        let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if !is_png || !path.is_file() {
            continue;
        }
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        match parse_mask_stem(&stem) {
            Some((base, idx)) => masks.entry(base.to_string()).or_default().push((idx, path)),
            None => {
                images.insert(stem, path);
            }
        }
    }

    for (base, files) in &masks {
        if !images.contains_key(base) {
            for (_, p) in files {
                issues.push(LoadIssue { path: relative(root, p), message: "mask without a matching image".into() });
            }
        }
    }

    Ok(images
        .into_iter()
        .map(|(stem, image)| {
            let mut files = masks.remove(&stem).unwrap_or_default();
            files.sort();
            Candidate { class, stem, image, masks: files.into_iter().map(|(_, p)| p).collect() }
        })
        .collect())
}

fn load_candidate(root: &Path, c: &Candidate) -> std::result::Result<DatasetRecord, LoadIssue> {
    let issue = |path: &Path, message: String| LoadIssue { path: relative(root, path), message };
    let image = read_gray(&c.image).map_err(|e| issue(&c.image, e.to_string()))?;
    if c.masks.is_empty() && c.class.is_lesion() {
        return Err(issue(&c.image, format!("{} image has no mask file", c.class)));
    }
    let mut instances = Vec::new();
    for path in &c.masks {
        let mask = read_binary_mask(path).map_err(|e| issue(path, e.to_string()))?;
        if mask.size() != image.size() {
            return Err(issue(path, format!("mask is {} but image is {}", mask.size(), image.size())));
        }
        if !c.class.is_lesion() {
            if !mask.is_empty_mask() {
                return Err(issue(path, "normal image has a non-empty mask".into()));
            }
            continue;
        }
        instances.extend(GtInstance::split_mask(&mask, c.class).map_err(|e| issue(path, e.to_string()))?);
    }
    Ok(DatasetRecord { id: c.stem.clone(), label: c.class, image, instances })
}

/// Loads every record under `root`. Per-file problems are collected in the
/// report and the affected record is skipped; only an unreadable root fails.
pub fn ingest(root: &Path) -> Result<Ingested> {
    if !root.is_dir() {
        return Err(Error::io(root, std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root not found")));
    }
    let mut issues = Vec::new();
    let mut candidates = Vec::new();
    for class in ClassLabel::ALL {
        candidates.extend(scan_class_dir(root, class, &mut issues)?);
    }

    let loaded: Vec<_> = candidates.par_iter().map(|c| load_candidate(root, c)).collect();

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (cand, result) in candidates.iter().zip(loaded) {
        match result {
            Ok(record) if !seen.insert(record.id.clone()) => issues.push(LoadIssue {
                path: relative(root, &cand.image),
                message: format!("duplicate image id `{}`", record.id),
            }),
            Ok(record) => records.push(record),
            Err(issue) => issues.push(issue),
        }
    }
    records.sort_by(|a, b| (a.label, &a.id).cmp(&(b.label, &b.id)));
    issues.sort_by(|a, b| a.path.cmp(&b.path));

    let mut per_class = BTreeMap::new();
    for r in &records {
        *per_class.entry(r.label).or_insert(0) += 1;
    }
    let report = LoadReport {
        records: records.len(),
        instances: records.iter().map(|r| r.instances.len()).sum(),
        per_class,
        errors: issues,
    };
    Ok(Ingested { records, report })
}

fn mask_name(id: &str, k: usize) -> String {
    if k == 0 {
        format!("{id}_mask.png")
    } else {
        format!("{id}_mask_{k}.png")
    }
}

/// Writes records in the layout [`ingest`] reads: one mask file per
/// instance, and a single empty mask for records without instances.
pub fn write_dataset(records: &[DatasetRecord], root: &Path) -> Result<()> {
    records.par_iter().try_for_each(|r| {
        let dir = root.join(r.label.as_str());
        write_gray(&dir.join(format!("{}.png", r.id)), &r.image)?;
        if r.instances.is_empty() {
            write_binary_mask(&dir.join(mask_name(&r.id, 0)), &BinaryMask::filled(r.size(), false))?;
        }
        for (k, inst) in r.instances.iter().enumerate() {
            write_binary_mask(&dir.join(mask_name(&r.id, k)), &inst.mask)?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundingBox, ImageSize};
    use crate::imaging::Image;

    fn blob_mask(size: ImageSize, boxes: &[(u32, u32, u32, u32)]) -> BinaryMask {
        BinaryMask::from_fn(size, |x, y| {
            boxes.iter().any(|&(bx, by, bw, bh)| x >= bx && x < bx + bw && y >= by && y < by + bh)
        })
    }

    #[test]
    fn mask_stem_parsing() {
        assert_eq!(parse_mask_stem("benign (1)_mask"), Some(("benign (1)", 0)));
        assert_eq!(parse_mask_stem("benign (1)_mask_2"), Some(("benign (1)", 2)));
        assert_eq!(parse_mask_stem("benign (1)"), None);
        assert_eq!(parse_mask_stem("x_mask_a"), None);
    }

    #[test]
    fn minimal_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let size = ImageSize::new(40, 30);
        let img = Image::filled(size, 100);
        write_gray(&root.join("benign/b1.png"), &img).unwrap();
        write_binary_mask(&root.join("benign/b1_mask.png"), &blob_mask(size, &[(5, 5, 6, 4)])).unwrap();
        write_gray(&root.join("malignant/m1.png"), &img).unwrap();
        write_binary_mask(&root.join("malignant/m1_mask.png"), &blob_mask(size, &[(1, 1, 3, 3), (20, 20, 5, 5)]))
            .unwrap();
        write_gray(&root.join("normal/n1.png"), &img).unwrap();
        write_binary_mask(&root.join("normal/n1_mask.png"), &BinaryMask::filled(size, false)).unwrap();

        let ing = ingest(root).unwrap();
        assert!(ing.report.is_clean(), "{:?}", ing.report);
        assert_eq!(ing.records.len(), 3);
        let b = &ing.records[0];
        assert_eq!((b.id.as_str(), b.label, b.instances.len()), ("b1", ClassLabel::Benign, 1));
        assert_eq!(b.instances[0].tight, BoundingBox::new(5, 5, 6, 4).unwrap());
        assert_eq!(b.instances[0].expanded, BoundingBox::new(0, 0, 16, 14).unwrap());
        assert_eq!(ing.records[1].instances.len(), 2);
        assert!(ing.records[2].instances.is_empty());
        assert_eq!(ing.report.instances, 3);
    }

    #[test]
    fn size_mismatch_and_orphans_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        write_gray(&root.join("benign/a.png"), &Image::filled(ImageSize::new(10, 10), 0)).unwrap();
        write_binary_mask(&root.join("benign/a_mask.png"), &BinaryMask::filled(ImageSize::new(9, 10), true)).unwrap();
        write_binary_mask(&root.join("benign/ghost_mask.png"), &BinaryMask::filled(ImageSize::new(9, 10), true))
            .unwrap();
        write_gray(&root.join("benign/nomask.png"), &Image::filled(ImageSize::new(10, 10), 0)).unwrap();
        fs::create_dir_all(root.join("malignant")).unwrap();
        fs::write(root.join("malignant/broken.png"), b"not a png").unwrap();

        let ing = ingest(root).unwrap();
        assert!(ing.records.is_empty());
        let paths: Vec<&str> = ing.report.errors.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(paths, ["benign/a_mask.png", "benign/ghost_mask.png", "benign/nomask.png", "malignant/broken.png"]);
    }
}
