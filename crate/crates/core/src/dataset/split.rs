//! Class-stratified holdout split and k-fold assignment.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::ClassLabel;

use super::seed::derive_seed;
use super::SplitItem;

pub const DEFAULT_FOLDS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldoutRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for HoldoutRatios {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1, test: 0.1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HoldoutSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    /// Classes too small to populate every part.
    pub warnings: Vec<String>,
}

fn by_class(items: &[SplitItem]) -> BTreeMap<ClassLabel, Vec<String>> {
    let mut groups: BTreeMap<ClassLabel, Vec<String>> = BTreeMap::new();
    for it in items {
        groups.entry(it.label).or_default().push(it.id.clone());
    }
    for ids in groups.values_mut() {
        ids.sort();
    }
    groups
}

fn shuffled(mut ids: Vec<String>, seed: u64, tag: &str, class: ClassLabel) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, class.as_str(), &[]));
    ids.shuffle(&mut rng);
    ids
}

/// Largest-remainder apportionment of `n` items by `ratios`; ties in the
/// fractional part go to the earlier part.
fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| (r + 1e-9).floor() as usize).collect();
    let mut left = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    let frac = |i: usize| raw[i] - counts[i] as f64;
    order.sort_by(|&a, &b| {
        let (fa, fb) = (frac(a), frac(b));
        if (fa - fb).abs() < 1e-9 {
            a.cmp(&b)
        } else {
            fb.total_cmp(&fa)
        }
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Stratified train/val/test split. Deterministic in `seed` and independent
/// of the order of `items`.
pub fn split_holdout(items: &[SplitItem], ratios: HoldoutRatios, seed: u64) -> Result<HoldoutSplit> {
    let parts = [ratios.train, ratios.val, ratios.test];
    if parts.iter().any(|r| !(0.0..=1.0).contains(r)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "holdout ratios must be in [0, 1] and sum to 1, got {parts:?}"
        )));
    }
    let mut out = HoldoutSplit::default();
    for (class, ids) in by_class(items) {
        if ids.len() < 3 {
            out.warnings.push(format!("class {class} has only {} records", ids.len()));
        }
        let counts = apportion(ids.len(), &parts);
        let ids = shuffled(ids, seed, "holdout", class);
        let (train, rest) = ids.split_at(counts[0]);
        let (val, test) = rest.split_at(counts[1]);
        out.train.extend_from_slice(train);
        out.val.extend_from_slice(val);
        out.test.extend_from_slice(test);
    }
    out.train.sort();
    out.val.sort();
    out.test.sort();
    Ok(out)
}

/// Class-stratified fold assignment: each class is shuffled and dealt
/// round-robin, continuing where the previous class stopped so fold sizes
/// stay balanced. Per class, every fold gets `floor(n/k)` or `ceil(n/k)`.
pub fn kfold_stratified(pool: &[SplitItem], k: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > pool.len() {
        return Err(Error::InvalidArgument(format!("{k} folds requested for {} records", pool.len())));
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (class, ids) in by_class(pool) {
        for id in shuffled(ids, seed, "kfold", class) {
            folds[next].push(id);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(folds)
}

/// Held-out test ids plus the cross-validation folds over the remaining
/// train+validation pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldSplit {
    pub seed: u64,
    pub test: Vec<String>,
    pub folds: Vec<Vec<String>>,
}

/// Holdout split followed by k-fold over train+val.
pub fn make_split(items: &[SplitItem], ratios: HoldoutRatios, k: usize, seed: u64) -> Result<(FoldSplit, Vec<String>)> {
    let holdout = split_holdout(items, ratios, seed)?;
    let test: std::collections::HashSet<&str> = holdout.test.iter().map(String::as_str).collect();
    let pool: Vec<SplitItem> = items.iter().filter(|it| !test.contains(it.id.as_str())).cloned().collect();
    let folds = kfold_stratified(&pool, k, seed)?;
    Ok((FoldSplit { seed, test: holdout.test, folds }, holdout.warnings))
}

impl FoldSplit {
    /// (train, validation) for every round: fold `i` validates, the others train.
    pub fn rounds(&self) -> Vec<(Vec<String>, Vec<String>)> {
        (0..self.folds.len())
            .map(|i| {
                let mut train: Vec<String> = self
                    .folds
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .flat_map(|(_, f)| f.iter().cloned())
                    .collect();
                train.sort();
                (train, self.folds[i].clone())
            })
            .collect()
    }

    pub fn pool(&self) -> Vec<String> {
        let mut all: Vec<String> = self.folds.iter().flatten().cloned().collect();
        all.sort();
        all
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("split serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}
