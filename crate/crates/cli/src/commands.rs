use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use roiseg::dataset::{
    augment_all, ingest, make_split, synth_generate, write_dataset, DatasetRecord, FoldSplit, HoldoutRatios,
    LoadReport, SplitItem,
};
use roiseg::detection::{DetectorBackend, FileDetector, OracleDetector};
use roiseg::imaging::{render_overlay, write_overlay, BinaryMask, Image};
use roiseg::metrics::{evaluate, ImageEval};
use roiseg::pipeline::{
    assemble_batch, clip_detections, plan_rois, read_instances, manifest_for, read_manifest, read_mask_batch, reference_segmenter,
    run_images, write_instances, write_roi_batch, ImageOutcome, Instance, PipelineConfig, ReferenceKind, RoiError, RoiSize,
    Segmenters, MANIFEST_FILE,
};
use roiseg::{ClassLabel, ImageSize};

use crate::config::{ReportFormat, RunConfig};
use crate::failure::{CliResult, Failure};

pub const SPLIT_FILE: &str = "splits/split.json";
pub const LOAD_REPORT_FILE: &str = "reports/load_report.json";
const DETECTIONS_FILE: &str = "detections.jsonl";

/// Settings shared by every command.
pub struct Context {
    pub config: RunConfig,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Context {
    fn require_seed(&self, command: &str) -> CliResult<u64> {
        self.seed
            .or(self.config.seed)
            .ok_or_else(|| Failure::usage(format!("`{command}` needs a seed: pass --seed or set `seed` in the config")))
    }

    /// `--data`, else the config's `data`, else `<out>/dataset`.
    fn data_root(&self, flag: Option<&Path>) -> CliResult<PathBuf> {
        let root = flag
            .map(Path::to_path_buf)
            .or_else(|| self.config.data.clone())
            .unwrap_or_else(|| self.out.join("dataset"));
        if !root.is_dir() {
            return Err(Failure::usage(format!("dataset root {} does not exist", root.display())));
        }
        Ok(root)
    }

    fn load(&self, flag: Option<&Path>) -> CliResult<Vec<DatasetRecord>> {
        let root = self.data_root(flag)?;
        let loaded = ingest(&root)?;
        if !loaded.report.is_clean() {
            write_load_report(&self.out, &loaded.report)?;
            for issue in &loaded.report.errors {
                eprintln!("{}: {}", issue.path, issue.message);
            }
            return Err(Failure::data(format!(
                "{} problem(s) in the dataset, see {LOAD_REPORT_FILE}",
                loaded.report.errors.len()
            )));
        }
        Ok(loaded.records)
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::data(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}

fn write_load_report(out: &Path, report: &LoadReport) -> CliResult {
    let mut text = serde_json::to_string_pretty(report).expect("load report serializes");
    text.push('\n');
    write_text(&out.join(LOAD_REPORT_FILE), &text)
}

pub fn ingest_cmd(ctx: &Context, data: Option<&Path>) -> CliResult {
    let root = ctx.data_root(data)?;
    let loaded = ingest(&root)?;
    write_load_report(&ctx.out, &loaded.report)?;
    let r = &loaded.report;
    let counts: Vec<String> = r.per_class.iter().map(|(l, n)| format!("{l} {n}")).collect();
    println!("{} records ({}), {} instances", r.records, counts.join(", "), r.instances);
    if !r.is_clean() {
        for issue in &r.errors {
            eprintln!("{}: {}", issue.path, issue.message);
        }
        return Err(Failure::data(format!("{} problem(s), see {LOAD_REPORT_FILE}", r.errors.len())));
    }
    Ok(())
}

pub fn split_cmd(ctx: &Context, data: Option<&Path>, folds: usize) -> CliResult {
    let seed = ctx.require_seed("split")?;
    let records = ctx.load(data)?;
    let items: Vec<SplitItem> = records.iter().map(SplitItem::from).collect();
    let (split, warnings) = make_split(&items, HoldoutRatios::default(), folds, seed)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    split.write(&ctx.out.join(SPLIT_FILE))?;
    println!("{} test, {} folds over {} records -> {SPLIT_FILE}", split.test.len(), split.folds.len(), split.pool().len());
    Ok(())
}

pub fn augment_cmd(
    ctx: &Context,
    data: Option<&Path>,
    copies: usize,
    split: Option<&Path>,
    dest: Option<&Path>,
) -> CliResult {
    let seed = ctx.require_seed("augment")?;
    let root = ctx.data_root(data)?;
    let dest = dest.map(Path::to_path_buf).unwrap_or_else(|| ctx.out.join("augmented"));
    if dest.exists() && same_dir(&dest, &root) {
        return Err(Failure::usage("augment would write into its own input dataset"));
    }
    let records = ctx.load(Some(&root))?;
    let held_out: BTreeSet<String> = match split {
        Some(path) => FoldSplit::read(path)?.test.into_iter().collect(),
        None => BTreeSet::new(),
    };
    let (test, pool): (Vec<DatasetRecord>, Vec<DatasetRecord>) =
        records.into_iter().partition(|r| held_out.contains(&r.id));
    let outcome = augment_all(&pool, copies, seed)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let created = outcome.records.len() - pool.len();
    let kept = test.len();
    let mut all = outcome.records;
    all.extend(test);
    write_dataset(&all, &dest)?;
    println!("{} records written: {} originals, {created} copies, {kept} held out unaugmented", all.len(), pool.len());
    Ok(())
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

pub fn synth_cmd(ctx: &Context, n: usize, size: Option<&str>, dest: Option<&Path>) -> CliResult {
    let seed = ctx.require_seed("synth")?;
    let size = match size {
        None => roiseg::dataset::SYNTH_DEFAULT_SIZE,
        Some(s) => match RoiSize::from_str(s).map_err(|_| Failure::usage(format!("--size must be WxH, got `{s}`")))? {
            RoiSize::Fixed(size) => size,
            RoiSize::Native => return Err(Failure::usage("--size must be WxH")),
        },
    };
    let dest = dest.map(Path::to_path_buf).unwrap_or_else(|| ctx.out.join("dataset"));
    let records = synth_generate(n, size, seed)?;
    write_dataset(&records, &dest)?;
    println!("{} synthetic records ({size}) written", records.len());
    Ok(())
}

/// Which records a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    All,
    Test,
    Fold(usize),
}

impl FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(Subset::All),
            "test" => Ok(Subset::Test),
            _ => s
                .strip_prefix("fold:")
                .and_then(|i| i.parse().ok())
                .map(Subset::Fold)
                .ok_or_else(|| format!("expected `all`, `test` or `fold:<i>`, got `{s}`")),
        }
    }
}

fn select(ctx: &Context, records: Vec<DatasetRecord>, subset: Subset, split: Option<&Path>) -> CliResult<Vec<DatasetRecord>> {
    let ids: BTreeSet<String> = match subset {
        Subset::All => return Ok(records),
        _ => {
            let path = split.map(Path::to_path_buf).unwrap_or_else(|| ctx.out.join(SPLIT_FILE));
            let split = FoldSplit::read(&path)?;
            match subset {
                Subset::Test => split.test.into_iter().collect(),
                Subset::Fold(i) => split
                    .folds
                    .get(i)
                    .ok_or_else(|| Failure::usage(format!("split has {} folds, no fold {i}", split.folds.len())))?
                    .iter()
                    .cloned()
                    .collect(),
                Subset::All => unreachable!(),
            }
        }
    };
    let chosen: Vec<DatasetRecord> = records.into_iter().filter(|r| ids.contains(&r.id)).collect();
    if chosen.len() != ids.len() {
        return Err(Failure::data(format!("split lists {} records, dataset has {} of them", ids.len(), chosen.len())));
    }
    Ok(chosen)
}

/// `external` alone means the output directory.
fn external_dir(ctx: &Context, name: &str) -> Option<PathBuf> {
    if name == "external" {
        return Some(ctx.out.clone());
    }
    name.strip_prefix("external:").map(PathBuf::from)
}

fn detector(ctx: &Context, name: &str, records: &[DatasetRecord]) -> CliResult<Box<dyn DetectorBackend>> {
    if name == "oracle" {
        return Ok(Box::new(OracleDetector::new(records, 1.0)));
    }
    let dir = external_dir(ctx, name)
        .ok_or_else(|| Failure::usage(format!("unknown detector `{name}`; use oracle or external:<dir>")))?;
    let path = dir.join(DETECTIONS_FILE);
    if !path.is_file() {
        return Err(Failure::backend(format!("external detector: {} not found", path.display())));
    }
    FileDetector::open(&path).map(|d| Box::new(d) as Box<dyn DetectorBackend>).map_err(Failure::backend)
}

pub struct RunArgs<'a> {
    pub data: Option<&'a Path>,
    pub detector: Option<&'a str>,
    pub segmenter: Option<&'a str>,
    pub subset: Subset,
    pub split: Option<&'a Path>,
    pub roi_size: Option<RoiSize>,
}

pub fn run_cmd(ctx: &Context, args: RunArgs) -> CliResult {
    let mut cfg = ctx.config.pipeline(ctx.seed)?;
    if let Some(r) = args.roi_size {
        cfg.roi_size = r;
    }
    let seg_names: BTreeMap<ClassLabel, String> = match args.segmenter {
        Some(name) => ClassLabel::LESIONS.into_iter().map(|l| (l, name.to_string())).collect(),
        None => match &ctx.config.segmenter {
            Some(choice) => choice.per_class()?,
            None => ClassLabel::LESIONS.into_iter().map(|l| (l, "otsu".to_string())).collect(),
        },
    };
    let det_name = args.detector.map(str::to_string).or_else(|| ctx.config.detector.clone()).unwrap_or("oracle".into());

    let all = ctx.load(args.data)?;
    let detector = detector(ctx, &det_name, &all)?;
    let records = select(ctx, all.clone(), args.subset, args.split)?;

    let externals: BTreeSet<Option<PathBuf>> = seg_names.values().map(|n| external_dir(ctx, n)).collect();
    let outcomes = match externals.into_iter().collect::<Vec<_>>().as_slice() {
        [Some(dir)] => match external_segment(dir, &records, detector.as_ref(), &cfg)? {
            Some(outcomes) => outcomes,
            None => return Ok(()),
        },
        [None] => {
            let mut segs = Segmenters::new();
            for (label, name) in &seg_names {
                let kind = ReferenceKind::from_str(name).map_err(|_| {
                    Failure::usage(format!("unknown segmenter `{name}`; use oracle, otsu, otsu:bright, fixed:<t> or external:<dir>"))
                })?;
                segs.insert(*label, reference_segmenter(kind, &all));
            }
            let images: Vec<(&str, &Image)> = records.iter().map(|r| (r.id.as_str(), &r.image)).collect();
            run_images(&images, detector.as_ref(), &segs, &cfg)?
        }
        _ => return Err(Failure::usage("an external segmenter must serve every class through one directory")),
    };

    clear_instances(&ctx.out)?;
    let summary = write_instances(&ctx.out, &outcomes, &cfg)?;
    let n: usize = outcomes.iter().map(|o| o.instances.len()).sum();
    println!("{} images, {n} instances, {} errors", summary.images.len(), summary.errors.len());
    if !summary.errors.is_empty() {
        for e in &summary.errors {
            match e.k {
                Some(k) => eprintln!("{} detection {k}: {}", e.image_id, e.message),
                None => eprintln!("{}: {}", e.image_id, e.message),
            }
        }
        return Err(Failure::backend(format!("{} detection(s) failed, see instances/run.json", summary.errors.len())));
    }
    Ok(())
}

/// Exports the crops when `<dir>/masks/` does not exist yet (returns `None`),
/// otherwise reads the answers back.
fn external_segment(
    dir: &Path,
    records: &[DatasetRecord],
    detector: &dyn DetectorBackend,
    cfg: &PipelineConfig,
) -> CliResult<Option<Vec<ImageOutcome>>> {
    let mut jobs = Vec::new();
    let mut early: BTreeMap<String, Vec<RoiError>> = BTreeMap::new();
    for r in records {
        let errors = early.entry(r.id.clone()).or_default();
        match detector.detect(&r.id, &r.image) {
            Ok(raw) => {
                let (dets, clip_errors) = clip_detections(&r.id, r.size(), raw);
                errors.extend(clip_errors);
                jobs.extend(plan_rois(&r.id, &r.image, &dets, cfg)?);
            }
            Err(e) => errors.push(RoiError { image_id: r.id.clone(), k: None, message: e.to_string() }),
        }
    }

    if !dir.join("masks").is_dir() {
        let manifest = write_roi_batch(&jobs, dir)?;
        println!("exported {} rois and {MANIFEST_FILE}; write masks/ and rerun to import", manifest.len());
        return Ok(None);
    }
    let manifest = read_manifest(dir)?;
    if manifest != manifest_for(&jobs) {
        return Err(Failure::backend(format!(
            "{MANIFEST_FILE} does not match this run; remove masks/ to export again"
        )));
    }
    let batch = read_mask_batch(dir, &manifest)?;
    let sizes: BTreeMap<String, ImageSize> = records.iter().map(|r| (r.id.clone(), r.size())).collect();
    let mut outcomes = assemble_batch(&manifest, &batch, &sizes, cfg)?;
    for o in &mut outcomes {
        let mut errors = early.remove(&o.image_id).unwrap_or_default();
        errors.append(&mut o.errors);
        o.errors = errors;
    }
    // back to dataset order
    let order: BTreeMap<&str, usize> = records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    outcomes.sort_by_key(|o| order[o.image_id.as_str()]);
    Ok(Some(outcomes))
}

/// Removes the files a previous run left in `instances/`.
fn clear_instances(out: &Path) -> CliResult {
    let dir = out.join("instances");
    let Ok(entries) = fs::read_dir(&dir) else {
        return Ok(());
    };
    for entry in entries.flatten() {
        let path = entry.path();
        let ours = matches!(path.extension().and_then(|e| e.to_str()), Some("png" | "jsonl" | "json"));
        if ours && path.is_file() {
            fs::remove_file(&path).map_err(|e| Failure::data(format!("cannot remove {}: {e}", path.display())))?;
        }
    }
    Ok(())
}

type Predictions = BTreeMap<String, Vec<Instance>>;

/// The run's records, in run order, and their instances.
fn predictions(ctx: &Context, data: Option<&Path>) -> CliResult<(Vec<DatasetRecord>, Predictions)> {
    let (summary, instances) = read_instances(&ctx.out).map_err(|e| Failure::from(e).context("no run output to read"))?;
    let mut by_id: BTreeMap<String, DatasetRecord> = ctx.load(data)?.into_iter().map(|r| (r.id.clone(), r)).collect();
    let records = summary
        .images
        .iter()
        .map(|id| by_id.remove(id).ok_or_else(|| Failure::data(format!("image `{id}` from the run is not in the dataset"))))
        .collect::<CliResult<Vec<_>>>()?;
    Ok((records, instances))
}

fn union_mask(size: ImageSize, instances: &[Instance]) -> CliResult<BinaryMask> {
    let mut acc = BinaryMask::filled(size, false);
    for i in instances {
        acc = acc.union(&i.mask)?;
    }
    Ok(acc)
}

pub fn eval_cmd(ctx: &Context, data: Option<&Path>) -> CliResult {
    let (records, instances) = predictions(ctx, data)?;
    let empty = Vec::new();
    let evals = records
        .iter()
        .map(|r| {
            let preds = instances.get(&r.id).unwrap_or(&empty);
            Ok(ImageEval {
                image_id: r.id.clone(),
                label: r.label,
                gt_mask: r.gt_mask(),
                gt_boxes: r.gt_boxes(),
                pred_mask: union_mask(r.size(), preds)?,
                pred_detections: preds.iter().map(|i| i.detection()).collect(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let report = evaluate(&evals)?;
    for format in ctx.config.formats() {
        match format {
            ReportFormat::Json => report.write_json(&ctx.out.join("reports/eval.json"))?,
            ReportFormat::Csv => report.write_csv(&ctx.out.join("reports/eval.csv"))?,
        }
    }
    let dice: Vec<String> = report.per_class_dice.iter().map(|(c, d)| format!("{c} {d:.4}")).collect();
    println!("{} images; dice: {}; mAP@0.5 {:.4}", records.len(), dice.join(", "), report.map_50);
    Ok(())
}

pub fn overlay_cmd(ctx: &Context, data: Option<&Path>, ids: &[String]) -> CliResult {
    let (records, instances) = predictions(ctx, data)?;
    let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    if let Some(id) = wanted.iter().find(|id| !records.iter().any(|r| r.id == **id)) {
        return Err(Failure::usage(format!("image `{id}` is not part of the run")));
    }
    let empty = Vec::new();
    let mut written = 0;
    for r in records.iter().filter(|r| wanted.is_empty() || wanted.contains(r.id.as_str())) {
        let pred = union_mask(r.size(), instances.get(&r.id).unwrap_or(&empty))?;
        let gt = r.gt_mask();
        let rgb = render_overlay(&r.image, Some(&gt), &pred)?;
        write_overlay(&ctx.out.join(format!("overlays/{}.png", r.id)), &rgb)?;
        written += 1;
    }
    println!("{written} overlays written");
    Ok(())
}
