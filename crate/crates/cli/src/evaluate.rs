use crate::error::{CliError, Outcome};
use crate::shared::{create_dir, load_dataset, parallel_map, parse_tiers};
use groundlens::metrics::{aggregate, evaluate_clip};
use groundlens::relevance::{read_relevance_manifest, read_volume, RelevanceManifest};
use groundlens::annotations::ClipEntry;
use groundlens::reporting::{render_tables, Average};
use groundlens::{ClipMetrics, DatasetManifest, FrameMetrics, TierSet};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Dataset manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory written by `propagate`.
    #[arg(long)]
    volumes: PathBuf,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated tier sets, e.g. `P,PS,PSC`.
    #[arg(long, default_value = "P,PS,PSC")]
    tiers: String,
    /// Average shown in report.txt (both are stored in report.json).
    #[arg(long, default_value = "macro")]
    average: Average,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
}

type ClipResult = Result<(Vec<FrameMetrics>, Vec<ClipMetrics>), String>;

fn one_clip(dataset: &DatasetManifest, volumes: &RelevanceManifest, dir: &Path, clip: &ClipEntry, tiers: &[TierSet]) -> ClipResult {
    let entry = volumes
        .entry(&clip.clip_id)
        .ok_or_else(|| "no relevance volume".to_string())?;
    let volume = read_volume(dir, volumes.method, entry).map_err(|e| e.to_string())?;
    let annotation = dataset.load_annotation(clip).map_err(|e| e.to_string())?;
    let class = dataset
        .class_index(&annotation.event_class)
        .ok_or_else(|| format!("class {:?} not in vocabulary", annotation.event_class))?;
    let logits = (!entry.logits.is_empty()).then_some(entry.logits.as_slice());
    evaluate_clip(&volume, &annotation, class, logits, tiers).map_err(|e| e.to_string())
}

pub fn run(args: Args) -> Result<Outcome, CliError> {
    let dataset = load_dataset(&args.manifest)?;
    if dataset.clips.is_empty() {
        return Err(CliError::Usage(format!("{}: dataset has no clips", args.manifest.display())));
    }
    let volumes = read_relevance_manifest(&args.volumes)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.volumes.display())))?;
    let tiers = parse_tiers(&args.tiers).map_err(CliError::Usage)?;
    let results = parallel_map(args.jobs.map(usize::from), &dataset.clips, |clip| {
        one_clip(&dataset, &volumes, &args.volumes, clip, &tiers)
    })?;

    let (mut frames, mut clips, mut failures) = (Vec::new(), Vec::new(), 0);
    for (clip, result) in dataset.clips.iter().zip(results) {
        match result {
            Ok((f, c)) => {
                frames.extend(f);
                clips.extend(c);
            }
            Err(e) => {
                eprintln!("warning: {}: {e}", clip.clip_id);
                failures += 1;
            }
        }
    }
    if clips.is_empty() {
        eprintln!("error: no clip could be evaluated");
        return Ok(Outcome::Partial);
    }
    let report = aggregate(volumes.method.as_str(), &frames, &clips, &dataset.classes, &tiers)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let tables = render_tables(std::slice::from_ref(&report), args.average).map_err(|e| CliError::Usage(e.to_string()))?;
    create_dir(&args.out)?;
    let write = |name: &str, bytes: &[u8]| {
        let path = args.out.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    };
    write("report.json", report.to_json().as_bytes())?;
    write("report.txt", tables.text.as_bytes())?;
    print!("{}", tables.text);
    Ok(Outcome::from_failures(failures))
}
