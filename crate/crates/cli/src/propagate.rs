use crate::error::{CliError, Outcome};
use crate::shared::{create_dir, load_dataset, parallel_map};
use groundlens::annotations::ClipEntry;
use groundlens::relevance::{write_relevance_manifest, write_volume, RelevanceManifest, VolumeEntry, VolumeFailure};
use groundlens::{attribute, read_trace, Method};
use std::path::{Path, PathBuf};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Dataset manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// `chefer` or `chefer_t`.
    #[arg(long, default_value = "chefer_t")]
    method: Method,
    /// Directory for volumes and relevance_manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
}

fn one_clip(dataset_dir: &Path, clip: &ClipEntry, method: Method, out: &Path) -> Result<VolumeEntry, String> {
    let trace = read_trace(&dataset_dir.join(&clip.trace)).map_err(|e| e.to_string())?;
    if trace.clip_id != clip.clip_id {
        return Err(format!("trace clip_id {:?} does not match manifest", trace.clip_id));
    }
    let volume = attribute(&trace, method).map_err(|e| e.to_string())?;
    let mut entry = write_volume(out, &volume).map_err(|e| format!("writing volume: {e}"))?;
    entry.logits = trace.logits;
    Ok(entry)
}

pub fn run(args: Args) -> Result<Outcome, CliError> {
    let dataset = load_dataset(&args.manifest)?;
    create_dir(&args.out)?;
    let results = parallel_map(args.jobs.map(usize::from), &dataset.clips, |clip| {
        one_clip(&dataset.base_dir, clip, args.method, &args.out)
    })?;
    let mut manifest = RelevanceManifest::new(args.method);
    for (clip, result) in dataset.clips.iter().zip(results) {
        match result {
            Ok(entry) => manifest.volumes.push(entry),
            Err(error) => {
                eprintln!("warning: {}: {error}", clip.clip_id);
                manifest.failures.push(VolumeFailure { clip_id: clip.clip_id.clone(), error });
            }
        }
    }
    write_relevance_manifest(&args.out, &manifest)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    println!(
        "{} volumes, {} failures -> {}",
        manifest.volumes.len(),
        manifest.failures.len(),
        args.out.display()
    );
    Ok(Outcome::from_failures(manifest.failures.len()))
}
