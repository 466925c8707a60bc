use crate::error::{CliError, Outcome};
use crate::shared::{create_dir, load_dataset, parallel_map};
use groundlens::annotations::ClipEntry;
use groundlens::relevance::{read_relevance_manifest, read_volume, RelevanceManifest};
use groundlens::reporting::{render_overlay, OverlaySpec, RgbImage};
use groundlens::DatasetManifest;
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
    /// Output directory; overlays go to `<out>/<clip_id>/frame_XX.png`.
    #[arg(long)]
    out: PathBuf,
    /// Overlay opacity in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Do not outline cue boxes.
    #[arg(long)]
    no_boxes: bool,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
}

fn one_clip(
    dataset: &DatasetManifest,
    volumes: &RelevanceManifest,
    volume_dir: &Path,
    clip: &ClipEntry,
    spec: &OverlaySpec,
    out: &Path,
) -> Result<usize, String> {
    if Path::new(&clip.clip_id).file_name().is_none_or(|n| n != clip.clip_id.as_str()) {
        return Err("clip_id is not usable as a directory name".into());
    }
    let frames_dir = clip.frames_dir.as_ref().ok_or("no frames directory in the manifest")?;
    let entry = volumes.entry(&clip.clip_id).ok_or("no relevance volume")?;
    let volume = read_volume(volume_dir, volumes.method, entry).map_err(|e| e.to_string())?;
    let annotation = dataset.load_annotation(clip).map_err(|e| e.to_string())?;
    let clip_out = out.join(&clip.clip_id);
    fs::create_dir_all(&clip_out).map_err(|e| format!("{}: {e}", clip_out.display()))?;
    let mut written = 0;
    for (&t, boxes) in &annotation.frames {
        if t >= volume.frames {
            return Err(format!("annotated frame {t} beyond the volume's {} frames", volume.frames));
        }
        let name = format!("frame_{t:02}.png");
        let image_path = dataset.resolve(frames_dir).join(&name);
        let image = RgbImage::read_png(&image_path).map_err(|e| format!("{}: {e}", image_path.display()))?;
        if (image.height, image.width) != (volume.pixel_h, volume.pixel_w) {
            return Err(format!(
                "{}: image is {}x{}, relevance is {}x{}",
                image_path.display(),
                image.height,
                image.width,
                volume.pixel_h,
                volume.pixel_w
            ));
        }
        let overlay = render_overlay(&image, volume.frame(t), boxes, spec).map_err(|e| e.to_string())?;
        overlay.write_png(&clip_out.join(&name)).map_err(|e| e.to_string())?;
        written += 1;
    }
    Ok(written)
}

pub fn run(args: Args) -> Result<Outcome, CliError> {
    if !(0.0..=1.0).contains(&args.alpha) {
        return Err(CliError::Usage(format!("--alpha {} outside [0, 1]", args.alpha)));
    }
    let spec = OverlaySpec { alpha: args.alpha, draw_boxes: !args.no_boxes, ..OverlaySpec::default() };
    let dataset = load_dataset(&args.manifest)?;
    let volumes = read_relevance_manifest(&args.volumes)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.volumes.display())))?;
    create_dir(&args.out)?;
    let results = parallel_map(args.jobs.map(usize::from), &dataset.clips, |clip| {
        one_clip(&dataset, &volumes, &args.volumes, clip, &spec, &args.out)
    })?;
    let (mut images, mut failures) = (0, 0);
    for (clip, result) in dataset.clips.iter().zip(results) {
        match result {
            Ok(n) => images += n,
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", clip.clip_id);
                failures += 1;
            }
        }
    }
    println!("{images} overlays, {failures} clips skipped -> {}", args.out.display());
    Ok(Outcome::from_failures(failures))
}
