use crate::error::{CliError, Outcome};
use groundlens::toymodel::{generate_fixtures, ModelError, ToyModelConfig};
use groundlens::{ExtractionMode, TraceError};
use std::path::PathBuf;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Number of clips to generate.
    #[arg(long, default_value_t = 8)]
    clips: usize,
    /// Seed for weights and clips.
    #[arg(long, env = "GROUNDLENS_SEED", default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    frames: usize,
    #[arg(long, default_value_t = 3)]
    grid_h: usize,
    #[arg(long, default_value_t = 3)]
    grid_w: usize,
    #[arg(long, default_value_t = 2)]
    heads: usize,
    #[arg(long, default_value_t = 8)]
    width: usize,
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 1)]
    head_blocks: usize,
    #[arg(long, default_value_t = 11)]
    patch_size: usize,
    /// `pooling` or `cls`.
    #[arg(long, default_value = "pooling", value_parser = parse_mode)]
    extraction_mode: ExtractionMode,
}

fn parse_mode(s: &str) -> Result<ExtractionMode, String> {
    match s {
        "pooling" => Ok(ExtractionMode::Pooling),
        "cls" => Ok(ExtractionMode::Cls),
        other => Err(format!("unknown extraction mode {other:?} (expected pooling or cls)")),
    }
}

fn classify(e: ModelError) -> CliError {
    match e {
        ModelError::Io(_) | ModelError::Image(_) | ModelError::Trace(TraceError::Io { .. }) => CliError::Io(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

pub fn run(args: Args) -> Result<Outcome, CliError> {
    let config = ToyModelConfig {
        frames: args.frames,
        grid_h: args.grid_h,
        grid_w: args.grid_w,
        heads: args.heads,
        width: args.width,
        blocks: args.blocks,
        classes: args.classes,
        extraction_mode: args.extraction_mode,
        head_blocks: args.head_blocks,
        patch_size: args.patch_size,
        seed: args.seed,
    };
    config.check().map_err(classify)?;
    generate_fixtures(&config, args.clips, args.seed, &args.out).map_err(classify)?;
    println!("{}", args.out.join("manifest.json").display());
    Ok(Outcome::Complete)
}
