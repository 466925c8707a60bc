use crate::error::CliError;
use groundlens::annotations::{tier_sets, AnnotationError};
use groundlens::{DatasetManifest, TierSet};
use std::path::Path;

pub fn load_dataset(path: &Path) -> Result<DatasetManifest, CliError> {
    DatasetManifest::load(path).map_err(|e| match e {
        AnnotationError::Io { .. } => CliError::Io(e.to_string()),
        other => CliError::Usage(other.to_string()),
    })
}

/// `P,PS,PSC` (or `P+S`) into tier sets in `P, P+S, P+S+C` order.
pub fn parse_tiers(spec: &str) -> Result<Vec<TierSet>, String> {
    let mut sets = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let set = TierSet::parse(part).ok_or_else(|| format!("unknown tier set {part:?}"))?;
        if !sets.contains(&set) {
            sets.push(set);
        }
    }
    if sets.is_empty() {
        return Err("no tier sets given".into());
    }
    let order = tier_sets();
    sets.sort_by_key(|s| order.iter().position(|o| o == s).unwrap_or(usize::MAX));
    Ok(sets)
}

/// Runs `f` over `items` on a pool of `jobs` threads (all cores when
/// `None`); results keep the input order.
pub fn parallel_map<T: Sync, R: Send>(
    jobs: Option<usize>,
    items: &[T],
    f: impl Fn(&T) -> R + Sync + Send,
) -> Result<Vec<R>, CliError> {
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
