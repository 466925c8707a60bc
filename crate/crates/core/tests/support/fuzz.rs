//! Byte-level corruption of trace directories.

use super::files;
use groundlens::rng::SplitMix64;
use groundlens::{read_trace, validate_trace};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

#[derive(Debug, Default)]
pub struct FuzzOutcome {
    pub mutations: usize,
    /// Reads that returned a `TraceError`.
    pub rejected: usize,
    /// Reads that succeeded and whose trace re-validates cleanly.
    pub accepted_valid: usize,
    /// Panics, or successful reads of an invalid trace.
    pub problems: Vec<String>,
}

impl FuzzOutcome {
    pub fn passed(&self) -> bool {
        self.problems.is_empty() && self.rejected + self.accepted_valid == self.mutations
    }
}

fn mutate(rng: &mut SplitMix64, dir: &Path) -> String {
    let files: Vec<_> = files::tree(dir).into_keys().collect();
    // Half of the mutations target the manifest, which has the most structure.
    let target = if rng.below(2) == 0 {
        files.iter().find(|p| p.ends_with("manifest.json")).unwrap().clone()
    } else {
        files[rng.below(files.len() as u64) as usize].clone()
    };
    let path = dir.join(&target);
    let mut bytes = fs::read(&path).unwrap();
    let what = match rng.below(10) {
        0 if !bytes.is_empty() => {
            let keep = rng.below(bytes.len() as u64) as usize;
            bytes.truncate(keep);
            format!("truncate to {keep}")
        }
        1 => {
            bytes.push(rng.below(256) as u8);
            "append a byte".to_string()
        }
        2 => {
            fs::remove_file(&path).unwrap();
            return format!("{}: remove", target.display());
        }
        _ if !bytes.is_empty() => {
            let at = rng.below(bytes.len() as u64) as usize;
            let value = rng.below(256) as u8;
            bytes[at] = value;
            format!("byte {at} := {value:#04x}")
        }
        _ => "no-op on empty file".to_string(),
    };
    fs::write(&path, bytes).unwrap();
    format!("{}: {what}", target.display())
}

/// Applies `count` single mutations, each to a fresh copy of `trace_dir`.
pub fn run(trace_dir: &Path, scratch: &Path, count: usize, seed: u64) -> FuzzOutcome {
    let mut rng = SplitMix64::new(seed);
    let mut outcome = FuzzOutcome::default();
    for i in 0..count {
        let dir = scratch.join(format!("mutant_{i:03}"));
        files::copy_tree(trace_dir, &dir);
        let what = mutate(&mut rng, &dir);
        outcome.mutations += 1;
        match catch_unwind(AssertUnwindSafe(|| read_trace(&dir))) {
            Err(_) => outcome.problems.push(format!("panic after {what}")),
            Ok(Err(_)) => outcome.rejected += 1,
            Ok(Ok(trace)) => {
                if validate_trace(&trace).is_valid() {
                    outcome.accepted_valid += 1;
                } else {
                    outcome.problems.push(format!("invalid trace accepted after {what}"));
                }
            }
        }
        let _ = fs::remove_dir_all(&dir);
    }
    outcome
}
