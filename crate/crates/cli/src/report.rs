use crate::error::{CliError, Outcome};
use crate::shared::create_dir;
use groundlens::reporting::{render_tables, Average};
use groundlens::GroundingReport;
use std::fs;
use std::path::PathBuf;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// report.json files, one per method; columns follow this order.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// `macro` or `micro`.
    #[arg(long, default_value = "macro")]
    average: Average,
    /// Directory for tables.txt and tables.json; print only when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<Outcome, CliError> {
    let mut reports = Vec::with_capacity(args.reports.len());
    for path in &args.reports {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let report = GroundingReport::from_json(&text)
            .map_err(|e| CliError::Usage(format!("{}: not a grounding report: {e}", path.display())))?;
        reports.push(report);
    }
    let tables = render_tables(&reports, args.average).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(out) = &args.out {
        create_dir(out)?;
        let json = serde_json::to_string_pretty(&tables.json).expect("tables serialize");
        for (name, bytes) in [("tables.txt", tables.text.as_bytes()), ("tables.json", json.as_bytes())] {
            let path = out.join(name);
            fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
    }
    print!("{}", tables.text);
    Ok(Outcome::Complete)
}
