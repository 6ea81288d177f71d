use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use storystream::ingest::{gold_labels, read_records_file};
use storystream::metrics::{windowed_eval, write_csv, EvalOptions};
use storystream::SlideReport;

use crate::EvalArgs;

/// Reads slide reports, stopping at a truncation marker.
pub fn read_reports(path: &Path) -> anyhow::Result<Vec<SlideReport>> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut reports = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: invalid JSON", path.display(), i + 1))?;
        if value.get("truncated").is_some() {
            log::warn!("{} is truncated after {} slides", path.display(), reports.len());
            break;
        }
        reports.push(
            serde_json::from_value(value).with_context(|| format!("{}:{}: not a slide report", path.display(), i + 1))?,
        );
    }
    Ok(reports)
}

fn window_from_meta(stories: &Path) -> Option<u32> {
    let meta = stories.parent()?.join(crate::run::META_FILE);
    let value: serde_json::Value = serde_json::from_reader(File::open(meta).ok()?).ok()?;
    value.pointer("/config/window/window_slides")?.as_u64().map(|v| v as u32)
}

pub fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let reports = read_reports(&args.stories)?;
    let records = read_records_file(&args.input)?;
    let gold = gold_labels(records.iter().map(|(_, r)| r));
    let window_slides = args.window_slides.or_else(|| window_from_meta(&args.stories)).unwrap_or(7);
    if window_slides == 0 {
        bail!("window_slides must be at least 1");
    }
    let options = EvalOptions {
        window_slides,
        policy: args.policy(),
        normalization: args.normalization(),
    };
    let result = windowed_eval(&reports, &gold, &options)?;

    let out: PathBuf = args
        .out
        .clone()
        .unwrap_or_else(|| args.stories.with_file_name("eval.csv"));
    let file = File::create(&out).with_context(|| format!("cannot create {}", out.display()))?;
    write_csv(BufWriter::new(file), &result)?;

    let m = &result.mean;
    println!(
        "windows {}  B3-F1 {:.3}  AMI {:.3}  ARI {:.3}",
        result.rows.len(),
        m.b3_f1,
        m.ami,
        m.ari
    );
    Ok(())
}
