//! `report`: re-render a run directory's artifacts as one readable
//! summary, recounting coverage from the persisted per-instance logs so
//! the headline numbers can be audited without rerunning anything.

use crate::artifacts::InstanceRow;
use anyhow::{anyhow, Context};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

fn append_csv(text: &mut String, title: &str, path: &Path) -> anyhow::Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let mut rows: Vec<Vec<String>> = vec![headers.iter().map(str::to_string).collect()];
    for record in reader.records() {
        rows.push(record?.iter().map(str::to_string).collect());
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| {
            rows.iter()
                .map(|r| r.get(c).map_or(0, String::len))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let _ = writeln!(text, "## {title}");
    for row in &rows {
        let line = row
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{cell:<width$}", width = widths[c]))
            .collect::<Vec<_>>()
            .join("  ");
        let _ = writeln!(text, "{}", line.trim_end());
    }
    let _ = writeln!(text);
    Ok(())
}

fn replay_coverage(text: &mut String, path: &Path) -> anyhow::Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let file = fs::read_to_string(path)?;
    let mut tallies: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    for line in file.lines() {
        let row: InstanceRow = serde_json::from_str(line)?;
        let key = (format!("{}", row.alpha), format!("{:?}", row.kind));
        let entry = tallies.entry(key).or_insert((0, 0));
        entry.0 += row.covered as usize;
        entry.1 += 1;
    }
    let _ = writeln!(text, "## coverage replayed from instances.jsonl");
    for ((alpha, kind), (covered, total)) in tallies {
        let _ = writeln!(
            text,
            "alpha={alpha} kind={kind}: {covered}/{total} = {:.4}",
            covered as f64 / total as f64
        );
    }
    let _ = writeln!(text);
    Ok(())
}

/// Build the report text for a run directory.
pub fn render(run_dir: &Path) -> anyhow::Result<String> {
    let manifest_path = run_dir.join("run.json");
    let manifest: Value = serde_json::from_str(
        &fs::read_to_string(&manifest_path)
            .map_err(|e| anyhow!("{} is not a run directory: {e}", run_dir.display()))?,
    )?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "# run report: {} (config {})",
        manifest["command"].as_str().unwrap_or("?"),
        manifest["config_hash"].as_str().unwrap_or("?")
    );
    let _ = writeln!(text);
    append_csv(&mut text, "metrics", &run_dir.join("metrics.csv"))?;
    append_csv(&mut text, "delta sweep", &run_dir.join("sweep.csv"))?;
    append_csv(
        &mut text,
        "ablation (per seed)",
        &run_dir.join("ablation.csv"),
    )?;
    append_csv(
        &mut text,
        "ablation summary",
        &run_dir.join("ablation_summary.csv"),
    )?;
    append_csv(&mut text, "episodes", &run_dir.join("episodes.csv"))?;
    append_csv(
        &mut text,
        "closed-loop summary",
        &run_dir.join("closedloop_summary.csv"),
    )?;
    replay_coverage(&mut text, &run_dir.join("instances.jsonl"))?;
    if let Ok(artifact) = fs::read_to_string(run_dir.join("thresholds.json")) {
        let _ = writeln!(text, "## thresholds.json");
        text.push_str(&artifact);
    }
    Ok(text)
}

/// Print the report; optionally also write it to a file.
pub fn run(run_dir: &Path, out: Option<&Path>) -> anyhow::Result<String> {
    let text = render(run_dir)?;
    println!("{text}");
    if let Some(path) = out {
        fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(text)
}
