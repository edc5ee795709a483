use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::run::{CampaignSummary, LogRecord, ProgramRecord};
use super::{layout, CampaignConfig, CampaignError, Manifest, LAYOUT_VERSION};
use crate::difftest::{bugs_over_time_auc, DefectRegistry};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub run_id: String,
    pub programs: u64,
    pub mean_size: f64,
    pub median_size: f64,
    pub unique_defects: usize,
    pub per_category: BTreeMap<String, usize>,
    pub auc: f64,
    pub duration: f64,
}

fn config_error(msg: impl Into<String>) -> CampaignError {
    CampaignError::Config(msg.into())
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CampaignError> {
    let file = fs::File::open(path).map_err(|e| config_error(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CampaignError::io(format!("cannot read {}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let value =
            serde_json::from_str(&line).map_err(|e| config_error(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(value);
    }
    Ok(out)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CampaignError> {
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

/// Rebuilds the defect registry from a campaign log: the first record of
/// each signature defines the defect, later ones only count.
pub fn replay_registry(run_dir: &Path, log: &[LogRecord]) -> Result<DefectRegistry, CampaignError> {
    let mut registry = DefectRegistry::in_memory();
    for r in log {
        if let Some(sig) = &r.signature {
            let program = run_dir.join(layout::PROGRAMS_DIR).join(layout::program_file(r.program));
            registry.record(r.classification, sig, &program, r.program, r.t)?;
        }
    }
    Ok(registry)
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), CampaignError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let err = |e: csv::Error| config_error(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush()
        .map_err(CampaignError::io(format!("cannot write {}", path.display())))
}

/// Reads a finished run directory and writes CSV tables plus a text
/// summary under `<run>/report/`. Everything is recomputed from the logs.
pub fn generate_report(run_dir: &Path) -> Result<Report, CampaignError> {
    let manifest_path = run_dir.join(layout::MANIFEST);
    if !manifest_path.is_file() {
        return Err(config_error(format!("{} is not a run directory", run_dir.display())));
    }
    let manifest: Manifest = read_json(&manifest_path)?;
    if manifest.layout_version != LAYOUT_VERSION {
        return Err(config_error(format!(
            "run layout version {} is not supported (expected {LAYOUT_VERSION})",
            manifest.layout_version
        )));
    }
    let config: CampaignConfig = read_json(&run_dir.join(layout::CONFIG))?;
    if config.hash() != manifest.config_hash {
        return Err(config_error("config.json does not match the manifest"));
    }
    let programs: Vec<ProgramRecord> = read_jsonl(&run_dir.join(layout::PROGRAMS_LOG))?;
    let log: Vec<LogRecord> = read_jsonl(&run_dir.join(layout::CAMPAIGN_LOG))?;
    let summary: Option<CampaignSummary> = read_json(&run_dir.join(layout::SUMMARY)).ok();
    let duration = summary
        .as_ref()
        .map(|s| s.duration)
        .unwrap_or_else(|| log.iter().map(|r| r.t).fold(config.budget, f64::max));

    let registry = replay_registry(run_dir, &log)?;
    let auc = bugs_over_time_auc(&registry.timeline(), duration.max(f64::MIN_POSITIVE))?;
    let mut sizes: Vec<u64> = programs.iter().map(|p| p.size).collect();
    let mean_size = if sizes.is_empty() {
        0.0
    } else {
        sizes.iter().sum::<u64>() as f64 / sizes.len() as f64
    };
    sizes.sort_unstable();
    let median_size = match sizes.len() {
        0 => 0.0,
        n if n % 2 == 1 => sizes[n / 2] as f64,
        n => (sizes[n / 2 - 1] + sizes[n / 2]) as f64 / 2.0,
    };
    let per_category: BTreeMap<String, usize> = registry
        .per_category()
        .into_iter()
        .map(|(c, n)| (c.name().to_string(), n))
        .collect();

    let out = run_dir.join(layout::REPORT_DIR);
    fs::create_dir_all(&out).map_err(CampaignError::io(format!("cannot create {}", out.display())))?;
    let bias = config.sampler.simplicity_bias.to_string();
    write_csv(
        &out.join("sizes.csv"),
        &["program", "size", "simplicity_bias"],
        programs
            .iter()
            .map(|p| vec![p.id.to_string(), p.size.to_string(), bias.clone()]),
    )?;
    let mut hits: BTreeMap<String, u64> = BTreeMap::new();
    for r in registry.records() {
        *hits.entry(r.category.name().to_string()).or_default() += r.count;
    }
    write_csv(
        &out.join("categories.csv"),
        &["category", "unique_defects", "programs"],
        per_category
            .iter()
            .map(|(c, n)| vec![c.clone(), n.to_string(), hits[c].to_string()]),
    )?;
    write_csv(
        &out.join("defects.csv"),
        &[
            "category",
            "signature",
            "first_program",
            "discovered_at",
            "count",
            "reproducer",
        ],
        registry.records().iter().map(|r| {
            vec![
                r.category.name().to_string(),
                r.signature.clone(),
                r.program_id.to_string(),
                format!("{:.3}", r.discovered_at),
                r.count.to_string(),
                r.reproducer_path.display().to_string(),
            ]
        }),
    )?;
    write_csv(
        &out.join("timeline.csv"),
        &["t", "unique_defects"],
        registry
            .timeline()
            .into_iter()
            .map(|(t, n)| vec![format!("{t:.3}"), n.to_string()]),
    )?;

    let report = Report {
        run_id: manifest.run_id,
        programs: programs.len() as u64,
        mean_size,
        median_size,
        unique_defects: registry.len(),
        per_category,
        auc,
        duration,
    };
    let mut text = format!(
        "run {}\nalgorithm {}\nseed {}\nprograms {}\nmean size {:.1}\nmedian size {:.1}\nunique defects {}\n",
        report.run_id,
        manifest.algorithm,
        manifest.seed,
        report.programs,
        report.mean_size,
        report.median_size,
        report.unique_defects
    );
    for (c, n) in &report.per_category {
        text.push_str(&format!("  {c} {n}\n"));
    }
    text.push_str(&format!("auc {:.4}\nduration {:.1}s\n", report.auc, report.duration));
    fs::write(out.join("summary.txt"), text).map_err(CampaignError::io("cannot write summary.txt"))?;
    Ok(report)
}
