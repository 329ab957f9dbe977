use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{AccuracyRecord, ExperimentResults, SummaryRow};
use crate::distances::DistanceKind;
use crate::transport::SolveStatus;
use crate::{Error, Result};

/// Training sizes shown in `table1.txt`.
pub const TABLE_SIZES: [usize; 5] = [1, 5, 10, 15, 21];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub table1: PathBuf,
    pub curves: PathBuf,
    pub diagnostics: PathBuf,
}

/// Mean and population standard deviation per (distance, size), in record order.
pub fn summarize(records: &[AccuracyRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(DistanceKind, usize)> = records.iter().map(|r| (r.distance, r.training_size)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|(distance, training_size)| {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.distance == distance && r.training_size == training_size)
                .map(|r| r.accuracy)
                .collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            SummaryRow {
                distance,
                training_size,
                mean,
                std_dev: var.sqrt(),
            }
        })
        .collect()
}

/// Accuracy table in percent at [`TABLE_SIZES`], one row per distance.
pub fn table1(summary: &[SummaryRow]) -> String {
    let mut kinds: Vec<DistanceKind> = summary.iter().map(|r| r.distance).collect();
    kinds.dedup();
    let mut out = String::new();
    let _ = write!(out, "{:<12}", "Distance");
    for size in TABLE_SIZES {
        let _ = write!(out, "{size:>8}");
    }
    out.push('\n');
    for kind in kinds {
        let _ = write!(out, "{:<12}", kind.title());
        for size in TABLE_SIZES {
            match summary.iter().find(|r| r.distance == kind && r.training_size == size) {
                Some(r) => {
                    let _ = write!(out, "{:>8.1}", 100.0 * r.mean);
                }
                None => {
                    let _ = write!(out, "{:>8}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Write records, summary, table, plot data and solver diagnostics into `dir`.
pub fn emit_outputs(results: &ExperimentResults, dir: impl AsRef<Path>) -> Result<OutputFiles> {
    let dir = dir.as_ref();
    if results.records.is_empty() {
        return Err(Error::Config("no accuracy records to write".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = OutputFiles {
        records: dir.join("records.csv"),
        summary: dir.join("summary.csv"),
        table1: dir.join("table1.txt"),
        curves: dir.join("curves.csv"),
        diagnostics: dir.join("diagnostics.csv"),
    };

    let mut records = results.records.clone();
    records.sort_by_key(|r| (r.distance, r.training_size, r.set_index));
    let summary = summarize(&records);

    let write_all = |path: &Path, text: &str| fs::write(path, text).map_err(io(path));

    let mut text = String::from("distance,training_size,set_index,accuracy\n");
    for r in &records {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            r.distance, r.training_size, r.set_index, r.accuracy
        );
    }
    write_all(&files.records, &text)?;

    let mut text = String::from("distance,training_size,mean,std_dev\n");
    for r in &summary {
        let _ = writeln!(text, "{},{},{},{}", r.distance, r.training_size, r.mean, r.std_dev);
    }
    write_all(&files.summary, &text)?;

    write_all(&files.table1, &table1(&summary))?;

    let mut text = String::from("distance,training_size,mean,std_dev,lower,upper\n");
    for r in &summary {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            r.distance,
            r.training_size,
            r.mean,
            r.std_dev,
            r.mean - r.std_dev,
            r.mean + r.std_dev
        );
    }
    write_all(&files.curves, &text)?;

    let path = &files.diagnostics;
    let mut w = create(path)?;
    writeln!(
        w,
        "set_index,test_index,train_index,sources,targets,objective,iterations,degenerate_pivots,status,\
         max_dual_violation,max_slackness_residual,max_marginal_residual,duality_gap,certificate"
    )
    .map_err(io(path))?;
    for d in &results.diagnostics {
        let o = &d.outcome;
        let c = &o.certificate;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{:e},{:e},{:e},{:e},{}",
            d.set_index,
            d.test_index,
            d.train_index,
            o.sources,
            o.targets,
            o.value,
            o.iterations,
            o.degenerate_pivots,
            match o.status {
                SolveStatus::Optimal => "optimal",
                SolveStatus::IterationLimit => "iteration_limit",
            },
            c.max_dual_violation,
            c.max_slackness_residual,
            c.max_marginal_residual,
            c.duality_gap,
            if c.passed { "pass" } else { "fail" }
        )
        .map_err(io(path))?;
    }
    w.flush().map_err(io(path))?;
    Ok(files)
}
