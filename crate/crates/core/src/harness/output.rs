use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenarios::NetworkScenario;

use super::{ExperimentConfig, RunParams, ScalabilityRow, SeedRun};

#[derive(Serialize)]
pub(super) struct Snapshot<'a> {
    pub config: &'a ExperimentConfig,
    pub params: &'a RunParams,
    pub scenario: &'a NetworkScenario,
}

pub(super) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write through a temporary file so a crash never leaves half a file.
pub(super) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    write_atomic(path, text.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(super) fn read_checkpoint<T: DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    match fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| Error::json(path.display().to_string(), e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn write_lines<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| Error::json(path.display().to_string(), e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct SeedTimings<'a> {
    iteration_s: &'a [f64],
    per_cell_s: &'a [Vec<f64>],
    centralized_evaluation_s: Option<&'a [f64]>,
}

pub(super) fn write_seed(dir: &Path, scenario: &NetworkScenario, run: &SeedRun) -> Result<()> {
    write_lines(&dir.join("trace.jsonl"), &run.trace.events)?;
    write_lines(&dir.join("bus.jsonl"), run.trace.bus.ledger())?;
    write_summary(&dir.join("summary.csv"), scenario, std::slice::from_ref(run))?;
    write_json(&dir.join("state.json"), &run.state)?;
    if let Some(c) = &run.centralized {
        #[derive(Serialize)]
        struct Centralized<'a> {
            rotations: &'a [crate::geometry::BsRotation],
            value: f64,
            initial_value: f64,
            pso: &'a crate::longterm::PsoResult,
        }
        write_json(
            &dir.join("centralized.json"),
            &Centralized { rotations: &c.rotations, value: c.value, initial_value: c.initial_value, pso: &c.pso },
        )?;
    }
    let timings = SeedTimings {
        iteration_s: &run.trace.timings.iteration_s,
        per_cell_s: &run.trace.timings.per_cell_s,
        centralized_evaluation_s: run.centralized.as_ref().map(|c| c.evaluation_s.as_slice()),
    };
    write_json(&dir.join("timings.json"), &timings)
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: String,
    pub seed: u64,
    pub iteration: usize,
    pub surrogate_sum: f64,
    pub actual_sum: f64,
    pub actual_std_error: f64,
    /// Cumulative bus traffic up to this row.
    pub messages: usize,
    pub bytes: usize,
    pub per_cell_actual: Vec<f64>,
}

pub(super) fn write_summary(path: &Path, scenario: &NetworkScenario, runs: &[SeedRun]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> =
        ["scheme", "seed", "iteration", "surrogate_sum", "actual_sum", "actual_std_error", "messages", "bytes"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    header.extend((0..scenario.num_cells()).map(|m| format!("cell_{m}")));
    w.write_record(&header)?;
    for run in runs {
        for e in run.trace.evaluations() {
            let before: Vec<_> = run.trace.bus.ledger().iter().filter(|m| m.t < e.iteration).collect();
            let bytes: usize = before.iter().map(|m| m.scalars).sum::<usize>() * crate::coordination::bus::BYTES_PER_SCALAR;
            let mut rec = vec![
                run.scheme.label(),
                run.seed.to_string(),
                e.iteration.to_string(),
                e.surrogate_sum.to_string(),
                e.actual_sum.to_string(),
                e.actual_std_error.to_string(),
                before.len().to_string(),
                bytes.to_string(),
            ];
            rec.extend(e.per_cell_actual.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let bad = |what: &str| Error::InvalidConfig(format!("{}: malformed {what}", path.display()));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).ok_or_else(|| bad("row"));
        let num = |i: usize| f(i)?.parse::<f64>().map_err(|_| bad("number"));
        let int = |i: usize| f(i)?.parse::<u64>().map_err(|_| bad("integer"));
        rows.push(SummaryRow {
            scheme: f(0)?.to_string(),
            seed: int(1)?,
            iteration: int(2)? as usize,
            surrogate_sum: num(3)?,
            actual_sum: num(4)?,
            actual_std_error: num(5)?,
            messages: int(6)? as usize,
            bytes: int(7)? as usize,
            per_cell_actual: (8..rec.len()).map(num).collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

pub(super) fn write_timings(path: &Path, runs: &[SeedRun]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed", "iteration", "wall_s", "median_per_bs_s"])?;
    for run in runs {
        for (t, (wall, cells)) in run.trace.timings.iteration_s.iter().zip(&run.trace.timings.per_cell_s).enumerate() {
            w.write_record([
                run.seed.to_string(),
                t.to_string(),
                wall.to_string(),
                crate::centralized::median(cells).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(super) fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(super) fn write_scalability(out: &Path, rows: &[ScalabilityRow]) -> Result<()> {
    #[derive(Serialize, Deserialize)]
    struct Rates {
        cells: usize,
        seed: u64,
        proposed: f64,
        centralized: f64,
    }
    #[derive(Serialize, Deserialize)]
    struct Times {
        cells: usize,
        seed: u64,
        per_bs_iteration_s: f64,
        centralized_eval_s: f64,
    }
    let rates: Vec<_> =
        rows.iter().map(|r| Rates { cells: r.cells, seed: r.seed, proposed: r.proposed, centralized: r.centralized }).collect();
    let times: Vec<_> = rows
        .iter()
        .map(|r| Times {
            cells: r.cells,
            seed: r.seed,
            per_bs_iteration_s: r.per_bs_iteration_s,
            centralized_eval_s: r.centralized_eval_s,
        })
        .collect();
    write_rows(&out.join("scalability.csv"), &rates)?;
    write_rows(&out.join("scalability_timings.csv"), &times)
}
