//! Parameter grids over a base experiment config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::ExperimentConfig;
use super::run::{run_experiment, MetricsRecord};
use crate::error::{Error, Result};

pub const MAX_CELLS: usize = 200;

/// `grid` maps dotted config paths (e.g. `samples.train`) to value lists;
/// the sweep runs their cartesian product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: Value,
    pub grid: BTreeMap<String, Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub index: usize,
    pub id: String,
    pub params: BTreeMap<String, Value>,
    pub record: Option<MetricsRecord>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<CellOutcome>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn cell_count(&self) -> usize {
        self.grid
            .values()
            .fold(1usize, |acc, v| acc.saturating_mul(v.len()))
    }

    fn check(&self) -> Result<()> {
        if !self.base.is_object() {
            return Err(Error::Config("sweep base must be a JSON object".into()));
        }
        if self.grid.values().any(Vec::is_empty) {
            return Err(Error::Config("every grid axis needs at least one value".into()));
        }
        if self.grid.keys().any(|k| k.is_empty() || k.split('.').any(str::is_empty)) {
            return Err(Error::Config("grid keys must be non-empty dotted paths".into()));
        }
        let cells = self.cell_count();
        if cells > MAX_CELLS {
            return Err(Error::Config(format!(
                "grid has {cells} cells, at most {MAX_CELLS} allowed"
            )));
        }
        Ok(())
    }

    /// Parameter assignments in row-major order over the sorted keys.
    pub fn cells(&self) -> Vec<BTreeMap<String, Value>> {
        let mut out = vec![BTreeMap::new()];
        for (key, values) in &self.grid {
            out = out
                .into_iter()
                .flat_map(|cell| {
                    values.iter().map(move |v| {
                        let mut c = cell.clone();
                        c.insert(key.clone(), v.clone());
                        c
                    })
                })
                .collect();
        }
        out
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{path}: {part} is not inside an object")))?;
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = cur
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("{path}: parent is not an object")))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn cell_id(base: &Value, index: usize) -> String {
    let prefix = base.get("id").and_then(Value::as_str).unwrap_or("sweep");
    format!("{prefix}-cell{index:03}")
}

fn cell_config(base: &Value, params: &BTreeMap<String, Value>, index: usize) -> Result<ExperimentConfig> {
    let mut v = base.clone();
    for (k, val) in params {
        set_path(&mut v, k, val.clone())?;
    }
    set_path(&mut v, "id", Value::String(cell_id(base, index)))?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("output");
    }
    ExperimentConfig::from_value(v)
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Run every cell; a failing cell is recorded and the sweep continues.
/// With an output directory, each record goes to `<id>.json` and the
/// summary to `summary.csv`.
pub fn run_sweep(cfg: &SweepConfig, output_dir: Option<&Path>) -> Result<SweepReport> {
    cfg.check()?;
    let mut cells = Vec::new();
    for (index, params) in cfg.cells().into_iter().enumerate() {
        let id = cell_id(&cfg.base, index);
        let (record, error) =
            match cell_config(&cfg.base, &params, index).and_then(|c| run_experiment(&c)) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
        if let (Some(dir), Some(r)) = (output_dir, &record) {
            r.write(&dir.join(format!("{id}.json")))?;
        }
        cells.push(CellOutcome {
            index,
            id,
            params,
            record,
            error,
        });
    }
    let report = SweepReport { cells };
    if let Some(dir) = output_dir {
        std::fs::create_dir_all(dir)?;
        write_summary(cfg, &report, &dir.join("summary.csv"))?;
    }
    Ok(report)
}

/// One CSV row per cell: grid parameters, then the final metrics.
pub fn write_summary(cfg: &SweepConfig, report: &SweepReport, path: &Path) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = vec!["cell".into(), "id".into()];
    header.extend(cfg.grid.keys().cloned());
    header.extend(
        [
            "status",
            "eps_hat",
            "err_hat",
            "zero_one",
            "selected_iteration",
            "iterations_run",
            "queries",
            "wall_seconds",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(csv_err)?;
    for cell in &report.cells {
        let mut row = vec![cell.index.to_string(), cell.id.clone()];
        row.extend(cfg.grid.keys().map(|k| cell.params.get(k).map(cell_text).unwrap_or_default()));
        match &cell.record {
            Some(r) => {
                let m = &r.metrics;
                row.extend([
                    "ok".to_string(),
                    m.eps_hat.to_string(),
                    m.err_hat.to_string(),
                    opt(m.zero_one),
                    m.selected_iteration.to_string(),
                    m.iterations_run.to_string(),
                    opt(m.queries),
                    r.timing.wall_seconds.to_string(),
                    String::new(),
                ]);
            }
            None => {
                row.push("failed".into());
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(cell.error.clone().unwrap_or_default());
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn cartesian_cells() {
        let cfg = SweepConfig::from_json(
            r#"{"base":{"id":"s","seed":1,"kind":"glm","n":3},
                "grid":{"samples.train":[10,20,30],"seed":[1,2]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.cell_count(), 6);
        let cells = cfg.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0]["samples.train"], json!(10));
        assert_eq!(cells[1]["seed"], json!(2));
    }

    #[test]
    fn too_many_cells_rejected() {
        let vals: Vec<u32> = (0..15).collect();
        let text = json!({"base": {"id": "s"}, "grid": {"a": vals, "b": vals}}).to_string();
        assert!(matches!(SweepConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn set_path_creates_objects() {
        let mut v = json!({"a": 1});
        set_path(&mut v, "b.c", json!(2)).unwrap();
        assert_eq!(v, json!({"a": 1, "b": {"c": 2}}));
        assert!(set_path(&mut v, "a.x", json!(0)).is_err());
    }
}
