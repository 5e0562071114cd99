//! Parameter sweeps over one or two config keys.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chemolab::config::Config;
use rayon::prelude::*;

use crate::commands::{CommandKind, Failure, Outcome, Plan, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub kind: CommandKind,
    pub axes: Vec<Axis>,
    /// The base configuration with all `sweep.*` keys removed.
    pub base: Vec<(String, String)>,
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn axis(cfg: &Config, suffix: &str) -> Result<Option<Axis>, Failure> {
    let Some(key) = cfg.raw(&format!("sweep.param{suffix}")) else {
        return Ok(None);
    };
    if key.starts_with("sweep.") {
        return Err(Failure::usage(format!("cannot sweep `{key}`")));
    }
    let key = key.to_string();
    let range = cfg
        .f64_list(&format!("sweep.range{suffix}"))?
        .ok_or_else(|| Failure::usage(format!("missing sweep.range{suffix}")))?;
    if range.len() != 2 {
        return Err(Failure::usage(format!("sweep.range{suffix} must be `lo, hi`")));
    }
    let count = cfg
        .usize(&format!("sweep.count{suffix}"))?
        .ok_or_else(|| Failure::usage(format!("missing sweep.count{suffix}")))?;
    Ok(Some(Axis { key, values: linspace(range[0], range[1], count) }))
}

impl SweepSpec {
    pub fn from_config(cfg: &Config) -> Result<Self, Failure> {
        let name = cfg.raw("sweep.command").ok_or_else(|| Failure::usage("missing sweep.command"))?;
        let kind = CommandKind::parse(name).ok_or_else(|| Failure::usage(format!("unknown sweep.command `{name}`")))?;
        let first = axis(cfg, "")?.ok_or_else(|| Failure::usage("missing sweep.param"))?;
        let mut axes = vec![first];
        axes.extend(axis(cfg, "2")?);
        if let Some((k, _)) = cfg.iter().find(|(k, _)| {
            k.starts_with("sweep.")
                && !["command", "param", "range", "count", "param2", "range2", "count2"]
                    .contains(&&k["sweep.".len()..])
        }) {
            return Err(Failure::usage(format!("unknown sweep key `{k}`")));
        }
        let base = cfg
            .iter()
            .filter(|(k, _)| !k.starts_with("sweep."))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Ok(Self { kind, axes, base })
    }

    /// Grid points in row-major order (first axis slowest).
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut points = vec![Vec::new()];
        for a in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    a.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        points
    }

    fn config_for(&self, point: &[f64]) -> Config {
        let mut cfg = Config::from_pairs(self.base.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        for (a, &x) in self.axes.iter().zip(point) {
            cfg.set(&a.key, format!("{x}"));
        }
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<Result<Outcome, Failure>>,
    pub code: i32,
    pub artifacts: Vec<String>,
}

/// Plans every point, runs the valid ones concurrently and writes `summary.csv`.
pub fn run_sweep(spec: &SweepSpec, seed: u64, out: &Path) -> Result<SweepResult, Failure> {
    let points = spec.points();
    if points.is_empty() {
        return Err(Failure::usage("sweep grid is empty"));
    }
    std::fs::create_dir_all(out)?;
    let plans: Vec<Result<Plan, Failure>> =
        points.iter().map(|p| Plan::build(spec.kind, &spec.config_for(p), seed)).collect();
    let rows: Vec<Result<Outcome, Failure>> = plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| {
            let plan = plan.as_ref().map_err(Clone::clone)?;
            plan.execute(&out.join(format!("point_{i:04}")))
        })
        .collect();

    let mut w = BufWriter::new(File::create(out.join("summary.csv"))?);
    let mut header = vec!["index".to_string()];
    header.extend(spec.axes.iter().map(|a| a.key.clone()));
    header.push("exit_code".into());
    header.extend(spec.kind.summary_columns().iter().map(|s| s.to_string()));
    header.push("error".into());
    writeln!(w, "{}", header.join(","))?;
    let mut artifacts = vec!["summary.csv".to_string()];
    for (i, (point, row)) in points.iter().zip(&rows).enumerate() {
        let mut cells = vec![i.to_string()];
        cells.extend(point.iter().map(|x| format!("{x}")));
        match row {
            Ok(o) => {
                cells.push(o.code.to_string());
                cells.extend(o.summary.iter().cloned());
                cells.push(String::new());
                artifacts.extend(o.artifacts.iter().map(|a| format!("point_{i:04}/{a}")));
            }
            Err(f) => {
                cells.push(f.code.to_string());
                cells.extend(spec.kind.summary_columns().iter().map(|_| "-".to_string()));
                cells.push(f.message.replace(',', ";").replace('\n', " "));
            }
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    let succeeded = rows.iter().any(|r| matches!(r, Ok(o) if o.code == EXIT_OK));
    let code = if succeeded {
        EXIT_OK
    } else {
        rows.iter()
            .map(|r| match r {
                Ok(o) => o.code,
                Err(f) => f.code,
            })
            .max()
            .unwrap_or(EXIT_USAGE)
    };
    Ok(SweepResult { rows, code, artifacts })
}
