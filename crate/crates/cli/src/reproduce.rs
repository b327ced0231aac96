//! Manifest runner: execute each listed experiment and compare fields of its
//! JSON body against stored tolerances.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{parse_at, CfgResult, ConfigError, ExperimentConfig};
use crate::exec::execute;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub entries: Vec<Entry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub name: String,
    pub config: ExperimentConfig,
    #[serde(default)]
    pub checks: Vec<Check>,
    /// Accept numerical-failure flags instead of failing the entry.
    #[serde(default)]
    pub allow_flags: bool,
}

/// `min <= body[pointer] <= max`, or equality with `equals`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub pointer: String,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub equals: Option<Value>,
}

impl Check {
    pub fn evaluate(&self, body: &Value) -> (bool, String) {
        let Some(v) = body.pointer(&self.pointer) else {
            return (false, "missing".into());
        };
        let mut ok = true;
        if let Some(e) = &self.equals {
            ok &= v == e;
        }
        if self.min.is_some() || self.max.is_some() {
            match v.as_f64() {
                Some(x) => {
                    ok &= self.min.is_none_or(|m| x >= m);
                    ok &= self.max.is_none_or(|m| x <= m);
                }
                None => ok = false,
            }
        }
        (ok, v.to_string())
    }

    fn describe(&self) -> String {
        match (&self.equals, self.min, self.max) {
            (Some(e), _, _) => format!("== {e}"),
            (None, Some(a), Some(b)) => format!("in [{a}, {b}]"),
            (None, Some(a), None) => format!(">= {a}"),
            (None, None, Some(b)) => format!("<= {b}"),
            _ => "present".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub entry: String,
    pub check: String,
    pub observed: String,
    pub pass: bool,
}

/// Parse and shape-check every entry; errors carry the field path.
impl FromStr for Manifest {
    type Err = ConfigError;

    fn from_str(s: &str) -> CfgResult<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| ConfigError(format!("manifest: {e}")))?;
        let m: Manifest = parse_at(&v, "manifest")?;
        for (i, e) in m.entries.iter().enumerate() {
            e.config
                .check_shape()
                .map_err(|err| ConfigError(format!("manifest.entries[{i}].{}", err.0)))?;
        }
        Ok(m)
    }
}

pub fn load(path: &Path) -> CfgResult<Manifest> {
    let s = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    Manifest::from_str(&s)
}

/// Run every entry; bodies go to `out_dir/<name>.json` when given.
pub fn run(manifest: &Manifest, base: &Path, out_dir: Option<&PathBuf>) -> Vec<Row> {
    let mut rows = Vec::new();
    for e in &manifest.entries {
        match execute(&e.config, base) {
            Err(err) => rows.push(Row {
                entry: e.name.clone(),
                check: "runs".into(),
                observed: err.0,
                pass: false,
            }),
            Ok(out) => {
                if let Some(dir) = out_dir {
                    let text = serde_json::to_string_pretty(&out.body).expect("JSON values serialize");
                    if let Err(err) = std::fs::write(dir.join(format!("{}.json", e.name)), text + "\n") {
                        rows.push(Row {
                            entry: e.name.clone(),
                            check: "write".into(),
                            observed: err.to_string(),
                            pass: false,
                        });
                    }
                }
                if !out.flags.is_empty() {
                    rows.push(Row {
                        entry: e.name.clone(),
                        check: "no numerical flags".into(),
                        observed: out.flags.join(","),
                        pass: e.allow_flags,
                    });
                }
                for c in &e.checks {
                    let (pass, observed) = c.evaluate(&out.body);
                    rows.push(Row {
                        entry: e.name.clone(),
                        check: format!("{} {}", c.pointer, c.describe()),
                        observed,
                        pass,
                    });
                }
            }
        }
    }
    rows
}

pub fn table(rows: &[Row]) -> String {
    let mut s = String::new();
    for r in rows {
        s.push_str(&format!(
            "{} | {} | {} | {}\n",
            if r.pass { "PASS" } else { "FAIL" },
            r.entry,
            r.check,
            r.observed
        ));
    }
    s
}
