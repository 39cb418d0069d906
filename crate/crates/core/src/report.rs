//! Artifact writing. Every JSON object, CSV file and SVG plot carries the
//! schema version, master seed and resolved config hash; no timestamps are
//! written, so identical runs give identical bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiments::{Fig2Result, Panel, SweepResult};
use crate::plot::{Plot, Series, Style};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub schema_version: u32,
    pub master_seed: u64,
    pub config_hash: String,
}

impl Metadata {
    fn comment(&self) -> String {
        format!(
            "schema_version={} master_seed={} config_hash={}",
            self.schema_version, self.master_seed, self.config_hash
        )
    }

    /// Leading `# key=value` lines for CSV artifacts.
    pub fn csv_header(&self) -> String {
        format!(
            "# schema_version={}\n# master_seed={}\n# config_hash={}\n",
            self.schema_version, self.master_seed, self.config_hash
        )
    }

    /// Adds the metadata fields to a JSON object (other values are wrapped
    /// under `data`).
    pub fn stamp(&self, value: Value) -> Value {
        let mut map = match value {
            Value::Object(m) => m,
            other => {
                let mut m = serde_json::Map::new();
                m.insert("data".into(), other);
                m
            }
        };
        map.insert("schema_version".into(), self.schema_version.into());
        map.insert("master_seed".into(), self.master_seed.into());
        map.insert("config_hash".into(), self.config_hash.clone().into());
        Value::Object(map)
    }
}

pub(crate) fn io_err(what: &str, path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{what} {}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err("cannot create", dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    fs::write(path, text).map_err(|e| io_err("cannot write", path, e))
}

pub fn write_json(path: &Path, meta: &Metadata, value: Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&meta.stamp(value)).expect("json value serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn write_csv(path: &Path, meta: &Metadata, body: &str) -> Result<()> {
    write_text(path, &format!("{}{body}", meta.csv_header()))
}

/// Strips the `# ` metadata lines written by [`write_csv`].
pub fn strip_csv_header(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.find('\n').map_or("", |i| &rest[i + 1..]);
    }
    rest
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Per-power means of a sweep, for plotting.
fn means(sweep: &SweepResult) -> Vec<(f64, f64)> {
    sweep
        .records
        .iter()
        .map(|r| (r.power_exc, r.counts.iter().sum::<f64>() / r.counts.len().max(1) as f64))
        .collect()
}

pub fn panel_plot(panel: &Panel, meta: &Metadata) -> Plot {
    let fit_line = |a: f64, sweep: &SweepResult| -> Vec<(f64, f64)> {
        let p: Vec<f64> = sweep.records.iter().map(|r| r.power_exc).collect();
        let (lo, hi) = (p[0], p[p.len() - 1]);
        (0..=40)
            .map(|i| {
                let x = lo * (hi / lo).powf(i as f64 / 40.0);
                (x, a * x * x)
            })
            .collect()
    };
    Plot {
        title: format!("{}: ratio {:.3} +/- {:.3}", panel.fluorophore, panel.ratio, panel.ratio_std_err),
        x_label: "excitation power (W)".into(),
        y_label: "TPEF counts".into(),
        comment: meta.comment(),
        series: vec![
            Series {
                label: format!("{} (thermal)", panel.thermal.source_label),
                color: "#c0392b".into(),
                style: Style::Markers,
                points: means(&panel.thermal),
            },
            Series {
                label: format!("{} (coherent)", panel.coherent.source_label),
                color: "#2c3e80".into(),
                style: Style::Markers,
                points: means(&panel.coherent),
            },
            Series {
                label: "fit a x^2 (thermal)".into(),
                color: "#e08070".into(),
                style: Style::Line,
                points: fit_line(panel.fit_thermal.a, &panel.thermal),
            },
            Series {
                label: "fit a x^2 (coherent)".into(),
                color: "#7080c0".into(),
                style: Style::Line,
                points: fit_line(panel.fit_coherent.a, &panel.coherent),
            },
        ],
    }
}

pub fn fits_csv(result: &Fig2Result) -> String {
    let mut out = String::from("label,a,a_stderr,b,b_stderr\n");
    for p in &result.panels {
        for (sweep, fit) in [(&p.thermal, &p.fit_thermal), (&p.coherent, &p.fit_coherent)] {
            let (b, bs) = fit
                .exponent_check
                .as_ref()
                .map_or((String::new(), String::new()), |e| (e.b.to_string(), e.b_stderr.to_string()));
            out.push_str(&format!(
                "{}/{},{},{},{},{}\n",
                p.fluorophore, sweep.source_label, fit.a, fit.a_stderr, b, bs
            ));
        }
    }
    out
}

/// Writes the SVG plots for every panel into `dir/plots`.
pub fn render_plots(dir: &Path, result: &Fig2Result, meta: &Metadata) -> Result<()> {
    for p in &result.panels {
        let svg = panel_plot(p, meta).render_loglog();
        write_text(&dir.join("plots").join(format!("panel_{}.svg", file_stem(&p.fluorophore))), &svg)?;
    }
    Ok(())
}

/// report.json, per-panel sweep CSVs, fits.csv and plots.
pub fn write_fig2_report(dir: &Path, result: &Fig2Result, meta: &Metadata) -> Result<()> {
    ensure_dir(dir)?;
    let value = serde_json::to_value(result).expect("report serializes");
    write_json(&dir.join("report.json"), meta, value)?;
    for p in &result.panels {
        let stem = file_stem(&p.fluorophore);
        write_csv(&dir.join(format!("panel_{stem}_thermal.csv")), meta, &p.thermal.to_csv())?;
        write_csv(&dir.join(format!("panel_{stem}_coherent.csv")), meta, &p.coherent.to_csv())?;
    }
    write_csv(&dir.join("fits.csv"), meta, &fits_csv(result))?;
    render_plots(dir, result, meta)
}

/// Reads back a report written by [`write_fig2_report`].
pub fn read_fig2_report(dir: &Path) -> Result<(Fig2Result, Metadata)> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| io_err("cannot read", &path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let meta: Metadata =
        serde_json::from_value(value.clone()).map_err(|e| Error::Format(format!("report metadata: {e}")))?;
    let result: Fig2Result = serde_json::from_value(value).map_err(|e| Error::Format(format!("report body: {e}")))?;
    Ok((result, meta))
}

/// Human-readable summary lines.
pub fn summary(result: &Fig2Result) -> String {
    let (lo, hi) = result.acceptance_band;
    let mut out = String::new();
    for s in &result.sources {
        out.push_str(&format!("source {}: g2(0) = {:.4} +/- {:.4}\n", s.label, s.g2_zero, s.g2_std_err));
    }
    for p in &result.panels {
        let b = |f: &crate::experiments::FitResult| {
            f.exponent_check
                .as_ref()
                .map_or("n/a".to_string(), |e| format!("{:.3} +/- {:.3}", e.b, e.b_stderr))
        };
        out.push_str(&format!(
            "{}: ratio {:.3} +/- {:.3} [{}] (b thermal {}, b coherent {})\n",
            p.fluorophore,
            p.ratio,
            p.ratio_std_err,
            if p.within_band { "within" } else { "OUTSIDE" },
            b(&p.fit_thermal),
            b(&p.fit_coherent)
        ));
    }
    out.push_str(&format!("acceptance band [{lo}, {hi}]: {}\n", if result.passed { "pass" } else { "fail" }));
    out.push_str(&result.error_budget.line);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> Metadata {
        Metadata {
            schema_version: 1,
            master_seed: 9,
            config_hash: "abc".into(),
        }
    }

    #[test]
    fn csv_header_roundtrip() {
        let text = format!("{}x,y\n1,2\n", meta().csv_header());
        assert_eq!(strip_csv_header(&text), "x,y\n1,2\n");
    }

    #[test]
    fn stamp_adds_fields() {
        let v = meta().stamp(serde_json::json!({"k": 1}));
        assert_eq!(v["master_seed"], 9);
        assert_eq!(v["config_hash"], "abc");
        assert_eq!(v["k"], 1);
        let w = meta().stamp(serde_json::json!([1, 2]));
        assert_eq!(w["data"][1], 2);
    }
}
