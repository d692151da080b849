//! Cartesian design-space sweeps with CSV and JSON output.

use super::{simulate, CostReport};
use crate::error::{Error, Result};
use crate::mapper::{HardwareConfig, Mode};
use crate::tech::{ClockProfile, InterconnectProfile, TechProfile};
use crate::workload::{ModelSpec, PrecisionConfig};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Version tag written in the first CSV column.
pub const CSV_SCHEMA: &str = "apsim-sweep-1";

/// Axis values of a sweep. Points enumerate model, hw, tech, voltage and
/// precision, the last varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub models: Vec<String>,
    pub modes: Vec<Mode>,
    pub techs: Vec<String>,
    pub voltages: Vec<f64>,
    pub precisions: Vec<PrecisionConfig>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            models: vec!["vgg16".into()],
            modes: vec![Mode::Lr],
            techs: vec!["sram16nm".into()],
            voltages: vec![1.0],
            precisions: vec![PrecisionConfig::fixed(8)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub model: String,
    pub mode: Mode,
    pub tech: String,
    pub voltage: f64,
    pub precision: PrecisionConfig,
}

/// Expands one precision argument: `N`, `a..b`, `fixed:N` or a file.
pub fn precision_values(v: &str) -> Result<Vec<PrecisionConfig>> {
    if let Some((a, b)) = v.split_once("..") {
        let p = |s: &str| s.trim().parse::<u32>().map_err(|_| Error::Config(format!("bad precision range {v:?}")));
        let (a, b) = (p(a)?, p(b)?);
        if a == 0 || a > b {
            return Err(Error::Config(format!("empty precision range {v:?}")));
        }
        return Ok((a..=b).map(PrecisionConfig::fixed).collect());
    }
    if let Ok(b) = v.parse::<u32>() {
        return Ok(vec![PrecisionConfig::fixed(b)]);
    }
    if v.starts_with("fixed:") {
        return Ok(vec![PrecisionConfig::parse(v)?]);
    }
    let text = std::fs::read_to_string(v).map_err(|e| Error::Config(format!("precision file {v}: {e}")))?;
    Ok(vec![PrecisionConfig::parse(&text)?])
}

impl SweepSpec {
    /// Sets one axis from `name=v1,v2,...`. Precision values are bit
    /// counts, `a..b` ranges, `fixed:N` or per-layer files.
    pub fn set_axis(&mut self, arg: &str) -> Result<()> {
        let (name, values) = arg.split_once('=').ok_or_else(|| Error::Config(format!("axis {arg:?} is not name=values")))?;
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::Config(format!("axis {name} has no values")));
        }
        match name.trim() {
            "model" => self.models = values.iter().map(|s| s.to_string()).collect(),
            "hw" | "mode" => self.modes = values.iter().map(|s| s.parse()).collect::<Result<_>>()?,
            "tech" | "technology" => self.techs = values.iter().map(|s| s.to_string()).collect(),
            "voltage" => {
                self.voltages = values
                    .iter()
                    .map(|s| s.trim_end_matches('V').parse::<f64>().map_err(|_| Error::Config(format!("bad voltage {s:?}"))))
                    .collect::<Result<_>>()?
            }
            "precision" => {
                let mut all = Vec::new();
                for v in values {
                    all.extend(precision_values(v)?);
                }
                self.precisions = all;
            }
            other => return Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for model in &self.models {
            for &mode in &self.modes {
                for tech in &self.techs {
                    for &voltage in &self.voltages {
                        for precision in &self.precisions {
                            out.push(SweepPoint { model: model.clone(), mode, tech: tech.clone(), voltage, precision: precision.clone() });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Loads a bundled model by name, or a model file.
pub fn load_model(name: &str) -> Result<ModelSpec> {
    if ModelSpec::builtin_names().contains(&name) {
        return ModelSpec::builtin(name);
    }
    let text = std::fs::read_to_string(name).map_err(|e| Error::Config(format!("model {name}: {e}")))?;
    ModelSpec::parse(&text)
}

/// Loads a named technology profile, or a profile file.
pub fn load_tech(name: &str) -> Result<TechProfile> {
    TechProfile::named(name).or_else(|_| {
        let text = std::fs::read_to_string(name).map_err(|e| Error::Config(format!("technology {name}: {e}")))?;
        TechProfile::parse(&text)
    })
}

/// Runs every point of `spec` in parallel; results keep enumeration order.
pub fn sweep(spec: &SweepSpec, hw: &HardwareConfig, ic: &InterconnectProfile, clock: &ClockProfile) -> Result<Vec<(SweepPoint, CostReport)>> {
    let points = spec.points();
    points
        .into_par_iter()
        .map(|pt| {
            let model = load_model(&pt.model)?;
            let mut tech = load_tech(&pt.tech)?;
            if pt.voltage != tech.v_dd {
                tech = tech.apply_voltage(pt.voltage)?;
            }
            let hw = HardwareConfig { mode: pt.mode, ..*hw };
            let r = simulate(&model, &pt.precision, &hw, &tech, ic, clock)?;
            Ok((pt, r))
        })
        .collect()
}

/// Six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.5e}")
}

pub fn write_csv<W: Write>(w: W, rows: &[(SweepPoint, CostReport)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Config(format!("csv output: {e}"));
    out.write_record([
        "schema", "model", "hw", "tech", "voltage", "precision", "avg_bits", "energy_j", "latency_s", "area_mm2",
        "giga_ops", "gops", "gops_per_w", "gops_per_w_per_mm2", "edp_js", "energy_gemm", "energy_pooling",
        "energy_relu", "energy_data_movement", "latency_gemm", "latency_pooling", "latency_relu",
        "latency_data_movement",
    ])
    .map_err(io)?;
    for (p, r) in rows {
        let mut rec = vec![
            CSV_SCHEMA.to_string(),
            r.model.clone(),
            p.mode.to_string(),
            r.tech.clone(),
            sig6(p.voltage),
            r.precision.clone(),
            sig6(r.avg_bits),
        ];
        let nums = [
            r.energy_j,
            r.latency_s,
            r.area_mm2,
            r.giga_ops,
            r.gops,
            r.gops_per_w,
            r.gops_per_w_per_mm2,
            r.edp_js,
            r.energy_share.gemm,
            r.energy_share.pooling,
            r.energy_share.relu,
            r.energy_share.data_movement,
            r.latency_share.gemm,
            r.latency_share.pooling,
            r.latency_share.relu,
            r.latency_share.data_movement,
        ];
        rec.extend(nums.iter().map(|&x| sig6(x)));
        out.write_record(&rec).map_err(io)?;
    }
    out.flush().map_err(|e| Error::Config(format!("csv output: {e}")))?;
    Ok(())
}

pub fn write_json<W: Write>(w: W, rows: &[(SweepPoint, CostReport)]) -> Result<()> {
    let reports: Vec<&CostReport> = rows.iter().map(|r| &r.1).collect();
    serde_json::to_writer_pretty(w, &reports).map_err(|e| Error::Config(format!("json output: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes() {
        let mut s = SweepSpec::default();
        s.set_axis("precision=2..8").unwrap();
        s.set_axis("tech=sram16nm,reram16nm").unwrap();
        assert_eq!(s.points().len(), 14);
        assert_eq!(s.points()[1].precision, PrecisionConfig::fixed(3));
        assert!(s.set_axis("colour=red").is_err());
        assert!(s.set_axis("precision=8..2").is_err());
        assert!(s.set_axis("hw=xr").is_err());
    }

    #[test]
    fn six_digits() {
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.0), "0");
    }
}
