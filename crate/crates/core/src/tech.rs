//! Technology profiles and the conversion of traces into joules, seconds
//! and square millimetres.

use crate::error::{Error, Result};
use crate::mapper::HardwareConfig;
use crate::trace::EventTrace;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Sram,
    Reram,
}

/// Write energy and bit error probability at one supply voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub v_dd: f64,
    pub e_write_cell: f64,
    pub p_bit_error: f64,
}

/// Per-cell energies, timing and area of one memory technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechProfile {
    pub name: String,
    pub cell_kind: CellKind,
    /// J per cell written.
    pub e_write_cell: f64,
    /// J per cell taking part in a compare or read.
    pub e_compare_cell: f64,
    /// Cycles per write stage.
    pub write_cycle_multiplier: u64,
    /// mm² per cell, periphery excluded.
    pub cell_area: f64,
    /// Sense amplifiers, drivers and control as a fraction of cell area.
    pub periphery_fraction: f64,
    pub r_lrs: f64,
    pub r_hrs: f64,
    pub r_on: f64,
    pub r_off: f64,
    pub c_sense: f64,
    pub v_dd: f64,
    pub p_bit_error: f64,
    /// Supported supply voltages.
    pub operating_points: Vec<OperatingPoint>,
}

/// Cells in the default limited-resource configuration:
/// 64 clusters x (64 CAPs + 1 MAP) x 4800 x 16.
pub const LR_DEFAULT_CELLS: f64 = 64.0 * 65.0 * 4800.0 * 16.0;
/// Silicon area of the default limited-resource configuration in mm².
pub const LR_DEFAULT_AREA_MM2: f64 = 137.45;
/// ReRAM cells are this many times denser than SRAM cells.
pub const RERAM_DENSITY_GAIN: f64 = 4.4;

const PERIPHERY: f64 = 1.0;

/// Compare energy per active cell, identical for both technologies. Fitted
/// once against the VGG16 ReRAM/SRAM energy-ratio curve with
/// [`crate::sim::calibrate_compare_energy`].
pub const E_COMPARE_CELL: f64 = 1.433e-14;

const SRAM_E_WRITE: f64 = 0.24e-15;
const SRAM_E_WRITE_HALF_V: f64 = 0.06e-15;
const RERAM_E_WRITE: f64 = 21.7e-12;

impl TechProfile {
    pub fn sram16nm() -> Self {
        TechProfile {
            name: "sram16nm".into(),
            cell_kind: CellKind::Sram,
            e_write_cell: SRAM_E_WRITE,
            e_compare_cell: E_COMPARE_CELL,
            write_cycle_multiplier: 1,
            cell_area: LR_DEFAULT_AREA_MM2 / (LR_DEFAULT_CELLS * (1.0 + PERIPHERY)),
            periphery_fraction: PERIPHERY,
            r_lrs: 5e3,
            r_hrs: 2.5e6,
            r_on: 15e3,
            r_off: 24.25e6,
            c_sense: 50e-15,
            v_dd: 1.0,
            p_bit_error: 0.0,
            operating_points: vec![
                OperatingPoint { v_dd: 1.0, e_write_cell: SRAM_E_WRITE, p_bit_error: 0.0 },
                OperatingPoint { v_dd: 0.5, e_write_cell: SRAM_E_WRITE_HALF_V, p_bit_error: 0.021 },
            ],
        }
    }

    pub fn reram16nm() -> Self {
        let sram = Self::sram16nm();
        TechProfile {
            name: "reram16nm".into(),
            cell_kind: CellKind::Reram,
            e_write_cell: RERAM_E_WRITE,
            write_cycle_multiplier: 2 * sram.write_cycle_multiplier,
            cell_area: sram.cell_area / RERAM_DENSITY_GAIN,
            operating_points: vec![OperatingPoint { v_dd: 1.0, e_write_cell: RERAM_E_WRITE, p_bit_error: 0.0 }],
            ..sram
        }
    }

    /// Looks up a built-in profile: `sram16nm`, `reram16nm` or `sram16nm@0.5V`.
    pub fn named(name: &str) -> Result<Self> {
        let (base, volt) = match name.split_once('@') {
            Some((b, v)) => (b, Some(v)),
            None => (name, None),
        };
        let p = match base {
            "sram16nm" | "sram" => Self::sram16nm(),
            "reram16nm" | "reram" => Self::reram16nm(),
            _ => return Err(Error::Config(format!("unknown technology profile {name}"))),
        };
        match volt {
            None => Ok(p),
            Some(v) => {
                let v: f64 = v
                    .trim_end_matches(['V', 'v'])
                    .parse()
                    .map_err(|_| Error::Config(format!("bad voltage in {name}")))?;
                let mut p = p.apply_voltage(v)?;
                p.name = name.to_string();
                Ok(p)
            }
        }
    }

    /// Returns the profile at supply `v`. Only write energy and error rate
    /// move; compare energy is left unchanged.
    pub fn apply_voltage(&self, v: f64) -> Result<Self> {
        let op = self
            .operating_points
            .iter()
            .find(|o| (o.v_dd - v).abs() < 1e-9)
            .ok_or_else(|| Error::Config(format!("{} has no operating point at {v} V", self.name)))?;
        Ok(TechProfile { v_dd: op.v_dd, e_write_cell: op.e_write_cell, p_bit_error: op.p_bit_error, ..self.clone() })
    }

    /// Parses a `key = value` profile file. Keys carry their unit as a
    /// suffix. Missing keys fall back to the built-in profile named by
    /// `base` (default `sram16nm`).
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(Error::Parse { line: ln + 1, msg: "expected key = value".into() })?;
            entries.push((ln + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let base = entries.iter().find(|e| e.1 == "base").map_or("sram16nm", |e| e.2.as_str());
        let mut p = Self::named(base)?;
        let mut points = Vec::new();
        for (line, k, v) in &entries {
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse { line: *line, msg: format!("bad number {s}") });
            match k.as_str() {
                "base" => {}
                "name" => p.name = v.clone(),
                "cell_kind" => {
                    p.cell_kind = match v.as_str() {
                        "sram" => CellKind::Sram,
                        "reram" => CellKind::Reram,
                        _ => return Err(Error::Parse { line: *line, msg: format!("unknown cell kind {v}") }),
                    }
                }
                "e_write_cell_J" => p.e_write_cell = num(v)?,
                "e_compare_cell_J" => p.e_compare_cell = num(v)?,
                "write_cycle_multiplier" => p.write_cycle_multiplier = num(v)? as u64,
                "cell_area_mm2" => p.cell_area = num(v)?,
                "periphery_fraction" => p.periphery_fraction = num(v)?,
                "r_lrs_ohm" => p.r_lrs = num(v)?,
                "r_hrs_ohm" => p.r_hrs = num(v)?,
                "r_on_ohm" => p.r_on = num(v)?,
                "r_off_ohm" => p.r_off = num(v)?,
                "c_sense_F" => p.c_sense = num(v)?,
                "v_dd_V" => p.v_dd = num(v)?,
                "p_bit_error" => p.p_bit_error = num(v)?,
                "operating_point" => {
                    let f: Vec<&str> = v.split_whitespace().collect();
                    if f.len() != 3 {
                        return Err(Error::Parse { line: *line, msg: "operating_point needs V e_write_J p_error".into() });
                    }
                    points.push(OperatingPoint { v_dd: num(f[0])?, e_write_cell: num(f[1])?, p_bit_error: num(f[2])? });
                }
                _ => return Err(Error::Parse { line: *line, msg: format!("unknown key {k}") }),
            }
        }
        if points.is_empty() {
            points.push(OperatingPoint { v_dd: p.v_dd, e_write_cell: p.e_write_cell, p_bit_error: p.p_bit_error });
        }
        p.operating_points = points;
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Validation(format!("technology {}: {what}", self.name)));
        let energies = [self.e_write_cell, self.e_compare_cell, self.cell_area, self.periphery_fraction, self.c_sense];
        if energies.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("energies, area and capacitance must be finite and non-negative");
        }
        if self.write_cycle_multiplier == 0 {
            return bad("write_cycle_multiplier must be at least 1");
        }
        for o in &self.operating_points {
            if o.v_dd.is_nan() || o.v_dd <= 0.0 || !(0.0..=1.0).contains(&o.p_bit_error) || o.e_write_cell.is_nan() || o.e_write_cell < 0.0 {
                return bad("operating points need V > 0, e_write >= 0 and 0 <= p_error <= 1");
            }
        }
        if self.v_dd.is_nan() || self.v_dd <= 0.0 || !(0.0..=1.0).contains(&self.p_bit_error) {
            return bad("v_dd must be positive and p_bit_error in [0, 1]");
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "name = {}\ncell_kind = {}\ne_write_cell_J = {:e}\ne_compare_cell_J = {:e}\nwrite_cycle_multiplier = {}\n\
             cell_area_mm2 = {:e}\nperiphery_fraction = {}\nr_lrs_ohm = {:e}\nr_hrs_ohm = {:e}\nr_on_ohm = {:e}\n\
             r_off_ohm = {:e}\nc_sense_F = {:e}\nv_dd_V = {}\np_bit_error = {}\n",
            self.name,
            match self.cell_kind {
                CellKind::Sram => "sram",
                CellKind::Reram => "reram",
            },
            self.e_write_cell,
            self.e_compare_cell,
            self.write_cycle_multiplier,
            self.cell_area,
            self.periphery_fraction,
            self.r_lrs,
            self.r_hrs,
            self.r_on,
            self.r_off,
            self.c_sense,
            self.v_dd,
            self.p_bit_error
        );
        for o in &self.operating_points {
            s += &format!("operating_point = {} {:e} {}\n", o.v_dd, o.e_write_cell, o.p_bit_error);
        }
        s
    }
}

impl fmt::Display for TechProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for TechProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::named(s)
    }
}

/// On-chip mesh between a cluster's MAP and its CAPs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterconnectProfile {
    /// J per bit per mm.
    pub e_per_bit_per_mm: f64,
    pub avg_hops: f64,
    /// mm per hop.
    pub hop_length: f64,
    pub bits_per_transfer: u64,
    /// Hz.
    pub frequency: f64,
}

impl Default for InterconnectProfile {
    /// The hop length is the pitch of one AP in a cluster of the default
    /// configuration: sqrt(137.45 mm² / (64 clusters * 65 APs)).
    fn default() -> Self {
        InterconnectProfile {
            e_per_bit_per_mm: 0.1e-12,
            avg_hops: 3.815,
            hop_length: (LR_DEFAULT_AREA_MM2 / (64.0 * 65.0)).sqrt(),
            bits_per_transfer: 1024,
            frequency: 500e6,
        }
    }
}

impl InterconnectProfile {
    pub fn energy_per_bit(&self) -> f64 {
        self.avg_hops * self.hop_length * self.e_per_bit_per_mm
    }

    pub fn flits(&self, bits: f64) -> u64 {
        (bits / self.bits_per_transfer as f64).ceil() as u64
    }

    /// Seconds to move `bits` over one link, in whole flits.
    pub fn latency(&self, bits: f64) -> f64 {
        self.flits(bits) as f64 / self.frequency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockProfile {
    /// Hz.
    pub ap_frequency: f64,
}

impl Default for ClockProfile {
    fn default() -> Self {
        ClockProfile { ap_frequency: 1e9 }
    }
}

/// Joules for a trace: written cells, compared (and read) cells, and bits
/// carried by the interconnect.
pub fn energy_of(trace: &EventTrace, profile: &TechProfile, ic: &InterconnectProfile) -> Result<f64> {
    if trace.n_compare + trace.n_read > 0 && trace.active_cells_compared <= 0.0 {
        return Err(Error::Accounting("compare stages without active-cell annotation".into()));
    }
    if trace.active_cells_compared < 0.0 || trace.cells_written < 0.0 || trace.bits_transferred < 0.0 {
        return Err(Error::Accounting("negative activity".into()));
    }
    Ok(trace.cells_written * profile.e_write_cell
        + trace.active_cells_compared * profile.e_compare_cell
        + trace.bits_transferred * ic.energy_per_bit())
}

/// Seconds for the stages of a trace at the AP clock.
pub fn latency_of(trace: &EventTrace, profile: &TechProfile, clock: &ClockProfile) -> f64 {
    trace.cycles(profile.write_cycle_multiplier) as f64 / clock.ap_frequency
}

/// mm² of all CAP and MAP cells plus periphery.
pub fn area_of(hw: &HardwareConfig, profile: &TechProfile) -> f64 {
    hw.total_cells() as f64 * profile.cell_area * (1.0 + profile.periphery_fraction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ic() -> InterconnectProfile {
        InterconnectProfile::default()
    }

    #[test]
    fn empty_trace_is_free() {
        let t = EventTrace::default();
        assert_eq!(energy_of(&t, &TechProfile::sram16nm(), &ic()).unwrap(), 0.0);
        assert_eq!(latency_of(&t, &TechProfile::sram16nm(), &ClockProfile::default()), 0.0);
    }

    #[test]
    fn write_energy() {
        let t = EventTrace::write(100.0);
        let e = energy_of(&t, &TechProfile::sram16nm(), &ic()).unwrap();
        assert!((e - 24e-15).abs() < 1e-27);
        let r = energy_of(&t, &TechProfile::reram16nm(), &ic()).unwrap();
        assert!((r / e - 21.7e-12 / 0.24e-15).abs() < 1e-6);
    }

    #[test]
    fn missing_annotation() {
        let t = EventTrace { n_compare: 3, ..Default::default() };
        assert!(matches!(energy_of(&t, &TechProfile::sram16nm(), &ic()), Err(Error::Accounting(_))));
    }

    #[test]
    fn addition_latency() {
        let t = crate::ops::expected_trace(&crate::ApOp::Add { m: 8, l: 2 }, crate::ApVariant::Ap2D).unwrap();
        let s = TechProfile::sram16nm();
        let ns = latency_of(&t, &s, &ClockProfile::default()) * 1e9;
        assert!((ns - 89.0).abs() < 1e-9);
        let r = latency_of(&t, &TechProfile::reram16nm(), &ClockProfile::default()) * 1e9;
        assert!((r - ns - t.n_write as f64).abs() < 1e-9);
    }

    #[test]
    fn voltage_points() {
        let s = TechProfile::sram16nm();
        let h = s.apply_voltage(0.5).unwrap();
        assert_eq!((h.e_write_cell, h.p_bit_error), (0.06e-15, 0.021));
        assert_eq!(h.e_compare_cell, s.e_compare_cell);
        assert_eq!(h.apply_voltage(0.5).unwrap(), h);
        let back = h.apply_voltage(1.0).unwrap();
        assert_eq!((back.e_write_cell, back.p_bit_error), (0.24e-15, 0.0));
        assert!(s.apply_voltage(0.7).is_err());
        assert!(TechProfile::reram16nm().apply_voltage(0.5).is_err());
        assert_eq!(TechProfile::named("sram16nm@0.5V").unwrap().e_write_cell, 0.06e-15);
    }

    #[test]
    fn area_calibration() {
        let hw = HardwareConfig::lr_default();
        assert!((area_of(&hw, &TechProfile::sram16nm()) - 137.45).abs() < 1e-9);
        assert!((area_of(&hw, &TechProfile::reram16nm()) - 137.45 / 4.4).abs() < 1e-9);
        let empty = HardwareConfig { clusters: (0, 0), ..hw };
        assert_eq!(area_of(&empty, &TechProfile::sram16nm()), 0.0);
    }

    #[test]
    fn profile_file_roundtrip() {
        let p = TechProfile::reram16nm();
        let q = TechProfile::parse(&p.to_text()).unwrap();
        assert_eq!(q.cell_kind, CellKind::Reram);
        assert!((q.e_write_cell - p.e_write_cell).abs() < 1e-24);
        assert_eq!(q.write_cycle_multiplier, p.write_cycle_multiplier);
        assert!(TechProfile::parse("bogus = 1").is_err());
    }

    #[test]
    fn flits_quantize() {
        let i = ic();
        assert_eq!(i.flits(16.0), 1);
        assert_eq!(i.flits(1024.0), 1);
        assert_eq!(i.flits(1025.0), 2);
        assert!((i.latency(2048.0) - 4e-9).abs() < 1e-18);
    }
}
