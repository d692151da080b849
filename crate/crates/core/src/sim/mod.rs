//! End-to-end cost reports, peak metrics, the mixed-precision study and
//! design-space sweeps.

mod calibrate;
mod mixed;
mod peak;
mod sweep;

pub use calibrate::{calibrate_compare_energy, ratio_curve, TECH_RATIO_TARGETS};
pub use mixed::{evaluate_mixed_precision, MixedRow};
pub use peak::{peak_metrics, PeakMetrics, PEAK_MAX_BITS};
pub use sweep::{load_model, load_tech, precision_values, sig6, sweep, write_csv, write_json, SweepPoint, SweepSpec, CSV_SCHEMA};

use crate::error::{Error, Result};
use crate::mapper::{plan_ir, plan_lr, Category, ExecutionPlan, HardwareConfig, Mode};
use crate::tech::{area_of, energy_of, ClockProfile, InterconnectProfile, TechProfile};
use crate::trace::EventTrace;
use crate::workload::{average_precision, ModelSpec, PrecisionConfig};
use serde::Serialize;

/// One value per cost category.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Shares {
    pub gemm: f64,
    pub pooling: f64,
    pub relu: f64,
    pub data_movement: f64,
}

impl Shares {
    fn slot(&mut self, c: Category) -> &mut f64 {
        match c {
            Category::Gemm => &mut self.gemm,
            Category::Pooling => &mut self.pooling,
            Category::Relu => &mut self.relu,
            Category::DataMovement => &mut self.data_movement,
        }
    }

    pub fn get(&self, c: Category) -> f64 {
        match c {
            Category::Gemm => self.gemm,
            Category::Pooling => self.pooling,
            Category::Relu => self.relu,
            Category::DataMovement => self.data_movement,
        }
    }

    pub fn sum(&self) -> f64 {
        self.gemm + self.pooling + self.relu + self.data_movement
    }

    fn normalized(mut self) -> Shares {
        let t = self.sum();
        if t > 0.0 {
            for c in Category::ALL {
                *self.slot(c) /= t;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub model: String,
    pub mode: Mode,
    pub tech: String,
    pub precision: String,
    pub avg_bits: f64,
    pub energy_j: f64,
    pub latency_s: f64,
    pub area_mm2: f64,
    pub giga_ops: f64,
    pub gops: f64,
    pub gops_per_w: f64,
    pub gops_per_w_per_mm2: f64,
    pub edp_js: f64,
    pub energy_share: Shares,
    pub latency_share: Shares,
}

impl CostReport {
    /// Checks the identities between the report's fields.
    pub fn check(&self) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
        let bad = |what: &str| Err(Error::Validation(format!("{}: {what}", self.model)));
        if !close(self.edp_js, self.energy_j * self.latency_s) {
            return bad("edp != energy * latency");
        }
        if self.latency_s > 0.0 && self.energy_j > 0.0 {
            if !close(self.gops, self.giga_ops / self.latency_s) {
                return bad("gops != giga-ops / latency");
            }
            if !close(self.gops_per_w, self.gops / (self.energy_j / self.latency_s)) {
                return bad("gops/W != gops / power");
            }
            if self.area_mm2 > 0.0 && !close(self.gops_per_w_per_mm2, self.gops_per_w / self.area_mm2) {
                return bad("gops/W/mm2 != gops/W / area");
            }
            for s in [self.energy_share, self.latency_share] {
                if Category::ALL.iter().any(|&c| !(0.0..=1.0).contains(&s.get(c))) || (s.sum() - 1.0).abs() > 1e-9 {
                    return bad("breakdown shares do not sum to 1");
                }
            }
        }
        if [self.energy_j, self.latency_s, self.area_mm2, self.giga_ops].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("negative or non-finite total");
        }
        Ok(())
    }
}

/// Energy, latency and per-category splits of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanCost {
    pub energy_j: f64,
    pub latency_s: f64,
    pub energy: Shares,
    pub latency: Shares,
}

/// Costs `plan` under a technology. Steps run one after another; within a
/// step the CAP stages and the link traffic overlap.
pub fn evaluate(plan: &ExecutionPlan, tech: &TechProfile, ic: &InterconnectProfile, clock: &ClockProfile) -> Result<PlanCost> {
    let mut c = PlanCost::default();
    let cyc = |t: &EventTrace| t.cycles(tech.write_cycle_multiplier) as f64 / clock.ap_frequency;
    for p in plan.layers.iter().flat_map(|l| &l.phases) {
        let steps = p.steps as f64;
        let work = cyc(&p.cap_compute);
        let step = (work + cyc(&p.cap_movement)).max(ic.latency(p.link_bits));
        *c.latency.slot(p.category) += steps * work;
        c.latency.data_movement += steps * (step - work);
        *c.energy.slot(p.category) += energy_of(&p.compute, tech, ic)?;
        c.energy.data_movement += energy_of(&p.movement, tech, ic)?;
    }
    c.energy_j = c.energy.sum();
    c.latency_s = c.latency.sum();
    Ok(c)
}

/// Total activity of a plan over all arrays and links.
pub fn activity(plan: &ExecutionPlan) -> EventTrace {
    plan.layers.iter().flat_map(|l| &l.phases).map(|p| p.compute + p.movement).sum()
}

/// Plans `model` for `hw.mode`. IR hardware is resized to the model.
pub fn plan_for(
    model: &ModelSpec,
    precision: &PrecisionConfig,
    hw: &HardwareConfig,
    ic: &InterconnectProfile,
) -> Result<ExecutionPlan> {
    let precs = precision.resolve(model)?;
    match hw.mode {
        Mode::Ir => plan_ir(model, &precs, hw, ic),
        Mode::Lr => plan_lr(model, &precs, hw, ic),
    }
}

pub fn report(plan: &ExecutionPlan, precision: &PrecisionConfig, tech: &TechProfile, ic: &InterconnectProfile, clock: &ClockProfile) -> Result<CostReport> {
    let c = evaluate(plan, tech, ic, clock)?;
    let area = area_of(&plan.hw, tech);
    let giga_ops = plan.total_ops() / 1e9;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let gops = ratio(giga_ops, c.latency_s);
    let gops_per_w = ratio(gops, ratio(c.energy_j, c.latency_s));
    let r = CostReport {
        model: plan.model.clone(),
        mode: plan.hw.mode,
        tech: tech.name.clone(),
        precision: precision.label(),
        avg_bits: average_precision(precision).unwrap_or(0.0),
        energy_j: c.energy_j,
        latency_s: c.latency_s,
        area_mm2: area,
        giga_ops,
        gops,
        gops_per_w,
        gops_per_w_per_mm2: ratio(gops_per_w, area),
        edp_js: c.energy_j * c.latency_s,
        energy_share: c.energy.normalized(),
        latency_share: c.latency.normalized(),
    };
    r.check()?;
    Ok(r)
}

/// Plans and costs one inference of `model`.
pub fn simulate(
    model: &ModelSpec,
    precision: &PrecisionConfig,
    hw: &HardwareConfig,
    tech: &TechProfile,
    ic: &InterconnectProfile,
    clock: &ClockProfile,
) -> Result<CostReport> {
    let plan = plan_for(model, precision, hw, ic)?;
    report(&plan, precision, tech, ic, clock)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(model: &str, bits: u32, tech: &TechProfile) -> CostReport {
        let m = ModelSpec::builtin(model).unwrap();
        simulate(
            &m,
            &PrecisionConfig::fixed(bits),
            &HardwareConfig::lr_default(),
            tech,
            &InterconnectProfile::default(),
            &ClockProfile::default(),
        )
        .unwrap()
    }

    #[test]
    fn empty_model() {
        let r = simulate(
            &ModelSpec::empty("none"),
            &PrecisionConfig::fixed(8),
            &HardwareConfig::lr_default(),
            &TechProfile::sram16nm(),
            &InterconnectProfile::default(),
            &ClockProfile::default(),
        )
        .unwrap();
        assert_eq!((r.energy_j, r.latency_s, r.giga_ops, r.gops, r.edp_js), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn energy_follows_mac_count() {
        let s = TechProfile::sram16nm();
        let (v, r, a) = (run("vgg16", 8, &s), run("resnet50", 8, &s), run("alexnet", 8, &s));
        assert!(v.energy_j > r.energy_j && r.energy_j > a.energy_j);
    }

    #[test]
    fn gemm_dominates_and_pooling_outweighs_relu() {
        for m in ["alexnet", "vgg16", "resnet50"] {
            let r = run(m, 8, &TechProfile::sram16nm());
            let e = r.energy_share;
            assert!(e.gemm > e.relu && e.gemm > e.data_movement, "{m}: {e:?}");
            assert!(e.pooling > e.relu, "{m}: {e:?}");
        }
    }

    #[test]
    fn latency_is_flat_in_precision() {
        let s = TechProfile::sram16nm();
        let (lo, hi) = (run("vgg16", 2, &s), run("vgg16", 8, &s));
        assert!(hi.latency_s / lo.latency_s <= 1.10);
        assert!(hi.energy_j > lo.energy_j);
    }
}
