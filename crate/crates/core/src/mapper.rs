//! Execution plans: how every layer of a model is folded onto the CAPs of
//! an infinite-resource (IR) or limited-resource (LR) accelerator, and
//! what moves over the cluster links while it runs.
//!
//! A GEMM layer becomes `C_K x (H_O W_O)` outputs of depth `R = H_K W_K C_I`.
//! One CAP row holds one product lane, so a *unit* (one kernel row against
//! one input column) occupies `R` consecutive rows and a CAP hosts
//! `floor(usable_rows / R)` units. Kernels deeper than a CAP are split into
//! `j_chunks` partial units whose partial sums are combined afterwards.
//!
//! In LR mode every cluster keeps a copy of the kernel (weight stationary)
//! and takes disjoint output columns, round-robin in row-major cluster
//! order. When a kernel does not fit in one cluster it is cut into kernel
//! chunks and the work items become (chunk, column) pairs. A step's
//! latency is the larger of its CAP stages and its link traffic.

use crate::error::{Error, Result};
use crate::ops::{expected_trace, matmat_parts, ApOp, ApVariant};
use crate::tech::InterconnectProfile;
use crate::trace::EventTrace;
use crate::workload::{im2col_dims, macs_of, LayerKind, LayerPrecision, LayerSpec, ModelSpec};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ir,
    Lr,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ir => "ir",
            Mode::Lr => "lr",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ir" => Ok(Mode::Ir),
            "lr" => Ok(Mode::Lr),
            _ => Err(Error::Config(format!("unknown hardware mode {s:?} (ir or lr)"))),
        }
    }
}

/// Bits per activation or weight word the hardware is sized for.
pub const MAX_WORD_BITS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardwareConfig {
    pub mode: Mode,
    pub clusters: (usize, usize),
    pub caps_per_cluster: (usize, usize),
    pub maps_per_cluster: usize,
    pub ap_rows: usize,
    pub ap_cols: usize,
    /// MAP rows. The MAP has the CAP column count.
    pub map_rows: usize,
    pub variant: ApVariant,
}

impl HardwareConfig {
    /// 8x8 clusters of 8x8 CAPs and one MAP, 4800x16 cells each.
    pub fn lr_default() -> Self {
        HardwareConfig {
            mode: Mode::Lr,
            clusters: (8, 8),
            caps_per_cluster: (8, 8),
            maps_per_cluster: 1,
            ap_rows: 4800,
            ap_cols: 2 * MAX_WORD_BITS,
            map_rows: 4800,
            variant: ApVariant::Ap2D,
        }
    }

    /// One cluster with enough CAPs to run every GEMM layer of `model` in a
    /// single step, and a MAP large enough for the weights plus the largest
    /// patch matrix.
    pub fn ir_for(model: &ModelSpec, base: &HardwareConfig) -> Result<Self> {
        let cell = HardwareConfig { mode: Mode::Ir, clusters: (1, 1), caps_per_cluster: (1, 1), ..*base };
        let usable = cell.usable_rows()?;
        let mut caps = 1;
        let mut patch = 0;
        for l in model.layers.iter().filter(|l| l.kind.is_gemm()) {
            let g = im2col_dims(l)?;
            let t = Tiling::new(g.p.0, usable);
            caps = caps.max((g.k.0 * t.j_chunks * g.p.1).div_ceil(t.units_per_cap));
            patch = patch.max(g.p.0 * g.p.1);
        }
        let words_per_row = (base.ap_cols / MAX_WORD_BITS).max(1);
        let map_rows = (model.weight_count() + patch).div_ceil(words_per_row).max(1);
        Ok(HardwareConfig { caps_per_cluster: (caps, 1), maps_per_cluster: 1, map_rows, ..cell })
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.0 * self.clusters.1
    }

    pub fn caps_in_cluster(&self) -> usize {
        self.caps_per_cluster.0 * self.caps_per_cluster.1
    }

    pub fn total_caps(&self) -> usize {
        self.n_clusters() * self.caps_in_cluster()
    }

    /// MAC lanes across all CAPs.
    pub fn total_lanes(&self) -> usize {
        self.total_caps() * self.ap_rows
    }

    pub fn total_cells(&self) -> u64 {
        let per_cluster = self.caps_in_cluster() * self.ap_rows * self.ap_cols
            + self.maps_per_cluster * self.map_rows * self.ap_cols;
        (self.n_clusters() * per_cluster) as u64
    }

    /// Rows left for data once the variant's carry rows are set aside: one
    /// for the 2D chain, a third of the array for segmented pairs.
    pub fn usable_rows(&self) -> Result<usize> {
        let u = match self.variant {
            ApVariant::Ap1D => self.ap_rows,
            ApVariant::Ap2D => self.ap_rows.saturating_sub(1),
            ApVariant::Ap2DSeg => self.ap_rows * 2 / 3,
        };
        if u == 0 {
            return Err(Error::Capacity(format!("a {}-row CAP has no data rows", self.ap_rows)));
        }
        Ok(u)
    }

    fn check(&self, bits: u32) -> Result<()> {
        if self.caps_in_cluster() == 0 || self.n_clusters() == 0 {
            return Err(Error::Capacity("hardware has no CAPs".into()));
        }
        if 2 * bits as usize > self.ap_cols {
            return Err(Error::Capacity(format!("{bits}-bit words do not fit two per {}-column row", self.ap_cols)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Gemm,
    Pooling,
    Relu,
    DataMovement,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Gemm, Category::Pooling, Category::Relu, Category::DataMovement];
}

/// A run of identical steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase {
    pub label: String,
    pub category: Category,
    pub steps: u64,
    /// Stages of the busiest CAP in one step doing the phase's own work.
    pub cap_compute: EventTrace,
    /// Stages of the busiest CAP in one step populating or draining data.
    pub cap_movement: EventTrace,
    /// Bits over the busiest cluster link in one step.
    pub link_bits: f64,
    /// Activity of all arrays over the whole phase, phase work.
    pub compute: EventTrace,
    /// Activity of all arrays and links over the whole phase, data movement.
    pub movement: EventTrace,
}

/// The six-step reshape between two layers: CAP word reads, link, MAP word
/// writes, MAP word reads, link, CAP word writes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ReshapeTrace {
    pub out_words: usize,
    pub in_words: usize,
    pub bits: u32,
    pub flits_to_map: u64,
    pub flits_to_cap: u64,
    /// Steps 1 and 6.
    pub cap_side: EventTrace,
    /// Steps 2 to 5.
    pub map_side: EventTrace,
}

impl ReshapeTrace {
    pub fn total(&self) -> EventTrace {
        self.cap_side + self.map_side
    }
}

fn words(t: EventTrace, n: f64) -> EventTrace {
    t * n
}

/// Cost of draining `out_words` results to the MAP and feeding `in_words`
/// back to the CAPs, each word `bits` wide.
pub fn reshape_cost(out_words: usize, in_words: usize, bits: u32, ic: &InterconnectProfile) -> ReshapeTrace {
    let b = bits as f64;
    let (o, i) = (out_words as f64, in_words as f64);
    let link = EventTrace { bits_transferred: (o + i) * b, ..Default::default() };
    ReshapeTrace {
        out_words,
        in_words,
        bits,
        flits_to_map: ic.flits(o * b),
        flits_to_cap: ic.flits(i * b),
        cap_side: words(EventTrace::read(b), o) + words(EventTrace::write(b), i),
        map_side: words(EventTrace::write(b), o) + words(EventTrace::read(b), i) + link,
    }
}

/// How a GEMM's kernel rows are cut to fit a CAP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Tiling {
    pub j_chunks: usize,
    pub chunk_rows: usize,
    pub units_per_cap: usize,
}

impl Tiling {
    fn new(r: usize, usable: usize) -> Self {
        if r <= usable {
            Tiling { j_chunks: 1, chunk_rows: r, units_per_cap: usable / r }
        } else {
            let j_chunks = r.div_ceil(usable);
            Tiling { j_chunks, chunk_rows: r.div_ceil(j_chunks), units_per_cap: 1 }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GemmPlan {
    /// Kernel depth `H_K W_K C_I`.
    pub r: usize,
    /// Output channels.
    pub ck: usize,
    /// Output columns `H_O W_O`.
    pub n: usize,
    pub tiling: Tiling,
    pub kernel_chunks: usize,
    /// Units per kernel chunk; the last chunk may be smaller.
    pub chunk_units: usize,
    /// Chunk copies per cluster, each serving one column per step.
    pub copies: usize,
    /// Column groups of `copies` columns.
    pub groups: usize,
    /// Chunk-major (chunk, column group) pairs.
    pub work_items: usize,
    pub clusters: usize,
    /// Weight loads into the busiest cluster.
    pub weight_loads: usize,
    /// (Chunk, column) pairs finished in each step, summed over clusters.
    pub columns_per_step: Vec<usize>,
}

impl GemmPlan {
    /// Kernel chunk, first column and column count run by `cluster` at
    /// `step`, or `None` if the cluster idles.
    pub fn assignment(&self, step: usize, cluster: usize) -> Option<(usize, usize, usize)> {
        let item = step * self.clusters + cluster;
        if cluster >= self.clusters || item >= self.work_items {
            return None;
        }
        let first = (item % self.groups) * self.copies;
        Some((item / self.groups, first, self.copies.min(self.n - first)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerPlan {
    pub name: String,
    pub kind: LayerKind,
    pub precision: LayerPrecision,
    pub macs: u64,
    /// Operations credited to the layer for throughput.
    pub ops: f64,
    pub gemm: Option<GemmPlan>,
    /// Serialized steps of the main phase.
    pub fold_factor: u64,
    /// Busy CAPs over available CAPs during the main phase.
    pub utilization: f64,
    /// MAC lanes in use over all CAP rows during the main phase.
    pub lane_utilization: f64,
    pub weight_stream_bits: f64,
    pub input_broadcast_bits: f64,
    pub reshape: ReshapeTrace,
    pub phases: Vec<Phase>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionPlan {
    pub model: String,
    pub hw: HardwareConfig,
    pub layers: Vec<LayerPlan>,
}

impl ExecutionPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans serialize")
    }

    pub fn total_ops(&self) -> f64 {
        self.layers.iter().map(|l| l.ops).sum()
    }
}

/// Plan `model` on one IR cluster sized so every layer runs in one step.
/// Weights are loaded before inference and cost nothing here.
pub fn plan_ir(model: &ModelSpec, precisions: &[LayerPrecision], base: &HardwareConfig, ic: &InterconnectProfile) -> Result<ExecutionPlan> {
    let hw = HardwareConfig::ir_for(model, base)?;
    plan(model, precisions, &hw, ic)
}

/// Plan `model` on LR hardware, folding layers over time.
pub fn plan_lr(model: &ModelSpec, precisions: &[LayerPrecision], hw: &HardwareConfig, ic: &InterconnectProfile) -> Result<ExecutionPlan> {
    if hw.mode != Mode::Lr {
        return Err(Error::Config("plan_lr needs LR hardware".into()));
    }
    plan(model, precisions, hw, ic)
}

/// Plan `model` on `hw` as it is, IR or LR.
pub fn plan(model: &ModelSpec, precisions: &[LayerPrecision], hw: &HardwareConfig, ic: &InterconnectProfile) -> Result<ExecutionPlan> {
    model.validate()?;
    if precisions.len() != model.layers.len() {
        return Err(Error::Validation(format!(
            "{} precisions for {} layers",
            precisions.len(),
            model.layers.len()
        )));
    }
    let layers = model
        .layers
        .iter()
        .zip(precisions)
        .map(|(l, p)| {
            hw.check(p.operand_bits())?;
            match l.kind {
                LayerKind::Conv | LayerKind::Fc => plan_gemm(l, *p, hw, ic),
                LayerKind::MaxPool | LayerKind::AvgPool => plan_pool(l, *p, hw, ic),
                LayerKind::Relu => plan_relu(l, *p, hw),
                LayerKind::ResidualAdd => plan_add(l, *p, hw, ic),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExecutionPlan { model: model.name.clone(), hw: *hw, layers })
}

fn base_plan(l: &LayerSpec, p: LayerPrecision) -> LayerPlan {
    LayerPlan {
        name: l.name.clone(),
        kind: l.kind,
        precision: p,
        macs: macs_of(l),
        ops: 0.0,
        gemm: None,
        fold_factor: 1,
        utilization: 0.0,
        lane_utilization: 0.0,
        weight_stream_bits: 0.0,
        input_broadcast_bits: 0.0,
        reshape: ReshapeTrace::default(),
        phases: Vec::new(),
    }
}

fn link(bits: f64) -> EventTrace {
    EventTrace { bits_transferred: bits, ..Default::default() }
}

fn plan_gemm(l: &LayerSpec, p: LayerPrecision, hw: &HardwareConfig, ic: &InterconnectProfile) -> Result<LayerPlan> {
    let g = im2col_dims(l)?;
    let (r, ck, n) = (g.p.0, g.k.0, g.p.1);
    let (a, w, m) = (p.activation_bits as f64, p.weight_bits as f64, p.operand_bits());
    let t = Tiling::new(r, hw.usable_rows()?);
    let rc = t.chunk_rows;
    let per_col = ck * t.j_chunks;
    let upc = t.units_per_cap;
    let cluster_units = hw.caps_in_cluster() * upc;
    let clusters = hw.n_clusters();

    // Cut the kernel into the number of chunks that needs the fewest steps.
    let kc_min = per_col.div_ceil(cluster_units);
    let shape = |kc: usize| {
        let s = per_col.div_ceil(kc);
        let copies = cluster_units / s;
        let groups = n.div_ceil(copies);
        (s, copies, groups, (kc * groups).div_ceil(clusters))
    };
    let kc = (kc_min..=per_col.min(8 * kc_min)).min_by_key(|&k| (shape(k).3, k)).unwrap_or(kc_min);
    let (chunk_units, copies, groups, steps) = shape(kc);
    let work_items = kc * groups;
    let units_of = |k: usize| chunk_units.min(per_col - k * chunk_units);
    let cols_of = |g: usize| copies.min(n - g * copies);

    let partial = t.j_chunks > 1;
    let acc_bits = (2 * m + crate::ops::log2_ceil(rc)) as f64;
    let out_bits = if partial { acc_bits } else { a };
    let item_in = |k: usize| r.min(units_of(k) * rc);

    let mut columns_per_step = vec![0usize; steps];
    let mut caps_busy = 0usize;
    let mut in_words = 0usize;
    let mut loads = vec![0usize; clusters];
    let mut held = vec![usize::MAX; clusters];
    let mut load_words_total = 0usize;
    for item in 0..work_items {
        let (k, g) = (item / groups, item % groups);
        let cols = cols_of(g);
        columns_per_step[item / clusters] += cols;
        caps_busy += (cols * units_of(k)).div_ceil(upc).min(hw.caps_in_cluster());
        in_words += cols * item_in(k);
        let c = item % clusters;
        if held[c] != k {
            held[c] = k;
            loads[c] += 1;
            load_words_total += units_of(k) * rc;
        }
    }

    // The busiest CAP and cluster during a full step.
    let busy_units = upc.min(copies * chunk_units);
    let busy_rows = (busy_units * rc) as f64;
    let parts = matmat_parts(m, busy_units, rc, hw.variant);
    let recenter = expected_trace(&ApOp::Add { m: p.activation_bits, l: 2 * busy_units }, hw.variant)?;
    let cap_compute = parts.multiply + parts.reduction + if partial { EventTrace::default() } else { recenter };
    let cap_movement = EventTrace::write(a) * busy_rows + EventTrace::read(out_bits) * busy_units as f64;
    let step_bits = (copies * item_in(0)) as f64 * a + (copies * chunk_units) as f64 * out_bits;

    // Whole-layer activity.
    let instances = (per_col * n) as f64;
    let unit = matmat_parts(m, 1, rc, hw.variant);
    let outputs = (ck * n) as f64;
    let recenter_one = expected_trace(&ApOp::Add { m: p.activation_bits, l: 2 }, hw.variant)?;
    let compute = (unit.multiply + unit.reduction) * instances + if partial { EventTrace::default() } else { recenter_one * outputs };
    let cap_side = EventTrace::write(a) * (instances * rc as f64) + EventTrace::read(out_bits) * instances;
    let out_words = per_col * n;
    let reshape = reshape_cost(out_words, in_words, p.activation_bits, ic);
    // Partial sums travel and land at accumulator width.
    let map_side = EventTrace::write(out_bits) * out_words as f64
        + EventTrace::read(a) * in_words as f64
        + link(out_words as f64 * out_bits + in_words as f64 * a);

    let mut lp = base_plan(l, p);
    lp.ops = 2.0 * lp.macs as f64;
    lp.fold_factor = steps as u64;
    lp.utilization = caps_busy as f64 / (steps * hw.total_caps()) as f64;
    lp.lane_utilization = lp.macs as f64 / (steps * hw.total_lanes()) as f64;
    lp.input_broadcast_bits = in_words as f64 * a;
    lp.reshape = reshape;
    lp.phases.push(Phase {
        label: "gemm".into(),
        category: Category::Gemm,
        steps: steps as u64,
        cap_compute,
        cap_movement,
        link_bits: step_bits,
        compute,
        movement: cap_side + map_side,
    });

    let mut weight_loads = 0;
    if hw.mode == Mode::Lr {
        // One load whenever a cluster switches kernel chunk. The chunk is
        // sent once and written into every copy in the cluster.
        weight_loads = loads.iter().copied().max().unwrap_or(0);
        let bits = load_words_total as f64 * w;
        lp.weight_stream_bits = bits;
        lp.phases.push(Phase {
            label: "weights".into(),
            category: Category::DataMovement,
            steps: weight_loads as u64,
            cap_compute: EventTrace::default(),
            cap_movement: EventTrace::write(w) * busy_rows,
            link_bits: (chunk_units * rc) as f64 * w,
            compute: EventTrace::default(),
            movement: EventTrace::write(w) * (copies * load_words_total) as f64
                + EventTrace::read(w) * load_words_total as f64
                + link(bits),
        });
    }

    if partial {
        // Combine the j-chunk partial sums of every output on all CAPs.
        let depth = t.j_chunks;
        let rows_per = depth.next_power_of_two() / 2;
        let per_cap = (hw.usable_rows()? / rows_per).max(1);
        let per_step = per_cap * hw.total_caps();
        let outs = ck * n;
        let csteps = outs.div_ceil(per_step);
        let busy = per_cap.min(outs.div_ceil(hw.total_caps()));
        let acc = acc_bits as u32;
        let one = expected_trace(&ApOp::Reduce { m: acc, l: depth }, hw.variant)?;
        let in_bits = (outs * depth) as f64 * acc_bits;
        let cluster_outs = busy * hw.caps_in_cluster();
        lp.phases.push(Phase {
            label: "combine".into(),
            category: Category::Gemm,
            steps: csteps as u64,
            cap_compute: one + recenter,
            cap_movement: EventTrace::default(),
            link_bits: (cluster_outs * depth) as f64 * acc_bits + cluster_outs as f64 * a,
            compute: (one + recenter_one) * outs as f64,
            movement: EventTrace::read(acc_bits) * (outs * depth) as f64
                + EventTrace::write(a) * outs as f64
                + link(in_bits + outs as f64 * a),
        });
        lp.reshape.out_words = outs;
    }

    lp.gemm = Some(GemmPlan {
        r,
        ck,
        n,
        tiling: t,
        kernel_chunks: kc,
        chunk_units,
        copies,
        groups,
        work_items,
        clusters,
        weight_loads,
        columns_per_step,
    });
    Ok(lp)
}

/// Spread `items` over all CAPs at `per_cap` each: (steps, busiest count).
fn spread(items: usize, per_cap: usize, hw: &HardwareConfig) -> (usize, usize) {
    let per_step = per_cap * hw.total_caps();
    (items.div_ceil(per_step), per_cap.min(items.div_ceil(hw.total_caps())))
}

fn occupancy(items: usize, per_cap: usize, steps: usize, hw: &HardwareConfig) -> f64 {
    items.div_ceil(per_cap) as f64 / (steps * hw.total_caps()) as f64
}

fn plan_pool(l: &LayerSpec, p: LayerPrecision, hw: &HardwareConfig, ic: &InterconnectProfile) -> Result<LayerPlan> {
    let out = l.output()?;
    let s = l.window().max(2);
    let rows_per = s.next_power_of_two() / 2;
    let per_cap = hw.usable_rows()? / rows_per;
    if per_cap == 0 {
        return Err(Error::Capacity(format!("{}: a {s}-element window does not fit a CAP", l.name)));
    }
    let windows = out.volume();
    let (steps, busy) = spread(windows, per_cap, hw);
    let m = p.activation_bits;
    let op = |k| match l.kind {
        LayerKind::MaxPool => ApOp::MaxPool { m, s, k },
        _ => ApOp::AvgPool { m, s, k },
    };
    let a = m as f64;
    let mut lp = base_plan(l, p);
    lp.ops = (windows * (l.window().max(1) - 1)) as f64;
    if windows == 0 {
        return Ok(lp);
    }
    let cap = expected_trace(&op(busy), hw.variant)?;
    let in_words = windows * l.window();
    let reshape = reshape_cost(windows, in_words, m, ic);
    let cluster = busy * hw.caps_in_cluster();
    lp.fold_factor = steps as u64;
    lp.utilization = occupancy(windows, per_cap, steps, hw);
    lp.lane_utilization = (windows * rows_per) as f64 / (steps * hw.total_lanes()) as f64;
    lp.input_broadcast_bits = in_words as f64 * a;
    lp.reshape = reshape;
    lp.phases.push(Phase {
        label: "pool".into(),
        category: Category::Pooling,
        steps: steps as u64,
        cap_compute: cap,
        cap_movement: EventTrace::default(),
        link_bits: (cluster * l.window() + cluster) as f64 * a,
        compute: cap * (windows as f64 / busy as f64),
        movement: reshape.map_side,
    });
    Ok(lp)
}

/// ReLU runs in place on the producer's outputs before they leave the CAPs.
fn plan_relu(l: &LayerSpec, p: LayerPrecision, hw: &HardwareConfig) -> Result<LayerPlan> {
    let e = l.input.volume();
    let mut lp = base_plan(l, p);
    lp.ops = e as f64;
    if e == 0 {
        return Ok(lp);
    }
    let (steps, busy) = spread(e, hw.usable_rows()?, hw);
    let m = p.activation_bits;
    let cap = expected_trace(&ApOp::Relu { m, l: busy }, hw.variant)?;
    let one = expected_trace(&ApOp::Relu { m, l: 1 }, hw.variant)?;
    lp.fold_factor = steps as u64;
    lp.utilization = occupancy(e, hw.usable_rows()?, steps, hw);
    lp.lane_utilization = e as f64 / (steps * hw.total_lanes()) as f64;
    lp.phases.push(Phase {
        label: "relu".into(),
        category: Category::Relu,
        steps: steps as u64,
        cap_compute: cap,
        cap_movement: EventTrace::default(),
        link_bits: 0.0,
        compute: one * e as f64,
        movement: EventTrace::default(),
    });
    Ok(lp)
}

fn plan_add(l: &LayerSpec, p: LayerPrecision, hw: &HardwareConfig, ic: &InterconnectProfile) -> Result<LayerPlan> {
    let e = l.input.volume();
    let mut lp = base_plan(l, p);
    lp.ops = e as f64;
    if e == 0 {
        return Ok(lp);
    }
    let (steps, busy) = spread(e, hw.usable_rows()?, hw);
    let m = p.activation_bits;
    let cap = expected_trace(&ApOp::Add { m, l: 2 * busy }, hw.variant)?;
    let one = expected_trace(&ApOp::Add { m, l: 2 }, hw.variant)?;
    let reshape = reshape_cost(e, 2 * e, m, ic);
    let cluster = busy * hw.caps_in_cluster();
    lp.fold_factor = steps as u64;
    lp.utilization = occupancy(e, hw.usable_rows()?, steps, hw);
    lp.lane_utilization = e as f64 / (steps * hw.total_lanes()) as f64;
    lp.input_broadcast_bits = 2.0 * e as f64 * m as f64;
    lp.reshape = reshape;
    lp.phases.push(Phase {
        label: "add".into(),
        category: Category::Gemm,
        steps: steps as u64,
        cap_compute: cap,
        cap_movement: EventTrace::default(),
        link_bits: 3.0 * cluster as f64 * m as f64,
        compute: one * e as f64,
        movement: reshape.map_side,
    });
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{Dims, PrecisionConfig};

    fn ic() -> InterconnectProfile {
        InterconnectProfile::default()
    }

    fn tiny_conv() -> ModelSpec {
        let mut m = ModelSpec::empty("tiny");
        m.input = Dims::new(2, 2, 2);
        m.layers.push(LayerSpec::conv("conv", m.input, 2, 2, 1, 0));
        m
    }

    fn precs(m: &ModelSpec, bits: u32) -> Vec<LayerPrecision> {
        PrecisionConfig::fixed(bits).resolve(m).unwrap()
    }

    fn lr(m: &ModelSpec, bits: u32) -> ExecutionPlan {
        plan_lr(m, &precs(m, bits), &HardwareConfig::lr_default(), &ic()).unwrap()
    }

    fn ir(m: &ModelSpec, bits: u32) -> ExecutionPlan {
        plan_ir(m, &precs(m, bits), &HardwareConfig::lr_default(), &ic()).unwrap()
    }

    #[test]
    fn reshape_flits() {
        let z = reshape_cost(0, 0, 8, &ic());
        assert!(z.total().is_empty());
        assert_eq!((z.flits_to_map, z.flits_to_cap), (0, 0));
        let r = reshape_cost(2, 2, 8, &ic());
        assert_eq!((r.flits_to_map, r.flits_to_cap), (1, 1));
        let a = reshape_cost(1000, 1000, 8, &ic());
        let b = reshape_cost(2000, 2000, 8, &ic());
        assert_eq!(b.flits_to_map, 2 * a.flits_to_map);
        assert_eq!(b.total().bits_transferred, 2.0 * a.total().bits_transferred);
    }

    #[test]
    fn tiny_conv_layer_in_one_step() {
        let m = tiny_conv();
        for p in [ir(&m, 8), lr(&m, 8)] {
            let l = &p.layers[0];
            assert_eq!(l.fold_factor, 1);
            let g = l.gemm.as_ref().unwrap();
            assert_eq!((g.r, g.ck, g.n), (8, 2, 1));
            assert_eq!(g.columns_per_step, vec![1]);
        }
    }

    #[test]
    fn miniature_leaves_a_cluster_idle() {
        // Three output columns on 2x2 clusters of one 3-row CAP each.
        let mut m = ModelSpec::empty("mini");
        m.input = Dims::new(1, 3, 2);
        m.layers.push(LayerSpec::conv("conv", m.input, 1, 1, 1, 0));
        let hw = HardwareConfig { clusters: (2, 2), caps_per_cluster: (1, 1), ap_rows: 3, map_rows: 3, ..HardwareConfig::lr_default() };
        let p = plan_lr(&m, &precs(&m, 8), &hw, &ic()).unwrap();
        let g = p.layers[0].gemm.as_ref().unwrap();
        assert_eq!(p.layers[0].fold_factor, 1);
        let busy: Vec<bool> = (0..4).map(|c| g.assignment(0, c).is_some()).collect();
        assert_eq!(busy, [true, true, true, false]);
        assert_eq!(g.assignment(0, 2), Some((0, 2, 1)));
        // Only the three busy clusters load weights and drain outputs.
        assert_eq!(p.layers[0].weight_stream_bits, 3.0 * 2.0 * 8.0);
        assert_eq!(p.layers[0].reshape.out_words, 3);
    }

    #[test]
    fn work_is_conserved() {
        for name in ModelSpec::builtin_names() {
            let m = ModelSpec::builtin(name).unwrap();
            for p in [lr(&m, 8), ir(&m, 8)] {
                for l in p.layers.iter() {
                    assert!(l.fold_factor >= 1);
                    assert!(l.utilization <= 1.0 + 1e-12, "{} {}", name, l.name);
                    if let Some(g) = &l.gemm {
                        let cols: usize = g.columns_per_step.iter().sum();
                        assert_eq!(cols, g.n * g.kernel_chunks, "{} {}", name, l.name);
                        let mut seen = vec![0usize; g.n * g.kernel_chunks];
                        for s in 0..l.fold_factor as usize {
                            for c in 0..g.clusters {
                                if let Some((k, first, count)) = g.assignment(s, c) {
                                    for col in first..first + count {
                                        seen[k * g.n + col] += 1;
                                    }
                                }
                            }
                        }
                        assert!(seen.iter().all(|&x| x == 1), "{} {}", name, l.name);
                    }
                }
            }
        }
    }

    #[test]
    fn ir_never_folds() {
        for name in ModelSpec::builtin_names() {
            let m = ModelSpec::builtin(name).unwrap();
            let p = ir(&m, 8);
            assert!(p.layers.iter().all(|l| l.fold_factor == 1), "{name}");
            assert!(p.layers.iter().all(|l| l.weight_stream_bits == 0.0));
        }
    }

    #[test]
    fn lr_utilization_is_high() {
        for name in ["alexnet", "vgg16", "resnet50"] {
            let m = ModelSpec::builtin(name).unwrap();
            let p = lr(&m, 8);
            let (mut busy, mut avail) = (0.0, 0.0);
            for l in p.layers.iter().filter(|l| l.gemm.is_some()) {
                busy += l.utilization * l.fold_factor as f64;
                avail += l.fold_factor as f64;
            }
            assert!(busy / avail > 0.85, "{name}: {}", busy / avail);
        }
    }

    #[test]
    fn precision_keeps_the_mapping() {
        let m = ModelSpec::builtin("resnet50").unwrap();
        let (a, b) = (lr(&m, 4), lr(&m, 8));
        for (x, y) in a.layers.iter().zip(&b.layers) {
            assert_eq!(x.fold_factor, y.fold_factor);
            assert_eq!(x.gemm.as_ref().map(|g| g.work_items), y.gemm.as_ref().map(|g| g.work_items));
            let steps = |l: &LayerPlan| l.phases.iter().map(|p| p.steps).collect::<Vec<_>>();
            assert_eq!(steps(x), steps(y));
        }
    }

    #[test]
    fn deep_kernels_are_chunked() {
        let m = ModelSpec::builtin("vgg16").unwrap();
        let p = lr(&m, 8);
        let fc6 = p.layers.iter().find(|l| l.name == "fc6").unwrap();
        let g = fc6.gemm.as_ref().unwrap();
        assert!(g.tiling.j_chunks > 1 && g.tiling.chunk_rows <= 4799);
        assert!(fc6.phases.iter().any(|p| p.label == "combine"));
    }

    #[test]
    fn capacity_and_mode_errors() {
        let m = tiny_conv();
        let narrow = HardwareConfig { ap_cols: 8, ..HardwareConfig::lr_default() };
        assert!(matches!(plan_lr(&m, &precs(&m, 8), &narrow, &ic()), Err(Error::Capacity(_))));
        let none = HardwareConfig { clusters: (0, 0), ..HardwareConfig::lr_default() };
        assert!(matches!(plan_lr(&m, &precs(&m, 8), &none, &ic()), Err(Error::Capacity(_))));
        let irhw = HardwareConfig { mode: Mode::Ir, ..HardwareConfig::lr_default() };
        assert!(matches!(plan_lr(&m, &precs(&m, 8), &irhw, &ic()), Err(Error::Config(_))));
    }

    #[test]
    fn plan_serializes() {
        let j = lr(&tiny_conv(), 8).to_json();
        let v: serde_json::Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["layers"][0]["fold_factor"], 1);
    }
}
