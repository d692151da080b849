use anyhow::{bail, Context, Result};
use apsim::mapper::{HardwareConfig, Mode};
use apsim::ops::emulate_random;
use apsim::sim::{
    evaluate_mixed_precision, load_model, load_tech, peak_metrics, precision_values, sig6, simulate, sweep, write_csv,
    write_json, SweepSpec,
};
use apsim::tech::{ClockProfile, InterconnectProfile, TechProfile};
use apsim::workload::{PrecisionConfig, PrecisionSet};
use apsim::{ApOp, ApVariant, Error};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "apsim", version, about = "Associative processor CNN inference simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cost one inference of a model.
    Run {
        #[arg(long, default_value = "vgg16")]
        model: String,
        /// Bit count, `fixed:N` or a per-layer precision file.
        #[arg(long, default_value = "8")]
        precision: String,
        #[arg(long, default_value = "lr")]
        hw: Mode,
        #[arg(long, default_value = "sram16nm")]
        tech: String,
        #[arg(long)]
        voltage: Option<f64>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Sweep the design space and write one row per point.
    Sweep {
        /// `name=v1,v2` with name one of model, hw, tech, voltage, precision.
        #[arg(long = "axis")]
        axes: Vec<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Peak GOPS and GOPS/W of convolution on the LR accelerator.
    Peak {
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        bits: Vec<u32>,
        #[arg(long, default_value = "sram16nm")]
        tech: String,
    },
    /// Run an operation on the functional emulator with random operands.
    Emulate {
        #[arg(long, value_enum)]
        op: OpKind,
        #[arg(long, default_value_t = 8)]
        m: u32,
        /// Words (add and multiply take l/2 pairs).
        #[arg(long, default_value_t = 8)]
        l: usize,
        /// Pooling window.
        #[arg(long, default_value_t = 4)]
        s: usize,
        /// Pooling windows.
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        i: usize,
        #[arg(long, default_value_t = 2)]
        j: usize,
        #[arg(long, default_value_t = 2)]
        u: usize,
        #[arg(long, default_value = "2d")]
        variant: ApVariant,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
    },
    /// Mixed-precision study against 8-bit inference.
    Mixed {
        #[arg(long, default_value = "resnet18")]
        model: String,
        /// Precision set file; defaults to the bundled ResNet18 set.
        #[arg(long)]
        configs: Option<std::path::PathBuf>,
        #[arg(long, default_value = "sram16nm")]
        tech: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpKind {
    Add,
    Multiply,
    Reduce,
    Matmat,
    Relu,
    Maxpool,
    Avgpool,
}

fn tech_at(name: &str, voltage: Option<f64>) -> Result<TechProfile> {
    let t = load_tech(name)?;
    Ok(match voltage {
        Some(v) => t.apply_voltage(v)?,
        None => t,
    })
}

fn one_precision(arg: &str) -> Result<PrecisionConfig> {
    let mut v = precision_values(arg)?;
    if v.len() != 1 {
        bail!("--precision takes a single configuration, got {}", v.len());
    }
    Ok(v.remove(0))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            // Broken identities in a report are invariant violations too.
            match e.downcast_ref::<Error>() {
                Some(Error::Validation(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let (ic, clock) = (InterconnectProfile::default(), ClockProfile::default());
    let base = HardwareConfig::lr_default();
    match cli.cmd {
        Cmd::Run { model, precision, hw, tech, voltage, json } => {
            let m = load_model(&model)?;
            let p = one_precision(&precision)?;
            let t = tech_at(&tech, voltage)?;
            let r = simulate(&m, &p, &HardwareConfig { mode: hw, ..base }, &t, &ic, &clock)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!("model      {} ({}, {}, {})", r.model, r.mode, r.tech, r.precision);
                println!("energy     {} J", sig6(r.energy_j));
                println!("latency    {} s", sig6(r.latency_s));
                println!("area       {} mm2", sig6(r.area_mm2));
                println!("GOPS       {}", sig6(r.gops));
                println!("GOPS/W     {}", sig6(r.gops_per_w));
                println!("GOPS/W/mm2 {}", sig6(r.gops_per_w_per_mm2));
                println!("EDP        {} J*s", sig6(r.edp_js));
                let (e, l) = (r.energy_share, r.latency_share);
                println!("energy share   gemm {:.4} pool {:.4} relu {:.4} move {:.4}", e.gemm, e.pooling, e.relu, e.data_movement);
                println!("latency share  gemm {:.4} pool {:.4} relu {:.4} move {:.4}", l.gemm, l.pooling, l.relu, l.data_movement);
            }
            Ok(true)
        }
        Cmd::Sweep { axes, format, out } => {
            let mut spec = SweepSpec::default();
            for a in &axes {
                spec.set_axis(a)?;
            }
            let rows = sweep(&spec, &base, &ic, &clock)?;
            let w: Box<dyn Write> = match &out {
                Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
                None => Box::new(std::io::stdout().lock()),
            };
            match format {
                Format::Csv => write_csv(w, &rows)?,
                Format::Json => write_json(w, &rows)?,
            }
            Ok(true)
        }
        Cmd::Peak { bits, tech } => {
            let t = load_tech(&tech)?;
            println!("bits,gops,gops_per_w");
            for b in bits {
                let p = peak_metrics(b, &base, &t, &ic, &clock)?;
                println!("{},{},{}", p.bits, sig6(p.gops), sig6(p.gops_per_w));
            }
            Ok(true)
        }
        Cmd::Emulate { op, m, l, s, k, i, j, u, variant, seed, trials } => {
            let op = match op {
                OpKind::Add => ApOp::Add { m, l },
                OpKind::Multiply => ApOp::Multiply { m, l },
                OpKind::Reduce => ApOp::Reduce { m, l },
                OpKind::Matmat => ApOp::MatMat { m, i, j, u },
                OpKind::Relu => ApOp::Relu { m, l },
                OpKind::Maxpool => ApOp::MaxPool { m, s, k },
                OpKind::Avgpool => ApOp::AvgPool { m, s, k },
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ok = true;
            for t in 0..trials.max(1) {
                let e = emulate_random(&op, variant, &mut rng)?;
                let tr = &e.result.trace;
                println!(
                    "trial {t}: values {} cycles {} (closed form {}) compares {} writes {} cells written {}",
                    if e.values_match() { "ok" } else { "MISMATCH" },
                    tr.stages(),
                    e.result.analytic_cycles,
                    tr.n_compare,
                    tr.n_write,
                    tr.cells_written,
                );
                if !e.ok() {
                    eprintln!("expected {:?}\n     got {:?}", e.expected, e.result.values);
                    ok = false;
                }
            }
            Ok(ok)
        }
        Cmd::Mixed { model, configs, tech } => {
            let m = load_model(&model)?;
            let set = match configs {
                Some(p) => PrecisionSet::parse(&std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => PrecisionSet::resnet18_mixed(),
            };
            let t = load_tech(&tech)?;
            let rows = evaluate_mixed_precision(&m, &set, &base, &t, &ic, &clock)?;
            println!("config,avg_bits,energy_j,latency_s,edp_js,energy_factor,latency_norm,edp_ratio");
            for r in rows {
                println!(
                    "{},{:.2},{},{},{},{:.4},{:.4},{:.4}",
                    r.name,
                    r.avg_bits,
                    sig6(r.energy_j),
                    sig6(r.latency_s),
                    sig6(r.edp_js),
                    r.energy_factor,
                    r.latency_norm,
                    r.edp_ratio
                );
            }
            Ok(true)
        }
    }
}
