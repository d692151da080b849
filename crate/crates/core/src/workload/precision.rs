//! Per-layer precision configurations.
//!
//! A configuration file is either `fixed:N` or one line per configurable
//! layer holding `w_bits a_bits` (a single number sets both). A set file
//! groups several configurations under `config <name> [fixed:N]` headers.

use super::ModelSpec;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPrecision {
    pub weight_bits: u32,
    pub activation_bits: u32,
}

impl LayerPrecision {
    pub fn uniform(bits: u32) -> Self {
        LayerPrecision { weight_bits: bits, activation_bits: bits }
    }

    /// Operand width of the layer's multiplications.
    pub fn operand_bits(&self) -> u32 {
        self.weight_bits.max(self.activation_bits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PrecisionConfig {
    Fixed(u32),
    PerLayer(Vec<LayerPrecision>),
}

const MAX_BITS: u32 = 16;

fn check_bits(b: u32) -> Result<u32> {
    if (1..=MAX_BITS).contains(&b) {
        Ok(b)
    } else {
        Err(Error::Validation(format!("bitwidth {b} outside 1..={MAX_BITS}")))
    }
}

impl PrecisionConfig {
    pub fn fixed(bits: u32) -> Self {
        PrecisionConfig::Fixed(bits)
    }

    pub fn uniform_list(bits: &[u32]) -> Self {
        PrecisionConfig::PerLayer(bits.iter().map(|&b| LayerPrecision::uniform(b)).collect())
    }

    /// Short name for reports: `fixed:N` or `layers:<average>`.
    pub fn label(&self) -> String {
        match self {
            PrecisionConfig::Fixed(b) => format!("fixed:{b}"),
            PrecisionConfig::PerLayer(_) => format!("layers:{:.2}", average_precision(self).unwrap_or(0.0)),
        }
    }

    /// Parses `fixed:N` or a per-layer list.
    pub fn parse(text: &str) -> Result<Self> {
        let mut list = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: ln + 1, msg };
            if let Some(n) = line.strip_prefix("fixed:") {
                if !list.is_empty() {
                    return Err(perr("fixed: cannot follow per-layer entries".into()));
                }
                let b = n.trim().parse().map_err(|_| perr(format!("bad width {n}")))?;
                return Ok(PrecisionConfig::Fixed(check_bits(b)?));
            }
            let nums: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| perr(format!("bad width {t}"))))
                .collect::<Result<_>>()?;
            let p = match nums.as_slice() {
                [b] => LayerPrecision::uniform(check_bits(*b)?),
                [w, a] => LayerPrecision { weight_bits: check_bits(*w)?, activation_bits: check_bits(*a)? },
                _ => return Err(perr("expected `w a` or a single width".into())),
            };
            list.push(p);
        }
        if list.is_empty() {
            return Err(Error::Validation("empty precision configuration".into()));
        }
        Ok(PrecisionConfig::PerLayer(list))
    }

    pub fn to_text(&self) -> String {
        match self {
            PrecisionConfig::Fixed(b) => format!("fixed:{b}\n"),
            PrecisionConfig::PerLayer(v) => v.iter().map(|p| format!("{} {}\n", p.weight_bits, p.activation_bits)).collect(),
        }
    }

    /// Precision of every layer of `model`. Configurable layers take the
    /// entries in order, pinned layers keep their width, and the remaining
    /// layers inherit the activation width of their producer.
    pub fn resolve(&self, model: &ModelSpec) -> Result<Vec<LayerPrecision>> {
        let n_cfg = model.configurable().count();
        if let PrecisionConfig::PerLayer(v) = self {
            if v.len() != n_cfg {
                return Err(Error::Validation(format!(
                    "{} precision entries for {} configurable layers of {}",
                    v.len(),
                    n_cfg,
                    model.name
                )));
            }
        }
        let mut next = 0;
        let mut out: Vec<LayerPrecision> = Vec::with_capacity(model.layers.len());
        for (i, l) in model.layers.iter().enumerate() {
            let p = if let Some(b) = l.bits {
                LayerPrecision::uniform(check_bits(b)?)
            } else if l.kind.is_gemm() {
                next += 1;
                match self {
                    PrecisionConfig::Fixed(b) => LayerPrecision::uniform(check_bits(*b)?),
                    PrecisionConfig::PerLayer(v) => v[next - 1],
                }
            } else {
                let a = model.producer(i).map_or_else(
                    || match self {
                        PrecisionConfig::Fixed(b) => *b,
                        PrecisionConfig::PerLayer(v) => v[0].activation_bits,
                    },
                    |p| out[p].activation_bits,
                );
                LayerPrecision::uniform(a)
            };
            out.push(p);
        }
        Ok(out)
    }
}

/// Unweighted mean width over the configuration's entries.
pub fn average_precision(config: &PrecisionConfig) -> Result<f64> {
    match config {
        PrecisionConfig::Fixed(b) => Ok(*b as f64),
        PrecisionConfig::PerLayer(v) if v.is_empty() => Err(Error::Validation("empty precision configuration".into())),
        PrecisionConfig::PerLayer(v) => {
            Ok(v.iter().map(|p| (p.weight_bits + p.activation_bits) as f64 / 2.0).sum::<f64>() / v.len() as f64)
        }
    }
}

/// Named configurations, in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionSet {
    pub configs: Vec<(String, PrecisionConfig)>,
}

const MIXED_SET: &str = include_str!("../../data/precision/resnet18_mixed.txt");

impl PrecisionSet {
    /// The five ResNet18 configurations: int4, high, medium, low, int8.
    pub fn resnet18_mixed() -> Self {
        Self::parse(MIXED_SET).expect("bundled precision set")
    }

    pub fn get(&self, name: &str) -> Option<&PrecisionConfig> {
        self.configs.iter().find(|c| c.0 == name).map(|c| &c.1)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut configs = Vec::new();
        let mut cur: Option<(String, String, usize)> = None;
        let flush = |cur: &mut Option<(String, String, usize)>, configs: &mut Vec<(String, PrecisionConfig)>| -> Result<()> {
            if let Some((name, body, line)) = cur.take() {
                let cfg = PrecisionConfig::parse(&body).map_err(|e| match e {
                    Error::Parse { line: l, msg } => Error::Parse { line: line + l, msg },
                    e => e,
                })?;
                configs.push((name, cfg));
            }
            Ok(())
        };
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if let Some(rest) = line.strip_prefix("config ") {
                flush(&mut cur, &mut configs)?;
                let mut it = rest.split_whitespace();
                let name = it.next().unwrap_or_default().to_string();
                let body = it.collect::<Vec<_>>().join(" ");
                cur = Some((name, body + "\n", ln + 1));
            } else if let Some(c) = cur.as_mut() {
                c.1 += line;
                c.1.push('\n');
            } else if !line.is_empty() {
                cur = Some(("default".into(), format!("{line}\n"), ln));
            }
        }
        flush(&mut cur, &mut configs)?;
        if configs.is_empty() {
            return Err(Error::Validation("no configurations".into()));
        }
        Ok(PrecisionSet { configs })
    }
}
