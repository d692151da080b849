//! CNN layer shapes, im2col dimensions, MAC accounting and per-layer
//! precision configurations.
//!
//! Model file format, one record per line:
//!
//! ```text
//! model vgg16
//! input 224x224x3
//! conv name=conv1_1 in=224x224x3 k=3x3 out=64 stride=1 pad=1
//! relu name=relu1_1 in=224x224x64
//! maxpool name=pool1 in=224x224x64 k=2x2 stride=2 pad=0
//! fc name=fc6 in=7x7x512 out=4096
//! add name=b1.add in=56x56x64 from=b1.conv2 skip=pool1
//! ```
//!
//! A layer reads the output of the previous record unless `from=` names
//! another layer. `bits=N` pins a layer's precision so that precision
//! configurations skip it.

mod precision;

pub use precision::{average_precision, LayerPrecision, PrecisionConfig, PrecisionSet};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    Fc,
    MaxPool,
    AvgPool,
    Relu,
    ResidualAdd,
}

impl LayerKind {
    fn keyword(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Fc => "fc",
            LayerKind::MaxPool => "maxpool",
            LayerKind::AvgPool => "avgpool",
            LayerKind::Relu => "relu",
            LayerKind::ResidualAdd => "add",
        }
    }

    pub fn is_gemm(self) -> bool {
        matches!(self, LayerKind::Conv | LayerKind::Fc)
    }
}

/// Height, width, channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Dims {
    pub const fn new(h: usize, w: usize, c: usize) -> Self {
        Dims { h, w, c }
    }

    pub fn volume(&self) -> usize {
        self.h * self.w * self.c
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub input: Dims,
    /// Kernel or pooling window height and width.
    pub kernel: (usize, usize),
    /// Output channels for conv, output features for fc.
    pub out: usize,
    pub stride: usize,
    pub pad: usize,
    /// Producer of the main input; `None` means the previous layer.
    pub from: Option<String>,
    /// Second operand of a residual add.
    pub skip: Option<String>,
    /// Precision pinned by the model file.
    pub bits: Option<u32>,
}

impl LayerSpec {
    pub fn conv(name: &str, input: Dims, k: usize, out: usize, stride: usize, pad: usize) -> Self {
        LayerSpec {
            name: name.into(),
            kind: LayerKind::Conv,
            input,
            kernel: (k, k),
            out,
            stride,
            pad,
            from: None,
            skip: None,
            bits: None,
        }
    }

    pub fn fc(name: &str, input: Dims, out: usize) -> Self {
        LayerSpec { kind: LayerKind::Fc, kernel: (1, 1), ..Self::conv(name, input, 1, out, 1, 0) }
    }

    pub fn pool(name: &str, kind: LayerKind, input: Dims, z: usize, stride: usize, pad: usize) -> Self {
        LayerSpec { kind, kernel: (z, z), out: input.c, ..Self::conv(name, input, z, input.c, stride, pad) }
    }

    pub fn elementwise(name: &str, kind: LayerKind, input: Dims) -> Self {
        LayerSpec { kind, kernel: (1, 1), out: input.c, ..Self::conv(name, input, 1, input.c, 1, 0) }
    }

    /// Output dimensions. Sliding windows use the floor convention; an
    /// empty output or a zero stride is a shape error.
    pub fn output(&self) -> Result<Dims> {
        match self.kind {
            LayerKind::Fc => Ok(Dims::new(1, 1, self.out)),
            LayerKind::Relu | LayerKind::ResidualAdd => Ok(self.input),
            LayerKind::Conv | LayerKind::MaxPool | LayerKind::AvgPool => {
                let span = |n: usize, k: usize| -> Result<usize> {
                    if self.stride == 0 || n + 2 * self.pad < k {
                        return Err(Error::Shape(format!("{}: window {k} does not fit input {n}", self.name)));
                    }
                    Ok((n + 2 * self.pad - k) / self.stride + 1)
                };
                let c = if self.kind == LayerKind::Conv { self.out } else { self.input.c };
                Ok(Dims::new(span(self.input.h, self.kernel.0)?, span(self.input.w, self.kernel.1)?, c))
            }
        }
    }

    /// Pooling window size in elements.
    pub fn window(&self) -> usize {
        self.kernel.0 * self.kernel.1
    }

    pub fn weight_count(&self) -> usize {
        match self.kind {
            LayerKind::Conv => self.kernel.0 * self.kernel.1 * self.input.c * self.out,
            LayerKind::Fc => self.input.volume() * self.out,
            _ => 0,
        }
    }

    fn to_record(&self) -> String {
        let mut s = format!("{} name={} in={}", self.kind.keyword(), self.name, self.input);
        match self.kind {
            LayerKind::Conv => {
                s += &format!(" k={}x{} out={} stride={} pad={}", self.kernel.0, self.kernel.1, self.out, self.stride, self.pad)
            }
            LayerKind::MaxPool | LayerKind::AvgPool => {
                s += &format!(" k={}x{} stride={} pad={}", self.kernel.0, self.kernel.1, self.stride, self.pad)
            }
            LayerKind::Fc => s += &format!(" out={}", self.out),
            _ => {}
        }
        if let Some(b) = self.bits {
            s += &format!(" bits={b}");
        }
        if let Some(f) = &self.from {
            s += &format!(" from={f}");
        }
        if let Some(k) = &self.skip {
            s += &format!(" skip={k}");
        }
        s
    }
}

/// GEMM view of a conv or fc layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Im2col {
    /// Patch matrix: (H_K W_K C_I) x (H_O W_O).
    pub p: (usize, usize),
    /// Kernel matrix: C_K x (H_K W_K C_I).
    pub k: (usize, usize),
    /// Output matrix: C_K x (H_O W_O).
    pub o: (usize, usize),
}

/// Matrix shapes of the GEMM a conv or fc layer becomes.
pub fn im2col_dims(layer: &LayerSpec) -> Result<Im2col> {
    let out = layer.output()?;
    let (r, n) = match layer.kind {
        LayerKind::Conv => (layer.kernel.0 * layer.kernel.1 * layer.input.c, out.h * out.w),
        LayerKind::Fc => (layer.input.volume(), 1),
        _ => return Err(Error::Shape(format!("{} is not a conv or fc layer", layer.name))),
    };
    let ck = layer.out;
    Ok(Im2col { p: (r, n), k: (ck, r), o: (ck, n) })
}

pub fn macs_of(layer: &LayerSpec) -> u64 {
    im2col_dims(layer).map_or(0, |g| (g.k.0 * g.k.1 * g.p.1) as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub input: Dims,
    pub layers: Vec<LayerSpec>,
}

pub fn total_macs(model: &ModelSpec) -> u64 {
    model.layers.iter().map(macs_of).sum()
}

const ALEXNET: &str = include_str!("../../data/models/alexnet.txt");
const VGG16: &str = include_str!("../../data/models/vgg16.txt");
const RESNET50: &str = include_str!("../../data/models/resnet50.txt");
const RESNET18: &str = include_str!("../../data/models/resnet18.txt");

impl ModelSpec {
    pub fn empty(name: &str) -> Self {
        ModelSpec { name: name.into(), input: Dims::new(0, 0, 0), layers: Vec::new() }
    }

    /// One of the bundled models: alexnet, vgg16, resnet50, resnet18.
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name.to_ascii_lowercase().as_str() {
            "alexnet" => ALEXNET,
            "vgg16" => VGG16,
            "resnet50" => RESNET50,
            "resnet18" => RESNET18,
            _ => return Err(Error::Config(format!("no bundled model named {name}"))),
        };
        Self::parse(text)
    }

    pub fn builtin_names() -> [&'static str; 4] {
        ["alexnet", "vgg16", "resnet50", "resnet18"]
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::weight_count).sum()
    }

    /// Index of the layer that produces `layer`'s main input, if any.
    pub fn producer(&self, idx: usize) -> Option<usize> {
        match &self.layers[idx].from {
            Some(n) => self.layers.iter().position(|l| &l.name == n),
            None => idx.checked_sub(1),
        }
    }

    /// Layers whose precision comes from a configuration: conv and fc
    /// layers without a pinned width.
    pub fn configurable(&self) -> impl Iterator<Item = (usize, &LayerSpec)> {
        self.layers.iter().enumerate().filter(|(_, l)| l.kind.is_gemm() && l.bits.is_none())
    }

    /// Checks names, references and that every layer's input matches its
    /// producer's output.
    pub fn validate(&self) -> Result<()> {
        let mut out: HashMap<&str, Dims> = HashMap::new();
        let mut prev = self.input;
        for l in &self.layers {
            if out.contains_key(l.name.as_str()) {
                return Err(Error::Shape(format!("duplicate layer name {}", l.name)));
            }
            let src = match &l.from {
                Some(n) => *out.get(n.as_str()).ok_or_else(|| Error::Shape(format!("{}: unknown input {n}", l.name)))?,
                None => prev,
            };
            if src != l.input {
                return Err(Error::Shape(format!("{}: input {} but producer gives {}", l.name, l.input, src)));
            }
            if let Some(k) = &l.skip {
                let d = out.get(k.as_str()).ok_or_else(|| Error::Shape(format!("{}: unknown skip {k}", l.name)))?;
                if *d != l.input {
                    return Err(Error::Shape(format!("{}: skip {k} is {d}, expected {}", l.name, l.input)));
                }
            } else if l.kind == LayerKind::ResidualAdd {
                return Err(Error::Shape(format!("{}: residual add needs skip=", l.name)));
            }
            let o = l.output()?;
            out.insert(&l.name, o);
            prev = o;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = ModelSpec::empty("");
        let mut have_input = false;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: ln + 1, msg };
            let mut it = line.split_whitespace();
            let head = it.next().unwrap_or_default();
            match head {
                "model" => m.name = it.next().ok_or_else(|| perr("missing model name".into()))?.to_string(),
                "input" => {
                    m.input = parse_dims(it.next().unwrap_or("")).ok_or_else(|| perr("bad input dims".into()))?;
                    have_input = true;
                }
                _ => {
                    let kind = match head {
                        "conv" => LayerKind::Conv,
                        "fc" => LayerKind::Fc,
                        "maxpool" => LayerKind::MaxPool,
                        "avgpool" => LayerKind::AvgPool,
                        "relu" => LayerKind::Relu,
                        "add" => LayerKind::ResidualAdd,
                        _ => return Err(perr(format!("unknown record {head}"))),
                    };
                    let mut kv = HashMap::new();
                    for tok in it {
                        let (k, v) = tok.split_once('=').ok_or_else(|| perr(format!("expected key=value, got {tok}")))?;
                        kv.insert(k, v);
                    }
                    let num = |k: &str, default: Option<usize>| -> Result<usize> {
                        match kv.get(k) {
                            Some(v) => v.parse().map_err(|_| perr(format!("bad {k}={v}"))),
                            None => default.ok_or_else(|| perr(format!("missing {k}="))),
                        }
                    };
                    let name = kv.get("name").map_or_else(|| format!("layer{}", m.layers.len()), |s| s.to_string());
                    let input = match kv.get("in") {
                        Some(s) => parse_dims(s).ok_or_else(|| perr(format!("bad in={s}")))?,
                        None => return Err(perr("missing in=".into())),
                    };
                    let kernel = match kv.get("k") {
                        Some(s) => {
                            let (a, b) = s.split_once('x').ok_or_else(|| perr(format!("bad k={s}")))?;
                            (a.parse().map_err(|_| perr(format!("bad k={s}")))?, b.parse().map_err(|_| perr(format!("bad k={s}")))?)
                        }
                        None if matches!(kind, LayerKind::Conv | LayerKind::MaxPool | LayerKind::AvgPool) => {
                            return Err(perr("missing k=".into()))
                        }
                        None => (1, 1),
                    };
                    let out = match kind {
                        LayerKind::Conv | LayerKind::Fc => num("out", None)?,
                        _ => input.c,
                    };
                    let bits = match kv.get("bits") {
                        Some(b) => Some(b.parse::<u32>().map_err(|_| perr(format!("bad bits={b}")))?),
                        None => None,
                    };
                    m.layers.push(LayerSpec {
                        name,
                        kind,
                        input,
                        kernel,
                        out,
                        stride: num("stride", Some(1))?,
                        pad: num("pad", Some(0))?,
                        from: kv.get("from").map(|s| s.to_string()),
                        skip: kv.get("skip").map(|s| s.to_string()),
                        bits,
                    });
                }
            }
        }
        if !have_input {
            m.input = m.layers.first().map_or(Dims::new(0, 0, 0), |l| l.input);
        }
        m.validate()?;
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("model {}\ninput {}\n", self.name, self.input);
        for l in &self.layers {
            s += &l.to_record();
            s.push('\n');
        }
        s
    }
}

fn parse_dims(s: &str) -> Option<Dims> {
    let v: Vec<usize> = s.split('x').map(|p| p.parse().ok()).collect::<Option<_>>()?;
    match v.as_slice() {
        [h, w, c] => Some(Dims::new(*h, *w, *c)),
        _ => None,
    }
}
