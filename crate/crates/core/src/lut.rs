//! Truth-table LUT programs. A program lists every input pattern of a small
//! group of bit fields, the pass (if any) that rewrites it and the resulting
//! output bits. The executable pass list is derived from the table: each
//! numbered row becomes one compare stage on its input pattern followed by
//! one write stage over the bits that change.

use crate::bits::Bits;
use crate::cam::{CamArray, KeyMask};
use crate::error::{Error, Result};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassTag {
    Pass(u32),
    /// No change.
    NC,
    /// Not possible.
    NP,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LutRow {
    pub input: Vec<bool>,
    pub tag: PassTag,
    pub output: Vec<bool>,
}

/// One executable compare/write pair. Indices refer to the program inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pass {
    pub matches: Vec<bool>,
    pub writes: Vec<(usize, bool)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LutProgram {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub rows: Vec<LutRow>,
}

impl LutProgram {
    /// In-place full adder over (C, A, B): B <- A xor B xor C, C <- carry.
    pub fn full_adder() -> Self {
        Self::parse(FULL_ADDER).expect("builtin full adder")
    }

    /// ReLU clear pass over (A, F) with F holding the word's sign.
    pub fn relu() -> Self {
        Self::parse(RELU).expect("builtin relu")
    }

    /// MSB-first max of A and B into B, tracked by two flag bits.
    /// Flags 00 undecided, 01 A larger (B copies A), 11 B larger.
    pub fn max_pool() -> Self {
        Self::parse(MAX_POOL).expect("builtin max pool")
    }

    fn output_index(&self) -> Vec<usize> {
        self.outputs
            .iter()
            .map(|o| self.inputs.iter().position(|i| i == o).expect("validated"))
            .collect()
    }

    /// Executable passes in order.
    pub fn passes(&self) -> Vec<Pass> {
        let outs = self.output_index();
        let mut numbered: Vec<(u32, &LutRow)> = self
            .rows
            .iter()
            .filter_map(|r| match r.tag {
                PassTag::Pass(n) => Some((n, r)),
                _ => None,
            })
            .collect();
        numbered.sort_by_key(|p| p.0);
        numbered
            .into_iter()
            .map(|(_, r)| Pass {
                matches: r.input.clone(),
                writes: outs
                    .iter()
                    .zip(&r.output)
                    .filter(|(&i, &o)| r.input[i] != o)
                    .map(|(&i, &o)| (i, o))
                    .collect(),
            })
            .collect()
    }

    /// Runs the pass list on a single state vector.
    pub fn apply_state(&self, state: &mut [bool]) {
        for p in self.passes() {
            if p.matches.as_slice() == &state[..] {
                for &(i, b) in &p.writes {
                    state[i] = b;
                }
            }
        }
    }

    /// Checks that sequential execution of the passes produces the declared
    /// output for every possible row, and that every pattern appears once.
    pub fn verify(&self) -> Result<()> {
        let n = self.inputs.len();
        let mut seen = vec![false; 1 << n];
        for r in &self.rows {
            let idx = r.input.iter().enumerate().fold(0, |a, (i, &b)| a | (b as usize) << i);
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::Validation(format!("{}: duplicate pattern", self.name)));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Validation(format!("{}: table is not exhaustive", self.name)));
        }
        let outs = self.output_index();
        for r in self.rows.iter().filter(|r| r.tag != PassTag::NP) {
            let mut s = r.input.clone();
            self.apply_state(&mut s);
            let got: Vec<bool> = outs.iter().map(|&i| s[i]).collect();
            if got != r.output {
                return Err(Error::Validation(format!("{}: row {} yields {}", self.name, pat(&r.input), pat(&got))));
            }
            for (i, (&a, &b)) in r.input.iter().zip(&s).enumerate() {
                if a != b && !outs.contains(&i) {
                    return Err(Error::Validation(format!("{}: pass writes non-output {}", self.name, self.inputs[i])));
                }
            }
        }
        Ok(())
    }

    /// Expected cells written per application of the whole pass list when
    /// the input bits are independent and uniform. `guard_bits` extra key
    /// bits each halve the match probability.
    pub fn expected_writes(&self, guard_bits: u32) -> f64 {
        let k = self.inputs.len() as i32 + guard_bits as i32;
        self.passes().iter().map(|p| p.writes.len() as f64).sum::<f64>() * 2f64.powi(-k)
    }

    /// Executes every pass horizontally. `cols[i]` is the column bound to
    /// input `i`; `guard` adds fixed key bits to every compare.
    pub fn run(&self, array: &mut CamArray, cols: &[usize], guard: &[(usize, bool)]) -> Result<()> {
        if cols.len() != self.inputs.len() {
            return Err(Error::Usage(format!("{} expects {} columns", self.name, self.inputs.len())));
        }
        for p in self.passes() {
            let key = KeyMask::horizontal(
                cols.iter().copied().zip(p.matches.iter().copied()).chain(guard.iter().copied()),
            );
            let tags = array.compare(&key)?;
            let wr = KeyMask::horizontal(p.writes.iter().map(|&(i, b)| (cols[i], b)));
            write_or_noop(array, &wr, &tags)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut inputs = None;
        let mut outputs = None;
        let mut rows = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse { line: ln + 1, msg: msg.to_string() };
            let mut it = line.split_whitespace();
            let head = it.next().unwrap_or_default();
            match head {
                "lut" => name = Some(it.collect::<Vec<_>>().join(" ")),
                "inputs" => inputs = Some(it.map(String::from).collect::<Vec<_>>()),
                "outputs" => outputs = Some(it.map(String::from).collect::<Vec<_>>()),
                _ => {
                    let ni = inputs.as_ref().ok_or_else(|| err("row before inputs"))?.len();
                    let no = outputs.as_ref().ok_or_else(|| err("row before outputs"))?.len();
                    let input = Bits::parse(head).filter(|b| b.len() == ni).ok_or_else(|| err("bad input pattern"))?;
                    let tag = match it.next() {
                        Some("NC") => PassTag::NC,
                        Some("NP") => PassTag::NP,
                        Some(t) => PassTag::Pass(t.parse().map_err(|_| err("bad pass tag"))?),
                        None => return Err(err("missing pass tag")),
                    };
                    let output = it
                        .next()
                        .and_then(Bits::parse)
                        .filter(|b| b.len() == no)
                        .ok_or_else(|| err("bad output pattern"))?;
                    rows.push(LutRow { input: input.to_bools(), tag, output: output.to_bools() });
                }
            }
        }
        let p = LutProgram {
            name: name.ok_or(Error::Parse { line: 0, msg: "missing lut name".into() })?,
            inputs: inputs.unwrap_or_default(),
            outputs: outputs.unwrap_or_default(),
            rows,
        };
        if let Some(o) = p.outputs.iter().find(|o| !p.inputs.contains(o)) {
            return Err(Error::Parse { line: 0, msg: format!("output {o} is not an input") });
        }
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lut {}", self.name);
        let _ = writeln!(s, "inputs {}", self.inputs.join(" "));
        let _ = writeln!(s, "outputs {}", self.outputs.join(" "));
        for r in &self.rows {
            let tag = match r.tag {
                PassTag::Pass(n) => n.to_string(),
                PassTag::NC => "NC".into(),
                PassTag::NP => "NP".into(),
            };
            let _ = writeln!(s, "{} {} {}", pat(&r.input), tag, pat(&r.output));
        }
        s
    }
}

/// A pass whose write pattern is empty still occupies its write stage.
pub(crate) fn write_or_noop(array: &mut CamArray, km: &KeyMask, tags: &Bits) -> Result<()> {
    if km.is_empty() {
        array.charge(crate::trace::EventTrace::write(0.0));
        Ok(())
    } else {
        array.selective_write(km, tags)
    }
}

fn pat(v: &[bool]) -> String {
    v.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

const FULL_ADDER: &str = "\
lut full-adder
inputs C A B
outputs C B
011 1 10
010 2 01
100 3 01
101 4 10
000 NC 00
001 NC 01
110 NC 10
111 NC 11
";

const RELU: &str = "\
lut relu
inputs A F
outputs A
10 NC 1
01 NC 0
11 1 0
00 NC 0
";

const MAX_POOL: &str = "\
lut max-pool
inputs A B F1 F2
outputs B F1 F2
1010 NP 010
0110 NP 110
1110 NP 110
0010 NP 010
1000 1 101
0100 2 111
1100 NC 100
0000 NC 000
1011 NC 011
0111 NC 111
1111 NC 111
0011 NC 011
1001 3 101
0101 4 001
1101 NC 101
0001 NC 001
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_verify() {
        for p in [LutProgram::full_adder(), LutProgram::relu(), LutProgram::max_pool()] {
            p.verify().unwrap();
        }
    }

    #[test]
    fn pass_counts() {
        assert_eq!(LutProgram::full_adder().passes().len(), 4);
        assert_eq!(LutProgram::relu().passes().len(), 1);
        assert_eq!(LutProgram::max_pool().passes().len(), 4);
    }

    #[test]
    fn full_adder_truth() {
        let p = LutProgram::full_adder();
        for v in 0..8u32 {
            let (c, a, b) = (v & 1 == 1, v & 2 == 2, v & 4 == 4);
            let mut s = [c, a, b];
            p.apply_state(&mut s);
            let sum = c as u32 + a as u32 + b as u32;
            assert_eq!(s[2], sum & 1 == 1);
            assert_eq!(s[0], sum >= 2);
            assert_eq!(s[1], a);
        }
    }

    #[test]
    fn relu_pass_clears_flagged_bit() {
        let p = LutProgram::relu().passes();
        assert_eq!(p[0].matches, vec![true, true]);
        assert_eq!(p[0].writes, vec![(0, false)]);
    }

    #[test]
    fn text_roundtrip() {
        let p = LutProgram::max_pool();
        assert_eq!(LutProgram::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn verify_catches_wrong_output() {
        // running 101 before 100 lets the first pass feed the second
        let bad = FULL_ADDER.replace("100 3 01", "100 4 01").replace("101 4 10", "101 3 10");
        assert!(LutProgram::parse(&bad).unwrap().verify().is_err());
    }

    #[test]
    fn expected_writes_full_adder() {
        // 2 + 1 + 2 + 1 changed bits over 8 patterns
        assert!((LutProgram::full_adder().expected_writes(0) - 0.75).abs() < 1e-12);
    }
}
