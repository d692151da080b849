//! Random operands, brute-force reference results and the combined
//! emulate-and-check used by the command line and the examples.

use super::{avg_pool, inplace_add, matmat, max_pool, multiply, reduce, relu, ApOp, ApVariant, OpResult};
use crate::error::Result;
use rand::Rng;
use serde::Serialize;

/// One functional run next to its reference result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Emulation {
    pub op: ApOp,
    pub variant: ApVariant,
    pub result: OpResult,
    pub expected: Vec<u64>,
}

impl Emulation {
    pub fn values_match(&self) -> bool {
        self.result.values == self.expected
    }

    pub fn cycles_match(&self) -> bool {
        self.result.cycles_agree()
    }

    pub fn ok(&self) -> bool {
        self.values_match() && self.cycles_match()
    }
}

fn words<R: Rng>(rng: &mut R, n: usize, m: u32) -> Vec<u64> {
    (0..n).map(|_| rng.gen_range(0..1u64 << m)).collect()
}

/// Runs `op` on uniformly random `m`-bit operands and computes the
/// expected values directly. `Add` and `Multiply` take `l / 2` operand
/// pairs; pooling needs a power-of-two window.
pub fn emulate_random<R: Rng>(op: &ApOp, variant: ApVariant, rng: &mut R) -> Result<Emulation> {
    let (result, expected) = match *op {
        ApOp::Add { m, l } | ApOp::Multiply { m, l } => {
            let n = (l / 2).max(1);
            let (a, b) = (words(rng, n, m), words(rng, n, m));
            if matches!(op, ApOp::Add { .. }) {
                (inplace_add(&a, &b, m, variant)?, a.iter().zip(&b).map(|(x, y)| x + y).collect())
            } else {
                (multiply(&a, &b, m, variant)?, a.iter().zip(&b).map(|(x, y)| x * y).collect())
            }
        }
        ApOp::Reduce { m, l } => {
            let v = words(rng, l.max(1), m);
            (reduce(&v, m, variant)?, vec![v.iter().sum()])
        }
        ApOp::MatMat { m, i, j, u } => {
            let k: Vec<Vec<u64>> = (0..i).map(|_| words(rng, j, m)).collect();
            let p: Vec<Vec<u64>> = (0..j).map(|_| words(rng, u, m)).collect();
            let mut want = Vec::with_capacity(i * u);
            for row in &k {
                for b in 0..u {
                    want.push((0..j).map(|q| row[q] * p[q][b]).sum());
                }
            }
            (matmat(&k, &p, m, variant)?, want)
        }
        ApOp::Relu { m, l } => {
            let lo = -(1i64 << (m - 1).min(62));
            let v: Vec<i64> = (0..l.max(1)).map(|_| rng.gen_range(lo..-lo)).collect();
            (relu(&v, m, variant)?, v.iter().map(|&x| x.max(0) as u64).collect())
        }
        ApOp::MaxPool { m, s, k } | ApOp::AvgPool { m, s, k } => {
            let v = words(rng, s * k, m);
            if matches!(op, ApOp::MaxPool { .. }) {
                (max_pool(&v, s, k, m, variant)?, v.chunks(s).map(|w| *w.iter().max().unwrap_or(&0)).collect())
            } else {
                (avg_pool(&v, s, k, m, variant)?, v.chunks(s).map(|w| w.iter().sum::<u64>() / s as u64).collect())
            }
        }
    };
    Ok(Emulation { op: *op, variant, result, expected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_op_checks_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ops = [
            ApOp::Add { m: 5, l: 8 },
            ApOp::Multiply { m: 4, l: 6 },
            ApOp::Reduce { m: 3, l: 8 },
            ApOp::MatMat { m: 3, i: 2, j: 4, u: 2 },
            ApOp::Relu { m: 6, l: 5 },
            ApOp::MaxPool { m: 4, s: 4, k: 3 },
            ApOp::AvgPool { m: 4, s: 2, k: 3 },
        ];
        for v in ApVariant::ALL {
            for op in &ops {
                let e = emulate_random(op, v, &mut rng).unwrap();
                assert!(e.ok(), "{op:?} {v}");
            }
        }
    }
}
