use apsim::mapper::{plan_lr, reshape_cost, HardwareConfig};
use apsim::ops::{analytic_cycles, inplace_add, multiply, reduce};
use apsim::sim::simulate;
use apsim::tech::{energy_of, latency_of, ClockProfile, InterconnectProfile, TechProfile};
use apsim::workload::{Dims, LayerPrecision, LayerSpec, ModelSpec, PrecisionConfig};
use apsim::{ApOp, ApVariant, Bits, CamArray, EventTrace, KeyMask, Orientation};
use proptest::prelude::*;

fn array(rows: usize, cols: usize, cells: &[bool]) -> CamArray {
    let mut a = CamArray::new(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            a.set(r, c, cells[r * cols + c]);
        }
    }
    a
}

fn snapshot(a: &CamArray) -> Vec<Vec<bool>> {
    (0..a.rows()).map(|r| (0..a.cols()).map(|c| a.get(r, c)).collect()).collect()
}

/// Random array plus a key/mask over distinct positions of the given span.
fn array_and_key(horizontal: bool) -> impl Strategy<Value = (usize, usize, Vec<bool>, Vec<(usize, bool)>)> {
    (1usize..=24, 1usize..=24).prop_flat_map(move |(rows, cols)| {
        let span = if horizontal { cols } else { rows };
        (
            Just(rows),
            Just(cols),
            prop::collection::vec(any::<bool>(), rows * cols),
            prop::collection::btree_map(0..span, any::<bool>(), 1..=span).prop_map(|m| m.into_iter().collect()),
        )
    })
}

fn check_compare(rows: usize, cols: usize, cells: &[bool], pairs: Vec<(usize, bool)>, o: Orientation) -> Result<(), TestCaseError> {
    let mut a = array(rows, cols, cells);
    let before = snapshot(&a);
    let tags = a.compare(&KeyMask::new(o, pairs.clone())).unwrap();
    prop_assert_eq!(snapshot(&a), before.clone());
    let vertical = o == Orientation::Vertical;
    for x in 0..if vertical { cols } else { rows } {
        let hit = pairs.iter().all(|&(p, b)| if vertical { before[p][x] == b } else { before[x][p] == b });
        prop_assert_eq!(tags.get(x), hit);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn horizontal_compare_matches_scan((rows, cols, cells, pairs) in array_and_key(true)) {
        check_compare(rows, cols, &cells, pairs, Orientation::Horizontal)?;
    }

    #[test]
    fn vertical_compare_matches_scan((rows, cols, cells, pairs) in array_and_key(false)) {
        check_compare(rows, cols, &cells, pairs, Orientation::Vertical)?;
    }

    #[test]
    fn selective_write_touches_only_masked_tagged_cells(
        (rows, cols, cells, pairs) in array_and_key(true),
        tag_seed in any::<u64>(),
    ) {
        let mut a = array(rows, cols, &cells);
        let before = snapshot(&a);
        let tags = Bits::from_bools(&(0..rows).map(|r| (tag_seed >> (r % 64)) & 1 == 1).collect::<Vec<_>>());
        a.selective_write(&KeyMask::horizontal(pairs.clone()), &tags).unwrap();
        let after = snapshot(&a);
        for r in 0..rows {
            for c in 0..cols {
                let want = match pairs.iter().find(|p| p.0 == c) {
                    Some(&(_, b)) if tags.get(r) => b,
                    _ => before[r][c],
                };
                prop_assert_eq!(after[r][c], want, "cell ({}, {})", r, c);
            }
        }
        let written = pairs.len() * tags.count_ones();
        prop_assert_eq!(a.trace().cells_written, written as f64);
    }

    #[test]
    fn vertical_write_touches_only_masked_tagged_cells(
        (rows, cols, cells, pairs) in array_and_key(false),
        tag_seed in any::<u64>(),
    ) {
        let mut a = array(rows, cols, &cells);
        let before = snapshot(&a);
        let tags = Bits::from_bools(&(0..cols).map(|c| (tag_seed >> (c % 64)) & 1 == 1).collect::<Vec<_>>());
        a.selective_write(&KeyMask::vertical(pairs.clone()), &tags).unwrap();
        let after = snapshot(&a);
        for r in 0..rows {
            for c in 0..cols {
                let want = match pairs.iter().find(|p| p.0 == r) {
                    Some(&(_, b)) if tags.get(c) => b,
                    _ => before[r][c],
                };
                prop_assert_eq!(after[r][c], want);
            }
        }
    }

    #[test]
    fn trace_is_additive(
        (rows, cols, cells, pairs) in array_and_key(true),
        n_ops in 1usize..6,
    ) {
        let mut a = array(rows, cols, &cells);
        let km = KeyMask::horizontal(pairs);
        let mut sum = EventTrace::default();
        for i in 0..n_ops {
            // The same step alone on a copy with an empty trace.
            let mut alone = CamArray::from_dump(&a.dump()).unwrap();
            let tags = a.h_tags().clone();
            for x in [&mut a, &mut alone] {
                match i % 3 {
                    0 => { x.compare(&km).unwrap(); }
                    1 => { x.selective_write(&km, &tags).unwrap(); }
                    _ => { x.read_bit_sequential(i % cols).unwrap(); }
                }
            }
            sum += *alone.trace();
        }
        prop_assert_eq!(*a.trace(), sum);
    }

    #[test]
    fn ops_chain_additively(m in 1u32..=8, seed in any::<u64>(), v in prop::sample::select(ApVariant::ALL.to_vec())) {
        let a: Vec<u64> = (0..4).map(|i| (seed >> (8 * i)) & ((1 << m) - 1)).collect();
        let b: Vec<u64> = (0..4).map(|i| (seed >> (8 * i + 4)) & ((1 << m) - 1)).collect();
        let x = inplace_add(&a, &b, m, v).unwrap();
        let y = multiply(&a, &b, m, v).unwrap();
        let sum = x.trace + y.trace;
        prop_assert_eq!(sum.stages(), x.analytic_cycles + y.analytic_cycles);
        prop_assert_eq!(sum.cells_written, x.trace.cells_written + y.trace.cells_written);
    }

    #[test]
    fn energy_and_latency_are_linear(
        c in 1u64..1000, w in 0u64..1000, rd in 0u64..1000,
        cells in 1.0f64..1e6, wr in 0.0f64..1e6, bits in 0.0f64..1e6,
        k in 1u64..50,
        reram in any::<bool>(),
    ) {
        let t = EventTrace {
            n_compare: c, n_write: w, n_read: rd, n_transfer: 0,
            active_cells_compared: cells, cells_written: wr, bits_transferred: bits,
        };
        let tech = if reram { TechProfile::reram16nm() } else { TechProfile::sram16nm() };
        let (ic, ck) = (InterconnectProfile::default(), ClockProfile::default());
        let e1 = energy_of(&t, &tech, &ic).unwrap();
        let ek = energy_of(&t.times(k), &tech, &ic).unwrap();
        prop_assert!((ek - k as f64 * e1).abs() <= 1e-9 * ek.abs());
        let e2 = energy_of(&(t + t), &tech, &ic).unwrap();
        prop_assert!((e2 - 2.0 * e1).abs() <= 1e-9 * e2.abs());
        let l1 = latency_of(&t, &tech, &ck);
        prop_assert!((latency_of(&t.times(k), &tech, &ck) - k as f64 * l1).abs() <= 1e-9 * l1 * k as f64);
    }

    #[test]
    fn doubling_a_tensor_doubles_its_flits(out in 0usize..100_000, inp in 0usize..100_000, bits in 1u32..=16) {
        let ic = InterconnectProfile::default();
        let one = reshape_cost(out, inp, bits, &ic);
        let two = reshape_cost(2 * out, 2 * inp, bits, &ic);
        // Each direction rounds up to whole flits once.
        prop_assert!(two.flits_to_map <= 2 * one.flits_to_map && two.flits_to_map + 1 >= 2 * one.flits_to_map);
        prop_assert!(two.flits_to_cap <= 2 * one.flits_to_cap && two.flits_to_cap + 1 >= 2 * one.flits_to_cap);
        prop_assert_eq!(two.total().bits_transferred, 2.0 * one.total().bits_transferred);
    }

    #[test]
    fn variants_order_by_cycles(m in 1u32..=8, lg in 2u32..=4, i in 1usize..=4, u in 1usize..=4) {
        let l = 1usize << lg;
        let ops = [
            ApOp::Reduce { m, l },
            ApOp::MatMat { m, i, j: l, u },
            ApOp::MaxPool { m, s: l, k: 2 },
            ApOp::AvgPool { m, s: l, k: 2 },
        ];
        for op in ops {
            let c = |v| analytic_cycles(&op, v).unwrap();
            prop_assert!(c(ApVariant::Ap2DSeg) <= c(ApVariant::Ap2D), "{:?}", op);
            prop_assert!(c(ApVariant::Ap2DSeg) <= c(ApVariant::Ap1D), "{:?}", op);
            // The pooling and matmat closed forms can put 2D above 1D.
            if matches!(op, ApOp::Reduce { .. }) {
                prop_assert!(c(ApVariant::Ap2D) <= c(ApVariant::Ap1D), "{:?}", op);
            }
        }
    }

    #[test]
    fn reduction_grows_one_bit_per_level(m in 1u32..=8, lg in 1u32..=4, seed in any::<u64>()) {
        let l = 1usize << lg;
        let v: Vec<u64> = (0..l).map(|i| (seed.rotate_left(i as u32 * 7)) & ((1 << m) - 1)).collect();
        let max = vec![(1u64 << m) - 1; l];
        let r = reduce(&max, m, ApVariant::Ap2D).unwrap();
        prop_assert!(r.values[0] < 1u64 << (m + lg));
        prop_assert_eq!(reduce(&v, m, ApVariant::Ap2D).unwrap().values[0], v.iter().sum::<u64>());
    }

    #[test]
    fn random_conv_layers_plan_cleanly(
        h in 1usize..=24, c in 1usize..=16, k in prop::sample::select(vec![1usize, 3, 5]),
        out in 1usize..=48, stride in 1usize..=2, bits in 1u32..=8,
    ) {
        let input = Dims::new(h, h, c);
        let model = ModelSpec { name: "toy".into(), input, layers: vec![LayerSpec::conv("c", input, k, out, stride, k / 2)] };
        let ic = InterconnectProfile::default();
        let hw = HardwareConfig::lr_default();
        let plan = plan_lr(&model, &[LayerPrecision::uniform(bits)], &hw, &ic).unwrap();
        for l in &plan.layers {
            prop_assert!(l.fold_factor >= 1);
            prop_assert!(l.utilization <= 1.0 + 1e-12);
            if let Some(g) = &l.gemm {
                prop_assert_eq!(g.columns_per_step.iter().sum::<usize>(), g.n * g.kernel_chunks);
            }
        }
        let r = simulate(&model, &PrecisionConfig::fixed(bits), &hw, &TechProfile::sram16nm(), &ic, &ClockProfile::default()).unwrap();
        prop_assert!(r.check().is_ok());
        prop_assert!(r.energy_j > 0.0 && r.latency_s > 0.0);
    }
}

#[test]
fn reads_are_transposes_up_to_64() {
    for (rows, cols) in [(1, 1), (3, 64), (64, 3), (17, 33), (64, 64)] {
        let cells: Vec<bool> = (0..rows * cols).map(|i| (i * 2654435761usize) >> 7 & 1 == 1).collect();
        let mut a = array(rows, cols, &cells);
        for c in 0..cols {
            let col = a.read_bit_sequential(c).unwrap();
            for r in 0..rows {
                assert_eq!(col.get(r), cells[r * cols + c]);
            }
        }
        for r in 0..rows {
            let row = a.read_word_sequential(r).unwrap();
            for c in 0..cols {
                assert_eq!(row.get(c), cells[r * cols + c]);
            }
        }
        assert_eq!(a.trace().n_read, (rows + cols) as u64);
    }
}
