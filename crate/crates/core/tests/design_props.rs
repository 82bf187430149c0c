use isoci::design::{build_tables, candidate_corners, Block, DesignGrid, Lattice, Sample, Side};
use proptest::prelude::*;

fn naive(s: &Sample, b: &Block) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    for i in 0..s.len() {
        if b.contains(&s.grid.point(i)) {
            sum += s.y[i];
            n += 1;
        }
    }
    (if n == 0 { f64::NAN } else { sum / n as f64 }, n)
}

fn case() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=3)
        .prop_flat_map(|d| prop::collection::vec(1usize..=6, d))
        .prop_flat_map(|shape| {
            let n: usize = shape.iter().product();
            let d = shape.len();
            (
                Just(shape),
                prop::collection::vec(-1000.0f64..1000.0, n),
                prop::collection::vec(0.0f64..=1.0, d),
                prop::collection::vec(0.0f64..=1.0, d),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn table_matches_naive_scan((shape, y, a, b) in case()) {
        let l = Lattice::regular(&shape).unwrap();
        let lo: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p.min(*q)).collect();
        let hi: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p.max(*q)).collect();
        let block = Block::new(lo, hi).unwrap();

        let ints: Vec<f64> = y.iter().map(|v| v.round()).collect();
        let s = Sample::new(DesignGrid::Lattice(l.clone()), ints).unwrap();
        let t = build_tables(&s).unwrap();
        let (m, c) = t.block_mean(&l, &block);
        let (nm, nc) = naive(&s, &block);
        prop_assert_eq!(c, nc);
        if c > 0 {
            prop_assert_eq!(m, nm);
        }

        let s = Sample::new(DesignGrid::Lattice(l.clone()), y).unwrap();
        let t = build_tables(&s).unwrap();
        let (m, c) = t.block_mean(&l, &block);
        let (nm, _) = naive(&s, &block);
        if c > 0 {
            prop_assert!((m - nm).abs() <= 1e-9 * nm.abs().max(1.0));
        }
    }

    #[test]
    fn corners_sorted_and_on_the_right_side((shape, _y, x0, _b) in case()) {
        let g = DesignGrid::Lattice(Lattice::regular(&shape).unwrap());
        for side in [Side::LowerLeft, Side::UpperRight] {
            let c = candidate_corners(&g, &x0, side);
            prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
            for p in &c {
                let ok = p.iter().zip(&x0).all(|(a, b)| match side {
                    Side::LowerLeft => a <= b,
                    Side::UpperRight => a >= b,
                });
                prop_assert!(ok);
            }
        }
    }
}

#[test]
fn random_four_by_five_blocks() {
    // Deterministic pseudo-random values and blocks.
    let l = Lattice::regular(&[4, 5]).unwrap();
    let mut state = 12345u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let y: Vec<f64> = (0..20).map(|_| next() * 10.0).collect();
    let s = Sample::new(DesignGrid::Lattice(l.clone()), y).unwrap();
    let t = build_tables(&s).unwrap();
    for _ in 0..50 {
        let (a, b, c, d) = (next(), next(), next(), next());
        let block = Block::new(vec![a.min(b), c.min(d)], vec![a.max(b), c.max(d)]).unwrap();
        let (m, n) = t.block_mean(&l, &block);
        let (nm, nn) = naive(&s, &block);
        assert_eq!(n, nn);
        if n > 0 {
            assert!((m - nm).abs() < 1e-12);
        }
    }
}
