use fdf::kernel_geometry::{generate_filter, EquilibriumLevel, FilterSpec, Offset, SpiralParams};
use fdf::nn::{sparse_conv_forward, SparseConvLayer, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense-kernel reference: scatter the sparse weights into a full
/// `extent × extent` kernel and run a textbook zero-padded correlation.
fn dense_reference(input: &Tensor<f64>, layer: &SparseConvLayer<f64>) -> Vec<f64> {
    let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let cout = layer.out_channels();
    let spec = layer.spec();
    let k = spec.extent();
    let half = (k as i64 - 1) / 2;
    let cells = spec.cell_count();
    let mut kernel = vec![0.0; cout * cin * k * k];
    for o in 0..cout {
        for i in 0..cin {
            for (cell, off) in spec.offsets().iter().enumerate() {
                let ky = (off.row as i64 + half) as usize;
                let kx = (off.col as i64 + half) as usize;
                kernel[((o * cin + i) * k + ky) * k + kx] = layer.weights()[(o * cin + i) * cells + cell];
            }
        }
    }
    let s = layer.stride();
    let (oh, ow) = ((h + s - 1) / s, (w + s - 1) / s);
    let mut out = vec![0.0; oh * ow * cout];
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..cout {
                let mut acc = layer.bias()[o];
                for ky in 0..k {
                    for kx in 0..k {
                        let y = (oy * s) as i64 + ky as i64 - half;
                        let x = (ox * s) as i64 + kx as i64 - half;
                        if y < 0 || x < 0 || y >= h as i64 || x >= w as i64 {
                            continue;
                        }
                        for i in 0..cin {
                            acc += kernel[((o * cin + i) * k + ky) * k + kx] * input.at(&[y as usize, x as usize, i]);
                        }
                    }
                }
                out[(oy * ow + ox) * cout + o] = acc;
            }
        }
    }
    out
}

fn random_input(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor<f64> {
    Tensor::new(
        vec![h, w, c],
        (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn contiguous_filter_matches_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..100 {
        let (h, w) = (rng.gen_range(3..12), rng.gen_range(3..12));
        let (cin, cout) = (rng.gen_range(1..4), rng.gen_range(1..5));
        let layer = SparseConvLayer::<f64>::glorot(FilterSpec::normal(), cin, cout, 1, &mut rng).unwrap();
        let input = random_input(&mut rng, h, w, cin);
        let got = sparse_conv_forward(&input, &layer).unwrap();
        let diff = max_abs_diff(got.data(), &dense_reference(&input, &layer));
        assert!(diff <= 1e-12, "trial {trial}: diff {diff:e}");
    }
}

#[test]
fn generated_filters_match_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for level in EquilibriumLevel::all() {
        let spec = generate_filter(level, &SpiralParams::default()).unwrap();
        for stride in [1, 2, 3] {
            let layer = SparseConvLayer::<f64>::glorot(spec.clone(), 3, 2, stride, &mut rng).unwrap();
            let input = random_input(&mut rng, 10, 9, 3);
            let got = sparse_conv_forward(&input, &layer).unwrap();
            assert!(max_abs_diff(got.data(), &dense_reference(&input, &layer)) <= 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn arbitrary_offsets_match_dense_reference(
        cells in prop::collection::hash_set((-3i32..=3, -3i32..=3), 1..10),
        stride in 1usize..4,
        seed in any::<u64>(),
    ) {
        let mut offsets = vec![Offset::CENTER];
        offsets.extend(cells.into_iter().map(|(r, c)| Offset::new(r, c)).filter(|o| *o != Offset::CENTER));
        let spec = FilterSpec::new(EquilibriumLevel::new(0).unwrap(), offsets).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer = SparseConvLayer::<f64>::glorot(spec, 2, 3, stride, &mut rng).unwrap();
        let input = random_input(&mut rng, 7, 8, 2);
        let got = sparse_conv_forward(&input, &layer).unwrap();
        prop_assert!(max_abs_diff(got.data(), &dense_reference(&input, &layer)) <= 1e-12);
    }
}
