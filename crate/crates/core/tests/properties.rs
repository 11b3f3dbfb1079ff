use proptest::prelude::*;
use rmc_core::analysis::{BoundParams, SsimParams, cover_bound_h, cover_bound_xunn, ssim_band};
use rmc_core::baselines::idw_log;
use rmc_core::decoder::ops::channel_norm;
use rmc_core::decoder::{DecoderArch, DecoderParams};
use rmc_core::io::{tensor_from_bytes, tensor_to_bytes};
use rmc_core::objectives::bin_nll;
use rmc_core::synth::{QuantizerSpec, assemble_map, h_inverse, h_transform, quantize_values};
use rmc_core::{Measurements, PsdMatrix, RadioMapTensor, Seed, SlfMatrix, mask_sample};

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..12, 1usize..12, 1usize..12)
}

fn tensor() -> impl Strategy<Value = RadioMapTensor> {
    dims().prop_flat_map(|(i, j, k)| {
        prop::collection::vec(
            prop::num::f64::POSITIVE | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL,
            i * j * k,
        )
        .prop_map(move |data| RadioMapTensor::new((i, j, k), data).unwrap())
    })
}

fn slfs_and_psd() -> impl Strategy<Value = (Vec<SlfMatrix>, PsdMatrix)> {
    (1usize..10, 1usize..10, 1usize..10, 1usize..5).prop_flat_map(|(rows, cols, bins, r)| {
        (
            prop::collection::vec(prop::collection::vec(0.0..1.0f64, rows * cols), r),
            prop::collection::vec(0.0..2.0f64, bins * r),
        )
            .prop_map(move |(s, c)| {
                let slfs = s
                    .into_iter()
                    .map(|d| SlfMatrix::new(rows, cols, d).unwrap())
                    .collect();
                (slfs, PsdMatrix::from_columns_flat(bins, r, c).unwrap())
            })
    })
}

fn arch() -> impl Strategy<Value = DecoderArch> {
    (
        prop::collection::vec(1usize..9, 1..6),
        1usize..9,
        prop::sample::select(vec![1usize, 3, 5]),
        1usize..6,
    )
        .prop_map(|(hidden, out, kernel, latent_side)| {
            let mut widths = vec![1];
            widths.extend(hidden);
            widths.push(out);
            DecoderArch {
                widths,
                kernel,
                latent_side,
                ..DecoderArch::default()
            }
        })
}

fn bound_params() -> impl Strategy<Value = BoundParams> {
    (
        1u32..8,
        1u32..64,
        0u32..6,
        1u32..6,
        1u32..16,
        0.1..5.0f64,
        0.1..5.0f64,
        1e-3..0.5f64,
    )
        .prop_map(|(r, k, d0, l, w, kappa, gamma, epsilon)| BoundParams {
            emitters: r as f64,
            bins: k as f64,
            latent_side: d0 as f64,
            layers: l as f64,
            width: w as f64,
            kappa,
            gamma,
            epsilon,
            ..BoundParams::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_bytes_round_trip(x in tensor()) {
        let back = tensor_from_bytes(&tensor_to_bytes(&x)).unwrap();
        prop_assert_eq!(back.dims(), x.dims());
        let same = back.data().iter().zip(x.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }

    #[test]
    fn assembly_matches_triple_loop((slfs, psd) in slfs_and_psd()) {
        let x = assemble_map(&slfs, &psd).unwrap();
        let (rows, cols) = (slfs[0].rows(), slfs[0].cols());
        prop_assert_eq!(x.dims(), (rows, cols, psd.bins()));
        for i in 0..rows {
            for j in 0..cols {
                for k in 0..psd.bins() {
                    let mut want = 0.0;
                    for (r, s) in slfs.iter().enumerate() {
                        want += s.get(i, j) * psd.get(k, r);
                    }
                    prop_assert!((x.get(i, j, k) - want).abs() <= 1e-12 * want.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn assembly_invariant_to_per_emitter_rescaling((slfs, psd) in slfs_and_psd(), alpha in 0.1..10.0f64) {
        let scaled: Vec<SlfMatrix> = slfs
            .iter()
            .map(|s| SlfMatrix::new(s.rows(), s.cols(), s.data().iter().map(|v| v * alpha).collect()).unwrap())
            .collect();
        let c = PsdMatrix::from_columns_flat(psd.bins(), psd.emitters(), psd.as_flat().iter().map(|v| v / alpha).collect()).unwrap();
        let a = assemble_map(&slfs, &psd).unwrap();
        let b = assemble_map(&scaled, &c).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn parameter_count_matches_storage(a in arch()) {
        let n = a.count_params().unwrap();
        let p = DecoderParams::zeros(&a).unwrap();
        prop_assert_eq!(p.len(), n);
        let layout = p.layout();
        let mut enumerated = 0;
        let mut next = 0;
        for (b, bl) in layout.blocks.iter().enumerate() {
            let (cin, cout) = (a.widths[b], a.widths[b + 1]);
            prop_assert_eq!(bl.kernel.len(), cin * cout * a.kernel * a.kernel);
            prop_assert_eq!(bl.scale.len(), cout);
            prop_assert_eq!(bl.shift.len(), cout);
            for r in [&bl.kernel, &bl.scale, &bl.shift] {
                prop_assert_eq!(r.start, next);
                next = r.end;
                enumerated += r.len();
            }
        }
        prop_assert_eq!(layout.head.start, next);
        enumerated += layout.head.len();
        prop_assert_eq!(enumerated, n);
        prop_assert_eq!(layout.total, n);
    }

    #[test]
    fn channel_norm_standardizes(
        channels in 1usize..5,
        hw in 4usize..40,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = Seed(seed).rng();
        let x: Vec<f64> = (0..channels * hw).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (y, _) = channel_norm(&x, channels, &vec![1.0; channels], &vec![0.0; channels], 1e-12);
        for c in 0..channels {
            let band = &y[c * hw..(c + 1) * hw];
            let mean = band.iter().sum::<f64>() / hw as f64;
            let var = band.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / hw as f64;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn ssim_symmetric_and_bounded(
        (rows, cols, a, b) in (1usize..24, 1usize..24).prop_flat_map(|(r, c)| (
            Just(r),
            Just(c),
            prop::collection::vec(-8.0..1.0f64, r * c),
            prop::collection::vec(-8.0..1.0f64, r * c),
        )),
    ) {
        let p = SsimParams::default();
        let ab = ssim_band(&a, &b, rows, cols, &p, 9.0).unwrap();
        let ba = ssim_band(&b, &a, rows, cols, &p, 9.0).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn idw_invariant_to_sensor_order(
        n in 2usize..20,
        bins in 1usize..4,
        seed in any::<u64>(),
        shuffle in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let mask = mask_sample(10, 10, n as f64 / 100.0, Seed(seed)).unwrap();
        let locs = mask.locations().to_vec();
        let values: Vec<f64> = (0..locs.len() * bins).map(|v| (v as f64 * 0.37).sin()).collect();
        let a = idw_log(&Measurements::new((10, 10, bins), locs.clone(), values.clone()).unwrap(), 2.0).unwrap();
        let mut perm: Vec<usize> = (0..locs.len()).collect();
        perm.shuffle(&mut Seed(shuffle).rng());
        let plocs = perm.iter().map(|&p| locs[p]).collect();
        let pvals = perm.iter().flat_map(|&p| values[p * bins..(p + 1) * bins].to_vec()).collect();
        let b = idw_log(&Measurements::new((10, 10, bins), plocs, pvals).unwrap(), 2.0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn bin_nll_nonnegative_and_finite(
        v in -20.0..20.0f64,
        lower in -20.0..20.0f64,
        width in 1e-3..10.0f64,
        sigma in 0.01..3.0f64,
        open in 0u8..3,
    ) {
        let (lo, hi) = match open {
            0 => (lower, lower + width),
            1 => (f64::NEG_INFINITY, lower),
            _ => (lower, f64::INFINITY),
        };
        let (nll, grad) = bin_nll(v, lo, hi, sigma);
        prop_assert!(nll >= 0.0 && nll.is_finite(), "{} {}", nll, grad);
        prop_assert!(grad.is_finite());
    }

    #[test]
    fn log_transform_round_trips(x in 0.0..1e6f64, a in 1e-6..1.0f64) {
        let back = h_inverse(h_transform(x, a), a);
        prop_assert!((back - x).abs() <= 1e-9 * (x + a));
    }

    #[test]
    fn quantizer_labels_in_range(
        values in prop::collection::vec(-10.0..5.0f64, 2..200),
        bits in 1u32..8,
        sigma in 0.0..1.0f64,
        seed in any::<u64>(),
    ) {
        prop_assume!(values.iter().any(|&v| v != values[0]));
        let spec = QuantizerSpec::uniform_for(&values, bits, sigma, 1e-3).unwrap();
        let labels = quantize_values(&values, &spec, Seed(seed));
        prop_assert_eq!(labels.len(), values.len());
        prop_assert!(labels.iter().all(|&l| l >= 1 && l as usize <= spec.levels()));
    }

    #[test]
    fn masks_are_deterministic(rows in 1usize..30, cols in 1usize..30, rho in 0.05..1.0f64, seed in any::<u64>()) {
        prop_assume!((rho * (rows * cols) as f64).round() >= 1.0);
        let a = mask_sample(rows, cols, rho, Seed(seed)).unwrap();
        let b = mask_sample(rows, cols, rho, Seed(seed)).unwrap();
        prop_assert_eq!(a.locations(), b.locations());
        prop_assert_eq!(a.len(), (rho * (rows * cols) as f64).round() as usize);
    }

    #[test]
    fn cover_bounds_decrease_with_radius(p in bound_params(), ratio in 1.01..10.0f64) {
        let wider = BoundParams { epsilon: p.epsilon * ratio, ..p.clone() };
        prop_assert!(cover_bound_h(&wider).unwrap() < cover_bound_h(&p).unwrap());
        prop_assert!(cover_bound_xunn(&wider).unwrap() < cover_bound_xunn(&p).unwrap());
    }
}

#[test]
fn mask_inclusion_is_uniform() {
    let (rows, cols, rho) = (8, 8, 0.25);
    let trials = 10_000;
    let mut hits = [0u32; 64];
    for t in 0..trials {
        for &(i, j) in mask_sample(rows, cols, rho, Seed(t)).unwrap().locations() {
            hits[i * cols + j] += 1;
        }
    }
    let p = 16.0 / 64.0;
    let mean = trials as f64 * p;
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    for (cell, &h) in hits.iter().enumerate() {
        assert!(
            (h as f64 - mean).abs() <= 3.0 * sd,
            "cell {cell}: {h} vs {mean} ± {}",
            3.0 * sd
        );
    }
}

#[test]
fn masks_differ_across_seeds() {
    for s in 0..100u64 {
        let a = mask_sample(64, 64, 0.05, Seed(2 * s)).unwrap();
        let b = mask_sample(64, 64, 0.05, Seed(2 * s + 1)).unwrap();
        assert_ne!(
            a.locations(),
            b.locations(),
            "seeds {} and {}",
            2 * s,
            2 * s + 1
        );
    }
}
