use super::*;
use crate::network::{build_network, ChannelModel, NetworkParams};
use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gaussian(l: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(l, l, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re * s, im * s)
    })
}

fn row(b: &CMatrix, j: usize) -> Vec<Complex64> {
    b.row(j).iter().copied().collect()
}

const ALL: [ReceiverKind; 4] = [
    ReceiverKind::Zf,
    ReceiverKind::Mmse,
    ReceiverKind::IntegerForcing { max_int: 2 },
    ReceiverKind::MlQuantized,
];

#[test]
fn wyner_ziv_levels() {
    assert!(wyner_ziv_q(1.0, 100.0, 60.0).unwrap() < 1e-15);
    // (1 + 100) / (101 - 1)
    assert_abs_diff_eq!(wyner_ziv_q(1.0, 100.0, 101f64.log2()).unwrap(), 1.01, epsilon = 1e-12);
    assert_abs_diff_eq!(wyner_ziv_q(0.0, 100.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
    assert!(matches!(wyner_ziv_q(1.0, 10.0, 0.0), Err(Error::Domain(_))));
}

#[test]
fn zero_forcing_identity() {
    let stage = QuantizedStage::new(CMatrix::identity(3, 3), vec![0.0; 3], 10.0).unwrap();
    let eq = equalizer_matrix(ReceiverKind::Zf, &stage).unwrap();
    assert_eq!(eq.b, CMatrix::identity(3, 3));
    assert_abs_diff_eq!(stream_rate(&row(&eq.b, 1), &stage, 1).unwrap(), 11f64.log2(), epsilon = 1e-12);
    assert_abs_diff_eq!(11f64.log2(), 3.4594, epsilon = 1e-4);
}

#[test]
fn zero_forcing_cancels_cross_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = gaussian(3, &mut rng);
    let q = vec![0.5, 1.5, 2.0];
    let stage = QuantizedStage::new(h.clone(), q.clone(), 20.0).unwrap();
    let b = equalizer_matrix(ReceiverKind::Zf, &stage).unwrap().b;
    let bh = &b * &h;
    for j in 0..3 {
        for l in 0..3 {
            if l != j {
                assert!(bh[(j, l)].norm() < 1e-10);
            }
        }
        let noise: f64 = (0..3).map(|i| b[(j, i)].norm_sqr() * (1.0 + q[i])).sum();
        let expect = (1.0 + 20.0 * bh[(j, j)].norm_sqr() / noise).log2();
        assert_abs_diff_eq!(stream_rate(&row(&b, j), &stage, j).unwrap(), expect, epsilon = 1e-10);
    }
}

#[test]
fn singular_zero_forcing_gives_zero() {
    let h = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
    let stage = QuantizedStage::new(h, vec![1.0, 1.0], 10.0).unwrap();
    assert!(matches!(equalizer_matrix(ReceiverKind::Zf, &stage), Err(Error::Singular)));
    assert_eq!(stage_stream_rates(ReceiverKind::Zf, &stage).unwrap(), vec![0.0, 0.0]);
    assert!(stage_stream_rates(ReceiverKind::Mmse, &stage).unwrap()[0] > 0.0);
}

#[test]
fn mmse_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = gaussian(2, &mut rng);
    let q = vec![0.7, 3.0];
    let p = 25.0;
    let stage = QuantizedStage::new(h.clone(), q.clone(), p).unwrap();
    let b = equalizer_matrix(ReceiverKind::Mmse, &stage).unwrap().b;
    let n_over_p = CMatrix::from_diagonal(&DVector::from_iterator(2, q.iter().map(|v| c((1.0 + v) / p, 0.0))));
    let gram = n_over_p + &h * h.adjoint();
    let inv = gram.lu().solve(&CMatrix::identity(2, 2)).unwrap();
    let oracle = h.adjoint() * inv;
    assert!((&b - &oracle).norm() < 1e-10);
}

#[test]
fn integer_forcing_with_identity_is_mmse() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let h = gaussian(4, &mut rng);
        let stage = QuantizedStage::new(h, vec![0.3, 1.0, 4.0, 0.1], 250.0).unwrap();
        let mmse = stage_stream_rates(ReceiverKind::Mmse, &stage).unwrap();
        let a_eye = integer::identity(4);
        let forced = integer_forcing_rates(&stage, &a_eye).unwrap();
        for (x, y) in mmse.iter().zip(&forced) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        let b_forced = integer::to_complex(&a_eye) * mmse_matrix(&stage).unwrap();
        let b_mmse = equalizer_matrix(ReceiverKind::Mmse, &stage).unwrap().b;
        assert!((b_forced - b_mmse).norm() < 1e-12);
    }
}

#[test]
fn integer_forcing_returns_full_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for l in [2, 3, 4, 6] {
        let h = gaussian(l, &mut rng);
        let stage = QuantizedStage::new(h, vec![0.5; l], 100.0).unwrap();
        let eq = equalizer_matrix(ReceiverKind::integer_forcing(), &stage).unwrap();
        let a = eq.a.unwrap();
        assert_eq!(gaussian_rank(&a), l);
        let if_sum: f64 = stage_stream_rates(ReceiverKind::integer_forcing(), &stage).unwrap().iter().sum();
        let mmse_sum: f64 = stage_stream_rates(ReceiverKind::Mmse, &stage).unwrap().iter().sum();
        assert!(if_sum >= mmse_sum - 1e-12);
    }
}

#[test]
fn integer_forcing_helps_on_an_aligned_channel() {
    // nearly parallel columns: the sum equation is far cleaner than either stream
    let h = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.05, 0.0)]);
    let stage = QuantizedStage::new(h, vec![0.0, 0.0], 1000.0).unwrap();
    let (a, rates) = integer_forcing(&stage, 2).unwrap();
    assert_ne!(a, integer::identity(2));
    let min = |r: &[f64]| r.iter().copied().fold(f64::INFINITY, f64::min);
    let mmse = stage_stream_rates(ReceiverKind::Mmse, &stage).unwrap();
    assert!(min(&rates) > min(&mmse) + 0.1);
    assert!(rates.iter().sum::<f64>() > mmse.iter().sum::<f64>());
}

#[test]
fn mmse_rate_matches_simulated_sinr() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let h = gaussian(3, &mut rng);
    let q = vec![0.4, 1.2, 2.5];
    let p = 10.0;
    let stage = QuantizedStage::new(h.clone(), q.clone(), p).unwrap();
    let b = mmse_matrix(&stage).unwrap();
    let rates = stage_stream_rates(ReceiverKind::Mmse, &stage).unwrap();
    let draws = 1_000_000;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut cn = |var: f64| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c(re * s * var.sqrt(), im * s * var.sqrt())
    };
    let mut signal = [0.0f64; 3];
    let mut distortion = [0.0f64; 3];
    for _ in 0..draws {
        let x: Vec<Complex64> = (0..3).map(|_| cn(p)).collect();
        let y: Vec<Complex64> = (0..3)
            .map(|i| (0..3).map(|l| h[(i, l)] * x[l]).sum::<Complex64>() + cn(1.0 + q[i]))
            .collect();
        for j in 0..3 {
            let est: Complex64 = (0..3).map(|i| b[(j, i)] * y[i]).sum();
            let gain: Complex64 = (0..3).map(|i| b[(j, i)] * h[(i, j)]).sum();
            let wanted = gain * x[j];
            signal[j] += wanted.norm_sqr();
            distortion[j] += (est - wanted).norm_sqr();
        }
    }
    for j in 0..3 {
        let simulated = (1.0 + signal[j] / distortion[j]).log2();
        assert!((simulated - rates[j]).abs() < 0.02, "stream {j}: {simulated} vs {}", rates[j]);
    }
}

#[test]
fn direct_identity_hop_is_receiver_independent() {
    let hops = [CMatrix::identity(3, 3)];
    let expect = 101f64.log2();
    for kind in ALL {
        let ladder = receiver_ladder_on(&hops, 100.0, kind).unwrap();
        assert_abs_diff_eq!(ladder.source_rate(), expect, epsilon = 1e-10);
    }
}

#[test]
fn ladder_uses_per_relay_wyner_ziv_levels() {
    let net = build_network(&NetworkParams::new(3, 2, 300.0, ChannelModel::DenseIid), 8).unwrap();
    let ladder = receiver_ladder(&net, Path::First, ReceiverKind::Mmse).unwrap();
    for k in 1..=2 {
        let h = net.desired(Path::First, k - 1).unwrap().entries();
        let powers = row_powers(h);
        for j in 0..3 {
            let expect = wyner_ziv_q(powers[j], 100.0, ladder.streams[k][j]).unwrap();
            assert_abs_diff_eq!(ladder.ladder.q_levels()[k - 1][j], expect, epsilon = 1e-12 * expect);
        }
        let mean = ladder.streams[k - 1].iter().sum::<f64>() / 3.0;
        assert_abs_diff_eq!(ladder.ladder.rates()[k - 1], mean, epsilon = 1e-15);
    }
}

#[test]
fn invalid_inputs() {
    assert!(QuantizedStage::new(CMatrix::identity(2, 2), vec![1.0], 1.0).is_err());
    assert!(QuantizedStage::new(CMatrix::identity(2, 2), vec![1.0, -1.0], 1.0).is_err());
    assert!(ReceiverKind::IntegerForcing { max_int: 0 }.validate().is_err());
    let stage = QuantizedStage::new(CMatrix::identity(2, 2), vec![1.0, 1.0], 1.0).unwrap();
    assert!(matches!(stream_rate(&[c(1.0, 0.0), c(0.0, 0.0)], &stage, 2), Err(Error::Index { .. })));
    let rank_one = IntMatrix::from_element(2, 2, num_complex::Complex::new(1, 0));
    assert!(integer_forcing_rates(&stage, &rank_one).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn per_draw_orderings(seed in 0u64..10_000, k in 0usize..3, snr_db in 10.0f64..30.0) {
        let snr = 10f64.powf(snr_db / 10.0);
        let net = build_network(&NetworkParams::new(3, k, snr, ChannelModel::DenseIid), seed).unwrap();
        let rate = |kind| receiver_ladder(&net, Path::First, kind).unwrap();
        let zf = rate(ReceiverKind::Zf);
        let mmse = rate(ReceiverKind::Mmse);
        let ifr = rate(ReceiverKind::integer_forcing());
        let ml = rate(ReceiverKind::MlQuantized);
        // stream by stream, ZF never beats MMSE
        for (a, b) in zf.streams.iter().flatten().zip(mmse.streams.iter().flatten()) {
            prop_assert!(a <= &(b + 1e-9));
        }
        prop_assert!(ml.source_rate() >= ifr.source_rate() - 1e-9, "ml {} if {}", ml.source_rate(), ifr.source_rate());
        prop_assert!(ml.source_rate() >= mmse.source_rate() - 1e-9);
        prop_assert!(ml.source_rate() >= zf.source_rate() - 1e-9);
    }
}
