use airgap_ae::channel::{complex_normal, rbf_apply, sample_perturbation, Channel, ChannelKind, ComplexBlock};
use airgap_ae::rng::SeedTree;
use num_complex::Complex64;

const N: usize = 200_000;

fn ones(rows: usize, symbols: usize) -> ComplexBlock {
    ComplexBlock::from_rows(&vec![vec![Complex64::new(1.0, 0.0); symbols]; rows]).unwrap()
}

#[test]
fn complex_normal_splits_variance_evenly() {
    let mut rng = SeedTree::new(3).stream("cn");
    let var = 0.4;
    let (mut re2, mut im2, mut cross) = (0.0, 0.0, 0.0);
    for _ in 0..N {
        let z = complex_normal(var, &mut rng);
        re2 += z.re * z.re;
        im2 += z.im * z.im;
        cross += z.re * z.im;
    }
    let n = N as f64;
    // Each component has variance var/2; the SE of a sample variance is var/2 * sqrt(2/n).
    let tol = 5.0 * (var / 2.0) * (2.0 / n).sqrt();
    assert!((re2 / n - var / 2.0).abs() < tol);
    assert!((im2 / n - var / 2.0).abs() < tol);
    assert!((cross / n).abs() < tol);
}

#[test]
fn awgn_noise_has_requested_power() {
    let ch = Channel::at_snr(ChannelKind::Awgn, 7.0).unwrap();
    let x = ones(N / 4, 4);
    let y = ch.transmit(&x, &mut SeedTree::new(5).stream("awgn"));
    let mut p = 0.0;
    for r in 0..y.rows() {
        for s in 0..4 {
            p += (y.get(r, s) - Complex64::new(1.0, 0.0)).norm_sqr();
        }
    }
    let p = p / N as f64;
    let expect = ch.noise_var();
    assert!((p - expect).abs() < 5.0 * expect / (N as f64).sqrt(), "{p} vs {expect}");
}

#[test]
fn rayleigh_block_fading_moments() {
    let x = ones(N, 3);
    let (y, h) = rbf_apply(&x, 1e-12, &mut SeedTree::new(9).stream("rbf"));
    let n = N as f64;
    let mean_gain = h.iter().map(|h| h.norm_sqr()).sum::<f64>() / n;
    // |h|^2 ~ Exp(1): mean 1, variance 1.
    assert!((mean_gain - 1.0).abs() < 5.0 / n.sqrt(), "{mean_gain}");
    let mean_h = h.iter().sum::<Complex64>() / n;
    assert!(mean_h.norm() < 5.0 / n.sqrt());
    // One coefficient per block: every symbol of a row sees the same h.
    for r in (0..N).step_by(997) {
        for s in 0..3 {
            assert!((y.get(r, s) - h[r]).norm() < 1e-5);
        }
    }
}

#[test]
fn perturbation_energy_matches_variance() {
    let var = 0.02;
    let w = sample_perturbation(N / 4, 4, var, &mut SeedTree::new(1).stream("w"));
    let e = w.mean_symbol_energy();
    assert!((e - var).abs() < 5.0 * var / (N as f64).sqrt(), "{e}");
}
