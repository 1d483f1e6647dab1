use airgap_ae::channel::{Channel, ChannelKind};
use airgap_ae::comm::{ce_losses, CommConfig, CommStreams, CommSystem, FeedbackTransport};
use airgap_ae::rng::SeedTree;

fn small(kind: ChannelKind) -> CommConfig {
    let base = match kind {
        ChannelKind::Awgn => CommConfig::awgn(),
        ChannelKind::Rbf => CommConfig::rbf(),
    };
    CommConfig { messages: 16, ..base }
}

fn system(kind: ChannelKind, seed: u64) -> CommSystem {
    CommSystem::new(small(kind), &mut SeedTree::new(seed).stream("init")).unwrap()
}

#[test]
fn receiver_steps_reduce_loss_and_leave_transmitter_alone() {
    for kind in [ChannelKind::Awgn, ChannelKind::Rbf] {
        let mut sys = system(kind, 1);
        let ch = Channel::at_snr(kind, 15.0).unwrap();
        let tx_before = sys.transmitter().net.params().to_vec();
        let mut s = CommStreams::new(&SeedTree::new(2));
        let first = sys.train_receiver_step(&ch, 512, &mut s.messages, &mut s.channel).unwrap();
        let mut last = first;
        for _ in 0..400 {
            last = sys.train_receiver_step(&ch, 512, &mut s.messages, &mut s.channel).unwrap();
        }
        assert!(last < 0.7 * first, "{kind:?}: {first} -> {last}");
        assert_eq!(sys.transmitter().net.params(), &tx_before[..]);
    }
}

#[test]
fn zero_losses_leave_transmitter_unchanged() {
    let mut sys = system(ChannelKind::Awgn, 3);
    let ch = Channel::at_snr(ChannelKind::Awgn, 10.0).unwrap();
    let before = sys.transmitter().net.params().to_vec();
    let mut s = CommStreams::new(&SeedTree::new(4));
    let pb = sys.policy_batch(&ch, 64, &mut s.messages, &mut s.perturbation, &mut s.channel).unwrap();
    let g = sys.policy_gradient(&pb, &vec![0.0; 64]).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
    sys.transmitter_mut().apply(&g).unwrap();
    assert_eq!(sys.transmitter().net.params(), &before[..]);
}

#[test]
fn policy_gradient_is_linear_in_losses() {
    let sys = system(ChannelKind::Awgn, 5);
    let ch = Channel::at_snr(ChannelKind::Awgn, 10.0).unwrap();
    let mut s = CommStreams::new(&SeedTree::new(6));
    let pb = sys.policy_batch(&ch, 32, &mut s.messages, &mut s.perturbation, &mut s.channel).unwrap();
    let a: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
    let b: Vec<f64> = (0..32).map(|i| (i as f64 * 0.11).cos()).collect();
    let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
    let (ga, gb, gab) = (
        sys.policy_gradient(&pb, &a).unwrap(),
        sys.policy_gradient(&pb, &b).unwrap(),
        sys.policy_gradient(&pb, &ab).unwrap(),
    );
    for i in 0..ga.len() {
        let want = 2.0 * ga[i] - 3.0 * gb[i];
        assert!((gab[i] - want).abs() <= 1e-9 * (1.0 + want.abs()));
    }
}

#[test]
fn policy_batch_losses_are_cross_entropies_of_perturbed_symbols() {
    let sys = system(ChannelKind::Awgn, 7);
    let ch = Channel::at_snr(ChannelKind::Awgn, 10.0).unwrap();
    let mut s = CommStreams::new(&SeedTree::new(8));
    let pb = sys.policy_batch(&ch, 2000, &mut s.messages, &mut s.perturbation, &mut s.channel).unwrap();
    assert!(pb.losses.iter().all(|l| l.is_finite() && *l >= 0.0));
    // Perturbation energy per complex symbol is the exploration variance.
    let n = sys.config().channel_uses;
    let d: f64 = pb
        .x
        .as_slice()
        .iter()
        .zip(pb.x_p.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / (2000 * n) as f64;
    assert!((d - 0.02).abs() < 0.002, "{d}");
    // Unperturbed transmitter rows have energy N.
    for r in 0..pb.x.rows() {
        let e: f64 = pb.x.row(r).iter().map(|v| v * v).sum();
        assert!((e - n as f64).abs() < 1e-9);
    }
    let y = ch.transmit(&sys.tx_forward(&pb.messages).unwrap(), &mut SeedTree::new(1).stream("y"));
    let ce = ce_losses(&sys.rx_forward(&y).unwrap(), &pb.messages).unwrap();
    assert_eq!(ce.losses.len(), 2000);
}

#[test]
fn transmitter_step_uses_what_the_transport_delivers() {
    let ch = Channel::at_snr(ChannelKind::Awgn, 10.0).unwrap();
    let run = |transport: &FeedbackTransport| {
        let mut sys = system(ChannelKind::Awgn, 9);
        let mut s = CommStreams::new(&SeedTree::new(10));
        let mean = sys
            .train_transmitter_step(
                &ch,
                transport,
                128,
                true,
                &mut s.messages,
                &mut s.perturbation,
                &mut s.channel,
                &mut s.feedback,
            )
            .unwrap();
        (mean, sys.transmitter().net.params().to_vec())
    };
    let (m0, p0) = run(&FeedbackTransport::Perfect);
    let (m1, p1) = run(&FeedbackTransport::AdditiveGaussian { variance: 0.0 });
    assert_eq!(m0, m1);
    assert_eq!(p0, p1);
    let (m2, p2) = run(&FeedbackTransport::AdditiveGaussian { variance: 1.0 });
    assert_ne!(m0, m2);
    assert_ne!(p0, p2);
}
