use proptest::prelude::*;

use bdptune::model::{
    advise, apply, compute_bdp, needs_tuning, protocol_efficiency, recommend_buffer, LinkSpec,
    NicConfig, Preset, PAGE_BYTES,
};
use bdptune::probe::RttReport;
use bdptune::simulator::{self, simulate_throughput, LimitingFactor, ModelParams};
use bdptune::sysctl;
use bdptune::{ByteTriple, TcpBufferConfig};

fn triple() -> impl Strategy<Value = ByteTriple> {
    (1u64..1 << 20, 0u64..1 << 24, 0u64..1 << 30).prop_map(|(min, d, m)| ByteTriple {
        min,
        default: min + d,
        max: min + d + m,
    })
}

fn config() -> impl Strategy<Value = TcpBufferConfig> {
    (
        triple(),
        triple(),
        1u64..1 << 32,
        1u64..1 << 32,
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(
            |(rmem, wmem, rmem_max, wmem_max, sack_enabled, moderate_rcvbuf)| TcpBufferConfig {
                rmem,
                wmem,
                rmem_max,
                wmem_max,
                sack_enabled,
                moderate_rcvbuf,
            },
        )
}

fn link() -> impl Strategy<Value = LinkSpec> {
    (
        1e3f64..1e11,
        0.0f64..0.5,
        prop_oneof![Just(0.0), 0.0f64..0.01],
    )
        .prop_map(|(c, r, l)| LinkSpec::with_loss(c, r, l).unwrap())
}

fn nic() -> impl Strategy<Value = NicConfig> {
    (41u32..65_536, 1u32..100_000).prop_map(|(m, q)| NicConfig::new(m, q).unwrap())
}

proptest! {
    #[test]
    fn bdp_scales_linearly(c in 1.0f64..1e11, r in 0.0f64..1.0, k in 1u32..16) {
        let base = compute_bdp(&LinkSpec::new(c, r).unwrap()).value();
        let k = f64::from(k);
        let scaled_c = compute_bdp(&LinkSpec::new(c * k, r).unwrap()).value();
        let scaled_r = compute_bdp(&LinkSpec::new(c, r * k).unwrap()).value();
        prop_assert!((scaled_c - k * base).abs() <= 1e-9 * k * base.max(1.0));
        prop_assert!((scaled_r - k * base).abs() <= 1e-9 * k * base.max(1.0));
    }

    #[test]
    fn needs_tuning_is_monotone(b1 in 1u64..1 << 34, b2 in 1u64..1 << 34, c in 1.0f64..1e11, r in 0.0f64..10.0) {
        let (lo, hi) = (b1.min(b2), b1.max(b2));
        let bdp = compute_bdp(&LinkSpec::new(c, r).unwrap());
        if !needs_tuning(lo, bdp) {
            prop_assert!(!needs_tuning(hi, bdp));
        }
    }

    #[test]
    fn recommend_buffer_invariants(cfg in config(), c in 1e3f64..1e11, r in 0.0f64..0.5, h in 1.0f64..4.0) {
        let bdp = compute_bdp(&LinkSpec::new(c, r).unwrap());
        let rec = recommend_buffer(bdp, h, &cfg);
        prop_assert!(rec.validate().is_ok());
        prop_assert!(rec.rmem.max >= cfg.rmem.max && rec.wmem.max >= cfg.wmem.max);
        prop_assert!(rec.rmem_max >= cfg.rmem_max && rec.wmem_max >= cfg.wmem_max);
        prop_assert!((rec.rmem.max * 8) as f64 >= bdp.value());
        for v in [rec.rmem.max, rec.wmem.max, rec.rmem_max, rec.wmem_max] {
            let raised = v != cfg.rmem.max && v != cfg.wmem.max
                && v != cfg.rmem_max && v != cfg.wmem_max;
            if raised {
                prop_assert_eq!(v % PAGE_BYTES, 0);
            }
        }
        prop_assert!(rec.sack_enabled && rec.moderate_rcvbuf);
    }

    #[test]
    fn efficiency_is_bounded_and_monotone(m1 in 41u32..100_000, m2 in 41u32..100_000) {
        let p = ModelParams::default();
        let (lo, hi) = (m1.min(m2), m1.max(m2));
        let (e_lo, e_hi) = (protocol_efficiency(lo, &p).unwrap(), protocol_efficiency(hi, &p).unwrap());
        prop_assert!(e_lo > 0.0 && e_hi < 1.0);
        prop_assert!(e_lo <= e_hi);
    }

    #[test]
    fn advise_is_idempotent(link in link(), cfg in config(), nic in nic()) {
        let p = ModelParams::default();
        let first = advise(&link, &cfg, &nic, &p);
        let (tcp2, nic2) = apply(&first, &cfg, &nic).unwrap();
        let second = advise(&link, &tcp2, &nic2, &p);
        prop_assert!(second.iter().all(|r| !r.changed), "{:?}", second);
    }

    #[test]
    fn tree_round_trip(cfg in config()) {
        let dir = tempfile::tempdir().unwrap();
        sysctl::write_tree(dir.path(), &cfg).unwrap();
        prop_assert_eq!(sysctl::read_snapshot(dir.path()).unwrap().config, cfg);
    }

    #[test]
    fn simulation_is_deterministic_and_bounded(link in link(), cfg in config(), nic in nic()) {
        let p = ModelParams::default();
        let a = simulate_throughput(&link, &cfg, &nic, &p).unwrap();
        let b = simulate_throughput(&link, &cfg, &nic, &p).unwrap();
        prop_assert_eq!(a.throughput_bps.to_bits(), b.throughput_bps.to_bits());
        prop_assert_eq!(a.limiting_factor, b.limiting_factor);
        let eff = protocol_efficiency(nic.mtu_bytes(), &p).unwrap();
        prop_assert!(a.throughput_bps >= 0.0);
        prop_assert!(a.throughput_bps <= link.capacity_bps() * eff * (1.0 + 1e-12));
    }

    #[test]
    fn buffer_monotone_without_loss(
        c in 1e6f64..1e11,
        r in 1e-5f64..0.2,
        mut sizes in prop::collection::vec(1u64..1 << 30, 2..8),
        nic in nic(),
    ) {
        let link = LinkSpec::new(c, r).unwrap();
        let p = ModelParams { background_loss: 0.0, overflow_loss_coeff: 0.0, ..ModelParams::default() };
        sizes.sort_unstable();
        let pts = simulator::sweep_buffer(&link, &nic, &p, &sizes).unwrap();
        for w in pts.windows(2) {
            prop_assert!(w[1].throughput_bps >= w[0].throughput_bps);
        }
    }

    #[test]
    fn rtt_stats_ignore_order(mut xs in prop::collection::vec(1e-6f64..1.0, 1..40), seed in any::<u64>()) {
        let a = RttReport::from_samples("t", xs.clone(), 0).unwrap();
        let n = xs.len();
        xs.rotate_left((seed as usize) % n);
        xs.reverse();
        let b = RttReport::from_samples("t", xs, 0).unwrap();
        prop_assert_eq!(a.min_s, b.min_s);
        prop_assert_eq!(a.median_s, b.median_s);
        prop_assert_eq!(a.max_s, b.max_s);
        prop_assert!((a.mean_s - b.mean_s).abs() <= 1e-12);
        prop_assert!(a.min_s <= a.median_s && a.median_s <= a.max_s);
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs()
}

// Reference values computed by an independent implementation of the model.

#[test]
fn frozen_preset_defaults() {
    let p = ModelParams::default();
    let cases = [
        (Preset::HomeLan, 949284785.4356307, LimitingFactor::Capacity),
        (Preset::Dc10g, 442430379.7468354, LimitingFactor::Window),
    ];
    for (preset, bps, factor) in cases {
        let pred = simulate_throughput(
            &preset.link(None).unwrap(),
            &TcpBufferConfig::linux_defaults(),
            &NicConfig::default(),
            &p,
        )
        .unwrap();
        assert!(
            close(pred.throughput_bps, bps),
            "{preset:?}: {}",
            pred.throughput_bps
        );
        assert_eq!(pred.limiting_factor, factor);
    }
}

#[test]
fn frozen_queue_sweep() {
    use LimitingFactor::*;
    let link = Preset::Dc10g.link(None).unwrap();
    let tcp = TcpBufferConfig::linux_defaults().with_max_buffers(256_000_000);
    let expected = [
        (1000, 74192654.4385054, Loss),
        (2000, 9492847854.356306, Capacity),
        (4000, 7090351956.693203, Loss),
        (8000, 4046193692.6388764, Loss),
        (16000, 2176922304.316777, Loss),
    ];
    let queues: Vec<u32> = expected.iter().map(|e| e.0).collect();
    let pts = simulator::sweep_queue(&link, &tcp, &ModelParams::default(), &queues, 1500).unwrap();
    for (pt, (q, bps, f)) in pts.iter().zip(expected) {
        assert_eq!(pt.x, u64::from(q));
        assert!(
            close(pt.throughput_bps, bps),
            "queue {q}: {}",
            pt.throughput_bps
        );
        assert_eq!(pt.limiting_factor, f);
    }
}

#[test]
fn frozen_mtu_sweep() {
    use LimitingFactor::*;
    let link = Preset::Dc10g.link(None).unwrap();
    let tcp = TcpBufferConfig::linux_defaults().with_max_buffers(16 << 20);
    let expected = [
        (1500, 3370377829.9467735, Loss),
        (9000, 9913697720.734676, Capacity),
        (10000, 9922295277.943813, Capacity),
    ];
    let mtus: Vec<u32> = expected.iter().map(|e| e.0).collect();
    let pts = simulator::sweep_mtu(&link, &tcp, &ModelParams::default(), &mtus, 16_000).unwrap();
    for (pt, (m, bps, f)) in pts.iter().zip(expected) {
        assert!(
            close(pt.throughput_bps, bps),
            "mtu {m}: {}",
            pt.throughput_bps
        );
        assert_eq!(pt.limiting_factor, f);
    }
}

#[test]
fn frozen_buffer_sweep() {
    use LimitingFactor::*;
    let link = Preset::Dc10g.link(None).unwrap();
    let nic = NicConfig::new(1500, 16_000).unwrap();
    let expected = [
        (87380, 442430379.7468354, Window),
        (262144, 1327311392.4050632, Window),
        (524288, 2654622784.8101263, Window),
        (1048576, 5309245569.620253, Window),
        (2097152, 9492847854.356306, Capacity),
        (4194304, 9492847854.356306, Capacity),
    ];
    let sizes: Vec<u64> = expected.iter().map(|e| e.0).collect();
    let pts = simulator::sweep_buffer(&link, &nic, &ModelParams::default(), &sizes).unwrap();
    for (pt, (b, bps, f)) in pts.iter().zip(expected) {
        assert!(
            close(pt.throughput_bps, bps),
            "buffer {b}: {}",
            pt.throughput_bps
        );
        assert_eq!(pt.limiting_factor, f);
    }
}

#[test]
fn mtu_10000_wins_across_buffers_and_queues() {
    let link = Preset::Dc10g.link(None).unwrap();
    let p = ModelParams::default();
    for mb in [2u64, 4, 8, 16, 32, 64, 128, 256] {
        let tcp = TcpBufferConfig::linux_defaults().with_max_buffers(mb * 1_000_000);
        for q in [1000, 8000, 16_000] {
            let pts = simulator::sweep_mtu(&link, &tcp, &p, &[1500, 9000, 10_000], q).unwrap();
            assert_eq!(
                simulator::argmax(&pts),
                Some(2),
                "{mb} MB, queue {q}: {pts:?}"
            );
        }
    }
}
