use scldpc::lifting::LiftSpec;
use scldpc::protograph::{build_chain, DopingSpec, EdgeSpreading};
use scldpc::simulator::{
    errdist_report, run_campaign, BurstMode, BurstSpec, CampaignConfig, FrameFilter, Simulation,
};
use scldpc::WindowConfig;

fn sim(length: usize, lift: usize, doping: DopingSpec, window: WindowConfig) -> Simulation {
    let chain = build_chain(EdgeSpreading::regular_3_6(), length, doping, true).unwrap();
    Simulation::new(chain, &LiftSpec::random(lift, 21), window, None).unwrap()
}

fn fast(w: usize) -> WindowConfig {
    WindowConfig {
        i_max: 10,
        ..WindowConfig::plain(w)
    }
}

#[test]
fn frames_are_isolated() {
    let s = sim(20, 24, DopingSpec::none(), fast(4));
    let mut c = CampaignConfig::new(vec![1.0], 8, 5);
    c.max_block_errors = None;
    let out = run_campaign(&s, &c, 2).unwrap();
    let burst = BurstSpec {
        start_block: 3,
        length: 6,
        mode: BurstMode::Erase,
    };
    for (k, r) in out.frames[0].iter().enumerate() {
        assert_eq!(r, &s.run_frame(1.0, 0, 5, k, None, 5).unwrap());
    }
    // Corrupting frame 3 does not touch its neighbours.
    let hit = s.run_frame(1.0, 0, 5, 3, Some(&burst), 5).unwrap();
    assert_ne!(hit, out.frames[0][3]);
    for k in [2, 4] {
        assert_eq!(
            s.run_frame(1.0, 0, 5, k, None, 5).unwrap(),
            out.frames[0][k]
        );
    }
}

#[test]
fn snr_points_use_distinct_streams() {
    let s = sim(20, 24, DopingSpec::none(), fast(4));
    let a = s.run_frame(1.0, 0, 5, 0, None, 5).unwrap();
    let b = s.run_frame(1.0, 1, 5, 0, None, 5).unwrap();
    assert_ne!(a.avg_llrs, b.avg_llrs);
}

#[test]
fn doped_bits_are_excluded() {
    let positions = vec![5, 10, 15];
    let s = sim(20, 24, DopingSpec::vn(positions.clone()), fast(4));
    let r = s.run_frame(0.5, 0, 1, 0, None, 5).unwrap();
    assert_eq!(r.bits, (20 - 3) * 48);
    for p in positions {
        assert_eq!(r.per_block_bit_errors[p], 0);
    }
}

#[test]
fn ber_decreases_with_snr() {
    let s = sim(30, 32, DopingSpec::none(), fast(4));
    let mut c = CampaignConfig::new(vec![-1.0, 1.0], 400, 2);
    c.max_block_errors = Some(100);
    let out = run_campaign(&s, &c, 1).unwrap();
    assert!(out.metrics.iter().all(|m| m.block_errors >= 100));
    assert!(out.metrics[1].ber() <= out.metrics[0].ber());
}

#[test]
fn errdist_support_of_burst_frames() {
    let s = sim(40, 32, DopingSpec::none(), fast(4));
    let burst = BurstSpec {
        start_block: 10,
        length: 9,
        mode: BurstMode::Flip,
    };
    let frames: Vec<_> = (0..4)
        .map(|f| s.run_frame(3.0, 0, 9, f, Some(&burst), 5).unwrap())
        .collect();
    let rep = errdist_report(&frames, FrameFilter::Errors).unwrap();
    for d in &rep {
        assert_eq!(d.rows.len(), 40);
        let first = d.rows.iter().position(|r| r.1 > 0).unwrap();
        // Blocks sharing a window with the burst may fail too.
        assert!(
            first + 4 >= 10,
            "errors long before the burst in frame {}",
            d.frame
        );
    }
}
