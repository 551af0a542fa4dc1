mod common;

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scldpc::decoder::hard_decision;
use scldpc::lifting::{lift, LiftSpec};
use scldpc::protograph::{build_chain, DopingSpec, EdgeSpreading};
use scldpc::{flood_decode, AwgnChannel, ChannelConfig, TannerGraph, WindowConfig};

use common::{bitwise_map_llrs, codeword_basis};

fn exact_config(i_max: usize) -> WindowConfig {
    WindowConfig {
        i_max,
        early_stop: false,
        llr_clamp: 1e6,
        ..WindowConfig::plain(1)
    }
}

/// Random tree-shaped code: every new check joins one existing variable
/// to fresh ones.
fn random_tree(rng: &mut ChaCha8Rng, checks: usize) -> (usize, Vec<Vec<usize>>) {
    let mut n = 1;
    let mut out = Vec::new();
    for _ in 0..checks {
        let anchor = rng.random_range(0..n);
        let fresh = rng.random_range(1..4);
        let mut c = vec![anchor];
        c.extend(n..n + fresh);
        n += fresh;
        out.push(c);
    }
    (n, out)
}

#[test]
fn bp_is_exact_on_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let (n, checks) = random_tree(&mut rng, 6);
        let g = TannerGraph::from_parity_checks(n, &checks);
        let llrs: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..5.0)).collect();
        let bp = flood_decode(&g, &llrs, &exact_config(20)).unwrap();
        let basis = codeword_basis(&g, &vec![true; n]);
        let map = bitwise_map_llrs(&g, &basis, &llrs);
        for (a, b) in bp.iter().zip(&map) {
            assert_relative_eq!(a, b, epsilon = 1e-9, max_relative = 1e-9);
        }
    }
}

#[test]
fn null_space_has_expected_dimension() {
    let chain = build_chain(EdgeSpreading::regular_3_6(), 5, DopingSpec::none(), true).unwrap();
    let g = lift(&chain, &LiftSpec::random(2, 0)).unwrap();
    let basis = codeword_basis(&g, &vec![true; g.vn_count()]);
    assert!(basis.len() >= g.vn_count() - g.cn_count());
    for word in &basis {
        assert!(g.syndrome_ok(word));
    }
}

#[test]
fn doped_bits_never_appear_in_codewords() {
    let chain = build_chain(
        EdgeSpreading::regular_3_6(),
        5,
        DopingSpec::vn(vec![2]),
        true,
    )
    .unwrap();
    let g = lift(&chain, &LiftSpec::random(2, 0)).unwrap();
    let free: Vec<bool> = (0..g.vn_count()).map(|v| !g.is_known(v)).collect();
    for word in codeword_basis(&g, &free) {
        assert!(g.syndrome_ok(&word));
        assert!(g.known_vns().all(|v| word[v] == 0));
    }
}

#[test]
fn whole_chain_bp_tracks_map_on_small_chain() {
    let chain = build_chain(EdgeSpreading::regular_3_6(), 4, DopingSpec::none(), true).unwrap();
    let g = lift(&chain, &LiftSpec::random(2, 3)).unwrap();
    let basis = codeword_basis(&g, &vec![true; g.vn_count()]);
    let ch = AwgnChannel::new(ChannelConfig {
        ebn0_db: 6.0,
        rate: 0.25,
        seed: 8,
        llr_sat: 1000.0,
    })
    .unwrap();
    let mut agree = 0;
    let trials = 100;
    for frame in 0..trials {
        let llrs: Vec<f64> = (0..g.n_vn_times())
            .flat_map(|b| ch.transmit_block(frame, b, &g).values)
            .collect();
        let bp = flood_decode(&g, &llrs, &WindowConfig::default()).unwrap();
        let map = bitwise_map_llrs(&g, &basis, &llrs);
        agree += usize::from(
            bp.iter()
                .zip(&map)
                .all(|(a, b)| hard_decision(*a) == hard_decision(*b)),
        );
    }
    assert!(agree >= 95, "{agree}/{trials}");
}

#[test]
fn channel_llr_statistics() {
    let chain = build_chain(EdgeSpreading::regular_3_6(), 10, DopingSpec::none(), true).unwrap();
    let g = lift(&chain, &LiftSpec::random(500, 0)).unwrap();
    let ch = AwgnChannel::new(ChannelConfig {
        ebn0_db: 1.0,
        rate: 0.5,
        seed: 99,
        llr_sat: 1000.0,
    })
    .unwrap();
    let s2 = ch.sigma() * ch.sigma();
    let samples: Vec<f64> = (0..20u64)
        .flat_map(|f| (0..10).map(move |b| (f, b)))
        .flat_map(|(f, b)| ch.transmit_block(f, b, &g).values)
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let (mu, v) = (2.0 / s2, 4.0 / s2);
    assert!((mean - mu).abs() < 4.0 * (v / n).sqrt(), "{mean} vs {mu}");
    // Var of the sample variance of a Gaussian is 2 v^2 / (n - 1).
    assert!(
        (var - v).abs() < 4.0 * (2.0 * v * v / (n - 1.0)).sqrt(),
        "{var} vs {v}"
    );
}
