use proptest::prelude::*;

use scldpc::decoder::{min_sum_check, sum_product_check};
use scldpc::lifting::{expand_protograph, lift, verify_lift, LiftSpec};
use scldpc::protograph::{
    build_chain, design_rate, rate_to_f64, BaseMatrix, DopingKind, DopingSpec, EdgeSpreading, Rate,
};
use scldpc::{decode_chain, decode_chain_with_extension, WindowConfig};

fn spreading() -> impl Strategy<Value = EdgeSpreading> {
    // Random spreadings of a 1 x 2 or 2 x 4 base with entries up to 3.
    (1usize..=2, 1usize..=3)
        .prop_flat_map(|(rows, m)| {
            let cols = 2 * rows;
            prop::collection::vec(
                prop::collection::vec(prop::collection::vec(0u32..=1, cols), rows),
                m + 1,
            )
        })
        .prop_filter_map("no edges", |comps| {
            let rows = comps[0].len();
            let cols = comps[0][0].len();
            let base: Vec<Vec<u32>> = (0..rows)
                .map(|r| {
                    (0..cols)
                        .map(|c| comps.iter().map(|b| b[r][c]).sum())
                        .collect()
                })
                .collect();
            let base = BaseMatrix::new(base).ok()?;
            let comps = comps
                .into_iter()
                .map(|c| BaseMatrix::component(c).unwrap())
                .collect();
            EdgeSpreading::new(base, comps).ok()
        })
}

fn doping_positions(length: usize, spacing: usize) -> Vec<usize> {
    (spacing..length.saturating_sub(spacing))
        .step_by(spacing)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_conservation(s in spreading(), length in 4usize..40) {
        let chain = build_chain(s.clone(), length, DopingSpec::none(), true).unwrap();
        prop_assert_eq!(chain.edge_count(), length as u32 * s.base().edge_count());
        for t in 0..length {
            let degree: u32 = (0..s.base().cols()).map(|c| s.base().col_degree(c)).sum();
            prop_assert_eq!(chain.vn_degree(t), degree);
        }
    }

    #[test]
    fn rate_matches_node_counts(
        s in spreading(),
        length in 10usize..60,
        kind in prop_oneof![Just(DopingKind::None), Just(DopingKind::Vn), Just(DopingKind::Cn)],
        spacing in 4usize..8,
    ) {
        let positions = doping_positions(length, spacing);
        let doping = DopingSpec { kind, positions };
        prop_assume!(doping.validate(length, s.m()).is_ok());
        let chain = build_chain(s, length, doping, true).unwrap();
        let rep = design_rate(&chain);
        let counted = Rate::from_integer(1) - Rate::new(chain.n_c() as i64, chain.n_v() as i64);
        prop_assert_eq!(rep.doped, counted);
    }

    #[test]
    fn rate_loss_grows_with_doping(length in 20usize..200, d in 1usize..5) {
        let s = EdgeSpreading::regular_3_6();
        let mut prev_vn = design_rate(&build_chain(s.clone(), length, DopingSpec::none(), true).unwrap());
        let mut prev_cn = prev_vn.clone();
        for k in 1..=d {
            let positions: Vec<usize> = (1..=k).map(|i| i * length / (d + 1)).collect();
            prop_assume!(DopingSpec::cn(positions.clone()).validate(length, 2).is_ok());
            let vn = design_rate(&build_chain(s.clone(), length, DopingSpec::vn(positions.clone()), true).unwrap());
            let cn = design_rate(&build_chain(s.clone(), length, DopingSpec::cn(positions), true).unwrap());
            prop_assert!(vn.doped < prev_vn.doped);
            prop_assert!(cn.doped < prev_cn.doped);
            prop_assert!(vn.rate_loss() > Rate::from_integer(0));
            prev_vn = vn;
            prev_cn = cn;
        }
    }

    #[test]
    fn vn_doping_keeps_graph_shape(length in 8usize..50, p in 1usize..7) {
        let s = EdgeSpreading::regular_3_6();
        let p = p.min(length - 1);
        let plain = build_chain(s.clone(), length, DopingSpec::none(), true).unwrap();
        let doped = build_chain(s, length, DopingSpec::vn(vec![p]), true).unwrap();
        prop_assert_eq!(plain.cn_blocks(), doped.cn_blocks());
        for t in 0..length {
            prop_assert_eq!(doped.is_known(t), t == p);
        }
    }

    #[test]
    fn cn_doping_is_local(length in 12usize..50, frac in 0.2f64..0.7) {
        let s = EdgeSpreading::regular_3_6();
        let p = ((length as f64 * frac) as usize).clamp(1, length - 4);
        let plain = build_chain(s.clone(), length, DopingSpec::none(), true).unwrap();
        let doped = build_chain(s, length, DopingSpec::cn(vec![p]), true).unwrap();
        prop_assert_eq!(doped.n_cn_times(), plain.n_cn_times() + 1);
        for t in 0..length {
            let shift = usize::from(t >= p);
            for i in 0..3 {
                prop_assert_eq!(doped.vn_blocks()[t].cn_time(i), plain.vn_blocks()[t].cn_time(i) + shift);
            }
        }
    }

    #[test]
    fn lift_preserves_degrees(s in spreading(), length in 4usize..12, lift_m in 3usize..12, seed: u64) {
        let chain = build_chain(s, length, DopingSpec::none(), true).unwrap();
        let g = lift(&chain, &LiftSpec::random(lift_m, seed)).unwrap();
        prop_assert!(verify_lift(&g, &chain).is_valid());
        prop_assert_eq!(g.edge_count(), chain.edge_count() as usize * lift_m);
        let proto = expand_protograph(&chain);
        for v in 0..g.vn_count() {
            prop_assert_eq!(g.vn_degree(v), proto.vn_degree(v / lift_m));
        }
        prop_assert_eq!(&g, &lift(&chain, &LiftSpec::random(lift_m, seed)).unwrap());
    }

    #[test]
    fn circulant_lift_is_valid(length in 4usize..12, lift_m in 3usize..20, seed: u64) {
        let chain = build_chain(EdgeSpreading::regular_3_6(), length, DopingSpec::none(), true).unwrap();
        let g = lift(&chain, &LiftSpec::circulant(lift_m, seed)).unwrap();
        prop_assert!(verify_lift(&g, &chain).is_valid());
    }

    #[test]
    fn alist_round_trip(length in 3usize..8, lift_m in 2usize..6, seed: u64) {
        let chain = build_chain(EdgeSpreading::regular_3_6(), length, DopingSpec::none(), true).unwrap();
        let g = lift(&chain, &LiftSpec::random(lift_m, seed)).unwrap();
        let back = scldpc::TannerGraph::from_alist(&g.to_alist()).unwrap();
        let a: Vec<_> = g.edges().collect();
        let b: Vec<_> = back.edges().collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn check_output_bounded_by_other_inputs(inputs in prop::collection::vec(-30.0f64..30.0, 2..10)) {
        let mut sp = vec![0.0; inputs.len()];
        let mut ms = vec![0.0; inputs.len()];
        sum_product_check(&inputs, &mut sp, 50.0);
        min_sum_check(&inputs, &mut ms, 1.0, 50.0);
        for k in 0..inputs.len() {
            let min_other = inputs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, x)| x.abs())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(sp[k].abs() <= min_other + 1e-9);
            prop_assert!((ms[k].abs() - min_other).abs() < 1e-12);
            let sign: f64 = inputs.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, x)| x.signum()).product();
            if sp[k] != 0.0 {
                prop_assert_eq!(sp[k].signum(), sign);
            }
            prop_assert_eq!(ms[k].signum(), sign);
        }
    }

    #[test]
    fn noiseless_decoding_satisfies_every_check(
        length in 6usize..20,
        w in 3usize..7,
        which in 0usize..4,
        seed: u64,
    ) {
        let mid = length / 2;
        let (doping, config) = match which {
            0 => (DopingSpec::none(), WindowConfig::plain(w)),
            1 => (DopingSpec::vn(vec![mid]), WindowConfig::plain(w)),
            2 => (DopingSpec::cn(vec![mid.clamp(1, length - 3)]), WindowConfig::plain(w)),
            _ => (DopingSpec::none(), WindowConfig::with_extension(w, w + 4, 1, 8.0)),
        };
        let chain = build_chain(EdgeSpreading::regular_3_6(), length, doping, true).unwrap();
        let g = lift(&chain, &LiftSpec::random(8, seed)).unwrap();
        let bs = g.block_size();
        let mut supplier = |_: usize| vec![1000.0; bs];
        let decisions = if which == 3 {
            decode_chain_with_extension(&g, &config, &mut supplier).unwrap()
        } else {
            decode_chain(&g, &config, &mut supplier).unwrap()
        };
        prop_assert_eq!(decisions.len(), length);
        let bits: Vec<u8> = decisions.iter().flat_map(|d| d.bits.iter().copied()).collect();
        prop_assert!(bits.iter().all(|&b| b == 0));
        prop_assert!(g.syndrome_ok(&bits));
    }
}

#[test]
fn rate_to_f64_is_exact_for_paper_values() {
    let s = EdgeSpreading::regular_3_6();
    let vn = design_rate(&build_chain(s, 500, DopingSpec::vn(vec![250]), true).unwrap());
    assert_eq!(vn.doped, Rate::new(248, 499));
    assert_eq!(format!("{:.5}", rate_to_f64(vn.doped)), "0.49699");
}
