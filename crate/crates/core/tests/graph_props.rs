use chanprob_core::graph::uncertain_hop_count;
use chanprob_core::{
    k_shortest_paths, path_success_prob, Amount, BeliefState, Capacity, ChannelGraph, Direction,
    GraphError, Hop, NodeIndex, Path, PriorSpec,
};
use proptest::prelude::*;

/// Node count, channel endpoints and capacities.
type Spec = (usize, Vec<(usize, usize, u64)>);

fn build(spec: &Spec) -> ChannelGraph {
    let mut g = ChannelGraph::new();
    for i in 0..spec.0 {
        g.add_node(format!("v{i}")).unwrap();
    }
    for (i, &(a, b, c)) in spec.1.iter().enumerate() {
        g.add_channel(format!("c{i:03}"), &format!("v{a}"), &format!("v{b}"), c, None).unwrap();
    }
    g
}

fn random_graph(max_nodes: usize, max_channels: usize) -> impl Strategy<Value = Spec> {
    (2..=max_nodes).prop_flat_map(move |n| {
        let edge = (0..n, 0..n, 1u64..=10).prop_filter("no self loops", |(a, b, _)| a != b);
        (Just(n), prop::collection::vec(edge, 0..=max_channels))
    })
}

/// Every simple path, by exhaustive depth-first search.
fn all_simple_paths(g: &ChannelGraph, src: NodeIndex, dst: NodeIndex, a: Amount) -> Vec<Path> {
    fn go(g: &ChannelGraph, at: NodeIndex, dst: NodeIndex, a: Amount, seen: &mut Vec<NodeIndex>, hops: &mut Vec<Hop>, out: &mut Vec<Path>) {
        if at == dst {
            out.push(Path { source: seen[0], hops: hops.clone() });
            return;
        }
        for (c, ch) in g.channels() {
            if ch.capacity.get() < a.0 {
                continue;
            }
            let (next, direction) = if ch.node_a == at {
                (ch.node_b, Direction::AToB)
            } else if ch.node_b == at {
                (ch.node_a, Direction::BToA)
            } else {
                continue;
            };
            if seen.contains(&next) {
                continue;
            }
            seen.push(next);
            hops.push(Hop { channel: c, direction });
            go(g, next, dst, a, seen, hops, out);
            hops.pop();
            seen.pop();
        }
    }
    let mut out = Vec::new();
    go(g, src, dst, a, &mut vec![src], &mut Vec::new(), &mut out);
    out.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.channel_ids(g).cmp(&y.channel_ids(g))));
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn k_shortest_matches_exhaustive_enumeration(spec in random_graph(8, 16), s in 0usize..8, d in 0usize..8, a in 0u64..=10, k in prop::sample::select(vec![1usize, 2, 3, 5, 10, 1000])) {
        let g = build(&spec);
        let (src, dst) = (NodeIndex(s % spec.0), NodeIndex(d % spec.0));
        prop_assume!(src != dst);
        let mut want = all_simple_paths(&g, src, dst, Amount(a));
        want.truncate(k);
        match k_shortest_paths(&g, src, dst, k, Amount(a)) {
            Ok(got) => {
                prop_assert_eq!(&got, &want);
                for p in &got {
                    p.validate(&g).unwrap();
                    let mut ids: Vec<_> = p.hops.iter().map(|h| h.channel).collect();
                    ids.sort();
                    ids.dedup();
                    prop_assert_eq!(ids.len(), p.len(), "repeated channel");
                }
                prop_assert_eq!(k_shortest_paths(&g, src, dst, k, Amount(a)).unwrap(), got);
            }
            Err(GraphError::NoPath { .. }) => prop_assert!(want.is_empty()),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn path_probability_is_monotone_and_bounded(
        caps in prop::collection::vec(1u64..500, 1..6),
        kinds in prop::collection::vec(0u8..4, 6),
        a1 in 0u64..600,
        a2 in 0u64..600,
        own in 0u64..=1000,
    ) {
        let (g, path) = line(&caps, &kinds);
        let mut beliefs = BeliefState::new();
        let first = path.hops[0].channel;
        beliefs.set_known_balance(&g, first, own.min(caps[0])).unwrap();
        let (lo, hi) = (a1.min(a2), a1.max(a2));
        let s_lo = path_success_prob(&g, &path, Amount(lo), &beliefs);
        let s_hi = path_success_prob(&g, &path, Amount(hi), &beliefs);
        prop_assert!(s_hi <= s_lo + 1e-15);

        let uncertain: Vec<f64> = path.hops[1..].iter().map(|h| beliefs.hop_success_prob(&g, *h, Amount(hi))).collect();
        prop_assert_eq!(uncertain.len(), uncertain_hop_count(&g, &path));
        let p_max = uncertain.iter().copied().fold(0.0, f64::max);
        prop_assert!(s_hi <= p_max.powi(uncertain.len() as i32) + 1e-15);

        let first_factor = beliefs.hop_success_prob(&g, path.hops[0], Amount(hi));
        prop_assert!(first_factor == 0.0 || first_factor == 1.0);
        prop_assert_eq!(first_factor == 1.0, own.min(caps[0]) >= hi);
        prop_assert_eq!(path_success_prob(&g, &path, Amount(0), &beliefs), 1.0);
    }

    #[test]
    fn reversing_a_hop_swaps_balance_roles(c in 1u64..1000, kind in 0u8..4, a in 0u64..1100) {
        let (g, _) = line(&[c, c], &[kind, kind]);
        let beliefs = BeliefState::new();
        let ch = g.channel_index("c001").unwrap();
        let prior = &g.channel(ch).prior;
        let forward = beliefs.hop_success_prob(&g, Hop { channel: ch, direction: Direction::AToB }, Amount(a));
        let backward = beliefs.hop_success_prob(&g, Hop { channel: ch, direction: Direction::BToA }, Amount(a));
        let want_forward: f64 = (0..=c).filter(|&b| b >= a).map(|b| prior.pmf(b)).sum();
        let want_backward: f64 = (0..=c).filter(|&b| c - b >= a).map(|b| prior.pmf(b)).sum();
        prop_assert!((forward - want_forward).abs() < 1e-12);
        prop_assert!((backward - want_backward).abs() < 1e-12);
    }
}

/// `v0 - v1 - ... - vn` with the given capacities; channel `i` gets prior
/// kind `kinds[i]` and its `node_a` alternates so both hop directions occur.
fn line(caps: &[u64], kinds: &[u8]) -> (ChannelGraph, Path) {
    let mut g = ChannelGraph::new();
    for i in 0..=caps.len() {
        g.add_node(format!("v{i}")).unwrap();
    }
    for (i, &c) in caps.iter().enumerate() {
        let (a, b) = if i % 2 == 0 { (i, i + 1) } else { (i + 1, i) };
        let idx = g.add_channel(format!("c{i:03}"), &format!("v{a}"), &format!("v{b}"), c, None).unwrap();
        let spec = match kinds[i] % 4 {
            0 => PriorSpec::Uniform,
            1 => PriorSpec::Bimodal { low_side_prob: 0.3 },
            2 => PriorSpec::Normal { mean_frac: 0.5, stddev_frac: 0.2 },
            _ => PriorSpec::Mixed { p_bimodal: 0.4 },
        };
        g.set_prior(idx, spec.build(Capacity::new(c).unwrap()).unwrap()).unwrap();
    }
    let names: Vec<String> = (0..=caps.len()).map(|i| format!("v{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let path = Path::through(&g, &refs).unwrap();
    (g, path)
}

#[test]
fn golden_path_probabilities() {
    let (g, path) = line(&[100; 5], &[0; 5]);
    let mut beliefs = BeliefState::new();
    beliefs.set_known_balance(&g, path.hops[0].channel, 100).unwrap();
    let s = path_success_prob(&g, &path, Amount(10), &beliefs);
    assert!((s - 0.659).abs() < 0.0005, "{s}");
    let two = Path { source: path.source, hops: path.hops[..3].to_vec() };
    assert!((path_success_prob(&g, &two, Amount(10), &beliefs) - (91.0f64 / 101.0).powi(2)).abs() < 1e-12);
    assert_eq!(uncertain_hop_count(&g, &two), 2);
}
