mod common;

use proptest::prelude::*;

use common::oracle::{brute_force, build_graph, graph};
use cvroute::network::{EdgeIndex, NodeIndex, Overrides, RoadNetwork, TravelTimeOverride};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn dijkstra_matches_brute_force((n, edges) in graph(), s in 0usize..8, t in 0usize..8) {
        let (s, t) = (s % n, t % n);
        let net = build_graph(n, &edges);
        let got = net.shortest_path(&format!("n{s}"), &format!("n{t}")).unwrap();
        match (brute_force(n, &edges, s, t), got) {
            (None, None) => {}
            (Some((cost, names)), Some(sp)) => {
                prop_assert_eq!(sp.cost, cost as f64);
                prop_assert!(sp.route.is_connected(&net));
                let ids: Vec<String> = sp.route.edge_ids(&net).map(str::to_string).collect();
                prop_assert_eq!(ids, names);
            }
            (want, got) => prop_assert!(false, "oracle {:?} vs dijkstra {:?}", want, got),
        }
    }

    #[test]
    fn blocked_edges_are_never_used((n, edges) in graph(), blocked in prop::collection::vec(any::<prop::sample::Index>(), 0..4)) {
        let net = build_graph(n, &edges);
        if edges.is_empty() {
            return Ok(());
        }
        let mut ov = Overrides::new();
        let mut kept = edges.clone();
        for b in &blocked {
            let i = b.index(edges.len());
            ov.insert(EdgeIndex(i), TravelTimeOverride::Blocked).unwrap();
            // unreachable stand-in, keeps edge numbering for the oracle
            kept[i] = (usize::MAX, usize::MAX, 0);
        }
        let got = net.shortest_path_with(&ov, NodeIndex(0), NodeIndex(n - 1));
        let want = brute_force(n, &kept, 0, n - 1);
        match (want, got) {
            (None, None) => {}
            (Some((cost, _)), Some(sp)) => {
                prop_assert_eq!(sp.cost, cost as f64);
                for e in &sp.route.edges {
                    prop_assert!(ov.get(*e).is_none());
                }
            }
            (want, got) => prop_assert!(false, "oracle {:?} vs dijkstra {:?}", want, got),
        }
    }

    #[test]
    fn finite_overrides_replace_free_flow_time((n, edges) in graph(), slow in 0usize..64, secs in 0u32..=50) {
        if edges.is_empty() {
            return Ok(());
        }
        let i = slow % edges.len();
        let net = build_graph(n, &edges);
        let mut ov = Overrides::new();
        ov.insert(EdgeIndex(i), TravelTimeOverride::Seconds(f64::from(secs))).unwrap();
        let mut changed = edges.clone();
        changed[i].2 = secs;
        let got = net.shortest_path_with(&ov, NodeIndex(0), NodeIndex(n - 1)).map(|sp| sp.cost);
        let want = brute_force(n, &changed, 0, n - 1).map(|(c, _)| c as f64);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn network_text_round_trips((n, edges) in graph(), lanes in 1u32..4, limit in 1.0f64..40.0) {
        let mut net = build_graph(n, &edges);
        let text = net.to_text().replace(" 1 1\n", &format!(" {limit} {lanes}\n"));
        net = RoadNetwork::parse(&text).unwrap();
        let again = RoadNetwork::parse(&net.to_text()).unwrap();
        prop_assert_eq!(net.nodes(), again.nodes());
        prop_assert_eq!(net.edges(), again.edges());
    }
}

#[test]
fn unknown_ids_are_errors() {
    let net = build_graph(3, &[(0, 1, 1), (1, 2, 1)]);
    assert!(net.shortest_path("n0", "nope").is_err());
    assert!(net.shortest_path("nope", "n1").is_err());
    assert_eq!(net.shortest_path("n2", "n0").unwrap(), None);
    assert_eq!(net.shortest_path("n0", "n0").unwrap(), None);
}

#[test]
fn negative_override_is_rejected() {
    let mut ov = Overrides::new();
    assert!(ov.insert(EdgeIndex(0), TravelTimeOverride::Seconds(-1.0)).is_err());
    assert!(ov.is_empty());
}

#[test]
fn parse_errors_name_the_line() {
    let err = RoadNetwork::parse("NODE a 0 0\nNODE b 1 0\nEDGE x a b 10 abc 1\n").unwrap_err();
    assert!(err.to_string().starts_with("line 3:"), "{err}");
    let err = RoadNetwork::parse("NODE a 0 0\nEDGE x a z 10 1 1\n").unwrap_err();
    assert!(err.to_string().contains('z'), "{err}");
}
