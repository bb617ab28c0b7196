use std::collections::BTreeSet;

use graphmdl::metrics::{edge_errors, edit_count, match_relations, relation_f1, GedMode, Overlap};
use graphmdl::{Edge, Graph, Node, NodeId, Span};
use proptest::prelude::*;

const CONTENTS: &[&str] = &["rain", "wet road", "slow traffic", "late bus", "missed class", "sad student"];

fn arb_content_graph(max_nodes: usize) -> impl Strategy<Value = Graph> {
    (0..=max_nodes).prop_flat_map(|n| {
        (
            prop::sample::subsequence(CONTENTS.to_vec(), n),
            prop::collection::btree_set((0..n.max(1) as u32, 0..n.max(1) as u32), 0..=n * 2),
            prop::collection::vec(prop::sample::select(vec!["causes", "before"]), n * 2 + 1),
        )
            .prop_map(|(contents, pairs, types)| {
                let mut g = Graph::new();
                for c in &contents {
                    g.add_node(*c, "event");
                }
                for (k, (h, t)) in pairs.into_iter().enumerate() {
                    if h != t && (h as usize) < contents.len() && (t as usize) < contents.len() {
                        g.add_edge(NodeId(h), NodeId(t), types[k]);
                    }
                }
                g
            })
    })
}

/// Argument graphs over a 30-token document with random spans and labels.
fn arb_span_graph() -> impl Strategy<Value = Graph> {
    (1usize..=5).prop_flat_map(|n| {
        (
            prop::collection::vec((0usize..25, 1usize..6, prop::sample::select(vec!["Claim", "Premise"])), n),
            prop::collection::btree_set((0..n as u32, 0..n as u32), 0..=n * 2),
            prop::collection::vec(prop::sample::select(vec!["supports", "attacks"]), n * 2 + 1),
        )
            .prop_map(|(nodes, pairs, labels)| {
                let mut g = Graph::new();
                for (i, (start, len, ty)) in nodes.into_iter().enumerate() {
                    g.nodes.push(Node {
                        id: NodeId(i as u32),
                        content: format!("unit {i}"),
                        node_type: ty.into(),
                        span: Some(Span::new(start, start + len)),
                    });
                }
                for (k, (h, t)) in pairs.into_iter().enumerate() {
                    if h != t {
                        g.edges.push(Edge { head: NodeId(h), tail: NodeId(t), edge_type: labels[k].into() });
                    }
                }
                g
            })
    })
}

fn pairs(g: &Graph) -> BTreeSet<(String, String)> {
    let c = |id| g.node(id).unwrap().content.clone();
    g.edges.iter().map(|e| (c(e.head), c(e.tail))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn exact_relation_matches_are_partial_matches(pred in arb_span_graph(), gold in arb_span_graph()) {
        let exact: BTreeSet<_> = match_relations(&pred, &gold, Overlap::Exact).into_iter().collect();
        let partial: BTreeSet<_> = match_relations(&pred, &gold, Overlap::half()).into_iter().collect();
        prop_assert!(exact.is_subset(&partial));
        prop_assert!(relation_f1(&pred, &gold, Overlap::half()).f1 >= relation_f1(&pred, &gold, Overlap::Exact).f1);
    }

    #[test]
    fn identity_scores_perfectly(g in arb_span_graph()) {
        prop_assert_eq!(relation_f1(&g, &g, Overlap::Exact).f1, 1.0);
        prop_assert_eq!(relation_f1(&g, &g, Overlap::half()).f1, 1.0);
    }

    #[test]
    fn greedy_ged_bounds_exact_from_above(a in arb_content_graph(6), b in arb_content_graph(6)) {
        let exact = edit_count(&a, &b, GedMode::Exact).unwrap();
        let greedy = edit_count(&a, &b, GedMode::Greedy).unwrap();
        prop_assert!(greedy >= exact);
        prop_assert_eq!(edit_count(&a, &a, GedMode::Exact).unwrap(), 0);
        prop_assert_eq!(exact, edit_count(&b, &a, GedMode::Exact).unwrap());
    }

    #[test]
    fn error_counts_match_false_positive_and_negative_tallies(pred in arb_content_graph(6), gold in arb_content_graph(6)) {
        let p = pairs(&pred);
        let g = pairs(&gold);
        // Two-cycles make "reversed" ambiguous.
        let no_two_cycles = |s: &BTreeSet<(String, String)>| s.iter().all(|(h, t)| !s.contains(&(t.clone(), h.clone())));
        prop_assume!(no_two_cycles(&p) && no_two_cycles(&g));
        let fp = p.difference(&g).count();
        let fn_ = g.difference(&p).count();
        let c = edge_errors(&pred, &gold);
        prop_assert_eq!(fp, c.spurious_edges + c.reversed_edges);
        prop_assert_eq!(fn_, c.omitted_edges + c.reversed_edges);
    }
}
