use std::collections::BTreeMap;

use graphmdl::graph::{edge_multiset_prf, edge_multiset_f1};
use graphmdl::sample_io::{read_graph, write_graph};
use graphmdl::{Edge, Graph, Node, NodeId, Span};
use proptest::prelude::*;

fn arb_graph(max_nodes: usize) -> impl Strategy<Value = Graph> {
    (1..=max_nodes)
        .prop_flat_map(|n| {
            let nodes = prop::collection::vec(
                (
                    "[a-zA-Z0-9 éß\"\\\\/\n]{0,12}[a-z]",
                    prop::sample::select(vec!["Claim", "Premise", "event", ""]),
                    prop::option::of((0usize..50, 0usize..10)),
                ),
                n,
            );
            let edges = prop::collection::btree_set((0..n as u32, 0..n as u32), 0..=n * 2);
            let types = prop::collection::vec(prop::sample::select(vec!["supports", "attacks", "before"]), n * 2 + 1);
            let meta = prop::collection::btree_map("[a-z_]{1,8}", prop_oneof![
                any::<i64>().prop_map(serde_json::Value::from),
                "[ -~]{0,10}".prop_map(serde_json::Value::from),
                any::<bool>().prop_map(serde_json::Value::from),
            ], 0..3);
            (nodes, edges, types, meta)
        })
        .prop_map(|(nodes, edges, types, meta)| {
            let mut g = Graph::new();
            for (i, (content, ty, span)) in nodes.into_iter().enumerate() {
                g.nodes.push(Node {
                    id: NodeId(i as u32 * 3 + 1),
                    content,
                    node_type: ty.to_string(),
                    span: span.map(|(s, l)| Span::new(s, s + l)),
                });
            }
            for (k, (h, t)) in edges.into_iter().enumerate() {
                g.edges.push(Edge { head: NodeId(h * 3 + 1), tail: NodeId(t * 3 + 1), edge_type: types[k % types.len()].into() });
            }
            g.meta = meta.into_iter().collect::<BTreeMap<_, _>>();
            g
        })
}

/// Independent cycle check: iterative three-colour DFS.
fn has_cycle(g: &Graph) -> bool {
    let idx: BTreeMap<NodeId, usize> = g.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    let mut succ = vec![Vec::new(); g.nodes.len()];
    for e in &g.edges {
        succ[idx[&e.head]].push(idx[&e.tail]);
    }
    let mut colour = vec![0u8; g.nodes.len()];
    for start in 0..g.nodes.len() {
        if colour[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        colour[start] = 1;
        while let Some(top) = stack.last_mut() {
            let v = top.0;
            if top.1 < succ[v].len() {
                let w = succ[v][top.1];
                top.1 += 1;
                match colour[w] {
                    1 => return true,
                    0 => {
                        colour[w] = 1;
                        stack.push((w, 0));
                    }
                    _ => {}
                }
            } else {
                colour[v] = 2;
                stack.pop();
            }
        }
    }
    false
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn json_round_trip_is_identity(g in arb_graph(9)) {
        g.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        write_graph(&g, &path).unwrap();
        prop_assert_eq!(read_graph(&path).unwrap(), g);
    }

    #[test]
    fn is_dag_agrees_with_topological_order_and_dfs(g in arb_graph(8)) {
        let order = g.topological_order();
        prop_assert_eq!(g.is_dag(), order.is_ok());
        prop_assert_eq!(g.is_dag(), !has_cycle(&g));
        if let Ok(order) = order {
            let pos: BTreeMap<NodeId, usize> = order.iter().enumerate().map(|(i, &id)| (id, i)).collect();
            prop_assert_eq!(pos.len(), g.nodes.len());
            for e in &g.edges {
                prop_assert!(pos[&e.head] < pos[&e.tail]);
            }
        }
    }

    #[test]
    fn edge_f1_self_and_swap(a in arb_graph(6), b in arb_graph(6)) {
        prop_assert_eq!(edge_multiset_f1(&a, &a), 1.0);
        let ab = edge_multiset_prf(&a, &b);
        let ba = edge_multiset_prf(&b, &a);
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.recall, ba.precision);
        prop_assert!((ab.f1 - ba.f1).abs() < 1e-12);
    }
}
