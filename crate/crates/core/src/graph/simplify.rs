//! Simplification of chains of nodes with one incoming and one outgoing edge.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Chain, DisplacementGraph, Edge, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimplifyMode {
    /// Replace each chain by one representative node.
    Combine,
    /// Drop each chain and join its ends with a single edge.
    Remove,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimplifyOptions {
    pub mode: Option<SimplifyMode>,
    /// Keep trivial nodes whose frame equals this breakthrough frame.
    pub keep_frame: Option<u32>,
    /// Keep these nodes (velocity jumps).
    pub keep_nodes: BTreeSet<NodeId>,
}

impl DisplacementGraph {
    /// Maximal runs of removable 1-in/1-out nodes, in path order.
    fn trivial_chains(&self, opts: &SimplifyOptions) -> Vec<Vec<NodeId>> {
        let removable = |n: NodeId| {
            self.in_degree(n) == 1
                && self.out_degree(n) == 1
                && !opts.keep_nodes.contains(&n)
                && opts.keep_frame != Some(self.nodes[&n].time())
        };
        let mut chains = Vec::new();
        for n in self.node_ids() {
            if !removable(n) {
                continue;
            }
            let pred = self.predecessors(n).next().unwrap();
            if removable(pred) {
                continue;
            }
            let mut chain = vec![n];
            let mut cur = n;
            loop {
                let next = self.successors(cur).next().unwrap();
                if !removable(next) {
                    break;
                }
                chain.push(next);
                cur = next;
            }
            chains.push(chain);
        }
        chains
    }

    /// Returns a simplified copy of the graph. Retained nodes keep their ids
    /// and their mutual reachability.
    pub fn simplify(&self, opts: &SimplifyOptions) -> DisplacementGraph {
        let mut g = self.clone();
        let Some(mode) = opts.mode else {
            return g;
        };
        for chain in self.trivial_chains(opts) {
            let first = chain[0];
            let last = *chain.last().unwrap();
            let entry = self.in_edges(first).next().unwrap().clone();
            let exit = self.out_edges(last).next().unwrap().clone();
            let inner: Vec<Edge> = chain
                .windows(2)
                .map(|w| self.out_edges(w[0]).find(|e| e.dst == w[1]).unwrap().clone())
                .collect();
            let nodes: Vec<_> = chain.iter().map(|n| self.nodes[n].clone()).collect();
            match mode {
                SimplifyMode::Combine => {
                    for &n in &chain[1..] {
                        g.remove_node(n);
                    }
                    let area: u64 = nodes.iter().map(|n| n.area()).sum();
                    let (sx, sy) = nodes.iter().fold((0.0, 0.0), |(sx, sy), n| {
                        let a = n.area() as f64;
                        (sx + a * n.position.0, sy + a * n.position.1)
                    });
                    let rep = g.nodes.get_mut(&first).unwrap();
                    rep.front.area = area;
                    rep.position = (sx / area as f64, sy / area as f64);
                    rep.front.centroid = rep.position;
                    rep.chain = Some(Chain { nodes, edges: inner });
                    let mut out = exit;
                    out.src = first;
                    g.insert_edge(out);
                }
                SimplifyMode::Remove => {
                    for &n in &chain {
                        g.remove_node(n);
                    }
                    let mut edges = vec![entry.clone()];
                    edges.extend(inner);
                    edges.push(exit.clone());
                    let delta_t: f64 = edges.iter().map(|e| e.delta_t).sum();
                    let distance: f64 = edges.iter().map(|e| e.velocity * e.delta_t).sum();
                    let id = g.next_edge;
                    g.insert_edge(Edge {
                        id,
                        src: entry.src,
                        dst: exit.dst,
                        d_forward: None,
                        d_backward: None,
                        delta_t,
                        velocity: if delta_t > 0.0 { distance / delta_t } else { 0.0 },
                        chain: Some(Chain { nodes, edges }),
                    });
                }
            }
        }
        g
    }

    /// Ids of nodes with exactly one incoming and one outgoing edge.
    pub fn trivial_nodes(&self) -> BTreeSet<NodeId> {
        self.node_ids()
            .filter(|&n| self.in_degree(n) == 1 && self.out_degree(n) == 1)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::graph;
    use super::*;

    fn path5() -> DisplacementGraph {
        graph(
            &[(1, 1, 2), (2, 2, 3), (3, 3, 4), (4, 4, 5), (5, 5, 6)],
            &[],
            &[(1, 2), (2, 3), (3, 4), (4, 5)],
        )
    }

    #[test]
    fn remove_mode_on_path() {
        let g = path5().simplify(&SimplifyOptions { mode: Some(SimplifyMode::Remove), ..Default::default() });
        assert_eq!(g.node_ids().collect::<Vec<_>>(), vec![1, 5]);
        assert_eq!(g.edge_count(), 1);
        let e = g.edges().next().unwrap();
        let chain = e.chain.as_ref().unwrap();
        assert_eq!(chain.nodes.iter().map(|n| n.id).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(chain.edges.len(), 4);
        assert_eq!(e.delta_t, 4.0);
    }

    #[test]
    fn combine_mode_on_path() {
        let orig = path5();
        let g = orig.simplify(&SimplifyOptions { mode: Some(SimplifyMode::Combine), ..Default::default() });
        assert_eq!(g.node_ids().collect::<Vec<_>>(), vec![1, 2, 5]);
        let rep = g.node(2).unwrap();
        assert_eq!(rep.area(), 12);
        let originals: Vec<_> = rep.original_fronts().into_iter().cloned().collect();
        let expected: Vec<_> = [2, 3, 4].iter().map(|n| orig.node(*n).unwrap().front.clone()).collect();
        assert_eq!(originals, expected);
        assert_eq!(g.successors(2).collect::<Vec<_>>(), vec![5]);
    }

    #[test]
    fn junction_never_removed() {
        let g = graph(
            &[(1, 1, 1), (2, 1, 1), (3, 2, 1), (4, 3, 1)],
            &[],
            &[(1, 3), (2, 3), (3, 4)],
        );
        let s = g.simplify(&SimplifyOptions { mode: Some(SimplifyMode::Remove), ..Default::default() });
        assert!(s.contains(3));
        assert_eq!(s, g);
    }

    #[test]
    fn kept_jump_node_splits_chain() {
        let g = path5().simplify(&SimplifyOptions {
            mode: Some(SimplifyMode::Remove),
            keep_nodes: [3].into(),
            ..Default::default()
        });
        assert_eq!(g.node_ids().collect::<Vec<_>>(), vec![1, 3, 5]);
        assert_eq!(g.edge_count(), 2);
        let g = path5().simplify(&SimplifyOptions {
            mode: Some(SimplifyMode::Remove),
            keep_frame: Some(4),
            ..Default::default()
        });
        assert_eq!(g.node_ids().collect::<Vec<_>>(), vec![1, 4, 5]);
    }

    #[test]
    fn off_mode_is_identity() {
        let g = path5();
        assert_eq!(g.simplify(&SimplifyOptions::default()), g);
    }
}
