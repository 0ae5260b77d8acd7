//! Breakthrough detection, main-channel extraction and velocity jumps.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{DisplacementGraph, NodeId};
use crate::error::{Error, Result};

/// First arrival of the invading fluid at the outlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakthrough {
    pub frame: u32,
    pub node: NodeId,
}

/// Source-to-breakthrough path carrying the largest invaded area.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MainChannel {
    pub nodes: Vec<NodeId>,
    pub area: u64,
}

impl DisplacementGraph {
    /// Earliest node among `outlet` (nodes whose fronts intersect the outlet
    /// region) that is still in the graph; ties go to the lowest id.
    pub fn detect_breakthrough(&self, outlet: &BTreeSet<NodeId>) -> Option<Breakthrough> {
        outlet
            .iter()
            .filter_map(|&id| self.node(id).map(|n| (n.time(), id)))
            .min()
            .map(|(frame, node)| Breakthrough { frame, node })
    }

    /// Largest-area path from any source to `target`, by dynamic programming
    /// over the topological order. Among equal areas the lexicographically
    /// smallest id sequence wins.
    pub fn extract_main_channel(&self, target: NodeId) -> Result<MainChannel> {
        if !self.contains(target) {
            return Err(Error::Unreachable(target));
        }
        let order = self
            .topological_order()
            .ok_or_else(|| Error::Invalid("graph contains a cycle".into()))?;
        let mut best: BTreeMap<NodeId, (u64, Vec<NodeId>)> = BTreeMap::new();
        for n in order {
            let area = self.nodes[&n].area();
            let candidate = if self.in_degree(n) == 0 {
                Some((area, vec![n]))
            } else {
                self.predecessors(n)
                    .filter_map(|p| best.get(&p))
                    .map(|(sum, path)| {
                        let mut p = path.clone();
                        p.push(n);
                        (sum + area, p)
                    })
                    .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(&a.1)))
            };
            if let Some(c) = candidate {
                best.insert(n, c);
            }
            if n == target {
                break;
            }
        }
        best.remove(&target)
            .map(|(area, nodes)| MainChannel { nodes, area })
            .ok_or(Error::Unreachable(target))
    }

    /// Nodes where some outgoing edge is at least `ratio` times faster than
    /// some incoming edge. A zero incoming velocity followed by motion counts
    /// as a jump.
    pub fn detect_velocity_jumps(&self, ratio: f64) -> BTreeSet<NodeId> {
        self.node_ids()
            .filter(|&n| {
                let max_out = self.out_edges(n).map(|e| e.velocity).fold(f64::NAN, f64::max);
                let min_in = self.in_edges(n).map(|e| e.velocity).fold(f64::NAN, f64::min);
                if max_out.is_nan() || min_in.is_nan() || max_out <= 0.0 {
                    return false;
                }
                min_in <= 0.0 || max_out / min_in >= ratio
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::graph;
    use super::*;

    fn enumerate(g: &DisplacementGraph, target: NodeId) -> Option<(u64, Vec<NodeId>)> {
        fn walk(g: &DisplacementGraph, n: NodeId, path: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
            path.push(n);
            if g.in_degree(n) == 0 {
                let mut p = path.clone();
                p.reverse();
                out.push(p);
            }
            for p in g.predecessors(n).collect::<Vec<_>>() {
                walk(g, p, path, out);
            }
            path.pop();
        }
        let mut all = Vec::new();
        walk(g, target, &mut Vec::new(), &mut all);
        all.into_iter()
            .map(|p| (p.iter().map(|n| g.node(*n).unwrap().area()).sum::<u64>(), p))
            .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(&a.1)))
    }

    #[test]
    fn breakthrough_examples() {
        let g = graph(&[(1, 3, 1), (2, 17, 1), (3, 17, 1), (4, 20, 1)], &[], &[]);
        let outlet: BTreeSet<_> = [3, 2, 4].into();
        assert_eq!(g.detect_breakthrough(&outlet), Some(Breakthrough { frame: 17, node: 2 }));
        assert_eq!(g.detect_breakthrough(&BTreeSet::new()), None);
    }

    #[test]
    fn diamond_prefers_larger_branch() {
        let g = graph(
            &[(1, 1, 5), (2, 2, 10), (3, 3, 10), (4, 2, 10), (5, 3, 30), (6, 4, 5)],
            &[],
            &[(1, 2), (2, 3), (3, 6), (1, 4), (4, 5), (5, 6)],
        );
        let mc = g.extract_main_channel(6).unwrap();
        assert_eq!(mc.nodes, vec![1, 4, 5, 6]);
        assert_eq!(mc.area, 50);
        assert_eq!(enumerate(&g, 6).unwrap(), (mc.area, mc.nodes));
    }

    #[test]
    fn equal_branches_take_smaller_ids() {
        let g = graph(
            &[(1, 1, 5), (2, 2, 10), (3, 2, 10), (4, 3, 5)],
            &[],
            &[(1, 3), (1, 2), (3, 4), (2, 4)],
        );
        assert_eq!(g.extract_main_channel(4).unwrap().nodes, vec![1, 2, 4]);
    }

    #[test]
    fn unreachable_target() {
        let g = graph(&[(1, 1, 5)], &[], &[]);
        assert!(matches!(g.extract_main_channel(9), Err(Error::Unreachable(9))));
        assert_eq!(g.extract_main_channel(1).unwrap().nodes, vec![1]);
    }

    #[test]
    fn jump_detection() {
        let mut g = graph(&[(1, 1, 1), (2, 2, 1), (3, 3, 1)], &[], &[(1, 2), (2, 3)]);
        assert!(g.detect_velocity_jumps(5.0).is_empty());
        let out = g.out_edges(2).next().unwrap().id;
        g.edges.get_mut(&out).unwrap().velocity = 10.0;
        assert_eq!(g.detect_velocity_jumps(5.0), [2].into());
        assert!(g.detect_velocity_jumps(11.0).is_empty());
    }
}
