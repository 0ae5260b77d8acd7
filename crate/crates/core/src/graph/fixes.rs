//! Noise fixes: isolated nodes, sources outside the inlet, and sinks that
//! still have later fronts next to them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{DisplacementGraph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixStage {
    Raw,
    Isolated,
    Sources,
    Sinks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub stage: FixStage,
    pub nodes: usize,
    pub edges: usize,
}

/// Node and edge counts before fixing and after each stage. Stages repeat
/// until nothing changes; `rounds` counts the passes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixTrace {
    pub stages: Vec<StageCounts>,
    pub rounds: u32,
}

impl DisplacementGraph {
    fn counts(&self, stage: FixStage) -> StageCounts {
        StageCounts {
            stage,
            nodes: self.node_count(),
            edges: self.edge_count(),
        }
    }

    fn remove_isolated(&mut self) -> bool {
        let isolated: Vec<NodeId> = self
            .node_ids()
            .filter(|&n| self.in_degree(n) == 0 && self.out_degree(n) == 0)
            .collect();
        for &n in &isolated {
            self.remove_node(n);
        }
        !isolated.is_empty()
    }

    fn remove_foreign_sources(&mut self, inlet: &BTreeSet<NodeId>) -> bool {
        let mut changed = false;
        loop {
            let foreign: Vec<NodeId> = self
                .node_ids()
                .filter(|&n| self.in_degree(n) == 0 && !inlet.contains(&n))
                .collect();
            if foreign.is_empty() {
                return changed;
            }
            for n in foreign {
                self.remove_node(n);
            }
            changed = true;
        }
    }

    /// A sink whose front touches a later front still in the graph cannot be
    /// a real end of flow.
    fn remove_false_sinks(&mut self) -> bool {
        let mut changed = false;
        loop {
            let false_sinks: Vec<NodeId> = self
                .node_ids()
                .filter(|&n| self.out_degree(n) == 0 && self.in_degree(n) > 0)
                .filter(|&n| {
                    let t = self.nodes[&n].time();
                    self.spatial_neighbors(n)
                        .any(|m| self.node(m).is_some_and(|node| node.time() > t))
                })
                .collect();
            if false_sinks.is_empty() {
                return changed;
            }
            for n in false_sinks {
                self.remove_node(n);
            }
            changed = true;
        }
    }

    /// Applies the three fixes in order (isolated → foreign sources → false
    /// sinks) and repeats them until the graph no longer changes.
    /// `inlet` lists the nodes whose fronts intersect the inlet region.
    pub fn apply_noise_fixes(&mut self, inlet: &BTreeSet<NodeId>) -> FixTrace {
        let mut stages = vec![self.counts(FixStage::Raw)];
        let mut rounds = 0;
        loop {
            rounds += 1;
            let mut changed = self.remove_isolated();
            let after_isolated = self.counts(FixStage::Isolated);
            changed |= self.remove_foreign_sources(inlet);
            let after_sources = self.counts(FixStage::Sources);
            changed |= self.remove_false_sinks();
            let after_sinks = self.counts(FixStage::Sinks);
            if rounds == 1 {
                stages.extend([after_isolated, after_sources, after_sinks]);
            } else if changed {
                stages.push(after_sinks);
            }
            if !changed {
                break;
            }
        }
        FixTrace { stages, rounds }
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::graph;
    use super::*;

    fn inlet(ids: &[u32]) -> BTreeSet<u32> {
        ids.iter().copied().collect()
    }

    #[test]
    fn isolated_node_removed() {
        let mut g = graph(&[(1, 1, 1), (2, 2, 1), (3, 7, 1)], &[], &[(1, 2)]);
        g.apply_noise_fixes(&inlet(&[1]));
        assert_eq!(g.node_ids().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn chain_outside_inlet_removed_iteratively() {
        let mut g = graph(
            &[(1, 1, 1), (2, 2, 1), (10, 3, 1), (11, 4, 1), (12, 5, 1)],
            &[],
            &[(1, 2), (10, 11), (11, 12)],
        );
        let trace = g.apply_noise_fixes(&inlet(&[1]));
        assert_eq!(g.node_ids().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(trace.stages[0].nodes, 5);
        assert!(trace.stages.windows(2).all(|w| w[1].nodes <= w[0].nodes));
    }

    #[test]
    fn false_sink_removed_true_sink_kept() {
        // 1 → 2 → 4 and 1 → 3; node 3 touches the later node 4.
        let mut g = graph(
            &[(1, 1, 1), (2, 2, 1), (3, 2, 1), (4, 3, 1)],
            &[(1, 2), (1, 3), (2, 4), (3, 4)],
            &[(1, 2), (1, 3), (2, 4)],
        );
        g.apply_noise_fixes(&inlet(&[1]));
        assert!(!g.contains(3));
        assert!(g.contains(4));
    }

    #[test]
    fn fixes_are_idempotent() {
        let mut g = graph(
            &[(1, 1, 1), (2, 2, 1), (3, 3, 1), (4, 2, 1), (5, 4, 1)],
            &[(1, 2), (2, 3), (1, 4), (4, 5), (3, 4)],
            &[(1, 2), (2, 3), (1, 4), (4, 5)],
        );
        g.apply_noise_fixes(&inlet(&[1]));
        let once = g.clone();
        g.apply_noise_fixes(&inlet(&[1]));
        assert_eq!(g, once);
    }
}
