use serde::{Deserialize, Serialize};

use super::DisplacementGraph;
use crate::fronts::FlowFront;

/// Aggregates of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: u32,
    pub time_s: f64,
    pub area_px: u64,
    /// Area-weighted mean front velocity.
    pub velocity_px_s: f64,
    pub ff_interface_px: u64,
    pub fs_interface_px: u64,
    /// Active fronts of this frame in the fixed graph.
    pub fingers: u32,
}

/// Per-frame metrics for frames `1..=last_frame`. Areas, velocities and
/// interface lengths cover every front; fingers count only the nodes of
/// `graph` (the fixed, non-simplified graph).
pub fn frame_metrics(graph: &DisplacementGraph, fronts: &[FlowFront], last_frame: u32) -> Vec<FrameMetrics> {
    let mut rows: Vec<FrameMetrics> = (1..=last_frame)
        .map(|frame| FrameMetrics {
            frame,
            time_s: frame as f64 * graph.frame_period,
            area_px: 0,
            velocity_px_s: 0.0,
            ff_interface_px: 0,
            fs_interface_px: 0,
            fingers: 0,
        })
        .collect();
    let mut weighted = vec![0.0f64; rows.len()];
    for f in fronts {
        let Some(row) = rows.get_mut((f.time as usize).wrapping_sub(1)) else {
            continue;
        };
        row.area_px += f.area;
        row.ff_interface_px += f.ff_interface_len;
        row.fs_interface_px += f.fs_interface_len;
        weighted[(f.time - 1) as usize] += f.area as f64 * f.velocity;
    }
    for n in graph.nodes() {
        for f in n.original_fronts() {
            if let Some(row) = rows.get_mut((f.time as usize).wrapping_sub(1)) {
                row.fingers += 1;
            }
        }
    }
    for (row, w) in rows.iter_mut().zip(weighted) {
        if row.area_px > 0 {
            row.velocity_px_s = w / row.area_px as f64;
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::super::tests::{front, graph};
    use super::*;

    #[test]
    fn weighted_frame_row() {
        let mut a = front(1, 2, 30);
        a.velocity = 2.0;
        let mut b = front(2, 2, 70);
        b.velocity = 4.0;
        let g = graph(&[(1, 2, 30), (2, 2, 70)], &[], &[]);
        let rows = frame_metrics(&g, &[a, b], 3);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].area_px, 100);
        assert!((rows[1].velocity_px_s - 3.4).abs() < 1e-12);
        assert_eq!(rows[1].fingers, 2);
        // Frames without fronts are present with zeros.
        assert_eq!(rows[0].area_px, 0);
        assert_eq!(rows[0].fingers, 0);
        assert_eq!(rows[2].velocity_px_s, 0.0);
    }
}
