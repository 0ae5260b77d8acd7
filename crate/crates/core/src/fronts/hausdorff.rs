//! Exact Hausdorff distances between pixel sets.
//!
//! Distances are compared as squared integers and the square root is taken
//! once at the end, so results are bit-identical to an all-pairs scan.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel coordinates `(x, y)` forming one side of a fluid-fluid boundary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceSet(pub Vec<(i32, i32)>);

impl InterfaceSet {
    pub fn new(points: Vec<(i32, i32)>) -> Self {
        InterfaceSet(points)
    }

    /// Builds the set from row-major pixel indices of a `width`-wide grid.
    pub fn from_indices(indices: impl IntoIterator<Item = usize>, width: usize) -> Self {
        InterfaceSet(
            indices
                .into_iter()
                .map(|i| ((i % width) as i32, (i / width) as i32))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn points(&self) -> &[(i32, i32)] {
        &self.0
    }
}

/// Uniform bucket grid over a point set for exact nearest-neighbour queries.
struct GridIndex<'a> {
    points: &'a [(i32, i32)],
    min: (i32, i32),
    cell: i32,
    cols: i32,
    rows: i32,
    /// `starts[c]..starts[c + 1]` indexes `order` for cell `c`.
    starts: Vec<u32>,
    order: Vec<u32>,
}

impl<'a> GridIndex<'a> {
    fn new(points: &'a [(i32, i32)]) -> Self {
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (i32::MAX, i32::MAX, i32::MIN, i32::MIN);
        for &(x, y) in points {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
        let span_x = (max_x - min_x + 1) as i64;
        let span_y = (max_y - min_y + 1) as i64;
        // About two points per cell on average.
        let cell = (((span_x * span_y * 2) as f64 / points.len() as f64).sqrt().ceil() as i32).max(1);
        let cols = ((span_x as i32 + cell - 1) / cell).max(1);
        let rows = ((span_y as i32 + cell - 1) / cell).max(1);
        let ncells = (cols * rows) as usize;
        let cell_of = |&(x, y): &(i32, i32)| (((y - min_y) / cell) * cols + (x - min_x) / cell) as usize;
        let mut counts = vec![0u32; ncells + 1];
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for c in 0..ncells {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut order = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            order[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        GridIndex {
            points,
            min: (min_x, min_y),
            cell,
            cols,
            rows,
            starts: counts,
            order,
        }
    }

    fn scan_cell(&self, cx: i32, cy: i32, p: (i32, i32), best: &mut i64) {
        if cx < 0 || cy < 0 || cx >= self.cols || cy >= self.rows {
            return;
        }
        let c = (cy * self.cols + cx) as usize;
        for &i in &self.order[self.starts[c] as usize..self.starts[c + 1] as usize] {
            let q = self.points[i as usize];
            let dx = (q.0 - p.0) as i64;
            let dy = (q.1 - p.1) as i64;
            let d = dx * dx + dy * dy;
            if d < *best {
                *best = d;
            }
        }
    }

    /// Squared distance from `p` to its nearest indexed point.
    fn nearest_sq(&self, p: (i32, i32)) -> i64 {
        let cx = (p.0 - self.min.0).div_euclid(self.cell);
        let cy = (p.1 - self.min.1).div_euclid(self.cell);
        // Chebyshev cell distance from p's cell to the grid.
        let gap_x = if cx < 0 { -cx } else if cx >= self.cols { cx - self.cols + 1 } else { 0 };
        let gap_y = if cy < 0 { -cy } else if cy >= self.rows { cy - self.rows + 1 } else { 0 };
        let start = gap_x.max(gap_y);
        let max_ring = start + self.cols.max(self.rows);
        let mut best = i64::MAX;
        let mut ring = start;
        while ring <= max_ring {
            if ring == 0 {
                self.scan_cell(cx, cy, p, &mut best);
            } else {
                for dx in -ring..=ring {
                    self.scan_cell(cx + dx, cy - ring, p, &mut best);
                    self.scan_cell(cx + dx, cy + ring, p, &mut best);
                }
                for dy in (-ring + 1)..ring {
                    self.scan_cell(cx - ring, cy + dy, p, &mut best);
                    self.scan_cell(cx + ring, cy + dy, p, &mut best);
                }
            }
            // Every cell beyond this ring is at least ring * cell away.
            let bound = ring as i64 * self.cell as i64;
            if best <= bound * bound {
                break;
            }
            ring += 1;
        }
        best
    }
}

fn directed_sq(from: &[(i32, i32)], to: &[(i32, i32)]) -> i64 {
    if to.len() <= 16 {
        return from
            .iter()
            .map(|p| {
                to.iter()
                    .map(|q| {
                        let dx = (q.0 - p.0) as i64;
                        let dy = (q.1 - p.1) as i64;
                        dx * dx + dy * dy
                    })
                    .min()
                    .unwrap()
            })
            .max()
            .unwrap();
    }
    let index = GridIndex::new(to);
    from.iter().map(|&p| index.nearest_sq(p)).max().unwrap()
}

/// Directed distance `max_{p∈from} min_{q∈to} |p − q|`.
pub fn directed_hausdorff(from: &InterfaceSet, to: &InterfaceSet) -> Result<f64> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok((directed_sq(&from.0, &to.0) as f64).sqrt())
}

/// Symmetric Hausdorff distance.
pub fn hausdorff(a: &InterfaceSet, b: &InterfaceSet) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let d = directed_sq(&a.0, &b.0).max(directed_sq(&b.0, &a.0));
    Ok((d as f64).sqrt())
}
