//! Marching squares over cell-centre samples.

use std::collections::HashMap;

use serde::Serialize;

use super::Grid2D;

/// Stand-in for non-finite samples so interpolation stays well defined.
const FAR_POSITIVE: f64 = 1e300;

/// Scalar samples at the cell centres of a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field size must match grid");
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|c| f(grid.center(c))).collect();
        Self { grid, values }
    }

    fn sample(&self, i: usize, j: usize) -> f64 {
        let v = self.values[self.grid.index(i, j)];
        if v.is_finite() {
            v
        } else if v == f64::NEG_INFINITY {
            -FAR_POSITIVE
        } else {
            FAR_POSITIVE
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

/// Edge between two neighbouring sample points: horizontal edges start at
/// `(i, j)` and go to `(i+1, j)`, vertical ones go to `(i, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Zero-level polylines of `field`. Negative samples count as inside.
/// Saddle squares are resolved by the sign of the mean of the four corners.
pub fn extract_contours(field: &ScalarField) -> Vec<Polyline> {
    let (nx, ny) = (field.grid.nx(), field.grid.ny());
    let mut segments: Vec<(Edge, Edge)> = Vec::new();

    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = [
                field.sample(i, j),
                field.sample(i + 1, j),
                field.sample(i + 1, j + 1),
                field.sample(i, j + 1),
            ];
            let inside = v.map(|x| x < 0.0);
            // bottom, right, top, left; edge k joins corners k and k+1
            let edges = [
                Edge::H(i, j),
                Edge::V(i + 1, j),
                Edge::H(i, j + 1),
                Edge::V(i, j),
            ];
            let crossed: Vec<usize> = (0..4)
                .filter(|&k| inside[k] != inside[(k + 1) % 4])
                .collect();
            match crossed.len() {
                2 => segments.push((edges[crossed[0]], edges[crossed[1]])),
                4 => {
                    let centre_inside = v.iter().sum::<f64>() / 4.0 < 0.0;
                    if centre_inside == inside[0] {
                        // corners 0 and 2 are joined through the centre
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }

    link(field, &segments)
}

fn crossing_point(field: &ScalarField, edge: Edge) -> [f64; 2] {
    let (a, b) = match edge {
        Edge::H(i, j) => ((i, j), (i + 1, j)),
        Edge::V(i, j) => ((i, j), (i, j + 1)),
    };
    let va = field.sample(a.0, a.1);
    let vb = field.sample(b.0, b.1);
    let t = (va / (va - vb)).clamp(0.0, 1.0);
    let pa = field.grid.center(field.grid.index(a.0, a.1));
    let pb = field.grid.center(field.grid.index(b.0, b.1));
    [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
}

fn link(field: &ScalarField, segments: &[(Edge, Edge)]) -> Vec<Polyline> {
    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(s);
        by_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();

    let trace = |start_seg: usize, start_edge: Edge, used: &mut Vec<bool>| {
        let mut edges = vec![start_edge];
        let mut seg = start_seg;
        let mut at = start_edge;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            edges.push(next);
            at = next;
            match by_edge[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        let closed = edges.len() > 2 && edges.first() == edges.last();
        if closed {
            edges.pop();
        }
        Polyline {
            points: edges.iter().map(|&e| crossing_point(field, e)).collect(),
            closed,
        }
    };

    // open chains start at edges touched by a single segment (grid border)
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        let (a, b) = segments[s];
        let start = if by_edge[&a].len() == 1 {
            Some(a)
        } else if by_edge[&b].len() == 1 {
            Some(b)
        } else {
            None
        };
        if let Some(e) = start {
            out.push(trace(s, e, &mut used));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            out.push(trace(s, segments[s].0, &mut used));
        }
    }
    out
}
