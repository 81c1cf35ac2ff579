//! Exact nearest-neighbour search and the symmetric Chamfer distance.
//!
//! The Chamfer value uses non-squared Euclidean distances, each direction
//! averaged over its own set size. Gradients hold the nearest-neighbour
//! matches fixed; a coincident pair contributes nothing.

use crate::geometry::{Point3, PointCloud};
use crate::{Error, Real, Result};

pub const LEAF_SIZE: usize = 16;

/// Distances below this are treated as coincident in the gradient.
pub const COINCIDENCE_EPS: Real = 1e-12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: Real,
        left: usize,
        right: usize,
    },
}

/// Balanced kd-tree over a fixed point set. Stores original indices.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    indices: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnResult {
    pub index: usize,
    pub distance: Real,
}

#[inline]
fn dist_sq(a: Point3, b: Point3) -> Real {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// Median split on the widest bounding-box axis until leaves hold at most
/// [`LEAF_SIZE`] points.
pub fn build_kdtree(cloud: &PointCloud) -> Result<KdTree> {
    cloud.require_non_empty("build_kdtree")?;
    let mut entries: Vec<(Point3, usize)> = cloud.points.iter().copied().zip(0..).collect();
    let mut nodes = Vec::new();
    build_node(&mut entries, 0, &mut nodes);
    let (points, indices) = entries.into_iter().unzip();
    Ok(KdTree {
        points,
        indices,
        nodes,
    })
}

fn build_node(entries: &mut [(Point3, usize)], start: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    let n = entries.len();
    if n <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start,
            end: start + n,
        });
        return id;
    }
    let mut lo = [Real::INFINITY; 3];
    let mut hi = [Real::NEG_INFINITY; 3];
    for (p, _) in entries.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(p.coord(a));
            hi[a] = hi[a].max(p.coord(a));
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .expect("three axes");
    let mid = n / 2;
    entries.select_nth_unstable_by(mid, |a, b| {
        a.0.coord(axis).total_cmp(&b.0.coord(axis)).then(a.1.cmp(&b.1))
    });
    let value = entries[mid].0.coord(axis);
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (l, r) = entries.split_at_mut(mid);
    let left = build_node(l, start, nodes);
    let right = build_node(r, start + mid, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

impl KdTree {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn max_leaf_size(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { start, end } => Some(end - start),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Original indices in tree order; each appears exactly once.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Exact nearest neighbour; equal distances resolve to the lowest index.
    pub fn nearest(&self, query: Point3) -> NnResult {
        let mut best = (Real::INFINITY, usize::MAX);
        self.search(0, query, &mut best);
        NnResult {
            index: best.1,
            distance: best.0.sqrt(),
        }
    }

    fn search(&self, node: usize, q: Point3, best: &mut (Real, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for k in start..end {
                    let d = dist_sq(self.points[k], q);
                    let idx = self.indices[k];
                    if d < best.0 || (d == best.0 && idx < best.1) {
                        *best = (d, idx);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q.coord(axis) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // `<=` keeps equal-distance candidates reachable for the tie rule.
                if diff * diff <= best.0 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

pub fn nearest(tree: &KdTree, query: Point3) -> NnResult {
    tree.nearest(query)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChamferResult {
    pub value: Real,
    /// For each point of `a`, its nearest neighbour in `b`.
    pub matches_ab: Vec<NnResult>,
    /// For each point of `b`, its nearest neighbour in `a`.
    pub matches_ba: Vec<NnResult>,
}

fn mean_distance(m: &[NnResult]) -> Real {
    m.iter().map(|r| r.distance).sum::<Real>() / m.len() as Real
}

/// Symmetric Chamfer distance with both directions' matches.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<ChamferResult> {
    a.require_non_empty("chamfer_distance (first set)")?;
    b.require_non_empty("chamfer_distance (second set)")?;
    let tree_a = build_kdtree(a)?;
    let tree_b = build_kdtree(b)?;
    let matches_ab: Vec<NnResult> = a.points.iter().map(|&p| tree_b.nearest(p)).collect();
    let matches_ba: Vec<NnResult> = b.points.iter().map(|&p| tree_a.nearest(p)).collect();
    let value = mean_distance(&matches_ab) + mean_distance(&matches_ba);
    Ok(ChamferResult {
        value,
        matches_ab,
        matches_ba,
    })
}

/// Subgradient of the Chamfer value with respect to every point of `a`.
pub fn chamfer_gradient(result: &ChamferResult, a: &PointCloud, b: &PointCloud) -> Result<Vec<Point3>> {
    if result.matches_ab.len() != a.len() || result.matches_ba.len() != b.len() {
        return Err(Error::invalid("Chamfer result was not computed from these clouds"));
    }
    let inv_a = 1.0 / a.len() as Real;
    let inv_b = 1.0 / b.len() as Real;
    let mut grad = vec![Point3::ZERO; a.len()];
    for (i, m) in result.matches_ab.iter().enumerate() {
        if m.distance >= COINCIDENCE_EPS {
            let diff = a.points[i] - b.points[m.index];
            grad[i] += diff * (inv_a / m.distance);
        }
    }
    for (j, m) in result.matches_ba.iter().enumerate() {
        if m.distance >= COINCIDENCE_EPS {
            let diff = a.points[m.index] - b.points[j];
            grad[m.index] += diff * (inv_b / m.distance);
        }
    }
    Ok(grad)
}
