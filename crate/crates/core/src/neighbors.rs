//! Exact k-nearest-neighbor distance features.
//!
//! For each query point the feature row is the ascending list of Euclidean
//! distances to its `k` nearest sample points, excluding points coincident
//! with the query (distance exactly zero). A kd-tree provides the production
//! path; an exhaustive scan provides the oracle the tree must match bitwise.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::synthpdf::SampleSet;

const LEAF_SIZE: usize = 32;

/// Per-query sorted distances to the `k` nearest non-identical sample points.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    k: usize,
    rows: Vec<f64>,
}

impl FeatureMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len() / self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    /// CSV cache format: header `d_1,...,d_k`, one row per query.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let header: Vec<String> = (1..=self.k).map(|j| format!("d_{j}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.n_rows() {
            let row: Vec<String> = self.row(i).iter().map(|d| format!("{d:.16e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[inline]
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Max-heap entry ordered by `(distance², index)`; the lexicographically
/// largest candidate is the first to be evicted, so equal distances keep the
/// lowest point indices.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    d2: f64,
    idx: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.idx.cmp(&other.idx))
    }
}

enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<KdNode>,
        right: Box<KdNode>,
    },
}

/// Immutable kd-tree over a sample; shareable across threads after build.
pub struct SpatialIndex {
    dim: usize,
    points: Vec<f64>,
    /// Point indices arranged so each leaf owns a contiguous range.
    order: Vec<u32>,
    root: KdNode,
}

fn widest_axis(points: &[f64], dim: usize, idx: &[u32]) -> usize {
    let mut best_axis = 0;
    let mut best_spread = f64::NEG_INFINITY;
    for axis in 0..dim {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in idx {
            let v = points[i as usize * dim + axis];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let spread = hi - lo;
        if spread > best_spread {
            best_spread = spread;
            best_axis = axis;
        }
    }
    best_axis
}

fn build_node(points: &[f64], dim: usize, idx: &mut [u32], offset: usize) -> KdNode {
    if idx.len() <= LEAF_SIZE {
        return KdNode::Leaf {
            start: offset,
            end: offset + idx.len(),
        };
    }
    let axis = widest_axis(points, dim, idx);
    let mid = idx.len() / 2;
    idx.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize * dim + axis].total_cmp(&points[b as usize * dim + axis])
    });
    let value = points[idx[mid] as usize * dim + axis];
    let (left_idx, right_idx) = idx.split_at_mut(mid);
    let left = build_node(points, dim, left_idx, offset);
    let right = build_node(points, dim, right_idx, offset + mid);
    KdNode::Split {
        axis,
        value,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Build the kd-tree (median split on the widest axis, leaf size 32).
pub fn build_index(sample: &SampleSet) -> SpatialIndex {
    let dim = sample.dim();
    let points = sample.points().to_vec();
    let n = sample.n();
    assert!(n >= 1, "cannot index an empty sample");
    let mut order: Vec<u32> = (0..n as u32).collect();
    let root = build_node(&points, dim, &mut order, 0);
    SpatialIndex {
        dim,
        points,
        order,
        root,
    }
}

impl SpatialIndex {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn search(&self, query: &[f64], k: usize, heap: &mut BinaryHeap<Candidate>) {
        heap.clear();
        self.visit(&self.root, query, k, heap);
    }

    fn visit(&self, node: &KdNode, query: &[f64], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match node {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let p = &self.points[i as usize * self.dim..(i as usize + 1) * self.dim];
                    let d2 = dist_sq(query, p);
                    if d2 == 0.0 {
                        continue; // coincident with the query: not a neighbor
                    }
                    let cand = Candidate { d2, idx: i };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is non-empty") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[*axis] - *value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.visit(near, query, k, heap);
                // Any far-side point is at least |diff| away along the split
                // axis, so the subtree can add nothing once the current k-th
                // distance is smaller.
                if heap.len() < k || diff * diff < heap.peek().expect("non-empty").d2 {
                    self.visit(far, query, k, heap);
                }
            }
        }
    }
}

fn finish_row(mut d2s: Vec<f64>, k: usize, row: &mut [f64]) -> Result<()> {
    if d2s.len() < k {
        return Err(Error::InsufficientPoints {
            needed: k,
            available: d2s.len(),
        });
    }
    d2s.sort_by(f64::total_cmp);
    for (slot, d2) in row.iter_mut().zip(d2s) {
        *slot = d2.sqrt();
    }
    Ok(())
}

/// Exact k-NN distances of every query against the indexed sample.
///
/// Zero-distance (coincident) points are excluded; every query must have at
/// least `k` non-identical candidates.
pub fn knn_distances(index: &SpatialIndex, queries: &SampleSet, k: usize) -> Result<FeatureMatrix> {
    assert_eq!(index.dim(), queries.dim(), "dimension mismatch");
    assert!(k >= 1);
    let m = queries.n();
    let mut rows = vec![0.0f64; m * k];
    rows.par_chunks_mut(k)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<()> {
            let mut heap = BinaryHeap::with_capacity(k + 1);
            index.search(queries.point(i), k, &mut heap);
            let d2s: Vec<f64> = heap.iter().map(|c| c.d2).collect();
            finish_row(d2s, k, row)
        })?;
    Ok(FeatureMatrix { k, rows })
}

/// Exhaustive-scan k-NN with the same contract as [`knn_distances`]; the
/// oracle the tree search is verified against, and the fallback for tiny
/// samples.
pub fn brute_force_knn(sample: &SampleSet, queries: &SampleSet, k: usize) -> Result<FeatureMatrix> {
    assert_eq!(sample.dim(), queries.dim(), "dimension mismatch");
    assert!(k >= 1);
    let m = queries.n();
    let mut rows = vec![0.0f64; m * k];
    rows.par_chunks_mut(k)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<()> {
            let q = queries.point(i);
            let mut d2s: Vec<f64> = sample
                .iter_points()
                .map(|p| dist_sq(q, p))
                .filter(|&d2| d2 != 0.0)
                .collect();
            if d2s.len() > k {
                d2s.select_nth_unstable_by(k - 1, f64::total_cmp);
                d2s.truncate(k);
            }
            finish_row(d2s, k, row)
        })?;
    Ok(FeatureMatrix { k, rows })
}
