//! Affinity graphs and Laplacians for a (mini-)batch of points.
//!
//! All storage is dense; kNN sparsification zeroes values but keeps the
//! `n × n` layout.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};

/// Relative floor applied to degrees before any inversion: a degree below
/// `DEGREE_FLOOR · mean_degree` is raised to that value.
pub const DEGREE_FLOOR: f64 = 1e-12;

/// How kNN sparsification restores symmetry after per-row selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Symmetrize {
    /// `(B + Bᵀ) / 2`; an edge kept by only one endpoint is halved.
    #[default]
    Average,
    /// Keep an edge at full weight if either endpoint selected it.
    /// Idempotent: re-sparsifying the output with the same `s` is a no-op.
    Union,
}

/// Options for building a batch graph from raw features.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffinityOptions {
    /// Heat-kernel bandwidth.
    pub sigma: f64,
    /// Keep only the `s` largest entries of each row.
    pub knn: Option<usize>,
    pub symmetrize: Symmetrize,
    /// Keep the kernel's literal `a_ii = 1` instead of zeroing the diagonal.
    pub self_loops: bool,
}

impl Default for AffinityOptions {
    fn default() -> Self {
        Self { sigma: 3.0, knn: None, symmetrize: Symmetrize::Average, self_loops: false }
    }
}

impl AffinityOptions {
    pub fn build(&self, points: &Matrix) -> Result<AffinityGraph> {
        let mut graph = heat_kernel(points, self.sigma, self.self_loops)?;
        if let Some(s) = self.knn {
            graph = sparsify_knn_with(&graph, s, self.symmetrize)?;
        }
        Ok(graph)
    }
}

/// Symmetric nonnegative affinity matrix with its vertex degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityGraph {
    affinity: Matrix,
    degrees: Vec<f64>,
}

impl AffinityGraph {
    /// Wraps a user-supplied affinity. The matrix must be square, finite,
    /// nonnegative and exactly symmetric. The diagonal is kept as given.
    pub fn from_affinity(affinity: Matrix) -> Result<Self> {
        match affinity.max_asymmetry() {
            None => {
                return Err(Error::InvalidInput(format!(
                    "affinity must be square, got {}x{}",
                    affinity.rows(),
                    affinity.cols()
                )))
            }
            Some(a) if a != 0.0 => {
                return Err(Error::InvalidInput(format!("affinity is not symmetric (max |a_ij - a_ji| = {a:e})")))
            }
            Some(_) => {}
        }
        if let Some(v) = affinity.as_slice().iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidData(format!("affinity entries must be finite and nonnegative, found {v}")));
        }
        Ok(Self::from_parts(affinity))
    }

    fn from_parts(affinity: Matrix) -> Self {
        let degrees = affinity.row_iter().map(|r| r.iter().sum()).collect();
        Self { affinity, degrees }
    }

    pub fn size(&self) -> usize {
        self.degrees.len()
    }

    pub fn affinity(&self) -> &Matrix {
        &self.affinity
    }

    /// `D_ii = Σ_j a_ij`, unfloored.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Degrees raised to at least `DEGREE_FLOOR · mean degree` (and to the
    /// smallest normal float when the graph has no edges at all).
    pub fn floored_degrees(&self) -> Vec<f64> {
        let n = self.degrees.len().max(1) as f64;
        let mean = self.degrees.iter().sum::<f64>() / n;
        let floor = (DEGREE_FLOOR * mean).max(f64::MIN_POSITIVE);
        self.degrees.iter().map(|&d| d.max(floor)).collect()
    }

    pub fn total_degree(&self) -> f64 {
        self.degrees.iter().sum()
    }

    /// Number of strictly positive off-diagonal entries.
    pub fn nonzeros(&self) -> usize {
        let n = self.size();
        let mut count = 0;
        for i in 0..n {
            for (j, &v) in self.affinity.row(i).iter().enumerate() {
                if i != j && v > 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// `L = D − A`.
    pub fn laplacian(&self) -> Laplacian {
        let mut l = self.affinity.map(|a| -a);
        for (i, &d) in self.degrees.iter().enumerate() {
            l[(i, i)] += d;
        }
        Laplacian { unnormalized: l, floored_degrees: self.floored_degrees() }
    }

    /// `A · M` for an `n × k` block, used by the cut losses.
    pub fn affinity_times(&self, block: &Matrix) -> Matrix {
        self.affinity.matmul(block)
    }

    /// `hᵀ L h = Σ_ij a_ij h_i (h_i − h_j)` evaluated without forming `L`.
    pub fn quadratic_form(&self, h: &[f64]) -> f64 {
        let n = self.size();
        let mut total = 0.0;
        for i in 0..n {
            let row = self.affinity.row(i);
            let mut s = 0.0;
            for j in 0..n {
                s += row[j] * (h[i] - h[j]);
            }
            total += h[i] * s;
        }
        total
    }
}

/// Graph Laplacian `L = D − A`, with the symmetric normalization available
/// on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct Laplacian {
    unnormalized: Matrix,
    floored_degrees: Vec<f64>,
}

impl Laplacian {
    pub fn unnormalized(&self) -> &Matrix {
        &self.unnormalized
    }

    /// `L̃ = D^{-1/2} L D^{-1/2}` with floored degrees.
    pub fn normalized(&self) -> Matrix {
        let inv_sqrt: Vec<f64> = self.floored_degrees.iter().map(|&d| 1.0 / libm::sqrt(d)).collect();
        let n = inv_sqrt.len();
        let mut out = Matrix::from_fn(n, n, |i, j| inv_sqrt[i] * self.unnormalized[(i, j)] * inv_sqrt[j]);
        // exact symmetry regardless of rounding order
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

fn validate_points(points: &Matrix) -> Result<()> {
    if points.rows() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 points, got {}", points.rows())));
    }
    if !points.is_finite() {
        return Err(Error::InvalidData("points contain non-finite values".into()));
    }
    Ok(())
}

fn heat_kernel(points: &Matrix, sigma: f64, self_loops: bool) -> Result<AffinityGraph> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("sigma must be positive and finite, got {sigma}")));
    }
    validate_points(points)?;
    let n = points.rows();
    let scale = -1.0 / (2.0 * sigma * sigma);
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = if self_loops { 1.0 } else { 0.0 };
        for j in (i + 1)..n {
            let v = libm::exp(scale * sq_dist(points.row(i), points.row(j)));
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(AffinityGraph::from_parts(a))
}

/// Heat-kernel affinity `a_ij = exp(−‖x_i − x_j‖² / 2σ²)` with a zero
/// diagonal.
pub fn heat_kernel_affinity(points: &Matrix, sigma: f64) -> Result<AffinityGraph> {
    heat_kernel(points, sigma, false)
}

/// Keeps the `s` largest off-diagonal entries of each row, then averages
/// with the transpose. Ties at the cut-off keep the lowest column index.
pub fn sparsify_knn(graph: &AffinityGraph, s: usize) -> Result<AffinityGraph> {
    sparsify_knn_with(graph, s, Symmetrize::Average)
}

pub fn sparsify_knn_with(graph: &AffinityGraph, s: usize, symmetrize: Symmetrize) -> Result<AffinityGraph> {
    let n = graph.size();
    if s == 0 || s >= n {
        return Err(Error::InvalidConfig(format!("knn s must satisfy 1 <= s < n = {n}, got {s}")));
    }
    let a = graph.affinity();
    let mut kept = Matrix::zeros(n, n);
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        let row = a.row(i);
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        // stable sort keeps ascending column order among equal values
        order.sort_by(|&x, &y| row[y].total_cmp(&row[x]));
        for &j in &order[..s] {
            kept[(i, j)] = row[j];
        }
        kept[(i, i)] = row[i];
    }
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = kept[(i, i)];
        for j in (i + 1)..n {
            let v = match symmetrize {
                Symmetrize::Average => 0.5 * (kept[(i, j)] + kept[(j, i)]),
                Symmetrize::Union => kept[(i, j)].max(kept[(j, i)]),
            };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(AffinityGraph::from_parts(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn graph(rows: &[&[f64]]) -> AffinityGraph {
        AffinityGraph::from_affinity(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn identical_points_have_unit_affinity() {
        let x = Matrix::from_rows(&[[1.5, -2.0], [1.5, -2.0]]).unwrap();
        let g = heat_kernel_affinity(&x, 3.0).unwrap();
        assert_eq!(g.affinity()[(0, 1)], 1.0);
        assert_eq!(g.affinity()[(0, 0)], 0.0);
    }

    #[test]
    fn heat_kernel_known_value() {
        // ‖x1 − x2‖² = 9, 2σ² = 18
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 3.0]]).unwrap();
        let g = heat_kernel_affinity(&x, 3.0).unwrap();
        assert_eq!(g.affinity()[(0, 1)], libm::exp(-0.5));
        assert_eq!(g.degrees(), &[libm::exp(-0.5), libm::exp(-0.5)]);
    }

    #[test]
    fn self_loops_option_sets_unit_diagonal() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let opts = AffinityOptions { sigma: 1.0, self_loops: true, ..Default::default() };
        let g = opts.build(&x).unwrap();
        for i in 0..3 {
            assert_eq!(g.affinity()[(i, i)], 1.0);
        }
        // self-loops leave L unchanged
        let plain = heat_kernel_affinity(&x, 1.0).unwrap();
        let d = g.laplacian().unnormalized().sub(plain.laplacian().unnormalized());
        assert!(d.frobenius_norm() < 1e-15);
    }

    #[test]
    fn heat_kernel_errors() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(heat_kernel_affinity(&x, 0.0), Err(Error::InvalidConfig(_))));
        assert!(matches!(heat_kernel_affinity(&x, -1.0), Err(Error::InvalidConfig(_))));
        let bad = Matrix::from_rows(&[[0.0], [f64::NAN]]).unwrap();
        assert!(matches!(heat_kernel_affinity(&bad, 1.0), Err(Error::InvalidData(_))));
        let single = Matrix::from_rows(&[[0.0]]).unwrap();
        assert!(heat_kernel_affinity(&single, 1.0).is_err());
    }

    #[test]
    fn two_node_laplacian() {
        let g = graph(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let l = g.laplacian();
        assert_eq!(l.unnormalized(), &Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap());
    }

    #[test]
    fn knn_full_keeps_everything() {
        let g = graph(&[&[0.0, 0.3, 0.2], &[0.3, 0.0, 0.9], &[0.2, 0.9, 0.0]]);
        assert_eq!(sparsify_knn(&g, 2).unwrap(), g);
        assert!(matches!(sparsify_knn(&g, 3), Err(Error::InvalidConfig(_))));
        assert!(matches!(sparsify_knn(&g, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn knn_ties_prefer_lower_column() {
        // row 0 sees 0.5 at columns 1, 2 and 3
        let g = graph(&[
            &[0.0, 0.5, 0.5, 0.5],
            &[0.5, 0.0, 0.0, 0.0],
            &[0.5, 0.0, 0.0, 0.0],
            &[0.5, 0.0, 0.0, 0.0],
        ]);
        let s = sparsify_knn_with(&g, 1, Symmetrize::Union).unwrap();
        // row 0 keeps column 1; columns 2 and 3 survive through their own rows
        assert_eq!(s.affinity()[(0, 1)], 0.5);
        let avg = sparsify_knn(&g, 1).unwrap();
        assert_eq!(avg.affinity()[(0, 1)], 0.5);
        assert_eq!(avg.affinity()[(0, 2)], 0.25);
        assert_eq!(avg.affinity()[(0, 3)], 0.25);
    }

    #[test]
    fn isolated_vertex_gets_floored_degree() {
        let g = graph(&[&[0.0, 2.0, 0.0], &[2.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        let d = g.floored_degrees();
        assert_eq!(d[0], 2.0);
        assert!(d[2] > 0.0 && d[2] < 1e-11);
        let n = g.laplacian().normalized();
        assert!(n.is_finite());
    }

    #[test]
    fn from_affinity_validation() {
        let asym = Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.0]]).unwrap();
        assert!(matches!(AffinityGraph::from_affinity(asym), Err(Error::InvalidInput(_))));
        let neg = Matrix::from_rows(&[[0.0, -1.0], [-1.0, 0.0]]).unwrap();
        assert!(matches!(AffinityGraph::from_affinity(neg), Err(Error::InvalidData(_))));
        assert!(AffinityGraph::from_affinity(Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn quadratic_form_matches_dense_laplacian() {
        let g = graph(&[&[0.0, 1.0, 0.5], &[1.0, 0.0, 2.0], &[0.5, 2.0, 0.0]]);
        let h = vec![0.3, -1.2, 2.0];
        let l = g.laplacian();
        let lh = l.unnormalized().matmul(&Matrix::from_vec(3, 1, h.clone()).unwrap());
        let direct: f64 = h.iter().zip(lh.as_slice()).map(|(a, b)| a * b).sum();
        assert!((direct - g.quadratic_form(&h)).abs() < 1e-12);
    }
}
