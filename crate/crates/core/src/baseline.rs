//! Classical spectral clustering: bottom eigenvectors of the normalized
//! Laplacian followed by k-means on the row-normalized embedding.
//!
//! The eigensolver is a dense Householder tridiagonalization followed by
//! implicit QL with Wilkinson-style shifts. It is meant as an oracle for
//! graphs of a few thousand vertices, not as a scalable path.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{AffinityGraph, AffinityOptions, Symmetrize};
use crate::matrix::{sq_dist, Matrix};

/// Largest problem `ncut_baseline` accepts by default.
pub const DEFAULT_MAX_POINTS: usize = 5000;

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_QL_SWEEPS: usize = 60;

/// Bottom-`k` eigenpairs, eigenvalues ascending, one eigenvector per column.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralEmbedding {
    pub vectors: Matrix,
    pub values: Vec<f64>,
}

/// Full eigendecomposition of a symmetric matrix, eigenvalues ascending.
/// Row `j` of the returned matrix is the eigenvector of `values[j]`.
pub fn symmetric_eigen(s: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = s.rows();
    if n != s.cols() {
        return Err(Error::InvalidInput(format!("matrix is {}x{}, not square", n, s.cols())));
    }
    if !s.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let scale = s.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if let Some(asym) = s.max_asymmetry() {
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidInput(format!("matrix is not symmetric (max |s_ij - s_ji| = {asym:e})")));
        }
    }
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    // w holds the transpose of the working matrix V so the inner loops of
    // both phases run along contiguous rows.
    let mut w = s.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut w, &mut d, &mut e);
    tql2(n, &mut w, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&j| d[j]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.row_mut(dst).copy_from_slice(&w[src * n..(src + 1) * n]);
    }
    Ok((values, vectors))
}

// V[r][c] stored at w[c * n + r]
macro_rules! v {
    ($w:ident, $n:ident, $r:expr, $c:expr) => {
        $w[($c) * $n + ($r)]
    };
}

fn tred2(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    for j in 0..n {
        d[j] = v!(w, n, n - 1, j);
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v!(w, n, i - 1, j);
                v!(w, n, i, j) = 0.0;
                v!(w, n, j, i) = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v!(w, n, j, i) = f;
                g = e[j] + v!(w, n, j, j) * f;
                for k in j + 1..i {
                    let vkj = v!(w, n, k, j);
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v!(w, n, k, j) -= f * e[k] + g * d[k];
                }
                d[j] = v!(w, n, i - 1, j);
                v!(w, n, i, j) = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v!(w, n, n - 1, i) = v!(w, n, i, i);
        v!(w, n, i, i) = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v!(w, n, k, i + 1) / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v!(w, n, k, i + 1) * v!(w, n, k, j);
                }
                for k in 0..=i {
                    v!(w, n, k, j) -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v!(w, n, k, i + 1) = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v!(w, n, n - 1, j);
        v!(w, n, n - 1, j) = 0.0;
    }
    v!(w, n, n - 1, n - 1) = 1.0;
    e[0] = 0.0;
}

fn tql2(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(Error::Numerical(format!("QL iteration did not converge for eigenvalue {l}")));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    // rotate columns i, i+1 of V (rows of w)
                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let vi = &mut lo[i * n..];
                    let vi1 = &mut hi[..n];
                    for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// The `k` eigenpairs of `s` with smallest eigenvalues. Each eigenvector is
/// signed so that its largest-magnitude entry is positive.
pub fn bottom_k_eigs(s: &Matrix, k: usize) -> Result<SpectralEmbedding> {
    if k == 0 || k > s.rows() {
        return Err(Error::InvalidInput(format!("k = {k} must lie in 1..={}", s.rows())));
    }
    let (values, rows) = symmetric_eigen(s)?;
    let n = s.rows();
    let mut vectors = Matrix::zeros(n, k);
    for j in 0..k {
        let v = rows.row(j);
        let mut pivot = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, j)] = sign * v[i];
        }
    }
    Ok(SpectralEmbedding { vectors, values: values[..k].to_vec() })
}

/// Outcome of [`kmeans`].
#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
}

const LLOYD_MAX_ITERS: usize = 300;

/// Lloyd's algorithm from k-means++ seeds; the best of `restarts` runs by
/// within-cluster sum of squares.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, restarts: usize) -> Result<KMeans> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("cannot form {k} clusters from {n} points")));
    }
    if !points.is_finite() {
        return Err(Error::InvalidData("k-means input has non-finite entries".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeans> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(points, plus_plus(points, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // all remaining points coincide with a centre
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    points.select_rows(&chosen)
}

fn assign(points: &Matrix, centroids: &Matrix, labels: &mut [usize], dist: &mut [f64]) -> bool {
    let mut changed = false;
    for i in 0..points.rows() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centroids.rows() {
            let d = sq_dist(points.row(i), centroids.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        if labels[i] != best {
            labels[i] = best;
            changed = true;
        }
        dist[i] = best_d;
    }
    changed
}

fn lloyd(points: &Matrix, mut centroids: Matrix) -> KMeans {
    let n = points.rows();
    let k = centroids.rows();
    let dim = points.cols();
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    for _ in 0..LLOYD_MAX_ITERS {
        let changed = assign(points, &centroids, &mut labels, &mut dist);
        let mut counts = vec![0usize; k];
        let mut sums = Matrix::zeros(k, dim);
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, x) in sums.row_mut(labels[i]).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        let mut reseeded = false;
        for c in 0..k {
            if counts[c] == 0 {
                // move the empty centre onto the worst-served point
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
                if let Some(far) = far {
                    counts[labels[far]] -= 1;
                    for (s, x) in sums.row_mut(labels[far]).iter_mut().zip(points.row(far)) {
                        *s -= x;
                    }
                    labels[far] = c;
                    dist[far] = 0.0;
                    counts[c] = 1;
                    sums.row_mut(c).copy_from_slice(points.row(far));
                    reseeded = true;
                }
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (m, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *m = s * inv;
                }
            }
        }
        if !changed && !reseeded {
            break;
        }
    }
    let wcss = (0..n).map(|i| sq_dist(points.row(i), centroids.row(labels[i]))).sum();
    KMeans { labels, centroids, wcss }
}

/// Settings for [`ncut_baseline`].
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineConfig {
    pub clusters: usize,
    pub sigma: f64,
    pub knn: Option<usize>,
    pub symmetrize: Symmetrize,
    pub seed: u64,
    pub restarts: usize,
    pub max_points: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            clusters: 2,
            sigma: 3.0,
            knn: None,
            symmetrize: Symmetrize::Average,
            seed: 0,
            restarts: 10,
            max_points: DEFAULT_MAX_POINTS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineResult {
    pub labels: Vec<usize>,
    pub embedding: SpectralEmbedding,
}

/// Heat-kernel graph of `points`, then [`ncut_baseline_graph`].
pub fn ncut_baseline(points: &Matrix, cfg: &BaselineConfig) -> Result<BaselineResult> {
    check_size(points.rows(), cfg)?;
    let graph = AffinityOptions { sigma: cfg.sigma, knn: cfg.knn, symmetrize: cfg.symmetrize, self_loops: false }
        .build(points)?;
    ncut_baseline_graph(&graph, cfg)
}

/// Spectral clustering of a prebuilt graph: bottom eigenvectors of the
/// normalized Laplacian, rows scaled to unit length, then k-means.
/// `cfg.sigma` and `cfg.knn` are ignored here.
pub fn ncut_baseline_graph(graph: &AffinityGraph, cfg: &BaselineConfig) -> Result<BaselineResult> {
    check_size(graph.size(), cfg)?;
    let lap = graph.laplacian().normalized();
    let embedding = bottom_k_eigs(&lap, cfg.clusters)?;
    let mut rows = embedding.vectors.clone();
    for i in 0..rows.rows() {
        let row = rows.row_mut(i);
        let norm = libm::sqrt(row.iter().map(|x| x * x).sum::<f64>());
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
    let labels = kmeans(&rows, cfg.clusters, cfg.seed, cfg.restarts)?.labels;
    Ok(BaselineResult { labels, embedding })
}

fn check_size(n: usize, cfg: &BaselineConfig) -> Result<()> {
    if n > cfg.max_points {
        return Err(Error::InvalidConfig(format!(
            "dense baseline limited to {} points, got {n}",
            cfg.max_points
        )));
    }
    if cfg.clusters == 0 || cfg.clusters > n {
        return Err(Error::InvalidConfig(format!("cannot form {} clusters from {n} points", cfg.clusters)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_eigenvalues() {
        let e = bottom_k_eigs(&Matrix::identity(3), 2).unwrap();
        assert_eq!(e.values.len(), 2);
        for v in e.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn path_graph_laplacian() {
        let l = Matrix::from_rows(&[[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]]).unwrap();
        let e = bottom_k_eigs(&l, 3).unwrap();
        for (got, want) in e.values.iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn one_by_one_and_diagonal() {
        let e = bottom_k_eigs(&Matrix::from_rows(&[[4.0]]).unwrap(), 1).unwrap();
        assert_eq!(e.values, vec![4.0]);
        assert_eq!(e.vectors[(0, 0)], 1.0);
        let diag = Matrix::from_fn(4, 4, |i, j| if i == j { [3.0, -1.0, 2.0, 0.5][i] } else { 0.0 });
        let e = bottom_k_eigs(&diag, 4).unwrap();
        assert_eq!(e.values, vec![-1.0, 0.5, 2.0, 3.0]);
        assert_eq!(e.vectors[(1, 0)], 1.0);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let s = Matrix::from_rows(&[[1.0, 0.5], [0.4, 1.0]]).unwrap();
        assert!(matches!(bottom_k_eigs(&s, 1), Err(Error::InvalidInput(_))));
        assert!(matches!(bottom_k_eigs(&Matrix::identity(2), 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sign_is_canonical() {
        let l = Matrix::from_rows(&[[2.0, -1.0], [-1.0, 2.0]]).unwrap();
        let e = bottom_k_eigs(&l, 2).unwrap();
        for j in 0..2 {
            let col = e.vectors.column(j);
            let big = col.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn kmeans_each_point_its_own_cluster() {
        let pts = Matrix::from_rows(&[[0.0, 0.0], [1.0, 5.0], [-3.0, 2.0]]).unwrap();
        let km = kmeans(&pts, 3, 1, 4).unwrap();
        assert_eq!(km.wcss, 0.0);
        let mut l = km.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2]);
    }

    #[test]
    fn kmeans_duplicate_points() {
        let pts = Matrix::from_rows(&[[1.0], [1.0], [1.0], [1.0]]).unwrap();
        let km = kmeans(&pts, 2, 0, 3).unwrap();
        assert_eq!(km.wcss, 0.0);
        assert!(km.labels.contains(&0) && km.labels.contains(&1));
    }

    #[test]
    fn baseline_size_cap() {
        let pts = Matrix::zeros(10, 2);
        let cfg = BaselineConfig { max_points: 5, ..Default::default() };
        assert!(matches!(ncut_baseline(&pts, &cfg), Err(Error::InvalidConfig(_))));
    }
}
