use neuncut_core::baseline::{bottom_k_eigs, kmeans, ncut_baseline, ncut_baseline_graph, BaselineConfig};
use neuncut_core::data::{gen_double_c, gen_double_rings, DEFAULT_C_SCALE, DEFAULT_NOISE, DEFAULT_RING_RADII};
use neuncut_core::metrics::{accuracy, ari};
use neuncut_core::{AffinityGraph, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> AffinityGraph {
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                let w = rng.random_range(0.01..1.0);
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }
    AffinityGraph::from_affinity(a).unwrap()
}

fn to_na(m: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

#[test]
fn eigenpairs_match_independent_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let n = rng.random_range(2..60);
        let k = rng.random_range(1..=n.min(6));
        let lt = random_graph(&mut rng, n, 0.4).laplacian().normalized();
        let e = bottom_k_eigs(&lt, k).unwrap();
        let mut oracle: Vec<f64> = to_na(&lt).symmetric_eigen().eigenvalues.iter().copied().collect();
        oracle.sort_by(f64::total_cmp);
        for j in 0..k {
            assert!((e.values[j] - oracle[j]).abs() < 1e-10, "{} vs {}", e.values[j], oracle[j]);
        }
        // residual and orthonormality
        let f = &e.vectors;
        let lf = lt.matmul(f);
        let fl = f.scale_columns(&e.values);
        assert!(lf.sub(&fl).frobenius_norm() / f.frobenius_norm() <= 1e-6);
        assert!(f.t_matmul(f).sub(&Matrix::identity(k)).frobenius_norm() <= 1e-8);
    }
}

#[test]
fn bottom_eigenvectors_minimize_the_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 30;
    let k = 3;
    let lt = random_graph(&mut rng, n, 0.5).laplacian().normalized();
    let f = bottom_k_eigs(&lt, k).unwrap().vectors;
    let best = f.t_matmul(&lt.matmul(&f)).trace();
    for _ in 0..100 {
        let g = Matrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
        let q = to_na(&g).qr().q();
        let q = Matrix::from_fn(n, k, |i, j| q[(i, j)]);
        assert!(best <= q.t_matmul(&lt.matmul(&q)).trace() + 1e-12);
    }
}

#[test]
fn connected_graph_kernel_is_sqrt_degree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = random_graph(&mut rng, 25, 1.0);
    let e = bottom_k_eigs(&g.laplacian().normalized(), 1).unwrap();
    assert!(e.values[0].abs() < 1e-12);
    let s: Vec<f64> = g.degrees().iter().map(|d| d.sqrt()).collect();
    let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    for i in 0..25 {
        assert!((e.vectors[(i, 0)] - s[i] / norm).abs() < 1e-10);
    }
}

#[test]
fn kmeans_matches_exhaustive_two_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let pts = Matrix::from_fn(8, 2, |_, _| rng.random_range(-3.0..3.0));
        let wcss = |labels: &[usize]| {
            let mut total = 0.0;
            for c in 0..2 {
                let members: Vec<usize> = (0..8).filter(|&i| labels[i] == c).collect();
                if members.is_empty() {
                    continue;
                }
                for d in 0..2 {
                    let mean = members.iter().map(|&i| pts[(i, d)]).sum::<f64>() / members.len() as f64;
                    total += members.iter().map(|&i| (pts[(i, d)] - mean).powi(2)).sum::<f64>();
                }
            }
            total
        };
        let best = (1u32..255)
            .map(|mask| wcss(&(0..8).map(|i| (mask >> i & 1) as usize).collect::<Vec<_>>()))
            .fold(f64::INFINITY, f64::min);
        let km = kmeans(&pts, 2, 1, 10).unwrap();
        assert!((km.wcss - best).abs() < 1e-9, "{} vs {}", km.wcss, best);
    }
}

#[test]
fn separated_clouds_split_exactly() {
    let pts = Matrix::from_fn(20, 2, |i, j| if i < 10 { (i * j) as f64 * 0.01 } else { 100.0 + (i + j) as f64 * 0.01 });
    let km = kmeans(&pts, 2, 0, 3).unwrap();
    let truth: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
    assert_eq!(ari(&km.labels, &truth).unwrap(), 1.0);
}

#[test]
fn disconnected_components_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 2..=4 {
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(5..25)).collect();
        let truth: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
        let n = truth.len();
        let a = Matrix::from_fn(n, n, |i, j| if i != j && truth[i] == truth[j] { 0.5 + ((i * j) % 7) as f64 * 0.1 } else { 0.0 });
        let g = AffinityGraph::from_affinity(a).unwrap();
        let cfg = BaselineConfig { clusters: k, ..Default::default() };
        let labels = ncut_baseline_graph(&g, &cfg).unwrap().labels;
        assert_eq!(ari(&labels, &truth).unwrap(), 1.0, "k = {k}");
    }
}

#[test]
fn baseline_solves_default_synthetic_shapes() {
    for seed in 0..1 {
        let rings = gen_double_rings(2000, DEFAULT_RING_RADII, DEFAULT_NOISE, seed).unwrap();
        let dc = gen_double_c(2000, DEFAULT_C_SCALE, DEFAULT_NOISE, seed).unwrap();
        for data in [rings, dc] {
            let cfg = BaselineConfig { seed, ..Default::default() };
            let first = ncut_baseline(data.points(), &cfg).unwrap().labels;
            assert!(accuracy(&first, data.labels().unwrap()).unwrap() >= 0.98);
            assert_eq!(ncut_baseline(data.points(), &cfg).unwrap().labels, first);
        }
    }
}
