use neuncut_core::loss::{estimate_sizes, estimate_volumes, normalized_gram, Cut};
use neuncut_core::{AffinityGraph, Matrix};
use proptest::prelude::*;

/// Complete graph with positive random weights.
fn dense_graph(max_n: usize) -> impl Strategy<Value = AffinityGraph> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.05f64..2.0, n * n).prop_map(move |v| {
            let a = Matrix::from_fn(n, n, |i, j| match i.cmp(&j) {
                std::cmp::Ordering::Less => v[i * n + j],
                std::cmp::Ordering::Greater => v[j * n + i],
                std::cmp::Ordering::Equal => 0.0,
            });
            AffinityGraph::from_affinity(a).unwrap()
        })
    })
}

/// Graph plus a labelling of its vertices in which every cluster occurs.
fn graph_and_partition(max_n: usize, max_k: usize) -> impl Strategy<Value = (AffinityGraph, usize, Vec<usize>)> {
    dense_graph(max_n).prop_flat_map(move |g| {
        let n = g.size();
        (Just(g), 1..=max_k.min(n)).prop_flat_map(move |(g, k)| {
            prop::collection::vec(0..k, n)
                .prop_filter("every cluster used", move |l| (0..k).all(|c| l.contains(&c)))
                .prop_map(move |l| (g.clone(), k, l))
        })
    })
}

fn one_hot(labels: &[usize], k: usize) -> Matrix {
    Matrix::from_fn(labels.len(), k, |i, j| f64::from(u8::from(labels[i] == j)))
}

fn soft(n: usize, k: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(0.01f64..1.0, n * k).prop_map(move |v| {
        let mut y = Matrix::from_vec(n, k, v).unwrap();
        for i in 0..n {
            let s: f64 = y.row(i).iter().sum();
            y.row_mut(i).iter_mut().for_each(|x| *x /= s);
        }
        y
    })
}

/// Cut-over-volume sum straight from the definition.
fn combinatorial(g: &AffinityGraph, labels: &[usize], k: usize, ratio: bool) -> f64 {
    let n = g.size();
    (0..k)
        .map(|c| {
            let mut cut = 0.0;
            let mut mass = 0.0;
            for i in 0..n {
                if labels[i] != c {
                    continue;
                }
                mass += if ratio { 1.0 } else { g.degrees()[i] };
                for j in 0..n {
                    if labels[j] != c {
                        cut += g.affinity()[(i, j)];
                    }
                }
            }
            cut / mass
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lap_term_equals_combinatorial_ncut((g, k, labels) in graph_and_partition(8, 3)) {
        let y = one_hot(&labels, k);
        let mass = Cut::Normalized.estimate(&y, &g).unwrap();
        let loss = Cut::Normalized.loss(&y, &g, &mass, 1.0).unwrap();
        prop_assert!((loss.lap - combinatorial(&g, &labels, k, false)).abs() <= 1e-10);
        let mass = Cut::Ratio.estimate(&y, &g).unwrap();
        let loss = Cut::Ratio.loss(&y, &g, &mass, 1.0).unwrap();
        prop_assert!((loss.lap - combinatorial(&g, &labels, k, true)).abs() <= 1e-10);
    }

    #[test]
    fn binary_membership_is_orthonormal((g, k, labels) in graph_and_partition(20, 4)) {
        let y = one_hot(&labels, k);
        let vol = estimate_volumes(&y, g.degrees()).unwrap();
        let gram = normalized_gram(&y, g.degrees(), &vol);
        prop_assert!(gram.sub(&Matrix::identity(k)).frobenius_norm() <= 1e-9);
    }

    #[test]
    fn interior_row_drops_diagonal_below_one(
        (g, k, labels) in graph_and_partition(20, 4),
        row in any::<prop::sample::Index>(),
        t in 0.01f64..0.99,
    ) {
        prop_assume!(k >= 2);
        let i = row.index(labels.len());
        let mut y = one_hot(&labels, k);
        let own = labels[i];
        let other = (own + 1) % k;
        y[(i, own)] = t;
        y[(i, other)] = 1.0 - t;
        let vol = estimate_volumes(&y, g.degrees()).unwrap();
        let gram = normalized_gram(&y, g.degrees(), &vol);
        prop_assert!(gram[(own, own)] < 1.0);
        prop_assert!(gram[(other, other)] < 1.0);
    }

    #[test]
    fn volumes_sum_to_total_degree(g in dense_graph(10), y in soft(10, 3)) {
        let n = g.size();
        let y = y.select_rows(&(0..n).collect::<Vec<_>>());
        let vol = estimate_volumes(&y, g.degrees()).unwrap();
        let total: f64 = g.degrees().iter().sum();
        prop_assert!((vol.masses.iter().sum::<f64>() - total).abs() <= 1e-9 * total);
        // naive oracle
        for c in 0..3 {
            let mut v = 0.0;
            for i in 0..n {
                v += y[(i, c)] * g.degrees()[i];
            }
            prop_assert!((vol.masses[c] - v).abs() <= 1e-12 * total);
        }
    }

    #[test]
    fn lap_is_nonnegative(g in dense_graph(10), y in soft(10, 3), gamma in 0.0f64..100.0) {
        let n = g.size();
        let y = y.select_rows(&(0..n).collect::<Vec<_>>());
        for cut in [Cut::Normalized, Cut::Ratio] {
            let mass = cut.estimate(&y, &g).unwrap();
            let loss = cut.loss(&y, &g, &mass, gamma).unwrap();
            prop_assert!(loss.lap >= -1e-10);
            prop_assert!(loss.orth >= 0.0);
            prop_assert!((loss.total - (loss.lap + 0.5 * gamma * loss.orth)).abs() <= 1e-12 * loss.total.abs().max(1.0));
        }
    }

    #[test]
    fn lap_is_scale_invariant_for_binary_y((g, k, labels) in graph_and_partition(10, 3), c in 0.1f64..10.0) {
        let y = one_hot(&labels, k);
        let scaled = AffinityGraph::from_affinity(g.affinity().map(|a| a * c)).unwrap();
        let lap = |g: &AffinityGraph| {
            let mass = Cut::Normalized.estimate(&y, g).unwrap();
            Cut::Normalized.loss(&y, g, &mass, 1.0).unwrap().lap
        };
        prop_assert!((lap(&g) - lap(&scaled)).abs() <= 1e-10);
    }

    #[test]
    fn gradient_matches_central_differences(g in dense_graph(7), y in soft(7, 3), gamma in 0.0f64..20.0) {
        let n = g.size();
        let y = y.select_rows(&(0..n).collect::<Vec<_>>());
        for cut in [Cut::Normalized, Cut::Ratio] {
            let mass = cut.estimate(&y, &g).unwrap();
            let (_, grad) = cut.loss_and_grad(&y, &g, &mass, gamma).unwrap();
            let h = 1e-6;
            // round-off floor of the difference quotient
            let resolution = f64::EPSILON * cut.loss(&y, &g, &mass, gamma).unwrap().total.abs() / h;
            for i in 0..n {
                for j in 0..3 {
                    let mut plus = y.clone();
                    plus[(i, j)] += h;
                    let mut minus = y.clone();
                    minus[(i, j)] -= h;
                    let fd = (cut.loss(&plus, &g, &mass, gamma).unwrap().total
                        - cut.loss(&minus, &g, &mass, gamma).unwrap().total)
                        / (2.0 * h);
                    let a = grad[(i, j)];
                    let rel = ((a - fd).abs() - resolution).max(0.0) / a.abs().max(fd.abs()).max(1e-300);
                    prop_assert!(rel <= 1e-6, "{:?} ({}, {}): {} vs {}", cut, i, j, a, fd);
                }
            }
        }
    }
}

#[test]
fn empty_cluster_volume_is_floored() {
    let y = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap();
    let vol = estimate_volumes(&y, &[2.0, 3.0]).unwrap();
    assert_eq!(vol.masses, vec![5.0, 5e-8]);
    let sizes = estimate_sizes(&y);
    assert_eq!(sizes.masses, vec![2.0, 2e-8]);
}

#[test]
fn uniform_membership_orth_matches_dense_evaluation() {
    let g = AffinityGraph::from_affinity(
        Matrix::from_rows(&[[0.0, 1.0, 0.5], [1.0, 0.0, 2.0], [0.5, 2.0, 0.0]]).unwrap(),
    )
    .unwrap();
    for k in 2..=4 {
        let y = Matrix::from_fn(3, k, |_, _| 1.0 / k as f64);
        let vol = estimate_volumes(&y, g.degrees()).unwrap();
        let loss = Cut::Normalized.loss(&y, &g, &vol, 1.0).unwrap();
        // BᵀDB has every entry equal to 1/k
        let want = Matrix::from_fn(k, k, |_, _| 1.0 / k as f64).sub(&Matrix::identity(k)).frobenius_norm_sq();
        assert!((loss.orth - want).abs() < 1e-12);
        assert!(loss.lap.abs() < 1e-12);
    }
}

#[test]
fn regular_graph_ratio_is_the_degree() {
    // 4-regular circulant on 6 vertices: neighbours at offsets ±1, ±2
    let a = Matrix::from_fn(6, 6, |i, j| {
        let d = (i as i64 - j as i64).rem_euclid(6);
        f64::from(u8::from(matches!(d, 1 | 2 | 4 | 5)))
    });
    let g = AffinityGraph::from_affinity(a).unwrap();
    let y = Matrix::from_fn(6, 2, |i, j| if i < 3 { [0.8, 0.2][j] } else { [0.3, 0.7][j] });
    let nc = Cut::Normalized.loss(&y, &g, &Cut::Normalized.estimate(&y, &g).unwrap(), 1.0).unwrap();
    let rc = Cut::Ratio.loss(&y, &g, &Cut::Ratio.estimate(&y, &g).unwrap(), 1.0).unwrap();
    assert!((rc.lap / nc.lap - 4.0).abs() < 1e-12);
}
