//! Matrix-tree computations checked against brute-force enumeration and
//! finite differences.

use docstruct::mtt::{
    cle_best_tree, enumerate_trees, log_partition, marginals, marginals_backward, MarginalGrad,
    PotentialTable,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_table(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> PotentialTable {
    let arc = Array2::from_shape_fn((n, n), |_| rng.gen_range(-scale..scale));
    let root = Array1::from_shape_fn(n, |_| rng.gen_range(-scale..scale));
    PotentialTable::new(arc, root).unwrap()
}

/// log Z and marginals by explicit summation over every tree.
fn brute_force(table: &PotentialTable) -> (f64, Array2<f64>, Array1<f64>) {
    let n = table.len();
    let trees = enumerate_trees(n).unwrap();
    let scores: Vec<f64> = trees.iter().map(|t| table.tree_score(t)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();

    let mut arc = Array2::zeros((n, n));
    let mut root = Array1::zeros(n);
    for (tree, score) in trees.iter().zip(&scores) {
        let p = (score - max).exp() / z;
        for (j, head) in tree.heads().iter().enumerate() {
            match head {
                Some(h) => arc[[*h, j]] += p,
                None => root[j] += p,
            }
        }
    }
    (z.ln() + max, arc, root)
}

#[test]
fn single_node_partition() {
    let table = PotentialTable::new(Array2::zeros((1, 1)), Array1::zeros(1)).unwrap();
    assert_eq!(log_partition(&table).unwrap(), 0.0);
    let m = marginals(&table).unwrap();
    assert_eq!(m.root[0], 1.0);
    assert_eq!(m.arc[[0, 0]], 0.0);
}

#[test]
fn two_uniform_nodes() {
    let table = PotentialTable::new(Array2::zeros((2, 2)), Array1::zeros(2)).unwrap();
    let log_z = log_partition(&table).unwrap();
    assert!((log_z - 2f64.ln()).abs() < 1e-12);

    let m = marginals(&table).unwrap();
    for v in [m.root[0], m.root[1], m.arc[[0, 1]], m.arc[[1, 0]]] {
        assert!((v - 0.5).abs() < 1e-12);
    }
}

#[test]
fn log_partition_matches_enumeration_n4() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let table = random_table(&mut rng, 4, 1.0);
        let (expected, _, _) = brute_force(&table);
        let got = log_partition(&table).unwrap();
        assert!((got - expected).abs() < 1e-8, "{} vs {}", got, expected);
    }
}

#[test]
fn marginals_match_enumeration_n5() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let table = random_table(&mut rng, 5, 1.0);
        let (_, arc, root) = brute_force(&table);
        let m = marginals(&table).unwrap();
        for i in 0..5 {
            assert!((m.root[i] - root[i]).abs() < 1e-8);
            for j in 0..5 {
                assert!((m.arc[[i, j]] - arc[[i, j]]).abs() < 1e-8, "({}, {})", i, j);
            }
        }
    }
}

#[test]
fn large_scores_do_not_overflow() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let table = random_table(&mut rng, 5, 1.0);
    let arc = table.arc() + 800.0;
    let root = table.root() + 800.0;
    let shifted = PotentialTable::new(arc, root).unwrap();
    let (expected, _, _) = brute_force(&shifted);
    let got = log_partition(&shifted).unwrap();
    assert!((got - expected).abs() < 1e-8);
}

#[test]
fn ill_conditioned_laplacian_is_reported() {
    // One root weight dwarfs everything else by e^60.
    let arc = Array2::from_elem((3, 3), -60.0);
    let root = Array1::from(vec![0.0, -60.0, -60.0]);
    let table = PotentialTable::new(arc, root).unwrap();
    let err = marginals(&table).unwrap_err();
    assert!(err.is_numerical(), "{}", err);
}

fn finite_difference_check(table: &PotentialTable, upstream: &MarginalGrad) {
    let n = table.len();
    let objective = |t: &PotentialTable| {
        let m = marginals(t).unwrap();
        (&m.arc * &upstream.arc).sum() + (&m.root * &upstream.root).sum() + upstream.log_z * m.log_z
    };
    let grad = marginals_backward(table, upstream).unwrap();
    let h = 1e-5;

    let mut check = |analytic: f64, plus: PotentialTable, minus: PotentialTable| {
        let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
        let scale = analytic.abs().max(numeric.abs()).max(1e-3);
        assert!(
            (analytic - numeric).abs() / scale < 1e-4,
            "analytic {} vs numeric {}",
            analytic,
            numeric
        );
    };

    for i in 0..n {
        for j in 0..n {
            if i == j {
                assert_eq!(grad.arc[[i, j]], 0.0);
                continue;
            }
            let mut plus = table.arc().clone();
            plus[[i, j]] += h;
            let mut minus = table.arc().clone();
            minus[[i, j]] -= h;
            check(
                grad.arc[[i, j]],
                PotentialTable::new(plus, table.root().clone()).unwrap(),
                PotentialTable::new(minus, table.root().clone()).unwrap(),
            );
        }
        let mut plus = table.root().clone();
        plus[i] += h;
        let mut minus = table.root().clone();
        minus[i] -= h;
        check(
            grad.root[i],
            PotentialTable::new(table.arc().clone(), plus).unwrap(),
            PotentialTable::new(table.arc().clone(), minus).unwrap(),
        );
    }
}

fn random_upstream(rng: &mut ChaCha8Rng, n: usize) -> MarginalGrad {
    MarginalGrad {
        arc: Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0)),
        root: Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0)),
        log_z: rng.gen_range(-1.0..1.0),
    }
}

#[test]
fn backward_matches_finite_differences_n3() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let table = random_table(&mut rng, 3, 1.0);
    let upstream = random_upstream(&mut rng, 3);
    finite_difference_check(&table, &upstream);
}

#[test]
fn backward_matches_finite_differences_n2_to_n6() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for n in 2..=6 {
        for _ in 0..3 {
            let table = random_table(&mut rng, n, 1.5);
            let upstream = random_upstream(&mut rng, n);
            finite_difference_check(&table, &upstream);
        }
    }
}

#[test]
fn zero_upstream_gives_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let table = random_table(&mut rng, 4, 1.0);
    let grad = marginals_backward(&table, &MarginalGrad::zeros(4)).unwrap();
    assert!(grad.arc.iter().all(|&g| g == 0.0));
    assert!(grad.root.iter().all(|&g| g == 0.0));
}

#[test]
fn masked_positions_get_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let table = random_table(&mut rng, 5, 1.0);
    let mask = vec![true, true, false, true, false];
    let masked = PotentialTable::with_mask(table.arc().clone(), table.root().clone(), mask.clone()).unwrap();
    let upstream = MarginalGrad {
        arc: Array2::ones((5, 5)),
        root: Array1::ones(5),
        log_z: 1.0,
    };
    let grad = marginals_backward(&masked, &upstream).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            if !mask[i] || !mask[j] {
                assert_eq!(grad.arc[[i, j]], 0.0);
            }
        }
        if !mask[i] {
            assert_eq!(grad.root[i], 0.0);
        }
    }
}

#[test]
fn cle_matches_brute_force_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for k in 0..200 {
        let n = 1 + k % 6;
        let table = random_table(&mut rng, n, 3.0);
        let best = enumerate_trees(n)
            .unwrap()
            .iter()
            .map(|t| table.tree_score(t))
            .fold(f64::NEG_INFINITY, f64::max);
        let (tree, score) = cle_best_tree(&table).unwrap();
        assert_eq!(tree.root_children().len(), 1);
        assert!((score - table.tree_score(&tree)).abs() < 1e-12);
        assert!((score - best).abs() < 1e-9, "n={} cle {} brute {}", n, score, best);
    }
}

fn table_strategy() -> impl Strategy<Value = (PotentialTable, Vec<bool>)> {
    (1usize..=7).prop_flat_map(|n| {
        (
            proptest::collection::vec(-3.0f64..3.0, n * n),
            proptest::collection::vec(-3.0f64..3.0, n),
            proptest::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(arc, root, mut mask)| {
                if !mask.iter().any(|&m| m) {
                    mask[0] = true;
                }
                let arc = Array2::from_shape_vec((n, n), arc).unwrap();
                let table = PotentialTable::new(arc, Array1::from(root)).unwrap();
                (table, mask)
            })
    })
}

proptest! {
    #[test]
    fn normalization_holds((table, mask) in table_strategy()) {
        let masked = PotentialTable::with_mask(table.arc().clone(), table.root().clone(), mask.clone()).unwrap();
        let m = marginals(&masked).unwrap();
        let n = table.len();
        let root_sum: f64 = m.root.sum();
        prop_assert!((root_sum - 1.0).abs() < 1e-6);
        for j in 0..n {
            let parents: f64 = (0..n).filter(|&i| i != j).map(|i| m.arc[[i, j]]).sum::<f64>() + m.root[j];
            if mask[j] {
                prop_assert!((parents - 1.0).abs() < 1e-6);
            } else {
                prop_assert_eq!(parents, 0.0);
                for i in 0..n {
                    prop_assert_eq!(m.arc[[j, i]], 0.0);
                }
            }
        }
        prop_assert!(m.arc.iter().chain(m.root.iter()).all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn masking_equals_compaction((table, mask) in table_strategy()) {
        let masked = PotentialTable::with_mask(table.arc().clone(), table.root().clone(), mask.clone()).unwrap();
        let padded = marginals(&masked).unwrap();
        let compact = marginals(&masked.compact()).unwrap();
        let valid = masked.valid_positions();
        for (a, &i) in valid.iter().enumerate() {
            prop_assert!((padded.root[i] - compact.root[a]).abs() < 1e-6);
            for (b, &j) in valid.iter().enumerate() {
                prop_assert!((padded.arc[[i, j]] - compact.arc[[a, b]]).abs() < 1e-6);
            }
        }
        prop_assert!((padded.log_z - compact.log_z).abs() < 1e-9);
    }

    #[test]
    fn shift_invariance((table, _mask) in table_strategy(), c in -5.0f64..5.0) {
        let n = table.len();
        let shifted = PotentialTable::new(table.arc() + c, table.root() + c).unwrap();
        let a = marginals(&table).unwrap();
        let b = marginals(&shifted).unwrap();
        for (x, y) in a.arc.iter().zip(b.arc.iter()).chain(a.root.iter().zip(b.root.iter())) {
            prop_assert!((x - y).abs() < 1e-6);
        }
        prop_assert!((b.log_z - a.log_z - n as f64 * c).abs() < 1e-8);
    }
}
