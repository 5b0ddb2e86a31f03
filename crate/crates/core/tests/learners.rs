mod common;

use std::sync::Arc;

use camolab_core::learners::tree::Node;
use camolab_core::learners::{
    argmax, save_classifier, DecisionTree, Hyperparams, KnnClassifier, RandomForest, Registry, TreeParams, TARGET_KINDS,
};
use camolab_core::rng::rng_from;
use camolab_core::{Classifier, Dataset, DeviceClass, Error};
use common::{accuracy, blobs, classes, schema};
use ndarray::{array, Array1, Array2};
use rand::Rng;

fn registry() -> Registry {
    Registry::with_defaults(&Hyperparams { forest_trees: 15, mlp_epochs: 15, svm_epochs: 10, ..Hyperparams::default() })
        .unwrap()
}

fn dataset(values: Array2<f64>, labels: &[usize], n_classes: usize) -> Dataset {
    let k = values.ncols();
    Dataset::new(schema(k), classes(n_classes), values, labels.iter().map(|&c| DeviceClass(c)).collect()).unwrap()
}

#[test]
fn one_nn_memorises_its_training_set() {
    let ds = blobs(6, 4, 30, 1.5, 1);
    let m = camolab_core::learners::fit("knn", &ds, &Hyperparams { knn_k: 1, ..Hyperparams::default() }, 0).unwrap();
    assert_eq!(accuracy(m.as_ref(), &ds), 1.0);
}

#[test]
fn one_nn_with_a_single_row_returns_its_class() {
    let ds = dataset(array![[1.0, 2.0, 3.0]], &[2], 3);
    let m = KnnClassifier::memorize(&ds, 1).unwrap();
    assert_eq!(m.predict(array![1.0, 2.0, 3.0].view()).unwrap(), DeviceClass(2));
}

#[test]
fn three_nn_matches_exhaustive_distance_sort() {
    let points = array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [4.0, 4.0], [5.0, 3.0]];
    let labels = [0, 1, 1, 2, 2];
    let ds = dataset(points.clone(), &labels, 3);
    let m = KnnClassifier::memorize(&ds, 3).unwrap();
    // Oracle: distances in the same standardised space, full sort, majority of top 3.
    let mean = points.mean_axis(ndarray::Axis(0)).unwrap();
    let std = points.std_axis(ndarray::Axis(0), 0.0);
    let z = |p: ndarray::ArrayView1<f64>| (&p - &mean) / &std;
    let mut rng = rng_from(3);
    for _ in 0..200 {
        let q = array![rng.random_range(-1.0..6.0), rng.random_range(-1.0..5.0)];
        let zq = z(q.view());
        let mut order: Vec<(f64, usize)> = points
            .outer_iter()
            .enumerate()
            .map(|(i, p)| ((&z(p) - &zq).mapv(|v| v * v).sum(), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = [0usize; 3];
        for &(_, i) in &order[..3] {
            votes[labels[i]] += 1;
        }
        let expected = (0..3).fold(0, |b, c| if votes[c] > votes[b] { c } else { b });
        assert_eq!(m.predict(q.view()).unwrap(), DeviceClass(expected), "query {q}");
    }
}

#[test]
fn four_nn_vote_fractions() {
    // Four points equidistant-ish from the origin query; far point excluded.
    let points = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [9.0, 9.0]];
    let ds = dataset(points, &[0, 0, 1, 2, 1], 3);
    let m = KnnClassifier::memorize(&ds, 4).unwrap();
    let nn = m.neighbours(array![0.5, 0.5].view());
    assert_eq!(nn.len(), 4);
    assert!(!nn.contains(&4));
    let scores = m.predict_scores(array![0.5, 0.5].view()).unwrap();
    assert_eq!(scores, vec![0.5, 0.25, 0.25]);
}

#[test]
fn unbounded_tree_fits_twenty_unique_rows() {
    let mut rng = rng_from(77);
    let x = Array2::from_shape_fn((20, 3), |_| rng.random_range(-5.0..5.0));
    let y: Vec<usize> = (0..20).map(|_| rng.random_range(0..4)).collect();
    let ds = dataset(x.clone(), &y, 4);
    let model = registry().fit("decision_tree", &ds, 1).unwrap();
    assert_eq!(accuracy(model.as_ref(), &ds), 1.0);
    // Exhaustive purity: every leaf reached by a training row holds one class.
    let tree = DecisionTree::fit(x.view(), &y, (0..20).collect(), 4, &TreeParams::default(), &mut rng_from(1));
    for leaf in tree.leaves() {
        let occupied = tree.leaf_counts(leaf).iter().filter(|&&c| c > 0).count();
        assert_eq!(occupied, 1, "leaf {leaf} is impure");
    }
}

fn stump(feature: usize, threshold: f64, left_class: usize, right_class: usize) -> DecisionTree {
    let leaf = |c: usize| {
        let mut counts = vec![0u32; 3];
        counts[c] = 1;
        Node::Leaf { counts }
    };
    DecisionTree::from_nodes(
        vec![Node::Split { feature, threshold, left: 1, right: 2 }, leaf(left_class), leaf(right_class)],
        3,
    )
    .unwrap()
}

#[test]
fn forest_of_three_stumps_takes_the_majority() {
    let forest = RandomForest::from_trees(
        (*schema(2)).clone(),
        3,
        vec![stump(0, 0.0, 0, 1), stump(1, 0.0, 2, 1), stump(0, 5.0, 2, 0)],
    )
    .unwrap();
    // x = (1, 1): stump outputs 1, 1, 2 → class 1 by 2:1.
    let x = array![1.0, 1.0];
    assert_eq!(forest.predict(x.view()).unwrap(), DeviceClass(1));
    let s = forest.predict_scores(x.view()).unwrap();
    assert_eq!(s, vec![0.0, 2.0 / 3.0, 1.0 / 3.0]);
    // x = (-1, -1): outputs 0, 2, 2 → class 2.
    assert_eq!(forest.predict(array![-1.0, -1.0].view()).unwrap(), DeviceClass(2));
}

#[test]
fn zero_network_predicts_class_zero() {
    use camolab_core::learners::{Activation, Mlp};
    let m = Mlp::zeros(&[3, 4, 3], Activation::Relu, Activation::Sigmoid).unwrap();
    let s = m.forward(array![1.0, 2.0, 3.0].view());
    assert!(s.iter().all(|&v| v == 0.5));
    assert_eq!(argmax(s.as_slice().unwrap()), 0);
}

#[test]
fn every_kind_predicts_the_argmax_of_its_scores() {
    let train = blobs(5, 6, 40, 2.0, 8);
    let reg = registry();
    let mut rng = rng_from(99);
    let probes = Array2::from_shape_fn((1000, 6), |_| rng.random_range(-10.0..10.0));
    for kind in TARGET_KINDS {
        let m = reg.fit(kind, &train, 4).unwrap();
        for x in probes.outer_iter() {
            let scores = m.predict_scores(x).unwrap();
            assert_eq!(scores.len(), 5);
            assert!(m.predict(x).unwrap().0 < 5);
            assert_eq!(m.predict(x).unwrap(), DeviceClass(argmax(&scores)), "{kind}");
        }
        let batch = m.predict_batch(probes.view()).unwrap();
        let single: Vec<_> = probes.outer_iter().map(|x| m.predict(x).unwrap()).collect();
        assert_eq!(batch, single, "{kind} batch prediction");
    }
}

#[test]
fn forest_scores_sum_to_one() {
    let train = blobs(4, 3, 30, 2.0, 2);
    let m = registry().fit("random_forest", &train, 1).unwrap();
    for x in train.features().outer_iter() {
        let s: f64 = m.predict_scores(x).unwrap().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn fits_are_deterministic_per_seed() {
    let train = blobs(4, 5, 40, 2.5, 21);
    let mut rng = rng_from(1);
    let probes = Array2::from_shape_fn((300, 5), |_| rng.random_range(-10.0..10.0));
    let reg = registry();
    for kind in TARGET_KINDS {
        let a = reg.fit(kind, &train, 17).unwrap();
        let b = reg.fit(kind, &train, 17).unwrap();
        for x in probes.outer_iter() {
            let (sa, sb) = (a.predict_scores(x).unwrap(), b.predict_scores(x).unwrap());
            assert!(sa.iter().zip(&sb).all(|(p, q)| p.to_bits() == q.to_bits()), "{kind}");
        }
    }
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let train = blobs(4, 5, 30, 2.0, 5);
    let reg = registry();
    let mut rng = rng_from(2);
    let probes = Array2::from_shape_fn((200, 5), |_| rng.random_range(-10.0..10.0));
    for kind in TARGET_KINDS {
        let m = reg.fit(kind, &train, 3).unwrap();
        let text = save_classifier(m.as_ref(), train.classes()).unwrap();
        let (loaded, cls) = reg.load(&text).unwrap();
        assert_eq!(loaded.kind(), kind);
        assert_eq!(&cls, train.classes());
        assert_eq!(save_classifier(loaded.as_ref(), &cls).unwrap(), text, "{kind} re-save differs");
        for x in probes.outer_iter() {
            let (a, b) = (m.predict_scores(x).unwrap(), loaded.predict_scores(x).unwrap());
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()), "{kind}");
        }
    }
}

#[test]
fn load_rejects_foreign_and_future_files() {
    let reg = registry();
    assert!(reg.load("{\"format\":\"x\"}").is_err());
    let train = blobs(3, 2, 10, 1.0, 5);
    let text = save_classifier(reg.fit("knn", &train, 0).unwrap().as_ref(), train.classes()).unwrap();
    let future = text.replace("\"version\":1", "\"version\":99");
    assert!(matches!(reg.load(&future), Err(Error::Serialization(_))));
}

#[test]
fn schema_mismatch_is_a_validation_error() {
    let train = blobs(3, 4, 10, 1.0, 5);
    for kind in TARGET_KINDS {
        let m = registry().fit(kind, &train, 0).unwrap();
        assert!(matches!(m.predict(Array1::zeros(3).view()), Err(Error::Validation(_))));
        assert!(matches!(m.predict_scores(Array1::zeros(5).view()), Err(Error::Validation(_))));
    }
}

#[test]
fn single_class_training_is_degenerate() {
    let ds = dataset(array![[0.0], [1.0], [2.0]], &[1, 1, 1], 3);
    for kind in TARGET_KINDS {
        assert!(matches!(registry().fit(kind, &ds, 0), Err(Error::DegenerateTraining(_))), "{kind}");
    }
}

#[test]
fn invalid_hyperparameters_are_rejected() {
    for bad in [
        Hyperparams { knn_k: 0, ..Hyperparams::default() },
        Hyperparams { tree_max_depth: Some(0), ..Hyperparams::default() },
        Hyperparams { forest_trees: 0, ..Hyperparams::default() },
        Hyperparams { svm_lambda: 0.0, ..Hyperparams::default() },
        Hyperparams { mlp_hidden: vec![], ..Hyperparams::default() },
    ] {
        assert!(matches!(Registry::with_defaults(&bad), Err(Error::Validation(_))));
    }
}

/// Strictly increasing transform applied to one feature of both train and probe data.
fn cube_plus(v: f64) -> f64 {
    v * v * v + 3.0 * v
}

#[test]
fn trees_and_forests_ignore_monotone_feature_transforms() {
    let mut rng = rng_from(31);
    for trial in 0..10 {
        let x = Array2::from_shape_fn((30, 3), |_| (rng.random_range(-2.0f64..2.0) * 4.0).round() / 4.0);
        let y: Vec<usize> = (0..30).map(|_| rng.random_range(0..3)).collect();
        let feature = trial % 3;
        let mut xt = x.clone();
        xt.column_mut(feature).mapv_inplace(cube_plus);
        // Transformed values can leave the ±10 schema box; widen it.
        let wide = Arc::new(
            camolab_core::FeatureSchema::new(
                (0..3).map(|i| camolab_core::FeatureSpec::new(format!("f{i}"), "u", -100.0, 100.0, true)).collect(),
            )
            .unwrap(),
        );
        let labels: Vec<DeviceClass> = y.iter().map(|&c| DeviceClass(c)).collect();
        let a = Dataset::new(wide.clone(), classes(3), x.clone(), labels.clone()).unwrap();
        let b = Dataset::new(wide, classes(3), xt.clone(), labels).unwrap();
        for kind in ["decision_tree", "random_forest"] {
            let ma = registry().fit(kind, &a, 9).unwrap();
            let mb = registry().fit(kind, &b, 9).unwrap();
            // Probe on the grid of observed values (every cell between thresholds).
            for row in x.outer_iter() {
                let mut rt = row.to_owned();
                rt[feature] = cube_plus(rt[feature]);
                assert_eq!(ma.predict(row).unwrap(), mb.predict(rt.view()).unwrap(), "{kind} trial {trial}");
            }
        }
    }
}
