mod common;

use common::{check_gradients, equivariance_gap, eval_config, flat_rep, random_symmetric};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use unfoldcp::generators::{make_two_block_example, sample_dsbm};
use unfoldcp::gnn::{
    argmax_rows, forward, loss_and_grads, softmax_rows, train, Architecture, ModelConfig, ModelParams, PreparedGraph,
    TrainingMask,
};
use unfoldcp::rng;
use unfoldcp::sparse::CscMatrix;
use unfoldcp::{unfold, Error, Features, NodeTimeIndex, Role};

#[test]
fn gcn_gradients_match_finite_differences() {
    for (seed, n) in [(1, 10), (2, 17), (3, 30)] {
        check_gradients(Architecture::Gcn, n, None, 2, seed).unwrap();
        check_gradients(Architecture::Gcn, n, Some(4), 2, seed + 100).unwrap();
    }
    check_gradients(Architecture::Gcn, 12, Some(3), 3, 9).unwrap();
}

#[test]
fn gat_gradients_match_finite_differences() {
    for (seed, n) in [(4, 10), (5, 17), (6, 30)] {
        check_gradients(Architecture::Gat, n, None, 2, seed).unwrap();
        check_gradients(Architecture::Gat, n, Some(4), 2, seed + 100).unwrap();
    }
    check_gradients(Architecture::Gat, 12, Some(3), 3, 10).unwrap();
}

#[test]
fn forward_is_permutation_equivariant() {
    for arch in [Architecture::Gcn, Architecture::Gat] {
        for seed in 0..5u64 {
            let gap = equivariance_gap(arch, seed);
            assert!(gap <= 1e-5, "{arch:?} seed {seed}: {gap}");
        }
    }
}

#[test]
fn zero_weights_give_uniform_softmax() {
    let rep = flat_rep(random_symmetric(8, 0.4, false, 1), Features::Identity(8));
    for arch in [Architecture::Gcn, Architecture::Gat] {
        let config = eval_config(arch);
        let g = PreparedGraph::new(&rep, &config).unwrap();
        let mut params = ModelParams::init(arch, &g.layer_dims(&config, 4), 0, &mut rng::stream(0, 0));
        for s in params.slices_mut() {
            s.fill(0.0);
        }
        let z = forward(&params, &g).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let p = softmax_rows(&z);
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));

        let mask = TrainingMask::from_rows(vec![0, 3], vec![1, 2], Role::Training).unwrap();
        let (loss, _) = loss_and_grads(&params, &g, &mask, &config, None).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn single_node_chain_by_hand() {
    // Â = [1] for one isolated node, so logits = ReLU(W0 + b0) W1 + b1.
    let rep = flat_rep(CscMatrix::zeros(1, 1), Features::Identity(1));
    let config = eval_config(Architecture::Gcn);
    let g = PreparedGraph::new(&rep, &config).unwrap();
    let mut params = ModelParams::init(Architecture::Gcn, &[1, 2, 2], 0, &mut rng::stream(0, 0));
    params.layers[0].weight = Array2::from_shape_vec((1, 2), vec![0.5, -1.0]).unwrap();
    params.layers[0].bias = Array1::from(vec![0.25, 0.0]);
    params.layers[1].weight = Array2::from_shape_vec((2, 2), vec![2.0, 1.0, 3.0, -1.0]).unwrap();
    params.layers[1].bias = Array1::from(vec![0.0, 0.5]);
    let z = forward(&params, &g).unwrap();
    // hidden = ReLU([0.75, -1.0]) = [0.75, 0]
    assert!((z[[0, 0]] - 1.5).abs() < 1e-15);
    assert!((z[[0, 1]] - 1.25).abs() < 1e-15);
}

#[test]
fn duplicated_mask_keeps_mean_loss() {
    let rep = flat_rep(random_symmetric(12, 0.3, false, 4), Features::Identity(12));
    let config = eval_config(Architecture::Gcn);
    let g = PreparedGraph::new(&rep, &config).unwrap();
    let params = ModelParams::init(Architecture::Gcn, &g.layer_dims(&config, 3), 1, &mut rng::stream(1, 0));
    let mask = TrainingMask::from_rows(vec![0, 2, 5, 7], vec![0, 1, 2, 0], Role::Training).unwrap();
    let (a, ga) = loss_and_grads(&params, &g, &mask, &config, None).unwrap();
    let (b, gb) = loss_and_grads(&params, &g, &mask.repeated(2), &config, None).unwrap();
    assert!((a - b).abs() < 1e-12);
    for (x, y) in ga.slices().concat().iter().zip(gb.slices().concat()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn eval_mode_is_deterministic_and_rows_are_simplices() {
    let rep = flat_rep(random_symmetric(20, 0.2, false, 9), Features::Identity(20));
    for arch in [Architecture::Gcn, Architecture::Gat] {
        let config = ModelConfig {
            architecture: arch,
            ..ModelConfig::default()
        };
        let g = PreparedGraph::new(&rep, &config).unwrap();
        let params = ModelParams::init(arch, &g.layer_dims(&config, 3), 2, &mut rng::stream(2, 0));
        let a = forward(&params, &g).unwrap();
        let b = forward(&params, &g).unwrap();
        assert_eq!(a, b);
        for row in softmax_rows(&a).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn masks_refuse_conformal_roles() {
    let (graph, labels) = sample_dsbm(&make_two_block_example(0)).unwrap();
    let rep = unfold(&graph);
    let pairs: Vec<_> = labels.labeled_pairs().map(|(p, _)| p).collect();
    let roles = [Role::Training, Role::Validation, Role::Calibration, Role::Test];
    let index = NodeTimeIndex::new(pairs.iter().enumerate().map(|(k, &p)| (p, roles[k % 4])).collect()).unwrap();
    for role in [Role::Calibration, Role::Test] {
        assert!(matches!(
            TrainingMask::from_index(&index, &labels, &rep.layout, role),
            Err(Error::RoleViolation(r)) if r == role
        ));
        assert!(matches!(TrainingMask::from_rows(vec![0], vec![0], role), Err(Error::RoleViolation(_))));
    }
    let mask = TrainingMask::from_index(&index, &labels, &rep.layout, Role::Training).unwrap();
    assert_eq!(mask.len(), pairs.len() / 4);
}

fn two_block_fit(arch: Architecture, seed: u64) -> (f64, unfoldcp::gnn::TrainOutcome, f64) {
    let (graph, labels) = sample_dsbm(&make_two_block_example(seed)).unwrap();
    let rep = unfold(&graph);
    let mut pairs: Vec<_> = labels.labeled_pairs().map(|(p, _)| p).collect();
    pairs.shuffle(&mut rng::stream(seed, 99));
    let roles = [Role::Training, Role::Training, Role::Validation, Role::Test];
    let index = NodeTimeIndex::new(pairs.iter().enumerate().map(|(k, &p)| (p, roles[k % 4])).collect()).unwrap();
    let config = match arch {
        Architecture::Gcn => ModelConfig::gcn(),
        Architecture::Gat => ModelConfig::gat(),
    }
    .with_seed(seed);
    let out = train(&rep, &labels, &index, &config).unwrap();
    let pred = argmax_rows(&out.logits);
    let acc = |role: Role| {
        let ps: Vec<_> = index.with_role(role).collect();
        ps.iter()
            .filter(|&&p| pred[rep.layout.row_of(p)] == labels.get(p).unwrap())
            .count() as f64
            / ps.len() as f64
    };
    (acc(Role::Training), out, acc(Role::Test))
}

#[test]
fn two_block_training_separates_communities() {
    for arch in [Architecture::Gcn, Architecture::Gat] {
        let (train_acc, out, test_acc) = two_block_fit(arch, 3);
        assert!(train_acc > 0.9, "{arch:?} training accuracy {train_acc}");
        assert!(test_acc > 0.8, "{arch:?} test accuracy {test_acc}");
        assert!(out.best_epoch >= 1 && out.epochs_run <= 200);
    }
}

#[test]
fn training_is_seed_deterministic() {
    let (_, a, _) = two_block_fit(Architecture::Gcn, 5);
    let (_, b, _) = two_block_fit(Architecture::Gcn, 5);
    assert_eq!(a.best_val_loss.to_bits(), b.best_val_loss.to_bits());
    assert_eq!(a.final_train_loss.to_bits(), b.final_train_loss.to_bits());
    assert_eq!(a.logits, b.logits);
    let (_, c, _) = two_block_fit(Architecture::Gcn, 6);
    assert_ne!(a.logits, c.logits);
}

