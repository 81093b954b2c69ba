#![allow(dead_code)]

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use unfoldcp::gnn::{forward, loss_and_grads, Architecture, ModelConfig, ModelParams, PreparedGraph, TrainingMask};
use unfoldcp::rng;
use unfoldcp::sparse::CscMatrix;
use unfoldcp::{Features, Representation, RepresentationKind, Role, RowLayout};

pub fn random_symmetric(n: usize, density: f64, weighted: bool, seed: u64) -> CscMatrix {
    let mut r = rng::stream(seed, 7);
    let mut trip = Vec::new();
    for i in 0..n {
        for j in i..n {
            if r.random::<f64>() < density {
                let w = if weighted { r.random_range(0.5..2.0) } else { 1.0 };
                trip.push((i, j, w));
                if i != j {
                    trip.push((j, i, w));
                }
            }
        }
    }
    CscMatrix::from_triplets(n, n, trip).unwrap()
}

pub fn flat_rep(matrix: CscMatrix, features: Features) -> Representation {
    let n = matrix.nrows();
    Representation {
        matrix,
        features,
        layout: RowLayout {
            kind: RepresentationKind::BlockDiagonal,
            p: n,
            n,
            num_times: 1,
        },
        symmetrized: false,
    }
}

pub fn eval_config(arch: Architecture) -> ModelConfig {
    ModelConfig {
        architecture: arch,
        hidden_dim: 5,
        dropout: 0.0,
        ..ModelConfig::default()
    }
}

/// Compares analytic gradients with central differences (rel. err 1e-3).
pub fn check_gradients(arch: Architecture, n: usize, dense: Option<usize>, layers: usize, seed: u64) -> Result<(), String> {
    let matrix = random_symmetric(n, 0.25, true, seed);
    let features = match dense {
        None => Features::Identity(n),
        Some(c) => {
            let mut r = rng::stream(seed, 3);
            Features::Dense(Array2::from_shape_simple_fn((n, c), || r.random_range(-1.0..1.0)))
        }
    };
    let rep = flat_rep(matrix, features);
    let config = ModelConfig {
        layers,
        weight_decay: 0.01,
        ..eval_config(arch)
    };
    let graph = PreparedGraph::new(&rep, &config).unwrap();
    let classes = 3;
    let mut r = rng::stream(seed, 0);
    let params = ModelParams::init(arch, &graph.layer_dims(&config, classes), seed, &mut r);
    let rows: Vec<usize> = (0..n).step_by(2).collect();
    let labels: Vec<usize> = rows.iter().map(|&i| i % classes).collect();
    let mask = TrainingMask::from_rows(rows, labels, Role::Training).unwrap();

    let loss_at = |p: &ModelParams| loss_and_grads(p, &graph, &mask, &config, None).unwrap().0;
    let (_, grads) = loss_and_grads(&params, &graph, &mask, &config, None).unwrap();
    let analytic: Vec<f64> = grads.slices().concat();
    let total = params.num_values();
    let mut kinks = 0;
    for idx in 0..total {
        let shifted = |h: f64| {
            let mut p = params.clone();
            set_flat(&mut p, idx, h);
            loss_at(&p)
        };
        let a = analytic[idx];
        let close = |numeric: f64| (a - numeric).abs() <= 1e-3 * a.abs().max(numeric.abs()) + 1e-7;
        let h = 1e-6;
        let (lp, lm) = (shifted(h), shifted(-h));
        if close((lp - lm) / (2.0 * h)) {
            continue;
        }
        // A ReLU or LeakyReLU kink inside [-h, h] spoils the coarse
        // difference; a smooth loss would already agree at this step, so
        // the entry is rechecked at a step too small to reach the kink.
        let fine = 1e-8;
        if !close((shifted(fine) - shifted(-fine)) / (2.0 * fine)) {
            return Err(format!(
                "{arch:?} parameter {idx}: analytic {a} vs numeric {}",
                (lp - lm) / (2.0 * h)
            ));
        }
        kinks += 1;
    }
    if kinks > (total / 50).max(2) {
        return Err(format!("{kinks} of {total} entries sit on kinks"));
    }
    Ok(())
}

pub fn set_flat(params: &mut ModelParams, mut idx: usize, delta: f64) {
    for s in params.slices_mut() {
        if idx < s.len() {
            s[idx] += delta;
            return;
        }
        idx -= s.len();
    }
    panic!("index out of range");
}


/// Largest logit difference between a graph and its relabeled copy.
pub fn equivariance_gap(arch: Architecture, seed: u64) -> f64 {
    let n = 15 + seed as usize;
    let a = random_symmetric(n, 0.3, true, seed);
    let mut r = rng::stream(seed, 11);
    let x = Array2::from_shape_simple_fn((n, 4), || r.random_range(-1.0..1.0));
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut r);
    // perm[old] = new
    let pa = a.permute_symmetric(&perm).unwrap();
    let mut px = Array2::zeros(x.raw_dim());
    for old in 0..n {
        px.row_mut(perm[old]).assign(&x.row(old));
    }
    let config = eval_config(arch);
    let g = PreparedGraph::new(&flat_rep(a, Features::Dense(x)), &config).unwrap();
    let pg = PreparedGraph::new(&flat_rep(pa, Features::Dense(px)), &config).unwrap();
    let params = ModelParams::init(arch, &g.layer_dims(&config, 3), seed, &mut rng::stream(seed, 0));
    let z = forward(&params, &g).unwrap();
    let pz = forward(&params, &pg).unwrap();
    let mut gap = 0.0f64;
    for old in 0..n {
        for c in 0..3 {
            gap = gap.max((z[[old, c]] - pz[[perm[old], c]]).abs());
        }
    }
    gap
}
