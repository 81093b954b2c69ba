use unfoldcp::generators::{
    make_iid_sbm, make_paper_sbm, make_two_block_example, make_two_block_with_nodes, sample_dsbm, DsbmSpec,
};
use unfoldcp::sparse::CscMatrix;

/// Present pairs `i ≤ j`.
fn edge_count(s: &CscMatrix) -> usize {
    let loops = s.triplets().filter(|&(i, j, _)| i == j).count();
    (s.nnz() + loops) / 2
}

/// Mean and variance of the edge count of snapshot `t`, summed pair by pair.
fn analytic_moments(spec: &DsbmSpec, t: usize) -> (f64, f64) {
    let b = &spec.probabilities[t];
    let z = &spec.communities;
    let (mut mean, mut var) = (0.0, 0.0);
    for i in 0..spec.n {
        for j in i..spec.n {
            let p = b[z[i]][z[j]];
            mean += p;
            var += p * (1.0 - p);
        }
    }
    (mean, var)
}

/// Density of each community block, counting pairs `i ≤ j`.
fn block_densities(spec: &DsbmSpec, s: &CscMatrix) -> Vec<Vec<f64>> {
    let k = spec.num_communities;
    let z = &spec.communities;
    let mut hits = vec![vec![0.0; k]; k];
    let mut pairs = vec![vec![0.0; k]; k];
    for i in 0..spec.n {
        for j in i..spec.n {
            let (a, b) = (z[i].min(z[j]), z[i].max(z[j]));
            pairs[a][b] += 1.0;
            if s.get(i, j) != 0.0 {
                hits[a][b] += 1.0;
            }
        }
    }
    (0..k).map(|a| (0..k).map(|b| if a <= b { hits[a][b] / pairs[a][b] } else { 0.0 }).collect()).collect()
}

/// Two-sample Kolmogorov-Smirnov test, asymptotic p-value.
fn ks_test(mut x: Vec<f64>, mut y: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    let mut p = 0.0;
    for k in 1..100 {
        let term = 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

fn degrees(s: &CscMatrix) -> Vec<f64> {
    (0..s.ncols()).map(|j| s.column(j).values.len() as f64).collect()
}

#[test]
fn two_block_edge_count_matches_expectation() {
    let spec = make_two_block_with_nodes(11, 300);
    let (g, _) = sample_dsbm(&spec).unwrap();
    for t in 0..2 {
        let (mean, var) = analytic_moments(&spec, t);
        let count = edge_count(g.snapshot(t)) as f64;
        assert!((count - mean).abs() <= 4.0 * var.sqrt(), "t={t}: {count} vs {mean} ± {}", var.sqrt());
    }
}

#[test]
fn block_densities_track_probabilities() {
    for spec in [make_two_block_with_nodes(2, 300), make_paper_sbm(5)] {
        let (g, _) = sample_dsbm(&spec).unwrap();
        for t in 0..spec.num_times {
            let dens = block_densities(&spec, g.snapshot(t));
            for a in 0..spec.num_communities {
                for b in a..spec.num_communities {
                    let p = spec.probabilities[t][a][b];
                    assert!((dens[a][b] - p).abs() <= 0.02, "t={t} block ({a},{b}): {} vs {p}", dens[a][b]);
                }
            }
        }
    }
}

#[test]
fn iid_snapshots_have_matching_edge_counts() {
    let spec = make_iid_sbm(9, 8).unwrap();
    let (g, labels) = sample_dsbm(&spec).unwrap();
    let (mean, var) = analytic_moments(&spec, 0);
    let counts: Vec<f64> = g.snapshots().iter().map(|s| edge_count(s) as f64).collect();
    for c in &counts {
        assert!((c - mean).abs() <= 4.0 * var.sqrt());
    }
    // Chi-square statistic of the counts around the known mean, 8 dof.
    let chi2: f64 = counts.iter().map(|c| (c - mean).powi(2) / var).sum();
    assert!(chi2 < 26.1, "chi2 = {chi2}");
    assert_eq!(labels.labeled_pairs().count(), 300 * 8);
}

#[test]
fn two_block_snapshots_share_degree_distribution() {
    let mut rejections = 0;
    for seed in 0..20 {
        let (g, _) = sample_dsbm(&make_two_block_example(seed)).unwrap();
        let p = ks_test(degrees(g.snapshot(0)), degrees(g.snapshot(1)));
        rejections += (p < 0.01) as usize;
    }
    assert!(rejections <= 1, "{rejections} of 20 rejected");
}

#[test]
fn sampling_is_deterministic_and_symmetric() {
    let spec = make_paper_sbm(123);
    let (a, la) = sample_dsbm(&spec).unwrap();
    let (b, lb) = sample_dsbm(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    for s in a.snapshots() {
        assert!(s.is_symmetric());
        assert!(s.values().iter().all(|&v| v == 1.0));
    }
    let (c, _) = sample_dsbm(&DsbmSpec { seed: 124, ..spec }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn ks_oracle_sanity() {
    let x: Vec<f64> = (0..200).map(|i| i as f64).collect();
    let y: Vec<f64> = (0..200).map(|i| i as f64 + 100.0).collect();
    assert!(ks_test(x.clone(), y) < 1e-6);
    assert!(ks_test(x.clone(), x) > 0.99);
}
