//! Two-sample energy-distance permutation test.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationTest {
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

impl PermutationTest {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value <= level
    }
}

fn pairwise(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Vec<f64> {
    let rows: Vec<_> = x.rows().into_iter().chain(y.rows()).collect();
    let n = rows.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rows[i].iter().zip(rows[j].iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// `2·E|X−Y| − E|X−X'| − E|Y−Y'|` for the split of the pooled sample
/// where `in_x[k]` marks rows of the first group.
fn statistic(dist: &[f64], in_x: &[bool], nx: usize) -> f64 {
    let n = in_x.len();
    let ny = n - nx;
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let row = &dist[i * n..(i + 1) * n];
        for j in i + 1..n {
            match (in_x[i], in_x[j]) {
                (true, true) => xx += row[j],
                (false, false) => yy += row[j],
                _ => xy += row[j],
            }
        }
    }
    // Within-group sums above count each unordered pair once.
    2.0 * xy / (nx * ny) as f64 - 2.0 * xx / (nx * nx) as f64 - 2.0 * yy / (ny * ny) as f64
}

/// Energy distance between the row samples `x` and `y`.
pub fn energy_distance(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
    check(x, y)?;
    let dist = pairwise(x, y);
    let in_x: Vec<bool> = (0..x.nrows() + y.nrows()).map(|k| k < x.nrows()).collect();
    Ok(statistic(&dist, &in_x, x.nrows()))
}

fn check(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<()> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::Empty("energy distance sample"));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "samples have {} and {} columns",
            x.ncols(),
            y.ncols()
        )));
    }
    Ok(())
}

/// Permutation test of equal distributions. The p-value is
/// `(1 + #{permuted ≥ observed}) / (1 + permutations)`.
pub fn energy_test(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, permutations: usize, seed: u64) -> Result<PermutationTest> {
    check(x, y)?;
    let dist = pairwise(x, y);
    let nx = x.nrows();
    let mut in_x: Vec<bool> = (0..nx + y.nrows()).map(|k| k < nx).collect();
    let observed = statistic(&dist, &in_x, nx);
    let mut rng = rng::stream(seed, 0);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        in_x.shuffle(&mut rng);
        if statistic(&dist, &in_x, nx) >= observed - 1e-12 * observed.abs() {
            exceed += 1;
        }
    }
    Ok(PermutationTest {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
        permutations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_dimensional_hand_value() {
        // X = {0, 1}, Y = {3}: E|X−Y| = 2.5, E|X−X'| = 0.5, E|Y−Y'| = 0.
        let x = array![[0.0], [1.0]];
        let y = array![[3.0]];
        assert!((energy_distance(x.view(), y.view()).unwrap() - 4.5).abs() < 1e-12);
        assert_eq!(energy_distance(x.view(), x.view()).unwrap(), 0.0);
    }

    #[test]
    fn separated_samples_reject() {
        let x = ndarray::Array2::from_shape_fn((30, 2), |(i, j)| (i * 7 + j) as f64 % 5.0);
        let y = x.mapv(|v| v + 10.0);
        let t = energy_test(x.view(), y.view(), 199, 1).unwrap();
        assert!(t.rejects(0.01));
        assert_eq!(t.p_value, 1.0 / 200.0);
    }
}
