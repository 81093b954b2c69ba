//! Role assignment under the three data regimes.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeTimeIndex, NodeTimePair, Role};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Labels missing completely at random across all times.
    Transductive,
    /// Train/validate before the cutoff, calibrate/test at random after it.
    TemporalTransductive,
    /// Train/validate/calibrate before the cutoff, test everything after it.
    SemiInductive,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Transductive => "transductive",
            Regime::TemporalTransductive => "temporal_transductive",
            Regime::SemiInductive => "semi_inductive",
        }
    }

    pub fn is_temporal(self) -> bool {
        !matches!(self, Regime::Transductive)
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "transductive" => Ok(Regime::Transductive),
            "temporal_transductive" => Ok(Regime::TemporalTransductive),
            "semi_inductive" => Ok(Regime::SemiInductive),
            other => Err(Error::config("regime.regime", format!("unknown regime '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeSpec {
    pub regime: Regime,
    /// Train, validation, calibration and test shares.
    pub ratios: [f64; 4],
    pub n_fits: usize,
    pub n_permutations: usize,
    pub n_splits_semi_inductive: usize,
    pub alpha: f64,
    /// Largest tolerated share of skipped (diverged) instances.
    pub max_skip_fraction: f64,
    pub seed: u64,
}

impl Default for RegimeSpec {
    fn default() -> Self {
        Self {
            regime: Regime::Transductive,
            ratios: [0.20, 0.10, 0.35, 0.35],
            n_fits: 10,
            n_permutations: 100,
            n_splits_semi_inductive: 50,
            alpha: 0.1,
            max_skip_fraction: 0.05,
            seed: 0,
        }
    }
}

impl RegimeSpec {
    pub fn new(regime: Regime) -> Self {
        Self {
            regime,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::config("regime.ratios", "every ratio must be positive"));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config("regime.ratios", format!("ratios sum to {sum}, not 1")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("regime.alpha", "must lie in (0, 1)"));
        }
        if self.n_fits == 0 {
            return Err(Error::config("regime.n_fits", "must be positive"));
        }
        if self.n_permutations == 0 {
            return Err(Error::config("regime.n_permutations", "must be positive"));
        }
        if self.n_splits_semi_inductive == 0 {
            return Err(Error::config("regime.n_splits_semi_inductive", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.max_skip_fraction) {
            return Err(Error::config("regime.max_skip_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// First time point of the test block: `T − ⌈test_ratio · T⌉`.
    pub fn tau(&self, num_times: usize) -> Result<usize> {
        let test_times = (self.ratios[3] * num_times as f64 - 1e-9).ceil() as usize;
        let tau = num_times.saturating_sub(test_times);
        if tau < 1 || tau >= num_times {
            return Err(Error::config(
                "regime.ratios",
                format!("test ratio {} leaves no usable cutoff for T = {num_times}", self.ratios[3]),
            ));
        }
        Ok(tau)
    }

    /// Independent model fits in one experiment.
    pub fn fits(&self) -> usize {
        match self.regime {
            Regime::SemiInductive => self.n_splits_semi_inductive,
            _ => self.n_fits,
        }
    }

    /// Conformal instances per fit.
    pub fn permutations(&self) -> usize {
        match self.regime {
            Regime::SemiInductive => 1,
            _ => self.n_permutations,
        }
    }
}

/// Largest-remainder rounding of `total · weights`.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| (x + 1e-9).floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - counts[a] as f64;
        let fb = exact[b] - counts[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn assign(pairs: &mut [NodeTimePair], roles: &[Role], weights: &[f64], rng: &mut rng::Rng) -> Vec<(NodeTimePair, Role)> {
    pairs.shuffle(rng);
    let counts = apportion(pairs.len(), weights);
    let mut out = Vec::with_capacity(pairs.len());
    let mut at = 0;
    for (&role, &c) in roles.iter().zip(&counts) {
        out.extend(pairs[at..at + c].iter().map(|&p| (p, role)));
        at += c;
    }
    out
}

const ROLES: [Role; 4] = [Role::Training, Role::Validation, Role::Calibration, Role::Test];

/// Assigns roles to `pairs` under `spec` with the generator keyed by `seed`.
pub fn sample_split(pairs: &[NodeTimePair], spec: &RegimeSpec, num_times: usize, seed: u64) -> Result<NodeTimeIndex> {
    spec.validate()?;
    let mut rng = rng::stream(seed, 0);
    let r = spec.ratios;
    let entries = match spec.regime {
        Regime::Transductive => assign(&mut pairs.to_vec(), &ROLES, &r, &mut rng),
        Regime::SemiInductive => {
            let tau = spec.tau(num_times)?;
            let (mut before, after): (Vec<_>, Vec<_>) = pairs.iter().partition(|p| p.time < tau);
            let mut e = assign(&mut before, &ROLES[..3], &r[..3], &mut rng);
            e.extend(after.into_iter().map(|p| (p, Role::Test)));
            e
        }
        Regime::TemporalTransductive => {
            let tau = spec.tau(num_times)?;
            let (mut before, mut after): (Vec<_>, Vec<_>) = pairs.iter().partition(|p| p.time < tau);
            let mut e = assign(&mut before, &ROLES[..2], &r[..2], &mut rng);
            e.extend(assign(&mut after, &ROLES[2..], &r[2..], &mut rng));
            e
        }
    };
    let index = NodeTimeIndex::new(entries)?;
    let c = index.counts();
    for (role, n) in [
        (Role::Training, c.training),
        (Role::Validation, c.validation),
        (Role::Calibration, c.calibration),
        (Role::Test, c.test),
    ] {
        if n == 0 {
            return Err(Error::InvalidIndex(format!(
                "the {} split leaves no {role:?} pairs",
                spec.regime.label()
            )));
        }
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t: usize) -> Vec<NodeTimePair> {
        (0..t).flat_map(|t| (0..n).map(move |i| NodeTimePair::new(i, t))).collect()
    }

    #[test]
    fn tau_rounds_the_test_block_up() {
        let spec = RegimeSpec::new(Regime::SemiInductive);
        assert_eq!(spec.tau(8).unwrap(), 5);
        assert_eq!(spec.tau(18).unwrap(), 11);
        assert!(spec.tau(1).is_err());
    }

    #[test]
    fn transductive_quarters() {
        let spec = RegimeSpec {
            ratios: [0.25; 4],
            ..RegimeSpec::default()
        };
        let idx = sample_split(&grid(10, 10), &spec, 10, 3).unwrap();
        let c = idx.counts();
        for n in [c.training, c.validation, c.calibration, c.test] {
            assert!((24..=26).contains(&n));
        }
        assert_eq!(idx.m(), c.calibration + c.test);
    }

    #[test]
    fn semi_inductive_blocks() {
        let spec = RegimeSpec::new(Regime::SemiInductive);
        let idx = sample_split(&grid(20, 8), &spec, 8, 1).unwrap();
        for (p, r) in idx.iter() {
            assert_eq!(r == Role::Test, p.time >= 5);
        }
    }

    #[test]
    fn temporal_transductive_blocks() {
        let spec = RegimeSpec::new(Regime::TemporalTransductive);
        let idx = sample_split(&grid(20, 8), &spec, 8, 1).unwrap();
        for (p, r) in idx.iter() {
            assert_eq!(r.is_conformal(), p.time >= 5);
        }
        let c = idx.counts();
        assert_eq!(c.calibration, 30);
        assert_eq!(c.test, 30);
    }

    #[test]
    fn empty_roles_rejected() {
        let spec = RegimeSpec::default();
        assert!(sample_split(&grid(1, 2), &spec, 2, 0).is_err());
        let bad = RegimeSpec {
            ratios: [0.5, 0.5, 0.5, 0.5],
            ..RegimeSpec::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn apportion_sums() {
        assert_eq!(apportion(10, &[0.2, 0.1, 0.35, 0.35]), vec![2, 1, 4, 3]);
        assert_eq!(apportion(7, &[1.0, 1.0]).iter().sum::<usize>(), 7);
    }
}
