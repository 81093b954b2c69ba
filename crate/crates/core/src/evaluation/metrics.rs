use serde::{Deserialize, Serialize};

/// Test-point tallies for one time window of one instance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowCounts {
    pub points: usize,
    pub correct: usize,
    pub covered: usize,
    pub set_size_total: usize,
}

impl WindowCounts {
    pub fn add(&mut self, other: &WindowCounts) {
        self.points += other.points;
        self.correct += other.correct;
        self.covered += other.covered;
        self.set_size_total += other.set_size_total;
    }

    pub fn accuracy(&self) -> Option<f64> {
        self.ratio(self.correct)
    }

    pub fn coverage(&self) -> Option<f64> {
        self.ratio(self.covered)
    }

    pub fn set_size(&self) -> Option<f64> {
        self.ratio(self.set_size_total)
    }

    fn ratio(&self, x: usize) -> Option<f64> {
        (self.points > 0).then(|| x as f64 / self.points as f64)
    }
}

/// One conformal instance: a trained model and one calibration/test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub fit: usize,
    pub permutation: usize,
    pub seed: u64,
    pub q_hat: f64,
    /// Tallies per time index (length `T`).
    pub windows: Vec<WindowCounts>,
}

impl InstanceResult {
    pub fn totals(&self) -> WindowCounts {
        let mut t = WindowCounts::default();
        for w in &self.windows {
            t.add(w);
        }
        t
    }

    pub fn accuracy(&self) -> f64 {
        self.totals().accuracy().unwrap_or(f64::NAN)
    }

    pub fn coverage(&self) -> f64 {
        self.totals().coverage().unwrap_or(f64::NAN)
    }

    pub fn set_size(&self) -> f64 {
        self.totals().set_size().unwrap_or(f64::NAN)
    }

    /// Worst coverage over windows that hold test points.
    pub fn time_conditional_coverage(&self) -> f64 {
        self.windows
            .iter()
            .filter_map(WindowCounts::coverage)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub sd: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                sd: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, sd, count: n }
    }
}

/// Metrics for one time window across instances. Absent when no instance
/// had test points there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub time: usize,
    pub accuracy: Option<Summary>,
    pub coverage: Option<Summary>,
    pub set_size: Option<Summary>,
    pub test_points: usize,
}

/// Per-window series over a set of instances.
pub fn per_time_breakdown(instances: &[InstanceResult]) -> Vec<TimePoint> {
    let num_times = instances.iter().map(|i| i.windows.len()).max().unwrap_or(0);
    (0..num_times)
        .map(|t| {
            let cells: Vec<&WindowCounts> = instances
                .iter()
                .filter_map(|i| i.windows.get(t))
                .filter(|w| w.points > 0)
                .collect();
            let collect = |f: fn(&WindowCounts) -> Option<f64>| {
                let v: Vec<f64> = cells.iter().filter_map(|w| f(w)).collect();
                (!v.is_empty()).then(|| Summary::of(&v))
            };
            TimePoint {
                time: t,
                accuracy: collect(WindowCounts::accuracy),
                coverage: collect(WindowCounts::coverage),
                set_size: collect(WindowCounts::set_size),
                test_points: cells.iter().map(|w| w.points).sum(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub regime: String,
    pub accuracy: Summary,
    pub coverage: Summary,
    pub set_size: Summary,
    /// Mean and sd over instances of the worst per-window coverage.
    pub time_conditional_coverage: Summary,
    /// Coverage averaged within each fit, then summarized across fits.
    pub coverage_across_fits: Summary,
    pub per_time: Vec<TimePoint>,
    pub instances: usize,
    pub skipped: usize,
}

impl MetricsReport {
    pub fn from_instances(method: &str, regime: &str, instances: &[InstanceResult], skipped: usize) -> Self {
        let pick = |f: fn(&InstanceResult) -> f64| Summary::of(&instances.iter().map(f).collect::<Vec<_>>());
        let mut fits: Vec<usize> = instances.iter().map(|i| i.fit).collect();
        fits.dedup();
        let per_fit: Vec<f64> = fits
            .iter()
            .map(|&f| {
                let v: Vec<f64> = instances.iter().filter(|i| i.fit == f).map(InstanceResult::coverage).collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect();
        Self {
            method: method.into(),
            regime: regime.into(),
            accuracy: pick(InstanceResult::accuracy),
            coverage: pick(InstanceResult::coverage),
            set_size: pick(InstanceResult::set_size),
            time_conditional_coverage: pick(InstanceResult::time_conditional_coverage),
            coverage_across_fits: Summary::of(&per_fit),
            per_time: per_time_breakdown(instances),
            instances: instances.len(),
            skipped,
        }
    }

    /// `(metric name, summary)` rows in output order.
    pub fn rows(&self) -> Vec<(&'static str, Summary)> {
        vec![
            ("accuracy", self.accuracy),
            ("coverage", self.coverage),
            ("set_size", self.set_size),
            ("time_conditional_coverage", self.time_conditional_coverage),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(windows: Vec<(usize, usize, usize, usize)>) -> InstanceResult {
        InstanceResult {
            fit: 0,
            permutation: 0,
            seed: 0,
            q_hat: 0.5,
            windows: windows
                .into_iter()
                .map(|(points, correct, covered, set_size_total)| WindowCounts {
                    points,
                    correct,
                    covered,
                    set_size_total,
                })
                .collect(),
        }
    }

    #[test]
    fn single_window_matches_marginal() {
        let i = instance(vec![(10, 7, 9, 13)]);
        let series = per_time_breakdown(std::slice::from_ref(&i));
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].coverage.unwrap().mean, i.coverage());
        assert_eq!(series[0].accuracy.unwrap().mean, i.accuracy());
        assert_eq!(i.time_conditional_coverage(), 0.9);
    }

    #[test]
    fn empty_windows_are_absent() {
        let i = instance(vec![(4, 4, 4, 4), (0, 0, 0, 0), (5, 1, 3, 9)]);
        let series = per_time_breakdown(&[i.clone()]);
        assert!(series[1].coverage.is_none());
        assert_eq!(i.time_conditional_coverage(), 0.6);
        // Marginal coverage is the test-count-weighted mean of window coverages.
        let weighted = (4.0 * 1.0 + 5.0 * 0.6) / 9.0;
        assert!((i.coverage() - weighted).abs() < 1e-15);
    }

    #[test]
    fn summary_sd() {
        let s = Summary::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, 1.0);
        assert_eq!(Summary::of(&[4.0]).sd, 0.0);
    }
}
