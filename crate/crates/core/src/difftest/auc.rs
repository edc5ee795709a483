use super::DiffError;

/// Normalized area under the cumulative unique-bugs curve over `[0, T]`.
///
/// The timeline is a list of `(t, bugs found so far)` points; the curve is
/// the right-continuous step function through them and is 0 before the
/// first point. Points after `T` are ignored. Returns 0 when no bug has
/// been found by `T`.
pub fn bugs_over_time_auc(timeline: &[(f64, u64)], horizon: f64) -> Result<f64, DiffError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(DiffError::Timeline(format!("horizon {horizon} must be positive")));
    }
    for w in timeline.windows(2) {
        if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
            return Err(DiffError::Timeline(format!(
                "({}, {}) follows ({}, {})",
                w[1].0, w[1].1, w[0].0, w[0].1
            )));
        }
    }
    if timeline.iter().any(|(t, _)| !t.is_finite() || *t < 0.0) {
        return Err(DiffError::Timeline("times must be finite and non-negative".into()));
    }
    let within: Vec<(f64, u64)> = timeline.iter().copied().filter(|(t, _)| *t <= horizon).collect();
    let total = within.last().map_or(0, |p| p.1);
    if total == 0 {
        return Ok(0.0);
    }
    let mut area = 0.0;
    for (i, &(t, bugs)) in within.iter().enumerate() {
        let until = within.get(i + 1).map_or(horizon, |p| p.0);
        area += (until - t) * bugs as f64;
    }
    Ok((area / (horizon * total as f64)).clamp(0.0, 1.0))
}

/// Decides when periodic snapshots fall due: snapshot `k` (from 1) is due
/// once `k * interval` seconds have elapsed.
#[derive(Clone, Debug)]
pub struct SnapshotClock {
    interval: f64,
    emitted: u64,
}

impl SnapshotClock {
    pub fn new(interval_secs: f64) -> Self {
        assert!(interval_secs > 0.0, "snapshot interval must be positive");
        SnapshotClock {
            interval: interval_secs,
            emitted: 0,
        }
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    /// Indices of the snapshots that became due since the last call.
    pub fn due(&mut self, elapsed_secs: f64) -> std::ops::RangeInclusive<u64> {
        let reached = (elapsed_secs / self.interval).floor().max(0.0) as u64;
        let first = self.emitted + 1;
        self.emitted = self.emitted.max(reached);
        first..=reached
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Nominal time of snapshot `k`.
    pub fn time_of(&self, k: u64) -> f64 {
        k as f64 * self.interval
    }
}
