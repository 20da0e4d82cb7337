//! Shared vocabulary for declared blow-up. Blow-up is a reported outcome of a
//! run, never an `Err`: drivers stop, flag the state and return partial data.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupReason {
    /// A sample or a right-hand side stopped being finite.
    NonFinite,
    /// inf_x of the advection slope crossed below the declaration threshold.
    MonitorThreshold,
    /// sup |m| exceeded its initial value by the configured factor.
    AmplitudeGrowth,
    /// Adjacent characteristics got closer than the spacing threshold
    /// (or crossed outright).
    SpacingCollapse,
    /// A fixed-dt run stopped satisfying its advection CFL bound mid-run;
    /// with dt sized from the conserved-mass speed bound this only happens
    /// once conservation has already broken down.
    AdvectionGrowth,
}

#[derive(Debug, Clone, Copy)]
pub struct BlowupEvent<T> {
    pub time: T,
    pub reason: BlowupReason,
    /// The quantity that crossed its threshold, for reporting.
    pub value: T,
}

/// Declaration thresholds. `monitor_report` is not a declaration level; it
/// marks the first time the monitor drops below the reporting level so that
/// runs can show the monitor diverging before the declaration fires.
#[derive(Debug, Clone, Copy)]
pub struct BlowupThresholds<T> {
    pub monitor: T,
    pub monitor_report: T,
    pub amplitude_factor: T,
    pub spacing_ratio: T,
}

impl<T: Scalar> Default for BlowupThresholds<T> {
    fn default() -> Self {
        BlowupThresholds {
            monitor: T::lit(1e6),
            monitor_report: T::lit(1e4),
            amplitude_factor: T::lit(1e6),
            spacing_ratio: T::lit(1e-6),
        }
    }
}

/// What a driver hands back: snapshots along the way, the last healthy
/// state, and either a clean finish (`outcome == None`) or a declaration.
#[derive(Debug, Clone)]
pub struct RunRecord<S, T> {
    pub snapshots: Vec<S>,
    pub final_state: Option<S>,
    pub outcome: Option<BlowupEvent<T>>,
    /// First time the monitor crossed below `monitor_report`, if ever.
    pub first_report_crossing: Option<T>,
    /// Running minimum of the advection-slope monitor over the run.
    pub min_monitor: T,
    pub steps: usize,
    last_snapshot_step: usize,
}

impl<S: Clone, T: Scalar> RunRecord<S, T> {
    pub fn new(initial: S) -> Self {
        RunRecord {
            snapshots: vec![initial],
            final_state: None,
            outcome: None,
            first_report_crossing: None,
            min_monitor: T::infinity(),
            steps: 0,
            last_snapshot_step: 0,
        }
    }

    pub fn declare(&mut self, event: BlowupEvent<T>) {
        if self.outcome.is_none() {
            self.outcome = Some(event);
        }
    }

    pub fn observe_monitor(&mut self, time: T, value: T, thresholds: &BlowupThresholds<T>) {
        self.min_monitor = self.min_monitor.min(value);
        if self.first_report_crossing.is_none() && value <= -thresholds.monitor_report {
            self.first_report_crossing = Some(time);
        }
    }

    /// Record a snapshot every `every` steps, or unconditionally if `force`
    /// and the state is not already the latest snapshot step.
    pub fn maybe_snapshot(&mut self, state: &S, steps: usize, every: usize, force: bool) {
        let due = steps % every.max(1) == 0;
        if (due || force) && steps > self.last_snapshot_step {
            self.snapshots.push(state.clone());
            self.last_snapshot_step = steps;
        }
    }

    pub fn close(&mut self, state: S, steps: usize) {
        self.steps = steps;
        self.final_state = Some(state);
    }

    pub fn blew_up(&self) -> bool {
        self.outcome.is_some()
    }
}
