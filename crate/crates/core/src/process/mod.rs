//! The Markov-process abstraction shared by every model and estimator.
//!
//! A model advances a state event by event ([`ProcessModel::next_event`]);
//! between events the state follows the model's deterministic flow. All
//! trajectory, semigroup and hitting-time machinery is written once on top
//! of that primitive.

mod semigroup;
mod simulate;

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

pub use semigroup::{
    apply_extended_generator, check_supermartingale, evaluate_semigroup, LyapunovCertificate, MonteCarloEstimate,
    SemigroupMode, SupermartingalePoint, SupermartingaleReport,
};
pub use simulate::{advance, first_entry, path_integral, simulate_path, simulate_trajectory, trajectory_entry};

/// A state of a process: a real number or a finite-chain index.
pub trait State: Clone + PartialEq + Debug + Send + Sync + 'static {
    fn in_region(&self, region: &Region) -> bool;
    /// Scalar coordinate used for binning and CSV export.
    fn coordinate(&self) -> f64;
    fn is_finite(&self) -> bool;
    /// Inverse of [`State::coordinate`] for real-valued states.
    fn from_coordinate(_c: f64) -> Option<Self> {
        None
    }
}

impl State for f64 {
    fn in_region(&self, region: &Region) -> bool {
        match region {
            Region::Everything => true,
            Region::Intervals(iv) => iv.iter().any(|&(lo, hi)| *self >= lo && *self <= hi),
            Region::States(_) => false,
        }
    }
    fn coordinate(&self) -> f64 {
        *self
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn from_coordinate(c: f64) -> Option<Self> {
        Some(c)
    }
}

impl State for usize {
    fn in_region(&self, region: &Region) -> bool {
        match region {
            Region::Everything => true,
            Region::States(s) => s.contains(self),
            Region::Intervals(iv) => {
                let x = *self as f64;
                iv.iter().any(|&(lo, hi)| x >= lo && x <= hi)
            }
        }
    }
    fn coordinate(&self) -> f64 {
        *self as f64
    }
    fn is_finite(&self) -> bool {
        true
    }
}

/// A closed target set: a union of closed intervals or a set of chain states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Everything,
    Intervals(Vec<(f64, f64)>),
    States(Vec<usize>),
}

impl Region {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Region::Intervals(vec![(lo, hi)])
    }

    pub fn states(states: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = states.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Region::States(v)
    }
}

/// Result of one call to [`ProcessModel::next_event`].
#[derive(Debug, Clone, PartialEq)]
pub struct Step<S> {
    /// Time elapsed since the previous state.
    pub dt: f64,
    /// State at the end of the step.
    pub state: S,
    /// Whether the step ended with a recorded event (jump or discretization
    /// step). `false` means the state merely followed the flow.
    pub jump: bool,
}

/// A continuous-time Markov dynamic.
pub trait ProcessModel: Send + Sync {
    type State: State;

    fn description(&self) -> String;

    fn state_dim(&self) -> usize {
        1
    }

    /// Advances from `x` up to the next event, or by `max_dt` if no event
    /// happens first.
    fn next_event(&self, x: &Self::State, max_dt: f64, rng: &mut SimRng) -> Result<Step<Self::State>>;

    /// Deterministic motion between events.
    fn flow(&self, x: &Self::State, _elapsed: f64) -> Self::State {
        x.clone()
    }

    /// First `s ∈ [0, duration)` with `flow(x, s)` in `region`.
    fn flow_entry(&self, x: &Self::State, _duration: f64, region: &Region) -> Option<f64> {
        x.in_region(region).then_some(0.0)
    }

    /// Whether consecutive events should be joined by straight lines when
    /// looking for boundary crossings (time-discretized diffusions).
    fn continuous_paths(&self) -> bool {
        false
    }

    /// Exact (possibly gridded) transition law `P_t(x, ·)`.
    fn exact_kernel(&self, _x: &Self::State, _t: f64) -> Option<Vec<(Self::State, f64)>> {
        None
    }

    /// One exact draw from `P_t(x, ·)` without building a path, for models
    /// whose transition law can be sampled directly.
    fn sample_kernel(&self, _x: &Self::State, _t: f64, _rng: &mut SimRng) -> Option<Result<Self::State>> {
        None
    }

    /// `P_t(x, ·)` integrated over the bins `[edges[i], edges[i+1])`, for
    /// continuous models with a closed-form law.
    fn binned_kernel(&self, _x: &Self::State, _t: f64, _edges: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Whether transition laws live on a countable set, so that two laws can
    /// be compared atom by atom.
    fn discrete_state_space(&self) -> bool {
        false
    }

    /// Path from `x` at time 0 conditioned to be at `y` at time `t`, as its
    /// events in `(0, t]`.
    #[allow(clippy::type_complexity)]
    fn sample_bridge(
        &self,
        _x: &Self::State,
        _y: &Self::State,
        _t: f64,
        _rng: &mut SimRng,
    ) -> Option<Result<Vec<(f64, Self::State)>>> {
        None
    }

    /// `(𝓐f)(x)` for the extended generator.
    fn generator_apply(&self, _f: &TestFunction<Self::State>, _x: &Self::State) -> Result<f64> {
        Err(Error::Unsupported(format!(
            "{} exposes no generator",
            self.description()
        )))
    }
}

impl<M: ProcessModel + ?Sized> ProcessModel for Arc<M> {
    type State = M::State;
    fn description(&self) -> String {
        (**self).description()
    }
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn next_event(&self, x: &Self::State, max_dt: f64, rng: &mut SimRng) -> Result<Step<Self::State>> {
        (**self).next_event(x, max_dt, rng)
    }
    fn flow(&self, x: &Self::State, elapsed: f64) -> Self::State {
        (**self).flow(x, elapsed)
    }
    fn flow_entry(&self, x: &Self::State, duration: f64, region: &Region) -> Option<f64> {
        (**self).flow_entry(x, duration, region)
    }
    fn continuous_paths(&self) -> bool {
        (**self).continuous_paths()
    }
    fn exact_kernel(&self, x: &Self::State, t: f64) -> Option<Vec<(Self::State, f64)>> {
        (**self).exact_kernel(x, t)
    }
    fn sample_kernel(&self, x: &Self::State, t: f64, rng: &mut SimRng) -> Option<Result<Self::State>> {
        (**self).sample_kernel(x, t, rng)
    }
    fn binned_kernel(&self, x: &Self::State, t: f64, edges: &[f64]) -> Option<Vec<f64>> {
        (**self).binned_kernel(x, t, edges)
    }
    fn discrete_state_space(&self) -> bool {
        (**self).discrete_state_space()
    }
    fn sample_bridge(
        &self,
        x: &Self::State,
        y: &Self::State,
        t: f64,
        rng: &mut SimRng,
    ) -> Option<Result<Vec<(f64, Self::State)>>> {
        (**self).sample_bridge(x, y, t, rng)
    }
    fn generator_apply(&self, f: &TestFunction<Self::State>, x: &Self::State) -> Result<f64> {
        (**self).generator_apply(f, x)
    }
}

/// Declared regularity of a test function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Smoothness {
    Rough,
    C1,
    C2,
}

type ScalarFn<S> = Arc<dyn Fn(&S) -> f64 + Send + Sync>;

/// A scalar function on states with optional derivative information.
#[derive(Clone)]
pub struct TestFunction<S> {
    eval: ScalarFn<S>,
    derivative: Option<ScalarFn<S>>,
    pub smoothness: Smoothness,
}

impl<S> Debug for TestFunction<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("smoothness", &self.smoothness)
            .field("has_derivative", &self.derivative.is_some())
            .finish()
    }
}

/// Step of the central differences used for generators of smooth functions.
pub const FD_STEP: f64 = 1e-5;

impl<S> TestFunction<S> {
    pub fn new(f: impl Fn(&S) -> f64 + Send + Sync + 'static) -> Self {
        TestFunction {
            eval: Arc::new(f),
            derivative: None,
            smoothness: Smoothness::Rough,
        }
    }

    pub fn constant(c: f64) -> Self {
        let mut f = Self::new(move |_| c);
        f.derivative = Some(Arc::new(|_| 0.0));
        f.smoothness = Smoothness::C2;
        f
    }

    pub fn smooth(mut self, smoothness: Smoothness) -> Self {
        self.smoothness = smoothness;
        self
    }

    pub fn with_derivative(mut self, df: impl Fn(&S) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(df));
        if self.smoothness < Smoothness::C1 {
            self.smoothness = Smoothness::C1;
        }
        self
    }

    pub fn eval(&self, x: &S) -> f64 {
        (self.eval)(x)
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }
}

impl TestFunction<f64> {
    /// `f'(x)`: the supplied derivative, or central differences when the
    /// function is declared at least C¹.
    pub fn derivative_at(&self, x: f64) -> Result<f64> {
        if let Some(df) = &self.derivative {
            return Ok(df(&x));
        }
        if self.smoothness >= Smoothness::C1 {
            return Ok((self.eval(&(x + FD_STEP)) - self.eval(&(x - FD_STEP))) / (2.0 * FD_STEP));
        }
        Err(Error::Unsupported(
            "derivative of a test function without smoothness metadata".into(),
        ))
    }

    /// `f''(x)` by central differences; requires C².
    pub fn second_derivative_at(&self, x: f64) -> Result<f64> {
        if self.smoothness < Smoothness::C2 {
            return Err(Error::Unsupported(
                "second derivative of a test function not declared C²".into(),
            ));
        }
        let h = FD_STEP;
        if let Some(df) = &self.derivative {
            return Ok((df(&(x + h)) - df(&(x - h))) / (2.0 * h));
        }
        Ok((self.eval(&(x + h)) - 2.0 * self.eval(&x) + self.eval(&(x - h))) / (h * h))
    }
}

/// A càdlàg path stored as its event list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S> {
    pub events: Vec<(f64, S)>,
    pub horizon: f64,
}

impl<S: State> Trajectory<S> {
    pub fn new(x0: S, horizon: f64) -> Self {
        Trajectory {
            events: vec![(0.0, x0)],
            horizon,
        }
    }

    /// Index of the last event at or before `t`.
    pub fn event_index_at(&self, t: f64) -> usize {
        self.events.partition_point(|(s, _)| *s <= t).saturating_sub(1)
    }

    /// State of the last event at or before `t`.
    pub fn state_at(&self, t: f64) -> &S {
        &self.events[self.event_index_at(t)].1
    }

    /// State at `t` including the deterministic flow since the last event.
    pub fn position<M: ProcessModel<State = S> + ?Sized>(&self, model: &M, t: f64) -> S {
        let (s, x) = &self.events[self.event_index_at(t)];
        if t > *s {
            model.flow(x, t - s)
        } else {
            x.clone()
        }
    }

    pub fn jump_count(&self) -> usize {
        self.events.len() - 1
    }

    /// Checks the ordering invariant (first time 0, strictly increasing).
    pub fn is_valid(&self) -> bool {
        self.events.first().map(|e| e.0 == 0.0).unwrap_or(false)
            && self.events.windows(2).all(|w| w[1].0 > w[0].0)
            && self.events.last().map(|e| e.0 <= self.horizon).unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regions() {
        let r = Region::interval(0.0, 0.5);
        assert!(0.5f64.in_region(&r));
        assert!(!0.6f64.in_region(&r));
        assert!(2usize.in_region(&Region::states([2, 1])));
        assert!(!0usize.in_region(&Region::states([2, 1])));
        assert!(7usize.in_region(&Region::Everything));
    }

    #[test]
    fn cadlag_lookup() {
        let tr = Trajectory {
            events: vec![(0.0, 0usize), (1.0, 1), (2.5, 0)],
            horizon: 3.0,
        };
        assert_eq!(*tr.state_at(0.99), 0);
        assert_eq!(*tr.state_at(1.0), 1);
        assert_eq!(*tr.state_at(2.6), 0);
        assert!(tr.is_valid());
    }

    #[test]
    fn derivative_requires_metadata() {
        let f = TestFunction::<f64>::new(|x| x * x);
        assert!(f.derivative_at(1.0).is_err());
        let f = f.smooth(Smoothness::C2);
        assert!((f.derivative_at(1.0).unwrap() - 2.0).abs() < 1e-8);
        assert!((f.second_derivative_at(1.0).unwrap() - 2.0).abs() < 1e-4);
    }
}
