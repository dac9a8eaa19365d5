//! The environment interface shared by the simulated worlds.

use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::context::{Dialect, Observation, StateFields};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub done: bool,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("the episode has already finished")]
    EpisodeFinished,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("subtask not understood by the environment: {0:?}")]
pub struct FocusError(pub String);

/// A text environment driven by one action string per step.
///
/// Besides the step interface, environments expose their ground truth and a
/// scripted oracle so tests and the oracle backend can read hidden state.
pub trait Environment {
    fn dialect(&self) -> Dialect;
    fn id(&self) -> String;
    fn seed(&self) -> u64 {
        0
    }
    /// `o_0` for the current focus.
    fn initial_observation(&self) -> Observation;
    fn step(&mut self, action: &str) -> Result<StepOutcome, EnvError>;
    /// Canonical spelling of an action, or the trimmed input when the action
    /// is outside the grammar.
    fn normalize(&self, action: &str) -> String;
    /// The true values of every state key this dialect can track.
    fn ground_truth(&self) -> StateFields;
    /// Next action of the scripted solver, `None` once the focus is met.
    fn oracle_action(&self) -> Option<String>;
    /// Subtasks a perfect planner would propose for the current focus.
    fn oracle_decomposition(&self) -> Vec<String>;
    /// Narrows the goal to a subtask (`None` restores the full task). The
    /// world state is kept.
    fn set_focus(&mut self, subtask: Option<&str>) -> Result<(), FocusError>;
    /// Whether the current focus is met.
    fn solved(&self) -> bool;
    /// Whether the full task is met, regardless of focus.
    fn task_solved(&self) -> bool;
    fn default_max_steps(&self) -> usize {
        self.dialect().default_max_steps()
    }
}

/// Shared handle so the oracle backend can read the environment that the
/// episode loop is stepping.
#[derive(Debug)]
pub struct SharedEnv<E>(Rc<RefCell<E>>);

impl<E> Clone for SharedEnv<E> {
    fn clone(&self) -> Self {
        Self(Rc::clone(&self.0))
    }
}

impl<E: Environment> SharedEnv<E> {
    pub fn new(env: E) -> Self {
        Self(Rc::new(RefCell::new(env)))
    }

    pub fn with<R>(&self, f: impl FnOnce(&E) -> R) -> R {
        f(&self.0.borrow())
    }

    pub fn with_mut<R>(&self, f: impl FnOnce(&mut E) -> R) -> R {
        f(&mut self.0.borrow_mut())
    }
}

impl<E: Environment> Environment for SharedEnv<E> {
    fn dialect(&self) -> Dialect {
        self.0.borrow().dialect()
    }
    fn id(&self) -> String {
        self.0.borrow().id()
    }
    fn seed(&self) -> u64 {
        self.0.borrow().seed()
    }
    fn initial_observation(&self) -> Observation {
        self.0.borrow().initial_observation()
    }
    fn step(&mut self, action: &str) -> Result<StepOutcome, EnvError> {
        self.0.borrow_mut().step(action)
    }
    fn normalize(&self, action: &str) -> String {
        self.0.borrow().normalize(action)
    }
    fn ground_truth(&self) -> StateFields {
        self.0.borrow().ground_truth()
    }
    fn oracle_action(&self) -> Option<String> {
        self.0.borrow().oracle_action()
    }
    fn oracle_decomposition(&self) -> Vec<String> {
        self.0.borrow().oracle_decomposition()
    }
    fn set_focus(&mut self, subtask: Option<&str>) -> Result<(), FocusError> {
        self.0.borrow_mut().set_focus(subtask)
    }
    fn solved(&self) -> bool {
        self.0.borrow().solved()
    }
    fn task_solved(&self) -> bool {
        self.0.borrow().task_solved()
    }
    fn default_max_steps(&self) -> usize {
        self.0.borrow().default_max_steps()
    }
}

impl<E: Environment + ?Sized> Environment for &mut E {
    fn dialect(&self) -> Dialect {
        (**self).dialect()
    }
    fn id(&self) -> String {
        (**self).id()
    }
    fn seed(&self) -> u64 {
        (**self).seed()
    }
    fn initial_observation(&self) -> Observation {
        (**self).initial_observation()
    }
    fn step(&mut self, action: &str) -> Result<StepOutcome, EnvError> {
        (**self).step(action)
    }
    fn normalize(&self, action: &str) -> String {
        (**self).normalize(action)
    }
    fn ground_truth(&self) -> StateFields {
        (**self).ground_truth()
    }
    fn oracle_action(&self) -> Option<String> {
        (**self).oracle_action()
    }
    fn oracle_decomposition(&self) -> Vec<String> {
        (**self).oracle_decomposition()
    }
    fn set_focus(&mut self, subtask: Option<&str>) -> Result<(), FocusError> {
        (**self).set_focus(subtask)
    }
    fn solved(&self) -> bool {
        (**self).solved()
    }
    fn task_solved(&self) -> bool {
        (**self).task_solved()
    }
    fn default_max_steps(&self) -> usize {
        (**self).default_max_steps()
    }
}
