//! Count-based exploration driven by discretized task-progress functions.
//!
//! The pipeline: a small progress-function language ([`dsl`]) maps an
//! environment state to per-subtask progress scalars, [`binning`] turns those
//! into discrete bins, [`intrinsic`] converts bin visitation counts into
//! exploration bonuses, and [`rl`] trains PPO policies on the bundled
//! [`envs`]. [`llmgen`] asks a chat-completions endpoint (or a fixture
//! directory) for candidate progress programs.

pub mod dsl;
pub mod grid;
pub mod binning;
pub mod intrinsic;
pub mod envs;
pub mod rl;
pub mod llmgen;
