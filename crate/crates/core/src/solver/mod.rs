//! Online solvers for the three fairness regimes.

pub mod common_fair;
pub mod driver;
pub mod dual;
pub mod epoch;
pub mod maxmin;
pub mod zero_fair;

pub use driver::{run_online, solve_epoch, EpochOutcome, Mode, RunOutput, SplitRule};
pub use dual::{ConstraintHistory, RateTracker};
pub use epoch::EpochProblem;
