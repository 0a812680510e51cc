//! System model: parameters, channels, decision variables, rate and
//! harvested-energy formulas, and constraint checking.

mod alloc;
mod channels;
mod config;
mod feasibility;
mod rates;

pub use alloc::{recover_original, Allocation, DualState, EpochAlloc, OriginalAllocation};
pub use channels::{generate_channels, path_gain, ChannelSet, CSV_HEADER};
pub use config::{db_to_linear, dbm_to_watts, EpochDriver, Fairness, StepSizes, SystemConfig};
pub use feasibility::{check_constraints, check_feasibility, Constraint, Violation};
pub use rates::{
    average_rates, dl_rate_bar, epoch_rates, harvested_energy_all, harvested_energy_bar,
    harvested_energy_epoch, harvested_energy_original, objective_value, perspective_rate,
    ul_rate_bar,
};
