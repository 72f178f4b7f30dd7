//! Shooting from the origin: startup, adaptive integration with events, and
//! trajectory functionals.

mod controls;
mod functionals;
mod startup;
mod trajectory;

pub use controls::IntegratorControls;
pub use functionals::{
    capital_i, capital_i_with, energy, invert_profile, node_energies, radius_at_level, EnergyValue, IValues,
    InverseProfile, ReferenceFbar,
};
pub use startup::{origin_startup, startup_radius_in_r, t_of_r, validated_startup, StartupProfile, STARTUP_DRIFT};
pub(crate) use startup::{eval_log_curve, log_curve, merged_samples};
pub use trajectory::{integrate_ivp, integrate_operator, Clock, NodeState, StopEvent, TailDiagnostics, Trajectory};
