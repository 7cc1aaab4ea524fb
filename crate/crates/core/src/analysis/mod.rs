//! Event-related potentials and event-related spectral perturbation.

mod erp;
mod ersp;

pub use erp::{
    baseline_corrected, difference_wave, erp_average, erp_significance, prominent_extrema, Condition, ErpWave, Extremum,
    ERP_BASELINE_S,
};
pub use ersp::{
    compare_conditions_ersp, cycles_at, ersp, trial_power_maps, ErspComparison, ErspConfig, ErspMap, PowerMaps,
};
