//! Controlled experiments on top of the simulator.

mod asymmetry;
mod transfer;

pub use asymmetry::{
    high_alpha_phase, repeat_asymmetry_experiment, run_asymmetry_experiment, sign_test_p,
    AsymmetryOptions, ConditionEffect, EffectTable, InterventionSpec, Phase, PhaseEffect,
    SignTest, Verdict, DEFAULT_MARGIN,
};
pub use transfer::{
    classify_transfer, run_memory_transfer_experiment, Probe, TransferPattern, TransferTable,
};
