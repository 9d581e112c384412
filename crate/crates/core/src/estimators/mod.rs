//! Estimators of φ-variation distances, Doeblin coefficients, hitting
//! times and their exponential moments, and checks of the hypotheses of the
//! exponential φ-coupling criteria.

mod conditions;
mod hitting;
mod variation;

pub use conditions::{
    check_coupling_preconditions, ConditionBudget, ConditionReport, ConditionResult, GridPoint, Verdict, UI_THRESHOLD,
};
pub use hitting::{
    build_phi_from_hitting, exp_moment, hitting_time_samples, hitting_times_from_law, shifted_hitting_time_samples,
    ExpMomentEstimate, HittingSample, ShiftedHitting, TabulatedPhi,
};
pub use variation::{
    doeblin_coefficient, doeblin_coefficient_extended, phi_variation_distance, phi_variation_exact, Bins,
    DoeblinEstimate, PhiVariation,
};

#[cfg(test)]
mod tests;
