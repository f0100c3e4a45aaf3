//! Property tests for the invariants of every module.

mod invariants;

macro_rules! suites {
    ($($name:ident),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                if let Err(e) = invariants::$name() {
                    panic!("{e}");
                }
            }
        )*
    };
}

suites!(
    semigroup,
    stochastic_rows,
    maximizer_idempotence,
    section_count,
    translation_invariance,
    precip_flag,
    csv_round_trip,
    null_partial_likelihood,
    cox_gradient,
    cox_rescaling,
    survival_monotone,
    cox_closed_form,
    intensity_rows,
    refinement_invariance,
    relabeling_invariance,
    homogeneity,
    prediction_continuity,
    averaged_mae,
    mae_metric,
    nested_folds,
    observed_idempotent,
    determinism,
    zero_length,
    monte_carlo_agreement,
);

#[test]
fn every_suite_has_a_test() {
    assert_eq!(invariants::all().len(), 24);
}
