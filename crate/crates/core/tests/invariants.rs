mod properties;

macro_rules! property_tests {
    ($($name:ident),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                if let Err(e) = properties::$name() {
                    panic!("{e}");
                }
            }
        )*
    };
}

property_tests!(
    bt_label_frequency,
    balance_sizes_exact,
    split_is_partition,
    batch_composition,
    data_determinism,
    hash_featurizer,
    loss_nonnegative_and_decreasing,
    bias_invariance,
    gradient_matches_finite_differences,
    reward_is_pure,
    solver_on_simplex,
    solver_monotone,
    solver_vertex_dominance,
    solver_scale_equivariance,
    training_deterministic,
    trace_lambda_valid,
    more_multitask_loss_magnitude,
    fixed_lambda_matches_multitask_step,
    ece_partition,
    ece_permutation_invariant,
    confidence_monotone_under_scaling,
    quartiles_match_sort_oracle,
    selection_affine_invariance,
    oracle_selector_regret_zero,
    study_deterministic,
);

#[test]
fn every_property_is_wired() {
    assert_eq!(properties::all().len(), 25);
}
