"""Instrumental-variable estimation of cause-specific cumulative exposure effects."""

from ._ivcr import (  # noqa: F401
    CohortDataset,
    DataError,
    EventTable,
    ExtendedIvFitResult,
    FittedInstrumentModel,
    IvFitResult,
    MonteCarloSummary,
    NaiveAalenResult,
    RrCurve,
    ScenarioConfig,
    SingularDenominatorError,
    StepCurve,
    SubgroupHazards,
    VarianceCurves,
    __version__,
    bootstrap_rr,
    build_event_table,
    fit_instrument_model,
    fit_iv_competing,
    fit_iv_extended,
    fit_naive_aalen,
    generate,
    infer,
    parse_cohort_csv,
    relative_risk_curve,
    run_cli,
    run_monte_carlo,
    scenario_preset,
    solve_gamma_for_rho,
    subgroup_hazards,
)
