"""Monte Carlo validation lab: scenarios, runners, and report files."""

from .reports import (
    SCHEMA_VERSION,
    BoundCheck,
    Estimate,
    SimReport,
    mc_estimate,
    read_report,
    report_to_json,
    write_report,
)
from .scenarios import (
    AllOfSet,
    AnyOfSet,
    AtXRejections,
    FirstCrossing,
    FixedN,
    OnHypothesis,
    PostHocPower,
    SimScenario,
    StoppingRuleSpec,
    builtin_scenarios,
    rep_rng,
    scenario_from_dict,
)
from .runner import (
    SIM_KINDS,
    run_scenario,
    sim_av_uniform_validity,
    sim_bandit_martingale,
    sim_peeking_type1,
    sim_power_one,
    sim_runtime_vs_fixed,
    sim_seq_fcr,
    sim_seq_fdr,
    sim_tau_robustness,
)

__all__ = [
    "SCHEMA_VERSION",
    "BoundCheck",
    "Estimate",
    "SimReport",
    "mc_estimate",
    "read_report",
    "report_to_json",
    "write_report",
    "AllOfSet",
    "AnyOfSet",
    "AtXRejections",
    "FirstCrossing",
    "FixedN",
    "OnHypothesis",
    "PostHocPower",
    "SimScenario",
    "StoppingRuleSpec",
    "builtin_scenarios",
    "rep_rng",
    "scenario_from_dict",
    "SIM_KINDS",
    "run_scenario",
    "sim_av_uniform_validity",
    "sim_bandit_martingale",
    "sim_peeking_type1",
    "sim_power_one",
    "sim_runtime_vs_fixed",
    "sim_seq_fcr",
    "sim_seq_fdr",
    "sim_tau_robustness",
]
