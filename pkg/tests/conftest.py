"""Shared pytest wiring: a terminal summary that prints one line per
acceptance criterion after the run."""

CRITERIA = {
    "test_criterion_1_prox_oracle_equivalence":
        "closed-form prox steps match numeric minimizers",
    "test_criterion_2_transform_integrity":
        "domain transforms round-trip and preserve energy",
    "test_criterion_3_gradient_correctness":
        "backprop matches finite differences on every layer",
    "test_criterion_4_parameter_count":
        "denoiser parameter count in [165k, 185k]",
    "test_criterion_5_end_to_end_gains":
        "desk-scale gains over LS / spline, feedback monotone in ratio",
    "test_criterion_6_quantization_robustness":
        "3-bit feedback within 1 dB of unquantized at ratio 1/4",
    "test_criterion_7_convergence_traces":
        "NMSE drops by iteration 3 in >=95% of samples",
    "test_criterion_8_one_model_three_tasks":
        "identical weight hash across all three tasks",
}

_outcomes = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.split("::")[-1]
    if name in CRITERIA:
        if report.when == "call":
            _outcomes[name] = "PASS" if report.passed else "FAIL"
        elif report.when == "setup" and report.outcome in ("failed", "skipped"):
            _outcomes[name] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for i, (name, desc) in enumerate(CRITERIA.items(), start=1):
        outcome = _outcomes.get(name, "NOT RUN")
        terminalreporter.write_line(f"criterion {i}: {outcome} - {desc}")
