import numpy as np
import pytest

from admitfair.pipeline import PipelineConfig, export_report, run_pipeline

FIXTURE_CONFIG = {
    "seed": 7,
    "synthetic": {"grad_rows": 400, "anomalies": 39, "noise_features": 1},
    "llm": {"enabled": True, "scorer": "mock"},
}


@pytest.fixture(scope="session")
def bundle():
    """One full run on the 400-row fixture, shared by the pipeline and CLI tests."""
    return run_pipeline(PipelineConfig.from_mapping(FIXTURE_CONFIG))


@pytest.fixture(scope="session")
def bundle_dir(bundle, tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    export_report(bundle, out)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One PASS/FAIL/SKIP line per acceptance criterion at the end of the run.
_criteria: dict[int, list[str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria.setdefault(n, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        outcomes = _criteria[n]
        if "failed" in outcomes:
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {n}: {status} ({len(outcomes)} checks)")
