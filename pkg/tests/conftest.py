"""Session-scoped end-to-end runs of the built-in scenarios, shared by the
unit, property and acceptance tests."""
from types import SimpleNamespace

import pytest

from baireext.extension import build_extension, smooth_extension
from baireext.pipeline import baire_approximate
from baireext.scenarios import ScenarioConfig, get_scenario


def run_scenario_objects(name: str, cfg: ScenarioConfig | None = None) -> SimpleNamespace:
    """Build a scenario and run the pipeline + extension, returning the live
    objects (not serialized artifacts) for inspection."""
    cfg = cfg or ScenarioConfig()
    data = get_scenario(name).build(cfg)
    diags: list[dict] = []
    items = baire_approximate(data.bundle, data.n_seq, diag=diags.append)
    field = None
    if data.run_extension:
        field = build_extension(
            data.space, items, data.bundle.f_values, data.query_idx, data.bundle.norm_tag
        )
        field = smooth_extension(field)
    return SimpleNamespace(
        cfg=cfg, data=data, bundle=data.bundle, items=items, field=field, diags=diags
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance-criterion verdict lines after the test summary."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def s0_run():
    return run_scenario_objects("S0")


@pytest.fixture(scope="session")
def s1_run():
    return run_scenario_objects("S1")


@pytest.fixture(scope="session")
def s2_run():
    return run_scenario_objects("S2")


@pytest.fixture(scope="session")
def s3_run():
    return run_scenario_objects("S3")
