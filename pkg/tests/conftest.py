import sys
import warnings

import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion, printed after the run."""
    module = next(
        (m for name, m in sys.modules.items() if name.endswith("test_acceptance")),
        None,
    )
    lines = getattr(module, "REPORT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

from occupant_personas import ingest
from occupant_personas.config import packaged_data
from occupant_personas.features import DropRules, TargetSpec, apply_drop_rules
from occupant_personas.persona import LabelMap


@pytest.fixture(scope="session")
def fixture_csv():
    return packaged_data("synthetic_fixture.csv")


@pytest.fixture(scope="session")
def cleaned_fixture(fixture_csv):
    table = ingest.load_table(fixture_csv)
    return ingest.clean(table, ingest.CleaningRules(), source=str(fixture_csv))


@pytest.fixture(scope="session")
def prepared_fixture(cleaned_fixture):
    rules = DropRules.from_json(packaged_data("drop_rules.json"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # default rules name a column the fixture lacks
        return apply_drop_rules(cleaned_fixture, rules)


@pytest.fixture(scope="session")
def target_spec():
    return TargetSpec.from_json(packaged_data("codebook.json"))


@pytest.fixture(scope="session")
def label_map():
    return LabelMap.from_json(packaged_data("label_map.json"))
