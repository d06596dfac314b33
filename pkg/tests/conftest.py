import pytest

from medequalizer.dataset import ColumnSpec, Dataset, Schema, demo_cohort_spec, generate_demo_cohort


@pytest.fixture(scope="session")
def demo_cohort():
    return generate_demo_cohort(demo_cohort_spec(n=10000, seed=42))


@pytest.fixture
def small_schema():
    return Schema((
        ColumnSpec("gender", ("Male", "Female"), protected=True),
        ColumnSpec("race", ("Asian", "Black", "White"), protected=True),
        ColumnSpec("outcome", ("Died", "Alive")),
    ))


@pytest.fixture
def small_dataset(small_schema):
    return Dataset(small_schema, (
        ("Male", "White", "Alive"),
        ("Female", "White", "Died"),
        ("Female", "White", "Alive"),
        ("Male", "Asian", "Alive"),
        ("Female", "Black", "Died"),
        ("Male", "White", "Died"),
    ))


_acceptance: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance[report.nodeid.split("::")[-1]] = "PASS" if report.passed else "FAIL"
    elif "test_acceptance.py" in report.nodeid and report.failed:
        _acceptance[report.nodeid.split("::")[-1]] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance):
        terminalreporter.write_line(f"{_acceptance[name]:4}  {name}")
