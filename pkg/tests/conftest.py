import pytest
from hypothesis import HealthCheck, settings

from eaw.config import load_catalog_entry

settings.register_profile("eaw", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("eaw")


@pytest.fixture(scope="session")
def catalog_metric():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_catalog_entry(name).build_metric()
        return cache[name]

    return get


@pytest.fixture(scope="session")
def curvature_of(catalog_metric):
    from eaw.curvature import curvature
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = curvature(catalog_metric(name))
        return cache[name]

    return get


# ---- acceptance summary: one PASS/FAIL line per criterion ----

_ACCEPTANCE: dict[str, tuple[str, str]] = {}
ACCEPTANCE_NOTES: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.outcome != "passed":
        _ACCEPTANCE[name] = (report.outcome, report.when)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    grouped: dict[int, list] = {}
    for name, (outcome, _) in _ACCEPTANCE.items():
        base, _, case = name.partition("[")
        number = int(base.split("_")[2])
        title = " ".join(base.split("_")[3:])
        grouped.setdefault(number, []).append((title, case.rstrip("]"), outcome, ACCEPTANCE_NOTES.get(name, "")))
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(grouped):
        rows = grouped[number]
        ok = [r for r in rows if r[2] == "passed"]
        mark = "PASS" if len(ok) == len(rows) else "FAIL"
        titles = sorted({r[0] for r in rows})
        notes = sorted({r[3] for r in rows if r[3]})
        failed = [r[1] or r[0] for r in rows if r[2] != "passed"]
        line = f"{mark}  criterion {number:>2}  {'; '.join(titles)}  ({len(ok)}/{len(rows)} cases)"
        if notes:
            line += "  " + "; ".join(notes)
        if failed:
            line += "  failed: " + ", ".join(failed)
        tr.write_line(line)
