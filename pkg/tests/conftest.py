import json

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(records, name="corpus.jsonl"):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as fh:
            for r in records:
                fh.write((r if isinstance(r, str) else json.dumps(r)) + "\n")
        return path
    return _write


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title, seconds): acceptance criterion with runtime budget")
    config.stash[_ACCEPTANCE] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or report.when != "call":
        return
    number, title, seconds = mark.args
    item.config.stash[_ACCEPTANCE].append((number, title, seconds, report.passed, report.duration))


def pytest_terminal_summary(terminalreporter, config):
    rows = sorted(config.stash.get(_ACCEPTANCE, []))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, seconds, passed, duration in rows:
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(
            f"criterion {number:>2}  {verdict}  {duration:6.2f}s (budget {seconds:g}s)  {title}")
