from collections import defaultdict

import pytest

_results: dict[str, list[tuple[str, bool]]] = defaultdict(list)
_titles: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion this test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    cid, title = marker.args
    _titles[cid] = title
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _results[cid].append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_results, key=lambda c: (int("".join(ch for ch in c if ch.isdigit())), c)):
        runs = _results[cid]
        ok = all(p for _, p in runs)
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {_titles[cid]} ({sum(p for _, p in runs)}/{len(runs)} checks)"
        tr.write_line(line)
        for name, passed in runs:
            if not passed:
                tr.write_line(f"         failed: {name}")
