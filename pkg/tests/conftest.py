from collections import defaultdict

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    number = dict(report.user_properties).get("criterion")
    if number is None:
        return
    _RESULTS[number].append(report)


_RESULTS = defaultdict(list)


def pytest_runtest_setup(item):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        item.user_properties.append(("criterion", marker.args[0]))
        item.user_properties.append(("criterion_title", marker.args[1]))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        reports = _RESULTS[number]
        props = dict(reports[0].user_properties)
        failed = [r.nodeid.split("::")[-1] for r in reports if r.failed]
        verdict = "FAIL" if failed else "PASS"
        line = f"criterion {number:>2} {verdict}: {props['criterion_title']}"
        if failed:
            line += f"  (failing checks: {', '.join(failed)})"
        terminalreporter.write_line(line)
        for r in reports:
            for key, value in r.user_properties:
                if key == "detail":
                    terminalreporter.write_line(f"    {value}")
