import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_RESULTS

    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        clauses = ACCEPTANCE_RESULTS[n]
        failed = [c for c, ok, _ in clauses if not ok]
        status = "FAIL" if failed else "PASS"
        note = f" (failing: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"{status} criterion {n}{note}")
