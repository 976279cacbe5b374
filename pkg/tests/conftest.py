import pytest

CRITERIA: dict[str, tuple[str, str]] = {}


class Criterion:
    """Collects named checks for one acceptance criterion and reports them as one line."""

    def __init__(self, cid: str, title: str):
        self.cid, self.title = cid, title
        self.checks: list[tuple[str, bool, str]] = []

    def check(self, name: str, ok: bool, detail: str = "") -> bool:
        self.checks.append((name, bool(ok), detail))
        return ok

    def finish(self):
        ok = bool(self.checks) and all(c[1] for c in self.checks)
        detail = "; ".join(f"{'' if good else 'FAILED '}{n}: {d}" for n, good, d in self.checks)
        CRITERIA[self.cid] = ("PASS" if ok else "FAIL", detail)
        line = f"criterion {self.cid} [{self.title}]: {'PASS' if ok else 'FAIL'}"
        print(f"\n{line}\n  {detail}")
        assert ok, f"{line}: {detail}"


@pytest.fixture
def criterion(request):
    made = []

    def factory(cid, title):
        c = Criterion(cid, title)
        made.append(c)
        return c

    yield factory
    # a test that crashed before finishing still gets a FAIL line
    for c in made:
        if c.cid not in CRITERIA:
            CRITERIA[c.cid] = ("FAIL", "did not complete: " + "; ".join(n for n, _, _ in c.checks))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(CRITERIA, key=lambda k: (len(k), k)):
        status, detail = CRITERIA[cid]
        terminalreporter.write_line(f"criterion {cid}: {status}  {detail}")
