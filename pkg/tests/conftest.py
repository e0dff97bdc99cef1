# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(number: int, title: str, checks: dict):
    """Store and print one pass/fail line; ``checks`` maps label -> (ok, value text)."""
    ok = all(v[0] for v in checks.values())
    detail = "; ".join(f"{k}: {v[1]}{'' if v[0] else ' (FAIL)'}" for k, v in checks.items())
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title} | {detail}"
    ACCEPTANCE[number] = (ok, line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n][1])

