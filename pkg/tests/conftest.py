ACCEPTANCE_PREFIX = "test_criterion_"


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: one acceptance criterion per test")


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = getattr(rep, "nodeid", "").rsplit("::", 1)[-1]
            if not name.startswith(ACCEPTANCE_PREFIX) or getattr(rep, "when", "call") not in ("call", "setup"):
                continue
            if outcome == "passed" and rep.when != "call":
                continue
            detail = ""
            for key, value in getattr(rep, "user_properties", []):
                if key == "detail":
                    detail = value
            rows.append((name, "PASS" if outcome == "passed" else outcome.upper(), detail))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in sorted(rows, key=lambda r: int(r[0][len(ACCEPTANCE_PREFIX):].split("_")[0])):
        terminalreporter.write_line(f"{status:<5} {name[len(ACCEPTANCE_PREFIX):]}" + (f"  [{detail}]" if detail else ""))
