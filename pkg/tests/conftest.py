from _acceptance import RESULTS


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        title, ok, detail = RESULTS[number]
        tag = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{tag}] {number:2d} {title}" + (f" ({detail})" if detail else ""))
