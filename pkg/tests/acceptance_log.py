"""Pass/fail lines of the acceptance suite, printed in the pytest summary."""

LINES: list[str] = []


def verdict(label: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    LINES.append(line)
    print(line)
    assert ok, line
