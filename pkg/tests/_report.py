"""Acceptance results collected during the session and printed at the end."""

LINES = []


def record(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
    LINES.append(line)
    print(line)
    return passed
