"""Repo-level pytest hooks.

The acceptance tests print one human-readable pass/fail line per criterion.
Default capture swallows stdout of passing tests, so this hook relays any
captured criterion lines into the terminal summary, keeping them visible in
plain ``pytest -v`` runs (with ``-s`` they already stream live).
"""


def _criterion_index(line):
    head = line.split(":", 1)[0]
    digits = "".join(ch for ch in head if ch.isdigit())
    return int(digits) if digits else 0


def pytest_terminal_summary(terminalreporter):
    lines = set()
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            captured = getattr(rep, "capstdout", "") or ""
            for line in captured.splitlines():
                if line.startswith("criterion "):
                    lines.add(line)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=_criterion_index):
            terminalreporter.line(line)
