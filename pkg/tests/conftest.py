import sys
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from dagsched import Instance
from dagsched.instance import JobSpec, PrecedenceDag


def mk_instance(jobs, edges=(), machines=1, no_surprises=True, allow_zero_size=False):
    """jobs: iterable of (id, size, weight, release) coercible to Fraction."""
    return Instance(
        jobs=tuple(
            JobSpec(i, Fraction(s), Fraction(w), Fraction(r)) for i, s, w, r in jobs
        ),
        dag=PrecedenceDag(edges=frozenset(tuple(e) for e in edges)),
        machines=machines,
        no_surprises=no_surprises,
        allow_zero_size=allow_zero_size,
    )


_capman = None


def pytest_configure(config):
    global _capman
    _capman = config.pluginmanager.getplugin("capturemanager")


def criterion(n: int, ok: bool, detail: str = "") -> None:
    """One pass/fail line per acceptance criterion, bypassing capture."""
    status = "PASS" if ok else "FAIL"
    line = f"acceptance criterion {n}: {status}{' - ' + detail if detail else ''}"
    if _capman is not None:
        with _capman.global_and_fixture_disabled():
            print(line, flush=True)
    else:
        print(line, file=sys.__stdout__, flush=True)
    assert ok, f"acceptance criterion {n} failed: {detail}"
