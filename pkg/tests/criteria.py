"""Registry of acceptance outcomes, echoed in the pytest terminal summary."""

RESULTS: dict[int, tuple[bool, str]] = {}


def check(number: int, ok: bool, detail: str) -> None:
    RESULTS[number] = (bool(ok), detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {number}: {detail}"
