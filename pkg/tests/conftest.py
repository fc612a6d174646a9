import math

import numpy as np
import pytest

from tripletflow.events import EventBatch
from tripletflow.matcher import MatcherParams
from tripletflow.synthetic import SceneSpec, generate, perturb

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    def log(criterion: str, ok: bool | None, detail: str = ""):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"[{status}] {criterion}" + (f": {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def example_a():
    """e_j=(0,(10,10)), e_i=(5000,(11,10)), e_k=(10000,(12,10)), one polarity."""
    return EventBatch([0, 5000, 10000], [10, 11, 12], [10, 10, 10], [1, 1, 1], (20, 20))


def random_params(rng: np.random.Generator) -> MatcherParams:
    return MatcherParams(
        d_x=float(rng.choice([1.0, math.sqrt(2.0), 2.0, 2.5])),
        d_t=int(rng.integers(2_000, 100_001)),
        tau=int(rng.integers(200, 5_001)),
        retention=int(rng.choice([1, 10, 20_000])),
        exclude_center=bool(rng.integers(2)),
    )


def random_batch(rng: np.random.Generator, n: int) -> EventBatch:
    """Dense random or perturbed synthetic events, exactly ``n`` long."""
    kind = rng.integers(3)
    if kind == 0:
        w, h = int(rng.integers(2, 65)), int(rng.integers(2, 65))
        # keep roughly a few events per pixel so windows are populated
        step = int(rng.integers(50, 1_500))
        t = np.cumsum(rng.integers(0, 2 * step, n))
        return EventBatch(t, rng.integers(0, w, n), rng.integers(0, h, n), rng.choice([-1, 1], n), (w, h))
    w, h = int(rng.integers(8, 65)), int(rng.integers(8, 65))
    angle = rng.uniform(0, 2 * np.pi)
    speed = rng.uniform(30, 450)
    spec = SceneSpec(
        pattern="dots" if kind == 1 else str(rng.choice(["bar", "diagonal", "vbar"])),
        velocity=(speed * np.cos(angle), speed * np.sin(angle)),
        resolution=(w, h),
        duration_us=2_000_000,
        n_dots=int(rng.integers(3, 30)),
        dot_radius=float(rng.uniform(1, 6)),
        noise_rate=float(rng.uniform(0, 2000)),
    )
    try:
        batch, _ = generate(spec, int(rng.integers(2**31)))
    except ValueError:
        batch = EventBatch.empty((w, h))
    batch = perturb(batch, float(rng.uniform(0, 800)), float(rng.uniform(0, 0.3)), int(rng.integers(2**31)))
    if len(batch) < n:
        extra = n - len(batch)
        t0 = int(batch.t[-1]) if len(batch) else 0
        tail = EventBatch(
            t0 + np.cumsum(rng.integers(0, 1000, extra)),
            rng.integers(0, w, extra),
            rng.integers(0, h, extra),
            rng.choice([-1, 1], extra),
            (w, h),
        )
        batch = EventBatch(
            np.concatenate([batch.t, tail.t]),
            np.concatenate([batch.x, tail.x]),
            np.concatenate([batch.y, tail.y]),
            np.concatenate([batch.p, tail.p]),
            (w, h),
        )
    return batch.select(slice(0, n))
