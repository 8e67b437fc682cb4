"""Shared certification primitives.

An :class:`IsotopyCertificate` is a sampled numeric record witnessing strict
positivity of scalar curvature along a constructed metric or family: the grid
it was sampled on, the minimum value found, and the tolerance it was compared
against.  Certificates are produced all over the toolkit (curvature scans,
bend synthesis, schedule compilation) and serialize to JSON.

``pmap`` is the one concurrency primitive: a deterministic, order-preserving
parallel map whose worker count is capped by the ``GLLAB_THREADS`` environment
variable.  All scan workloads in the toolkit are pure functions over immutable
inputs, so a thread map is safe.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field


def thread_count():
    """Worker cap for scan parallelism (env ``GLLAB_THREADS``, default 1)."""
    raw = os.environ.get("GLLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(n, 1)


def pmap(fn, items):
    """Order-preserving map, parallel when GLLAB_THREADS > 1."""
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


@dataclass
class IsotopyCertificate:
    """Positivity witness: pass iff min_scalar > tolerance >= 0."""

    grid: str
    min_scalar: float
    tolerance: float = 0.0
    label: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")

    @property
    def passed(self):
        return self.min_scalar > self.tolerance

    def to_json(self):
        return {
            "grid": self.grid,
            "min_scalar": self.min_scalar,
            "tolerance": self.tolerance,
            "label": self.label,
            "passed": bool(self.passed),
            **({"extra": self.extra} if self.extra else {}),
        }

    def __repr__(self):
        status = "pass" if self.passed else "FAIL"
        lbl = f" {self.label!r}" if self.label else ""
        return (f"<IsotopyCertificate{lbl} {status}: min R = "
                f"{self.min_scalar:.6g} on {self.grid}>")
