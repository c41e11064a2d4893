"""Cosine-modulated temperature schedule for entropy annealing.

The temperature stays at its initial value for a warmup period and then
follows a decaying-amplitude cosine: the envelope shrinks as 1/(1 + c*r)
over the anneal fraction r, while the cosine bracket repeatedly touches
zero and ends at exactly zero. The half factor normalizes the bracket so
the schedule is continuous at the warmup boundary (bracket value 1 at
r = 0) and still vanishes at r = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InputError


@dataclass(frozen=True)
class AnnealSchedule:
    t0: float
    n_warmup: int = 400
    n_anneal: int = 1000
    oscillations: int = 3
    slope: float = 6.0

    def __post_init__(self):
        if self.t0 < 0:
            raise InputError(f"initial temperature must be >= 0, got {self.t0}")
        if self.n_anneal < 1:
            raise InputError("n_anneal must be >= 1")
        if self.n_warmup < 0 or self.oscillations < 0 or self.slope < 0:
            raise InputError("schedule parameters must be non-negative")

    @property
    def total_epochs(self) -> int:
        return self.n_warmup + self.n_anneal


def temperature(epoch: int, schedule: AnnealSchedule) -> float:
    """Temperature at an integer epoch; exactly 0 from the end of the anneal
    range onward."""
    if epoch < 0:
        raise InputError(f"epoch must be >= 0, got {epoch}")
    if schedule.t0 == 0.0:
        return 0.0
    if epoch < schedule.n_warmup:
        return schedule.t0
    r = (epoch - schedule.n_warmup) / schedule.n_anneal
    if r >= 1.0:
        return 0.0
    envelope = schedule.t0 / (1.0 + schedule.slope * r)
    bracket = 0.5 * (math.cos(2.0 * math.pi * (schedule.oscillations + 0.5) * r) + 1.0)
    return envelope * bracket


def zero_touch_epochs(schedule: AnnealSchedule) -> list[int]:
    """Integer epochs at which the cosine bracket is analytically zero,
    i.e. r = (2j + 1) / (2 * oscillations + 1); only exact integer grid
    points are reported. The final anneal epoch is always included."""
    out = []
    denom = 2 * schedule.oscillations + 1
    for j in range(schedule.oscillations + 1):
        num = schedule.n_anneal * (2 * j + 1)
        if num % denom == 0:
            out.append(schedule.n_warmup + num // denom)
    end = schedule.n_warmup + schedule.n_anneal
    if end not in out:
        out.append(end)
    return out
