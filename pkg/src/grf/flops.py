"""Multiplication counting.

Convention: one FLOP per scalar multiplication; additions are free and a
dense N x N inversion is charged N**3.
"""

from __future__ import annotations


class FlopCounter:
    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        if n < 0:
            raise ValueError("FLOP increments must be nonnegative")
        self.count += int(n)

    def reset(self) -> None:
        self.count = 0

    def __repr__(self):
        return f"FlopCounter({self.count})"


def charge(counter: FlopCounter | None, n: int) -> None:
    if counter is not None:
        counter.add(n)
