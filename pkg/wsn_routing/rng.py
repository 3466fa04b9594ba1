"""Seeded random streams for reproducible scenarios."""
from __future__ import annotations

import numpy as np


class ScenarioRng:
    """Counter-based (Philox) stream; every protocol decision of a scenario draws from one instance."""

    def __init__(self, seed: int):
        self._seed = seed
        self._generator = np.random.Generator(np.random.Philox(seed))

    @property
    def seed(self) -> int:
        return self._seed

    def random(self) -> float:
        return float(self._generator.random())

    def uniform(self, low: float, high: float, size: int | None = None):
        if size is None:
            return float(self._generator.uniform(low, high))
        return self._generator.uniform(low, high, size)
