from __future__ import annotations

import dataclasses

import numpy as np


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class FeatureBlock:
    """A named fixed-width feature vector for one family of one match (or pair).

    ``missing`` flags entries to be imputed later; None means nothing is missing.
    """

    name: str
    values: np.ndarray
    missing: np.ndarray | None = None

    @property
    def width(self) -> int:
        return int(self.values.shape[-1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureBlock):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.values, other.values, equal_nan=True)
