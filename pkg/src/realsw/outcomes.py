"""Decoder verdicts shared by the exhaustive, integer-program and multistage decoders."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class Outcome(str, enum.Enum):
    UNIQUE = "unique"
    NONE_FOUND = "none_found"
    MULTIPLE = "multiple"
    # solver budget ran out before uniqueness could be settled
    INCONCLUSIVE = "inconclusive"


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (tuple, list)):
        return [_jsonable(e) for e in v]
    if isinstance(v, dict):
        return {k: _jsonable(e) for k, e in v.items()}
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, enum.Enum):
        return v.value
    return v


@dataclass
class DecodeResult:
    """Verdict of one decoding attempt.

    ``value`` is the decoded block when the verdict is UNIQUE: a vector for
    one-sided decoders, an ``(x, y)`` tuple for the pair decoders and a tuple
    of vectors for multi-source decoding. ``solutions`` keeps the first two
    admissible candidates when the verdict is MULTIPLE.
    """

    outcome: Outcome
    value: Any = None
    candidates_examined: int = 0
    solutions: list = field(default_factory=list)
    failed_stage: int | None = None
    stages: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.outcome is Outcome.UNIQUE

    def to_dict(self) -> dict[str, Any]:
        return {
            "outcome": self.outcome.value,
            "value": _jsonable(self.value),
            "candidates_examined": int(self.candidates_examined),
            "solutions": _jsonable(self.solutions),
            "failed_stage": self.failed_stage,
            "stages": _jsonable(self.stages),
        }
