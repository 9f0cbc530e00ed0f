"""Core domain types for variable presentation length rankings.

A ranking is an ordered sequence of (document, length) placements that
must fit a fixed budget of K vertical slots; each document may appear at
most once and occupies between 1 and L consecutive slots.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VALID_COMPLETE = "valid-complete"
VALID_PARTIAL = "valid-partial"
INVALID = "invalid"


@dataclass(frozen=True)
class RankingConfig:
    """Instance dimensions: document count, slot budget K, max length L."""

    num_docs: int
    slots: int
    max_len: int

    def __post_init__(self):
        if self.num_docs < 1:
            raise ValueError(f"num_docs must be >= 1, got {self.num_docs}")
        if not (1 <= self.max_len <= self.slots):
            raise ValueError(
                f"need 1 <= max_len <= slots, got L={self.max_len}, K={self.slots}"
            )

    @property
    def num_pairs(self) -> int:
        return self.num_docs * self.max_len


@dataclass(frozen=True)
class Placement:
    """One document shown at a given length (number of slots)."""

    doc: int
    length: int

    def __post_init__(self):
        if self.doc < 0:
            raise ValueError(f"doc index must be >= 0, got {self.doc}")
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")


@dataclass(frozen=True)
class VarRanking:
    """An ordered sequence of placements. Construction does not validate
    against a budget; use :func:`validate_ranking` for that."""

    items: tuple[Placement, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self) -> int:
        return len(self.items)

    @property
    def total_len(self) -> int:
        return sum(p.length for p in self.items)

    def start_slots(self) -> list[int]:
        """1-based first slot of every item."""
        out, used = [], 0
        for p in self.items:
            out.append(used + 1)
            used += p.length
        return out

    def key(self) -> tuple[tuple[int, int], ...]:
        """Hashable identity used for counting and tie-breaking."""
        return tuple((p.doc, p.length) for p in self.items)


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ScoreTable:
    """Learnable scores m(d, l): row d, column l-1."""

    values: np.ndarray

    def __post_init__(self):
        vals = _readonly(self.values)
        if vals.ndim != 2:
            raise ValueError("score table must be a 2-D matrix")
        if not np.all(np.isfinite(vals)):
            raise ValueError("score table entries must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, config: RankingConfig) -> "ScoreTable":
        return cls(np.zeros((config.num_docs, config.max_len)))


@dataclass(frozen=True)
class AttractTable:
    """Attractiveness rho(d, l) in [0, 1]: row d, column l-1."""

    values: np.ndarray

    def __post_init__(self):
        vals = _readonly(self.values)
        if vals.ndim != 2:
            raise ValueError("attractiveness table must be a 2-D matrix")
        if np.any(vals < 0.0) or np.any(vals > 1.0):
            raise ValueError("attractiveness entries must lie in [0, 1]")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class ValidationResult:
    status: str
    reason: str | None = field(default=None)

    @property
    def is_valid(self) -> bool:
        return self.status != INVALID

    @property
    def is_complete(self) -> bool:
        return self.status == VALID_COMPLETE


def validate_ranking(ranking: VarRanking, config: RankingConfig) -> ValidationResult:
    """Classify a ranking as valid-complete, valid-partial or invalid.

    Invalid: duplicate document, out-of-range doc/length, or total length
    over the slot budget. Complete: nothing more fits, i.e. every document
    is placed or even a length-1 placement would overflow.
    """
    seen: set[int] = set()
    used = 0
    for i, p in enumerate(ranking.items):
        if not (0 <= p.doc < config.num_docs):
            return ValidationResult(INVALID, f"item {i}: doc {p.doc} out of range")
        if not (1 <= p.length <= config.max_len):
            return ValidationResult(INVALID, f"item {i}: length {p.length} out of range")
        if p.doc in seen:
            return ValidationResult(INVALID, f"item {i}: duplicate doc {p.doc}")
        seen.add(p.doc)
        used += p.length
    if used > config.slots:
        return ValidationResult(INVALID, f"total length {used} exceeds budget {config.slots}")
    all_placed = len(seen) == config.num_docs
    if all_placed or used + 1 > config.slots:
        return ValidationResult(VALID_COMPLETE)
    return ValidationResult(VALID_PARTIAL)


def start_slot(ranking: VarRanking, index: int) -> int:
    """1-based first slot occupied by the item at ``index``."""
    if not (0 <= index < len(ranking.items)):
        raise IndexError(f"index {index} out of range for ranking of size {len(ranking)}")
    return 1 + sum(p.length for p in ranking.items[:index])
