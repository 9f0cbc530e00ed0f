"""Position-weight models theta(s, l).

A table holds one observation probability per feasible (start slot,
length) pair. Analytic single-slot curves are combined into multi-slot
weights with the any-slot-observed rule:

    theta(s, l) = 1 - prod_{i=s}^{s+l-1} (1 - theta(i, 1))

Tables can also be loaded verbatim from a text file, in which case a
consistency flag records whether some single-slot base curve reproduces
them through the rule above.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

DCG = "dcg"
INV_RANK = "inv_rank"

# Tolerance absorbing 3-decimal rounding of published weight tables.
_CONSISTENCY_TOL = 2e-3


class ExposureDomainError(KeyError):
    """Raised for theta lookups outside the feasible (s, l) domain."""


def theta_single(kind, slot: int) -> float:
    """Single-slot observation probability at 1-based ``slot``.

    ``kind`` is ``"dcg"``, ``"inv_rank"``, or a callable slot -> weight.
    """
    if slot < 1:
        raise ValueError(f"slot must be >= 1, got {slot}")
    if kind == DCG:
        return 1.0 / np.log2(slot + 1.0)
    if kind == INV_RANK:
        return 1.0 / slot
    if callable(kind):
        return float(kind(slot))
    raise ValueError(f"unknown exposure curve {kind!r}")


def composite_exposure(curve, slot: int, length: int, slots: int) -> float:
    """Probability that any of the ``length`` slots starting at ``slot``
    is observed, under single-slot curve ``curve`` and budget ``slots``."""
    if slot < 1 or length < 1:
        raise ValueError("slot and length must be >= 1")
    if slot + length - 1 > slots:
        raise ExposureDomainError(
            f"placement (s={slot}, l={length}) overflows budget K={slots}"
        )
    if length == 1:
        return theta_single(curve, slot)
    miss = 1.0
    for i in range(slot, slot + length):
        miss *= 1.0 - theta_single(curve, i)
    return 1.0 - miss


@dataclass(frozen=True)
class ExposureTable:
    """Dense theta(s, l) for all feasible pairs of a (K, L) instance.

    ``grid[s-1, l-1]`` holds theta(s, l); infeasible cells are zero and
    guarded by :meth:`lookup`. ``composite_consistent`` is True when the
    l=1 row regenerates the full table through the any-slot-observed rule.
    """

    slots: int
    max_len: int
    grid: np.ndarray
    composite_consistent: bool

    def __post_init__(self):
        grid = np.array(self.grid, dtype=np.float64, copy=True)
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    def defined(self, slot: int, length: int) -> bool:
        return (
            1 <= slot
            and 1 <= length <= self.max_len
            and slot + length - 1 <= self.slots
        )

    def lookup(self, slot: int, length: int) -> float:
        if not self.defined(slot, length):
            raise ExposureDomainError(
                f"theta undefined at (s={slot}, l={length}) for K={self.slots}, L={self.max_len}"
            )
        return float(self.grid[slot - 1, length - 1])

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {
            (s, l): float(self.grid[s - 1, l - 1])
            for s in range(1, self.slots + 1)
            for l in range(1, self.max_len + 1)
            if s + l - 1 <= self.slots
        }


def _fill_grid(weights: Mapping[tuple[int, int], float], slots: int, max_len: int) -> np.ndarray:
    grid = np.zeros((slots, max_len))
    for (s, l), w in weights.items():
        grid[s - 1, l - 1] = w
    return grid


def _composite_consistent(grid: np.ndarray, slots: int, max_len: int) -> bool:
    base = grid[:, 0]
    for s in range(1, slots + 1):
        miss = 1.0
        for l in range(1, max_len + 1):
            if s + l - 1 > slots:
                break
            miss *= 1.0 - base[s + l - 2]
            if abs((1.0 - miss) - grid[s - 1, l - 1]) > _CONSISTENCY_TOL:
                return False
    return True


def build_exposure_table(curve, slots: int, max_len: int) -> ExposureTable:
    """Precompute the composite table for an analytic single-slot curve.

    ``curve`` may also be ``"uniform"`` for an all-ones table (useful in
    synthetic tests).
    """
    if curve == "uniform":
        curve = lambda s: 1.0  # noqa: E731
    grid = np.zeros((slots, max_len))
    for s in range(1, slots + 1):
        miss = 1.0
        for l in range(1, max_len + 1):
            if s + l - 1 > slots:
                break
            t = theta_single(curve, s + l - 1)
            if not (0.0 <= t <= 1.0):
                raise ValueError(f"base curve value {t} at slot {s + l - 1} outside [0, 1]")
            miss *= 1.0 - t
            # l=1 stores the base value itself so the single-slot identity
            # holds to the last bit.
            grid[s - 1, l - 1] = t if l == 1 else 1.0 - miss
    return ExposureTable(slots, max_len, grid, composite_consistent=True)


def load_exposure_table(
    weights: Mapping[tuple[int, int], float],
    slots: int | None = None,
    max_len: int | None = None,
) -> ExposureTable:
    """Build a table from explicit weights, e.g. a published table.

    The weights must cover exactly the feasible domain of the (inferred
    or given) K and L. The composite-consistency flag reports whether a
    base curve reproducing the table exists.
    """
    if not weights:
        raise ValueError("weight table is empty")
    if slots is None:
        slots = max(s + l - 1 for s, l in weights)
    if max_len is None:
        max_len = max(l for _, l in weights)
    expected = {
        (s, l)
        for s in range(1, slots + 1)
        for l in range(1, max_len + 1)
        if s + l - 1 <= slots
    }
    got = set(weights)
    if got != expected:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        raise ValueError(f"weight table domain mismatch: missing={missing}, extra={extra}")
    for key, w in weights.items():
        if not (0.0 <= w <= 1.0):
            raise ValueError(f"weight {w} at {key} outside [0, 1]")
    grid = _fill_grid(weights, slots, max_len)
    return ExposureTable(
        slots, max_len, grid, composite_consistent=_composite_consistent(grid, slots, max_len)
    )


def read_exposure_file(path) -> dict[tuple[int, int], float]:
    """Parse whitespace-separated ``s l weight`` lines; ``#`` starts a comment."""
    weights: dict[tuple[int, int], float] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 's l weight', got {line!r}")
            try:
                s, l, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if (s, l) in weights:
                raise ValueError(f"{path}:{lineno}: duplicate entry for (s={s}, l={l})")
            weights[(s, l)] = w
    return weights


def write_exposure_file(table: ExposureTable, path) -> None:
    with open(path, "w") as fh:
        for (s, l), w in sorted(table.as_dict().items()):
            fh.write(f"{s} {l} {w!r}\n")


def resolve_exposure(spec: str, slots: int, max_len: int) -> ExposureTable:
    """Turn a CLI-style exposure spec into a table.

    Accepts ``dcg``, ``inv-rank``/``inv_rank``, ``uniform`` or ``file:PATH``.
    """
    if spec in (DCG,):
        return build_exposure_table(DCG, slots, max_len)
    if spec in (INV_RANK, "inv-rank"):
        return build_exposure_table(INV_RANK, slots, max_len)
    if spec == "uniform":
        return build_exposure_table("uniform", slots, max_len)
    if spec.startswith("file:"):
        table = load_exposure_table(read_exposure_file(spec[5:]))
        if table.slots < slots or table.max_len < max_len:
            raise ValueError(
                f"exposure file covers K={table.slots}, L={table.max_len}; "
                f"run needs K={slots}, L={max_len}"
            )
        if (table.slots, table.max_len) != (slots, max_len):
            # Reduce to the requested domain.
            sub = {
                (s, l): table.lookup(s, l)
                for s in range(1, slots + 1)
                for l in range(1, max_len + 1)
                if s + l - 1 <= slots
            }
            return load_exposure_table(sub, slots, max_len)
        return table
    raise ValueError(f"unknown exposure spec {spec!r}")
