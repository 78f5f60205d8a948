"""Per-level arities, derived geometry, and the tuning record shared by all trees."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

VOCAB_MODES = ("off", "on", "tracked")


@dataclass(frozen=True)
class KSchedule:
    """Arity ``ks[l]`` of each level, root first; the matrix side is their product."""

    ks: tuple[int, ...]
    side: int = field(init=False)
    groups: tuple[int, ...] = field(init=False)
    child_side: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        ks = tuple(int(k) for k in self.ks)
        if not ks:
            raise ValueError("a schedule needs at least one level")
        if any(k < 2 for k in ks):
            raise ValueError(f"every arity must be >= 2, got {ks}")
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "side", prod(ks))
        object.__setattr__(self, "groups", tuple(k * k for k in ks))
        object.__setattr__(self, "child_side", tuple(prod(ks[l + 1 :]) for l in range(len(ks))))

    @property
    def nlevels(self) -> int:
        return len(self.ks)

    @classmethod
    def uniform(cls, k: int, n: int, leaf_k: int | None = None) -> "KSchedule":
        return cls.layered(n, top_k=k, top_levels=0, low_k=k, leaf_k=leaf_k)

    @classmethod
    def hybrid(cls, n: int, top_k: int = 4, top_levels: int = 5, low_k: int = 2, leaf_k: int | None = None) -> "KSchedule":
        return cls.layered(n, top_k=top_k, top_levels=top_levels, low_k=low_k, leaf_k=leaf_k)

    @classmethod
    def layered(cls, n: int, top_k: int, top_levels: int, low_k: int, leaf_k: int | None = None) -> "KSchedule":
        n = max(int(n), 2)
        ks: list[int] = []
        tail = leaf_k or 1
        while prod(ks) * tail < n:
            ks.append(top_k if len(ks) < top_levels else low_k)
        if leaf_k:
            ks.append(leaf_k)
        return cls(tuple(ks))

    @classmethod
    def from_spec(cls, spec: str, n: int, leaf_k: int | None = None) -> "KSchedule":
        """Parse ``hybrid``, a single arity (``2``), or an explicit list (``4,4,2``)."""
        spec = spec.strip().lower()
        if spec == "hybrid":
            return cls.hybrid(n, leaf_k=leaf_k)
        parts = [p for p in spec.split(",") if p.strip()]
        try:
            ks = [int(p) for p in parts]
        except ValueError:
            raise ValueError(f"bad k schedule {spec!r}") from None
        if len(ks) == 1:
            return cls.uniform(ks[0], n, leaf_k=leaf_k)
        sched = cls(tuple(ks))
        if sched.side < n:
            raise ValueError(f"schedule {spec} covers side {sched.side} < {n}")
        return sched

    def grown(self) -> "KSchedule":
        """One more level on top, with the current root arity."""
        return KSchedule((self.ks[0],) + self.ks)

    def spec(self) -> str:
        return ",".join(map(str, self.ks))


def compute_child(schedule: KSchedule, r: int, c: int, level: int) -> int:
    """Offset in ``[0, k_l**2)`` of the child at ``level`` whose submatrix holds ``(r, c)``."""
    s = schedule.child_side[level]
    k = schedule.ks[level]
    return ((r // s) % k) * k + (c // s) % k


@dataclass
class DK2Config:
    """Tuning record for dynamic trees and the stores built from them."""

    k_schedule: str = "hybrid"
    kprime: int | None = None
    block_bytes: int = 512
    expansions: int = 3
    sample_t: int = 128
    sample_l: int = 128
    vocab: str = "off"
    rebuild_ratio: float = 1.2
    rebuild_floor_bytes: int = 100 * 1024
    rebuild_every: int = 1 << 20

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.vocab not in VOCAB_MODES:
            raise ValueError(f"vocab must be one of {VOCAB_MODES}, got {self.vocab!r}")
        if self.block_bytes < 16:
            raise ValueError("block size must be at least 16 bytes")
        if self.expansions < 0:
            raise ValueError("expansion count must be >= 0")
        if self.sample_t <= 0 or self.sample_l <= 0:
            raise ValueError("sample periods must be positive")
        if self.kprime is not None and self.kprime < 2:
            raise ValueError("kprime must be >= 2")
        if self.rebuild_ratio < 1.0:
            raise ValueError("rebuild ratio must be >= 1")
        if self.rebuild_every <= 0:
            raise ValueError("rebuild period must be positive")

    @property
    def leaf_k(self) -> int | None:
        """Arity of the last level; vocabulary-coded leaves default to 4x4 submatrices."""
        if self.kprime is not None:
            return self.kprime
        return 4 if self.vocab != "off" else None

    def schedule_for(self, n: int) -> KSchedule:
        return KSchedule.from_spec(self.k_schedule, n, leaf_k=self.leaf_k)
