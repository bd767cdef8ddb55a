"""Sample-adaptive augmentation policy.

Each augmentation carries a policy ``(s, a, p)``. Samples in a mini-batch are
ranked by loss (rank 1 = smallest loss) and the normalized rank
``x = rank / B`` is mapped to a strength

    lambda = 1 - I_x(s * a, s * (1 - a))

where ``I`` is the regularized incomplete beta function. The Beta shapes are
ordered so the underlying distribution has mean ``a``: raising ``a`` raises
every lambda, and raising ``s`` sharpens the curve towards a step at ``x = a``.
Easy (low-loss) samples therefore get the strongest augmentation. ``p`` is the
probability that the augmentation is applied to a sample at all.
"""
from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .augment import AugmentationKind
from .betafn import inc_beta
from .errors import InputError

KINDS = tuple(AugmentationKind)


@dataclass(frozen=True)
class PolicyParams:
    s: float
    a: float
    p: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.s) and self.s > 0.0):
            raise InputError(f"s must be positive, got {self.s!r}")
        if not 0.0 < self.a < 1.0:
            raise InputError(f"a must lie in (0, 1), got {self.a!r}")
        if not 0.0 <= self.p <= 1.0:
            raise InputError(f"p must lie in [0, 1], got {self.p!r}")

    @property
    def alpha(self) -> float:
        return self.s * self.a

    @property
    def beta(self) -> float:
        return self.s * (1.0 - self.a)

    def to_dict(self) -> dict:
        return {"s": self.s, "a": self.a, "p": self.p}


@dataclass(frozen=True, eq=False)
class LossRanking:
    """``ranks[i]`` is the 1-based rank of sample ``i`` in ascending loss order."""

    ranks: np.ndarray

    @property
    def batch_size(self) -> int:
        return int(self.ranks.size)

    def __eq__(self, other):
        return isinstance(other, LossRanking) and np.array_equal(self.ranks, other.ranks)


class PolicySet(Mapping):
    """One ``PolicyParams`` per augmentation kind, all five present."""

    def __init__(self, policies):
        items = {AugmentationKind(k): v for k, v in dict(policies).items()}
        missing = [k.value for k in KINDS if k not in items]
        if missing:
            raise InputError(f"policy set is missing {', '.join(missing)}")
        self._items = {
            k: v if isinstance(v, PolicyParams) else PolicyParams(**v) for k, v in items.items()
        }

    def __getitem__(self, kind):
        return self._items[AugmentationKind(kind)]

    def __iter__(self):
        return iter(KINDS)

    def __len__(self):
        return len(KINDS)

    def __repr__(self):
        return f"PolicySet({ {k.value: v for k, v in self._items.items()} })"

    @classmethod
    def uniform(cls, s: float = 2.0, a: float = 0.5, p: float = 1.0) -> "PolicySet":
        return cls({k: PolicyParams(s, a, p) for k in KINDS})

    @classmethod
    def disabled(cls) -> "PolicySet":
        """Policies with ``p = 0`` everywhere: nothing is ever augmented."""
        return cls.uniform(p=0.0)

    def to_dict(self) -> dict:
        return {k.value: self._items[k].to_dict() for k in KINDS}

    @classmethod
    def from_dict(cls, d) -> "PolicySet":
        try:
            return cls({k: PolicyParams(**v) for k, v in d.items()})
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad policy set: {exc}") from exc


def rank_losses(losses) -> LossRanking:
    """Ascending, stable ranking of per-sample losses.

    >>> rank_losses([0.5, 0.1, 0.9]).ranks.tolist()
    [2, 1, 3]
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or losses.size == 0:
        raise InputError("losses must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(losses)):
        raise InputError("losses must be finite")
    order = np.argsort(losses, kind="stable")
    ranks = np.empty(losses.size, dtype=np.int64)
    ranks[order] = np.arange(1, losses.size + 1)
    return LossRanking(ranks)


def lambda_of_rank(params: PolicyParams, l_rank: int, batch_size: int) -> float:
    if batch_size < 1 or not 1 <= l_rank <= batch_size:
        raise InputError(f"rank {l_rank} outside 1..{batch_size}")
    return _lambda(params, int(l_rank), int(batch_size))


@lru_cache(maxsize=4096)
def _lambda(params: PolicyParams, l_rank: int, batch_size: int) -> float:
    return 1.0 - inc_beta(params.alpha, params.beta, l_rank / batch_size)


def lambdas_for_batch(params: PolicyParams, ranking: LossRanking) -> np.ndarray:
    B = ranking.batch_size
    return np.array([lambda_of_rank(params, int(r), B) for r in ranking.ranks])


def policy_curve(params: PolicyParams, batch_size: int) -> list[tuple[int, float, float]]:
    """``(rank, rank / B, lambda)`` for every rank of a batch."""
    return [(r, r / batch_size, lambda_of_rank(params, r, batch_size)) for r in range(1, batch_size + 1)]


def sample_selection(params: PolicyParams, rng: np.random.Generator) -> bool:
    """Bernoulli(p) draw deciding whether the augmentation is applied."""
    return bool(rng.random() < params.p)
