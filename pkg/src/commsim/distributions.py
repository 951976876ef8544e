"""Probability vectors over a finite alphabet, the families used in the
experiments, fractional norms and the local-complexity profile.

Symbols are 1-based everywhere a caller can see them: ``sample`` returns
values in ``1..d`` and ``probs[j - 1]`` is the mass of symbol ``j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import DomainError

SUM_TOLERANCE = 1e-12

__all__ = [
    "Distribution",
    "SortedView",
    "ComplexityProfile",
    "make_distribution",
    "uniform",
    "point_mass",
    "geometric",
    "geometric_half_norm",
    "zipf",
    "sparse_random",
    "random_distribution",
    "make_family",
    "FAMILIES",
    "norm_q",
    "renyi_entropy_half",
    "complexity_profile",
    "sample",
]


@dataclass(frozen=True)
class SortedView:
    sorted_probs: np.ndarray
    perm: np.ndarray  # 1-based: sorted_probs[i] == probs[perm[i] - 1]


@dataclass(frozen=True, eq=False)
class Distribution:
    """An immutable probability vector ``probs`` of length ``d``."""

    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64).ravel()
        if probs.size < 1:
            raise DomainError("a distribution needs at least one symbol")
        bad = np.flatnonzero(~np.isfinite(probs) | (probs < 0))
        if bad.size:
            j = int(bad[0])
            raise DomainError(f"invalid mass {probs[j]!r} at symbol {j + 1}")
        total = math.fsum(probs)
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise DomainError(f"masses sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def d(self) -> int:
        return int(self.probs.size)

    def __repr__(self):
        return f"Distribution(d={self.d}, support={self.support_size})"

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    __hash__ = None

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.probs))

    @cached_property
    def cdf(self) -> np.ndarray:
        cdf = np.cumsum(self.probs)
        cdf /= cdf[-1]
        # Never land on trailing zero-mass symbols.
        last = int(np.flatnonzero(self.probs)[-1])
        cdf[last:] = 1.0
        cdf.setflags(write=False)
        return cdf

    def sorted_view(self) -> SortedView:
        order = np.argsort(-self.probs, kind="stable")
        return SortedView(sorted_probs=self.probs[order], perm=order + 1)


@dataclass(frozen=True)
class ComplexityProfile:
    q_norm_half: float
    q_norm_third: float
    renyi_half: float
    h_star: int
    h_star_value: float

    def to_dict(self) -> dict:
        return {
            "half_norm": self.q_norm_half,
            "third_norm": self.q_norm_third,
            "renyi_half": self.renyi_half,
            "h_star": self.h_star,
            "h_star_value": self.h_star_value,
        }


def make_distribution(weights) -> Distribution:
    """Normalize nonnegative ``weights`` into a :class:`Distribution`."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.size == 0:
        raise DomainError("weights must be nonempty")
    bad = np.flatnonzero(~np.isfinite(w) | (w < 0))
    if bad.size:
        j = int(bad[0])
        raise DomainError(f"invalid weight {w[j]!r} at index {j + 1}")
    total = math.fsum(w)
    if total <= 0:
        raise DomainError("all weights are zero")
    return Distribution(w / total)


def uniform(d: int) -> Distribution:
    _check_d(d)
    return Distribution(np.full(d, 1.0 / d))


def point_mass(d: int, symbol: int = 1) -> Distribution:
    _check_d(d)
    if not 1 <= symbol <= d:
        raise DomainError(f"symbol {symbol} outside 1..{d}")
    probs = np.zeros(d)
    probs[symbol - 1] = 1.0
    return Distribution(probs)


def geometric(beta: float, d: int) -> Distribution:
    """Truncated geometric law, mass at ``k`` proportional to ``beta**k``."""
    _check_d(d)
    if not 0 < beta <= 1:
        raise DomainError(f"beta must lie in (0, 1], got {beta!r}")
    if beta == 1:
        return uniform(d)
    # beta**(k-1) in log space; the common factor beta cancels on normalizing.
    w = np.exp(np.arange(d) * math.log(beta))
    return make_distribution(w)


def geometric_half_norm(beta: float, d: int) -> float:
    """Closed-form half-norm of ``geometric(beta, d)``."""
    _check_d(d)
    if not 0 < beta <= 1:
        raise DomainError(f"beta must lie in (0, 1], got {beta!r}")
    if beta == 1:
        return float(d)
    r = math.sqrt(beta)
    rd = r**d
    return (1 + r) * (1 - rd) / ((1 - r) * (1 + rd))


def zipf(lam: float, d: int) -> Distribution:
    _check_d(d)
    if not lam > 0:
        raise DomainError(f"zipf exponent must be positive, got {lam!r}")
    k = np.arange(1, d + 1, dtype=np.float64)
    return make_distribution(k**-lam)


def sparse_random(s: int, d: int, rng: np.random.Generator) -> Distribution:
    """Exactly ``s`` nonzero masses on a uniformly chosen support."""
    _check_d(d)
    if not 1 <= s <= d:
        raise DomainError(f"sparsity {s} outside 1..{d}")
    support = rng.choice(d, size=s, replace=False)
    w = np.zeros(d)
    w[support] = rng.standard_exponential(s)
    return make_distribution(w)


def random_distribution(d: int, rng: np.random.Generator) -> Distribution:
    """Flat-Dirichlet draw (normalized i.i.d. exponentials)."""
    _check_d(d)
    return make_distribution(rng.standard_exponential(d))


FAMILIES = ("uniform", "geometric", "zipf", "sparse", "point")


def make_family(family: str, param: float | None, d: int, rng=None) -> Distribution:
    """Build a named family member; ``param`` is beta, lambda or s."""
    if family == "uniform":
        return uniform(d)
    if family == "point":
        return point_mass(d, 1 if param is None else int(param))
    if param is None:
        raise DomainError(f"family {family!r} needs a parameter")
    if family == "geometric":
        return geometric(float(param), d)
    if family == "zipf":
        return zipf(float(param), d)
    if family == "sparse":
        if float(param) != int(param):
            raise DomainError(f"sparsity must be an integer, got {param!r}")
        if rng is None:
            rng = np.random.default_rng(0)
        return sparse_random(int(param), d, rng)
    raise DomainError(f"unknown family {family!r}; expected one of {FAMILIES}")


def norm_q(p: Distribution, q: float) -> float:
    """Generalized ``q``-norm ``(sum p_i**q)**(1/q)`` for ``0 < q <= 1``."""
    if not 0 < q <= 1:
        raise DomainError(f"q must lie in (0, 1], got {q!r}")
    nz = p.probs[p.probs > 0]
    if np.all(nz == nz[0]):
        # Uniform on its support: k**(1/q) * c exactly, so h**2 * p_(h)
        # computed elsewhere compares equal instead of off by an ulp.
        k = nz.size
        if q == 0.5:
            return float(k * k) * float(nz[0])
        return float(k ** (1.0 / q) * nz[0])
    return math.fsum(nz**q) ** (1.0 / q)


def renyi_entropy_half(p: Distribution) -> float:
    """Natural-log Renyi entropy of order 1/2, ``log ||p||_{1/2}``."""
    return max(0.0, math.log(norm_q(p, 0.5)))


def complexity_profile(p: Distribution) -> ComplexityProfile:
    view = p.sorted_view()
    h = np.arange(1, p.d + 1, dtype=np.float64)
    values = h * h * view.sorted_probs
    best = int(np.argmax(values))  # first maximum, i.e. smallest h
    half = norm_q(p, 0.5)
    return ComplexityProfile(
        q_norm_half=half,
        q_norm_third=norm_q(p, 1.0 / 3.0),
        renyi_half=max(0.0, math.log(half)),
        h_star=best + 1,
        h_star_value=float(values[best]),
    )


def sample(p: Distribution, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. 1-based symbols drawn by inverse CDF."""
    if count < 0:
        raise DomainError(f"count must be nonnegative, got {count}")
    u = rng.random(count)
    return np.searchsorted(p.cdf, u, side="right").astype(np.int64) + 1


def _check_d(d):
    if int(d) != d or d < 1:
        raise DomainError(f"alphabet size must be a positive integer, got {d!r}")
