"""Uniform grouping: the non-interactive first round and the minimax baseline.

The alphabet is cut into contiguous blocks of ``2**b - 1`` symbols (the last
one possibly narrower). Each client is assigned one block round-robin and
reports the 1-based rank of its sample inside the block, or 0 when the
sample falls outside it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import Distribution, sample
from .exceptions import ConfigurationError, DomainError, ProtocolViolation
from .losses import estimation_losses


@dataclass(frozen=True)
class Round1Plan:
    d: int
    b: int
    n_clients: int

    @property
    def group_width(self) -> int:
        return 2**self.b - 1

    @property
    def num_groups(self) -> int:
        return -(-self.d // self.group_width)

    @property
    def client_group(self) -> np.ndarray:
        """1-based group index of every client, assigned round-robin."""
        return np.arange(self.n_clients, dtype=np.int64) % self.num_groups + 1

    def block(self, m: int) -> tuple[int, int]:
        """Inclusive 1-based symbol range of group ``m``."""
        if not 1 <= m <= self.num_groups:
            raise DomainError(f"group {m} outside 1..{self.num_groups}")
        lo = (m - 1) * self.group_width + 1
        return lo, min(m * self.group_width, self.d)

    def group_sizes(self) -> np.ndarray:
        """Number of clients on each group (index ``m - 1``)."""
        return np.bincount(self.client_group - 1, minlength=self.num_groups)

    def symbol_group(self) -> np.ndarray:
        """1-based group of every symbol (index ``j - 1``)."""
        return np.arange(self.d, dtype=np.int64) // self.group_width + 1


@dataclass(frozen=True)
class CoarseEstimate:
    p_hat: np.ndarray
    per_symbol_count: np.ndarray


def build_round1_plan(n_clients: int, d: int, b: int) -> Round1Plan:
    if b < 1:
        raise ConfigurationError(f"need at least one bit per message, got b={b}")
    if d < 1:
        raise ConfigurationError(f"alphabet size must be positive, got d={d}")
    plan = Round1Plan(d=int(d), b=int(b), n_clients=int(n_clients))
    if n_clients < plan.num_groups:
        raise ConfigurationError(
            f"fewer clients than groups: {n_clients} clients for {plan.num_groups} groups"
        )
    return plan


def r1_encode(x: int, m: int, plan: Round1Plan) -> int:
    lo, hi = plan.block(m)
    if lo <= x <= hi:
        return x - lo + 1
    return 0


def r1_encode_batch(samples, plan: Round1Plan) -> np.ndarray:
    """Vectorized ``r1_encode`` for client ``i`` holding ``samples[i]``."""
    x = np.asarray(samples, dtype=np.int64)
    if x.shape != (plan.n_clients,):
        raise ConfigurationError(f"expected {plan.n_clients} samples, got shape {x.shape}")
    lo = (plan.client_group - 1) * plan.group_width + 1
    rank = x - lo + 1
    inside = (rank >= 1) & (rank <= plan.group_width)
    return np.where(inside, rank, 0).astype(np.int64)


def r1_decode(messages, plan: Round1Plan) -> np.ndarray:
    """Symbols reported by each client, 0 for silent clients."""
    msg = np.asarray(messages, dtype=np.int64)
    if msg.shape != (plan.n_clients,):
        raise ProtocolViolation(f"expected {plan.n_clients} messages, got shape {msg.shape}")
    bad = np.flatnonzero((msg < 0) | (msg >= 2**plan.b))
    if bad.size:
        i = int(bad[0])
        raise ProtocolViolation(f"client {i + 1} sent {msg[i]}, outside [0, 2^{plan.b})")
    lo = (plan.client_group - 1) * plan.group_width + 1
    symbols = np.where(msg > 0, lo + msg - 1, 0)
    bad = np.flatnonzero(symbols > plan.d)
    if bad.size:
        i = int(bad[0])
        raise ProtocolViolation(
            f"client {i + 1} sent rank {msg[i]} beyond the width of group {plan.client_group[i]}"
        )
    return symbols


def r1_estimate(messages, plan: Round1Plan) -> CoarseEstimate:
    symbols = r1_decode(messages, plan)
    hits = np.bincount(symbols, minlength=plan.d + 1)[1:].astype(np.float64)
    per_symbol = plan.group_sizes()[plan.symbol_group() - 1]
    p_hat = np.divide(hits, per_symbol, out=np.zeros(plan.d), where=per_symbol > 0)
    return CoarseEstimate(p_hat=p_hat, per_symbol_count=per_symbol)


def clamp_renormalize(estimate) -> np.ndarray:
    """Project a raw estimate onto the simplex by clipping and rescaling."""
    v = np.clip(np.asarray(estimate, dtype=np.float64), 0.0, None)
    total = v.sum()
    if total <= 0:
        return np.full(v.size, 1.0 / v.size)
    return v / total


def run_minimax_baseline(p: Distribution, n: int, d: int, b: int, rng, q: float = 2.0):
    """Uniform grouping over all ``n`` clients.

    Returns ``(CoarseEstimate, losses)`` with losses keyed ``l1``, ``l2``, ``lq``.
    """
    if d != p.d:
        raise ConfigurationError(f"d={d} does not match the distribution's {p.d} symbols")
    if n < 1:
        raise ConfigurationError("need at least one client")
    plan = build_round1_plan(n, d, b)
    messages = r1_encode_batch(sample(p, n, rng), plan)
    estimate = r1_estimate(messages, plan)
    return estimate, estimation_losses(estimate.p_hat, p.probs, q)
