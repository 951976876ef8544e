"""Second round: sample allocation from the coarse estimate and the
overlapping group assignment that lets each client report one of up to
``2**b - 1`` symbols.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DomainError, ProtocolViolation
from .round1 import CoarseEstimate

GROUPING_METHODS = ("wraparound", "greedy")


@dataclass(frozen=True)
class PiWeights:
    pi_hat: np.ndarray
    q: float


@dataclass(frozen=True, eq=False)
class GroupPlan:
    """Group sizes plus a membership table.

    ``members[i]`` lists, in ascending order, the 1-based groups that client
    ``client_ids[i]`` belongs to; unused slots hold 0 and trail the row.
    """

    sizes: np.ndarray
    client_ids: np.ndarray
    members: np.ndarray
    b: int

    @property
    def d(self) -> int:
        return int(self.sizes.size)

    @property
    def capacity(self) -> int:
        return 2**self.b - 1

    @property
    def membership_counts(self) -> np.ndarray:
        return np.count_nonzero(self.members, axis=1)

    @property
    def groups(self) -> list[np.ndarray]:
        """Client ids of each group ``G_j`` (list index ``j - 1``)."""
        rows, _ = np.nonzero(self.members)
        labels = self.members[self.members > 0]
        order = np.argsort(labels, kind="stable")
        split = np.cumsum(np.bincount(labels, minlength=self.d + 1)[1:])[:-1]
        return np.split(self.client_ids[rows[order]], split)

    def memberships(self) -> list[list[int]]:
        return [[int(g) for g in row if g] for row in self.members]

    def summary(self) -> dict:
        slots = self.client_ids.size * self.capacity
        return {
            "sizes": [int(s) for s in self.sizes],
            "max_membership": int(self.membership_counts.max(initial=0)),
            "capacity_used": float(self.sizes.sum() / slots) if slots else 0.0,
        }


def pi_exponent(q: float) -> float:
    """Exponent applied to the coarse estimate under the ``l_q`` loss."""
    return q / (q + 2.0)


def pi_map(p_hat, q: float = 2.0) -> PiWeights:
    if not 1 <= q <= 2:
        raise DomainError(f"loss order must lie in [1, 2], got {q!r}")
    if isinstance(p_hat, CoarseEstimate):
        p_hat = p_hat.p_hat
    v = np.clip(np.asarray(p_hat, dtype=np.float64), 0.0, None) ** pi_exponent(q)
    total = v.sum()
    if total <= 0:
        return PiWeights(np.full(v.size, 1.0 / v.size), q)
    return PiWeights(v / total, q)


def allocate(pi: PiWeights, n: int, d: int, b: int) -> np.ndarray:
    """Group sizes for the ``n // 2`` second-round clients out of ``n``.

    Each size is the floor of ``(n/2) min(1, (2^b-1)(pi_j/4 + 1/(4d)))``,
    raised to at least one.
    """
    pi_hat = pi.pi_hat if isinstance(pi, PiWeights) else np.asarray(pi, dtype=np.float64)
    if pi_hat.size != d:
        raise ConfigurationError(f"weights have {pi_hat.size} entries for d={d}")
    if b < 1:
        raise ConfigurationError(f"need at least one bit per message, got b={b}")
    half = n // 2
    if half < 1:
        raise ConfigurationError(f"n={n} leaves no clients for the second round")
    cap = 2**b - 1
    share = np.minimum(1.0, cap * (pi_hat / 4.0 + 1.0 / (4.0 * d)))
    # The tiny offset keeps exact products such as 225.0 from flooring to 224.
    sizes = np.maximum(1, np.floor(half * share + 1e-9)).astype(np.int64)
    if sizes.sum() > half * cap or sizes.max() > half:
        raise ConfigurationError(
            f"allocation needs {int(sizes.sum())} slots but {half} clients offer "
            f"{half * cap}; increase n"
        )
    return sizes


def gen_groups(sizes, client_ids, b: int, method: str = "wraparound") -> GroupPlan:
    """Assign clients to overlapping groups with exactly ``sizes[j]`` members.

    ``wraparound`` lays the groups end to end over a ``(2^b-1) x N`` grid of
    client slots filled column by column; a group never wraps onto the same
    client twice because no size exceeds ``N``. ``greedy`` hands each client,
    in id order, to the unfilled groups with the largest remaining deficit.
    Both are deterministic and produce plans meeting the same contract.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    client_ids = np.asarray(client_ids, dtype=np.int64)
    n_clients = client_ids.size
    cap = 2**b - 1
    if sizes.ndim != 1 or sizes.size == 0:
        raise ConfigurationError("need a nonempty vector of group sizes")
    if (sizes < 0).any():
        raise ConfigurationError("group sizes must be nonnegative")
    if sizes.sum() > n_clients * cap:
        raise ConfigurationError(
            f"infeasible: sum of sizes {int(sizes.sum())} > clients * (2^b - 1) = {n_clients * cap}"
        )
    if sizes.max() > n_clients:
        raise ConfigurationError(
            f"infeasible: largest group {int(sizes.max())} > number of clients {n_clients}"
        )
    if method == "wraparound":
        members = _wraparound(sizes, n_clients, cap)
    elif method == "greedy":
        members = _greedy(sizes, n_clients, cap)
    else:
        raise ConfigurationError(f"unknown grouping method {method!r}; expected {GROUPING_METHODS}")
    return GroupPlan(sizes=sizes, client_ids=client_ids, members=members, b=b)


def _wraparound(sizes, n_clients, cap):
    total = int(sizes.sum())
    members = np.zeros((n_clients, cap), dtype=np.int64)
    labels = np.repeat(np.arange(1, sizes.size + 1, dtype=np.int64), sizes)
    slot = np.arange(total, dtype=np.int64)
    # Slot s sits at client s mod N, layer s div N; rows come out ascending.
    members[slot % n_clients, slot // n_clients] = labels
    return members


def _greedy(sizes, n_clients, cap):
    order = np.argsort(-sizes, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    heap = [(-int(sizes[j]), int(rank[j]), int(j)) for j in range(sizes.size) if sizes[j] > 0]
    heapq.heapify(heap)
    members = np.zeros((n_clients, cap), dtype=np.int64)
    for i in range(n_clients):
        if not heap:
            break
        picked = [heapq.heappop(heap) for _ in range(min(cap, len(heap)))]
        members[i, : len(picked)] = sorted(j + 1 for _, _, j in picked)
        for deficit, r, j in picked:
            if deficit + 1 < 0:
                heapq.heappush(heap, (deficit + 1, r, j))
    return members


def check_group_plan(plan: GroupPlan) -> list[str]:
    """Contract violations of ``plan``; empty when it is valid."""
    problems = []
    m = plan.members
    if (m < 0).any() or (m > plan.d).any():
        problems.append("membership table references a nonexistent group")
        return problems
    counts = np.bincount(m[m > 0], minlength=plan.d + 1)[1:]
    for j in np.flatnonzero(counts != plan.sizes):
        problems.append(f"group {j + 1} has {counts[j]} members, expected {plan.sizes[j]}")
    nonzero = m > 0
    # Filled slots must precede empty ones and be strictly increasing,
    # which also rules out a client appearing twice in one group.
    if (nonzero[:, 1:] & ~nonzero[:, :-1]).any():
        problems.append("membership rows have gaps")
    both = nonzero[:, 1:] & nonzero[:, :-1]
    for i in np.flatnonzero((both & (m[:, 1:] <= m[:, :-1])).any(axis=1)):
        problems.append(f"client {plan.client_ids[i]} membership list not strictly ascending")
    if m.shape[1] > plan.capacity:
        over = np.flatnonzero(plan.membership_counts > plan.capacity)
        for i in over:
            problems.append(f"client {plan.client_ids[i]} is in more than {plan.capacity} groups")
    if np.unique(plan.client_ids).size != plan.client_ids.size:
        problems.append("duplicate client ids")
    return problems


def r2_encode(x: int, memberships) -> int:
    """1-based position of ``x`` in the ascending membership list, else 0."""
    for pos, j in enumerate(sorted(memberships), start=1):
        if j == x:
            return pos
    return 0


def r2_encode_batch(samples, plan: GroupPlan) -> np.ndarray:
    x = np.asarray(samples, dtype=np.int64)
    if x.shape != (plan.client_ids.size,):
        raise ConfigurationError(f"expected {plan.client_ids.size} samples, got shape {x.shape}")
    hit = plan.members == x[:, None]
    return np.where(hit.any(axis=1), hit.argmax(axis=1) + 1, 0).astype(np.int64)


def r2_decode(messages, plan: GroupPlan) -> np.ndarray:
    """Symbol reported by each client, 0 for silent clients."""
    msg = np.asarray(messages, dtype=np.int64)
    if msg.shape != (plan.client_ids.size,):
        raise ProtocolViolation(f"expected {plan.client_ids.size} messages, got shape {msg.shape}")
    bad = np.flatnonzero((msg < 0) | (msg >= 2**plan.b) | (msg > plan.membership_counts))
    if bad.size:
        i = int(bad[0])
        raise ProtocolViolation(
            f"client {plan.client_ids[i]} sent {msg[i]} but belongs to "
            f"{plan.membership_counts[i]} groups"
        )
    rows = np.flatnonzero(msg)
    symbols = np.zeros(msg.size, dtype=np.int64)
    symbols[rows] = plan.members[rows, msg[rows] - 1]
    return symbols


def r2_estimate(messages, plan: GroupPlan) -> np.ndarray:
    symbols = r2_decode(messages, plan)
    hits = np.bincount(symbols, minlength=plan.d + 1)[1:].astype(np.float64)
    return np.divide(hits, plan.sizes, out=np.zeros(plan.d), where=plan.sizes > 0)
