"""End-to-end simulation of the two schemes under the b-bit message budget.

The localize-and-refine scheme is a round barrier: the first half of the
clients run uniform grouping, the server turns their messages into a group
plan, and the second half report under that plan. Neither scheme uses
shared randomness, so given the client samples a run is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import Distribution, sample
from .exceptions import ConfigurationError, DomainError
from .losses import estimation_losses
from .round1 import (
    CoarseEstimate,
    build_round1_plan,
    clamp_renormalize,
    r1_encode_batch,
    r1_estimate,
)
from .round2 import (
    GroupPlan,
    allocate,
    check_group_plan,
    gen_groups,
    pi_map,
    r2_encode_batch,
    r2_estimate,
)

SCHEMES = ("minimax", "localize_refine")
_ALIASES = {"lr": "localize_refine", "localize-refine": "localize_refine"}
_MAX_LISTED = 20


@dataclass(frozen=True)
class SchemeConfig:
    n: int
    d: int
    b: int = 2
    q: float = 2.0
    seed: int = 0
    renormalize: bool = False

    def __post_init__(self):
        if self.n < 0:
            raise ConfigurationError(f"n must be nonnegative, got {self.n}")
        if self.d < 1:
            raise ConfigurationError(f"d must be positive, got {self.d}")
        if self.b < 1:
            raise ConfigurationError(f"b must be at least 1, got {self.b}")
        if not 1 <= self.q <= 2:
            raise DomainError(f"loss order q must lie in [1, 2], got {self.q!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    @property
    def num_round1_groups(self) -> int:
        return -(-self.d // (2**self.b - 1))

    @property
    def round1_clients(self) -> int:
        return self.n - self.n // 2

    @property
    def round2_clients(self) -> int:
        return self.n // 2

    def check(self, scheme: str = "localize_refine") -> None:
        m = self.num_round1_groups
        need = m if scheme == "minimax" else 2 * m
        if self.n < need:
            raise ConfigurationError(
                f"n={self.n} is too small: {scheme} needs at least {need} clients "
                f"for {m} first-round groups"
            )


@dataclass(frozen=True, eq=False)
class Transcript:
    scheme: str
    bits_per_message: int
    round1_messages: np.ndarray
    round1_groups: np.ndarray
    round2_messages: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    round2_plan: GroupPlan | None = None
    grouping: str = "wraparound"

    @property
    def num_messages(self) -> int:
        return int(self.round1_messages.size + self.round2_messages.size)

    @property
    def total_bits(self) -> int:
        return self.num_messages * self.bits_per_message


@dataclass(frozen=True, eq=False)
class EstimationResult:
    scheme: str
    config: SchemeConfig
    p_check: np.ndarray
    p_hat: CoarseEstimate
    losses: dict
    transcript: Transcript = field(repr=False)

    @property
    def transcript_stats(self) -> dict:
        return {
            "messages": self.transcript.num_messages,
            "total_bits": self.transcript.total_bits,
        }

    @property
    def estimate(self) -> np.ndarray:
        """The final estimate, projected onto the simplex if configured."""
        if self.config.renormalize:
            return clamp_renormalize(self.p_check)
        return self.p_check

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "scheme": self.scheme,
            "n": cfg.n,
            "d": cfg.d,
            "b": cfg.b,
            "q": cfg.q,
            "seed": cfg.seed,
            "l1": self.losses["l1"],
            "l2": self.losses["l2"],
            "lq": self.losses["lq"],
            "total_bits": self.transcript.total_bits,
        }


def canonical_scheme(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {name!r}; expected one of {SCHEMES}")
    return name


def plan_from_round1(round1_messages, cfg: SchemeConfig, grouping: str = "wraparound"):
    """Server step between the rounds; depends on round-1 messages only."""
    r1_plan = build_round1_plan(cfg.round1_clients, cfg.d, cfg.b)
    p_hat = r1_estimate(round1_messages, r1_plan)
    sizes = allocate(pi_map(p_hat, cfg.q), cfg.n, cfg.d, cfg.b)
    client_ids = np.arange(cfg.round1_clients + 1, cfg.n + 1, dtype=np.int64)
    return p_hat, gen_groups(sizes, client_ids, cfg.b, method=grouping)


def simulate_localize_refine(samples, cfg: SchemeConfig, grouping: str = "wraparound"):
    """Run both rounds on given 1-based client samples.

    Returns ``(p_check, p_hat, transcript)``.
    """
    cfg.check("localize_refine")
    x = np.asarray(samples, dtype=np.int64)
    if x.shape != (cfg.n,):
        raise ConfigurationError(f"expected {cfg.n} samples, got shape {x.shape}")
    n1 = cfg.round1_clients
    r1_plan = build_round1_plan(n1, cfg.d, cfg.b)
    msg1 = r1_encode_batch(x[:n1], r1_plan)
    p_hat, plan = plan_from_round1(msg1, cfg, grouping)
    msg2 = r2_encode_batch(x[n1:], plan)
    p_check = r2_estimate(msg2, plan)
    transcript = Transcript(
        scheme="localize_refine",
        bits_per_message=cfg.b,
        round1_messages=msg1,
        round1_groups=r1_plan.client_group,
        round2_messages=msg2,
        round2_plan=plan,
        grouping=grouping,
    )
    return p_check, p_hat, transcript


def simulate_minimax(samples, cfg: SchemeConfig):
    """Uniform grouping over every client; returns ``(p_hat, transcript)``."""
    cfg.check("minimax")
    x = np.asarray(samples, dtype=np.int64)
    plan = build_round1_plan(cfg.n, cfg.d, cfg.b)
    msg = r1_encode_batch(x, plan)
    transcript = Transcript(
        scheme="minimax",
        bits_per_message=cfg.b,
        round1_messages=msg,
        round1_groups=plan.client_group,
    )
    return r1_estimate(msg, plan), transcript


def run_localize_refine(p: Distribution, cfg: SchemeConfig, rng=None) -> EstimationResult:
    _check_alphabet(p, cfg)
    cfg.check("localize_refine")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    p_check, p_hat, transcript = simulate_localize_refine(sample(p, cfg.n, rng), cfg)
    return EstimationResult(
        scheme="localize_refine",
        config=cfg,
        p_check=p_check,
        p_hat=p_hat,
        losses=estimation_losses(p_check, p.probs, cfg.q),
        transcript=transcript,
    )


def run_scheme(scheme: str, p: Distribution, cfg: SchemeConfig, rng=None) -> EstimationResult:
    scheme = canonical_scheme(scheme)
    if scheme == "localize_refine":
        return run_localize_refine(p, cfg, rng)
    _check_alphabet(p, cfg)
    cfg.check("minimax")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    # Same draw order as round1.run_minimax_baseline, so results coincide.
    p_hat, transcript = simulate_minimax(sample(p, cfg.n, rng), cfg)
    return EstimationResult(
        scheme="minimax",
        config=cfg,
        p_check=p_hat.p_hat,
        p_hat=p_hat,
        losses=estimation_losses(p_hat.p_hat, p.probs, cfg.q),
        transcript=transcript,
    )


def verify_transcript(t: Transcript, cfg: SchemeConfig) -> list[str]:
    """Every way ``t`` breaks the message-budget, count or causality contract."""
    violations = []
    limit = 2**cfg.b
    if t.bits_per_message != cfg.b:
        violations.append(f"bits per message {t.bits_per_message} != configured b={cfg.b}")
    m = cfg.num_round1_groups
    need = m if t.scheme == "minimax" else 2 * m
    if t.num_messages != cfg.n:
        violations.append(f"message count mismatch: {t.num_messages} messages for n={cfg.n}")
    elif t.num_messages < need:
        violations.append(
            f"message count mismatch: {t.num_messages} messages, {t.scheme} needs at least {need}"
        )
    n1 = t.round1_messages.size
    for rnd, msgs, first_id in ((1, t.round1_messages, 1), (2, t.round2_messages, n1 + 1)):
        msgs = np.asarray(msgs)
        bad = np.flatnonzero((msgs < 0) | (msgs >= limit))
        for i in bad[:_MAX_LISTED]:
            violations.append(
                f"round {rnd} client {first_id + i} sent {msgs[i]}, outside [0, {limit})"
            )
        if bad.size > _MAX_LISTED:
            violations.append(f"round {rnd}: {bad.size - _MAX_LISTED} more out-of-range messages")
    if t.round1_groups.size != n1:
        violations.append("round-1 group assignments do not match the message count")
    if t.scheme == "localize_refine":
        violations.extend(_check_refinement(t, cfg))
    elif t.round2_messages.size or t.round2_plan is not None:
        violations.append("minimax transcript carries second-round traffic")
    return violations


def _check_refinement(t: Transcript, cfg: SchemeConfig) -> list[str]:
    problems = []
    plan = t.round2_plan
    if plan is None:
        return ["localize_refine transcript has no second-round plan"]
    if t.round1_messages.size != cfg.round1_clients or t.round2_messages.size != cfg.round2_clients:
        problems.append("round split differs from the configured n - n//2 / n//2")
        return problems
    problems.extend(check_group_plan(plan))
    over = np.flatnonzero(np.asarray(t.round2_messages) > plan.membership_counts)
    for i in over[:_MAX_LISTED]:
        problems.append(f"client {plan.client_ids[i]} reported a rank beyond its membership list")
    try:
        _, rebuilt = plan_from_round1(t.round1_messages, cfg, t.grouping)
    except ValueError as exc:
        problems.append(f"causality: plan cannot be rebuilt from round-1 messages ({exc})")
        return problems
    if not (
        np.array_equal(rebuilt.sizes, plan.sizes)
        and np.array_equal(rebuilt.members, plan.members)
        and np.array_equal(rebuilt.client_ids, plan.client_ids)
    ):
        problems.append("causality: second-round plan is not a function of round-1 messages")
    return problems


def _check_alphabet(p: Distribution, cfg: SchemeConfig):
    if p.d != cfg.d:
        raise ConfigurationError(f"config d={cfg.d} but the distribution has {p.d} symbols")
