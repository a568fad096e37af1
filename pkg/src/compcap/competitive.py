"""Decoding-time profiles, competitive ratio and regret for fixed schedules.

A schedule is an ordered list of input distributions ``p_1..p_|S|``; the
code uses ``p_i`` during the ``i``-th phase. Phase ``i`` ends when the
``i``-th channel of the decoding order has accumulated one unit of
(normalized) information. Times are normalized by the message length, so
the clairvoyant decoding time of channel ``s`` is ``1 / C_s``.

State indices are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .channels import ChannelFamily, as_distribution, mutual_information_batch, row_entropies
from .errors import CompCapError, LengthMismatch, NonpositiveRate, WrongFamilySize

MI_FLOOR = 1e-12
INF = math.inf


def _encode(x: float) -> float | str:
    return "inf" if x == INF else x


def _decode(x: Any) -> float:
    return INF if x == "inf" else float(x)


@dataclass(frozen=True)
class DecodingProfile:
    """Decoding order, phase increments and per-position CR/regret terms."""

    ordering: tuple[int, ...]
    increments: tuple[float, ...]
    cumulative: tuple[float, ...]
    per_state_cr: tuple[float, ...]
    per_state_regret: tuple[float, ...]
    numerators: tuple[float, ...]
    cr: float
    regret: float

    def decode_times(self) -> np.ndarray:
        """Normalized decoding time indexed by state (not by position)."""
        out = np.empty(len(self.ordering))
        out[list(self.ordering)] = self.cumulative
        return out

    def weighted_cr(self, weights: Sequence[float]) -> float:
        return min(weights[s] * v for s, v in zip(self.ordering, self.per_state_cr))

    def weighted_regret(self, weights: Sequence[float]) -> float:
        return max(weights[s] * v for s, v in zip(self.ordering, self.per_state_regret))

    def to_dict(self) -> dict[str, Any]:
        return {
            "ordering": list(self.ordering),
            "increments": [_encode(v) for v in self.increments],
            "cumulative": [_encode(v) for v in self.cumulative],
            "per_state_cr": list(self.per_state_cr),
            "per_state_regret": list(self.per_state_regret),
            "cr": self.cr,
            "regret": self.regret,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DecodingProfile":
        ordering = tuple(int(s) for s in d["ordering"])
        if sorted(ordering) != list(range(len(ordering))):
            raise CompCapError(f"ordering {ordering} is not a permutation")
        increments = tuple(_decode(v) for v in d["increments"])
        cumulative = tuple(_decode(v) for v in d["cumulative"])
        prof = cls(
            ordering=ordering,
            increments=increments,
            cumulative=cumulative,
            per_state_cr=tuple(float(v) for v in d["per_state_cr"]),
            per_state_regret=tuple(float(v) for v in d["per_state_regret"]),
            numerators=tuple(float(v) for v in d.get("numerators", [math.nan] * len(ordering))),
            cr=float(d["cr"]),
            regret=float(d["regret"]),
        )
        if any(v < 0 for v in increments) or any(b < a for a, b in zip(cumulative, cumulative[1:])):
            raise CompCapError("profile increments must be nonnegative and cumulative times nondecreasing")
        if prof.per_state_cr and abs(min(prof.per_state_cr) - prof.cr) > 1e-12:
            raise CompCapError("profile cr does not match its per-position terms")
        if prof.per_state_regret and abs(max(prof.per_state_regret) - prof.regret) > 1e-12:
            raise CompCapError("profile regret does not match its per-position terms")
        return prof


def as_schedule(fam: ChannelFamily, schedule: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """Validate a schedule against ``fam`` and return it as an ``(|S|, |X|)`` array."""
    P = np.asarray(schedule, dtype=float)
    if P.ndim != 2 or P.shape[0] != fam.size:
        raise LengthMismatch(
            f"schedule must hold {fam.size} distributions, got shape {P.shape}"
        )
    for row in P:
        as_distribution(row, fam.num_inputs)
    return P


def mi_matrix(fam: ChannelFamily, schedule: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """``M[s, j] = I_s(X_j; Y)``; rates below MI_FLOOR are treated as zero."""
    P = as_schedule(fam, schedule)
    M = np.array([mutual_information_batch(W, P) for W in fam.matrices])
    M[M < MI_FLOOR] = 0.0
    return M


def _times(num: float, rate: float) -> float:
    if num <= 0:
        return 0.0
    if rate <= 0:
        return INF
    return num / rate


def _info(duration: float, rate: float) -> float:
    # Information gathered over a phase; an infinite phase at zero rate adds nothing.
    if rate <= 0:
        return 0.0
    return duration * rate


def _walk(M: np.ndarray, capacities: Sequence[float], ordering: Sequence[int] | None) -> DecodingProfile:
    S = len(capacities)
    acc = [0.0] * S
    remaining = list(range(S))
    order, incs, cums, nums = [], [], [], []
    t = 0.0
    for i in range(S):
        if ordering is None:
            chosen, best = remaining[0], INF
            first = True
            for s in remaining:
                d = _times(1.0 - acc[s], M[s][i])
                if first or d < best:
                    chosen, best, first = s, d, False
        else:
            chosen = ordering[i]
            best = _times(1.0 - acc[chosen], M[chosen][i])
        remaining.remove(chosen)
        nums.append(1.0 - acc[chosen])
        t = t + best
        for s in range(S):
            acc[s] += _info(best, M[s][i])
        order.append(chosen)
        incs.append(best)
        cums.append(t)
    per_cr = tuple(0.0 if T == INF else 1.0 / (capacities[s] * T) for s, T in zip(order, cums))
    per_rg = tuple(capacities[s] - (0.0 if T == INF else 1.0 / T) for s, T in zip(order, cums))
    return DecodingProfile(
        ordering=tuple(order),
        increments=tuple(incs),
        cumulative=tuple(cums),
        per_state_cr=per_cr,
        per_state_regret=per_rg,
        numerators=tuple(nums),
        cr=min(per_cr),
        regret=max(per_rg),
    )


def evaluate_with_ordering(
    fam: ChannelFamily, schedule: Sequence[Sequence[float]] | np.ndarray, ordering: Sequence[int]
) -> DecodingProfile:
    """Profile of ``schedule`` when channels decode in the given ``ordering``."""
    ordering = tuple(int(s) for s in ordering)
    if sorted(ordering) != list(range(fam.size)):
        raise LengthMismatch(f"ordering {ordering} is not a permutation of {fam.size} states")
    return _walk(mi_matrix(fam, schedule), fam.capacities, ordering)


def greedy_profile(fam: ChannelFamily, schedule: Sequence[Sequence[float]] | np.ndarray) -> DecodingProfile:
    """Profile under the greedy order: each phase ends with the earliest decoder.

    Ties go to the lowest state index.
    """
    return _walk(mi_matrix(fam, schedule), fam.capacities, None)


def profile_from_mi(M: np.ndarray, capacities: Sequence[float], ordering: Sequence[int] | None = None) -> DecodingProfile:
    return _walk(np.asarray(M, dtype=float), capacities, ordering)


def greedy_decode_times(M: np.ndarray) -> np.ndarray:
    """Vectorized greedy walk.

    ``M`` has shape ``(B, S, S)`` with ``M[b, s, j] = I_s(X_j)`` (already
    floored). Returns decode times of shape ``(B, S)`` indexed by state.
    """
    M = np.asarray(M, dtype=float)
    B, S, _ = M.shape
    acc = np.zeros((B, S))
    T = np.full((B, S), INF)
    remaining = np.ones((B, S), dtype=bool)
    alive = np.ones(B, dtype=bool)
    t = np.zeros(B)
    rows = np.arange(B)
    for i in range(S):
        rate = M[:, :, i]
        num = 1.0 - acc
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(num <= 0, 0.0, np.where(rate > 0, num / rate, INF))
        d = np.where(remaining, d, INF)
        chosen = np.argmin(d, axis=1)
        step = d[rows, chosen]
        # With every remaining wait infinite, argmin may land on a decoded state.
        chosen = np.where(np.isfinite(step), chosen, np.argmax(remaining, axis=1))
        alive &= np.isfinite(step)
        step = np.where(alive, step, 0.0)
        t = t + step
        T[rows, chosen] = np.where(alive, t, INF)
        remaining[rows, chosen] = False
        acc += step[:, None] * rate
    return T


def cr_terms(T: np.ndarray, capacities: Sequence[float], weights: Sequence[float] | None = None) -> np.ndarray:
    """Per-state (weighted) ratios ``w_s T*_s / T_s`` from decode times."""
    C = np.asarray(capacities, dtype=float)
    w = np.ones_like(C) if weights is None else np.asarray(weights, dtype=float)
    with np.errstate(divide="ignore"):
        return w / (C * T)


def regret_terms(T: np.ndarray, capacities: Sequence[float], weights: Sequence[float] | None = None) -> np.ndarray:
    C = np.asarray(capacities, dtype=float)
    r = np.ones_like(C) if weights is None else np.asarray(weights, dtype=float)
    with np.errstate(divide="ignore"):
        return r * (C - 1.0 / T)


# ---------------------------------------------------------------------------
# Two-channel closed forms
# ---------------------------------------------------------------------------


def _two_channel_rates(fam: ChannelFamily, p: Sequence[float]) -> tuple[int, int, float, float]:
    if fam.size != 2:
        raise WrongFamilySize(f"closed form needs exactly 2 channels, family has {fam.size}")
    p = as_distribution(p, fam.num_inputs)
    rates = [float(mutual_information_batch(W, p)) for W in fam.matrices]
    rates = [0.0 if r < MI_FLOOR else r for r in rates]
    first = 0 if rates[0] >= rates[1] else 1
    second = 1 - first
    return first, second, rates[first], rates[second]


def two_channel_cr(fam: ChannelFamily, p: Sequence[float]) -> tuple[float, int]:
    """CR of using ``p`` until the faster channel decodes, then the other's capacity-achieving input.

    Returns ``(cr, first)`` where ``first`` is the state that decodes first.
    """
    first, second, i1, i2 = _two_channel_rates(fam, p)
    if i1 <= 0:
        return 0.0, first
    c1, c2 = fam.capacities[first], fam.capacities[second]
    return min(i1 / c1, i1 / (c2 + i1 - i2)), first


def two_channel_regret(fam: ChannelFamily, p: Sequence[float]) -> tuple[float, int]:
    first, second, i1, i2 = _two_channel_rates(fam, p)
    c1, c2 = fam.capacities[first], fam.capacities[second]
    if i1 <= 0:
        return max(c1, c2), first
    return max(c1 - i1, c2 - c2 * i1 / (c2 + i1 - i2)), first


# ---------------------------------------------------------------------------
# Concatenation of a fixed-blocklength code (unlimited message-length model)
# ---------------------------------------------------------------------------


def _as_fraction(x: Any) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class ConcatSchedule:
    """Phase plan for reusing a prefix-decodable code until every state decodes.

    ``order`` lists states by decreasing rate; ``phase_lengths[l]`` is the
    length of phase ``l`` in that order and ``decode_times[s]`` is indexed
    by the original state.
    """

    order: tuple[int, ...]
    phase_lengths: tuple[Fraction, ...]
    decode_times: tuple[Fraction, ...]
    channel_uses: tuple[int, ...]
    integral: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "order": list(self.order),
            "phase_lengths": [str(v) for v in self.phase_lengths],
            "channel_uses": list(self.channel_uses),
            "decode_times": [str(v) for v in self.decode_times],
            "integral": self.integral,
        }


def concat_schedule(rates: Sequence[Any], k: Any) -> ConcatSchedule:
    """Phase lengths ``k (1/R_l - 1/R_{l-1})`` and decode times ``k / R_s``.

    Arithmetic is exact (``fractions.Fraction``). When a phase length is
    not an integer, ``channel_uses`` rounds it up and ``integral`` is False.
    """
    R = [_as_fraction(r) for r in rates]
    if not R:
        raise NonpositiveRate("at least one rate is required")
    if any(r <= 0 for r in R):
        raise NonpositiveRate(f"rates must be positive, got {[str(r) for r in R]}")
    kk = _as_fraction(k)
    if kk <= 0:
        raise NonpositiveRate("message length k must be positive")
    order = sorted(range(len(R)), key=lambda s: (-R[s], s))
    phases = []
    prev = Fraction(0)
    for s in order:
        inv = 1 / R[s]
        phases.append(kk * (inv - prev))
        prev = inv
    uses = tuple(math.ceil(v) for v in phases)
    return ConcatSchedule(
        order=tuple(order),
        phase_lengths=tuple(phases),
        decode_times=tuple(kk / r for r in R),
        channel_uses=uses,
        integral=all(v.denominator == 1 for v in phases),
    )
