"""Discrete memoryless channels, information measures and builtin families.

All logarithms are base 2 and 0 log 0 = 0. Channels are stored as
row-stochastic ``|X| x |Y|`` matrices; a family shares the input alphabet
but each member may have its own output alphabet.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence
from urllib.parse import parse_qsl

import numpy as np
from scipy.optimize import minimize
from scipy.special import entr

from .errors import (
    DegenerateChannel,
    InvalidChannel,
    MismatchedInputAlphabet,
    NoConvergence,
    NonStochasticRow,
    ParameterOutOfRange,
    UnknownFamily,
)

ROW_TOL = 1e-9
CAPACITY_FLOOR = 1e-6
BA_TOL = 1e-9
BA_MAX_ITERS = 10_000
BA_POLISH_EVERY = 200
_LOG2E = 1.0 / math.log(2.0)

# Both sentinels share one value so threshold comparisons stay monotone.
NEG_SENTINEL = -1e18
HYPOTHESIS_REJECT = -1e18

_LN2 = math.log(2.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Channel:
    """A DMC given by its transition matrix ``W[x, y] = W(y|x)``."""

    name: str
    matrix: np.ndarray

    def __post_init__(self) -> None:
        W = np.asarray(self.matrix, dtype=float)
        if W.ndim != 2 or W.shape[1] < 1:
            raise InvalidChannel(f"channel {self.name!r}: matrix must be 2-D, got shape {W.shape}")
        if W.shape[0] < 2:
            raise InvalidChannel(f"channel {self.name!r}: needs at least 2 inputs")
        if not np.all(np.isfinite(W)) or W.min() < 0 or W.max() > 1:
            raise InvalidChannel(f"channel {self.name!r}: entries must lie in [0, 1]")
        sums = W.sum(axis=1)
        for row, total in enumerate(sums):
            if abs(total - 1.0) > ROW_TOL:
                raise NonStochasticRow(self.name, row, float(total))
        object.__setattr__(self, "matrix", _frozen(W))

    @property
    def num_inputs(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.matrix.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Channel):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.matrix, other.matrix)

    def __hash__(self) -> int:
        return hash((self.name, self.matrix.tobytes()))


def as_distribution(p: Sequence[float] | np.ndarray, size: int | None = None) -> np.ndarray:
    """Validate ``p`` as a probability vector (optionally of length ``size``)."""
    q = np.asarray(p, dtype=float)
    if q.ndim != 1:
        raise ParameterOutOfRange("input distribution must be a 1-D vector")
    if size is not None and q.shape[0] != size:
        raise ParameterOutOfRange(f"input distribution has length {q.shape[0]}, expected {size}")
    if not np.all(np.isfinite(q)) or q.min() < 0:
        raise ParameterOutOfRange("input distribution has negative or non-finite entries")
    if abs(q.sum() - 1.0) > ROW_TOL:
        raise ParameterOutOfRange(f"input distribution sums to {q.sum()!r}")
    return q


def _matrix(ch: Channel | np.ndarray) -> np.ndarray:
    return ch.matrix if isinstance(ch, Channel) else np.asarray(ch, dtype=float)


def row_entropies(W: np.ndarray) -> np.ndarray:
    """H(Y | X = x) in bits for every input row."""
    return entr(W).sum(axis=-1) / _LN2


def mutual_information_batch(W: np.ndarray, P: np.ndarray, h_rows: np.ndarray | None = None) -> np.ndarray:
    """I(X;Y) for each row of ``P`` (shape ``(..., |X|)``) through channel ``W``."""
    if h_rows is None:
        h_rows = row_entropies(W)
    Q = P @ W
    mi = entr(Q).sum(axis=-1) / _LN2 - P @ h_rows
    return np.maximum(mi, 0.0)


def mutual_information(ch: Channel | np.ndarray, p: Sequence[float] | np.ndarray) -> float:
    """I(X;Y) in bits when ``X ~ p`` is sent over ``ch``."""
    W = _matrix(ch)
    p = as_distribution(p, W.shape[0])
    return float(mutual_information_batch(W, p))


def output_marginal(ch: Channel | np.ndarray, p: Sequence[float] | np.ndarray) -> np.ndarray:
    W = _matrix(ch)
    return as_distribution(p, W.shape[0]) @ W


def info_density(ch: Channel | np.ndarray, p: Sequence[float] | np.ndarray, x: int, y: int) -> float:
    """log2 W(y|x)/q(y), with sentinels for impossible pairs.

    Returns NEG_SENTINEL when W(y|x) = 0 and HYPOTHESIS_REJECT when the
    output y has probability zero under ``p``.
    """
    W = _matrix(ch)
    q = output_marginal(W, p)
    w = W[x, y]
    if w == 0:
        return NEG_SENTINEL
    if q[y] == 0:
        return HYPOTHESIS_REJECT
    return math.log2(w / q[y])


def density_table(W: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Information densities for all (x, y) plus a mask of rejected outputs.

    Returns ``(dens, rejected)`` where ``dens[x, y]`` is the per-symbol
    density (NEG_SENTINEL where W(y|x) = 0) and ``rejected[y]`` marks
    outputs with q(y) = 0.
    """
    q = p @ W
    rejected = q <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.log2(W) - np.log2(np.where(rejected, 1.0, q))
    dens = np.where(W > 0, dens, NEG_SENTINEL)
    dens[:, rejected] = HYPOTHESIS_REJECT
    return dens, rejected


def _divergences(W: np.ndarray, q: np.ndarray) -> np.ndarray:
    # D(W(.|x) || q) for every x; q(y) = 0 with W(y|x) > 0 gives +inf.
    with np.errstate(divide="ignore"):
        logq = np.log2(q)
        logw = np.log2(np.where(W > 0, W, 1.0))
    with np.errstate(invalid="ignore"):
        terms = np.where(W > 0, W * (logw - logq), 0.0)
    return terms.sum(axis=1)


def _polish_capacity(W: np.ndarray, p: np.ndarray) -> np.ndarray:
    # Direct maximization of I(p); dI/dp(x) = D(W_x||q) - log2(e).
    def neg_info(v: np.ndarray) -> tuple[float, np.ndarray]:
        v = np.clip(v, 0.0, None)
        D = _divergences(W, v @ W)
        D = np.where(np.isfinite(D), D, 1e3)
        return -float(v @ D), -(D - _LOG2E)

    res = minimize(
        neg_info,
        p,
        jac=True,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * len(p),
        constraints=[{"type": "eq", "fun": lambda v: v.sum() - 1.0, "jac": lambda v: np.ones_like(v)}],
        options={"ftol": 1e-16, "maxiter": 500},
    )
    q = np.clip(res.x, 0.0, None)
    return q / q.sum()


def capacity_ba(
    ch: Channel | np.ndarray, tol: float = BA_TOL, max_iters: int = BA_MAX_ITERS
) -> tuple[float, np.ndarray]:
    """Channel capacity by Blahut-Arimoto from the uniform input.

    Iterates until ``max_x D(W_x||q) - sum_x p(x) D(W_x||q) < tol``; the
    returned value is I(p*) for the returned p*, so it lies within ``tol``
    of the true capacity. Every ``BA_POLISH_EVERY`` iterations a direct
    SLSQP step is tried from the current iterate and kept if it raises
    I(p); this rescues the slow tail near boundary optima.
    """
    if tol <= 0:
        raise ParameterOutOfRange("tol must be positive")
    W = _matrix(ch)
    n = W.shape[0]
    p = np.full(n, 1.0 / n)
    gap = math.inf
    for it in range(max_iters):
        D = _divergences(W, p @ W)
        avg = float(p @ D)
        top = float(D.max())
        gap = top - avg
        if gap < tol:
            return max(avg, 0.0), p
        if it and it % BA_POLISH_EVERY == 0:
            cand = _polish_capacity(W, p)
            if cand @ _divergences(W, cand @ W) >= avg:
                p = cand
                continue
        p = p * np.exp2(D - top)
        p /= p.sum()
    raise NoConvergence(max_iters, gap)


def binary_entropy(q: float) -> float:
    if q <= 0 or q >= 1:
        return 0.0
    return -q * math.log2(q) - (1 - q) * math.log2(1 - q)


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelFamily:
    """Channels sharing one input alphabet, with their capacities.

    ``input_blocks`` optionally lists groups of inputs that the family
    treats symmetrically; it is only used to seed searches.
    """

    channels: tuple[Channel, ...]
    capacities: tuple[float, ...]
    t_star: tuple[float, ...]
    capacity_dists: tuple[np.ndarray, ...]
    name: str = "family"
    params: dict[str, Any] = field(default_factory=dict)
    input_blocks: tuple[tuple[int, ...], ...] | None = None

    @classmethod
    def from_channels(
        cls,
        channels: Iterable[Channel],
        name: str = "family",
        params: dict[str, Any] | None = None,
        input_blocks: Sequence[Sequence[int]] | None = None,
        tol: float = BA_TOL,
        max_iters: int = BA_MAX_ITERS,
    ) -> "ChannelFamily":
        channels = tuple(channels)
        if not channels:
            raise InvalidChannel("a family needs at least one channel")
        n = channels[0].num_inputs
        for ch in channels[1:]:
            if ch.num_inputs != n:
                raise MismatchedInputAlphabet(
                    f"channel {ch.name!r} has {ch.num_inputs} inputs, expected {n}"
                )
        caps, dists = [], []
        for ch in channels:
            c, p = capacity_ba(ch, tol, max_iters)
            if c <= CAPACITY_FLOOR:
                raise DegenerateChannel(ch.name, c)
            caps.append(c)
            dists.append(_frozen(p))
        blocks = None
        if input_blocks is not None:
            blocks = tuple(tuple(int(i) for i in b) for b in input_blocks)
        return cls(
            channels=channels,
            capacities=tuple(caps),
            t_star=tuple(1.0 / c for c in caps),
            capacity_dists=tuple(dists),
            name=name,
            params=dict(params or {}),
            input_blocks=blocks,
        )

    @property
    def size(self) -> int:
        return len(self.channels)

    @property
    def num_inputs(self) -> int:
        return self.channels[0].num_inputs

    @property
    def matrices(self) -> list[np.ndarray]:
        return [ch.matrix for ch in self.channels]

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_alphabet": self.num_inputs,
            "channels": [
                {"name": ch.name, "outputs": ch.num_outputs, "matrix": ch.matrix.tolist()}
                for ch in self.channels
            ],
        }


def validate_family(raw: dict[str, Any], name: str = "family") -> ChannelFamily:
    """Build a family from the JSON document layout.

    ``{"input_alphabet": n, "channels": [{"name", "outputs", "matrix"}]}``
    """
    if not isinstance(raw, dict) or "channels" not in raw:
        raise InvalidChannel("family description needs a 'channels' list")
    entries = raw["channels"]
    if not isinstance(entries, list) or not entries:
        raise InvalidChannel("family description has no channels")
    n = raw.get("input_alphabet")
    channels = []
    for idx, entry in enumerate(entries):
        ch_name = str(entry.get("name", f"ch{idx}"))
        try:
            W = np.array(entry["matrix"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidChannel(f"channel {ch_name!r}: unreadable matrix ({exc})") from None
        if W.ndim != 2:
            raise InvalidChannel(f"channel {ch_name!r}: matrix must be a list of rows")
        if n is not None and W.shape[0] != int(n):
            raise MismatchedInputAlphabet(
                f"channel {ch_name!r} has {W.shape[0]} rows, input_alphabet is {n}"
            )
        m = entry.get("outputs")
        if m is not None and W.shape[1] != int(m):
            raise InvalidChannel(
                f"channel {ch_name!r} has {W.shape[1]} columns, outputs is {m}"
            )
        channels.append(Channel(ch_name, W))
    return ChannelFamily.from_channels(channels, name=name)


def load_family(path: str | Path) -> ChannelFamily:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        raw = json.load(fh)
    return validate_family(raw, name=path.stem)


# ---------------------------------------------------------------------------
# Builtin channels and families
# ---------------------------------------------------------------------------


def bsc(q: float, name: str | None = None) -> Channel:
    return Channel(name or f"bsc({q:g})", [[1 - q, q], [q, 1 - q]])


def bec(e: float, name: str | None = None) -> Channel:
    return Channel(name or f"bec({e:g})", [[1 - e, 0.0, e], [0.0, 1 - e, e]])


def z_channel(z: float, name: str | None = None) -> Channel:
    return Channel(name or f"z({z:g})", [[1.0, 0.0], [z, 1 - z]])


def s_channel(s: float, name: str | None = None) -> Channel:
    return Channel(name or f"s({s:g})", [[1 - s, s], [0.0, 1.0]])


def _bilingual_channels(w1: int, w2: int) -> tuple[Channel, Channel]:
    n = w1 + w2
    W1 = np.zeros((n, n))
    W2 = np.zeros((n, n))
    for x in range(w1):
        W1[x, x] = 1.0
        W2[x, :w1] = 1.0 / w1
    for x in range(w1, n):
        W1[x, w1:] = 1.0 / w2
        W2[x, x] = 1.0
    return Channel("language1", W1), Channel("language2", W2)


def _bilingual_erasure_channels(eps: float) -> tuple[Channel, Channel]:
    # Wrong-language inputs land uniformly on the receiver's own block.
    W1 = np.zeros((4, 5))
    W2 = np.zeros((4, 4))
    for x in (0, 1):
        W1[x, x] = eps
        W2[x, 2:4] = 0.5
    for x in (2, 3):
        W1[x, 0:2] = eps / 2
        W2[x, x] = 1.0
    W1[:, 4] = 1 - eps
    return Channel("erasure_language1", W1), Channel("language2", W2)


def _open_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0 < value < 1:
        raise ParameterOutOfRange(f"{name}={value} must lie in (0, 1)")
    return value


def _positive_int(name: str, value: Any) -> int:
    try:
        iv = int(value)
    except (TypeError, ValueError):
        raise ParameterOutOfRange(f"{name}={value!r} must be a positive integer") from None
    if iv != float(value) or iv < 1:
        raise ParameterOutOfRange(f"{name}={value!r} must be a positive integer")
    return iv


BUILTIN_FAMILIES = ("zs", "bilingual", "bilingual_erasure", "bsc_pair")


def builtin_family(name: str, **params: Any) -> ChannelFamily:
    """Construct one of the named example families.

    ``zs(z, s)``, ``bilingual(W1, W2)``, ``bilingual_erasure(eps)`` and
    ``bsc_pair(q1, q2)``.
    """
    if name == "zs":
        z = _open_unit("z", params.get("z", 0.2))
        s = _open_unit("s", params.get("s", 0.2))
        chans = (z_channel(z, "Z"), s_channel(s, "S"))
        return ChannelFamily.from_channels(chans, name="zs", params={"z": z, "s": s})
    if name == "bilingual":
        w1 = _positive_int("W1", params.get("W1", 31))
        w2 = _positive_int("W2", params.get("W2", 2))
        blocks = (tuple(range(w1)), tuple(range(w1, w1 + w2)))
        return ChannelFamily.from_channels(
            _bilingual_channels(w1, w2),
            name="bilingual",
            params={"W1": w1, "W2": w2},
            input_blocks=blocks,
        )
    if name == "bilingual_erasure":
        eps = _open_unit("eps", params.get("eps", 0.5))
        return ChannelFamily.from_channels(
            _bilingual_erasure_channels(eps),
            name="bilingual_erasure",
            params={"eps": eps},
            input_blocks=((0, 1), (2, 3)),
        )
    if name == "bsc_pair":
        q1 = _open_unit("q1", params.get("q1", 0.1))
        q2 = _open_unit("q2", params.get("q2", 0.2))
        return ChannelFamily.from_channels(
            (bsc(q1, "bsc1"), bsc(q2, "bsc2")), name="bsc_pair", params={"q1": q1, "q2": q2}
        )
    raise UnknownFamily(f"unknown builtin family {name!r}; choose from {', '.join(BUILTIN_FAMILIES)}")


def parse_builtin(uri: str) -> tuple[str, dict[str, str]]:
    """Split ``builtin:<name>?a=1&b=2`` into name and raw parameters."""
    body = uri[len("builtin:"):] if uri.startswith("builtin:") else uri
    name, _, query = body.partition("?")
    params = dict(parse_qsl(query, keep_blank_values=True))
    return name, params


def resolve_family(spec: str) -> ChannelFamily:
    """Load a family from a ``builtin:`` URI or a JSON file path."""
    if spec.startswith("builtin:"):
        name, raw = parse_builtin(spec)
        params: dict[str, Any] = {}
        for key, value in raw.items():
            try:
                params[key] = float(value)
            except ValueError:
                raise ParameterOutOfRange(f"parameter {key}={value!r} is not a number") from None
        return builtin_family(name, **params)
    return load_family(spec)


def block_masses(fam: ChannelFamily, p: Sequence[float] | np.ndarray) -> np.ndarray:
    """Total probability that ``p`` puts on each of the family's input blocks."""
    if fam.input_blocks is None:
        raise ParameterOutOfRange(f"family {fam.name!r} declares no input blocks")
    p = np.asarray(p, dtype=float)
    return np.array([p[list(b)].sum() for b in fam.input_blocks])


def block_distribution(fam: ChannelFamily, masses: Sequence[float]) -> np.ndarray:
    """Spread block masses uniformly over the inputs of each block."""
    if fam.input_blocks is None:
        raise ParameterOutOfRange(f"family {fam.name!r} declares no input blocks")
    p = np.zeros(fam.num_inputs)
    for mass, block in zip(masses, fam.input_blocks):
        p[list(block)] = mass / len(block)
    return p
