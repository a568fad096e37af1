"""Monte Carlo run of the phase-switched rateless scheme.

Codewords are drawn coordinate-wise: coordinate ``i`` (0-based) uses the
schedule entry of the phase containing ``i/k``, where phase ``j`` covers
``[(1+delta) T_{j-1}, (1+delta) T_j)`` with ``T_j`` the cumulative decoding
time of the ``j``-th decoded state. The decoder keeps one running
information density per (message, hypothesis channel) and stops as soon
as any of them reaches ``k (1 + delta/2)`` bits.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import IO, Any, Mapping, Sequence

import numpy as np

from .channels import NEG_SENTINEL, ChannelFamily, as_distribution, density_table
from .competitive import DecodingProfile, as_schedule, greedy_profile
from .errors import CompCapError, ParameterOutOfRange, ResourceLimit

K_MAX = 16
SYMBOL_BUDGET = 10**8


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters; ``true_channel=None`` runs every state."""

    family: ChannelFamily
    schedule: tuple[tuple[float, ...], ...]
    k: int
    delta: float
    trials: int
    seed: int = 0
    true_channel: int | None = None
    profile: DecodingProfile | None = None
    k_max: int = K_MAX
    symbol_budget: int = SYMBOL_BUDGET

    def __post_init__(self) -> None:
        fam = self.family
        sched = as_schedule(fam, self.schedule)
        object.__setattr__(self, "schedule", tuple(tuple(float(v) for v in p) for p in sched))
        if isinstance(self.k, bool) or not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ParameterOutOfRange(f"k={self.k!r} must be a positive integer")
        if self.k > self.k_max:
            raise ResourceLimit(f"k={self.k} exceeds k_max={self.k_max}")
        if not 0 < self.delta <= 1:
            raise ParameterOutOfRange(f"delta={self.delta} must lie in (0, 1]")
        if self.trials < 1:
            raise ParameterOutOfRange("trials must be at least 1")
        if self.true_channel is not None and not 0 <= self.true_channel < fam.size:
            raise ParameterOutOfRange(f"true_channel={self.true_channel} out of range")
        expected = greedy_profile(fam, sched)
        if self.profile is None:
            object.__setattr__(self, "profile", expected)
        elif not np.allclose(self.profile.cumulative, expected.cumulative, rtol=0, atol=1e-9):
            raise ParameterOutOfRange("profile does not match the schedule")
        if not math.isfinite(self.profile.cumulative[-1]):
            raise ResourceLimit("schedule never decodes some state; horizon is infinite")
        if (2 ** self.k) * self.horizon > self.symbol_budget:
            raise ResourceLimit(
                f"codebook of 2^{self.k} x {self.horizon} symbols exceeds budget {self.symbol_budget}"
            )

    @property
    def boundaries(self) -> np.ndarray:
        """Phase end points ``(1+delta) T_j k`` in symbols."""
        return (1.0 + self.delta) * np.asarray(self.profile.cumulative) * self.k

    @property
    def horizon(self) -> int:
        return math.ceil((1.0 + self.delta) * self.profile.cumulative[-1] * self.k)

    @property
    def threshold(self) -> float:
        return self.k * (1.0 + self.delta / 2.0)

    def phase_of(self, i: np.ndarray | int) -> np.ndarray:
        """Phase index of 0-based coordinate(s) ``i``; boundary symbols go to the later phase."""
        return np.searchsorted(self.boundaries, np.asarray(i, dtype=float), side="right")

    def channels(self) -> list[int]:
        return list(range(self.family.size)) if self.true_channel is None else [self.true_channel]

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.family.to_dict(),
            "schedule": [list(p) for p in self.schedule],
            "k": int(self.k),
            "delta": self.delta,
            "trials": self.trials,
            "seed": self.seed,
            "true_channel": self.true_channel,
            "horizon": self.horizon,
            "threshold": self.threshold,
        }


@dataclass(frozen=True)
class Codebook:
    symbols: np.ndarray  # (2^k, horizon) input indices
    phases: np.ndarray  # (horizon,) schedule index per coordinate

    @property
    def horizon(self) -> int:
        return self.symbols.shape[1]

    def symbol(self, message: int, i: int) -> int:
        """Coordinate ``i`` of ``message``; zero past the horizon."""
        return int(self.symbols[message, i]) if i < self.horizon else 0


def trial_seeds(seed: int, channel: int, trial: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """(codebook seed, channel-noise seed) for one trial."""
    cb, noise = np.random.SeedSequence([seed, channel, trial]).spawn(2)
    return cb, noise


def generate_codebook(cfg: SimConfig, seed: Any = None) -> Codebook:
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    H = cfg.horizon
    n_msg = 2 ** cfg.k
    phases = cfg.phase_of(np.arange(H))
    symbols = np.zeros((n_msg, H), dtype=np.int16)
    sched = np.asarray(cfg.schedule)
    for j in np.unique(phases):
        cols = np.flatnonzero(phases == j)
        p = as_distribution(sched[j])
        symbols[:, cols] = rng.choice(len(p), size=(n_msg, len(cols)), p=p)
    return Codebook(symbols=symbols, phases=phases)


def _density_tables(cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """dens[j, s, x, y] and rejected[j, s, y] over the union output alphabet."""
    fam = cfg.family
    Y = max(ch.num_outputs for ch in fam.channels)
    S, J, X = fam.size, len(cfg.schedule), fam.num_inputs
    dens = np.full((J, S, X, Y), NEG_SENTINEL)
    rejected = np.ones((J, S, Y), dtype=bool)
    for j, p in enumerate(cfg.schedule):
        for s, W in enumerate(fam.matrices):
            d, r = density_table(W, np.asarray(p))
            dens[j, s, :, : W.shape[1]] = d
            rejected[j, s, : W.shape[1]] = r
    return dens, rejected


@dataclass(frozen=True)
class TrialResult:
    channel: int
    trial: int
    stop_time: int
    decoded: int
    message: int
    crossed: bool

    @property
    def correct(self) -> bool:
        return self.decoded == self.message


def run_trial(
    cfg: SimConfig, codebook: Codebook, trial_seed: Any, channel: int | None = None,
    trial: int = 0, return_sums: bool = False,
) -> TrialResult | tuple[TrialResult, np.ndarray]:
    """Send one uniformly drawn message over ``channel`` and decode it."""
    s_true = cfg.channels()[0] if channel is None else channel
    rng = np.random.default_rng(trial_seed)
    fam = cfg.family
    W = fam.matrices[s_true]
    n_msg, H = codebook.symbols.shape
    message = int(rng.integers(n_msg))
    x = codebook.symbols[message]
    u = rng.random(H)
    cdf = np.cumsum(W, axis=1)
    y = np.minimum((u[:, None] > cdf[x]).sum(axis=1), W.shape[1] - 1)

    dens, rejected = _density_tables(cfg)
    S = fam.size
    sums = np.zeros((n_msg, S))
    dead = np.zeros(S, dtype=bool)
    thr = cfg.threshold
    for t in range(H):
        j = codebook.phases[t]
        dead |= rejected[j, :, y[t]]
        inc = dens[j][:, codebook.symbols[:, t], y[t]].T  # (n_msg, S)
        sums = np.where(sums <= NEG_SENTINEL / 2, NEG_SENTINEL, sums + inc)
        sums[:, dead] = NEG_SENTINEL
        hit = (sums >= thr).any(axis=1)
        if hit.any():
            res = TrialResult(s_true, trial, t + 1, int(np.argmax(hit)), message, True)
            return (res, sums) if return_sums else res
    res = TrialResult(s_true, trial, H, 0, message, False)
    return (res, sums) if return_sums else res


@dataclass(frozen=True)
class ChannelStats:
    channel: int
    trials: int
    mean_stop_time: float
    error_rate: float
    empirical_cr: float
    predicted_time: float  # k T_s
    bound_time: float  # (1 + 2 delta) k T_s

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class SimReport:
    config: dict[str, Any]
    trials: tuple[TrialResult, ...]
    channels: tuple[ChannelStats, ...]
    empirical_cr: float
    theoretical_cr: float
    extras: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "seed": self.config["seed"],
            "channels": [c.to_dict() for c in self.channels],
            "empirical_cr": self.empirical_cr,
            "theoretical_cr": self.theoretical_cr,
            "trials": [
                {**t.__dict__, "correct": t.correct} for t in self.trials
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SimReport":
        trials = tuple(
            TrialResult(int(t["channel"]), int(t["trial"]), int(t["stop_time"]), int(t["decoded"]),
                        int(t["message"]), bool(t["crossed"]))
            for t in d["trials"]
        )
        horizon = int(d["config"]["horizon"])
        if any(t.stop_time > horizon or t.stop_time < 1 for t in trials):
            raise CompCapError("stop time outside [1, horizon]")
        chans = tuple(ChannelStats(**c) for c in d["channels"])
        if any(not 0 <= c.error_rate <= 1 for c in chans):
            raise CompCapError("error rate outside [0, 1]")
        return cls(dict(d["config"]), trials, chans, float(d["empirical_cr"]), float(d["theoretical_cr"]))

    def write_trials_csv(self, fh: IO[str]) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", "channel", "stop_time", "correct"])
        for t in self.trials:
            writer.writerow([t.trial, t.channel, t.stop_time, int(t.correct)])


def estimate(cfg: SimConfig) -> SimReport:
    """Run ``cfg.trials`` trials per true channel, each with a fresh codebook."""
    results: list[TrialResult] = []
    stats = []
    T = cfg.profile.decode_times()
    t_star = cfg.family.t_star
    for s in cfg.channels():
        batch = []
        for i in range(cfg.trials):
            cb_seed, noise_seed = trial_seeds(cfg.seed, s, i)
            batch.append(run_trial(cfg, generate_codebook(cfg, cb_seed), noise_seed, channel=s, trial=i))
        mean_tau = float(np.mean([r.stop_time for r in batch]))
        stats.append(
            ChannelStats(
                channel=s,
                trials=len(batch),
                mean_stop_time=mean_tau,
                error_rate=float(np.mean([not r.correct for r in batch])),
                empirical_cr=cfg.k * t_star[s] / mean_tau,
                predicted_time=cfg.k * float(T[s]),
                bound_time=(1 + 2 * cfg.delta) * cfg.k * float(T[s]),
            )
        )
        results += batch
    return SimReport(
        config=cfg.to_dict(),
        trials=tuple(results),
        channels=tuple(stats),
        empirical_cr=min(c.empirical_cr for c in stats),
        theoretical_cr=float(min(cfg.profile.per_state_cr)),
    )


def sim_config_from_schedule(
    fam: ChannelFamily, schedule: Sequence[Sequence[float]], k: int, delta: float, trials: int,
    seed: int = 0, true_channel: int | None = None,
) -> SimConfig:
    return SimConfig(family=fam, schedule=tuple(tuple(p) for p in schedule), k=k, delta=delta,
                     trials=trials, seed=seed, true_channel=true_channel)
