"""Outer optimization over input-distribution schedules.

Every objective here is a max-min over states: either the (weighted)
competitive ratio ``min_s w_s T*_s / T_s`` or the negated (weighted)
regret ``-max_s r_s (C_s - 1/T_s)``, where ``T_s`` is the decoding time of
state ``s`` under the greedy order. Single-distribution baselines use one
distribution for the whole code, so ``T_s = 1 / I_s(q)``.

The search is derivative-free: exhaustive simplex grids when the alphabet
is small, a reduced grid over declared input blocks, then multi-start
accept-if-better perturbation search and an SLSQP polish of the
fixed-ordering epigraph problem. Reported values are best-found; they are
not certified optima.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import IO, Any, Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .channels import (
    ChannelFamily,
    block_distribution,
    builtin_family,
    mutual_information_batch,
    row_entropies,
)
from .competitive import (
    MI_FLOOR,
    DecodingProfile,
    greedy_decode_times,
    greedy_profile,
    profile_from_mi,
)
from .errors import BisectionFailed, CompCapError, DegenerateRegret, ParameterOutOfRange

CR, REGRET, COMPOUND = "cr", "regret", "compound"


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the schedule search.

    ``starts`` random starts are added to the structured ones and the
    ``refine`` best of all candidates each get their own local search. Perturbation steps shrink by ``decay``
    after a sweep with no improvement and the search stops once the step
    falls below ``step_tol``.
    """

    grid_step: float = 0.01
    starts: int = 32
    refine: int = 8
    proposals: int = 16
    initial_step: float = 0.25
    decay: float = 0.5
    step_tol: float = 1e-6
    seed: int = 0
    max_evals: int = 5_000_000
    max_grid: int = 1_500_000
    reduced_step: float = 1e-3
    polish: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.grid_step <= 0.5:
            raise ParameterOutOfRange(f"grid_step={self.grid_step} must lie in (0, 0.5]")
        if not 0 < self.reduced_step <= 0.5:
            raise ParameterOutOfRange(f"reduced_step={self.reduced_step} must lie in (0, 0.5]")
        if self.step_tol <= 0 or self.initial_step <= 0:
            raise ParameterOutOfRange("step sizes must be positive")
        if not 0 < self.decay < 1:
            raise ParameterOutOfRange("decay must lie in (0, 1)")
        if self.starts < 0 or self.refine < 1 or self.proposals < 1 or self.max_evals < 1:
            raise ParameterOutOfRange("starts >= 0, proposals >= 1 and max_evals >= 1 required")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one solver call; ``profile`` reproduces ``value``."""

    objective: str
    value: float
    schedule: tuple[tuple[float, ...], ...]
    profile: DecodingProfile
    method: str
    evaluations: int
    seed: int
    budget_exhausted: bool = False
    weights: tuple[float, ...] | None = None
    config: dict[str, Any] = field(default_factory=dict)

    def reproduce(self) -> float:
        """Recompute the objective from the stored profile."""
        w = self.weights if self.weights is not None else [1.0] * len(self.profile.ordering)
        if self.objective in ("cr", "single_cr"):
            return self.profile.weighted_cr(w)
        if self.objective in ("regret", "single_regret"):
            return self.profile.weighted_regret(w)
        if self.objective == COMPOUND:
            return 1.0 / max(self.profile.cumulative)
        raise CompCapError(f"unknown objective {self.objective!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "objective": self.objective,
            "value": self.value,
            "schedule": [list(p) for p in self.schedule],
            "profile": self.profile.to_dict(),
            "method": self.method,
            "evaluations": self.evaluations,
            "seed": self.seed,
            "budget_exhausted": self.budget_exhausted,
            "weights": None if self.weights is None else list(self.weights),
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SolveReport":
        rep = cls(
            objective=str(d["objective"]),
            value=float(d["value"]),
            schedule=tuple(tuple(float(v) for v in p) for p in d["schedule"]),
            profile=DecodingProfile.from_dict(d["profile"]),
            method=str(d["method"]),
            evaluations=int(d["evaluations"]),
            seed=int(d["seed"]),
            budget_exhausted=bool(d.get("budget_exhausted", False)),
            weights=None if d.get("weights") is None else tuple(float(v) for v in d["weights"]),
            config=dict(d.get("config", {})),
        )
        if abs(rep.reproduce() - rep.value) > 1e-9:
            raise CompCapError("report value does not match its decoding profile")
        return rep


# ---------------------------------------------------------------------------
# Simplex helpers
# ---------------------------------------------------------------------------


def project_simplex(V: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row of ``V`` onto the probability simplex."""
    V = np.asarray(V, dtype=float)
    n = V.shape[-1]
    U = -np.sort(-V, axis=-1)
    css = np.cumsum(U, axis=-1) - 1.0
    ind = np.arange(1, n + 1)
    cond = U - css / ind > 0
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1)
    return np.maximum(V - theta, 0.0)


def simplex_grid(n: int, steps: int) -> np.ndarray:
    """All points of the ``n``-simplex with coordinates in multiples of ``1/steps``."""
    pts = []
    for cuts in itertools.combinations(range(steps + n - 1), n - 1):
        prev, comp = -1, []
        for c in cuts:
            comp.append(c - prev - 1)
            prev = c
        comp.append(steps + n - 2 - prev)
        pts.append(comp)
    return np.array(pts, dtype=float) / steps


def _grid_size(n: int, steps: int) -> int:
    return math.comb(steps + n - 1, n - 1)


def _fit_steps(n: int, m: int, steps: int, cap: int) -> int:
    while steps > 1 and _grid_size(n, steps) ** m > cap:
        steps -= 1
    return steps


def _renormalize(P: np.ndarray) -> np.ndarray:
    P = np.clip(P, 0.0, None)
    return P / P.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Search engine
# ---------------------------------------------------------------------------


class _Engine:
    """Evaluates schedules for one family; caches weight-independent grids."""

    def __init__(self, fam: ChannelFamily, cfg: SearchConfig, single: bool):
        self.fam = fam
        self.cfg = cfg
        self.single = single
        self.S = fam.size
        self.X = fam.num_inputs
        self.m = 1 if single else fam.size
        self.mats = fam.matrices
        self.h_rows = [row_entropies(W) for W in self.mats]
        self.C = np.array(fam.capacities)
        self.evals = 0
        self._grid: tuple[np.ndarray, np.ndarray] | None = None
        self._reduced: tuple[np.ndarray, np.ndarray] | None = None

    # -- evaluation ---------------------------------------------------------

    def rates(self, P: np.ndarray) -> np.ndarray:
        """``I_s`` of every distribution in ``P`` (shape ``(..., X)`` -> ``(..., S)``)."""
        R = np.stack(
            [mutual_information_batch(W, P, h) for W, h in zip(self.mats, self.h_rows)], axis=-1
        )
        R[R < MI_FLOOR] = 0.0
        return R

    def times_from_rates(self, R: np.ndarray) -> np.ndarray:
        # R has shape (B, m, S)
        if self.single:
            with np.errstate(divide="ignore"):
                return 1.0 / R[:, 0, :]
        return greedy_decode_times(np.swapaxes(R, 1, 2))

    def decode_times(self, P: np.ndarray) -> np.ndarray:
        self.evals += P.shape[0]
        return self.times_from_rates(self.rates(P))

    def terms(self, T: np.ndarray, kind: str, w: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            if kind == CR:
                return w / (self.C * T)
            if kind == REGRET:
                return -w * (self.C - 1.0 / T)
            if kind == COMPOUND:
                return w / T
        raise CompCapError(f"unknown objective {kind!r}")

    def values(self, P: np.ndarray, kind: str, w: np.ndarray) -> np.ndarray:
        return self.terms(self.decode_times(P), kind, w).min(axis=1)

    def fixed_terms(self, P: np.ndarray, ordering: Sequence[int], kind: str, w: np.ndarray) -> np.ndarray:
        R = self.rates(P)  # (m, S)
        self.evals += 1
        if self.single:
            with np.errstate(divide="ignore"):
                T = 1.0 / R[0]
        else:
            T = profile_from_mi(R.T, self.fam.capacities, ordering).decode_times()
        return self.terms(T[None, :], kind, w)[0]

    # -- cached grids -------------------------------------------------------

    def grid(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Exhaustive product grid: (index pairs into points, decode times)."""
        if self.X > 3 or self.S > 2:
            return None
        if self._grid is None:
            steps = _fit_steps(self.X, self.m, round(1 / self.cfg.grid_step), self.cfg.max_grid)
            pts = simplex_grid(self.X, steps)
            self._grid = self._product_times(pts)
        return self._grid

    def reduced(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Grid over block masses for families that declare input blocks."""
        blocks = self.fam.input_blocks
        if blocks is None or len(blocks) > 3:
            return None
        if self._reduced is None:
            steps = _fit_steps(len(blocks), self.m, round(1 / self.cfg.reduced_step), self.cfg.max_grid)
            masses = simplex_grid(len(blocks), steps)
            pts = np.array([block_distribution(self.fam, q) for q in masses])
            self._reduced = self._product_times(pts)
        return self._reduced

    def _product_times(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        R = self.rates(pts)  # (G, S)
        G = len(pts)
        idx = np.array(list(itertools.product(range(G), repeat=self.m)), dtype=np.int64).reshape(-1, self.m)
        T = np.empty((len(idx), self.S))
        chunk = 200_000
        for lo in range(0, len(idx), chunk):
            sel = idx[lo:lo + chunk]
            T[lo:lo + chunk] = self.times_from_rates(R[sel])
        self.evals += len(idx)
        return pts[idx], T

    # -- local search -------------------------------------------------------

    def _propose(self, P: np.ndarray, j: int, step: float, rng: np.random.Generator) -> np.ndarray:
        K = self.cfg.proposals
        cand = np.repeat(P[None], K, axis=0)
        half = K // 2
        gauss = project_simplex(P[j] + step * rng.standard_normal((K - half, self.X)))
        cand[half:, j] = gauss
        if half:
            src = rng.integers(self.X, size=half)
            dst = rng.integers(self.X, size=half)
            moved = np.minimum(step * rng.random(half), P[j, src])
            rows = np.arange(half)
            cand[rows, j, src] -= moved
            cand[rows, j, dst] += moved
            cand[:half, j] = _renormalize(cand[:half, j])
        return cand

    def local_search(
        self, P: np.ndarray, v: float, kind: str, w: np.ndarray, rng: np.random.Generator,
        step: float | None = None,
    ) -> tuple[np.ndarray, float]:
        step = self.cfg.initial_step if step is None else step
        while step >= self.cfg.step_tol and self.evals < self.cfg.max_evals:
            improved = False
            for j in range(self.m):
                cand = self._propose(P, j, step, rng)
                vals = self.values(cand, kind, w)
                b = int(np.argmax(vals))
                if vals[b] > v:
                    P, v, improved = cand[b], float(vals[b]), True
            if not improved:
                step *= self.cfg.decay
        return P, v

    def polish(self, P: np.ndarray, v: float, kind: str, w: np.ndarray) -> tuple[np.ndarray, float]:
        """SLSQP on the epigraph problem with the decoding order frozen at ``P``."""
        if self.single:
            ordering: Sequence[int] = ()
        else:
            ordering = profile_from_mi(self.rates(P).T, self.fam.capacities).ordering
        n = self.m * self.X

        def cons_terms(z: np.ndarray) -> np.ndarray:
            Pz = _renormalize(z[:n].reshape(self.m, self.X))
            return self.fixed_terms(Pz, ordering, kind, w) - z[-1]

        def cons_sum(z: np.ndarray) -> np.ndarray:
            return z[:n].reshape(self.m, self.X).sum(axis=1) - 1.0

        grad = np.zeros(n + 1)
        grad[-1] = -1.0
        z0 = np.concatenate([P.ravel(), [v]])
        try:
            res = minimize(
                lambda z: -z[-1],
                z0,
                jac=lambda z: grad,
                method="SLSQP",
                bounds=[(0.0, 1.0)] * n + [(None, None)],
                constraints=[{"type": "ineq", "fun": cons_terms}, {"type": "eq", "fun": cons_sum}],
                options={"maxiter": 300, "ftol": 1e-13},
            )
        except (ValueError, FloatingPointError):
            return P, v
        Pn = _renormalize(np.clip(res.x[:n], 0.0, 1.0).reshape(self.m, self.X))
        vn = float(self.values(Pn[None], kind, w)[0])
        if np.isfinite(vn) and vn > v:
            return Pn, vn
        return P, v

    # -- driver -------------------------------------------------------------

    def structured_starts(self) -> list[np.ndarray]:
        uniform = np.full(self.X, 1.0 / self.X)
        caps = [np.asarray(p) for p in self.fam.capacity_dists]
        starts = [np.tile(uniform, (self.m, 1))]
        if self.single:
            starts += [c[None] for c in caps]
        elif self.S <= 4:
            starts += [np.array(perm) for perm in itertools.permutations(caps)]
        return starts

    def solve(self, kind: str, w: Sequence[float] | None = None, top_grid: int = 4) -> tuple[np.ndarray, float, str, bool]:
        w = np.ones(self.S) if w is None else np.asarray(w, dtype=float)
        seq = np.random.SeedSequence(self.cfg.seed)
        methods = []
        candidates: list[tuple[np.ndarray, float]] = []

        for cached, tag in ((self.grid(), "grid"), (self.reduced(), "block-grid")):
            if cached is None:
                continue
            pts, T = cached
            vals = self.terms(T, kind, w).min(axis=1)
            order = np.argsort(-vals, kind="stable")[:top_grid]
            candidates += [(pts[i].copy(), float(vals[i])) for i in order]
            methods.append(tag)

        starts = self.structured_starts()
        rng0 = np.random.default_rng(seq.spawn(1)[0])
        starts += [rng0.dirichlet(np.ones(self.X), size=self.m) for _ in range(self.cfg.starts)]
        P0 = np.array(starts)
        v0 = self.values(P0, kind, w)
        candidates += [(P0[i], float(v0[i])) for i in range(len(P0))]

        if self.single and self.fam.input_blocks is not None and len(self.fam.input_blocks) == 2:
            candidates.append(self._golden_split(kind, w))
            methods.append("golden-section")

        candidates.sort(key=lambda c: -c[1])
        candidates = candidates[: self.cfg.refine]
        best_P, best_v = candidates[0]
        methods.append("local-search")
        rngs = [np.random.default_rng(s) for s in seq.spawn(len(candidates) + 2)[1:]]
        for (P, v), rng in zip(candidates, rngs):
            if self.evals >= self.cfg.max_evals:
                break
            P, v = self.local_search(P, v, kind, w, rng)
            if v > best_v:
                best_P, best_v = P, v
        if self.cfg.polish and self.evals < self.cfg.max_evals:
            P, v = self.polish(best_P, best_v, kind, w)
            if v > best_v:
                methods.append("polish")
                P, v = self.local_search(P, v, kind, w, rngs[-1], step=1e-3)
                best_P, best_v = P, v
        return best_P, best_v, "+".join(methods), self.evals >= self.cfg.max_evals

    def _golden_split(self, kind: str, w: np.ndarray) -> tuple[np.ndarray, float]:
        # Single-distribution objectives are concave along the block split.
        def dist(t: float) -> np.ndarray:
            return block_distribution(self.fam, (1.0 - t, t))[None]

        def f(t: float) -> float:
            return -float(self.values(dist(t)[None], kind, w)[0])

        ts = np.linspace(0.0, 1.0, round(1 / self.cfg.reduced_step) + 1)
        P = np.array([dist(t) for t in ts])
        vals = self.values(P, kind, w)
        i = int(np.argmax(vals))
        lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if -res.fun > vals[i]:
            return dist(float(res.x)), float(-res.fun)
        return P[i], float(vals[i])


def _weights(fam: ChannelFamily, w: Sequence[float] | None) -> tuple[float, ...] | None:
    if w is None:
        return None
    w = tuple(float(v) for v in w)
    if len(w) != fam.size:
        raise ParameterOutOfRange(f"expected {fam.size} weights, got {len(w)}")
    if any(not (v > 0 and math.isfinite(v)) for v in w):
        raise ParameterOutOfRange("weights must be positive and finite")
    return w


def _report(
    fam: ChannelFamily, eng: _Engine, objective: str, kind: str, weights: tuple[float, ...] | None,
    P: np.ndarray, method: str, exhausted: bool, cfg: SearchConfig,
) -> SolveReport:
    sched = np.tile(P[0], (fam.size, 1)) if eng.single else P
    profile = greedy_profile(fam, sched)
    rep = SolveReport(
        objective=objective,
        value=math.nan,
        schedule=tuple(tuple(float(v) for v in p) for p in sched),
        profile=profile,
        method=method,
        evaluations=eng.evals,
        seed=cfg.seed,
        budget_exhausted=exhausted,
        weights=weights,
        config=asdict(cfg),
    )
    return replace(rep, value=rep.reproduce())


def _run(fam: ChannelFamily, cfg: SearchConfig | None, single: bool, kind: str, objective: str,
         weights: Sequence[float] | None, engine: _Engine | None = None) -> SolveReport:
    cfg = cfg or SearchConfig()
    w = _weights(fam, weights)
    eng = engine or _Engine(fam, cfg, single)
    eng.evals = 0
    sign_w = None if w is None else np.array(w)
    P, _, method, exhausted = eng.solve(kind, sign_w)
    return _report(fam, eng, objective, kind, w, P, method, exhausted, cfg)


def single_dist_bound(fam: ChannelFamily, cfg: SearchConfig | None = None) -> SolveReport:
    """``max_q min_s I_s(q) / C_s``: the CR of codes drawn from one distribution."""
    return _run(fam, cfg, True, CR, "single_cr", None)


def single_dist_regret(fam: ChannelFamily, cfg: SearchConfig | None = None) -> SolveReport:
    """``min_q max_s (C_s - I_s(q))``."""
    rep = _run(fam, cfg, True, REGRET, "single_regret", None)
    return rep


def compound_capacity(fam: ChannelFamily, cfg: SearchConfig | None = None) -> SolveReport:
    """``max_q min_s I_s(q)``."""
    return _run(fam, cfg, True, COMPOUND, COMPOUND, None)


def solve_cr(fam: ChannelFamily, cfg: SearchConfig | None = None) -> SolveReport:
    """Optimal competitive ratio over schedules, greedy decoding order."""
    return _run(fam, cfg, False, CR, "cr", None)


def solve_regret(fam: ChannelFamily, cfg: SearchConfig | None = None) -> SolveReport:
    """Optimal regret over schedules, greedy decoding order."""
    return _run(fam, cfg, False, REGRET, "regret", None)


def solve_weighted_cr(fam: ChannelFamily, w: Sequence[float], cfg: SearchConfig | None = None,
                      engine: _Engine | None = None) -> SolveReport:
    return _run(fam, cfg, False, CR, "cr", w, engine)


def solve_weighted_regret(fam: ChannelFamily, r: Sequence[float], cfg: SearchConfig | None = None,
                          engine: _Engine | None = None) -> SolveReport:
    return _run(fam, cfg, False, REGRET, "regret", r, engine)


def _negated(rep: SolveReport) -> SolveReport:
    return rep


# ---------------------------------------------------------------------------
# Weighted CR <-> weighted regret reductions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReductionResult:
    """Root found by bisection plus the schedule that certifies it."""

    value: float
    weights: tuple[float, ...]
    schedule: tuple[tuple[float, ...], ...]
    profile: DecodingProfile
    trace: tuple[tuple[float, float], ...]
    evaluations: int
    seed: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "weights": list(self.weights),
            "schedule": [list(p) for p in self.schedule],
            "profile": self.profile.to_dict(),
            "trace": [list(t) for t in self.trace],
            "evaluations": self.evaluations,
            "seed": self.seed,
        }


def _check_monotone(trace: Iterable[tuple[float, float]], noise: float) -> None:
    pts = sorted(trace)
    for (a0, v0), (a1, v1) in zip(pts, pts[1:]):
        if v1 < v0 - noise * max(1.0, abs(v0)):
            raise BisectionFailed(
                f"solver values not monotone: {v0:.9g} at {a0:.9g} > {v1:.9g} at {a1:.9g}"
            )


def prop1_cr_via_regret(
    fam: ChannelFamily, w: Sequence[float], cfg: SearchConfig | None = None,
    bisect_tol: float = 1e-6, noise: float = 1e-6,
) -> ReductionResult:
    """Weighted CR through weighted-regret solves.

    With ``r_j(a) = w_j T*_j / (w_j - a)`` the optimal weighted regret
    ``rho(a)`` increases in ``a`` and crosses 1 exactly at ``a = CR(w)``.
    """
    cfg = cfg or SearchConfig()
    w_arr = np.array(_weights(fam, w))
    t_star = np.array(fam.t_star)
    eng = _Engine(fam, cfg, single=False)
    total = 0

    def rho(alpha: float) -> SolveReport:
        nonlocal total
        rep = solve_weighted_regret(fam, w_arr * t_star / (w_arr - alpha), cfg, engine=eng)
        total += rep.evaluations
        return rep

    keep = rho(0.0)
    if keep.value <= 1e-9:
        raise DegenerateRegret("optimal regret is zero; every weighted CR equals min(w)")
    trace = [(0.0, keep.value)]
    lo, hi = 0.0, float(w_arr.min())
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        rep = rho(mid)
        trace.append((mid, rep.value))
        if rep.value <= 1.0:
            lo, keep = mid, rep
        else:
            hi = mid
    _check_monotone(trace, noise)
    return ReductionResult(
        value=lo,
        weights=tuple(float(v) for v in w_arr * t_star / (w_arr - lo)),
        schedule=keep.schedule,
        profile=keep.profile,
        trace=tuple(trace),
        evaluations=total,
        seed=cfg.seed,
    )


def prop1_regret_via_cr(
    fam: ChannelFamily, r: Sequence[float], cfg: SearchConfig | None = None,
    bisect_tol: float = 1e-6, noise: float = 1e-6,
) -> ReductionResult:
    """Weighted regret through weighted-CR solves.

    With ``w_j(rho) = r_j / (r_j - rho T*_j)`` the optimal weighted CR
    increases in ``rho`` and reaches 1 exactly at ``rho = Regret(r)``.
    """
    cfg = cfg or SearchConfig()
    r_arr = np.array(_weights(fam, r))
    t_star = np.array(fam.t_star)
    eng = _Engine(fam, cfg, single=False)
    total = 0

    def cr(rho: float) -> SolveReport:
        nonlocal total
        rep = solve_weighted_cr(fam, r_arr / (r_arr - rho * t_star), cfg, engine=eng)
        total += rep.evaluations
        return rep

    first = cr(0.0)
    if first.value >= 1.0 - 1e-9:
        raise DegenerateRegret("optimal CR is 1; weighted regret is zero")
    trace = [(0.0, first.value)]
    lo, hi = 0.0, float((r_arr / t_star).min())
    keep = None
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        rep = cr(mid)
        trace.append((mid, rep.value))
        if rep.value >= 1.0:
            hi, keep = mid, rep
        else:
            lo = mid
    _check_monotone(trace, noise)
    if keep is None:
        keep = cr(hi)
    return ReductionResult(
        value=hi,
        weights=tuple(float(v) for v in r_arr / (r_arr - hi * t_star)),
        schedule=keep.schedule,
        profile=keep.profile,
        trace=tuple(trace),
        evaluations=total,
        seed=cfg.seed,
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

FAMILY_METRICS = ("cr_lb", "cr_opt", "regret_lb", "regret_opt", "compound", "capacities", "rates")


def row_seed(seed: int, index: int) -> int:
    """Independent per-task seed derived from the master seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _sweep_row(args: tuple[str, dict[str, float], tuple[str, ...], SearchConfig]) -> dict[str, Any]:
    family, params, metrics, cfg = args
    row: dict[str, Any] = dict(params)
    try:
        fam = builtin_family(family, **params)
        for metric in metrics:
            if metric == "cr_lb" or metric == "rates":
                rep = single_dist_bound(fam, cfg)
                if metric == "cr_lb":
                    row["cr_lb"] = rep.value
                else:
                    rates = rep.profile.per_state_cr
                    for s, v in zip(rep.profile.ordering, rates):
                        row[f"rate_{s}"] = v
            elif metric == "cr_opt":
                row["cr_opt"] = solve_cr(fam, cfg).value
            elif metric == "regret_lb":
                row["regret_lb"] = single_dist_regret(fam, cfg).value
            elif metric == "regret_opt":
                row["regret_opt"] = solve_regret(fam, cfg).value
            elif metric == "compound":
                row["compound"] = compound_capacity(fam, cfg).value
            elif metric == "capacities":
                for s, c in enumerate(fam.capacities):
                    row[f"capacity_{s}"] = c
            else:
                raise ParameterOutOfRange(f"unknown metric {metric!r}")
        row["error"] = ""
    except CompCapError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep(
    family: str, grid: Mapping[str, Sequence[float]], metrics: Sequence[str],
    cfg: SearchConfig | None = None, workers: int = 1,
) -> list[dict[str, Any]]:
    """Evaluate ``metrics`` on every point of the Cartesian parameter grid.

    Each grid point gets a seed derived from ``(cfg.seed, index)``, so
    results do not depend on ``workers``.
    """
    cfg = cfg or SearchConfig()
    for metric in metrics:
        if metric not in FAMILY_METRICS:
            raise ParameterOutOfRange(f"unknown metric {metric!r}; choose from {', '.join(FAMILY_METRICS)}")
    names = list(grid)
    tasks = []
    for i, values in enumerate(itertools.product(*(grid[n] for n in names))):
        params = {n: float(v) for n, v in zip(names, values)}
        tasks.append((family, params, tuple(metrics), replace(cfg, seed=row_seed(cfg.seed, i))))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_row, tasks))
    return [_sweep_row(t) for t in tasks]


def split_sweep(fam: ChannelFamily, splits: Sequence[float]) -> list[dict[str, Any]]:
    """Rates along the two-block split of the input alphabet.

    ``p`` is the mass on the last block (uniform within blocks). Columns:
    ``rate_s`` = I_s, ``normalized_s`` = I_s / C_s and ``ratio_s`` =
    T*_s / T_s when the code switches to the capacity-achieving input of
    the slower channel once the faster one decodes.
    """
    if fam.input_blocks is None or len(fam.input_blocks) != 2 or fam.size != 2:
        raise ParameterOutOfRange("split sweeps need a two-channel family with two input blocks")
    rows = []
    for p in splits:
        q = block_distribution(fam, (1.0 - p, p))
        row: dict[str, Any] = {"p": float(p)}
        rates = [float(mutual_information_batch(W, q)) for W in fam.matrices]
        first = 0 if rates[0] >= rates[1] else 1
        prof = greedy_profile(fam, [q, fam.capacity_dists[1 - first]])
        ratios = dict(zip(prof.ordering, prof.per_state_cr))
        for s in range(fam.size):
            row[f"rate_{s}"] = rates[s]
            row[f"normalized_{s}"] = rates[s] / fam.capacities[s]
            row[f"ratio_{s}"] = ratios[s]
        row["cr_two"] = prof.cr
        rows.append(row)
    return rows


def write_csv(rows: Sequence[Mapping[str, Any]], fh: IO[str], param_names: Sequence[str] = ()) -> None:
    """CSV with parameter columns first; floats with 9 significant digits."""
    cols: list[str] = list(param_names)
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_fmt(row.get(c, "")) for c in cols])


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return "inf" if v == math.inf else format(v, ".9g")
    return str(v)
