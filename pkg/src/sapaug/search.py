"""Bayesian optimization of policy hyper-parameters with constant-liar batches.

The optimizer maximizes an objective over a box ``SearchSpace``. Each round
proposes ``q`` points: the first is the expected-improvement maximizer of a GP
fitted to completed trials; the GP is then conditioned on that point with a
fake ("lie") objective, and the next point is chosen against the fantasized
model, and so on. Pending trials from earlier rounds are lied about the same
way, so asynchronous evaluation is safe.

History is persisted as a JSON-lines event log that fully reconstructs the
search, so a crashed run resumes from where it stopped.
"""
from __future__ import annotations

import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import InputError, StateError
from .fileio import atomic_write_text
from .gp import expected_improvement, fit_gp
from .policy import KINDS

log = logging.getLogger(__name__)

MAX_Q = 64
SUGGESTED, RUNNING, COMPLETED = "suggested", "running", "completed"


@dataclass(frozen=True)
class Dim:
    name: str
    low: float
    high: float
    scale: str = "linear"

    def __post_init__(self):
        if self.scale not in ("linear", "log"):
            raise InputError(f"{self.name}: scale must be 'linear' or 'log', got {self.scale!r}")
        if not self.low < self.high:
            raise InputError(f"{self.name}: need low < high, got [{self.low}, {self.high}]")
        if self.scale == "log" and self.low <= 0:
            raise InputError(f"{self.name}: log-scale bounds must be positive")


class SearchSpace:
    def __init__(self, dims):
        self.dims = tuple(dims)
        if not self.dims:
            raise InputError("search space has no dimensions")
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise InputError("duplicate dimension names")
        self._log = np.array([d.scale == "log" for d in self.dims])
        self._lo = np.array([math.log(d.low) if d.scale == "log" else d.low for d in self.dims])
        self._hi = np.array([math.log(d.high) if d.scale == "log" else d.high for d in self.dims])

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    def __len__(self) -> int:
        return len(self.dims)

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return p.shape == (len(self),) and all(d.low <= v <= d.high for d, v in zip(self.dims, p))

    def check(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=np.float64)
        if p.shape != (len(self),):
            raise InputError(f"point has shape {p.shape}, space has {len(self)} dims")
        for d, v in zip(self.dims, p):
            if not d.low <= v <= d.high:
                raise InputError(f"{d.name}={v!r} outside [{d.low}, {d.high}]")
        return p

    def to_unit(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=np.float64)
        t = np.where(self._log, np.log(np.where(self._log, p, 1.0)), p)
        return (t - self._lo) / (self._hi - self._lo)

    def from_unit(self, u) -> np.ndarray:
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        t = self._lo + u * (self._hi - self._lo)
        p = np.where(self._log, np.exp(t), t)
        lows = np.array([d.low for d in self.dims])
        highs = np.array([d.high for d in self.dims])
        return np.clip(p, lows, highs)

    def to_dict(self, point) -> dict:
        return {n: float(v) for n, v in zip(self.names, point)}

    def from_dict(self, d) -> np.ndarray:
        try:
            return np.array([float(d[n]) for n in self.names])
        except KeyError as exc:
            raise InputError(f"point is missing dimension {exc}") from exc

    def to_json(self) -> dict:
        return {"dims": [{"name": d.name, "low": d.low, "high": d.high, "scale": d.scale} for d in self.dims]}

    @classmethod
    def from_json(cls, obj) -> "SearchSpace":
        try:
            return cls(Dim(str(d["name"]), float(d["low"]), float(d["high"]), d.get("scale", "linear"))
                       for d in obj["dims"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad search-space JSON: {exc}") from exc


def policy_space(s_bounds=(1.0, 200.0), a_bounds=(0.05, 0.95), p_bounds=(0.0, 1.0)) -> SearchSpace:
    """The 15-d policy space ``(s_1, a_1, ..., s_5, a_5, p_1, ..., p_5)``; ``s`` on log scale."""
    dims = []
    for k in KINDS:
        dims.append(Dim(f"s_{k.value}", *s_bounds, "log"))
        dims.append(Dim(f"a_{k.value}", *a_bounds))
    dims.extend(Dim(f"p_{k.value}", *p_bounds) for k in KINDS)
    return SearchSpace(dims)


@dataclass
class Trial:
    id: int
    point: np.ndarray
    objective: float | None = None
    status: str = SUGGESTED


@dataclass
class SearchHistory:
    trials: list = field(default_factory=list)

    def add(self, point) -> Trial:
        t = Trial(len(self.trials), np.asarray(point, dtype=np.float64))
        self.trials.append(t)
        return t

    def get(self, trial_id: int) -> Trial:
        if not 0 <= trial_id < len(self.trials):
            raise InputError(f"unknown trial id {trial_id}")
        return self.trials[trial_id]

    def mark_running(self, trial_id: int) -> None:
        t = self.get(trial_id)
        if t.status == SUGGESTED:
            t.status = RUNNING

    def observe(self, trial_id: int, objective: float) -> "SearchHistory":
        """Record an objective; repeating the same value is a no-op."""
        objective = float(objective)
        if not math.isfinite(objective):
            raise InputError(f"objective for trial {trial_id} is not finite: {objective!r}")
        t = self.get(trial_id)
        if t.status == COMPLETED:
            if t.objective != objective:
                raise InputError(f"trial {trial_id} already completed with {t.objective!r}, got {objective!r}")
            return self
        t.objective = objective
        t.status = COMPLETED
        return self

    def completed(self) -> list:
        return [t for t in self.trials if t.status == COMPLETED]

    def pending(self) -> list:
        return [t for t in self.trials if t.status != COMPLETED]

    def best(self) -> Trial:
        """Completed trial with the highest objective; the lowest id wins ties."""
        done = self.completed()
        if not done:
            raise StateError("no completed trials")
        return max(done, key=lambda t: (t.objective, -t.id))


@dataclass
class BayesianOptimizer:
    """Suggests points for a ``SearchSpace``; all randomness derives from ``seed``.

    The generator for a round is keyed by ``(seed, number of trials so far)``,
    so a resumed search proposes exactly what an uninterrupted one would.
    """

    space: SearchSpace
    seed: int = 0
    n_init: int = 10
    lie: str = "max"  # max | min | mean
    max_q: int = MAX_Q
    n_probes: int = 2048
    n_refine: int = 8
    gp_restarts: int = 2

    def __post_init__(self):
        if self.lie not in ("max", "min", "mean"):
            raise InputError(f"lie must be max, min or mean, got {self.lie!r}")

    def _round_rng(self, history: SearchHistory) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), len(history.trials)])

    def initial_points(self, start: int, q: int) -> np.ndarray:
        sobol = qmc.Sobol(len(self.space), scramble=True, seed=np.random.default_rng([int(self.seed), 7919]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # non power-of-two draws
            if start:
                sobol.fast_forward(start)
            return sobol.random(q)

    def suggest(self, history: SearchHistory, q: int = 1) -> list[np.ndarray]:
        """Propose ``q`` pairwise-distinct points (in space coordinates)."""
        if not 1 <= q <= self.max_q:
            raise InputError(f"q must lie in 1..{self.max_q}, got {q}")
        done = history.completed()
        if len(done) < self.n_init:
            units = self.initial_points(len(history.trials), q)
            return [self.space.from_unit(u) for u in units]

        rng = self._round_rng(history)
        X = np.array([self.space.to_unit(t.point) for t in done])
        y = np.array([t.objective for t in done])
        model = fit_gp(X, y, rng=rng, n_restarts=self.gp_restarts)
        lie = {"max": np.max, "min": np.min, "mean": np.mean}[self.lie](y)

        taken = [self.space.to_unit(t.point) for t in history.pending()]
        if taken:
            model = model.condition_on(np.array(taken), np.full(len(taken), lie))
        taken = [*X, *taken]
        chosen = []
        for k in range(q):
            if k:
                model = model.condition_on(chosen[-1][None, :], [lie])
            best = float(np.max(model.y))
            u = self._maximize_ei(model, best, np.array(taken), rng)
            chosen.append(u)
            taken.append(u)
        return [self.space.from_unit(u) for u in chosen]

    def _maximize_ei(self, model, best, taken, rng) -> np.ndarray:
        d = len(self.space)
        probes = rng.random((self.n_probes, d))
        ei = expected_improvement(model, probes, best)
        order = np.argsort(-ei, kind="stable")[: self.n_refine]
        starts, start_ei = probes[order], ei[order]
        refined, refined_ei = self._coordinate_refine(model, best, starts, start_ei)

        cand = np.vstack([refined, probes])
        cand_ei = np.concatenate([refined_ei, ei])
        for i in np.argsort(-cand_ei, kind="stable"):
            if _min_dist(cand[i], taken) > 1e-6:
                return cand[i]
        # every candidate collides with a known point: fall back to a fresh random one
        return rng.random(d)

    def _coordinate_refine(self, model, best, X, ei, step=0.1, min_step=1e-4, max_iter=60):
        X = X.copy()
        ei = ei.copy()
        d = X.shape[1]
        steps = np.full(X.shape[0], step)
        eye = np.eye(d)
        for _ in range(max_iter):
            active = steps >= min_step
            if not active.any():
                break
            idx = np.flatnonzero(active)
            moves = np.concatenate([eye, -eye])  # (2d, d)
            nb = np.clip(X[idx, None, :] + steps[idx, None, None] * moves[None], 0.0, 1.0)
            nb_ei = expected_improvement(model, nb.reshape(-1, d), best).reshape(len(idx), 2 * d)
            j = np.argmax(nb_ei, axis=1)
            gain = nb_ei[np.arange(len(idx)), j]
            better = gain > ei[idx]
            X[idx[better]] = nb[better, j[better]]
            ei[idx[better]] = gain[better]
            steps[idx[~better]] *= 0.5
        return X, ei


def _min_dist(u, others) -> float:
    if len(others) == 0:
        return np.inf
    return float(np.min(np.linalg.norm(np.asarray(others) - u, axis=1)))


# ---------------------------------------------------------------------------
# trial log and run loop
# ---------------------------------------------------------------------------


class TrialLog:
    """JSON-lines event log; rewritten atomically after each batch of events."""

    def __init__(self, path, space: SearchSpace, clock: Callable[[], float] = time.time):
        self.path = Path(path)
        self.space = space
        self.clock = clock
        self.events: list[dict] = []
        if self.path.exists():
            for n, line in enumerate(self.path.read_text().splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    self.events.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise InputError(f"{self.path}:{n}: bad JSON ({exc})") from exc

    def history(self) -> SearchHistory:
        h = SearchHistory()
        for ev in self.events:
            kind = ev.get("event")
            if kind == "suggest":
                t = h.add(self.space.from_dict(ev["point"]))
                if t.id != ev["id"]:
                    raise InputError(f"{self.path}: trial ids out of order at {ev['id']}")
            elif kind == "observe":
                h.observe(int(ev["id"]), ev["objective"])
            else:
                raise InputError(f"{self.path}: unknown event {kind!r}")
        return h

    def record(self, event: str, trial: Trial) -> None:
        self.events.append({
            "event": event,
            "id": trial.id,
            "point": self.space.to_dict(trial.point),
            "objective": trial.objective,
            "timestamp": self.clock(),
        })

    def flush(self) -> None:
        atomic_write_text(self.path, "".join(json.dumps(ev) + "\n" for ev in self.events))


def _evaluate(objective, points, workers: int):
    if workers <= 1 or len(points) <= 1:
        return [objective(p) for p in points]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(objective, points))


def run_search(
    objective: Callable[[np.ndarray], float],
    space: SearchSpace,
    budget: int,
    q: int = 1,
    seed: int = 0,
    log_path=None,
    n_init: int = 10,
    lie: str = "max",
    workers: int = 1,
    optimizer: BayesianOptimizer | None = None,
) -> SearchHistory:
    """Run (or resume) a search until ``budget`` trials are completed.

    Objective values are recorded in trial-id order so the log is identical no
    matter how evaluations were scheduled.
    """
    if budget < 1:
        raise InputError(f"budget must be >= 1, got {budget}")
    opt = optimizer or BayesianOptimizer(space, seed=seed, n_init=n_init, lie=lie)
    tlog = TrialLog(log_path, space) if log_path is not None else None
    history = tlog.history() if tlog is not None else SearchHistory()

    while True:
        batch = history.pending()
        if not batch:
            if len(history.trials) >= budget:
                break
            points = opt.suggest(history, min(q, budget - len(history.trials)))
            batch = [history.add(p) for p in points]
            if tlog is not None:
                for t in batch:
                    tlog.record("suggest", t)
                tlog.flush()
        for t in batch:
            history.mark_running(t.id)
        values = _evaluate(objective, [t.point for t in batch], workers)
        for t, v in zip(batch, values):
            history.observe(t.id, v)
            if tlog is not None:
                tlog.record("observe", t)
        if tlog is not None:
            tlog.flush()
        b = history.best()
        log.info("trials %d/%d, best %.6g (trial %d)", len(history.completed()), budget, b.objective, b.id)
    return history
