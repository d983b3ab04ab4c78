"""Sliding memory bank: softmax-weighted Monte-Carlo context estimation.

A FIFO of the last W frame embeddings approximates the stationary frame
expectation.  Similarities are raw dot products hard-clamped to
[-kappa, kappa], which enforces the boundedness assumption the weight
bounds rely on; the estimator is then a softmax-weighted average of the
stored frames.  The deviation/convergence machinery quantifies how far
the weighting can push the estimate away from the plain mean and at what
rate both find the true mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidInput, InvalidState, TimeOrderError
from .numeric import as_vector, convex_combine, softmax
from .rng import stream
from .parallel import map_in_order


@dataclass(frozen=True)
class MemoryBank:
    """Fixed-capacity FIFO of (time, embedding) slots, oldest first."""

    capacity: int
    kappa: float
    slots: tuple = ()

    def __post_init__(self):
        if int(self.capacity) < 1:
            raise InvalidInput(f"capacity must be positive, got {self.capacity}")
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise InvalidInput(f"kappa must be positive, got {self.kappa}")
        if len(self.slots) > self.capacity:
            raise InvalidInput("more slots than capacity")
        times = [t for t, _ in self.slots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise TimeOrderError(f"slot times must strictly increase, got {times}")
        dims = {v.size for _, v in self.slots}
        if len(dims) > 1:
            raise DimensionMismatch(f"slot dims differ: {sorted(dims)}")

    @property
    def count(self) -> int:
        return len(self.slots)

    @property
    def times(self) -> tuple:
        return tuple(t for t, _ in self.slots)

    @property
    def embeddings(self) -> np.ndarray:
        if not self.slots:
            return np.zeros((0, 0))
        return np.stack([v for _, v in self.slots])


def push(bank: MemoryBank, embedding, time: int) -> MemoryBank:
    """Append a frame, evicting the oldest slot once past capacity."""
    vec = as_vector(embedding, "embedding")
    if bank.slots:
        if time <= bank.times[-1]:
            raise TimeOrderError(
                f"time {time} not after newest stored time {bank.times[-1]}"
            )
        if vec.size != bank.slots[0][1].size:
            raise DimensionMismatch(
                f"embedding dim {vec.size} != stored dim {bank.slots[0][1].size}"
            )
    slots = bank.slots + ((int(time), vec),)
    if len(slots) > bank.capacity:
        slots = slots[-bank.capacity:]
    return MemoryBank(capacity=bank.capacity, kappa=bank.kappa, slots=slots)


def _clamped_similarities(bank: MemoryBank, current: np.ndarray,
                          score_offset=None) -> np.ndarray:
    sims = bank.embeddings @ current
    if score_offset is not None:
        offset = as_vector(score_offset, "score_offset")
        if offset.size != bank.count:
            raise DimensionMismatch(
                f"{offset.size} offsets for {bank.count} slots"
            )
        sims = sims + offset
    return np.clip(sims, -bank.kappa, bank.kappa)


def context(bank: MemoryBank, current, score_offset=None):
    """Softmax-weighted average of the stored frames.

    An empty bank passes the current embedding through unchanged with an
    empty weight vector (the window-0 ablation).  ``score_offset`` is a
    hook for per-slot additions (e.g. temporal position signals); offsets
    are applied before the clamp so every bound still holds.
    """
    cur = as_vector(current, "current")
    if bank.count == 0:
        return cur.copy(), np.zeros(0)
    if cur.size != bank.slots[0][1].size:
        raise DimensionMismatch(
            f"current dim {cur.size} != stored dim {bank.slots[0][1].size}"
        )
    weights = softmax(_clamped_similarities(bank, cur, score_offset))
    return convex_combine(weights, bank.embeddings), weights


@dataclass(frozen=True)
class DeviationReport:
    """How far the softmax weights sit from uniform, against both bounds."""

    l1_deviation: float
    max_deviation: float
    per_coord_bound: float        # (e^{2 kappa} - 1) / W, always holds
    scaled_l1_bound: float        # 2 (e^{2 kappa} - 1) / W, reported only
    per_coord_ok: bool
    scaled_l1_ok: bool
    weights: np.ndarray


def weight_deviation(bank: MemoryBank, current) -> DeviationReport:
    """Deviation of the context weights from uniform on a full bank.

    The per-coordinate bound follows from the clamp and must always
    pass.  The much tighter 1/W-scaled L1 bound is evaluated and
    reported only: saturated similarity patterns with both signs beat it
    at any clamp level, so it cannot be asserted.
    """
    if bank.count != bank.capacity:
        raise InvalidState(
            f"bank holds {bank.count} of {bank.capacity} slots; fill it first"
        )
    _, weights = context(bank, current)
    w = bank.capacity
    dev = np.abs(weights - 1.0 / w)
    per_coord_bound = (np.exp(2.0 * bank.kappa) - 1.0) / w
    scaled_l1_bound = 2.0 * per_coord_bound
    l1 = float(dev.sum())
    return DeviationReport(
        l1_deviation=l1,
        max_deviation=float(dev.max()),
        per_coord_bound=float(per_coord_bound),
        scaled_l1_bound=float(scaled_l1_bound),
        per_coord_ok=bool(dev.max() <= per_coord_bound),
        scaled_l1_ok=bool(l1 <= scaled_l1_bound),
        weights=weights,
    )


def deviation_to_json(report: DeviationReport) -> dict:
    return {
        "l1_deviation": report.l1_deviation,
        "max_deviation": report.max_deviation,
        "per_coord_bound": report.per_coord_bound,
        "scaled_l1_bound": report.scaled_l1_bound,
        "per_coord_ok": report.per_coord_ok,
        "scaled_l1_ok": report.scaled_l1_ok,
        "weights": report.weights.tolist(),
    }


# ---------------------------------------------------------------------------
# Frame generators for the convergence experiment

@dataclass(frozen=True)
class GaussianFrames:
    """Isotropic gaussian frames with a known mean."""

    mean: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean", as_vector(self.mean, "mean"))
        if not self.scale >= 0:
            raise InvalidInput(f"scale must be nonnegative, got {self.scale}")

    def draw(self, gen, n: int) -> np.ndarray:
        return self.mean + self.scale * gen.normal(size=(n, self.mean.size))


@dataclass(frozen=True)
class PointMassFrames:
    """Degenerate generator; every frame equals the mean."""

    mean: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", as_vector(self.mean, "mean"))

    def draw(self, gen, n: int) -> np.ndarray:
        return np.broadcast_to(self.mean, (n, self.mean.size)).copy()


@dataclass(frozen=True)
class ConvergenceRow:
    window: int
    seed_count: int
    mean_err_unweighted: float
    mean_err_weighted: float
    mean_weighted_minus_unweighted: float
    sem_weighted_minus_unweighted: float
    mean_max_norm: float


@dataclass(frozen=True)
class ConvergenceResult:
    rows: tuple
    slope_unweighted: float
    slope_weighted: float


_CONV_STREAM = 0x3A11


def _convergence_cell(frames, window: int, seed: int, kappa: float):
    gen = stream(seed, _CONV_STREAM + window)
    draws = frames.draw(gen, window + 1)
    batch, current = draws[:-1], draws[-1]
    unweighted = batch.mean(axis=0)
    sims = np.clip(batch @ current, -kappa, kappa)
    weights = softmax(sims)
    weighted = weights @ batch
    mu = frames.mean
    return (
        float(np.linalg.norm(unweighted - mu)),
        float(np.linalg.norm(weighted - mu)),
        float(np.linalg.norm(weighted - unweighted)),
        float(np.linalg.norm(batch, axis=1).max()),
    )


def _convergence_window(frames, window: int, seeds, kappa: float):
    cells = [_convergence_cell(frames, window, s, kappa) for s in seeds]
    arr = np.asarray(cells)
    n = len(seeds)
    return ConvergenceRow(
        window=window,
        seed_count=n,
        mean_err_unweighted=float(arr[:, 0].mean()),
        mean_err_weighted=float(arr[:, 1].mean()),
        mean_weighted_minus_unweighted=float(arr[:, 2].mean()),
        sem_weighted_minus_unweighted=float(arr[:, 2].std() / np.sqrt(n)),
        mean_max_norm=float(arr[:, 3].mean()),
    )


def convergence_experiment(frames, w_grid, seeds, kappa: float,
                           jobs: int = 1) -> ConvergenceResult:
    """Estimation error of the plain and weighted window means vs the true
    mean, over an ascending window grid, with fitted log-log slopes.

    Each (window, seed) cell draws window+1 i.i.d. frames: the first
    ``window`` fill the bank, the extra one plays the current frame whose
    similarities produce the weights.  Slopes are ordinary least squares
    on log(mean error) vs log(window); at least 4 grid points required.
    """
    w_grid = [int(w) for w in w_grid]
    if len(w_grid) < 4:
        raise InvalidInput("need at least 4 window sizes for a slope fit")
    if any(b <= a for a, b in zip(w_grid, w_grid[1:])) or w_grid[0] < 1:
        raise InvalidInput("window grid must be positive and ascending")
    if not (np.isfinite(kappa) and kappa > 0):
        raise InvalidInput(f"kappa must be positive, got {kappa}")
    seeds = [int(s) for s in seeds]

    rows = tuple(
        map_in_order(
            _convergence_window,
            [(frames, w, seeds, kappa) for w in w_grid],
            jobs=jobs,
        )
    )
    logs_w = np.log(np.asarray(w_grid, dtype=np.float64))
    err_u = np.array([r.mean_err_unweighted for r in rows])
    err_w = np.array([r.mean_err_weighted for r in rows])

    def fit(errs):
        if np.any(errs <= 0):
            return float("-inf")  # degenerate generator: exact at every W
        return float(np.polyfit(logs_w, np.log(errs), 1)[0])

    return ConvergenceResult(
        rows=rows,
        slope_unweighted=fit(err_u),
        slope_weighted=fit(err_w),
    )
