"""Brute-force and fixed-point oracles for attention-as-optimization.

The claim under test: softmax attention weights solve a simplex-
constrained quadratic program (exactly in the entropy-regularized,
linearized regime; approximately otherwise).  This module provides the
slow, independently-derived solvers that certify it:

* projected gradient for the raw QP (global optimum of a PSD objective),
* a damped softmax fixed point for the entropic QP,
* mirror descent for the linear-plus-entropy problem,
* random-point certificates and KKT residuals,
* the temperature sweep tracking the regularized optimizer into the
  unregularized one.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

from .errors import InvalidInput, InvalidProblem, MaxIterations, OracleDisagreement
from .numeric import as_matrix, as_vector, simplex_project, softmax
from .rng import stream

PSD_FLOOR = -1e-10
SYM_ATOL = 1e-12


@dataclass(frozen=True)
class QpProblem:
    """min over the simplex of  -2 b^T a + a^T G a.

    G is the token Gram matrix, b the token/target inner products.
    Construction symmetrizes G, rejects eigenvalues below the floor,
    and clips the in-floor negatives to zero.
    """

    gram: np.ndarray
    linear: np.ndarray

    def __post_init__(self):
        g = as_matrix(self.gram, "gram")
        b = as_vector(self.linear, "linear")
        if g.shape[0] != g.shape[1] or g.shape[0] != b.size:
            raise InvalidProblem(f"shape mismatch: G {g.shape}, b ({b.size},)")
        if np.abs(g - g.T).max() > SYM_ATOL:
            raise InvalidProblem(f"G asymmetric beyond {SYM_ATOL:g}")
        g = 0.5 * (g + g.T)
        evals, evecs = np.linalg.eigh(g)
        if evals.min() < PSD_FLOOR:
            raise InvalidProblem(
                f"G has eigenvalue {evals.min():.3e} below the floor {PSD_FLOOR:g}"
            )
        if evals.min() < 0:
            evals = np.maximum(evals, 0.0)
            g = (evecs * evals) @ evecs.T
            g = 0.5 * (g + g.T)
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "linear", b)

    @property
    def size(self) -> int:
        return self.linear.size

    @property
    def token_norms(self) -> np.ndarray:
        return np.diag(self.gram).copy()

    @classmethod
    def from_tokens(cls, tokens, mu) -> "QpProblem":
        t = as_matrix(np.asarray(tokens, dtype=np.float64), "tokens")
        mu = as_vector(mu, "mu")
        if t.shape[1] != mu.size:
            raise InvalidProblem(f"token dim {t.shape[1]} != mu dim {mu.size}")
        return cls(gram=t @ t.T, linear=t @ mu)

    def to_json(self) -> dict:
        return {"gram": self.gram.tolist(), "linear": self.linear.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "QpProblem":
        return cls(
            gram=np.asarray(doc["gram"], dtype=np.float64),
            linear=np.asarray(doc["linear"], dtype=np.float64),
        )


@dataclass(frozen=True)
class KktReport:
    """First-order optimality residuals plus multiplier estimates."""

    stationarity: float
    complementary_slackness: float
    primal_feasibility: float
    lam: float
    eta: np.ndarray


def objective(problem: QpProblem, alpha) -> float:
    a = np.asarray(alpha, dtype=np.float64)
    return float(a @ problem.gram @ a - 2.0 * problem.linear @ a)


def entropy(w) -> float:
    w = np.asarray(w, dtype=np.float64)
    pos = w[w > 0]
    return float(-(pos * np.log(pos)).sum())


def entropic_objective(problem: QpProblem, tau: float, alpha) -> float:
    return objective(problem, alpha) - float(tau) * entropy(alpha)


def power_iteration_lmax(g: np.ndarray, iters: int = 100, tol: float = 1e-10) -> float:
    """Largest eigenvalue estimate; deterministic tilted start vector."""
    n = g.shape[0]
    v = np.ones(n) + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = g @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        new = float(v @ g @ v)
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            return new
        lam = new
    return lam


def kkt_residual(problem: QpProblem, alpha, support_tol: float = 1e-9) -> KktReport:
    """Residuals of  2(Ga)_j - 2b_j + lam - eta_j = 0,  eta_j a_j = 0.

    lam is estimated by averaging the stationarity relation over the
    strictly positive coordinates (where eta vanishes).
    """
    a = as_vector(alpha, "alpha")
    if a.size != problem.size:
        raise InvalidInput(f"alpha has size {a.size}, problem has {problem.size}")
    grad = 2.0 * problem.gram @ a - 2.0 * problem.linear
    support = a > support_tol
    lam = float(-grad[support].mean()) if support.any() else float(-grad.mean())
    eta = grad + lam
    stationarity = float(np.abs(np.minimum(eta, 0.0)).max())
    if support.any():
        stationarity = max(stationarity, float(np.abs(eta[support]).max()))
    eta = np.maximum(eta, 0.0)
    return KktReport(
        stationarity=stationarity,
        complementary_slackness=float(np.abs(eta * a).max()),
        primal_feasibility=float(max(abs(a.sum() - 1.0), max(0.0, -a.min()))),
        lam=lam,
        eta=eta,
    )


def solve_simplex_qp(problem: QpProblem, tol: float = 1e-10,
                     max_iter: int = 200_000):
    """Projected gradient with step 1/(2 lmax(G) + eps).

    Stops when the KKT stationarity residual drops to ``tol``; raises
    MaxIterations (best iterate attached) otherwise.  Returns
    (alpha, KktReport).
    """
    if not tol > 0:
        raise InvalidInput(f"tol must be positive, got {tol}")
    lmax = power_iteration_lmax(problem.gram)
    step = 1.0 / (2.0 * lmax + 1e-12)
    a = np.full(problem.size, 1.0 / problem.size)
    best = a
    best_res = np.inf
    for _ in range(max_iter):
        a = simplex_project(a - step * (2.0 * problem.gram @ a - 2.0 * problem.linear))
        report = kkt_residual(problem, a)
        if report.stationarity < best_res:
            best, best_res = a, report.stationarity
        if report.stationarity <= tol:
            return a, report
    raise MaxIterations(
        f"projected gradient reached {max_iter} iterations "
        f"(best stationarity {best_res:.3e})",
        best=best,
    )


def solve_entropic_qp(problem: QpProblem, tau: float, tol: float = 1e-13,
                      max_iter: int = 100_000, start=None) -> np.ndarray:
    """Damped softmax fixed point  a <- a/2 + softmax((2b - 2Ga)/tau)/2.

    Stops when successive iterates differ by at most ``tol`` in the max
    norm; the returned point then satisfies the fixed-point equation to
    within 10*tol.
    """
    if not tau > 0:
        raise InvalidInput(f"tau must be positive, got {tau}")
    if not tol > 0:
        raise InvalidInput(f"tol must be positive, got {tol}")
    a = np.full(problem.size, 1.0 / problem.size) if start is None \
        else as_vector(start, "start").copy()
    eta = 0.5
    best = a
    best_diff = np.inf
    for _ in range(max_iter):
        target = softmax((2.0 * problem.linear - 2.0 * problem.gram @ a) / tau)
        new = (1.0 - eta) * a + eta * target
        diff = float(np.abs(new - a).max())
        a = new
        if diff < best_diff:
            best, best_diff = a, diff
        if diff <= tol:
            return a
    raise MaxIterations(
        f"entropic fixed point reached {max_iter} iterations "
        f"(best successive move {best_diff:.3e})",
        best=best,
    )


def fixed_point_residual(problem: QpProblem, tau: float, alpha) -> float:
    a = as_vector(alpha, "alpha")
    target = softmax((2.0 * problem.linear - 2.0 * problem.gram @ a) / tau)
    return float(np.abs(a - target).max())


def mirror_descent_entropy_max(scores, lam: float, tol: float = 1e-14,
                               max_iter: int = 2_000) -> np.ndarray:
    """Maximize <w, s> + lam H(w) over the simplex by mirror ascent.

    Multiplicative update with step 1/(2 lam); the log-space iteration is
    an affine contraction, so convergence is geometric.  Serves as the
    independent oracle for the closed-form softmax optimum.
    """
    s = as_vector(scores, "scores")
    if not lam > 0:
        raise InvalidInput(f"lam must be positive, got {lam}")
    w = np.full(s.size, 1.0 / s.size)
    eta = 1.0 / (2.0 * lam)
    for _ in range(max_iter):
        grad = s - lam * (np.log(np.maximum(w, 1e-300)) + 1.0)
        logits = np.log(np.maximum(w, 1e-300)) + eta * grad
        new = softmax(logits)
        if float(np.abs(new - w).max()) <= tol:
            return new
        w = new
    return w


def entropic_linear_argmax(scores, lam: float, verify: bool = True,
                           verify_tol: float = 1e-8) -> np.ndarray:
    """Optimal weights of the linear-plus-entropy problem: softmax(s/lam).

    With ``verify`` the closed form is checked against the mirror-descent
    oracle; disagreement beyond ``verify_tol`` raises OracleDisagreement.
    """
    s = as_vector(scores, "scores")
    if not (np.isfinite(lam) and lam > 0):
        raise InvalidInput(f"lam must be positive, got {lam}")
    w = softmax(s / lam)
    if verify:
        oracle = mirror_descent_entropy_max(s, lam)
        gap = float(np.abs(w - oracle).max())
        if gap > verify_tol:
            raise OracleDisagreement(
                f"softmax and mirror descent differ by {gap:.3e} > {verify_tol:g}"
            )
    return w


def random_point_certificate(problem: QpProblem, alpha, n_points: int = 1000,
                             seed: int = 0) -> float:
    """min over random simplex points of  obj(point) - obj(alpha).

    Nonnegative means alpha beats every sampled point.
    """
    a = as_vector(alpha, "alpha")
    gen = stream(seed, 13)
    pts = gen.dirichlet(np.ones(problem.size), size=n_points)
    objs = np.einsum("bi,ij,bj->b", pts, problem.gram, pts) - 2.0 * pts @ problem.linear
    return float(objs.min() - objective(problem, a))


@dataclass(frozen=True)
class GammaSweepResult:
    taus: tuple
    distances: tuple
    monotone: bool            # distances nonincreasing within 1e-9 slack
    degenerate: bool          # reference switched to the entropic limit point
    reference: np.ndarray
    entropic_solutions: tuple
    objective_values: tuple   # optimal entropic objective per temperature
    value_monotone: bool      # values nondecreasing as tau falls (1e-9 slack)


def gamma_convergence_sweep(problem: QpProblem, tau_grid, tol: float = 1e-13,
                            max_iter: int = 100_000) -> GammaSweepResult:
    """Distance from the entropic solution to the QP solution along a
    descending temperature grid (warm-started chain).

    Degenerate problems (λ_min of G on the active face of the QP solution
    below 1e-8, support size >= 2) switch the reference to the entropic
    limit point, i.e. the solution at the smallest temperature.
    """
    taus = [float(t) for t in tau_grid]
    if not taus or any(t <= 0 for t in taus):
        raise InvalidInput("tau grid must be positive")
    if any(taus[i + 1] >= taus[i] for i in range(len(taus) - 1)):
        raise InvalidInput("tau grid must be strictly descending")

    alpha0, _ = solve_simplex_qp(problem)
    support = np.nonzero(alpha0 > 1e-9)[0]
    degenerate = False
    if support.size >= 2:
        sub = problem.gram[np.ix_(support, support)]
        degenerate = bool(np.linalg.eigvalsh(sub).min() < 1e-8)

    solutions = []
    start = None
    for tau in taus:
        a = solve_entropic_qp(problem, tau, tol=tol, max_iter=max_iter, start=start)
        solutions.append(a)
        start = a

    reference = solutions[-1] if degenerate else alpha0
    distances = tuple(float(np.abs(a - reference).max()) for a in solutions)
    monotone = all(
        distances[i + 1] <= distances[i] + 1e-9 for i in range(len(distances) - 1)
    )
    # The entropy term -tau*H rises pointwise as tau falls, so the optimal
    # value must be nondecreasing along the descending grid.
    values = tuple(
        entropic_objective(problem, tau, a) for tau, a in zip(taus, solutions)
    )
    value_monotone = all(
        values[i + 1] >= values[i] - 1e-9 for i in range(len(values) - 1)
    )
    return GammaSweepResult(
        taus=tuple(taus),
        distances=distances,
        monotone=monotone,
        degenerate=degenerate,
        reference=reference,
        entropic_solutions=tuple(solutions),
        objective_values=values,
        value_monotone=value_monotone,
    )


def kkt_to_json(report: KktReport) -> dict:
    return {
        "stationarity": report.stationarity,
        "complementary_slackness": report.complementary_slackness,
        "primal_feasibility": report.primal_feasibility,
        "lam": report.lam,
        "eta": report.eta.tolist(),
    }


def save_problems(problems, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"problems": [p.to_json() for p in problems]}, fh,
                  indent=2, sort_keys=True)
        fh.write("\n")


def load_problems(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return [QpProblem.from_json(p) for p in doc["problems"]]
