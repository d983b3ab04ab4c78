"""Desk-scale studies: each one checks a family of identities or bounds
against the exact oracles and returns plain rows plus named verdicts.

The CLI serializes the rows; the acceptance suite asserts the verdicts.
Workers are module-level functions of (master seed, trial index) so they
parallelize without losing determinism.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import backdoor as bd
from . import frontdoor as fd
from . import membank as mb
from . import qp as qp_mod
from . import scm as scm_mod
from .numeric import softmax
from .parallel import map_in_order
from .rng import stream

# Stream salts: one disjoint namespace per study.
_S_BACKDOOR = 0x1000
_S_FRONTDOOR = 0x2000
_S_NEGCTRL = 0x3000
_S_NWGM = 0x4000
_S_GATE = 0x5000
_S_LINARG = 0x6000
_S_RANDQP = 0x7000
_S_ISO = 0x8000
_S_MEMBANK = 0x9000
_S_ROBUST = 0xA000
_S_GAPSTUDY = 0xB000


@dataclass(frozen=True)
class Verdict:
    criterion: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class StudyResult:
    name: str
    header: tuple
    rows: tuple
    verdicts: tuple
    summary: dict


def verdict_line(v: Verdict) -> str:
    return f"[{'PASS' if v.passed else 'FAIL'}] {v.criterion}: {v.detail}"


# ---------------------------------------------------------------------------
# Criterion 1: backdoor identity sweep

def _backdoor_trial(seed: int, trial: int, max_card: int):
    spec = scm_mod.random_spec(stream(seed, _S_BACKDOOR + trial), max_card)
    cond, priors = scm_mod.extract_backdoor_tables(spec)
    err = 0.0
    for t in range(spec.card("T")):
        adjusted = bd.backdoor_adjust(cond[t], priors)
        oracle = scm_mod.intervene(spec, {"T": t}, "Y")
        err = max(err, float(np.abs(adjusted - oracle).max()))
    return (trial, spec.card("T"), spec.card("Z"), spec.card("Y"), err)


def backdoor_identity_study(seed: int, trials: int = 200, max_card: int = 8,
                            tol: float = 1e-12, jobs: int = 1) -> StudyResult:
    rows = map_in_order(
        _backdoor_trial, [(seed, i, max_card) for i in range(trials)], jobs=jobs
    )
    worst = max(r[-1] for r in rows)
    verdict = Verdict(
        criterion="C1-backdoor-identity",
        passed=worst <= tol,
        detail=f"max |adjusted - do(T)| = {worst:.3e} over {trials} specs (tol {tol:g})",
    )
    return StudyResult(
        name="backdoor_identity",
        header=("trial", "card_t", "card_z", "card_y", "max_abs_err"),
        rows=tuple(rows),
        verdicts=(verdict,),
        summary={"max_abs_err": worst, "trials": trials},
    )


# ---------------------------------------------------------------------------
# Criterion 2: front-door identity sweep + negative control

def _frontdoor_trial(seed: int, trial: int, max_card: int, negative: bool):
    salt = _S_NEGCTRL if negative else _S_FRONTDOOR
    spec = scm_mod.random_spec(stream(seed, salt + trial), max_card,
                               direct_x_to_y=negative)
    pymx, pmx, px = scm_mod.extract_frontdoor_tables(spec)
    err = 0.0
    for x in range(spec.card("X")):
        adjusted = fd.frontdoor_adjust(pymx, pmx[x], px)
        oracle = scm_mod.intervene(spec, {"X": x}, "Y")
        err = max(err, float(np.abs(adjusted - oracle).max()))
    kind = "negative" if negative else "positive"
    return (trial, kind, spec.card("X"), spec.card("M"), spec.card("Y"), err)


def frontdoor_identity_study(seed: int, trials: int = 200, neg_trials: int = 20,
                             max_card: int = 8, tol: float = 1e-12,
                             neg_gap: float = 1e-3, jobs: int = 1) -> StudyResult:
    args = [(seed, i, max_card, False) for i in range(trials)]
    args += [(seed, i, max_card, True) for i in range(neg_trials)]
    rows = map_in_order(_frontdoor_trial, args, jobs=jobs)
    pos_err = max(r[-1] for r in rows if r[1] == "positive")
    neg_max = max(r[-1] for r in rows if r[1] == "negative")
    verdicts = (
        Verdict(
            criterion="C2-frontdoor-identity",
            passed=pos_err <= tol,
            detail=f"max |adjusted - do(X)| = {pos_err:.3e} over {trials} specs (tol {tol:g})",
        ),
        Verdict(
            criterion="C2-negative-control",
            passed=neg_max > neg_gap,
            detail=f"largest direct-edge gap = {neg_max:.3e} over {neg_trials} specs "
                   f"(needs > {neg_gap:g})",
        ),
    )
    return StudyResult(
        name="frontdoor_identity",
        header=("trial", "kind", "card_x", "card_m", "card_y", "max_abs_err"),
        rows=tuple(rows),
        verdicts=verdicts,
        summary={"max_abs_err_positive": pos_err, "max_gap_negative": neg_max},
    )


def spec_identity_study(spec, label: str = "fixture", tol: float = 1e-12) -> StudyResult:
    """Both adjustment identities on one loaded model (fixture check)."""
    rows = []
    cond, priors = scm_mod.extract_backdoor_tables(spec)
    bd_err = 0.0
    for t in range(spec.card("T")):
        gap = float(np.abs(bd.backdoor_adjust(cond[t], priors)
                           - scm_mod.intervene(spec, {"T": t}, "Y")).max())
        rows.append((label, "backdoor", t, gap))
        bd_err = max(bd_err, gap)
    fd_err = 0.0
    if not spec.direct_x_to_y:
        pymx, pmx, px = scm_mod.extract_frontdoor_tables(spec)
        for x in range(spec.card("X")):
            gap = float(np.abs(fd.frontdoor_adjust(pymx, pmx[x], px)
                               - scm_mod.intervene(spec, {"X": x}, "Y")).max())
            rows.append((label, "frontdoor", x, gap))
            fd_err = max(fd_err, gap)
    verdicts = (
        Verdict(
            criterion="C1-backdoor-identity-fixture",
            passed=bd_err <= tol,
            detail=f"max backdoor gap {bd_err:.3e} on {label} (tol {tol:g})",
        ),
        Verdict(
            criterion="C2-frontdoor-identity-fixture",
            passed=fd_err <= tol,
            detail=f"max front-door gap {fd_err:.3e} on {label} (tol {tol:g})",
        ),
    )
    return StudyResult(
        name="spec_identity",
        header=("spec", "identity", "state", "max_abs_err"),
        rows=tuple(rows),
        verdicts=verdicts,
        summary={"backdoor_err": bd_err, "frontdoor_err": fd_err, "spec": label},
    )


# ---------------------------------------------------------------------------
# Criterion 3: NWGM exactness conditions

def _nwgm_trial(seed: int, trial: int):
    gen = stream(seed, _S_NWGM + trial)
    n_classes = int(gen.integers(2, 7))
    n_conf = int(gen.integers(2, 7))
    priors = gen.dirichlet(np.ones(n_conf))

    single = bd.ScoreTable(scores=gen.normal(size=(n_classes, 1)) * 3.0)
    gap_single = bd.nwgm_gap(single, np.ones(1)).max_gap

    col = gen.normal(size=n_classes) * 3.0
    constant = bd.ScoreTable(scores=np.tile(col[:, None], (1, n_conf)))
    gap_const = bd.nwgm_gap(constant, priors).max_gap

    s_t = gen.normal(size=n_classes) * 2.0
    s_z = gen.normal(size=n_conf) * 2.0
    table = bd.ScoreTable.from_additive(s_t, s_z)
    approx = bd.nwgm_gap(table, priors).approx
    direct = softmax(bd.deconfounded_score(s_t, s_z, priors))
    gap_additive = float(np.abs(approx - direct).max())
    return (trial, gap_single, gap_const, gap_additive)


def nwgm_exactness_study(seed: int, trials: int = 100,
                         tol: float = 1e-14, jobs: int = 1) -> StudyResult:
    rows = map_in_order(_nwgm_trial, [(seed, i) for i in range(trials)], jobs=jobs)
    worst_single = max(r[1] for r in rows)
    worst_const = max(r[2] for r in rows)
    worst_add = max(r[3] for r in rows)
    worst = max(worst_single, worst_const, worst_add)
    verdict = Verdict(
        criterion="C3-nwgm-exactness",
        passed=worst <= tol,
        detail=(
            f"gaps: single-confounder {worst_single:.2e}, z-constant {worst_const:.2e}, "
            f"additive identity {worst_add:.2e} over {trials} tables (tol {tol:g})"
        ),
    )
    return StudyResult(
        name="nwgm_exactness",
        header=("trial", "gap_single_z", "gap_z_constant", "gap_additive_identity"),
        rows=tuple(rows),
        verdicts=(verdict,),
        summary={"max_gap": worst},
    )


def _nwgm_gap_trial(seed: int, trial: int, spread: float):
    gen = stream(seed, _S_GAPSTUDY + trial)
    n_classes = int(gen.integers(2, 6))
    n_conf = int(gen.integers(2, 6))
    priors = gen.dirichlet(np.ones(n_conf))
    table = bd.ScoreTable(scores=gen.normal(size=(n_classes, n_conf)) * spread)
    report = bd.nwgm_gap(table, priors)
    per_z = [softmax(table.scores[:, z]) for z in range(n_conf)]
    tv = max(
        0.5 * float(np.abs(per_z[i] - per_z[j]).sum())
        for i in range(n_conf) for j in range(i + 1, n_conf)
    )
    return (trial, spread, n_classes, n_conf, report.max_gap, report.mean_gap,
            tv, report.max_gap <= tv + 1e-12)


def nwgm_gap_study(seed: int, trials: int = 60, jobs: int = 1) -> StudyResult:
    """Descriptive study: the approximation gap against the spread of the
    per-confounder softmax outputs, at three score magnitudes."""
    spreads = (0.5, 2.0, 5.0)
    args = [(seed, i, spreads[i % 3]) for i in range(trials)]
    rows = map_in_order(_nwgm_gap_trial, args, jobs=jobs)
    within = all(r[-1] for r in rows)
    return StudyResult(
        name="nwgm_gap_study",
        header=("trial", "score_scale", "n_classes", "n_confounders",
                "max_gap", "mean_gap", "tv_spread", "within_tv_bound"),
        rows=tuple(rows),
        verdicts=(),
        summary={"all_within_tv_bound": within,
                 "max_gap_seen": max(r[4] for r in rows)},
    )


# ---------------------------------------------------------------------------
# Criterion 7: robust-mediator direction

def robustness_study(seed: int, spec, rho: float = 0.5, n_samples: int = 10_000,
                     n_seeds: int = 200, win_threshold: float = 0.7,
                     jobs: int = 1) -> StudyResult:
    trial_seeds = fd.derive_trial_seeds(seed, n_seeds, salt=_S_ROBUST)
    at_rho = fd.mediator_robustness_experiment(spec, rho, n_samples, trial_seeds, jobs=jobs)
    at_null = fd.mediator_robustness_experiment(spec, 0.0, n_samples, trial_seeds, jobs=jobs)
    rows = [
        (r.seed, r.rho, r.n_samples, r.err_visual_only, r.err_depth_guided, r.winner)
        for rep in (at_null, at_rho) for r in rep.rows
    ]
    three_sigma = 3.0 * (0.25 / n_seeds) ** 0.5
    verdicts = (
        Verdict(
            criterion="C7-robust-mediator",
            passed=at_rho.win_fraction >= win_threshold,
            detail=f"depth-guided wins {at_rho.win_fraction:.1%} of {n_seeds} seeds at "
                   f"rho={rho:g} (needs >= {win_threshold:.0%})",
        ),
        Verdict(
            criterion="C7-null-winrate",
            passed=abs(at_null.win_fraction - 0.5) <= three_sigma,
            detail=f"win rate {at_null.win_fraction:.1%} at rho=0 "
                   f"(band 50% +/- {three_sigma:.1%})",
        ),
    )
    return StudyResult(
        name="mediator_robustness",
        header=("seed", "rho", "n_samples", "err_visual_only", "err_depth_guided", "winner"),
        rows=tuple(rows),
        verdicts=verdicts,
        summary={
            "win_fraction_at_rho": at_rho.win_fraction,
            "win_fraction_at_null": at_null.win_fraction,
            "rho": rho,
            "all_covered": at_rho.all_covered and at_null.all_covered,
        },
    )


# ---------------------------------------------------------------------------
# Criterion 8: gate contract

def _gate_trial(seed: int, trial: int, dim: int):
    gen = stream(seed, _S_GATE + trial)
    base = fd.GatedFusionParams.random(dim, int(gen.integers(1 << 31)), gate=0.5)
    m_hat = gen.normal(size=dim)
    x_hat = gen.normal(size=dim)
    x1 = gen.normal(size=dim)
    x2 = gen.normal(size=dim)

    zero = replace(base, gate=0.0)
    one = replace(base, gate=1.0)
    passthrough = bool(np.array_equal(fd.gated_fuse(m_hat, x_hat, x1, zero), x1))
    joint = np.concatenate([m_hat, x_hat])
    mlp = base.w2 @ np.maximum(base.w1 @ joint + base.b1, 0.0) + base.b2
    mlp_only = bool(np.array_equal(fd.gated_fuse(m_hat, x_hat, x1, one), mlp))

    gate = float(gen.uniform(0.1, 0.9))
    params = replace(base, gate=gate)
    lhs = fd.gated_fuse(m_hat, x_hat, x1, params) - fd.gated_fuse(m_hat, x_hat, x2, params)
    rhs = (1.0 - gate) * (x1 - x2)
    lin_err = float(np.abs(lhs - rhs).max())
    return (trial, gate, passthrough, mlp_only, lin_err)


def gate_contract_study(seed: int, trials: int = 100, dim: int = 6,
                        lin_tol: float = 1e-14, jobs: int = 1) -> StudyResult:
    rows = map_in_order(_gate_trial, [(seed, i, dim) for i in range(trials)], jobs=jobs)
    all_pass = all(r[2] for r in rows)
    all_mlp = all(r[3] for r in rows)
    worst_lin = max(r[4] for r in rows)
    verdict = Verdict(
        criterion="C8-gate-contract",
        passed=all_pass and all_mlp and worst_lin <= lin_tol,
        detail=(
            f"gate-0 passthrough exact: {all_pass}; gate-1 MLP-only exact: {all_mlp}; "
            f"max linearity error {worst_lin:.2e} over {trials} instances (tol {lin_tol:g})"
        ),
    )
    return StudyResult(
        name="gate_contract",
        header=("trial", "gate", "passthrough_exact", "mlp_only_exact", "linearity_err"),
        rows=tuple(rows),
        verdicts=(verdict,),
        summary={"max_linearity_err": worst_lin},
    )


# ---------------------------------------------------------------------------
# Criterion 4: attention-as-optimum oracles

def _linear_argmax_trial(seed: int, trial: int):
    gen = stream(seed, _S_LINARG + trial)
    n = int(gen.integers(3, 9))
    lam = float(gen.uniform(0.3, 2.0))
    scores = gen.normal(size=n) * 2.0
    w = qp_mod.entropic_linear_argmax(scores, lam, verify=False)
    oracle = qp_mod.mirror_descent_entropy_max(scores, lam)
    return (trial, n, lam, float(np.abs(w - oracle).max()))


def _random_problem(seed: int, trial: int) -> qp_mod.QpProblem:
    gen = stream(seed, _S_RANDQP + trial)
    size = int(gen.integers(3, 9))
    tokens = gen.normal(size=(size, size + 2)) / np.sqrt(size + 2)
    mu = gen.normal(size=size + 2)
    return qp_mod.QpProblem.from_tokens(tokens, mu)


def _certificate_trial(seed: int, trial: int, n_points: int):
    problem = _random_problem(seed, trial)
    alpha, report = qp_mod.solve_simplex_qp(problem)
    margin = qp_mod.random_point_certificate(problem, alpha, n_points=n_points,
                                             seed=seed + trial)
    return (f"random-{trial}", problem.size, report.stationarity, margin)


def qp_oracle_study(seed: int, bundled, trials: int = 100, random_qps: int = 20,
                    tau_grid=(1.0, 0.3, 0.1, 0.03, 0.01), cert_points: int = 1000,
                    agree_tol: float = 1e-8, final_tol: float = 1e-3,
                    jobs: int = 1) -> StudyResult:
    # Linear-plus-entropy optimum vs mirror descent.
    lin_rows = map_in_order(
        _linear_argmax_trial, [(seed, i) for i in range(trials)], jobs=jobs
    )
    worst_agree = max(r[-1] for r in lin_rows)

    # Certificates: bundled problems first, then random ones.
    cert_rows = []
    for i, problem in enumerate(bundled):
        alpha, report = qp_mod.solve_simplex_qp(problem)
        margin = qp_mod.random_point_certificate(problem, alpha,
                                                 n_points=cert_points, seed=seed + i)
        cert_rows.append((f"bundled-{i}", problem.size, report.stationarity, margin))
    cert_rows += map_in_order(
        _certificate_trial, [(seed, i, cert_points) for i in range(random_qps)], jobs=jobs
    )
    worst_margin = min(r[-1] for r in cert_rows)

    # Temperature sweeps on the bundled problems.
    sweep_rows = []
    sweeps = []
    for i, problem in enumerate(bundled):
        sweep = qp_mod.gamma_convergence_sweep(problem, tau_grid)
        sweeps.append(sweep)
        for tau, dist in zip(sweep.taus, sweep.distances):
            sweep_rows.append((f"bundled-{i}", tau, dist, sweep.monotone))
    all_monotone = all(s.monotone for s in sweeps)
    worst_final = max(s.distances[-1] for s in sweeps)

    # Numeric report on the quadratic-objective shortcut (never asserted).
    quad_rows = []
    for i, problem in enumerate(bundled):
        tau = 1.0
        entro = qp_mod.solve_entropic_qp(problem, tau)
        shortcut = softmax(2.0 * problem.linear / tau)
        quad_rows.append((
            f"bundled-{i}", tau,
            float(np.abs(entro - shortcut).max()),
            qp_mod.entropic_objective(problem, tau, shortcut)
            - qp_mod.entropic_objective(problem, tau, entro),
        ))

    verdicts = (
        Verdict(
            criterion="C4-linear-argmax",
            passed=worst_agree <= agree_tol,
            detail=f"max softmax/mirror-descent gap {worst_agree:.2e} over {trials} "
                   f"instances (tol {agree_tol:g})",
        ),
        Verdict(
            criterion="C4-qp-certificate",
            passed=worst_margin >= 0.0,
            detail=f"min certificate margin {worst_margin:.3e} over "
                   f"{len(cert_rows)} problems x {cert_points} random points",
        ),
        Verdict(
            criterion="C4-gamma-convergence",
            passed=all_monotone and worst_final < final_tol,
            detail=f"sweeps monotone: {all_monotone}; worst final distance "
                   f"{worst_final:.2e} (needs < {final_tol:g})",
        ),
    )
    return StudyResult(
        name="qp_oracles",
        header=(),  # multi-table study; the CLI writes each table separately
        rows=(),
        verdicts=verdicts,
        summary={
            "linear_argmax": {"header": ("trial", "size", "lam", "gap"),
                              "rows": lin_rows},
            "certificates": {"header": ("problem", "size", "stationarity",
                                        "certificate_margin"),
                             "rows": cert_rows},
            "gamma_sweeps": {"header": ("problem", "tau", "distance", "monotone_flag"),
                             "rows": sweep_rows,
                             "per_problem": [
                                 {"taus": list(s.taus),
                                  "distances": list(s.distances),
                                  "monotone": s.monotone,
                                  "degenerate": s.degenerate,
                                  "objective_values": list(s.objective_values),
                                  "value_monotone": s.value_monotone}
                                 for s in sweeps
                             ]},
            "entropic_quadratic_gap": {"header": ("problem", "tau", "weight_gap",
                                                  "objective_gap"),
                                       "rows": quad_rows},
        },
    )


# ---------------------------------------------------------------------------
# Criterion 5: isotropic-token slack

def _isotropic_trial(seed: int, trial: int, ratios, size: int):
    # Documented test family: G = gamma * I at tau = 1, b ~ U[0, 0.25].
    # Small score spreads keep the fixed point contractive at gamma/tau = 1
    # and give the slack bound real headroom at 0.01.
    gen = stream(seed, _S_ISO + trial)
    b = gen.uniform(0.0, 0.25, size)
    tau = 1.0
    shortcut = softmax(2.0 * b / tau)
    out = []
    for ratio in ratios:
        gamma = ratio * tau
        problem = qp_mod.QpProblem(gram=gamma * np.eye(size), linear=b)
        alpha = qp_mod.solve_entropic_qp(problem, tau)
        gap = float(np.abs(alpha - shortcut).max())
        bound = 2.0 * gamma / tau * float(alpha.max() - alpha.min())
        out.append((trial, ratio, gap, bound, gap <= bound + 1e-15))
    return out


def isotropic_slack_study(seed: int, instances: int = 50,
                          ratios=(1.0, 0.1, 0.01), size: int = 6,
                          final_tol: float = 1e-3, jobs: int = 1) -> StudyResult:
    nested = map_in_order(
        _isotropic_trial, [(seed, i, tuple(ratios), size) for i in range(instances)],
        jobs=jobs,
    )
    rows = [row for batch in nested for row in batch]
    per_instance_monotone = all(
        all(batch[k + 1][2] <= batch[k][2] for k in range(len(batch) - 1))
        for batch in nested
    )
    final_gaps = [batch[-1][2] for batch in nested]
    bounds_ok = all(r[-1] for r in rows)
    verdict = Verdict(
        criterion="C5-isotropic-slack",
        passed=per_instance_monotone and max(final_gaps) <= final_tol and bounds_ok,
        detail=(
            f"gap decreasing in gamma/tau on {instances}/{instances} instances: "
            f"{per_instance_monotone}; max gap at ratio {min(ratios):g} = "
            f"{max(final_gaps):.2e} (tol {final_tol:g}); slack bound held: {bounds_ok}"
        ),
    )
    return StudyResult(
        name="isotropic_slack",
        header=("instance", "gamma_over_tau", "gap", "slack_bound", "within_bound"),
        rows=tuple(rows),
        verdicts=(verdict,),
        summary={"max_final_gap": max(final_gaps)},
    )


# ---------------------------------------------------------------------------
# Criterion 6: memory-bank bounds and rates

def _bound_draws(seed: int, kappa: float, draws: int, window: int, dim: int):
    violations = 0
    l1_pass = 0
    max_dev = 0.0
    lower = np.exp(-2.0 * kappa) / window
    upper = np.exp(2.0 * kappa) / window
    range_ok = True
    for i in range(draws):
        gen = stream(seed, _S_MEMBANK + i)
        # Scale embeddings so raw similarities regularly exceed the clamp.
        emb = gen.normal(size=(window, dim)) * (2.0 * kappa / np.sqrt(dim))
        current = gen.normal(size=dim)
        bank = mb.MemoryBank(capacity=window, kappa=kappa)
        for t, row in enumerate(emb):
            bank = mb.push(bank, row, t)
        report = mb.weight_deviation(bank, current)
        if not report.per_coord_ok:
            violations += 1
        if report.scaled_l1_ok:
            l1_pass += 1
        max_dev = max(max_dev, report.max_deviation)
        w = report.weights
        if w.min() < lower - 1e-15 or w.max() > upper + 1e-15:
            range_ok = False
    return (kappa, draws, violations, l1_pass / draws, max_dev, range_ok)


def membank_study(seed: int, kappas=(0.1, 1.0, 3.0), draws: int = 1000,
                  window: int = 5, dim: int = 8,
                  w_grid=(4, 16, 64, 256, 1024, 4096), lln_seeds: int = 200,
                  lln_kappa: float = 1.0, slope_band=(-0.7, -0.3),
                  uniform_tol: float = 1e-9, jobs: int = 1) -> StudyResult:
    bound_rows = map_in_order(
        _bound_draws, [(seed + j, float(k), draws, window, dim)
                       for j, k in enumerate(kappas)],
        jobs=jobs,
    )
    bounds_ok = all(r[2] == 0 and r[5] for r in bound_rows)

    # Vanishing clamp: weights must collapse to uniform.
    gen = stream(seed, _S_MEMBANK - 1)
    uniform_dev = 0.0
    for _ in range(100):
        emb = gen.normal(size=(window, dim)) * 5.0
        bank = mb.MemoryBank(capacity=window, kappa=1e-12)
        for t, row in enumerate(emb):
            bank = mb.push(bank, row, t)
        _, w = mb.context(bank, gen.normal(size=dim))
        uniform_dev = max(uniform_dev, float(np.abs(w - 1.0 / window).max()))

    frames = mb.GaussianFrames(mean=np.zeros(dim), scale=1.0)
    conv = mb.convergence_experiment(
        frames, w_grid, [seed + 1_000_000 + i for i in range(lln_seeds)],
        kappa=lln_kappa, jobs=jobs,
    )
    slope = conv.slope_unweighted
    conv_rows = [
        (r.window, r.seed_count, r.mean_err_unweighted, r.mean_err_weighted, slope)
        for r in conv.rows
    ]
    gaps = [r.mean_weighted_minus_unweighted for r in conv.rows]
    sems = [r.sem_weighted_minus_unweighted for r in conv.rows]
    envelope = np.exp(2 * lln_kappa) - 1.0
    within_envelope = all(
        g <= envelope * r.mean_max_norm for g, r in zip(gaps, conv.rows)
    )
    # The gap plateaus at the weighting bias floor, so adjacent windows are
    # compared up to Monte-Carlo noise (3 standard errors).
    nonincreasing = all(
        gaps[i + 1] <= gaps[i] + 3.0 * (sems[i] + sems[i + 1])
        for i in range(len(gaps) - 1)
    )
    envelope_ok = within_envelope and nonincreasing

    verdicts = (
        Verdict(
            criterion="C6-weight-bounds",
            passed=bounds_ok,
            detail=f"per-coordinate bound violations: "
                   f"{sum(r[2] for r in bound_rows)} in {len(kappas)}x{draws} draws "
                   f"(kappas {tuple(kappas)})",
        ),
        Verdict(
            criterion="C6-kappa-uniformity",
            passed=uniform_dev <= uniform_tol,
            detail=f"max |w - 1/W| = {uniform_dev:.2e} at kappa=1e-12 (tol {uniform_tol:g})",
        ),
        Verdict(
            criterion="C6-lln-slope",
            passed=slope_band[0] <= slope <= slope_band[1],
            detail=f"fitted slope {slope:.3f} over W={tuple(w_grid)}, "
                   f"{lln_seeds} seeds (band {slope_band})",
        ),
    )
    return StudyResult(
        name="membank",
        header=(),
        rows=(),
        verdicts=verdicts,
        summary={
            "weight_bounds": {"header": ("kappa", "draws", "per_coord_violations",
                                         "scaled_l1_pass_rate", "max_deviation",
                                         "range_bound_ok"),
                              "rows": bound_rows},
            "uniformity": {"max_dev": uniform_dev},
            "convergence": {"header": ("W", "seed_count", "mean_err_unweighted",
                                       "mean_err_weighted", "slope"),
                            "rows": conv_rows,
                            "slope_unweighted": conv.slope_unweighted,
                            "slope_weighted": conv.slope_weighted,
                            "envelope_ok": envelope_ok},
        },
    )
