#!/usr/bin/env python3
"""Regenerate the bundled fixtures in src/ceres/fixtures/.

Everything here is deterministic; the committed JSON files are exactly
what this script emits, so their provenance is this file.

Fixtures:
  scm_2state.json   random valid model, every cardinality 2
  scm_8state.json   random valid model, every cardinality 8
  scm_noconf.json   confounder-free model (Z and U collapsed to one state):
                    conditioning and intervening coincide, the degenerate
                    smoke case for both adjustment identities
  scm_4state.json   hand-built 4-state model for the robust-mediator study:
                    the geometric readout equals the mediator table and the
                    visual base table, so both readout channels are exact at
                    corruption 0 while only the visual one degrades with it;
                    the outcome table depends on the mediator asymmetrically
                    (non-cyclic, non-uniform Z prior) so plug-in errors in
                    P(m|x) actually move the adjusted distribution
  qp_problems.json  three problems (sizes 3/4/5) with vertex-dominant optima
                    and small Gram norm: the damped softmax fixed point
                    stays contractive along the whole default temperature
                    grid, which interior optima would break
"""

from pathlib import Path
import sys

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ceres import qp, scm  # noqa: E402
from ceres.rng import stream  # noqa: E402

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "ceres" / "fixtures"


def build_robustness_spec() -> scm.ScmSpec:
    k = 4
    prior_z = np.array([0.4, 0.3, 0.2, 0.1])
    prior_u = np.array([0.5, 0.3, 0.15, 0.05])

    t_given_z = 0.1 * np.ones((k, k)) + 0.6 * np.eye(k)
    t_given_z /= t_given_z.sum(axis=1, keepdims=True)

    x_given_u = 0.08 * np.ones((k, k))
    for u in range(k):
        x_given_u[u, (u + 1) % k] += 0.68
    x_given_u /= x_given_u.sum(axis=1, keepdims=True)

    # One mediator law shared by M itself and both readout channels.
    base = 0.1 * np.ones((k, k)) + 0.6 * np.eye(k)
    base /= base.sum(axis=1, keepdims=True)

    # Corruption flips the visual readout to a state set by U.
    corrupt = np.zeros((k, k, k))
    for x in range(k):
        for u in range(k):
            corrupt[x, u, (x + 1 + u) % k] = 1.0

    y = np.zeros((k, k, k, k, k))
    for t in range(k):
        for m in range(k):
            for z in range(k):
                for u in range(k):
                    row = 0.05 * np.ones(k)
                    row[m] += 0.5
                    row[(m + z) % k] += 0.25
                    row[(t + u) % k] += 0.15
                    y[t, m, z, u] = row / row.sum()

    return scm.make_spec(
        prior_z, prior_u, t_given_z, x_given_u,
        md_given_x=base.copy(), m_given_x=base.copy(), y_table=y,
        mv_base=base.copy(), mv_corrupt=corrupt, corruption_rho=0.5,
        embedding_dim=8, embedding_seed=4040,
    )


def build_qp_problems() -> list:
    problems = []
    gen = stream(2026, 0xF1)
    for size in (3, 4, 5):
        m = gen.normal(size=(size, size))
        gram = 0.2 * (m @ m.T) / size
        linear = gen.uniform(0.0, 0.5, size)
        linear[int(gen.integers(size))] += 1.5
        problems.append(qp.QpProblem(gram=gram, linear=linear))
    return problems


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)

    two = scm.random_spec(stream(1101, 0), cards={v: 2 for v in scm.VARIABLES})
    scm.save_spec(two, FIXTURES / "scm_2state.json")

    eight = scm.random_spec(stream(1108, 0), cards={v: 8 for v in scm.VARIABLES})
    scm.save_spec(eight, FIXTURES / "scm_8state.json")

    noconf_cards = {v: 2 for v in scm.VARIABLES}
    noconf_cards["Z"] = noconf_cards["U"] = 1
    noconf = scm.random_spec(stream(1100, 0), cards=noconf_cards)
    scm.save_spec(noconf, FIXTURES / "scm_noconf.json")

    robust = build_robustness_spec()
    assert not scm.validate_spec(robust)
    scm.save_spec(robust, FIXTURES / "scm_4state.json")

    problems = build_qp_problems()
    for problem in problems:
        sweep = qp.gamma_convergence_sweep(problem, (1.0, 0.3, 0.1, 0.03, 0.01))
        assert sweep.monotone and sweep.distances[-1] < 1e-3, sweep
    qp.save_problems(problems, FIXTURES / "qp_problems.json")

    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
