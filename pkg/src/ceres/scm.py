"""Discrete structural causal model with exact interventional oracles.

The graph has eight variables:

    Z (dataset bias)      -> T (text query)
    U (egocentric factor) -> X (visual frame)
    X, U -> Mv   (visual mediator readout; may be corrupted by U)
    X    -> Md   (geometric mediator readout; U-free by construction)
    X    -> M    (latent mediator; U-free, shields X from Y)
    T, M, Z, U [, X] -> Y

Everything is finite and small, so observational and interventional
distributions are computed exactly by summing the factored joint.
Interventions use graph mutilation: the intervened variable's table is
replaced by a point mass and its parent edges disappear.

Ancestral sampling is vectorized and driven by Philox streams, so a
given ``(spec, seed, n)`` always reproduces the same draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import json

import numpy as np

from .errors import ConditionUnsupported, InvalidInput, SpecError
from .rng import stream

VARIABLES = ("Z", "U", "T", "X", "Mv", "Md", "M", "Y")
_AXIS = {"Z": "z", "U": "u", "T": "t", "X": "x", "Mv": "v", "Md": "d", "M": "m", "Y": "y"}

ROW_SUM_ATOL = 1e-12
LOAD_ROW_SUM_ATOL = 1e-9


@dataclass(frozen=True)
class ScmSample:
    """One joint realization; every index lies inside its cardinality."""

    z: int
    u: int
    t: int
    x: int
    m_v: int
    m_d: int
    m: int
    y: int


@dataclass(frozen=True)
class ScmSpec:
    """Probability tables of the model, innermost axis = child variable.

    ``mv_given_xu`` is the effective visual-readout table.  When the
    corruption decomposition is known it equals
    ``(1-rho) * mv_base + rho * mv_corrupt`` and the spec can be re-mixed
    at a different corruption strength with :func:`with_corruption`.
    """

    prior_z: np.ndarray          # (Z,)
    prior_u: np.ndarray          # (U,)
    t_given_z: np.ndarray        # (Z, T)
    x_given_u: np.ndarray        # (U, X)
    mv_given_xu: np.ndarray      # (X, U, Mv)
    md_given_x: np.ndarray       # (X, Md)
    m_given_x: np.ndarray        # (X, M)
    y_table: np.ndarray          # (T, M, Z, U, Y) or (T, M, Z, U, X, Y)
    direct_x_to_y: bool = False
    corruption_rho: float = 0.0
    mv_base: np.ndarray | None = None      # (X, Mv)
    mv_corrupt: np.ndarray | None = None   # (X, U, Mv)
    embedding_dim: int = 8
    embedding_seed: int = 0

    @property
    def cards(self) -> dict:
        return {
            "Z": self.prior_z.shape[0],
            "U": self.prior_u.shape[0],
            "T": self.t_given_z.shape[-1],
            "X": self.x_given_u.shape[-1],
            "Mv": self.mv_given_xu.shape[-1],
            "Md": self.md_given_x.shape[-1],
            "M": self.m_given_x.shape[-1],
            "Y": self.y_table.shape[-1],
        }

    def card(self, name: str) -> int:
        return self.cards[name]


def _as_prob_array(a, name, ndim):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != ndim:
        raise SpecError(f"{name} must be {ndim}-D, got shape {a.shape}")
    return a


def make_spec(
    prior_z,
    prior_u,
    t_given_z,
    x_given_u,
    md_given_x,
    m_given_x,
    y_table,
    *,
    mv_given_xu=None,
    mv_base=None,
    mv_corrupt=None,
    corruption_rho=0.0,
    direct_x_to_y=False,
    embedding_dim=8,
    embedding_seed=0,
) -> ScmSpec:
    """Assemble a spec, deriving the mixed Mv table when components are given."""
    if mv_given_xu is None:
        if mv_base is None or mv_corrupt is None:
            raise SpecError("either mv_given_xu or (mv_base, mv_corrupt) is required")
        mv_base = _as_prob_array(mv_base, "Mv_base", 2)
        mv_corrupt = _as_prob_array(mv_corrupt, "Mv_corrupt", 3)
        rho = float(corruption_rho)
        if not 0.0 <= rho <= 1.0:
            raise SpecError(f"corruption_rho must lie in [0, 1], got {rho}")
        mv_given_xu = (1.0 - rho) * mv_base[:, None, :] + rho * mv_corrupt
    else:
        mv_given_xu = _as_prob_array(mv_given_xu, "Mv_given_XU", 3)
        if mv_base is not None:
            mv_base = _as_prob_array(mv_base, "Mv_base", 2)
        if mv_corrupt is not None:
            mv_corrupt = _as_prob_array(mv_corrupt, "Mv_corrupt", 3)
    return ScmSpec(
        prior_z=_as_prob_array(prior_z, "prior_Z", 1),
        prior_u=_as_prob_array(prior_u, "prior_U", 1),
        t_given_z=_as_prob_array(t_given_z, "T_given_Z", 2),
        x_given_u=_as_prob_array(x_given_u, "X_given_U", 2),
        mv_given_xu=mv_given_xu,
        md_given_x=_as_prob_array(md_given_x, "Md_given_X", 2),
        m_given_x=_as_prob_array(m_given_x, "M_given_X", 2),
        y_table=np.asarray(y_table, dtype=np.float64),
        direct_x_to_y=bool(direct_x_to_y),
        corruption_rho=float(corruption_rho),
        mv_base=mv_base,
        mv_corrupt=mv_corrupt,
        embedding_dim=int(embedding_dim),
        embedding_seed=int(embedding_seed),
    )


def with_corruption(spec: ScmSpec, rho: float) -> ScmSpec:
    """Re-mix the visual readout table at corruption strength ``rho``."""
    if spec.mv_base is None or spec.mv_corrupt is None:
        raise InvalidInput("spec carries no corruption decomposition")
    rho = float(rho)
    if not 0.0 <= rho <= 1.0:
        raise InvalidInput(f"rho must lie in [0, 1], got {rho}")
    mixed = (1.0 - rho) * spec.mv_base[:, None, :] + rho * spec.mv_corrupt
    return replace(spec, mv_given_xu=mixed, corruption_rho=rho)


# ---------------------------------------------------------------------------
# Validation

def _check_rows(table: np.ndarray, name: str, violations: list, atol=ROW_SUM_ATOL):
    if np.any(table < 0):
        idx = np.unravel_index(int(np.argmin(table)), table.shape)
        violations.append(
            f"{name}{[int(i) for i in idx]} is negative ({float(table[idx]):.3e})"
        )
    sums = table.sum(axis=-1)
    bad = np.abs(sums - 1.0) > atol
    if np.any(bad):
        idx = np.unravel_index(int(np.argmax(np.abs(sums - 1.0))), sums.shape)
        violations.append(
            f"{name}{[int(i) for i in idx]} sums to {float(sums[idx])!r}, "
            f"expected 1 within {atol:g}"
        )


def validate_spec(spec: ScmSpec) -> list:
    """Return a list of violations; an empty list means the spec is valid."""
    v: list = []
    try:
        cards = spec.cards
    except Exception as exc:  # malformed shapes make cards unreadable
        return [f"unreadable cardinalities: {exc}"]
    for name, c in cards.items():
        if c < 1:
            v.append(f"cardinality of {name} must be positive, got {c}")

    _check_rows(spec.prior_z[None, :], "priors.Z", v)
    _check_rows(spec.prior_u[None, :], "priors.U", v)

    shapes = {
        "tables.T_given_Z": (spec.t_given_z, (cards["Z"], cards["T"])),
        "tables.X_given_U": (spec.x_given_u, (cards["U"], cards["X"])),
        "tables.Mv_given_XU": (spec.mv_given_xu, (cards["X"], cards["U"], cards["Mv"])),
        "tables.Md_given_X": (spec.md_given_x, (cards["X"], cards["Md"])),
        "tables.M_given_X": (spec.m_given_x, (cards["X"], cards["M"])),
    }
    for name, (table, want) in shapes.items():
        if table.shape != want:
            v.append(f"{name} has shape {table.shape}, expected {want}")
        else:
            _check_rows(table, name, v)

    # Structural shielding: the geometric readout and the mediator are
    # functions of X alone.  A stray U axis is a graph violation.
    if spec.md_given_x.ndim != 2:
        v.append("tables.Md_given_X must depend on X only (got extra axes)")
    if spec.m_given_x.ndim != 2:
        v.append("tables.M_given_X must depend on X only (got extra axes)")

    y_want = (cards["T"], cards["M"], cards["Z"], cards["U"])
    y_want += ((cards["X"], cards["Y"]) if spec.direct_x_to_y else (cards["Y"],))
    y_name = "tables.Y_given_TMZUX" if spec.direct_x_to_y else "tables.Y_given_TMZU"
    if spec.y_table.shape != y_want:
        v.append(f"{y_name} has shape {spec.y_table.shape}, expected {y_want}")
    else:
        _check_rows(spec.y_table, y_name, v)

    if spec.mv_base is not None and spec.mv_corrupt is not None:
        mixed = (1 - spec.corruption_rho) * spec.mv_base[:, None, :] \
            + spec.corruption_rho * spec.mv_corrupt
        if mixed.shape != spec.mv_given_xu.shape or not np.allclose(
            mixed, spec.mv_given_xu, atol=1e-12, rtol=0
        ):
            v.append("tables.Mv_given_XU does not match its base/corrupt mixture")
    if not 0.0 <= spec.corruption_rho <= 1.0:
        v.append(f"corruption_rho {spec.corruption_rho} outside [0, 1]")
    if spec.embedding_dim < 1:
        v.append(f"embedding_dim must be positive, got {spec.embedding_dim}")
    return v


def require_valid(spec: ScmSpec) -> ScmSpec:
    problems = validate_spec(spec)
    if problems:
        raise SpecError("invalid spec: " + "; ".join(problems))
    return spec


# ---------------------------------------------------------------------------
# Exact enumeration

def _factors(spec: ScmSpec):
    y_axes = "tmzuxy" if spec.direct_x_to_y else "tmzuy"
    return [
        (spec.prior_z, "z"),
        (spec.prior_u, "u"),
        (spec.t_given_z, "zt"),
        (spec.x_given_u, "ux"),
        (spec.mv_given_xu, "xuv"),
        (spec.md_given_x, "xd"),
        (spec.m_given_x, "xm"),
        (spec.y_table, y_axes),
    ]


def _marginal(factors, out_axes: str) -> np.ndarray:
    subs = ",".join(axes for _, axes in factors) + "->" + out_axes
    return np.einsum(subs, *(arr for arr, _ in factors), optimize=True)


def _check_names(names):
    for name in names:
        if name not in VARIABLES:
            raise InvalidInput(f"unknown variable {name!r}; expected one of {VARIABLES}")


def observational(spec: ScmSpec, target: str, condition: dict | None = None) -> np.ndarray:
    """Exact P(target | condition) by summing the factored joint.

    Raises ConditionUnsupported when the conditioning event has zero
    probability.
    """
    require_valid(spec)
    condition = dict(condition or {})
    _check_names([target, *condition])
    if target in condition:
        raise InvalidInput(f"target {target!r} also appears in the condition")
    cond_vars = [v for v in VARIABLES if v in condition]
    out_axes = "".join(_AXIS[v] for v in cond_vars) + _AXIS[target]
    marg = _marginal(_factors(spec), out_axes)
    for v in cond_vars:
        idx = int(condition[v])
        if not 0 <= idx < spec.card(v):
            raise InvalidInput(f"{v}={idx} outside cardinality {spec.card(v)}")
        marg = marg[idx]
    total = float(marg.sum())
    if total <= 0.0:
        raise ConditionUnsupported(f"conditioning event {condition} has zero probability")
    return marg / total


def intervene(spec: ScmSpec, do_assignment: dict, target: str) -> np.ndarray:
    """Exact P(target | do(assignment)) via mutilated-graph enumeration."""
    require_valid(spec)
    if not do_assignment:
        raise InvalidInput("do_assignment must be nonempty")
    _check_names([target, *do_assignment])
    factors = []
    for arr, axes in _factors(spec):
        child = axes[-1]
        var = next(v for v, a in _AXIS.items() if a == child)
        if var in do_assignment:
            idx = int(do_assignment[var])
            if not 0 <= idx < spec.card(var):
                raise InvalidInput(f"{var}={idx} outside cardinality {spec.card(var)}")
            point = np.zeros(spec.card(var))
            point[idx] = 1.0
            factors.append((point, child))
        else:
            factors.append((arr, axes))
    dist = _marginal(factors, _AXIS[target])
    return dist / dist.sum()


def extract_backdoor_tables(spec: ScmSpec):
    """P(Y | T=t, Z=z) as a (T, Z, Y) array plus the Z prior.

    The inputs the linguistic adjustment consumes, computed by exact
    enumeration of the observational joint.
    """
    marg = _marginal(_factors(spec), "tzy")  # P(t, z, y)
    totals = marg.sum(axis=-1, keepdims=True)
    if np.any(totals <= 0):
        raise ConditionUnsupported("some (T, Z) cell has zero probability")
    return marg / totals, spec.prior_z.copy()


def extract_frontdoor_tables(spec: ScmSpec):
    """P(Y|M=m, X=x') as (M, X, Y), P(M|X) as (X, M), and P(X).

    The inputs the visual adjustment consumes, by exact enumeration.
    """
    mxy = _marginal(_factors(spec), "mxy")  # P(m, x, y)
    totals = mxy.sum(axis=-1, keepdims=True)
    if np.any(totals <= 0):
        raise ConditionUnsupported("some (M, X) cell has zero probability")
    p_y_given_mx = mxy / totals
    p_x = _marginal(_factors(spec), "x")
    xm = _marginal(_factors(spec), "xm")
    p_m_given_x = xm / xm.sum(axis=-1, keepdims=True)
    return p_y_given_mx, p_m_given_x, p_x


# ---------------------------------------------------------------------------
# Sampling

def _draw(gen, table_rows: np.ndarray, n: int) -> np.ndarray:
    """Draw one categorical per row of ``table_rows`` (shape (n, k))."""
    cdf = np.cumsum(table_rows, axis=-1)
    r = gen.random(n)
    idx = (r[:, None] > cdf).sum(axis=1)
    return np.minimum(idx, table_rows.shape[-1] - 1)


def sample_states(spec: ScmSpec, seed: int, n: int) -> dict:
    """Vectorized ancestral sampling; returns a dict of index arrays."""
    require_valid(spec)
    if n < 0:
        raise InvalidInput(f"sample count must be nonnegative, got {n}")
    gen = stream(seed, 0)
    out = {}
    out["Z"] = _draw(gen, np.broadcast_to(spec.prior_z, (n, spec.card("Z"))), n)
    out["U"] = _draw(gen, np.broadcast_to(spec.prior_u, (n, spec.card("U"))), n)
    out["T"] = _draw(gen, spec.t_given_z[out["Z"]], n)
    out["X"] = _draw(gen, spec.x_given_u[out["U"]], n)
    out["Mv"] = _draw(gen, spec.mv_given_xu[out["X"], out["U"]], n)
    out["Md"] = _draw(gen, spec.md_given_x[out["X"]], n)
    out["M"] = _draw(gen, spec.m_given_x[out["X"]], n)
    if spec.direct_x_to_y:
        y_rows = spec.y_table[out["T"], out["M"], out["Z"], out["U"], out["X"]]
    else:
        y_rows = spec.y_table[out["T"], out["M"], out["Z"], out["U"]]
    out["Y"] = _draw(gen, y_rows, n)
    return out


def sample(spec: ScmSpec, seed: int, n: int) -> list:
    """Ancestral sampling returning ``ScmSample`` records."""
    s = sample_states(spec, seed, n)
    return [
        ScmSample(
            z=int(s["Z"][i]), u=int(s["U"][i]), t=int(s["T"][i]), x=int(s["X"][i]),
            m_v=int(s["Mv"][i]), m_d=int(s["Md"][i]), m=int(s["M"][i]), y=int(s["Y"][i]),
        )
        for i in range(n)
    ]


# ---------------------------------------------------------------------------
# Embeddings

_EMBED_STREAMS = {"T": 101, "X": 102, "Mv": 103, "Md": 104}


def embeddings(spec: ScmSpec) -> dict:
    """Per-state embedding tables, (card, dim), unit-normalized rows.

    Generated once per spec from ``embedding_seed``; stand-ins for the
    frozen encoders the estimators would consume in production.
    """
    out = {}
    for var, sid in _EMBED_STREAMS.items():
        gen = stream(spec.embedding_seed, sid)
        table = gen.normal(size=(spec.card(var), spec.embedding_dim))
        norms = np.linalg.norm(table, axis=1, keepdims=True)
        out[var] = table / np.maximum(norms, 1e-300)
    return out


# ---------------------------------------------------------------------------
# Random generation

def _random_rows(gen, shape, floor: float) -> np.ndarray:
    """Random conditional table with every probability >= floor/k."""
    raw = gen.random(shape) + 1e-12
    rows = raw / raw.sum(axis=-1, keepdims=True)
    k = shape[-1]
    return (1.0 - floor) * rows + floor / k


def random_spec(
    seed_or_stream,
    max_card: int = 8,
    *,
    cards: dict | None = None,
    rho: float = 0.0,
    direct_x_to_y: bool = False,
    embedding_dim: int = 8,
    floor: float = 0.1,
) -> ScmSpec:
    """Random valid spec with probabilities bounded away from zero.

    ``floor`` mixes a uniform row into every conditional so the exact
    conditionals extracted for the adjustment identities stay well
    scaled.  Cardinalities are drawn from [2, max_card] unless pinned.
    """
    gen = seed_or_stream if isinstance(seed_or_stream, np.random.Generator) \
        else stream(int(seed_or_stream), 0)
    if cards is None:
        cards = {v: int(gen.integers(2, max_card + 1)) for v in VARIABLES}
    else:
        cards = {v: int(cards[v]) for v in VARIABLES}

    prior_z = _random_rows(gen, (cards["Z"],), floor)
    prior_u = _random_rows(gen, (cards["U"],), floor)
    t_given_z = _random_rows(gen, (cards["Z"], cards["T"]), floor)
    x_given_u = _random_rows(gen, (cards["U"], cards["X"]), floor)
    mv_base = _random_rows(gen, (cards["X"], cards["Mv"]), floor)
    mv_corrupt = _random_rows(gen, (cards["X"], cards["U"], cards["Mv"]), floor)
    md_given_x = _random_rows(gen, (cards["X"], cards["Md"]), floor)
    m_given_x = _random_rows(gen, (cards["X"], cards["M"]), floor)

    base_shape = (cards["T"], cards["M"], cards["Z"], cards["U"])
    if direct_x_to_y:
        y = _random_rows(gen, base_shape + (cards["X"], cards["Y"]), floor)
        # Strong explicit X dependence so the front-door identity fails
        # measurably when the direct edge is switched on.
        shift = np.zeros(base_shape + (cards["X"], cards["Y"]))
        for x in range(cards["X"]):
            onehot = np.zeros(cards["Y"])
            onehot[x % cards["Y"]] = 1.0
            shift[..., x, :] = onehot
        y = 0.4 * y + 0.6 * shift
    else:
        y = _random_rows(gen, base_shape + (cards["Y"],), floor)

    return make_spec(
        prior_z, prior_u, t_given_z, x_given_u, md_given_x, m_given_x, y,
        mv_base=mv_base, mv_corrupt=mv_corrupt, corruption_rho=rho,
        direct_x_to_y=direct_x_to_y, embedding_dim=embedding_dim,
        embedding_seed=int(gen.integers(0, 1 << 32)),
    )


# ---------------------------------------------------------------------------
# JSON interface

def spec_to_json(spec: ScmSpec) -> dict:
    tables = {
        "T_given_Z": spec.t_given_z.tolist(),
        "X_given_U": spec.x_given_u.tolist(),
        "Md_given_X": spec.md_given_x.tolist(),
        "M_given_X": spec.m_given_x.tolist(),
        ("Y_given_TMZUX" if spec.direct_x_to_y else "Y_given_TMZU"): spec.y_table.tolist(),
    }
    if spec.mv_base is not None and spec.mv_corrupt is not None:
        tables["Mv_base"] = spec.mv_base.tolist()
        tables["Mv_corrupt"] = spec.mv_corrupt.tolist()
    else:
        tables["Mv_given_XU"] = spec.mv_given_xu.tolist()
    return {
        "cards": dict(spec.cards),
        "priors": {"Z": spec.prior_z.tolist(), "U": spec.prior_u.tolist()},
        "tables": tables,
        "embedding_dim": spec.embedding_dim,
        "embedding_seed": spec.embedding_seed,
        "corruption_rho": spec.corruption_rho,
        "direct_x_to_y": spec.direct_x_to_y,
    }


def save_spec(spec: ScmSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_json(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_rows(doc_tables: dict, key: str, ndim: int) -> np.ndarray:
    if key not in doc_tables:
        raise SpecError(f"tables.{key} is missing")
    arr = np.asarray(doc_tables[key], dtype=np.float64)
    if arr.ndim != ndim:
        raise SpecError(f"tables.{key} must be {ndim}-D, got {arr.ndim}-D")
    if np.any(arr < 0):
        idx = np.unravel_index(int(np.argmin(arr)), arr.shape)
        raise SpecError(f"tables.{key}{[int(i) for i in idx]} is negative")
    sums = arr.sum(axis=-1)
    bad = np.abs(sums - 1.0) > LOAD_ROW_SUM_ATOL
    if np.any(bad):
        idx = np.unravel_index(int(np.argmax(np.abs(sums - 1.0))), sums.shape)
        raise SpecError(
            f"tables.{key}{[int(i) for i in idx]} sums to {float(sums[idx])!r} "
            f"(tolerance {LOAD_ROW_SUM_ATOL:g})"
        )
    # Renormalize exactly so the loaded spec meets the stricter in-memory
    # invariant (1e-12).
    return arr / sums[..., None]


def spec_from_json(doc: dict) -> ScmSpec:
    try:
        tables = doc["tables"]
        priors = doc["priors"]
    except KeyError as exc:
        raise SpecError(f"missing top-level key {exc}") from None

    def prior(key):
        arr = np.asarray(priors[key], dtype=np.float64)
        if np.any(arr < 0) or abs(arr.sum() - 1.0) > LOAD_ROW_SUM_ATOL:
            raise SpecError(f"priors.{key} is not a probability vector")
        return arr / arr.sum()

    direct = bool(doc.get("direct_x_to_y", False))
    y_key = "Y_given_TMZUX" if direct else "Y_given_TMZU"
    kwargs = dict(
        prior_z=prior("Z"),
        prior_u=prior("U"),
        t_given_z=_load_rows(tables, "T_given_Z", 2),
        x_given_u=_load_rows(tables, "X_given_U", 2),
        md_given_x=_load_rows(tables, "Md_given_X", 2),
        m_given_x=_load_rows(tables, "M_given_X", 2),
        y_table=_load_rows(tables, y_key, 6 if direct else 5),
        direct_x_to_y=direct,
        corruption_rho=float(doc.get("corruption_rho", 0.0)),
        embedding_dim=int(doc.get("embedding_dim", 8)),
        embedding_seed=int(doc.get("embedding_seed", 0)),
    )
    if "Mv_base" in tables or "Mv_corrupt" in tables:
        kwargs["mv_base"] = _load_rows(tables, "Mv_base", 2)
        kwargs["mv_corrupt"] = _load_rows(tables, "Mv_corrupt", 3)
    else:
        kwargs["mv_given_xu"] = _load_rows(tables, "Mv_given_XU", 3)
    spec = make_spec(**kwargs)
    return require_valid(spec)


def load_spec(path) -> ScmSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_json(json.load(fh))
