"""Visual deconfounding: attention-built mediators, gated fusion, and the
double-sum adjustment they approximate.

The mediator is a convex combination of visual tokens whose coefficients
come from a softmax over geometric-query similarities, stacked over the
last n encoder layers, then fused with the temporal context through a
gated two-layer map.  The discrete adjustment identity and the
robust-mediator experiment ride on the exact oracles in :mod:`ceres.scm`.
"""

from __future__ import annotations

from dataclasses import dataclass
import json
import math

import numpy as np

from .errors import DimensionMismatch, InvalidInput
from .numeric import as_matrix, as_vector, convex_combine, softmax
from .rng import stream, substream_seed
from . import scm as scm_mod


@dataclass(frozen=True)
class AttentionParams:
    """Projections and temperature for both attention stages.

    ``w_q``/``w_k`` drive the cross-modal stage; ``q_proj``/``k_proj``
    drive the per-modality token aggregation.  The temperature defaults
    to sqrt(d).
    """

    w_q: np.ndarray
    w_k: np.ndarray
    temperature: float
    q_proj: np.ndarray
    k_proj: np.ndarray

    def __post_init__(self):
        for name in ("w_q", "w_k", "q_proj", "k_proj"):
            m = as_matrix(getattr(self, name), name)
            object.__setattr__(self, name, m)
            if m.shape[0] != m.shape[1]:
                raise InvalidInput(f"{name} must be square, got {m.shape}")
        if not (np.isfinite(self.temperature) and self.temperature > 0):
            raise InvalidInput(f"temperature must be positive, got {self.temperature}")

    @classmethod
    def identity(cls, dim: int, temperature: float | None = None) -> "AttentionParams":
        eye = np.eye(dim)
        return cls(
            w_q=eye, w_k=eye.copy(),
            temperature=math.sqrt(dim) if temperature is None else float(temperature),
            q_proj=eye.copy(), k_proj=eye.copy(),
        )

    @classmethod
    def random(cls, dim: int, seed: int, scale: float = 0.5,
               temperature: float | None = None) -> "AttentionParams":
        gen = stream(seed, 7)
        draw = lambda: scale * gen.normal(size=(dim, dim)) / math.sqrt(dim)
        return cls(
            w_q=draw(), w_k=draw(),
            temperature=math.sqrt(dim) if temperature is None else float(temperature),
            q_proj=draw(), k_proj=draw(),
        )

    def to_json(self) -> dict:
        return {
            "w_q": self.w_q.tolist(),
            "w_k": self.w_k.tolist(),
            "temperature": self.temperature,
            "q_proj": self.q_proj.tolist(),
            "k_proj": self.k_proj.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "AttentionParams":
        return cls(
            w_q=np.asarray(doc["w_q"], dtype=np.float64),
            w_k=np.asarray(doc["w_k"], dtype=np.float64),
            temperature=float(doc["temperature"]),
            q_proj=np.asarray(doc["q_proj"], dtype=np.float64),
            k_proj=np.asarray(doc["k_proj"], dtype=np.float64),
        )


def _token_matrix(tokens) -> np.ndarray:
    try:
        t = np.asarray(tokens, dtype=np.float64)
    except ValueError as exc:
        raise DimensionMismatch(f"tokens are ragged: {exc}") from None
    if t.ndim != 2 or t.shape[0] == 0:
        raise InvalidInput(f"tokens must be a nonempty (L, d) array, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise InvalidInput("tokens contain non-finite entries")
    return t


def mean_query(tokens, proj=None) -> np.ndarray:
    """Default query derivation: mean token through a linear projection.

    Injectable; any vector of the right dimension may replace it.
    """
    t = _token_matrix(tokens)
    q = t.mean(axis=0)
    return q if proj is None else as_matrix(proj, "proj") @ q


def aggregate_tokens(query_embed, tokens, params: AttentionParams):
    """Self-normalized aggregation of one modality's tokens.

    Scores are dot products of the projected query with projected tokens;
    the result is the convex combination under softmax weights at the
    params temperature.  Returns (aggregate, weights).
    """
    q = as_vector(query_embed, "query_embed")
    t = _token_matrix(tokens)
    if q.size != params.q_proj.shape[1] or t.shape[1] != params.k_proj.shape[1]:
        raise DimensionMismatch(
            f"query dim {q.size} / token dim {t.shape[1]} incompatible with projections"
        )
    scores = (t @ params.k_proj.T) @ (params.q_proj @ q)
    weights = softmax(scores, params.temperature)
    return convex_combine(weights, t), weights


def alf_attention(m_d_hat, visual_tokens, params: AttentionParams):
    """Cross-modal stage: geometric query, visual keys and values.

    alpha_j = softmax(<W_Q m_d, W_K m_vj> / temperature); the output is
    sum_j alpha_j m_vj and therefore lies in the visual tokens' hull.
    Returns (mediator, alpha).
    """
    q = as_vector(m_d_hat, "m_d_hat")
    t = _token_matrix(visual_tokens)
    if q.size != params.w_q.shape[1] or t.shape[1] != params.w_k.shape[1]:
        raise DimensionMismatch(
            f"query dim {q.size} / token dim {t.shape[1]} incompatible with W_Q/W_K"
        )
    scores = (t @ params.w_k.T) @ (params.w_q @ q)
    alpha = softmax(scores, params.temperature)
    return convex_combine(alpha, t), alpha


@dataclass(frozen=True)
class MediatorStack:
    """Per-layer mediators; the final mediator is the last layer's."""

    layers: tuple

    def __post_init__(self):
        if not self.layers:
            raise InvalidInput("mediator stack must have at least one layer")
        dims = {v.size for v in self.layers}
        if len(dims) != 1:
            raise DimensionMismatch(f"mediator dims differ across layers: {sorted(dims)}")

    @property
    def final(self) -> np.ndarray:
        return self.layers[-1]

    def __len__(self) -> int:
        return len(self.layers)


def dattn_stack(visual_layers, depth_layers, queries, params) -> MediatorStack:
    """Per layer: aggregate the depth tokens, then attend over the visual
    tokens with the aggregated depth vector as query.

    ``params`` is a single AttentionParams shared across layers or a
    sequence with one entry per layer.
    """
    n = len(visual_layers)
    if not (len(depth_layers) == len(queries) == n):
        raise DimensionMismatch(
            f"layer counts differ: visual={n}, depth={len(depth_layers)}, "
            f"queries={len(queries)}"
        )
    if n == 0:
        raise InvalidInput("at least one layer is required")
    if isinstance(params, AttentionParams):
        params = [params] * n
    elif len(params) != n:
        raise DimensionMismatch(f"{len(params)} param sets for {n} layers")

    mediators = []
    for l in range(n):
        m_d_hat, _ = aggregate_tokens(queries[l], depth_layers[l], params[l])
        m_hat, _ = alf_attention(m_d_hat, visual_layers[l], params[l])
        mediators.append(m_hat)
    return MediatorStack(layers=tuple(mediators))


@dataclass(frozen=True)
class GatedFusionParams:
    """Two-layer map over the concatenated [mediator; context] plus a gate.

    Hidden activation is max(0, .); the hidden width conventionally is 2d.
    """

    w1: np.ndarray   # (hidden, 2d)
    b1: np.ndarray   # (hidden,)
    w2: np.ndarray   # (d, hidden)
    b2: np.ndarray   # (d,)
    gate: float

    def __post_init__(self):
        w1 = as_matrix(self.w1, "w1")
        w2 = as_matrix(self.w2, "w2")
        b1 = as_vector(self.b1, "b1")
        b2 = as_vector(self.b2, "b2")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "b2", b2)
        if w1.shape[0] != b1.size or w2.shape[0] != b2.size or w2.shape[1] != w1.shape[0]:
            raise DimensionMismatch("inconsistent MLP weight shapes")
        if w1.shape[1] % 2 != 0 or w2.shape[0] != w1.shape[1] // 2:
            raise DimensionMismatch(
                f"w1 must take a concatenated 2d input and w2 return d, got {w1.shape}, {w2.shape}"
            )
        if not (np.isfinite(self.gate) and 0.0 <= self.gate <= 1.0):
            raise InvalidInput(f"gate must lie in [0, 1], got {self.gate}")

    @classmethod
    def random(cls, dim: int, seed: int, gate: float = 0.5) -> "GatedFusionParams":
        gen = stream(seed, 8)
        hidden = 2 * dim
        return cls(
            w1=gen.normal(size=(hidden, 2 * dim)) / math.sqrt(2 * dim),
            b1=gen.normal(size=hidden) * 0.1,
            w2=gen.normal(size=(dim, hidden)) / math.sqrt(hidden),
            b2=gen.normal(size=dim) * 0.1,
            gate=gate,
        )


def gated_fuse(m_hat, x_hat, x, params: GatedFusionParams) -> np.ndarray:
    """gate * MLP([m_hat; x_hat]) + (1 - gate) * x.

    Mediator comes first in the concatenation; the order is load-bearing
    for the MLP weights.  Exactly linear in x at fixed (m_hat, x_hat).
    """
    m_hat = as_vector(m_hat, "m_hat")
    x_hat = as_vector(x_hat, "x_hat")
    x = as_vector(x, "x")
    d = params.w2.shape[0]
    if not (m_hat.size == x_hat.size == x.size == d):
        raise DimensionMismatch(
            f"m_hat/x_hat/x dims {m_hat.size}/{x_hat.size}/{x.size} must equal {d}"
        )
    joint = np.concatenate([m_hat, x_hat])
    hidden = np.maximum(params.w1 @ joint + params.b1, 0.0)
    out = params.w2 @ hidden + params.b2
    return params.gate * out + (1.0 - params.gate) * x


def frontdoor_adjust(p_y_given_m_x, p_m_given_x, p_x) -> np.ndarray:
    """Double-sum adjustment sum_m sum_x' P(Y|m,x') P(m|x) P(x').

    ``p_y_given_m_x`` has shape (M, X, Y); ``p_m_given_x`` is the mediator
    row for the intervened x (shape (M,)); ``p_x`` is the (X,) marginal.
    """
    pymx = np.asarray(p_y_given_m_x, dtype=np.float64)
    pm = as_vector(p_m_given_x, "p_m_given_x")
    px = as_vector(p_x, "p_x")
    if pymx.ndim != 3:
        raise InvalidInput(f"p_y_given_m_x must be (M, X, Y), got shape {pymx.shape}")
    if pymx.shape[0] != pm.size or pymx.shape[1] != px.size:
        raise DimensionMismatch(
            f"shape mismatch: table {pymx.shape}, p_m {pm.size}, p_x {px.size}"
        )
    if np.any(pymx < 0) or np.any(np.abs(pymx.sum(axis=-1) - 1.0) > 1e-9):
        raise InvalidInput("p_y_given_m_x rows must be probability distributions")
    if np.any(pm < 0) or abs(pm.sum() - 1.0) > 1e-9:
        raise InvalidInput("p_m_given_x must be a probability vector")
    if np.any(px < 0) or abs(px.sum() - 1.0) > 1e-9:
        raise InvalidInput("p_x must be a probability vector")
    return np.einsum("m,x,mxy->y", pm, px, pymx)


# ---------------------------------------------------------------------------
# Robust-mediator experiment

@dataclass(frozen=True)
class RobustnessRow:
    seed: int
    rho: float
    n_samples: int
    err_visual_only: float
    err_depth_guided: float
    winner: str              # "depth", "visual", or "tie"
    covered: bool            # every x state observed at least once


@dataclass(frozen=True)
class RobustnessReport:
    rows: tuple
    win_fraction: float      # fraction of seeds with depth error <= visual error
    all_covered: bool


def _plugin_outcome_table(spec) -> np.ndarray:
    """V[m, y] = sum_x' P(x') P(Y=y | M=m, X=x'), by exact enumeration."""
    p_y_given_mx, _, p_x = scm_mod.extract_frontdoor_tables(spec)
    return np.einsum("x,mxy->my", p_x, p_y_given_mx)


def _robustness_trial(spec, seed: int, n_samples: int, exact, v_table):
    states = scm_mod.sample_states(spec, seed, n_samples)
    card_x = spec.card("X")
    card_m = spec.card("M")
    err_a = 0.0
    err_b = 0.0
    covered = True
    for x in range(card_x):
        sel = states["X"] == x
        covered = covered and bool(sel.any())
        # Add-one smoothing keeps empty rows valid distributions.
        counts_v = np.bincount(states["Mv"][sel], minlength=card_m) + 1.0
        counts_d = np.bincount(states["Md"][sel], minlength=card_m) + 1.0
        est_a = (counts_v / counts_v.sum()) @ v_table
        est_b = (counts_d / counts_d.sum()) @ v_table
        err_a = max(err_a, float(np.abs(est_a - exact[x]).max()))
        err_b = max(err_b, float(np.abs(est_b - exact[x]).max()))
    return err_a, err_b, covered


def mediator_robustness_experiment(spec, rho: float, n_samples: int, seeds,
                                   jobs: int = 1) -> RobustnessReport:
    """Compare plug-in adjustment errors through the two mediator readouts.

    Channel (a) reads the mediator state through the corrupted visual
    column, channel (b) through the geometric column; both plug their
    empirical (add-one smoothed) P(m|x) into the double-sum formula with
    exact P(Y|m,x') and P(x'), and are scored against the interventional
    oracle.  Requires card_Mv = card_Md = card_M so the readouts are
    commensurable mediator states.
    """
    if not 0.0 <= float(rho) <= 1.0:
        raise InvalidInput(f"rho must lie in [0, 1], got {rho}")
    if n_samples < 1:
        raise InvalidInput("n_samples must be positive")
    cards = spec.cards
    if not (cards["Mv"] == cards["Md"] == cards["M"]):
        raise InvalidInput(
            "mediator readouts need card_Mv == card_Md == card_M, got "
            f"{cards['Mv']}/{cards['Md']}/{cards['M']}"
        )
    spec_rho = scm_mod.with_corruption(spec, rho)
    exact = np.stack([scm_mod.intervene(spec_rho, {"X": x}, "Y") for x in range(cards["X"])])
    v_table = _plugin_outcome_table(spec_rho)

    seeds = [int(s) for s in seeds]
    from .parallel import map_in_order

    results = map_in_order(
        _robustness_trial,
        [(spec_rho, s, n_samples, exact, v_table) for s in seeds],
        jobs=jobs,
    )
    rows = tuple(
        RobustnessRow(
            seed=s, rho=float(rho), n_samples=int(n_samples),
            err_visual_only=a, err_depth_guided=b,
            winner="tie" if a == b else ("depth" if b < a else "visual"),
            covered=cov,
        )
        for s, (a, b, cov) in zip(seeds, results)
    )
    wins = sum(1 for r in rows if r.err_depth_guided <= r.err_visual_only)
    return RobustnessReport(
        rows=rows,
        win_fraction=wins / len(rows) if rows else float("nan"),
        all_covered=all(r.covered for r in rows),
    )


def derive_trial_seeds(seed: int, n: int, salt: int = 0x5EED) -> list:
    """Per-trial sampling seeds from a master seed, one Philox stream each."""
    return [substream_seed(seed, salt + i) for i in range(n)]


def save_attention_params(params: AttentionParams, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
