"""Linguistic deconfounding: dictionary-based adjustment of text scores.

The observable confounder is a verb-noun pair harvested from training
queries.  Averaging either probabilities (exact adjustment) or scores
(the normalized-exponential shortcut) over the dictionary prior removes
the spurious correlation; this module implements both routes plus the
machinery to measure how far apart they are.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import hashlib
import json

import numpy as np

from .errors import DimensionMismatch, InvalidInput, ParseError
from .numeric import as_vector, check_simplex, softmax
from .rng import stream


def default_parse(query: str) -> tuple:
    """Head extraction: the first two whitespace tokens are (verb, noun)."""
    tokens = query.split()
    if len(tokens) < 2:
        raise ParseError(f"cannot extract a verb-noun pair from {query!r}")
    return tokens[0], tokens[1]


def seeded_embedder(dim: int, seed: int = 0):
    """Deterministic stand-in for a text encoder.

    Each key hashes (stably, via sha256) to a Philox stream that emits a
    unit-normalized gaussian vector, so the same pair always maps to the
    same embedding regardless of dictionary order.
    """
    if dim < 1:
        raise InvalidInput(f"embedding dim must be positive, got {dim}")

    def embed(key: tuple) -> np.ndarray:
        verb, noun = key
        digest = hashlib.sha256(f"{seed}\x1f{verb}\x1f{noun}".encode()).digest()
        sub = int.from_bytes(digest[:8], "big")
        vec = stream(seed, sub).normal(size=dim)
        return vec / max(np.linalg.norm(vec), 1e-300)

    return embed


@dataclass(frozen=True)
class ConfounderDictionary:
    """Unique verb-noun pairs with empirical priors and embeddings."""

    keys: tuple                 # tuple of (verb, noun)
    priors: np.ndarray          # (K,)
    embeddings: np.ndarray      # (K, dim)

    def __post_init__(self):
        if len(self.keys) != len(set(self.keys)):
            raise InvalidInput("dictionary keys must be unique")
        if len(self.keys) == 0:
            raise InvalidInput("dictionary must be nonempty")
        check_simplex(self.priors, "priors")
        if self.embeddings.shape[0] != len(self.keys):
            raise DimensionMismatch("one embedding per key required")

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def __len__(self) -> int:
        return len(self.keys)


def build_dictionary(corpus, dim: int = 8, embedder=None, parse_rule=None,
                     embed_seed: int = 0) -> ConfounderDictionary:
    """Harvest unique pairs, count-based priors, and embeddings from queries.

    Priors are formed as exact fractions count/total (they sum to 1 in
    rational arithmetic) and only then converted to floats.
    """
    corpus = list(corpus)
    if not corpus:
        raise InvalidInput("corpus must be nonempty")
    parse = parse_rule or default_parse
    embed = embedder or seeded_embedder(dim, embed_seed)

    counts: dict = {}
    order: list = []
    for query in corpus:
        key = parse(query)
        if key not in counts:
            counts[key] = 0
            order.append(key)
        counts[key] += 1

    total = len(corpus)
    fractions = [Fraction(counts[k], total) for k in order]
    assert sum(fractions) == 1
    priors = np.array([float(f) for f in fractions])
    embeddings = np.stack([np.asarray(embed(k), dtype=np.float64) for k in order])
    return ConfounderDictionary(keys=tuple(order), priors=priors, embeddings=embeddings)


def expected_confounder_embedding(dictionary: ConfounderDictionary) -> np.ndarray:
    """Prior-weighted mean embedding; lies in the hull of the entries."""
    return dictionary.priors @ dictionary.embeddings


def debias_text(f_t, dictionary: ConfounderDictionary, scale: float = 1.0) -> np.ndarray:
    """Shift a text feature by the expected confounder embedding.

    ``scale`` defaults to 1 (the literal additive form); other values are
    an extension knob, not the default behavior.
    """
    f_t = as_vector(f_t, "f_t")
    if f_t.size != dictionary.dim:
        raise DimensionMismatch(
            f"feature dim {f_t.size} != dictionary dim {dictionary.dim}"
        )
    return f_t + scale * expected_confounder_embedding(dictionary)


def deconfounded_score(s_t, s_z, priors) -> np.ndarray:
    """Shift class scores by the prior expectation of the bias scores.

    ``s_z`` is either one scalar per confounder (shape (K,)) or one score
    vector per confounder (shape (K, n_classes)).
    """
    s_t = as_vector(s_t, "s_t")
    s_z = np.asarray(s_z, dtype=np.float64)
    p = check_simplex(priors, "priors")
    if s_z.ndim not in (1, 2) or s_z.shape[0] != p.size:
        raise DimensionMismatch(
            f"s_z has shape {s_z.shape}, expected ({p.size},) or ({p.size}, {s_t.size})"
        )
    if s_z.ndim == 2 and s_z.shape[1] != s_t.size:
        raise DimensionMismatch(
            f"s_z has {s_z.shape[1]} classes but s_t has {s_t.size}"
        )
    return s_t + p @ s_z


def backdoor_adjust(cond, priors) -> np.ndarray:
    """Prior-weighted mixture of the per-confounder outcome rows.

    ``cond`` has shape (K, n_outcomes): row z is the outcome distribution
    at that confounder value (for a fixed treatment context).
    """
    cond = np.asarray(cond, dtype=np.float64)
    p = check_simplex(priors, "priors")
    if cond.ndim != 2 or cond.shape[0] != p.size:
        raise InvalidInput(
            f"cond must have shape ({p.size}, n_outcomes), got {cond.shape}"
        )
    if np.any(cond < 0) or np.any(np.abs(cond.sum(axis=1) - 1.0) > 1e-9):
        raise InvalidInput("cond rows must be probability distributions")
    return p @ cond


@dataclass(frozen=True)
class ScoreTable:
    """Pre-activation scores indexed (class-context, confounder).

    When the additive parts are attached, scores[t, z] = s_t[t] + s_z[z]
    must hold within 1e-12.
    """

    scores: np.ndarray
    s_t: np.ndarray | None = None
    s_z: np.ndarray | None = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "scores", scores)
        if scores.ndim != 2 or not np.all(np.isfinite(scores)):
            raise InvalidInput("scores must be a finite 2-D array")
        if (self.s_t is None) != (self.s_z is None):
            raise InvalidInput("additive parts must be supplied together")
        if self.s_t is not None:
            s_t = as_vector(self.s_t, "s_t")
            s_z = as_vector(self.s_z, "s_z")
            object.__setattr__(self, "s_t", s_t)
            object.__setattr__(self, "s_z", s_z)
            recon = s_t[:, None] + s_z[None, :]
            if recon.shape != scores.shape or np.abs(recon - scores).max() > 1e-12:
                raise InvalidInput("scores do not decompose as s_t + s_z within 1e-12")

    @classmethod
    def from_additive(cls, s_t, s_z) -> "ScoreTable":
        s_t = as_vector(s_t, "s_t")
        s_z = as_vector(s_z, "s_z")
        return cls(scores=s_t[:, None] + s_z[None, :], s_t=s_t, s_z=s_z)


@dataclass(frozen=True)
class NwgmGapReport:
    """Both sides of the expectation-vs-softmax swap and their distance."""

    exact: np.ndarray          # E_Z[softmax(s(., z))]
    approx: np.ndarray         # softmax(E_Z[s(., z)])
    max_gap: float             # L-infinity distance
    mean_gap: float            # mean per-class absolute gap


def nwgm_gap(table: ScoreTable, priors, temperature: float = 1.0) -> NwgmGapReport:
    """Exact expectation of softmax outputs vs softmax of expected scores."""
    p = check_simplex(priors, "priors")
    scores = table.scores
    if scores.shape[1] != p.size:
        raise DimensionMismatch(
            f"table has {scores.shape[1]} confounder columns, priors have {p.size}"
        )
    exact = np.zeros(scores.shape[0])
    for z in range(p.size):
        exact = exact + p[z] * softmax(scores[:, z], temperature)
    approx = softmax(scores @ p, temperature)
    gaps = np.abs(exact - approx)
    return NwgmGapReport(
        exact=exact,
        approx=approx,
        max_gap=float(gaps.max()),
        mean_gap=float(gaps.mean()),
    )


# ---------------------------------------------------------------------------
# Serialization

def dictionary_to_json(dictionary: ConfounderDictionary) -> dict:
    return {
        "entries": [
            {
                "verb": verb,
                "noun": noun,
                "prior": float(dictionary.priors[i]),
                "embedding": dictionary.embeddings[i].tolist(),
            }
            for i, (verb, noun) in enumerate(dictionary.keys)
        ]
    }


def dictionary_from_json(doc: dict) -> ConfounderDictionary:
    entries = doc["entries"]
    if not entries:
        raise InvalidInput("dictionary document has no entries")
    keys = tuple((e["verb"], e["noun"]) for e in entries)
    priors = np.array([float(e["prior"]) for e in entries])
    embeddings = np.array([e["embedding"] for e in entries], dtype=np.float64)
    return ConfounderDictionary(keys=keys, priors=priors, embeddings=embeddings)


def save_dictionary(dictionary: ConfounderDictionary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dictionary_to_json(dictionary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_corpus(path) -> list:
    """One query per line, UTF-8; blank lines are skipped."""
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]
