"""Exact and sampling-based inference on a TreeCRF.

Everything runs in log-space with log-sum-exp stabilization, so head outputs
of any magnitude are usable directly. Two interchangeable kernel backends
exist: the compiled extension ``nftrees._core`` and the pure-Python module
:mod:`nftrees.inference._python`. The compiled one is used when importable;
set ``NFT_BACKEND=python`` or ``NFT_BACKEND=compiled`` to force a choice.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ContractError
from . import _python
from .oracle import OracleResult, empirical_joint, enumerate_oracle, total_variation

try:
    from .. import _core
except ImportError:
    _core = None

_requested = os.environ.get("NFT_BACKEND", "auto").strip().lower()
if _requested in ("", "auto"):
    _impl = _core if _core is not None else _python
elif _requested == "python":
    _impl = _python
elif _requested == "compiled":
    if _core is None:
        raise ImportError("NFT_BACKEND=compiled but the nftrees._core extension is not built")
    _impl = _core
else:
    raise ConfigError(f"unknown NFT_BACKEND value {_requested!r}")


def active_backend() -> str:
    return "compiled" if _impl is _core else "python"


def available_backends() -> dict:
    out = {"python": _python}
    if _core is not None:
        out["compiled"] = _core
    return out


@dataclass
class InferenceResult:
    """Log-partition plus exact node and edge marginals for one TreeCRF."""

    log_partition: float
    node_marginals: np.ndarray  # (n, d), rows sum to 1
    edge_marginals: np.ndarray  # (n, d, d); [v] is for edge (parent[v], v), root slot zero


@dataclass
class SamplerConfig:
    """Gibbs schedule: systematic ascending-index scan, seeded and deterministic."""

    num_samples: int
    burn_in: int = 500
    thinning: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.num_samples < 0:
            raise ConfigError(f"num_samples must be >= 0, got {self.num_samples}")
        if self.burn_in < 0:
            raise ConfigError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.thinning < 1:
            raise ConfigError(f"thinning must be >= 1, got {self.thinning}")


def log_partition(crf) -> float:
    """log Z by one leaves-to-root sum-product pass."""
    return float(_impl.log_partition(crf.parent, crf.order, crf.node_logpot, crf.edge_logpot))


def marginals(crf) -> InferenceResult:
    """Exact per-node and per-edge marginals (upward plus downward pass)."""
    log_z, node_marg, edge_marg = _impl.marginals(
        crf.parent, crf.order, crf.node_logpot, crf.edge_logpot
    )
    return InferenceResult(float(log_z), node_marg, edge_marg)


def score(crf, labels) -> float:
    """Unnormalized log-measure of one assignment."""
    labels = _check_labels(crf, labels)
    total = float(crf.node_logpot[np.arange(crf.num_nodes), labels].sum())
    for v in crf.edges:
        total += float(crf.edge_logpot[v][labels[crf.parent[v]], labels[v]])
    return total


def log_prob(crf, labels) -> float:
    return score(crf, labels) - log_partition(crf)


def map_decode(crf):
    """(assignment, unnormalized log-score) of the distribution's mode.

    Ties break toward the lowest label index at every local maximization.
    """
    labels, best = _impl.map_decode(crf.parent, crf.order, crf.node_logpot, crf.edge_logpot)
    return np.asarray(labels, dtype=np.int64), float(best)


def gibbs_sample(crf, cfg: SamplerConfig) -> np.ndarray:
    """Kept samples as an (num_samples, n) int64 array.

    The chain starts from the MAP assignment, runs ``burn_in`` discarded
    sweeps, then keeps every ``thinning``-th sweep. Identical configs produce
    identical outputs: all randomness comes from one seeded generator.
    """
    n = crf.num_nodes
    if cfg.num_samples == 0:
        return np.empty((0, n), dtype=np.int64)
    init, _ = map_decode(crf)
    total = cfg.burn_in + cfg.num_samples * cfg.thinning
    uniforms = np.random.default_rng(cfg.seed).random((total, n))
    out = _impl.gibbs_sweeps(
        crf.parent,
        crf.child_ptr,
        crf.child_idx,
        crf.node_logpot,
        crf.edge_logpot,
        init,
        uniforms,
        cfg.burn_in,
        cfg.thinning,
        cfg.num_samples,
    )
    return np.asarray(out, dtype=np.int64)


def sample_histogram(samples) -> dict:
    """Multiset counts keyed by assignment tuple, most frequent first;
    equal counts order lexicographically."""
    counts: dict = {}
    for row in np.asarray(samples, dtype=np.int64).reshape(len(samples), -1) if len(samples) else []:
        key = tuple(int(x) for x in row)
        counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))


def _check_labels(crf, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (crf.num_nodes,):
        raise ContractError(f"assignment must have length {crf.num_nodes}, got shape {labels.shape}")
    if (labels < 0).any() or (labels >= crf.num_labels).any():
        bad = int(np.flatnonzero((labels < 0) | (labels >= crf.num_labels))[0])
        raise ContractError(f"label {labels[bad]} at node {bad} out of range [0, {crf.num_labels})")
    return labels


__all__ = [
    "InferenceResult",
    "OracleResult",
    "SamplerConfig",
    "active_backend",
    "available_backends",
    "empirical_joint",
    "enumerate_oracle",
    "gibbs_sample",
    "log_partition",
    "log_prob",
    "map_decode",
    "marginals",
    "sample_histogram",
    "score",
    "total_variation",
]
