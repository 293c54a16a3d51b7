"""Hypergeometric configuration model (static, directed, multi-edges).

Edges are ``m`` draws without replacement from an urn holding
``xi_out[v] * xi_in[w]`` copies of each ordered pair ``(v, w)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

LN2 = math.log(2.0)


@dataclass(frozen=True, eq=False)
class ActivityVectors:
    xi_out: np.ndarray
    xi_in: np.ndarray
    m: int

    def __post_init__(self):
        xo = np.asarray(self.xi_out, dtype=np.int64)
        xi = np.asarray(self.xi_in, dtype=np.int64)
        if xo.shape != xi.shape or xo.ndim != 1:
            raise ValueError("xi_out and xi_in must be 1-d and equally long")
        if (xo < 0).any() or (xi < 0).any():
            raise ValueError("activities must be non-negative")
        if xo.sum() != self.m or xi.sum() != self.m:
            raise ValueError(
                f"activities must each sum to m={self.m}, got {xo.sum()} and {xi.sum()}"
            )
        object.__setattr__(self, "xi_out", xo)
        object.__setattr__(self, "xi_in", xi)

    @property
    def N(self):
        return len(self.xi_out)

    def urn(self):
        """Matrix of possible edges ``Xi[v, w] = xi_out[v] * xi_in[w]``."""
        return np.outer(self.xi_out, self.xi_in)


def _as_matrix(A, N):
    if isinstance(A, dict):
        out = np.zeros((N, N), dtype=np.int64)
        for (v, w), c in A.items():
            out[v, w] += c
        return out
    A = np.asarray(A, dtype=np.int64)
    if A.shape != (N, N):
        raise ValueError(f"adjacency must be {N}x{N}, got {A.shape}")
    return A


def log_binom(n, k):
    """Natural log of the binomial coefficient, elementwise."""
    n = np.asarray(n, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def log_prob_hcm(A, act: ActivityVectors) -> float:
    """Base-2 log-probability of adjacency counts ``A`` under the HCM.

    ``A`` is an ``N x N`` count matrix or a ``{(v, w): count}`` dict.
    Returns ``-inf`` when some cell exceeds its urn capacity.
    """
    A = _as_matrix(A, act.N)
    if (A < 0).any():
        raise ValueError("negative adjacency count")
    if A.sum() != act.m:
        raise ValueError(f"adjacency sums to {A.sum()}, activities to m={act.m}")
    Xi = act.urn()
    if (A > Xi).any():
        return -math.inf
    total = int(Xi.sum())
    ln = float(log_binom(Xi, A).sum()) - float(log_binom(total, act.m))
    return ln / LN2


def mle_activities(A, N=None) -> ActivityVectors:
    """Maximum-likelihood activities under the ``sum = m`` constraint: the degrees."""
    if isinstance(A, dict):
        if N is None:
            N = 1 + max((max(k) for k in A), default=0)
    else:
        N = np.asarray(A).shape[0]
    A = _as_matrix(A, N)
    return ActivityVectors(A.sum(axis=1), A.sum(axis=0), int(A.sum()))


def expected_degree(act: ActivityVectors, v: int):
    """Expected ``(out, in)`` degree of node ``v``.

    With both activity vectors summing to ``m`` the general expression
    ``sum_w xi_out[v] xi_in[w] m / sum(Xi)`` collapses to the activity itself.
    """
    m = act.m
    if m == 0:
        return 0.0, 0.0
    total = float(m) * float(m)
    kout = float(act.xi_out[v]) * float(act.xi_in.sum()) * m / total
    kin = float(act.xi_in[v]) * float(act.xi_out.sum()) * m / total
    return kout, kin
