"""Stable elementary-symmetric-polynomial tables and the spectrum-only
closed forms built on them.

For a positive sequence lambda_1..lambda_M and an order N, the table holds

    p_k(lambda_1..lambda_i),   0 <= k <= N,  0 <= i <= M,

in the log domain, filled row by row with the recurrence

    p_k^(i) = p_k^(i-1) + lambda_i * p_k-1^(i-1).

Everything downstream is a ratio of such polynomials:

* normalization of the volume-sampling density: N! * p_N(sigma);
* expected leverage score of mode m:   sigma_m p_{N-1}(sigma \ m) / p_N(sigma);
* expected squared interpolation error of the m-th eigen-embedding:
                                       sigma_m p_N(sigma \ m) / p_N(sigma);
* mixture weight of an index subset U: prod_{u in U} sigma_u / p_N(sigma).

Log-domain arithmetic is load-bearing: over spectra like m^(-6) the linear
recurrence underflows by N ~ 15, while log-sum-exp keeps orders of hundreds
exact to roundoff.  Leave-one-out sequences never subtract: with prefix and
suffix tables both stored, removing index m is the convolution

    p_k(lambda \ m) = sum_a p_a(lambda_1..lambda_{m-1}) p_{k-a}(lambda_{m+1}..lambda_M),

which is a pure log-sum-exp and therefore stable for every mode.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .spectra import L2, CoefficientVector, SpectralModel

NEG_INF = -np.inf


@dataclass(frozen=True)
class EspTable:
    """Triangular log-domain tables of elementary symmetric polynomials.

    ``log_table[i, k]`` is log p_k over the first i source values; row 0 is
    the empty prefix (p_0 = 1, p_k = 0 otherwise).  ``log_suffix[j, k]`` is
    log p_k over the values j+1..M, so row 0 spans everything and row M is
    the empty suffix.
    """

    log_values: np.ndarray  # (M,) log of the source sequence
    order: int  # N
    log_table: np.ndarray  # (M+1, N+1) prefix polynomials
    log_suffix: np.ndarray  # (M+1, N+1) suffix polynomials

    @property
    def size(self) -> int:
        return len(self.log_values)

    def log_esp(self, k: int, prefix: int | None = None) -> float:
        """log p_k over the first ``prefix`` values (default: all of them)."""
        i = self.size if prefix is None else prefix
        if not 0 <= k <= self.order:
            raise ValueError(f"order {k} outside table range [0, {self.order}]")
        if not 0 <= i <= self.size:
            raise ValueError(f"prefix {i} outside [0, {self.size}]")
        return float(self.log_table[i, k])

    def esp(self, k: int, prefix: int | None = None) -> float:
        return math.exp(self.log_esp(k, prefix))


def _esp_log_matrix(log_values: np.ndarray, order: int) -> np.ndarray:
    m_len = len(log_values)
    table = np.full((m_len + 1, order + 1), NEG_INF)
    table[:, 0] = 0.0
    for i in range(1, m_len + 1):
        k_hi = min(i, order)
        table[i, 1 : k_hi + 1] = np.logaddexp(
            table[i - 1, 1 : k_hi + 1], log_values[i - 1] + table[i - 1, 0:k_hi]
        )
    return table


def esp_table(values: Sequence[float] | np.ndarray, order: int) -> EspTable:
    """Build the log-domain tables for ``values`` up to polynomial order N.

    O(M N) log-sum-exp additions; all inputs must be strictly positive.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise ValueError("values must be a non-empty 1-d sequence")
    if not np.all(vals > 0.0):
        raise ValueError("values must be strictly positive")
    if not isinstance(order, (int, np.integer)) or order < 0:
        raise ValueError(f"order must be a non-negative integer, got {order!r}")
    if order > vals.size:
        raise ValueError(f"order {order} exceeds sequence length {vals.size}")
    logv = np.log(vals)
    order = int(order)
    suffix = _esp_log_matrix(logv[::-1], order)[::-1]
    return EspTable(logv, order, _esp_log_matrix(logv, order), suffix)


def _leave_one_out_log_esps(table: EspTable, index: int) -> np.ndarray:
    """log p_k of the sequence with ``index`` (1-based) removed, k = 0..N.

    Prefix-suffix convolution: no subtraction, stable for every index.
    """
    if not 1 <= index <= table.size:
        raise ValueError(f"index {index} outside [1, {table.size}]")
    pre = table.log_table[index - 1]  # p_a over values 1..index-1
    suf = table.log_suffix[index]  # p_b over values index+1..M
    out = np.empty(table.order + 1)
    for k in range(table.order + 1):
        out[k] = logsumexp(pre[: k + 1] + suf[k::-1])
    return out


def leave_one_out_profile(table: EspTable, orders: Sequence[int]) -> np.ndarray:
    """log p_k(lambda \\ m) for every mode m and each k in ``orders``,
    vectorized across modes; returns shape (len(orders), M)."""
    m_len = table.size
    pre = table.log_table[0:m_len]  # row m-1 for mode m
    suf = table.log_suffix[1 : m_len + 1]  # row m+1 content for mode m
    out = np.empty((len(orders), m_len))
    for row, k in enumerate(orders):
        stacked = pre[:, : k + 1] + suf[:, k::-1]
        out[row] = logsumexp(stacked, axis=1)
    return out


@lru_cache(maxsize=64)
def spectrum_table(model: SpectralModel, order: int) -> EspTable:
    """ESP table over the model's truncated spectrum (cached; models are
    immutable so the cache is safe)."""
    if order > model.truncation:
        raise ValueError(f"order {order} exceeds truncation {model.truncation}")
    return esp_table(model.eigenvalues(), order)


def log_normalization(model: SpectralModel, n_nodes: int) -> float:
    """log of the volume-sampling normalization, log(N!) + log p_N(sigma).

    Reported in the log domain: N! overflows long before desk scale ends.
    """
    table = spectrum_table(model, n_nodes)
    return float(gammaln(n_nodes + 1)) + table.log_esp(n_nodes)


def expected_leverage(model: SpectralModel, m: int, n_nodes: int) -> float:
    """Expected m-th leverage score under volume sampling with N nodes:

        sigma_m * p_{N-1}(sigma \\ m) / p_N(sigma)  in [0, 1].
    """
    table = spectrum_table(model, n_nodes)
    if not 1 <= m <= table.size:
        raise ValueError(f"mode {m} outside spectrum [1, {table.size}]")
    loo = _leave_one_out_log_esps(table, m)
    log_tau = float(table.log_values[m - 1]) + float(loo[n_nodes - 1]) - table.log_esp(n_nodes)
    return min(math.exp(log_tau), 1.0)


def expected_cross_leverage(m1: int, m2: int) -> float:
    """Expected cross-leverage between distinct modes: identically zero.

    Exists so Monte Carlo validation has a named closed-form target.
    """
    if m1 == m2:
        raise ValueError("cross-leverage needs distinct modes; use expected_leverage")
    return 0.0


def expected_eig_error(model: SpectralModel, m: int, n_nodes: int) -> float:
    """Expected squared interpolation error of the m-th eigen-embedding:

        eps_m = sigma_m * p_N(sigma \\ m) / p_N(sigma) = sigma_m * (1 - tau_m).

    Computed through the leave-one-out polynomial directly, which stays
    accurate in relative terms even when the leverage saturates at 1.
    """
    table = spectrum_table(model, n_nodes)
    if not 1 <= m <= table.size:
        raise ValueError(f"mode {m} outside spectrum [1, {table.size}]")
    loo = _leave_one_out_log_esps(table, m)
    if loo[n_nodes] == NEG_INF:
        return 0.0
    log_eps = float(table.log_values[m - 1]) + float(loo[n_nodes]) - table.log_esp(n_nodes)
    return math.exp(log_eps)


def expected_leverage_profile(model: SpectralModel, n_nodes: int, modes: Iterable[int] | None = None) -> np.ndarray:
    """expected_leverage over all modes at once (vectorized leave-one-out)."""
    table = spectrum_table(model, n_nodes)
    loo = leave_one_out_profile(table, [n_nodes - 1])[0]
    tau = np.exp(table.log_values + loo - table.log_esp(n_nodes))
    tau = np.minimum(tau, 1.0)
    if modes is None:
        return tau
    return tau[np.asarray(list(modes), dtype=int) - 1]


def expected_eig_error_profile(model: SpectralModel, n_nodes: int, modes: Iterable[int] | None = None) -> np.ndarray:
    """expected_eig_error over all modes at once (vectorized leave-one-out)."""
    table = spectrum_table(model, n_nodes)
    loo = leave_one_out_profile(table, [n_nodes])[0]
    eps = np.exp(table.log_values + loo - table.log_esp(n_nodes))
    if modes is None:
        return eps
    return eps[np.asarray(list(modes), dtype=int) - 1]


def expected_embedding_error(model: SpectralModel, g: CoefficientVector, n_nodes: int) -> float:
    """Expected squared interpolation error of mu_g: sum_m g_m^2 eps_m."""
    if g.basis != L2:
        raise ValueError("expected_embedding_error takes an L2-basis coefficient vector")
    if g.coeffs and g.max_mode() > model.truncation:
        raise ValueError("coefficient support exceeds the truncated spectrum")
    return float(
        sum(v * v * expected_eig_error(model, int(m), n_nodes) for m, v in g.coeffs)
    )


def mixture_weight(model: SpectralModel, subset: Iterable[int], n_nodes: int) -> float:
    """Weight of the projection component indexed by ``subset`` in the
    volume-sampling mixture: prod_{u in U} sigma_u / p_N(sigma)."""
    u = sorted(int(i) for i in subset)
    if len(u) != n_nodes:
        raise ValueError(f"subset size {len(u)} != N = {n_nodes}")
    if len(set(u)) != len(u):
        raise ValueError("subset indices must be distinct")
    table = spectrum_table(model, n_nodes)
    if u and (u[0] < 1 or u[-1] > table.size):
        raise ValueError(f"subset indices outside [1, {table.size}]")
    log_w = float(sum(table.log_values[i - 1] for i in u)) - table.log_esp(n_nodes)
    return math.exp(log_w)


def delta_n(model: SpectralModel, n_nodes: int) -> float:
    """Weight of the leading component U = {1..N}; bounded by
    sigma_N / r_N with r_N the spectrum tail past N."""
    return mixture_weight(model, range(1, n_nodes + 1), n_nodes)


def brute_force_esp(values: Sequence[float], k: int) -> float:
    """Subset-enumeration oracle for p_k; exponential, test-scale only."""
    vals = [float(v) for v in values]
    if k == 0:
        return 1.0
    if k > len(vals):
        return 0.0
    return math.fsum(math.prod(c) for c in itertools.combinations(vals, k))
