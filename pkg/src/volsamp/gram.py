"""Per-design computations: Gram factorizations, optimal weights,
interpolation errors, leverage scores, and the power function.

All quantities reduce to solves against the kernel Gram matrix
K(x)[i, j] = k(x_i, x_j).  The factorization applies an escalating jitter
ladder; a factor is accepted only if its smallest Cholesky pivot clearly
dominates the jitter that produced it, so duplicate or near-duplicate nodes
surface as SingularDesignError instead of a silently useless factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh

from .spectra import (
    L2,
    RKHS,
    CoefficientVector,
    SpectralModel,
    coeff_eval,
    eigenfunction_matrix,
    eigenvalue,
    kernel_eval,
    kernel_matrix,
)

# negative values within this relative band are roundoff and clamp to zero;
# anything more negative is a real inconsistency
NEG_CLAMP_REL = 1e-9

_JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
# smallest pivot^2 must exceed this multiple of the applied jitter
_PIVOT_MARGIN = 10.0
# rank-deficiency floor for the zero-jitter rung, relative to the mean diagonal
_PIVOT_FLOOR_REL = 1e-11


class SingularDesignError(np.linalg.LinAlgError):
    """Gram matrix is numerically singular beyond the jitter budget,
    typically because of duplicate or near-duplicate nodes."""


class ConsistencyError(ArithmeticError):
    """A computed quantity violated an exact identity by more than roundoff."""


@dataclass(frozen=True)
class Design:
    """Ordered node list in [0, 1] with an origin tag.

    Nodes are kept exactly as sampled: volume sampling is permutation
    invariant, so no sorting or deduplication is applied.
    """

    nodes: np.ndarray
    origin: str = "manual"
    seed: int | None = None

    def __post_init__(self) -> None:
        nodes = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        if nodes.ndim != 1 or nodes.size < 1:
            raise ValueError("a design needs at least one node")
        if np.any(nodes < 0.0) or np.any(nodes > 1.0):
            raise ValueError("nodes must lie in [0, 1]")
        nodes = nodes.copy()
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.size)

    def append(self, node: float, origin: str | None = None) -> "Design":
        return Design(np.append(self.nodes, float(node)), origin or self.origin, self.seed)


@dataclass(frozen=True)
class GramFactor:
    """Cholesky factorization of a design's Gram matrix."""

    matrix: np.ndarray
    cho: tuple
    jitter: float  # absolute jitter added to the diagonal
    log_det: float  # of the jittered matrix actually factored

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve(self.cho, rhs)


def _factor(k_mat: np.ndarray) -> GramFactor:
    mean_diag = float(np.mean(np.diag(k_mat)))
    if mean_diag <= 0.0:
        raise SingularDesignError("Gram diagonal is not positive")
    for rel in _JITTER_LADDER:
        jitter = rel * mean_diag
        try:
            cho = cho_factor(k_mat + jitter * np.eye(k_mat.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            continue
        pivots = np.diag(cho[0])
        floor = max(_PIVOT_MARGIN * jitter, _PIVOT_FLOOR_REL * mean_diag)
        if float(np.min(pivots)) ** 2 < floor:
            continue
        log_det = 2.0 * float(np.sum(np.log(pivots)))
        return GramFactor(k_mat, cho, jitter, log_det)
    raise SingularDesignError(
        "Gram matrix singular beyond the jitter budget (duplicate or near-duplicate nodes?)"
    )


def gram(model: SpectralModel, design: Design) -> GramFactor:
    """Factor the design's Gram matrix under the truncated Mercer kernel."""
    return _factor(kernel_matrix(model, design.nodes))


def gram_from_kernel(kernel, nodes: np.ndarray) -> GramFactor:
    """Factor a Gram matrix using only pointwise kernel evaluations."""
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    k_mat = np.asarray(kernel(nodes[:, None], nodes[None, :]), dtype=float)
    return _factor(k_mat)


def optimal_weights(factor: GramFactor, mu_values: np.ndarray) -> np.ndarray:
    """Weights minimizing the residual RKHS norm: solve K w = mu(x).

    One step of iterative refinement keeps the residual at roundoff even
    when a jittered factor was used.
    """
    mu_values = np.asarray(mu_values, dtype=float)
    w = factor.solve(mu_values)
    w = w + factor.solve(mu_values - factor.matrix @ w)
    norm = float(np.linalg.norm(mu_values))
    resid = float(np.linalg.norm(factor.matrix @ w - mu_values))
    if norm > 0.0 and resid > 1e-8 * norm:
        raise ConsistencyError(f"weight solve residual {resid:.3e} exceeds 1e-8 * ||mu(x)||")
    return w


def _rkhs_coeffs(model: SpectralModel, mu: CoefficientVector) -> CoefficientVector:
    """Interpret the input as an element of the RKHS: an L2 vector g stands
    for its embedding mu_g."""
    if mu.basis == RKHS:
        return mu
    pairs = tuple(
        (int(m), float(v) * math.sqrt(eigenvalue(model, int(m)))) for m, v in mu.coeffs
    )
    return CoefficientVector(RKHS, pairs)


def interpolation_error_sq(
    model: SpectralModel,
    mu: CoefficientVector,
    design: Design,
    factor: GramFactor | None = None,
) -> float:
    """Squared RKHS distance from mu to the span of kernel translates:

        ||mu||_F^2 - mu(x)^T K(x)^{-1} mu(x).

    An L2-basis input g denotes its embedding mu_g.  Tiny negative values
    from roundoff clamp to zero; larger ones raise ConsistencyError.
    """
    mu_f = _rkhs_coeffs(model, mu)
    norm_sq = mu_f.norm_sq
    if not mu_f.coeffs:
        return 0.0
    # modes past the truncation are orthogonal to every kernel translate of
    # the rank-M kernel: they contribute their full energy to the error
    inside = CoefficientVector(RKHS, tuple(p for p in mu_f.coeffs if p[0] <= model.truncation))
    if not inside.coeffs:
        return norm_sq
    if factor is None:
        factor = gram(model, design)
    mu_at_nodes = np.atleast_1d(coeff_eval(model, inside, design.nodes))
    err = norm_sq - float(mu_at_nodes @ factor.solve(mu_at_nodes))
    if err < 0.0:
        if err < -NEG_CLAMP_REL * max(norm_sq, 1e-300):
            raise ConsistencyError(f"interpolation error {err:.3e} below the clamp band")
        err = 0.0
    return err


def _feature_columns(model: SpectralModel, design: Design, modes) -> np.ndarray:
    """Columns e_m^F(x) = sqrt(sigma_m) e_m(x) for the requested modes."""
    modes = np.asarray(modes, dtype=int)
    e = eigenfunction_matrix(model, design.nodes, modes=modes)  # (A, N)
    roots = np.sqrt(np.array([eigenvalue(model, int(m)) for m in modes]))
    return e.T * roots[None, :]  # (N, A)


def leverage(model: SpectralModel, design: Design, m: int, factor: GramFactor | None = None) -> float:
    """m-th leverage score e_m^F(x)^T K(x)^{-1} e_m^F(x), in [0, 1]."""
    if factor is None:
        factor = gram(model, design)
    v = _feature_columns(model, design, [m])[:, 0]
    return float(v @ factor.solve(v))


def cross_leverage(
    model: SpectralModel,
    design: Design,
    m1: int,
    m2: int,
    factor: GramFactor | None = None,
) -> float:
    """Cross-leverage e_m1^F(x)^T K(x)^{-1} e_m2^F(x), in [-1, 1]."""
    if factor is None:
        factor = gram(model, design)
    cols = _feature_columns(model, design, [m1, m2])
    return float(cols[:, 0] @ factor.solve(cols[:, 1]))


def leverage_matrix(
    model: SpectralModel,
    design: Design,
    modes,
    factor: GramFactor | None = None,
) -> np.ndarray:
    """Matrix of (cross-)leverage scores over ``modes`` in one solve."""
    if factor is None:
        factor = gram(model, design)
    cols = _feature_columns(model, design, modes)
    return cols.T @ factor.solve(cols)


def power_function(model: SpectralModel, design: Design, y, factor: GramFactor | None = None):
    """Pointwise interpolation error magnitude

        p(y; x) = sqrt( k(y, y) - k_x(y)^T K(x)^{-1} k_x(y) ),

    zero at every node; its square is the Schur complement of the Gram
    matrix augmented with y.
    """
    if factor is None:
        factor = gram(model, design)
    scalar = np.ndim(y) == 0
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    diag = np.atleast_1d(kernel_eval(model, y_arr, y_arr))
    cross = kernel_matrix(model, design.nodes, y_arr)  # (N, ny)
    r_sq = diag - np.einsum("ij,ij->j", cross, factor.solve(cross))
    bad = r_sq < -NEG_CLAMP_REL * np.maximum(diag, 1e-300)
    if np.any(bad):
        raise ConsistencyError("power function radicand below the clamp band")
    out = np.sqrt(np.clip(r_sq, 0.0, None))
    return float(out[0]) if scalar else out


def error_mode_decomposition(
    model: SpectralModel,
    g: CoefficientVector,
    design: Design,
    mode_cutoff: int,
    factor: GramFactor | None = None,
) -> tuple[float, float]:
    """Leverage-score decomposition of the squared interpolation error of
    mu_g for g supported on modes <= mode_cutoff:

        sum_m g_m^2 sigma_m (1 - tau_m)
        - sum_{m1 != m2} g_m1 g_m2 sqrt(sigma_m1 sigma_m2) tau_{m1,m2}.

    Returns (value, |value - direct error|); exact for truncated support, so
    the residual is a pure conditioning probe.
    """
    if g.basis != L2:
        raise ValueError("error_mode_decomposition takes an L2-basis coefficient vector")
    if mode_cutoff > model.truncation:
        raise ValueError("mode_cutoff exceeds the truncated spectrum")
    if g.coeffs and g.max_mode() > mode_cutoff:
        raise ValueError("coefficient support exceeds mode_cutoff")
    if factor is None:
        factor = gram(model, design)
    modes = g.modes
    vals = g.values
    sig = np.array([eigenvalue(model, int(m)) for m in modes])
    tau = leverage_matrix(model, design, modes, factor=factor)
    c = vals * np.sqrt(sig)
    value = float(np.sum(vals**2 * sig) - c @ tau @ c)
    direct = interpolation_error_sq(model, g, design, factor=factor)
    return value, abs(value - direct)


def worst_case_error_sq(
    model: SpectralModel,
    design: Design,
    modes,
    factor: GramFactor | None = None,
) -> float:
    """Largest squared interpolation error of mu_g over unit-norm g
    supported on ``modes``: the top eigenvalue of diag(sigma) - S T S with
    S = diag(sqrt(sigma)) and T the leverage-score matrix.

    With modes covering [1..N+1] this dominates the width lower bound
    sigma_{N+1} for every design of N nodes.
    """
    if factor is None:
        factor = gram(model, design)
    modes = np.asarray(modes, dtype=int)
    sig = np.array([eigenvalue(model, int(m)) for m in modes])
    tau = leverage_matrix(model, design, modes, factor=factor)
    roots = np.sqrt(sig)
    mat = np.diag(sig) - roots[:, None] * tau * roots[None, :]
    return float(eigh(mat, eigvals_only=True)[-1])
