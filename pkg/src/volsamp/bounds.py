"""Closed-form bound evaluations for volume-sampled interpolation.

The central certificate chain: the expected squared error of the worst
eigen-embedding satisfies

    eps_1 <= sigma_N * (1 + beta_N),
    beta_N = min_{M* in [2..N]} [ (N - M* + 1) sigma_N ]^{-1} sum_{m > M*} sigma_m,

while no design of N nodes can beat the width lower bound sigma_{N+1}.
The tail in beta_N starts strictly past the split point M*; that is the
variant the symmetric-polynomial ratio inequality actually delivers, and
the one the family constants (see family_beta_bound) dominate, with
equality for geometric spectra at the split M* = N.  Tail sums use the
conservative (upper) end of the bracketing interval, so every inequality
check is one-sided and remains a valid certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectra import RKHS, CoefficientVector, SpectralModel, eigenvalue, tail_mass


def beta_n(model: SpectralModel, n_nodes: int) -> tuple[float, int]:
    """(beta_N, arg-min M*) by exact search over the N - 1 candidates.

    Each candidate tail sum_{m > M*} sigma_m is evaluated in closed form
    when the family has one (geometric), else as the stored partial sum
    plus the conservative upper tail of the truncated spectrum.
    """
    if n_nodes < 2:
        raise ValueError("beta_N needs N >= 2")
    if n_nodes > model.truncation:
        raise ValueError(f"N = {n_nodes} exceeds truncation {model.truncation}")
    sig = model.eigenvalues()
    cands = np.arange(2, n_nodes + 1)
    if model.family == "geometric":
        # fold the tail against sigma_N before dividing: the minimizing
        # candidate M* = N then evaluates to exactly alpha / (1 - alpha)
        a = float(model.param)
        ratios = a ** (cands + 1.0 - n_nodes) / ((1.0 - a) * (n_nodes - cands + 1))
    else:
        tail_upper = tail_mass(model).upper
        # suffix[i] = sum over the stored sigma_m with m >= i+1
        suffix = np.concatenate([np.cumsum(sig[::-1])[::-1], [0.0]])
        tails = suffix[cands] + tail_upper
        ratios = tails / ((n_nodes - cands + 1) * sig[n_nodes - 1])
    best = int(np.argmin(ratios))
    return float(ratios[best]), int(cands[best])


def error_upper_bound(model: SpectralModel, n_nodes: int) -> float:
    """sigma_N * (1 + beta_N); dominates every expected eigen-embedding error."""
    value, _ = beta_n(model, n_nodes)
    return eigenvalue(model, n_nodes) * (1.0 + value)


def width_lower_bound(model: SpectralModel, n_nodes: int) -> float:
    """sigma_{N+1}: no N-dimensional reconstruction space does better
    uniformly over unit-norm L2 targets."""
    return eigenvalue(model, n_nodes + 1)


def family_beta_bound(model: SpectralModel) -> float:
    """N-free bound on beta_N from the spectrum family alone.

    sigma_m = m^(-2s): (1 + 1/(2s-1))^(2s), which tends to e as s grows.
    sigma_m = alpha^m:  alpha / (1 - alpha).
    Other families carry no closed-form constant.
    """
    if model.family == "sobolev":
        s = model.param
        return (1.0 + 1.0 / (2 * s - 1)) ** (2 * s)
    if model.family == "geometric":
        a = float(model.param)
        return a / (1.0 - a)
    raise ValueError(f"no family constant for {model.family!r}")


def neg_power_norm_sq(model: SpectralModel, mu: CoefficientVector, r: float) -> float:
    """|| Sigma^{-r} mu ||_F^2 = sum_m sigma_m^(-2r) <mu, e_m^F>^2 for
    finite-support mu given in the RKHS basis."""
    if mu.basis != RKHS:
        raise ValueError("neg_power_norm_sq takes an RKHS-basis coefficient vector")
    return float(
        sum(v * v * eigenvalue(model, int(m)) ** (-2.0 * r) for m, v in mu.coeffs)
    )


def smoothness_error_bound(
    model: SpectralModel,
    r: float,
    neg_power_norm: float,
    n_nodes: int,
    big_b: float | None = None,
) -> float:
    """(2 + B) sigma_N^(2r) ||Sigma^{-r} mu||_F^2 for smoothness r in [0, 1/2].

    ``neg_power_norm`` is the (unsquared) norm ||Sigma^{-r} mu||_F.  B
    defaults to the family constant when one exists; callers supply it
    otherwise, since a bounded beta_N is an assumption, not a computation.
    """
    if not 0.0 <= r <= 0.5:
        raise ValueError("smoothness exponent r must lie in [0, 1/2]")
    b = family_beta_bound(model) if big_b is None else float(big_b)
    return (2.0 + b) * eigenvalue(model, n_nodes) ** (2.0 * r) * neg_power_norm**2


def head_tail_error_bound(
    model: SpectralModel,
    mu: CoefficientVector,
    n_nodes: int,
    big_b: float | None = None,
) -> float:
    """Two-term bound on the expected squared interpolation error of mu:

        (1 + B) sum_{m <= N} (sigma_N / sigma_m) <mu, e_m^F>^2
              + sum_{m > N} <mu, e_m^F>^2.

    Quadratic in mu, so arbitrary scale is handled by homogeneity.
    """
    if mu.basis != RKHS:
        raise ValueError("head_tail_error_bound takes an RKHS-basis coefficient vector")
    b = family_beta_bound(model) if big_b is None else float(big_b)
    sig_n = eigenvalue(model, n_nodes)
    head = sum(
        v * v * sig_n / eigenvalue(model, int(m)) for m, v in mu.coeffs if m <= n_nodes
    )
    tail = sum(v * v for m, v in mu.coeffs if m > n_nodes)
    return (1.0 + b) * float(head) + float(tail)


@dataclass(frozen=True)
class BoundReport:
    """One row of bound evaluations for a given design size N."""

    n_nodes: int
    beta: float
    beta_argmin: int
    upper_bound: float  # sigma_N (1 + beta_N)
    lower_bound: float  # sigma_{N+1}
    family_constant: float | None
    tail_lower: float  # bracketing interval for r_N = sum_{m > N} sigma_m
    tail_upper: float

    CSV_HEADER = (
        "N",
        "beta",
        "beta_argmin",
        "upper_bound",
        "lower_bound",
        "family_constant",
        "tail_lower",
        "tail_upper",
    )

    def csv_row(self) -> list:
        return [
            self.n_nodes,
            repr(self.beta),
            self.beta_argmin,
            repr(self.upper_bound),
            repr(self.lower_bound),
            "" if self.family_constant is None else repr(self.family_constant),
            repr(self.tail_lower),
            repr(self.tail_upper),
        ]


def bound_report(model: SpectralModel, n_nodes: int) -> BoundReport:
    beta, argmin = beta_n(model, n_nodes)
    try:
        constant = family_beta_bound(model)
    except ValueError:
        constant = None
    r_n = tail_mass(model, n_nodes)
    return BoundReport(
        n_nodes=n_nodes,
        beta=beta,
        beta_argmin=argmin,
        upper_bound=eigenvalue(model, n_nodes) * (1.0 + beta),
        lower_bound=eigenvalue(model, n_nodes + 1),
        family_constant=constant,
        tail_lower=r_n.lower,
        tail_upper=r_n.upper,
    )
