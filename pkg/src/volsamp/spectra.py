"""Spectral kernel models on [0, 1] with the uniform reference measure.

A model is a truncated Mercer expansion

    k(x, y) = sum_{m <= M} sigma_m e_m(x) e_m(y),

where the eigenfunctions are the real Fourier system

    e_1(x) = 1,  e_{2j}(x) = sqrt(2) cos(2 pi j x),  e_{2j+1}(x) = sqrt(2) sin(2 pi j x),

orthonormal in L2([0,1]), and the eigenvalues sigma_m are strictly positive
and non-increasing.  Four spectra are supported:

* ``sobolev``            sigma_m = m^(-2s), multiplicities dropped;
* ``geometric``          sigma_m = alpha^m, 0 < alpha < 1;
* ``sobolev_classical``  sigma_1 = 1 and the paired spectrum
                         sigma_{2j} = sigma_{2j+1} = j^(-2s), which admits the
                         Bernoulli-polynomial closed form of the periodic
                         Sobolev kernel;
* ``custom``             an explicit positive non-increasing list.

All spectrum-only quantities downstream (symmetric polynomials, expected
leverage scores, error bounds) are invariant to the ordering convention
inside a multiplicity class; we fix cos before sin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np
from scipy.special import bernoulli as _bernoulli_numbers
from scipy.special import comb as _comb

SQRT2 = math.sqrt(2.0)

FAMILIES = ("sobolev", "geometric", "sobolev_classical", "custom")

L2 = "l2"
RKHS = "rkhs"


class BasisMismatchError(ValueError):
    """A coefficient vector was supplied in the wrong basis."""


def default_truncation(n_nodes: int) -> int:
    """Default spectrum truncation for designs of ``n_nodes`` points."""
    return max(4 * n_nodes, 128)


@dataclass(frozen=True)
class SpectralModel:
    """Immutable kernel model: family, family parameter, truncation level M.

    ``param`` is the smoothness s for the Sobolev families, the ratio alpha
    for the geometric family, and a tuple of eigenvalues for ``custom``.
    """

    family: str
    param: float | tuple[float, ...]
    truncation: int

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not isinstance(self.truncation, int) or self.truncation < 1:
            raise ValueError(f"truncation must be a positive integer, got {self.truncation!r}")
        if self.family in ("sobolev", "sobolev_classical"):
            s = self.param
            if not isinstance(s, int) or s < 1:
                raise ValueError(f"smoothness must be an integer >= 1, got {s!r}")
        elif self.family == "geometric":
            a = self.param
            if not isinstance(a, (int, float)) or not 0.0 < float(a) < 1.0:
                raise ValueError(f"geometric ratio must lie in (0, 1), got {a!r}")
        else:  # custom
            vals = self.param
            if not isinstance(vals, tuple):
                object.__setattr__(self, "param", tuple(float(v) for v in vals))
                vals = self.param
            if len(vals) == 0:
                raise ValueError("custom spectrum must be non-empty")
            arr = np.asarray(vals, dtype=float)
            if not np.all(arr > 0.0):
                raise ValueError("custom eigenvalues must be strictly positive")
            if np.any(np.diff(arr) > 0.0):
                raise ValueError("custom eigenvalues must be non-increasing")
            if self.truncation > len(vals):
                raise ValueError("truncation exceeds custom spectrum length")

    # -- constructors -------------------------------------------------

    @classmethod
    def sobolev(cls, s: int, truncation: int = 128) -> "SpectralModel":
        """sigma_m = m^(-2s) on the Fourier basis, multiplicities dropped."""
        return cls("sobolev", s, truncation)

    @classmethod
    def geometric(cls, alpha: float, truncation: int = 128) -> "SpectralModel":
        """sigma_m = alpha^m on the Fourier basis."""
        return cls("geometric", float(alpha), truncation)

    @classmethod
    def sobolev_classical(cls, s: int, truncation: int = 128) -> "SpectralModel":
        """Periodic Sobolev kernel of order s with paired multiplicities."""
        return cls("sobolev_classical", s, truncation)

    @classmethod
    def custom(cls, values: Iterable[float], truncation: int | None = None) -> "SpectralModel":
        vals = tuple(float(v) for v in values)
        return cls("custom", vals, len(vals) if truncation is None else truncation)

    # -- spectrum ------------------------------------------------------

    def eigenvalues(self, upto: int | None = None) -> np.ndarray:
        """First ``upto`` eigenvalues (defaults to the truncation level)."""
        m_top = self.truncation if upto is None else int(upto)
        if m_top < 1:
            raise ValueError("eigenvalue count must be >= 1")
        m = np.arange(1, m_top + 1)
        if self.family == "sobolev":
            return m.astype(float) ** (-2.0 * self.param)
        if self.family == "geometric":
            return float(self.param) ** m
        if self.family == "sobolev_classical":
            out = np.empty(m_top, dtype=float)
            out[0] = 1.0
            j = m[1:] // 2
            out[1:] = j.astype(float) ** (-2.0 * self.param)
            return out
        vals = np.asarray(self.param, dtype=float)
        if m_top > len(vals):
            raise ValueError(f"custom spectrum has only {len(vals)} eigenvalues")
        return vals[:m_top].copy()

    def kernel(self, x, y):
        """Truncated Mercer kernel as a plain callable (broadcasts x, y)."""
        return kernel_eval(self, x, y)

    def to_descriptor(self) -> dict:
        """JSON-serializable descriptor {"family", "param", "truncation"}."""
        param = list(self.param) if self.family == "custom" else self.param
        return {"family": self.family, "param": param, "truncation": self.truncation}

    def to_json(self) -> str:
        return json.dumps(self.to_descriptor(), separators=(",", ":"))

    @classmethod
    def from_descriptor(cls, desc: Mapping) -> "SpectralModel":
        expected = {"family", "param", "truncation"}
        if set(desc.keys()) != expected:
            raise ValueError(
                f"model descriptor must have exactly the keys {sorted(expected)}, got {sorted(desc.keys())}"
            )
        family = desc["family"]
        param = desc["param"]
        if family == "custom":
            param = tuple(float(v) for v in param)
        elif family in ("sobolev", "sobolev_classical"):
            param = int(param)
        return cls(family, param, int(desc["truncation"]))

    @classmethod
    def from_json(cls, text: str) -> "SpectralModel":
        return cls.from_descriptor(json.loads(text))


def eigenvalue(model: SpectralModel, m: int) -> float:
    """m-th eigenvalue sigma_m from the family closed form.

    Valid for any m >= 1, also beyond the truncation level; a custom model
    has a finite-rank spectrum and returns 0.0 past its stored list.
    """
    if m < 1:
        raise ValueError(f"eigenvalue index must be >= 1, got {m}")
    if model.family == "sobolev":
        return float(m) ** (-2.0 * model.param)
    if model.family == "geometric":
        return float(model.param) ** m
    if model.family == "sobolev_classical":
        return 1.0 if m == 1 else float(m // 2) ** (-2.0 * model.param)
    vals = model.param
    return float(vals[m - 1]) if m <= len(vals) else 0.0


def _check_domain(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("points must lie in [0, 1]")
    return x


def eigenfunction_eval(model: SpectralModel, m: int, x):
    """Evaluate e_m at x (scalar or array), x in [0, 1]."""
    if m < 1:
        raise ValueError(f"eigenfunction index must be >= 1, got {m}")
    x = _check_domain(x)
    if m == 1:
        out = np.ones_like(x, dtype=float)
    else:
        j = m // 2
        phase = 2.0 * np.pi * j * x
        out = SQRT2 * (np.cos(phase) if m % 2 == 0 else np.sin(phase))
    return float(out) if np.isscalar(out) or out.ndim == 0 else out


def eigenfunction_matrix(model: SpectralModel, x, modes=None) -> np.ndarray:
    """Matrix E with E[a, i] = e_{modes[a]}(x_i), vectorized over both axes."""
    x = np.atleast_1d(_check_domain(x))
    if modes is None:
        modes = np.arange(1, model.truncation + 1)
    modes = np.asarray(modes, dtype=int)
    if modes.size and modes.min() < 1:
        raise ValueError("eigenfunction indices must be >= 1")
    out = np.empty((modes.size, x.size), dtype=float)
    j = modes // 2
    phase = 2.0 * np.pi * j[:, None] * x[None, :]
    even = modes % 2 == 0
    out[even] = SQRT2 * np.cos(phase[even])
    out[~even] = SQRT2 * np.sin(phase[~even])
    out[modes == 1] = 1.0
    return out


def kernel_eval(model: SpectralModel, x, y):
    """Truncated Mercer sum sum_{m <= M} sigma_m e_m(x) e_m(y), broadcasting."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    bx, by = np.broadcast_arrays(x, y)
    shape = bx.shape
    ex = eigenfunction_matrix(model, bx.ravel() if shape else bx.reshape(1))
    ey = eigenfunction_matrix(model, by.ravel() if shape else by.reshape(1))
    sig = model.eigenvalues()
    vals = np.einsum("m,mi,mi->i", sig, ex, ey)
    return float(vals[0]) if shape == () else vals.reshape(shape)


def kernel_matrix(model: SpectralModel, xs, ys=None) -> np.ndarray:
    """Gram matrix K[i, j] = k(xs[i], ys[j]) (ys defaults to xs)."""
    xs = np.atleast_1d(_check_domain(xs))
    ex = eigenfunction_matrix(model, xs)
    sig = model.eigenvalues()
    if ys is None:
        ey = ex
    else:
        ey = eigenfunction_matrix(model, np.atleast_1d(_check_domain(ys)))
    return (ex * sig[:, None]).T @ ey


def bernoulli_polynomial(n: int, t) -> np.ndarray:
    """B_n(t) = sum_k C(n, k) B_k t^(n-k) with B_1 = -1/2."""
    t = np.asarray(t, dtype=float)
    numbers = _bernoulli_numbers(n)
    out = np.zeros_like(t)
    for k in range(n + 1):
        out = out + _comb(n, k, exact=True) * numbers[k] * t ** (n - k)
    return out


def classical_kernel_closed_form(s: int, x, y):
    """Closed form of the order-s periodic Sobolev kernel on [0, 1]:

        k(x, y) = 1 + (-1)^(s-1) (2 pi)^(2s) / (2s)! * B_{2s}({x - y}).

    Needs no spectrum, so it drives the fully kernelized sampling path.
    Agrees with the truncated Mercer sum of the matching ``sobolev_classical``
    model up to the spectrum's tail mass.
    """
    if not isinstance(s, int) or s < 1:
        raise ValueError("smoothness must be an integer >= 1")
    x = _check_domain(x)
    y = _check_domain(y)
    frac = np.mod(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), 1.0)
    coef = (-1.0) ** (s - 1) * (2.0 * np.pi) ** (2 * s) / math.factorial(2 * s)
    out = 1.0 + coef * bernoulli_polynomial(2 * s, frac)
    return float(out) if np.ndim(out) == 0 else out


class TailBound(NamedTuple):
    """Bracketing interval for the spectrum tail sum_{m > M} sigma_m."""

    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def tail_mass(model: SpectralModel, upto: int | None = None) -> TailBound:
    """Interval containing sum_{m > M} sigma_m for M = ``upto``.

    Geometric tails are exact (alpha^(M+1) / (1 - alpha)); polynomial tails
    are bracketed by integral comparison; custom spectra have exact finite
    remainders (zero beyond the stored list).
    """
    m_top = model.truncation if upto is None else int(upto)
    if m_top < 1:
        raise ValueError("tail index must be >= 1")
    if model.family == "geometric":
        a = float(model.param)
        exact = a ** (m_top + 1) / (1.0 - a)
        return TailBound(exact, exact)
    if model.family == "sobolev":
        s = model.param
        lo = (m_top + 1.0) ** (1 - 2 * s) / (2 * s - 1)
        hi = float(m_top) ** (1 - 2 * s) / (2 * s - 1)
        return TailBound(lo, hi)
    if model.family == "sobolev_classical":
        s = model.param
        j_full = m_top // 2  # frequencies with both cos and sin included
        # the lone sin term of frequency j_full when M is even, else nothing
        base = float(j_full) ** (-2.0 * s) if (m_top % 2 == 0 and j_full >= 1) else 0.0
        if j_full >= 1:
            lo = base + 2.0 * (j_full + 1.0) ** (1 - 2 * s) / (2 * s - 1)
            hi = base + 2.0 * float(j_full) ** (1 - 2 * s) / (2 * s - 1)
        else:  # only the constant mode kept: tail = 2 * sum_{j>=1} j^(-2s)
            lo = 2.0 + 2.0 * 2.0 ** (1 - 2 * s) / (2 * s - 1)
            hi = 2.0 + 2.0 / (2 * s - 1)
        return TailBound(lo, hi)
    vals = np.asarray(model.param, dtype=float)
    exact = float(vals[m_top:].sum()) if m_top < len(vals) else 0.0
    return TailBound(exact, exact)


def spectrum_head(model: SpectralModel) -> float:
    """Trace of the truncated spectrum, sum_{m <= M} sigma_m."""
    return float(model.eigenvalues().sum())


def truncation_diagnostic(model: SpectralModel) -> float:
    """Fraction of the trace lost to truncation: tail_upper / (head + tail_upper).

    Reported alongside every spectrum-only expectation so callers can judge
    whether the truncation level M supports the requested accuracy.
    """
    head = spectrum_head(model)
    tail = tail_mass(model).upper
    return tail / (head + tail)


@dataclass(frozen=True)
class CoefficientVector:
    """Finite-support coefficients of a function in the L2 basis (e_m) or
    the RKHS basis (e_m^F = sqrt(sigma_m) e_m).

    ``coeffs`` is stored canonically as a sorted tuple of (mode, value)
    pairs; modes are 1-based.  The squared norm in the vector's own basis is
    sum of squared values in both cases, by orthonormality.
    """

    basis: str
    coeffs: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        if self.basis not in (L2, RKHS):
            raise ValueError(f"basis must be {L2!r} or {RKHS!r}, got {self.basis!r}")
        items = tuple(sorted((int(m), float(v)) for m, v in self.coeffs))
        if items and items[0][0] < 1:
            raise ValueError("modes must be >= 1")
        modes = [m for m, _ in items]
        if len(set(modes)) != len(modes):
            raise ValueError("duplicate modes in coefficient vector")
        object.__setattr__(self, "coeffs", items)

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, float], basis: str = L2) -> "CoefficientVector":
        return cls(basis, tuple(mapping.items()))

    @classmethod
    def unit(cls, m: int, basis: str = L2) -> "CoefficientVector":
        """Indicator of a single mode."""
        return cls(basis, ((m, 1.0),))

    @property
    def modes(self) -> np.ndarray:
        return np.array([m for m, _ in self.coeffs], dtype=int)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.coeffs], dtype=float)

    @property
    def norm_sq(self) -> float:
        return float(np.sum(self.values**2))

    def max_mode(self) -> int:
        return int(self.modes.max()) if self.coeffs else 0

    def __getitem__(self, m: int) -> float:
        for mode, v in self.coeffs:
            if mode == m:
                return v
        return 0.0


def embed(model: SpectralModel, g: CoefficientVector) -> CoefficientVector:
    """RKHS coefficients of the embedding mu_g = sum_m sigma_m g_m e_m.

    In the basis e_m^F the embedding reads mu_g = sum_m sqrt(sigma_m) g_m e_m^F,
    so embedding multiplies each L2 coefficient by sqrt(sigma_m).
    """
    if g.basis != L2:
        raise BasisMismatchError("embed expects a coefficient vector in the L2 basis")
    sig = np.array([eigenvalue(model, int(m)) for m in g.modes])
    pairs = tuple((int(m), float(v * math.sqrt(s))) for (m, v), s in zip(g.coeffs, sig))
    return CoefficientVector(RKHS, pairs)


def embedding_eval(model: SpectralModel, g: CoefficientVector, x):
    """Pointwise value of the embedding, sum_m sigma_m g_m e_m(x)."""
    if g.basis != L2:
        raise BasisMismatchError("embedding_eval expects an L2-basis coefficient vector")
    scalar = np.ndim(x) == 0
    x_arr = np.atleast_1d(_check_domain(x))
    if not g.coeffs:
        out = np.zeros(x_arr.size)
    else:
        sig = np.array([eigenvalue(model, int(m)) for m in g.modes])
        e = eigenfunction_matrix(model, x_arr, modes=g.modes)
        out = (sig * g.values) @ e
    return float(out[0]) if scalar else out


def embedding_norm_sq(model: SpectralModel, g: CoefficientVector) -> float:
    """Squared RKHS norm of mu_g: sum_m sigma_m g_m^2."""
    if g.basis != L2:
        raise BasisMismatchError("embedding_norm_sq expects an L2-basis coefficient vector")
    if not g.coeffs:
        return 0.0
    sig = np.array([eigenvalue(model, int(m)) for m in g.modes])
    return float(np.sum(sig * g.values**2))


def coeff_eval(model: SpectralModel, vec: CoefficientVector, x):
    """Pointwise value of the function the coefficients describe.

    L2 basis: sum g_m e_m(x).  RKHS basis: sum c_m sqrt(sigma_m) e_m(x).
    """
    x_arr = np.atleast_1d(_check_domain(x))
    if not vec.coeffs:
        out = np.zeros(x_arr.size)
    else:
        e = eigenfunction_matrix(model, x_arr, modes=vec.modes)
        w = vec.values
        if vec.basis == RKHS:
            w = w * np.sqrt(np.array([eigenvalue(model, int(m)) for m in vec.modes]))
        out = w @ e
    return float(out[0]) if np.ndim(x) == 0 else out
