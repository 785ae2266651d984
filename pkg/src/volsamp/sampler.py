"""Node-design generation: exact volume sampling through the spectral
mixture, fully kernelized volume sampling through MCMC, and an i.i.d.
baseline.  All randomness flows through explicit, splittable streams so
replicates are bit-reproducible regardless of scheduling.

Exact sampling composes two stages.  First an index subset U of size N is
drawn with probability proportional to prod_{u in U} sigma_u, by sequential
inclusion using suffix elementary symmetric polynomials.  Then the nodes are
drawn from the projection process with kernel

    K_U(x, y) = sum_{u in U} e_u(x) e_u(y)

via the chain rule: each conditional is sampled by rejection from the
uniform measure with the envelope K_U(x, x) <= 2 |U| that the bounded
Fourier basis guarantees (|e_m| <= sqrt(2)).

The MCMC sampler needs only pointwise kernel evaluations.  It runs
single-site Metropolis-within-Gibbs on the density proportional to
det K(x): coordinate i is revisited cyclically, a uniform proposal replaces
x_i, and the acceptance ratio det K(x') / det K(x) collapses to the squared
power-function ratio p(x_i'; x_-i)^2 / p(x_i; x_-i)^2 by the Schur
complement, with no full refactorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .gram import Design, SingularDesignError
from .spectra import SpectralModel, eigenfunction_matrix
from .sympoly import spectrum_table

REJECTION_CAP = 10**7  # iterations per node before declaring a stall
STALL_WINDOW = 20_000  # MCMC proposals per stall-check window
STALL_RATE = 1e-4


class SamplerStallError(RuntimeError):
    """A sampling loop stopped making progress; carries diagnostics."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream: (master seed, replicate index, counter).

    Distinct indices yield independent-quality streams; identical triples
    reproduce identical output regardless of thread scheduling.
    """

    seed: int
    index: int = 0
    counter: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.index, self.counter))
        )

    def substream(self) -> "RngStream":
        return RngStream(self.seed, self.index, self.counter + 1)

    @classmethod
    def replicates(cls, seed: int, count: int) -> list["RngStream"]:
        return [cls(seed, i) for i in range(count)]


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"rng must be an RngStream or numpy Generator, got {type(rng)!r}")


def _stream_seed(rng) -> int | None:
    return rng.seed if isinstance(rng, RngStream) else None


def sample_subset(model: SpectralModel, n_nodes: int, rng) -> tuple[int, ...]:
    """Index subset U of size N with P(U) proportional to prod sigma_u.

    Sequential inclusion: index i joins with probability
    sigma_i p_{k-1}(sigma_{i+1..M}) / p_k(sigma_{i..M}) given k open slots.
    """
    if n_nodes > model.truncation:
        raise ValueError(f"N = {n_nodes} exceeds truncation {model.truncation}")
    gen = _as_generator(rng)
    return _sample_subset_with_gen(model, n_nodes, gen)


def _sample_subset_with_gen(model: SpectralModel, n_nodes: int, gen: np.random.Generator) -> tuple[int, ...]:
    table = spectrum_table(model, n_nodes)
    suffix = table.log_suffix  # suffix[j] spans sigma_{j+1}..sigma_M
    logv = table.log_values
    chosen: list[int] = []
    remaining = n_nodes
    for i in range(1, model.truncation + 1):
        if remaining == 0:
            break
        p_incl = math.exp(logv[i - 1] + suffix[i, remaining - 1] - suffix[i - 1, remaining])
        if gen.random() < p_incl:
            chosen.append(i)
            remaining -= 1
    return tuple(chosen)


def sample_projection_dpp(
    model: SpectralModel,
    subset,
    rng,
    rejection_cap: int = REJECTION_CAP,
) -> Design:
    """Nodes of the projection process with kernel K_U for U = ``subset``.

    Chain rule with Gram-Schmidt residuals; each conditional is drawn by
    rejection from the uniform measure with envelope constant 2 |U|.
    """
    subset = tuple(int(u) for u in subset)
    if len(subset) == 0:
        raise ValueError("subset must be non-empty")
    gen = _as_generator(rng)
    design = _sample_projection_dpp_with_gen(model, subset, gen, rejection_cap)
    return Design(design, origin="exact-sampler", seed=_stream_seed(rng))


_BATCH = 64


def _sample_projection_dpp_with_gen(
    model: SpectralModel,
    subset: tuple[int, ...],
    gen: np.random.Generator,
    rejection_cap: int = REJECTION_CAP,
) -> np.ndarray:
    modes = np.asarray(subset, dtype=int)
    n = modes.size
    envelope = 2.0 * n
    basis = np.zeros((0, n))  # orthonormal rows spanning the accepted features
    nodes = np.empty(n)
    for j in range(n):
        accepted = None
        tries = 0
        while accepted is None:
            if tries >= rejection_cap:
                raise SamplerStallError(
                    "rejection loop exceeded its iteration cap",
                    node_index=j,
                    tries=tries,
                    subset=subset,
                )
            cand = gen.random(_BATCH)
            uni = gen.random(_BATCH)
            feats = eigenfunction_matrix(model, cand, modes=modes).T  # (_BATCH, n)
            resid = np.einsum("ij,ij->i", feats, feats)
            if basis.shape[0]:
                proj = feats @ basis.T
                resid = resid - np.einsum("ij,ij->i", proj, proj)
            hits = np.nonzero(uni * envelope < resid)[0]
            tries += _BATCH
            if hits.size:
                h = int(hits[0])
                accepted = cand[h]
                feat = feats[h]
                if basis.shape[0]:
                    feat = feat - (basis @ feat) @ basis
                feat = feat / np.linalg.norm(feat)
                basis = np.vstack([basis, feat])
        nodes[j] = accepted
    return nodes


def sample_vs_exact(model: SpectralModel, n_nodes: int, rng) -> Design:
    """Design distributed as volume sampling for the truncated kernel:
    draw the index subset, then the matching projection process.

    Truncation bias is bounded by the model's tail diagnostic.
    """
    gen = _as_generator(rng)
    subset = _sample_subset_with_gen(model, n_nodes, gen)
    nodes = _sample_projection_dpp_with_gen(model, subset, gen)
    return Design(nodes, origin="exact-sampler", seed=_stream_seed(rng))


def sample_iid(model: SpectralModel, n_nodes: int, rng) -> Design:
    """Baseline: N i.i.d. nodes from the uniform reference measure."""
    gen = _as_generator(rng)
    return Design(gen.random(n_nodes), origin="iid", seed=_stream_seed(rng))


@dataclass
class McmcDiagnostics:
    """Bookkeeping for one Metropolis-within-Gibbs run."""

    acceptance_rate: float
    site_acceptance: np.ndarray
    log_det_trace: np.ndarray
    burn_in: int
    thin: int
    sweeps: int
    proposals: int

    def to_dict(self) -> dict:
        return {
            "acceptance_rate": self.acceptance_rate,
            "site_acceptance": [float(a) for a in self.site_acceptance],
            "burn_in": self.burn_in,
            "thin": self.thin,
            "sweeps": self.sweeps,
            "proposals": self.proposals,
            "kept": int(len(self.log_det_trace)),
            "log_det_mean": float(np.mean(self.log_det_trace)) if len(self.log_det_trace) else None,
        }


def _as_kernel(kernel):
    if isinstance(kernel, SpectralModel):
        return kernel.kernel
    if callable(kernel):
        return kernel
    raise TypeError("kernel must be a SpectralModel or a callable k(x, y)")


def _site_residual_sq(kernel, others: np.ndarray, y: float) -> float:
    """Squared power function of y against the remaining nodes,
    k(y,y) - k_o(y)^T K_o^{-1} k_o(y); plain k(y,y) when none remain."""
    kyy = float(kernel(y, y))
    if others.size == 0:
        return kyy
    k_oo = np.asarray(kernel(others[:, None], others[None, :]), dtype=float)
    k_oy = np.asarray(kernel(others, y), dtype=float).reshape(-1)
    sol = np.linalg.solve(k_oo, k_oy)
    return kyy - float(k_oy @ sol)


def mcmc_acceptance_ratio(kernel, nodes: np.ndarray, site: int, proposal: float) -> float:
    """det K(x') / det K(x) for the single-site move x_site -> proposal,
    via the Schur-complement power ratio (no full refactorization)."""
    kernel = _as_kernel(kernel)
    nodes = np.asarray(nodes, dtype=float)
    others = np.delete(nodes, site)
    r_new = _site_residual_sq(kernel, others, float(proposal))
    r_cur = _site_residual_sq(kernel, others, float(nodes[site]))
    return r_new / r_cur


def _log_det_gram(kernel, nodes: np.ndarray) -> float:
    k_mat = np.asarray(kernel(nodes[:, None], nodes[None, :]), dtype=float)
    chol = np.linalg.cholesky(k_mat)
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def sample_vs_mcmc(
    kernel,
    n_nodes: int,
    sweeps: int,
    rng,
    burn_in: int | None = None,
    thin: int = 10,
    init: np.ndarray | None = None,
    stall_window: int = STALL_WINDOW,
    stall_rate: float = STALL_RATE,
) -> tuple[list[Design], McmcDiagnostics]:
    """Fully kernelized volume sampling: Metropolis-within-Gibbs targeting
    the density proportional to det K(x), using only pointwise kernel
    evaluations.

    ``sweeps`` counts post-burn-in coordinate sweeps; every ``thin``-th
    state is kept.  Burn-in defaults to 1000 * N sweeps.  Initial nodes are
    i.i.d. uniform, redrawn on a singular Gram (up to 100 attempts).
    """
    kernel = _as_kernel(kernel)
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if burn_in is None:
        burn_in = 1000 * n_nodes
    gen = _as_generator(rng)
    seed = _stream_seed(rng)

    if init is not None:
        state = np.asarray(init, dtype=float).copy()
        if state.size != n_nodes:
            raise ValueError("init has the wrong number of nodes")
    else:
        state = None
        for _ in range(100):
            cand = gen.random(n_nodes)
            try:
                _log_det_gram(kernel, cand)
            except np.linalg.LinAlgError:
                continue
            state = cand
            break
        if state is None:
            raise SingularDesignError("could not initialize a nonsingular design in 100 draws")

    if n_nodes == 1:
        return _mcmc_single_node(kernel, float(state[0]), sweeps, burn_in, thin, gen, seed, stall_window, stall_rate)

    kept: list[Design] = []
    log_dets: list[float] = []
    site_prop = np.zeros(n_nodes, dtype=int)
    site_acc = np.zeros(n_nodes, dtype=int)
    window_prop = 0
    window_acc = 0
    total = burn_in + sweeps
    for sweep in range(total):
        for i in range(n_nodes):
            others = np.delete(state, i)
            proposal = gen.random()
            pair = np.array([state[i], proposal])
            diag_pair = np.asarray(kernel(pair, pair), dtype=float)
            k_cross = np.asarray(kernel(others[:, None], pair[None, :]), dtype=float)
            sol = np.linalg.solve(
                np.asarray(kernel(others[:, None], others[None, :]), dtype=float), k_cross
            )
            r_cur, r_new = diag_pair - np.einsum("ij,ij->j", k_cross, sol)
            site_prop[i] += 1
            window_prop += 1
            if r_cur <= 0.0 or gen.random() * r_cur < r_new:
                state[i] = proposal
                site_acc[i] += 1
                window_acc += 1
            if window_prop >= stall_window:
                if window_acc < stall_rate * window_prop:
                    raise SamplerStallError(
                        "MCMC acceptance rate collapsed",
                        window_proposals=window_prop,
                        window_accepted=window_acc,
                        sweep=sweep,
                    )
                window_prop = 0
                window_acc = 0
        if sweep >= burn_in and (sweep - burn_in) % thin == thin - 1:
            kept.append(Design(state.copy(), origin="mcmc", seed=seed))
            log_dets.append(_log_det_gram(kernel, state))

    proposals = int(site_prop.sum())
    diag = McmcDiagnostics(
        acceptance_rate=float(site_acc.sum()) / proposals if proposals else 0.0,
        site_acceptance=site_acc / np.maximum(site_prop, 1),
        log_det_trace=np.asarray(log_dets),
        burn_in=burn_in,
        thin=thin,
        sweeps=sweeps,
        proposals=proposals,
    )
    return kept, diag


def _mcmc_single_node(
    kernel,
    start: float,
    sweeps: int,
    burn_in: int,
    thin: int,
    gen: np.random.Generator,
    seed: int | None,
    stall_window: int,
    stall_rate: float,
) -> tuple[list[Design], McmcDiagnostics]:
    """One-node chain: det K(x) = k(x, x), so all proposal evaluations can
    be batched up front and the accept walk is a scalar loop."""
    total = burn_in + sweeps
    proposals = gen.random(total)
    uniforms = gen.random(total)
    diag_vals = np.asarray(kernel(proposals, proposals), dtype=float)
    kept: list[Design] = []
    log_dets: list[float] = []
    cur = start
    k_cur = float(kernel(start, start))
    accepted = 0
    window_acc = 0
    window_prop = 0
    for t in range(total):
        window_prop += 1
        if k_cur <= 0.0 or uniforms[t] * k_cur < diag_vals[t]:
            cur = float(proposals[t])
            k_cur = float(diag_vals[t])
            accepted += 1
            window_acc += 1
        if window_prop >= stall_window:
            if window_acc < stall_rate * window_prop:
                raise SamplerStallError(
                    "MCMC acceptance rate collapsed",
                    window_proposals=window_prop,
                    window_accepted=window_acc,
                    sweep=t,
                )
            window_prop = 0
            window_acc = 0
        if t >= burn_in and (t - burn_in) % thin == thin - 1:
            kept.append(Design(np.array([cur]), origin="mcmc", seed=seed))
            log_dets.append(math.log(k_cur))
    diag = McmcDiagnostics(
        acceptance_rate=accepted / total if total else 0.0,
        site_acceptance=np.array([accepted / total if total else 0.0]),
        log_det_trace=np.asarray(log_dets),
        burn_in=burn_in,
        thin=thin,
        sweeps=sweeps,
        proposals=total,
    )
    return kept, diag
