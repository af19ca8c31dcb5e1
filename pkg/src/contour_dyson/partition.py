"""Partition-function benchmarks.

``Z_N`` is the N-fold contour integral of the Boltzmann weight with respect
to arclength.  For small N it is evaluated by tensor trapezoidal quadrature;
on the unit circle with no potential there is a closed form in gamma
functions.  ``F^(N) = log Z_N - log N! - (beta - 1) N log N`` is then fitted
to ``N^2 F0 + N F1 + F2`` plus a tail in odd inverse powers of N.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .energy import GasParams
from .geometry import Contour

__all__ = [
    "QuadratureSettings",
    "ExpansionFit",
    "UnsupportedSizeError",
    "z_quadrature",
    "morris_exact",
    "free_energy_sequence",
    "fit_expansion",
    "stirling_coefficients",
    "bench_rows",
    "compare_f1",
    "bench_csv",
]

MAX_TENSOR_N = 4


class UnsupportedSizeError(ValueError):
    pass


@dataclass
class QuadratureSettings:
    """Tensor trapezoidal rule on equispaced arclength nodes.

    With ``symmetry=True`` and a rotation-invariant integrand (centered circle,
    potential depending on ``|z|`` only) particle 1 is pinned at ``s = 0`` and
    the result multiplied by ``L``; the remaining N-1 coordinates use the full
    grid.  This is exact for the trapezoidal rule because the grid is invariant
    under shifts by one node.
    """

    nodes: int = 512
    symmetry: bool = False
    chunk: int = 1 << 22

    def __post_init__(self):
        if self.nodes < 32:
            raise ValueError("nodes must be >= 32")


def _rotation_invariant(contour: Contour, p: GasParams):
    spec = contour.spec
    modes = {m for m, c in spec.coeffs if c != 0}
    circle = modes == {1}
    return circle and not any(p.potential.harmonic)


def _axis_view(a, k, n):
    shape = [1] * n
    shape[k] = -1
    return a.reshape(shape)


def _block_log_weights(axes, V, G):
    """Log-weights on the tensor block ``axes[0] x ... x axes[n-1]``."""
    n = len(axes)
    out = 0.0
    for k, ax in enumerate(axes):
        out = out + _axis_view(V[ax], k, n)
    for k, l in itertools.combinations(range(n), 2):
        shape = [1] * n
        shape[k] = len(axes[k])
        shape[l] = len(axes[l])
        out = out + G[np.ix_(axes[k], axes[l])].reshape(shape)
    return out


def z_quadrature(contour: Contour, p: GasParams, q: QuadratureSettings | None = None) -> float:
    """``log Z_N`` by the trapezoidal tensor rule.

    Coincident nodes contribute ``-inf`` in log space, i.e. weight zero, which
    is the exact value of the integrand there.
    """
    q = q or QuadratureSettings()
    n = p.n_particles
    if n > MAX_TENSOR_N:
        raise UnsupportedSizeError(
            f"tensor quadrature supports N <= {MAX_TENSOR_N}; use morris_exact for the "
            "unit circle or a Monte Carlo estimator"
        )
    if q.symmetry and not _rotation_invariant(contour, p):
        raise ValueError("symmetry reduction needs a centered circle and a rotation-invariant potential")
    M = q.nodes
    L = contour.perimeter
    h = L / M
    s = h * np.arange(M)
    z = contour.spec.z(contour.u_of_s(s))
    V = p.beta * p.potential.value(z)
    with np.errstate(divide="ignore"):
        G = 2 * p.beta * np.log(np.abs(z[:, None] - z[None, :]))
    full = np.arange(M)
    axes = [full] * n
    if q.symmetry:
        axes[0] = np.zeros(1, dtype=int)
    lead = 1 if q.symmetry and n > 1 else 0
    rest = M ** (n - lead - 1) if n > lead else 1
    block = max(1, q.chunk // max(rest, 1))
    parts = []
    for start in range(0, len(axes[lead]), block):
        chunk_axes = list(axes)
        chunk_axes[lead] = axes[lead][start:start + block]
        parts.append(logsumexp(_block_log_weights(chunk_axes, V, G)))
    log_sum = float(logsumexp(parts))
    if q.symmetry:
        return log_sum + (n - 1) * math.log(h) + math.log(L)
    return log_sum + n * math.log(h)


def morris_exact(n: int, beta: float) -> float:
    """``log Z_N`` for the unit circle with ``W = 0``."""
    if n < 1 or not beta > 0:
        raise ValueError("need N >= 1 and beta > 0")
    return n * math.log(2 * math.pi) + math.lgamma(beta * n + 1) - n * math.lgamma(beta + 1)


def free_energy_sequence(ns, log_z, beta):
    """``F^(N) = log Z_N - log N! - (beta - 1) N log N``."""
    ns = np.asarray(ns, dtype=float)
    log_fact = np.array([math.lgamma(n + 1) for n in ns])
    return np.asarray(log_z, dtype=float) - log_fact - (beta - 1) * ns * np.log(ns)


def stirling_coefficients(beta):
    """Large-N coefficients of the circular ensemble from Stirling's series."""
    return {
        "F0": 0.0,
        "F1": 1 - beta + (beta - 1) * math.log(beta) + math.log(2 * math.pi) - math.lgamma(beta),
        "F2": 0.5 * math.log(beta),
    }


@dataclass
class ExpansionFit:
    ns: np.ndarray
    beta: float
    F0: float
    F1: float
    F2: float
    tail: np.ndarray
    residuals: np.ndarray
    condition: float
    comparison: dict = field(default_factory=dict)

    @property
    def max_residual(self):
        return float(np.max(np.abs(self.residuals)))


def fit_expansion(ns, log_z, beta, tail_terms: int = 1, max_condition: float = 1e8) -> ExpansionFit:
    """Least-squares fit of ``F^(N)`` to ``N^2 F0 + N F1 + F2 + sum_k c_k N^(1-2k)``.

    Columns are scaled to unit norm before solving; the condition number of the
    scaled design is checked against ``max_condition``.
    """
    ns = np.asarray(ns, dtype=float)
    log_z = np.asarray(log_z, dtype=float)
    if ns.shape != log_z.shape:
        raise ValueError("ns and log_z must have the same length")
    if len(np.unique(ns)) != len(ns) or len(ns) < 4:
        raise ValueError("at least 4 distinct N values are needed")
    order = np.argsort(ns)
    ns, log_z = ns[order], log_z[order]
    f = free_energy_sequence(ns, log_z, beta)
    cols = [ns**2, ns, np.ones_like(ns)] + [ns ** (1 - 2 * k) for k in range(1, tail_terms + 1)]
    A = np.stack(cols, axis=1)
    if A.shape[1] > len(ns):
        raise ValueError(f"{A.shape[1]} unknowns need at least as many N values (got {len(ns)})")
    scale = np.linalg.norm(A, axis=0)
    As = A / scale
    cond = float(np.linalg.cond(As))
    if not np.isfinite(cond) or cond > max_condition:
        raise ValueError(f"ill-conditioned fit (condition number {cond:.3e}); spread the N values")
    coef, *_ = np.linalg.lstsq(As, f, rcond=None)
    coef = coef / scale
    resid = f - A @ coef
    return ExpansionFit(ns, float(beta), float(coef[0]), float(coef[1]), float(coef[2]),
                        coef[3:], resid, cond)


def compare_f1(fit: ExpansionFit, r: float = 1.0, boundary_term: float = 0.0):
    """Compare the fitted ``F1`` with both closed-form conventions."""
    from .free_energy import f1_conventions

    conv = f1_conventions(fit.beta, r, boundary_term)
    out = {
        "fitted": fit.F1,
        "verbatim": conv["verbatim"],
        "morris": conv["morris"],
        "fitted_minus_verbatim": fit.F1 - conv["verbatim"],
        "fitted_minus_morris": fit.F1 - conv["morris"],
        "convention_discrepancy": conv["discrepancy"],
    }
    fit.comparison = out
    return out


def bench_rows(beta, ns_exact=(50, 100, 200, 400), ns_quad=(1, 2, 3), nodes=512,
               contour: Contour | None = None):
    """Rows ``(N, beta, logZ, F_N, source)`` for the unit-circle benchmark."""
    rows = []
    for n in ns_exact:
        lz = morris_exact(n, beta)
        rows.append((n, beta, lz, float(free_energy_sequence([n], [lz], beta)[0]), "morris_exact"))
    if contour is not None:
        for n in ns_quad:
            p = GasParams(n, beta)
            lz = z_quadrature(contour, p, QuadratureSettings(nodes=nodes))
            rows.append((n, beta, lz, float(free_energy_sequence([n], [lz], beta)[0]), "z_quadrature"))
    return rows


def bench_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "beta", "logZ", "F_N", "source"])
    for n, beta, lz, fn, src in rows:
        w.writerow([int(n), repr(float(beta)), repr(float(lz)), repr(float(fn)), src])
    return buf.getvalue()
