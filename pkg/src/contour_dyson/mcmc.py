"""Single-site Metropolis sampler for the log-gas Boltzmann weight.

Target density on ``Gamma^N`` with respect to ``ds_1 ... ds_N``:

    log P_0 = beta * E = 2 beta sum_{i<j} log|z_i - z_j| + beta sum_i W(z_i).

Only log-weights are ever formed.  Proposals move one particle by a Gaussian
arclength step (wrapped modulo the perimeter), which is symmetric, so the
acceptance probability is ``min(1, exp(beta * dE))``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .energy import Configuration, GasParams, Potential
from .errors import SamplerError
from .geometry import Contour

__all__ = [
    "McSettings",
    "SampleSet",
    "mh_chain",
    "estimate_observable",
    "log_weight",
    "detailed_balance_residual",
]


@dataclass
class McSettings:
    proposal_sigma: float = 0.1
    sweeps: int = 1000
    burn_in: int = 200
    thinning: int = 1
    seed: int = 0
    adapt: bool = True
    target_acceptance: tuple = (0.3, 0.5)
    stall_window: int = 100

    def __post_init__(self):
        if not self.proposal_sigma > 0:
            raise ValueError("proposal_sigma must be positive")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")


@dataclass
class SampleSet:
    """Stored configurations, shape ``(S, N)`` or ``(S, R, N)``."""

    positions: np.ndarray
    perimeter: float
    acceptance_rate: float
    proposal_sigma: float
    sweeps: np.ndarray = None
    cache: dict = field(default_factory=dict)

    def __len__(self):
        return self.positions.shape[0]

    def configurations(self, contour):
        if self.positions.ndim != 2:
            raise ValueError("configurations() needs a single-chain sample set")
        return [Configuration(contour, s) for s in self.positions]

    def to_csv(self):
        if self.positions.ndim != 2:
            raise ValueError("CSV output needs a single-chain sample set")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.positions.shape[1]
        w.writerow(["sweep"] + [f"s_{i + 1}" for i in range(n)])
        for k, row in zip(self.sweeps, self.positions):
            w.writerow([int(k)] + [repr(float(v)) for v in row])
        return buf.getvalue()


def log_weight(z, beta, potential: Potential):
    """``log P_0`` for configurations ``z`` of shape ``(..., N)``."""
    n = z.shape[-1]
    iu, ju = np.triu_indices(n, 1)
    with np.errstate(divide="ignore"):
        pair = 2 * np.log(np.abs(z[..., iu] - z[..., ju])).sum(axis=-1)
    return beta * (pair + potential.value(z).sum(axis=-1))


def _site_energy(zi, z, i, potential):
    """Terms of ``E`` involving particle ``i`` at position ``zi`` (shape (R,))."""
    d = np.abs(zi[:, None] - z)
    d[:, i] = 1.0
    with np.errstate(divide="ignore"):
        return 2 * np.log(d).sum(axis=1) + potential.value(zi)


def mh_chain(contour: Contour, s0, p: GasParams, settings: McSettings) -> SampleSet:
    """Run the chain from ``s0`` (shape ``(N,)`` or ``(R, N)`` for independent replicas).

    During burn-in the proposal scale is adapted every 50 sweeps toward the
    target acceptance window; it is frozen for the measurement phase.
    """
    s0 = np.asarray(s0, dtype=float)
    single = s0.ndim == 1
    s = np.mod(np.atleast_2d(s0), contour.perimeter).copy()
    R, N = s.shape
    L = contour.perimeter
    beta = p.beta
    W = p.potential
    rng = np.random.default_rng(settings.seed)
    z = contour.spec.z(contour.u_of_s(s))
    if N > 1 and not np.all(np.isfinite(log_weight(z, beta, W))):
        raise SamplerError("initial configuration has coincident particles")
    sigma = float(settings.proposal_sigma)
    lo, hi = settings.target_acceptance

    out, sweep_ids = [], []
    accepted = 0
    proposed = 0
    window_acc = 0
    window_prop = 0
    adapt_acc = 0
    total = settings.burn_in + settings.sweeps
    for sweep in range(total):
        measuring = sweep >= settings.burn_in
        sweep_acc = 0
        for i in range(N):
            step = sigma * rng.standard_normal(R)
            log_u = np.log(rng.random(R))
            new_s = np.mod(s[:, i] + step, L)
            new_z = contour.spec.z(contour.u_of_s(new_s))
            d_e = _site_energy(new_z, z, i, W) - _site_energy(z[:, i], z, i, W)
            acc = log_u < beta * d_e
            s[acc, i] = new_s[acc]
            z[acc, i] = new_z[acc]
            sweep_acc += int(acc.sum())
        window_acc += sweep_acc
        window_prop += R * N
        adapt_acc += sweep_acc
        if measuring:
            accepted += sweep_acc
            proposed += R * N
            if (sweep - settings.burn_in) % settings.thinning == 0:
                out.append(s.copy())
                sweep_ids.append(sweep - settings.burn_in)
        if (sweep + 1) % settings.stall_window == 0:
            if window_acc == 0:
                raise SamplerError(
                    f"no proposal accepted in {settings.stall_window} sweeps; "
                    f"reduce proposal_sigma (now {sigma:g})"
                )
            window_acc = window_prop = 0
        if (sweep + 1) % 50 == 0:
            rate = adapt_acc / (50 * R * N)
            adapt_acc = 0
            if settings.adapt and not measuring:
                if rate < lo:
                    sigma *= 0.7
                elif rate > hi:
                    sigma = min(sigma * 1.3, L / 2)
    positions = np.array(out)
    if single:
        positions = positions[:, 0, :]
    rate = accepted / proposed if proposed else 0.0
    return SampleSet(positions, L, rate, sigma, np.array(sweep_ids))


def estimate_observable(samples: SampleSet, f, n_batches=20):
    """Batch-means estimate of ``E[f]``; ``f`` maps an ``(N,)`` position array
    (or a :class:`Configuration` when ``samples.cache['contour']`` is set) to a
    number.  Replica axes are averaged within each stored sweep."""
    if n_batches < 10:
        raise SamplerError("at least 10 batches are needed for a batch-means error")
    pos = samples.positions
    if len(pos) < n_batches:
        raise SamplerError(
            f"{len(pos)} samples cannot fill {n_batches} batches; run a longer chain"
        )
    contour = samples.cache.get("contour")

    def evaluate(row):
        if contour is not None:
            return float(f(Configuration(contour, row)))
        return float(f(row))

    if pos.ndim == 3:
        values = np.array([[evaluate(r) for r in sweep] for sweep in pos]).mean(axis=1)
    else:
        values = np.array([evaluate(r) for r in pos])
    usable = len(values) - len(values) % n_batches
    batches = values[:usable].reshape(n_batches, -1).mean(axis=1)
    mean = float(values.mean())
    stderr = float(batches.std(ddof=1) / np.sqrt(n_batches))
    return mean, stderr


def detailed_balance_residual(contour, s_a, s_b, i, p: GasParams, sigma):
    """``log pi(A) q(A->B) alpha(A->B) - log pi(B) q(B->A) alpha(B->A)`` for
    configurations that differ only in particle ``i``."""
    L = contour.perimeter
    z_a = contour.spec.z(contour.u_of_s(np.asarray(s_a)))
    z_b = contour.spec.z(contour.u_of_s(np.asarray(s_b)))
    la = log_weight(z_a, p.beta, p.potential)
    lb = log_weight(z_b, p.beta, p.potential)
    delta = (s_b[i] - s_a[i] + L / 2) % L - L / 2
    images = delta + L * np.arange(-3, 4)
    log_q = logsumexp(-0.5 * (images / sigma) ** 2)  # wrapped Gaussian, symmetric in delta
    log_q_back = logsumexp(-0.5 * (-images / sigma) ** 2)
    alpha_ab = min(0.0, lb - la)
    alpha_ba = min(0.0, la - lb)
    return float((la + log_q + alpha_ab) - (lb + log_q_back + alpha_ba))
