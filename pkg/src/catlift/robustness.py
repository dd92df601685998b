"""Operational precision: switching speed and switching-time jitter.

Two requirements keep the expansion protocol working in practice.  The
switch between trap and anti-trap must be fast compared to the dynamics
of the expanded cat (sudden approximation), and the segment durations must
be reproducible well enough that the two branches still recombine.  The
second effect is the Humpty-Dumpty problem: a duration error leaves a
small closure defect that the enormous superposition size amplifies.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._accel import worker_count
from .phase_space import IHO, QHO, compose, forward_segment, higher_moments

HALF_PI = 0.5 * math.pi
MC_CHUNK = 8192


@dataclass(frozen=True)
class SwitchingErrorModel:
    """Gaussian relative errors on the four segment durations.

    Only ``eps1``, ``eps3`` and ``eps24 = eps4 - eps2`` matter once the IHO
    duration is redefined to absorb ``eps2``; the last has twice the
    variance.  ``mean`` is a systematic offset hook (zero by default).
    """

    sigma_eps: float
    seed: int = 0
    mean: float = 0.0

    def __post_init__(self):
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be non-negative")

    @property
    def scales(self) -> np.ndarray:
        return self.sigma_eps * np.array([1.0, 1.0, math.sqrt(2.0)])


@dataclass(frozen=True)
class SuddenSwitch:
    f_avg: float = 0.0
    delta_t: float = 0.0

    def __post_init__(self):
        if not -1.0 <= self.f_avg <= 1.0:
            raise ValueError("f_avg must lie in [-1, 1]")


# ---------------------------------------------------------------------------
# sudden approximation
# ---------------------------------------------------------------------------


def sudden_variance(delta_x: float, t_minus: float, f_avg: float = 0.0) -> float:
    """Energy variance of the switching Hamiltonian at the first switch.

    ``1/4 (2 dx^2 + 1) [(f + 1)^2 cosh 4t + (f - 1)^2] + (1 - f^2) dx^2 cosh 2t``.
    """
    a = 2.0 * delta_x**2 + 1.0
    return 0.25 * a * ((f_avg + 1) ** 2 * math.cosh(4 * t_minus) + (f_avg - 1) ** 2) + (1 - f_avg**2) * delta_x**2 * math.cosh(
        2 * t_minus
    )


def switch_state(delta_x: float, t_minus: float):
    """Branch moments after QHO(pi/2) then IHO(t) from ``(dx, 0)`` with unit covariance."""
    M = compose([forward_segment(QHO, HALF_PI), forward_segment(IHO, t_minus)])
    return M @ np.array([delta_x, 0.0]), M @ M.T


def sudden_variance_moments(delta_x: float, t_minus: float, f_avg: float = 0.0, ordering: str = "weyl") -> float:
    """Same variance rebuilt from Gaussian fourth moments of the branch state.

    ``ordering="weyl"`` uses the symmetrised value of ``x^2 p^2 + p^2 x^2``
    and reproduces :func:`sudden_variance`.  ``ordering="operator"`` uses
    the true operator expectation, which is lower by one, so the variance
    drops by ``f_avg`` (the exact result; e.g. zero for ``x^2 + p^2`` on
    the vacuum).
    """
    if ordering not in ("weyl", "operator"):
        raise ValueError(f"unknown ordering {ordering!r}")
    r, s = switch_state(delta_x, t_minus)
    m = higher_moments(r, s)
    x2 = r[0] ** 2 + 0.5 * s[0, 0]
    p2 = r[1] ** 2 + 0.5 * s[1, 1]
    var_x2 = m["x4"] - x2**2
    var_p2 = m["p4"] - p2**2
    anti = m["x2p2"] - (1.0 if ordering == "operator" else 0.0)
    return f_avg**2 * var_x2 + var_p2 + f_avg * (anti - 2.0 * x2 * p2)


def sudden_bound(delta_x: float, t_minus: float, omega: float = 1.0) -> float:
    """Switching duration below which the sudden picture holds (seconds if ``omega`` in rad/s)."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    return 2.0 * math.sqrt(2.0) * math.exp(-2.0 * t_minus) / math.sqrt(2.0 * delta_x**2 + 1.0) / omega


# ---------------------------------------------------------------------------
# Humpty-Dumpty visibility
# ---------------------------------------------------------------------------


def humpty_visibility_analytic(delta_x: float, t_minus: float, sigma_eps: float, form: str = "corrected", leading: bool = False) -> float:
    """Second-order average of the fringe visibility over switching jitter.

    Parameters
    ----------
    form : {"corrected", "printed"}
        ``"corrected"`` is the Gaussian average of the second-order
        exponent,
        ``[1 + 4 a t^2 + pi^2 a cosh^2 2t + pi^2 a^2 (t^2 + pi^2/8)(cosh 4t - 1)]^{-1/2}``
        with ``a = (dx sigma)^2``.  ``"printed"`` is the published
        expression, kept for comparison.
    leading : bool
        Return the large-``t`` form instead.
    """
    if sigma_eps > 0.1:
        warnings.warn("sigma_eps is not small; the second-order expansion is unreliable", stacklevel=2)
    if sigma_eps == 0 or delta_x == 0:
        return 1.0
    a = (delta_x * sigma_eps) ** 2
    t = t_minus
    if form == "corrected":
        if leading:
            return 4 * math.sqrt(2) * math.exp(-2 * t) / (math.pi * delta_x * sigma_eps * math.sqrt(8 + a * (16 * t * t + 2 * math.pi**2)))
        inv2 = (
            1
            + 4 * a * t * t
            + math.pi**2 * a * math.cosh(2 * t) ** 2
            + math.pi**2 * a * a * (t * t + math.pi**2 / 8) * 2 * math.sinh(2 * t) ** 2
        )
        return inv2**-0.5
    if form == "printed":
        if leading:
            return 8 * math.exp(-2 * t) / (math.pi * delta_x * sigma_eps * math.sqrt(8 + a * (math.pi + 16 * t)))
        b = a * (16 * t * t + math.pi**2)
        den = b * (8 - math.pi**2 * a) + math.pi**2 * a * math.cosh(4 * t) * (b + 8) + 32
        return 4 * math.sqrt(2) / math.sqrt(den)
    raise ValueError(f"unknown form {form!r}")


def _chunk_stats(y):
    mean = math.fsum(y) / y.size
    dev = y - mean
    return y.size, mean, math.fsum(dev * dev)


def defect_jacobian(delta_x: float, t_minus: float, h: float = 1e-7) -> np.ndarray:
    """Linear response of ``delta_x (D_22, D_21)`` to ``(eps1, eps3, eps24)``.

    Central differences of the exact kernel; the defect is evaluated
    without cancellation, so a small step is safe.
    """
    E = np.zeros((6, 3))
    for i in range(3):
        E[2 * i, i] = h
        E[2 * i + 1, i] = -h
    d = kernels.closure_defect(np.zeros((6, 4)), kernels._humpty_eps4(E), t_minus)
    v = delta_x * np.stack([d[:, 1, 1], d[:, 1, 0]], axis=1)
    return ((v[0::2] - v[1::2]) / (2 * h)).T


def humpty_visibility_mc(
    delta_x: float,
    t_minus: float,
    sigma_eps: float,
    samples: int = 100_000,
    seed: int = 0,
    mean: float = 0.0,
    workers: int | None = None,
    method: str = "importance",
):
    """Monte-Carlo visibility under switching jitter.

    Each draw perturbs the segment durations, evaluates the exact closure
    defect and takes the coherence ``exp(-|(S + 1) r0|^2)``.  Draws are
    generated in fixed chunks, each from its own child of
    ``SeedSequence(seed)``, and reduced in chunk order, so the estimate is
    bit-for-bit reproducible regardless of the thread count.

    Parameters
    ----------
    method : {"importance", "plain"}
        Plain sampling from the jitter distribution is hopeless once the
        expansion is long: only an exponentially thin slab of draws closes
        the loop.  ``"importance"`` samples from the Gaussian that the
        linearised defect makes optimal and reweights by the density
        ratio; the estimator stays unbiased and every draw still uses the
        exact defect.  A non-zero ``mean`` forces plain sampling.

    Returns
    -------
    visibility, standard_error : float
    """
    if samples < 1000:
        raise ValueError("at least 1000 samples are required")
    if method not in ("importance", "plain"):
        raise ValueError(f"unknown method {method!r}")
    model = SwitchingErrorModel(sigma_eps, seed, mean)
    if sigma_eps == 0 and mean == 0:
        return 1.0, 0.0
    n_chunks = -(-samples // MC_CHUNK)
    sizes = [MC_CHUNK] * (n_chunks - 1) + [samples - MC_CHUNK * (n_chunks - 1)]
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)

    if method == "plain" or mean != 0:

        def run(i):
            rng = np.random.default_rng(seqs[i])
            eps = model.mean + rng.standard_normal((sizes[i], 3)) * model.scales
            return _chunk_stats(kernels.humpty_draws(eps, delta_x, t_minus))

    else:
        J = defect_jacobian(delta_x, t_minus)
        Q = J.T @ J
        prec = np.diag(model.scales**-2) + 2.0 * Q
        cov = np.linalg.inv(prec)
        L = np.linalg.cholesky(0.5 * (cov + cov.T))
        log_norm = -0.5 * (np.sum(np.log(model.scales**2)) + np.linalg.slogdet(prec)[1])

        def run(i):
            rng = np.random.default_rng(seqs[i])
            eps = rng.standard_normal((sizes[i], 3)) @ L.T
            v = kernels.humpty_draws(eps, delta_x, t_minus)
            quad = np.einsum("ni,ij,nj->n", eps, Q, eps)
            with np.errstate(divide="ignore"):
                y = np.exp(np.log(v) + quad + log_norm)
            return _chunk_stats(y)

    n_work = worker_count(workers)
    if n_work == 1 or n_chunks == 1:
        parts = [run(i) for i in range(n_chunks)]
    else:
        with ThreadPoolExecutor(n_work) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    n, mean, m2 = parts[0]
    for nb, mb, m2b in parts[1:]:
        # pairwise merge of (count, mean, sum of squared deviations)
        tot = n + nb
        d = mb - mean
        mean = mean + d * nb / tot
        m2 = m2 + m2b + d * d * n * nb / tot
        n = tot
    return float(mean), math.sqrt(m2 / (n - 1) / n)


def sigma_eps_bound(delta_x: float, t_minus: float, omega: float | None = None) -> float:
    """Tolerable relative jitter ``4 e^{-2t} / (dx sqrt(pi (pi - 1)))``.

    With ``omega`` the value is divided by it (seconds for rad/s input).
    ``delta_x = 0`` has no bound and returns ``inf``.
    """
    if delta_x < 0:
        raise ValueError("delta_x must be non-negative")
    if delta_x == 0:
        return math.inf
    val = 4.0 * math.exp(-2.0 * t_minus) / (delta_x * math.sqrt(math.pi * (math.pi - 1.0)))
    return val / omega if omega else val
