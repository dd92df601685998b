"""Open-system corrections to the expansion protocol.

Covers position diffusion through the Lyapunov equation, qubit dephasing
for one and two qubits, quasi-static force noise and collisions with
residual gas.  Rates follow the dimensionless convention of the rest of
the package (time in units of ``1/omega``) unless a name ends in ``_hz``
or ``_s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants, integrate, linalg

from .gie import JointQubitDensity
from .interferometer import (
    HBAR,
    QubitDensity,
    TrapSetup,
    close_interferometer,
    force_coupling,
    ideal_protocol_unitary,
)
from .phase_space import IHO, QHO, as_covariance, forward_segment, symplectic_form

K_B = constants.k
M_AIR = 28.97 * constants.atomic_mass
HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class GasParams:
    """Residual gas: pressure (Pa), particle radius (m), temperature (K)."""

    pressure: float = 0.0
    radius: float = 1e-6
    temperature: float = 1.0
    m_air: float = M_AIR
    v_bar: float | None = None

    def __post_init__(self):
        if self.pressure < 0:
            raise ValueError("pressure must be non-negative")
        for name in ("radius", "temperature", "m_air"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def mean_speed(self) -> float:
        """``v_bar``; the rms speed ``sqrt(3 k T / m)`` unless given."""
        if self.v_bar is not None:
            return self.v_bar
        return math.sqrt(3.0 * K_B * self.temperature / self.m_air)


@dataclass(frozen=True)
class NoiseModel:
    gamma_x: float = 0.0
    gamma_q_hz: float = 0.0
    sigma_f: float = 0.0
    gas: GasParams | None = None

    def __post_init__(self):
        for name in ("gamma_x", "gamma_q_hz", "sigma_f"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class DriftDiffusion:
    """Linear open dynamics ``dr/dt = A r + d`` with diffusion ``D``."""

    A: np.ndarray
    D: np.ndarray
    d: np.ndarray = field(default=None)
    label: str | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        D = np.asarray(self.D, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or D.shape != A.shape:
            raise ValueError("A and D must be square matrices of equal size")
        if np.abs(D - D.T).max() > 1e-12 * max(1.0, np.abs(D).max()):
            raise ValueError("diffusion matrix must be symmetric")
        if np.linalg.eigvalsh(D).min() < -1e-12 * max(1.0, np.abs(D).max()):
            raise ValueError("diffusion matrix must be positive semidefinite")
        d = np.zeros(A.shape[0]) if self.d is None else np.asarray(self.d, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "d", d)

    @classmethod
    def position_noise(cls, kind: str, gamma_x: float, strict: bool = False):
        """Segment ``kind`` (QHO/IHO) with momentum diffusion from ``x``-decoherence.

        The diffusion matrix is ``diag(0, Gamma_x)``; ``strict=True`` uses
        ``diag(0, 4 Gamma_x)``, the value the double commutator gives in the
        vacuum-is-identity covariance convention.
        """
        H = np.diag([1.0 if kind == QHO else -1.0, 1.0])
        D = np.diag([0.0, (4.0 if strict else 1.0) * gamma_x])
        return cls(symplectic_form(1) @ H, D, None, kind)


def diffusion_integral_qho(gamma: float, t: float = HALF_PI) -> np.ndarray:
    """``int_0^t M(s) diag(0, gamma) M(s)^T ds`` for the harmonic flow."""
    s2 = math.sin(2 * t)
    return 0.25 * gamma * np.array([[2 * t - s2, 1 - math.cos(2 * t)], [1 - math.cos(2 * t), 2 * t + s2]])


def diffusion_integral_iho(gamma: float, t: float) -> np.ndarray:
    """Same integral for the inverted flow:
    ``(gamma/4) [[sinh 2t - 2t, 2 sinh^2 t], [2 sinh^2 t, sinh 2t + 2t]]``."""
    sh2 = math.sinh(2 * t)
    off = 2 * math.sinh(t) ** 2
    return 0.25 * gamma * np.array([[sh2 - 2 * t, off], [off, sh2 + 2 * t]])


def diffusion_integral_quad(A, D, t: float, tol: float = 1e-10) -> np.ndarray:
    """Adaptive-quadrature oracle for ``int_0^t e^{As} D e^{A^T s} ds``."""
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)

    def integrand(s):
        E = linalg.expm(A * s)
        return E @ D @ E.T

    val, _ = integrate.quad_vec(integrand, 0.0, t, epsabs=tol, epsrel=tol)
    return val


def _diffusion_integral(dd: DriftDiffusion, t: float) -> np.ndarray:
    if dd.label in (QHO, IHO) and dd.A.shape == (2, 2) and dd.D[0, 0] == 0 and dd.D[0, 1] == 0:
        f = diffusion_integral_qho if dd.label == QHO else diffusion_integral_iho
        return f(dd.D[1, 1], t)
    return diffusion_integral_quad(dd.A, dd.D, t)


def lyapunov_evolve(dd: DriftDiffusion, r0, sigma0, t: float):
    """Evolve first moments and covariance under drift and diffusion.

    Returns
    -------
    r : ndarray
        ``e^{At} r0 + int_0^t e^{As} ds d``.
    sigma : ndarray
        ``e^{At} sigma0 e^{A^T t} + int_0^t e^{As} D e^{A^T s} ds``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    n = dd.A.shape[0]
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = dd.A
    aug[:n, n] = dd.d
    E = linalg.expm(aug * t)
    M, c = E[:n, :n], E[:n, n]
    r = M @ np.asarray(r0, dtype=float) + c
    s0 = as_covariance(sigma0, check_physical=False)
    return r, M @ s0 @ M.T + _diffusion_integral(dd, t)


def protocol_covariance_with_diffusion(gamma_x: float, t_minus: float, sigma0=None, strict: bool = False) -> np.ndarray:
    """Branch covariance at the end of the protocol with position noise.

    Chains ``sigma -> M_i sigma M_i^T + D_i`` over QHO(pi/2), IHO(t),
    QHO(pi/2), IHO(t), which expands to the five-term sum of diffusion
    integrals propagated by the later segments plus ``M sigma0 M^T``.
    """
    if gamma_x < 0:
        raise ValueError("gamma_x must be non-negative")
    g = (4.0 if strict else 1.0) * gamma_x
    s = np.eye(2) if sigma0 is None else as_covariance(sigma0)
    Mq, Mi = forward_segment(QHO, HALF_PI), forward_segment(IHO, t_minus)
    Dq, Di = diffusion_integral_qho(g), diffusion_integral_iho(g, t_minus)
    for M, D in ((Mq, Dq), (Mi, Di)) * 2:
        s = M @ s @ M.T + D
    return s


def decohered_qubit_density(delta_x: float, t_minus: float, gamma_x: float, strict: bool = False) -> QubitDensity:
    """Qubit state after the ideal protocol with position diffusion.

    The branches close exactly, so the broadened covariance never enters
    the overlap and the result equals the noiseless one.
    """
    sigma = protocol_covariance_with_diffusion(gamma_x, t_minus, strict=strict)
    return close_interferometer([delta_x, 0.0], ideal_protocol_unitary(t_minus), sigma_final=sigma)


# ---------------------------------------------------------------------------
# qubit dephasing
# ---------------------------------------------------------------------------


def dephasing_time(t_minus: float, t_plus: float = HALF_PI) -> float:
    """Protocol duration ``t_f = 2 (t_plus + t_minus)`` in units of ``1/omega``."""
    return 2.0 * (t_plus + t_minus)


def qubit_dephase(rho, gamma_q_hz: float, omega: float, t_f: float, strict: bool = False):
    """Apply local pure dephasing for a dimensionless time ``t_f``.

    Single qubit coherences decay by ``exp(-k Gamma_q t_f / omega)``; for
    two qubits element ``(jk, mn)`` decays by
    ``exp(-k (2 - delta_jm - delta_kn) Gamma_q t_f / omega)``.  ``k`` is 1,
    or 4 with ``strict=True`` (double-commutator Lindbladian).
    """
    if gamma_q_hz < 0 or t_f < 0:
        raise ValueError("gamma_q and t_f must be non-negative")
    if not omega > 0:
        raise ValueError("omega must be positive")
    rate = (4.0 if strict else 1.0) * gamma_q_hz * t_f / omega
    if isinstance(rho, JointQubitDensity) or np.shape(getattr(rho, "matrix", rho)) == (4, 4):
        m = np.array(getattr(rho, "matrix", rho), dtype=complex)
        j = np.array([0, 0, 1, 1])
        k = np.array([0, 1, 0, 1])
        count = (j[:, None] != j[None, :]).astype(float) + (k[:, None] != k[None, :])
        return JointQubitDensity(m * np.exp(-rate * count))
    m = np.array(getattr(rho, "matrix", rho), dtype=complex)
    fac = math.exp(-rate)
    m[0, 1] *= fac
    m[1, 0] *= fac
    return QubitDensity(m)


# ---------------------------------------------------------------------------
# quasi-static force noise
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuasiStaticResult:
    gamma_f: float
    factor: float
    gamma_f_printed: float
    bound: float


def quasi_static_suppression(sigma_f: float, setup: TrapSetup, t_minus: float) -> QuasiStaticResult:
    """Coherence loss from a random but constant force ``f ~ N(0, sigma_f^2)``.

    ``Gamma_f = Var(phi_f) / 2 = 8 x0^2 dx^2 sigma_f^2 (e^t - 1)^2 / (hbar omega)^2``.
    The unsquared ``(e^t - 1)`` variant is reported in ``gamma_f_printed``.
    """
    if sigma_f < 0:
        raise ValueError("sigma_f must be non-negative")
    pref = 8.0 * (setup.x0 * setup.delta_x * sigma_f / (HBAR * setup.omega)) ** 2
    em1 = math.expm1(t_minus)
    gamma = pref * em1**2
    return QuasiStaticResult(gamma, math.exp(-gamma), pref * em1, force_noise_bound(setup, t_minus))


def force_noise_bound(setup: TrapSetup, t_minus: float) -> float:
    """Leading-order ``sigma_f`` for which ``Gamma_f`` reaches one: ``hbar omega e^{-t} / (2 sqrt2 x0 dx)``."""
    if setup.delta_x == 0:
        return math.inf
    return HBAR * setup.omega * math.exp(-t_minus) / (2.0 * math.sqrt(2.0) * setup.x0 * setup.delta_x)


def force_noise_mc(sigma_f: float, setup: TrapSetup, t_minus: float, samples: int = 100_000, seed: int = 0):
    """Monte-Carlo estimate of ``|<exp(i phi_f)>|`` and its standard error."""
    rng = np.random.default_rng(seed)
    f = rng.normal(0.0, sigma_f, samples)
    phi = 4.0 * force_coupling(1.0, setup) * f * setup.delta_x * math.expm1(t_minus)
    c = np.cos(phi)
    return float(c.mean()), float(c.std(ddof=1) / math.sqrt(samples))


# ---------------------------------------------------------------------------
# residual gas
# ---------------------------------------------------------------------------


def gas_decoherence(gas: GasParams) -> float:
    """Collision rate ``16 pi sqrt(2 pi / 3) P R^2 / (m_air v_bar)`` in Hz."""
    return 16.0 * math.pi * math.sqrt(2.0 * math.pi / 3.0) * gas.pressure * gas.radius**2 / (gas.m_air * gas.mean_speed)


def pressure_bound(radius: float, t_tot_s: float, temperature: float = 1.0, m_air: float = M_AIR, form: str = "printed") -> float:
    """Largest tolerable gas pressure (Pa) for a protocol lasting ``t_tot_s``.

    ``form="consistent"`` solves ``Gamma_air t_tot = 1`` with the rms speed:
    ``3 sqrt(m k T) / (16 pi sqrt(2 pi) R^2 t_tot)``.  ``form="printed"``
    evaluates ``sqrt(3 m k T) t_tot / (16 pi sqrt(pi) R^2)`` with ``t_tot``
    in seconds, the expression behind the published table column.
    """
    if not (radius > 0 and t_tot_s > 0 and temperature > 0 and m_air > 0):
        raise ValueError("pressure_bound needs positive inputs")
    mkT = m_air * K_B * temperature
    if form == "consistent":
        return 3.0 * math.sqrt(mkT) / (16.0 * math.pi * math.sqrt(2.0 * math.pi) * radius**2 * t_tot_s)
    if form == "printed":
        return math.sqrt(3.0 * mkT) * t_tot_s / (16.0 * math.pi * math.sqrt(math.pi) * radius**2)
    raise ValueError(f"unknown form {form!r}")
