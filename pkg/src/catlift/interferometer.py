"""Single-interferometer pipeline: cat creation, expansion, force sensing, closure.

The default schedule alternates a harmonic quarter period with an inverted
oscillator stretch of length ``t_minus``, twice::

    QHO pi/2 -> IHO t_minus -> QHO pi/2 -> IHO t_minus

whose forward map is exactly ``-1`` for every ``t_minus``.  Branch ``+-``
starts at ``+-r0`` and ends swapped at ``-+r0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import constants

from . import kernels
from .phase_space import (
    IHO,
    QHO,
    GaussianUnitary,
    QuadraticHamiltonian,
    as_covariance,
    branch_density_matrix,
    compose,
    evolve_numeric_oracle,
    forward_segment,
    gaussian_unitary_compose,
    segment_unitary,
    symplectic_form,
)

HBAR = constants.hbar
G_NEWTON = constants.G


@dataclass(frozen=True)
class TrapSetup:
    """SI description of one trapped mass.

    Attributes
    ----------
    mass : float
        Mass ``M`` in kg.
    omega : float
        Trap angular frequency in rad/s.
    delta_x : float
        Initial half-superposition in units of ``sqrt(2) x0``.
    distance : float, optional
        Separation of the two traps (m), needed for gravity.
    theta : float
        Orientation of the trap axis relative to the separation (rad).
    radius : float, optional
        Sphere radius (m), needed for gas collisions.
    """

    mass: float
    omega: float
    delta_x: float
    distance: float | None = None
    theta: float = 0.0
    radius: float | None = None

    def __post_init__(self):
        if not (self.mass > 0 and self.omega > 0):
            raise ValueError("mass and omega must be positive")
        if not self.delta_x >= 0:
            raise ValueError("delta_x must be non-negative")
        if self.distance is not None and not self.distance > 0:
            raise ValueError("distance must be positive")
        if self.radius is not None and not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def x0(self) -> float:
        """Ground-state spread ``sqrt(hbar / (2 M omega))`` in metres."""
        return math.sqrt(HBAR / (2.0 * self.mass * self.omega))

    @classmethod
    def from_density(cls, mass, omega, delta_x, density, **kw):
        """Build a setup whose radius follows from a homogeneous sphere."""
        radius = (3.0 * mass / (4.0 * math.pi * density)) ** (1.0 / 3.0)
        return cls(mass, omega, delta_x, radius=radius, **kw)


@dataclass(frozen=True)
class ProtocolSchedule:
    """Ordered ``(kind, duration)`` segments; durations are dimensionless."""

    segments: tuple = ()

    def __post_init__(self):
        segs = tuple((str(k), float(d)) for k, d in self.segments)
        for kind, d in segs:
            if kind not in (QHO, IHO):
                raise ValueError(f"unknown segment kind {kind!r}")
            if not d >= 0:
                raise ValueError("segment durations must be non-negative")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def expansion(cls, t_minus: float, t_plus: float = 0.5 * math.pi):
        return cls(((QHO, t_plus), (IHO, t_minus), (QHO, t_plus), (IHO, t_minus)))

    @property
    def duration(self) -> float:
        return sum(d for _, d in self.segments)

    def forward_map(self, t: float | None = None) -> np.ndarray:
        """Forward moment map from 0 to ``t`` (end of schedule by default)."""
        if t is None:
            return compose([forward_segment(k, d) for k, d in self.segments])
        if t < 0 or t > self.duration * (1 + 1e-12):
            raise ValueError(f"time {t} outside the schedule [0, {self.duration}]")
        maps, elapsed = [], 0.0
        for kind, d in self.segments:
            step = min(d, max(0.0, t - elapsed))
            maps.append(forward_segment(kind, step))
            elapsed += d
            if elapsed >= t:
                break
        return compose(maps)


@dataclass
class CatState:
    """Two Gaussian branches entangled with a qubit.

    ``means[0]``/``covs[0]`` belong to the ``|+1>`` branch and index 1 to
    ``|-1>``; ``amplitudes`` are the qubit coefficients in that order.
    """

    means: np.ndarray
    covs: np.ndarray
    amplitudes: np.ndarray = field(default_factory=lambda: np.full(2, 1 / math.sqrt(2), dtype=complex))
    t: float = 0.0

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.covs = np.asarray(self.covs, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if abs(np.vdot(self.amplitudes, self.amplitudes).real - 1.0) > 1e-12:
            raise ValueError("qubit amplitudes must be normalised")
        for s in self.covs:
            as_covariance(s)

    def wigner(self, points, prefactor="normalized"):
        from .phase_space import cat_wigner

        return cat_wigner(self.means[0], self.covs[0], self.means[1], self.covs[1], points, prefactor)


@dataclass(frozen=True)
class QubitDensity:
    """2x2 qubit density matrix; row/column 0 is the ``|+1>`` state."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("qubit density must be 2x2")
        check_density(m)
        object.__setattr__(self, "matrix", m)


def check_density(m, tol: float = 1e-10):
    """Raise unless ``m`` is Hermitian, unit-trace and PSD within ``tol``."""
    m = np.asarray(m, dtype=complex)
    if np.abs(m - m.conj().T).max() > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(m) - 1.0) > tol:
        raise ValueError("density matrix trace differs from 1")
    ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    if ev.min() < -tol or ev.max() > 1 + tol:
        raise ValueError(f"density matrix eigenvalues out of range ({ev.min():.3e}, {ev.max():.3e})")
    return m


# ---------------------------------------------------------------------------
# cat creation and expansion
# ---------------------------------------------------------------------------


def create_cat(setup: TrapSetup, t0: float = math.pi) -> CatState:
    """Cat state after a creation time ``t0`` of state-dependent force.

    Branch ``+-`` sits at ``+-(delta_x/2)(1 - cos t0, -sin t0)`` with unit
    covariance; ``t0 = pi`` gives the turning point ``+-(delta_x, 0)``.
    """
    if t0 < 0:
        raise ValueError("t0 must be non-negative")
    r0 = 0.5 * setup.delta_x * np.array([1.0 - math.cos(t0), -math.sin(t0)])
    return CatState(np.stack([r0, -r0]), np.stack([np.eye(2), np.eye(2)]))


def protocol_trajectory(cat: CatState, t_minus: float, sample_times: Sequence[float]) -> list[CatState]:
    """Branch moments at the requested protocol times.

    Times run from 0 (start of expansion) to ``t_f = 2 (pi/2 + t_minus)``.
    """
    sched = ProtocolSchedule.expansion(t_minus)
    om = symplectic_form(1)
    out = []
    for t in np.asarray(sample_times, dtype=float).ravel():
        if t <= t_max(t_minus):
            M = sched.forward_map(float(t))
        else:
            # The full protocol is exactly -1, so M(t) = -(map from t to the end)^-1.
            # Composing forward here would subtract numbers of size e^{t_minus}.
            rest, elapsed = [], 0.0
            for kind, d in sched.segments:
                lo = max(elapsed, float(t))
                if elapsed + d > lo:
                    rest.append(forward_segment(kind, elapsed + d - lo))
                elapsed += d
            R = compose(rest) if rest else np.eye(2)
            M = om @ R.T @ om  # -R^{-1} for a 2x2 symplectic R
        means = cat.means @ M.T
        covs = np.einsum("ij,bjk,lk->bil", M, cat.covs, M)
        covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
        out.append(CatState(means, covs, cat.amplitudes.copy(), float(t)))
    return out


def max_superposition(delta_x: float, t_minus: float, x0: float | None = None):
    """Largest branch separation ``sqrt(2) e^{t_minus} delta_x``.

    Returns the dimensionless value and, when ``x0`` is given, the metre
    value ``x0 * Delta_x`` (the tabulated conversion).
    """
    if delta_x < 0:
        raise ValueError("delta_x must be non-negative")
    big = math.sqrt(2.0) * math.exp(t_minus) * delta_x
    return big, (None if x0 is None else x0 * big)


def t_max(t_minus: float) -> float:
    """Protocol time of the largest spatial separation."""
    return t_minus + 0.75 * math.pi


# ---------------------------------------------------------------------------
# force sensing
# ---------------------------------------------------------------------------


def force_coupling(force: float, setup: TrapSetup) -> float:
    """Dimensionless force ``g = f x0 / (hbar omega)``."""
    return force * setup.x0 / (HBAR * setup.omega)


def force_segments(g: float, t_minus: float) -> list[GaussianUnitary]:
    """The four displaced segments of the protocol under a constant force."""
    hp = QuadraticHamiltonian.qho(g)
    hm = QuadraticHamiltonian.iho(g)
    tp = 0.5 * math.pi
    return [segment_unitary(hp, tp), segment_unitary(hm, t_minus), segment_unitary(hp, tp), segment_unitary(hm, t_minus)]


def force_schedule(g: float, t_minus: float):
    hp = QuadraticHamiltonian.qho(g)
    hm = QuadraticHamiltonian.iho(g)
    tp = 0.5 * math.pi
    return [(hp, tp), (hm, t_minus), (hp, tp), (hm, t_minus)]


def force_displacement(g: float, t_minus: float) -> np.ndarray:
    """Net mean shift of the protocol under force ``g``.

    ``(2 g e^{t}, 2 g (e^{t} - 1))``; this agrees with composing the
    displaced segments and with fine-step integration of the driven flow.
    """
    e = math.exp(t_minus)
    return np.array([2.0 * g * e, 2.0 * g * (e - 1.0)])


def force_displacement_printed(g: float, t_minus: float) -> np.ndarray:
    """Alternative closed form ``(-2 g e^{t}, -2 g (e^{t} + 1))``.

    Kept for comparison only; it disagrees with integration of the driven
    flow in the constant offset (see :func:`force_phase_report`).
    """
    e = math.exp(t_minus)
    return np.array([-2.0 * g * e, -2.0 * g * (e + 1.0)])


def phase_from_displacement(r0, r_tot) -> float:
    """``2 r0^T Omega r_tot``: the qubit phase for a perfectly closed loop."""
    r0 = np.asarray(r0, dtype=float)
    return float(2.0 * r0 @ symplectic_form(r0.size // 2) @ np.asarray(r_tot, dtype=float))


def force_phase(force: float, setup: TrapSetup, t_minus: float) -> float:
    """``phi_f = 4 f x0 delta_x (e^{t_minus} - 1) / (hbar omega)``."""
    g = force_coupling(force, setup)
    return 4.0 * g * setup.delta_x * math.expm1(t_minus)


@dataclass(frozen=True)
class ForcePhaseReport:
    closed_form: float
    composed: float
    displacement_printed: float
    oracle: float
    verdict: str

    def as_dict(self):
        return dict(self.__dict__)


def force_phase_report(force: float, setup: TrapSetup, t_minus: float, steps: int = 10_000, rtol: float = 1e-6):
    """Compare the phase routes against fine-step integration.

    Routes: the closed form (``force_phase``), composition of the displaced
    segments, and ``2 r0^T Omega r_tot`` with the alternative closed form
    for ``r_tot``.  The oracle integrates the driven moment flow with
    ``steps`` exact steps per segment.
    """
    g = force_coupling(force, setup)
    r0 = np.array([setup.delta_x, 0.0])
    comp = gaussian_unitary_compose(force_segments(g, t_minus))
    traj = evolve_numeric_oracle(force_schedule(g, t_minus), np.zeros(2), np.eye(2), steps)
    oracle = phase_from_displacement(r0, traj.r[-1])
    vals = {
        "closed_form": force_phase(force, setup, t_minus),
        "composed": phase_from_displacement(r0, comp.displacement),
        "displacement_printed": phase_from_displacement(r0, force_displacement_printed(g, t_minus)),
    }

    def agrees(v):
        return abs(v - oracle) <= rtol * max(abs(oracle), 1e-300)

    ok = [k for k, v in vals.items() if agrees(v)]
    verdict = "agree with oracle: " + (", ".join(ok) if ok else "none")
    return ForcePhaseReport(oracle=oracle, verdict=verdict, **vals)


def optimal_time_force(force: float, setup: TrapSetup) -> float:
    """``T_o^f = -ln(4 f x0 delta_x / (hbar omega))``.

    Raises
    ------
    ValueError
        If the argument is not in ``(0, 1)``: the phase already reaches one
        radian without expansion, or the force vanishes.
    """
    arg = 4.0 * force_coupling(force, setup) * setup.delta_x
    if not 0 < arg < 1:
        raise ValueError(f"optimal force time needs 0 < 4 g delta_x < 1, got {arg:.3e}")
    return -math.log(arg)


# ---------------------------------------------------------------------------
# closing the interferometer
# ---------------------------------------------------------------------------


def ideal_protocol_unitary(t_minus: float) -> GaussianUnitary:
    """Force-free protocol with its exactly vanishing closure defect."""
    M = ProtocolSchedule.expansion(t_minus).forward_map()
    d = kernels.closure_defect(np.zeros((1, 4)), np.zeros((1, 4)), t_minus)[0]
    return GaussianUnitary(np.zeros(2), M, 0.0, defect=d)


def close_interferometer(r0, total: GaussianUnitary, sigma_final=None) -> QubitDensity:
    """Qubit density after recombination.

    Parameters
    ----------
    r0 : array_like
        Branch vector of the ``|+1>`` arm (length 2).
    total : GaussianUnitary
        1-mode protocol unitary.
    sigma_final : array_like, optional
        Branch covariance at the end of the protocol.  When given (for
        instance a diffusion-broadened covariance), the overlap exponent is
        ``-(r0 + r_f)^T Omega^T sigma_final Omega (r0 + r_f)`` with
        ``r_f = M r0``; otherwise the unitary result is used.
    """
    r0 = np.asarray(r0, dtype=float)
    if total.n != 1 or r0.size != 2:
        raise ValueError("close_interferometer expects a single mode")
    rho = branch_density_matrix(np.stack([r0, -r0]), total)
    if sigma_final is not None:
        om = symplectic_form(1)
        w = om @ (total.closure_defect() @ r0)
        damp = math.exp(-float(w @ np.asarray(sigma_final, dtype=float) @ w))
        phase = rho[0, 1] / abs(rho[0, 1]) if rho[0, 1] != 0 else 1.0
        rho[0, 1] = 0.5 * damp * phase
        rho[1, 0] = np.conj(rho[0, 1])
    return QubitDensity(rho)


def visibility(rho) -> float:
    """Fringe contrast ``2 |rho_01|``."""
    m = rho.matrix if isinstance(rho, QubitDensity) else np.asarray(rho)
    return float(2.0 * abs(m[0, 1]))
