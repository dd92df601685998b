"""Dimensionless Gaussian phase-space kernel.

Conventions
-----------
Phase-space vectors are ordered ``(x_1, p_1, x_2, p_2, ...)`` with
``[x, p] = i`` (hbar = 1), positions in units of ``sqrt(2) x0`` and time
in units of ``1/omega``.  The covariance matrix is
``sigma = <{r - <r>, (r - <r>)^T}>`` so the vacuum has ``sigma = 1``.

A quadratic Hamiltonian is stored as ``H/(hbar omega) = r^T H r / 2 +
rbar^T r``.  Its Heisenberg flow is ``dr/dt = Omega H r + Omega rbar``
and the *forward map* ``M = exp(t Omega H)`` acts directly on moments:
``r -> M r``, ``sigma -> M sigma M^T``.

Two maps are therefore in play and are never mixed silently:

* ``forward_segment`` / :attr:`GaussianUnitary.symplectic` hold ``M``;
* ``symplectic_segment`` and ``matrix_exp_symplectic`` (default) return
  the propagator-style matrix ``S = M^{-1} = exp(-t Omega H)``, the form in
  which the QHO quarter period reads ``[[0, -1], [1, 0]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import kernels

QHO = "QHO"
IHO = "IHO"
SEGMENT_LABELS = ("QHO", "IHO", "QHO+force", "IHO+force", "gravQHO", "gravIHO", "general")

SYMPLECTIC_TOL = 1e-12


# ---------------------------------------------------------------------------
# validation helpers for the array-backed value types
# ---------------------------------------------------------------------------


def symplectic_form(n: int = 1) -> np.ndarray:
    """Block-diagonal symplectic form with per-mode block ``[[0, 1], [-1, 0]]``."""
    if n < 1:
        raise ValueError("mode count must be positive")
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _modes(dim: int) -> int:
    if dim % 2:
        raise ValueError(f"phase-space dimension must be even, got {dim}")
    return dim // 2


def as_phase_vector(r, n: int | None = None) -> np.ndarray:
    """Validate a first-moment vector (length ``2n``, finite)."""
    v = np.asarray(r, dtype=float).reshape(-1)
    _modes(v.size)
    if n is not None and v.size != 2 * n:
        raise ValueError(f"expected {2 * n} entries, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("phase vector has non-finite entries")
    return v


def as_covariance(sigma, check_physical: bool = True) -> np.ndarray:
    """Validate a covariance matrix.

    Checks symmetry (1e-12 relative) and, optionally, the uncertainty
    relation ``sigma + i Omega >= 0`` with eigenvalues down to ``-1e-10``
    relative to the largest entry.
    """
    s = np.asarray(sigma, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("covariance must be a square matrix")
    n = _modes(s.shape[0])
    scale = max(1.0, float(np.abs(s).max()))
    if np.abs(s - s.T).max() > 1e-12 * scale:
        raise ValueError("covariance is not symmetric")
    if check_physical:
        ev = np.linalg.eigvalsh(s + 1j * symplectic_form(n))
        if ev.min() < -1e-10 * scale:
            raise ValueError(f"covariance violates the uncertainty relation (min eig {ev.min():.3e})")
    return s


def is_symplectic(S, tol: float = SYMPLECTIC_TOL) -> bool:
    """``S Omega S^T = Omega`` and ``det S = 1`` to ``tol`` (relative to ``|S|^2``)."""
    S = np.asarray(S, dtype=float)
    om = symplectic_form(_modes(S.shape[0]))
    scale = max(1.0, float(np.abs(S).max()) ** 2)
    ok_form = np.abs(S @ om @ S.T - om).max() <= tol * scale
    ok_det = abs(np.linalg.det(S) - 1.0) <= tol * scale
    return bool(ok_form and ok_det)


def check_symplectic(S, tol: float = SYMPLECTIC_TOL) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("symplectic transform must be square")
    if not is_symplectic(S, tol):
        raise ValueError("matrix is not symplectic")
    return S


def symplectic_inverse(S) -> np.ndarray:
    """Exact inverse of a symplectic matrix, ``-Omega S^T Omega``."""
    S = np.asarray(S, dtype=float)
    om = symplectic_form(_modes(S.shape[0]))
    return -om @ S.T @ om


# ---------------------------------------------------------------------------
# Hamiltonians and unitaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """``H/(hbar omega) = r^T H r / 2 + linear^T r``.

    Attributes
    ----------
    H : ndarray
        Symmetric ``2n x 2n`` matrix.
    linear : ndarray
        Length ``2n`` drive; zero when absent.
    label : str
        Segment kind, one of :data:`SEGMENT_LABELS`.
    scale : float
        Frequency ratio of an IHO segment (``omega_I / omega``); only
        used by the closed forms of the plain QHO/IHO labels.
    """

    H: np.ndarray
    linear: np.ndarray | None = None
    label: str = "general"
    scale: float = 1.0

    def __post_init__(self):
        H = np.array(self.H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("H must be square")
        _modes(H.shape[0])
        if np.abs(H - H.T).max() > 1e-12 * max(1.0, np.abs(H).max()):
            raise ValueError("H must be symmetric")
        lin = np.zeros(H.shape[0]) if self.linear is None else as_phase_vector(self.linear)
        if lin.size != H.shape[0]:
            raise ValueError("linear term dimension mismatch")
        if self.label not in SEGMENT_LABELS:
            raise ValueError(f"unknown segment label {self.label!r}")
        if self.label in ("QHO", "IHO", "QHO+force", "IHO+force") and H.shape[0] == 2:
            sign = np.sign(H[0, 0])
            want = 1.0 if self.label.startswith("QHO") else -1.0
            if sign != want:
                raise ValueError(f"label {self.label} inconsistent with H[0,0]={H[0, 0]}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "linear", lin)

    @property
    def n(self) -> int:
        return self.H.shape[0] // 2

    @classmethod
    def qho(cls, force: float = 0.0):
        """``(p^2 + x^2)/2 - force * x``."""
        return cls(np.eye(2), [-force, 0.0], "QHO+force" if force else "QHO")

    @classmethod
    def iho(cls, force: float = 0.0, scale: float = 1.0):
        """``(p^2 - scale^2 x^2)/2 - force * x``."""
        return cls(np.diag([-scale * scale, 1.0]), [-force, 0.0], "IHO+force" if force else "IHO", scale)

    def equilibrium(self) -> np.ndarray:
        """Fixed point ``r~ = -H^{-1} rbar``."""
        return -np.linalg.solve(self.H, self.linear)


@dataclass(frozen=True)
class GaussianUnitary:
    """Normal form ``U = D(displacement) V(symplectic)`` up to a phase.

    ``symplectic`` is the forward moment map ``M`` and ``displacement`` the
    mean shift it is followed by: the unitary sends ``r -> M r + c``.
    ``phase`` is ``None`` when untracked.  ``defect`` optionally carries an
    accurately computed ``M + 1`` for near-identity closures, which the
    qubit-density routines prefer over forming ``M + 1`` in floating point.
    """

    displacement: np.ndarray
    symplectic: np.ndarray
    phase: float | None = None
    defect: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        c = as_phase_vector(self.displacement)
        M = np.asarray(self.symplectic, dtype=float)
        if M.shape != (c.size, c.size):
            raise ValueError("displacement and symplectic dimensions differ")
        object.__setattr__(self, "displacement", c)
        object.__setattr__(self, "symplectic", M)
        if self.defect is not None:
            object.__setattr__(self, "defect", np.asarray(self.defect, dtype=float))

    @property
    def n(self) -> int:
        return self.displacement.size // 2

    @classmethod
    def identity(cls, n: int = 1):
        return cls(np.zeros(2 * n), np.eye(2 * n), 0.0)

    @property
    def propagator(self) -> np.ndarray:
        """``S = M^{-1}``, the matrix that maps final moments back."""
        return symplectic_inverse(self.symplectic)

    def closure_defect(self) -> np.ndarray:
        """``M + 1``, exact when a defect was supplied."""
        if self.defect is not None:
            return self.defect
        return self.symplectic + np.eye(self.symplectic.shape[0])

    def propagator_defect(self) -> np.ndarray:
        """``S + 1 = -Omega (M + 1)^T Omega``."""
        om = symplectic_form(self.n)
        return -om @ self.closure_defect().T @ om

    def apply(self, r, sigma=None):
        r = as_phase_vector(r, self.n)
        r_new = self.symplectic @ r + self.displacement
        if sigma is None:
            return r_new
        return r_new, self.symplectic @ np.asarray(sigma, dtype=float) @ self.symplectic.T


# ---------------------------------------------------------------------------
# segments and exponentials
# ---------------------------------------------------------------------------


def _check_time(t):
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"duration must be finite and non-negative, got {t}")
    return t


def symplectic_segment(kind: str, t: float, scale: float = 1.0) -> np.ndarray:
    """Propagator-form matrix ``S`` of a QHO or IHO segment.

    Parameters
    ----------
    kind : {"QHO", "IHO"}
    t : float
        Dimensionless duration, ``t >= 0``.
    scale : float, optional
        IHO frequency ratio ``omega_I/omega``.

    Returns
    -------
    ndarray
        ``[[cos t, -sin t], [sin t, cos t]]`` for the QHO and
        ``[[cosh t, -sinh t], [-sinh t, cosh t]]`` for the IHO.

    Examples
    --------
    >>> symplectic_segment("QHO", np.pi / 2).round(12)
    array([[ 0., -1.],
           [ 1.,  0.]])
    """
    t = _check_time(t)
    if kind == QHO:
        c, s = np.cos(t), np.sin(t)
        return np.array([[c, -s], [s, c]])
    if kind == IHO:
        k = float(scale)
        c, s = np.cosh(k * t), np.sinh(k * t)
        return np.array([[c, -s / k], [-k * s, c]])
    raise ValueError(f"unknown segment kind {kind!r}")


def forward_segment(kind: str, t: float, scale: float = 1.0) -> np.ndarray:
    """Forward moment map of a QHO or IHO segment (inverse of the above)."""
    return symplectic_inverse(symplectic_segment(kind, t, scale))


def compose(transforms: Sequence[np.ndarray]) -> np.ndarray:
    """Product of time-ordered maps, first element applied first.

    ``compose([A, B, C]) = C @ B @ A``; an empty list gives the identity
    of dimension 2.
    """
    transforms = [np.asarray(S, dtype=float) for S in transforms]
    if not transforms:
        return np.eye(2)
    dim = transforms[0].shape
    out = np.eye(dim[0])
    for S in transforms:
        if S.shape != dim:
            raise ValueError("dimension mismatch in compose")
        out = S @ out
    return out


def _closed_form_ok(ham: QuadraticHamiltonian) -> bool:
    if ham.n != 1 or ham.label not in ("QHO", "IHO", "QHO+force", "IHO+force"):
        return False
    want = np.eye(2) if ham.label.startswith("QHO") else np.diag([-ham.scale**2, 1.0])
    return bool(np.array_equal(ham.H, want))


def matrix_exp_symplectic(ham: QuadraticHamiltonian, t: float, forward: bool = False) -> np.ndarray:
    """Symplectic matrix generated by ``ham`` over time ``t``.

    Returns the propagator form ``exp(-t Omega H)``, which coincides with
    :func:`symplectic_segment` for the labelled 1-mode kinds; pass
    ``forward=True`` for the moment map ``exp(t Omega H)``.  Labelled
    1-mode QHO/IHO generators use closed forms; everything else goes
    through scipy's scaling-and-squaring Pade exponential.
    """
    if not isinstance(ham, QuadraticHamiltonian):
        ham = QuadraticHamiltonian(ham)
    t = float(t)
    if _closed_form_ok(ham) and t >= 0:
        kind = QHO if ham.label.startswith("QHO") else IHO
        S = symplectic_segment(kind, t, ham.scale)
        return symplectic_inverse(S) if forward else S
    om = symplectic_form(ham.n)
    sign = 1.0 if forward else -1.0
    return expm(sign * t * (om @ ham.H))


def affine_flow(ham: QuadraticHamiltonian, t: float):
    """Forward map and mean shift ``(M, c)`` of ``ham`` over ``t``.

    Uses the augmented ``(2n+1)``-dimensional exponential so singular
    quadratic parts (free particles) are handled as well.
    """
    dim = ham.H.shape[0]
    om = symplectic_form(ham.n)
    gen = np.zeros((dim + 1, dim + 1))
    gen[:dim, :dim] = om @ ham.H
    gen[:dim, dim] = om @ ham.linear
    big = expm(float(t) * gen)
    M = big[:dim, :dim]
    if _closed_form_ok(ham) and t >= 0:
        M = matrix_exp_symplectic(ham, t, forward=True)
    return M, big[:dim, dim].copy()


def segment_unitary(ham: QuadraticHamiltonian, t: float) -> GaussianUnitary:
    """Normal form of ``exp(-i H t)``; the overall phase is not tracked."""
    M, c = affine_flow(ham, t)
    return GaussianUnitary(c, M, None)


def evolve_gaussian(r, sigma, S):
    """Apply a forward map: ``r' = S r``, ``sigma' = S sigma S^T``.

    The caller supplies the map that acts on moments.  For the propagator
    form returned by :func:`symplectic_segment` pass its inverse, or pass
    it directly when the propagator is what is meant.
    """
    S = np.asarray(S, dtype=float)
    r = as_phase_vector(r)
    sigma = np.asarray(sigma, dtype=float)
    if S.shape != (r.size, r.size) or sigma.shape != S.shape:
        raise ValueError("dimension mismatch in evolve_gaussian")
    return S @ r, S @ sigma @ S.T


def displacement_compose(r1, r2):
    """``D(r1) D(r2) = D(r1 + r2) exp(i phase)`` with ``phase = -r1^T Omega r2 / 2``."""
    r1 = as_phase_vector(r1)
    r2 = as_phase_vector(r2)
    if r1.size != r2.size:
        raise ValueError("dimension mismatch in displacement_compose")
    om = symplectic_form(r1.size // 2)
    return r1 + r2, float(-0.5 * r1 @ om @ r2)


def gaussian_unitary_compose(segments: Sequence[GaussianUnitary]) -> GaussianUnitary:
    """Normal form of a time-ordered product (first segment acts first).

    Moving each symplectic part through the displacements that follow it
    (``V D(c) = D(M c) V``) gives ``c_tot = sum_i M_{>i} c_i``; the phases
    of the merged displacements are added when every segment phase is
    tracked and dropped otherwise.
    """
    segments = list(segments)
    if not segments:
        return GaussianUnitary.identity(1)
    dim = segments[0].displacement.size
    c = np.zeros(dim)
    M = np.eye(dim)
    phase: float | None = 0.0
    for u in segments:
        if u.displacement.size != dim:
            raise ValueError("dimension mismatch in gaussian_unitary_compose")
        moved = u.symplectic @ c
        c, dphi = displacement_compose(u.displacement, moved)
        M = u.symplectic @ M
        if phase is not None and u.phase is not None:
            phase = phase + u.phase + dphi
        else:
            phase = None
    return GaussianUnitary(c, M, phase)


# ---------------------------------------------------------------------------
# characteristic / Wigner functions and moments
# ---------------------------------------------------------------------------


def characteristic_fn(r, sigma, rbar) -> complex:
    """``exp(-rbar^T Omega^T sigma Omega rbar / 4 + i rbar^T Omega^T r)``."""
    r = as_phase_vector(r)
    rbar = as_phase_vector(rbar, r.size // 2)
    om = symplectic_form(r.size // 2)
    w = om @ rbar
    sigma = np.asarray(sigma, dtype=float)
    return complex(np.exp(-0.25 * w @ sigma @ w + 1j * (w @ r)))


def wigner_fn(r, sigma, rbar, prefactor: str = "normalized"):
    """Gaussian Wigner function, vectorised over the trailing points.

    Parameters
    ----------
    r, sigma : array_like
        Moments of the state.
    rbar : array_like
        A point (length ``2n``) or an array of shape ``(..., 2n)``.
    prefactor : {"normalized", "printed"}
        ``"normalized"`` gives ``exp(-q)/(pi^n sqrt(det sigma))``, which
        integrates to one.  ``"printed"`` uses ``2^n/pi^n`` instead, a
        prefactor that integrates to ``2^n`` with this quadratic form.
    """
    r = as_phase_vector(r)
    n = r.size // 2
    sigma = np.asarray(sigma, dtype=float)
    det = np.linalg.det(sigma)
    if not det > 0:
        raise ValueError("covariance is singular")
    pts = np.asarray(rbar, dtype=float)
    d = pts - r
    q = np.einsum("...i,ij,...j->...", d, np.linalg.inv(sigma), d)
    if prefactor == "normalized":
        norm = 1.0 / (np.pi**n * np.sqrt(det))
    elif prefactor == "printed":
        norm = 2.0**n / (np.pi**n * np.sqrt(det))
    else:
        raise ValueError(f"unknown prefactor {prefactor!r}")
    return norm * np.exp(-q)


def cat_wigner(r_plus, sigma_plus, r_minus, sigma_minus, rbar, prefactor="normalized"):
    """Equal-weight branch mixture ``(W_+ + W_-)/2`` of the motional state."""
    return 0.5 * (
        wigner_fn(r_plus, sigma_plus, rbar, prefactor) + wigner_fn(r_minus, sigma_minus, rbar, prefactor)
    )


def higher_moments(r, sigma) -> dict:
    """Symmetrised third and fourth moments of a 1-mode Gaussian.

    The values are the derivatives of the characteristic function, i.e.
    Weyl-ordered moments, written with the covariance entries
    ``sxx = sigma[0, 0]``, ``spp = sigma[1, 1]``, ``sxp = sigma[0, 1]``:

    * ``x3 = x^3 + 3/2 sxx x``
    * ``x4 = x^4 + 3 sxx x^2 + 3/4 sxx^2``
    * ``p4 = p^4 + 3 spp p^2 + 3/4 spp^2``
    * ``x2p2 = (spp + 2 p^2)(sxx/2 + x^2) + sxp^2 + 4 sxp x p``

    ``x2p2`` is the Weyl value of ``x^2 p^2 + p^2 x^2``; the plain operator
    expectation is smaller by one (``[x, p] = i``).
    """
    r = as_phase_vector(r, 1)
    sigma = np.asarray(sigma, dtype=float)
    x, p = r
    sxx, sxp, spp = sigma[0, 0], sigma[0, 1], sigma[1, 1]
    return {
        "x3": x**3 + 1.5 * sxx * x,
        "x4": x**4 + 3.0 * sxx * x * x + 0.75 * sxx * sxx,
        "p4": p**4 + 3.0 * spp * p * p + 0.75 * spp * spp,
        "x2p2": (spp + 2.0 * p * p) * (0.5 * sxx + x * x) + sxp * sxp + 4.0 * sxp * x * p,
    }


# ---------------------------------------------------------------------------
# fine-step oracle
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Moments sampled on the fine-step grid."""

    t: np.ndarray
    r: np.ndarray
    sigma: np.ndarray

    @property
    def final(self):
        return self.r[-1], self.sigma[-1]


def evolve_numeric_oracle(schedule, r0, sigma0, steps: int) -> Trajectory:
    """Fine-step evolution of Gaussian moments.

    Parameters
    ----------
    schedule : list of (QuadraticHamiltonian or callable, duration)
        Piecewise schedule.  A callable ``h(s)`` returns the Hamiltonian at
        local time ``s`` within its piece; it is sampled at step midpoints,
        which is second-order accurate.
    r0, sigma0 : array_like
        Initial moments.
    steps : int
        Steps per piece (``>= 1``).

    Notes
    -----
    Constant pieces use the exact affine step map, so the result is exact
    up to rounding for piecewise-constant schedules.  The step loop runs
    in :func:`catlift.kernels.propagate_affine`.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    r = as_phase_vector(r0)
    s = np.asarray(sigma0, dtype=float)
    ts, rs, ss = [np.zeros(1)], [r[None, :]], [s[None, :, :]]
    t_now = 0.0
    for ham, duration in schedule:
        duration = _check_time(duration)
        h = duration / steps
        grid = t_now + h * np.arange(1, steps + 1)
        if callable(ham) and not isinstance(ham, QuadraticHamiltonian):
            r_seg = np.empty((steps, r.size))
            s_seg = np.empty((steps, r.size, r.size))
            for k in range(steps):
                M, c = affine_flow(ham((k + 0.5) * h), h)
                r = M @ r + c
                s = M @ s @ M.T
                r_seg[k], s_seg[k] = r, s
        else:
            M, c = affine_flow(ham, h)
            r_all, s_all = kernels.propagate_affine(M, c, steps, r, s)
            r_seg, s_seg = r_all[1:], s_all[1:]
            r, s = r_seg[-1].copy(), s_seg[-1].copy()
        ts.append(grid)
        rs.append(r_seg)
        ss.append(s_seg)
        t_now += duration
    return Trajectory(np.concatenate(ts), np.concatenate(rs), np.concatenate(ss))


def oracle_unitary(schedule: Sequence[tuple[QuadraticHamiltonian, float]], steps: int) -> GaussianUnitary:
    """Forward map and shift of a schedule obtained by fine stepping.

    Runs the oracle on the origin (giving the shift) and on each basis
    vector (giving the columns of the linear map).
    """
    dim = schedule[0][0].H.shape[0]
    zero = np.zeros(dim)
    c = evolve_numeric_oracle(schedule, zero, np.eye(dim), steps).r[-1]
    cols = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        cols.append(evolve_numeric_oracle(schedule, e, np.eye(dim), steps).r[-1] - c)
    return GaussianUnitary(c, np.column_stack(cols), None)



def branch_density_matrix(branches, unitary: GaussianUnitary) -> np.ndarray:
    """Qubit-register density matrix after tracing out the motion.

    Branch ``a`` starts in the vacuum, is shifted by ``a``, evolves under
    ``unitary`` and is shifted by ``a`` again (the recombination pulse).
    With ``S = M^{-1}``, ``delta = a - b`` and ``c`` the displacement::

        rho_ab = exp[-|(S + 1) delta|^2 / 4
                     + i ((a + b)^T Omega (S + 1) delta / 2 - delta^T Omega c)] / K

    where ``K`` is the number of branches.  Only ``S + 1`` enters, so an
    accurate closure defect on ``unitary`` carries straight through.

    Parameters
    ----------
    branches : (K, 2n) array_like
        Branch displacement vectors, in register order.
    unitary : GaussianUnitary

    Returns
    -------
    (K, K) complex ndarray
    """
    A = np.atleast_2d(np.asarray(branches, dtype=float))
    if A.shape[1] != unitary.displacement.size:
        raise ValueError("branch vectors do not match the unitary dimension")
    om = symplectic_form(unitary.n)
    sp = unitary.propagator_defect()
    delta = A[:, None, :] - A[None, :, :]
    summ = A[:, None, :] + A[None, :, :]
    sd = delta @ sp.T
    mag = -0.25 * np.sum(sd * sd, axis=-1)
    ph = 0.5 * np.einsum("abi,ij,abj->ab", summ, om, sd) - delta @ (om @ unitary.displacement)
    return np.exp(mag + 1j * ph) / A.shape[0]
