"""Hot numerical kernels with a compiled and a vectorised implementation.

Three loops dominate the run time of the package:

* the closure defect ``M_tot + 1`` of the four-segment expansion protocol,
  evaluated for perturbed curvatures (gravity) or perturbed durations
  (switching-time jitter);
* the Monte-Carlo average of the Humpty-Dumpty visibility;
* the fine-step affine propagation used as a validation oracle.

Each has a numba version (``*_nb``) and a NumPy version (``*_np``).  The
public names pick one according to :data:`catlift._accel.USE_NUMBA`.

Closure defect
--------------
Segment ``i`` has forward moment map ``B_i + E_i`` where ``B_i`` is the
unperturbed map (QHO for pi/2, IHO for ``t``) and ``E_i`` the deviation.
Because ``B_4 B_3 B_2 B_1 = -1`` exactly, the defect equals the sum over
the 15 non-empty subsets of factors taken from ``E`` instead of ``B``.
The ``E_i`` are evaluated with cancellation-free difference formulas, so
the defect keeps full relative precision even when it is twenty orders
of magnitude below the entries of ``M_tot``.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

HALF_PI = 0.5 * np.pi


def _qho_deviation(da, eps):
    # forward map for H = diag(1 + da, 1) over (pi/2)(1 + eps), minus Omega
    w = np.sqrt(1.0 + da)
    wm1 = da / (1.0 + w)
    dth = HALF_PI * (wm1 * (1.0 + eps) + eps)
    s2 = np.sin(0.5 * dth) ** 2
    e11 = -np.sin(dth)
    e12 = -(wm1 + 2.0 * s2) / w
    e21 = 2.0 * w * s2 - wm1
    return e11, e12, e21, e11


def _iho_deviation(da, eps, t):
    # forward map for H = diag(-1 + da, 1) over t (1 + eps), minus the t-map
    k = np.sqrt(1.0 - da)
    km1 = -da / (1.0 + k)
    dph = t * (km1 * (1.0 + eps) + eps)
    mid = t + 0.5 * dph
    sh_half = np.sinh(0.5 * dph)
    e11 = 2.0 * np.sinh(mid) * sh_half
    ch = 2.0 * np.cosh(mid) * sh_half
    sht = np.sinh(t)
    e12 = ch / k - sht * km1 / k
    e21 = k * ch + km1 * sht
    return e11, e12, e21, e11


def reference_maps(t):
    """Unperturbed forward maps ``(B_1, B_2, B_3, B_4)`` of the protocol."""
    c, s = np.cosh(t), np.sinh(t)
    q = np.array([[0.0, 1.0], [-1.0, 0.0]])
    h = np.array([[c, s], [s, c]])
    return q, h, q.copy(), h.copy()


# ---------------------------------------------------------------------------
# NumPy implementations
# ---------------------------------------------------------------------------


def closure_defect_np(da, eps, t):
    """Vectorised closure defect.

    Parameters
    ----------
    da : (n, 4) array
        Curvature offsets of the four segments (``a = +-1 + da``).
    eps : (n, 4) array
        Relative duration errors of the four segments.
    t : float
        Nominal IHO duration.

    Returns
    -------
    (n, 2, 2) ndarray
        ``M_tot + 1`` for each row, with ``M_tot`` the forward moment map.
    """
    da = np.atleast_2d(np.asarray(da, dtype=float))
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    n = da.shape[0]
    B = reference_maps(t)
    E = []
    for i in range(4):
        if i % 2 == 0:
            parts = _qho_deviation(da[:, i], eps[:, i])
        else:
            parts = _iho_deviation(da[:, i], eps[:, i], t)
        e = np.empty((n, 2, 2))
        e[:, 0, 0], e[:, 0, 1], e[:, 1, 0], e[:, 1, 1] = parts
        E.append(e)
    out = np.zeros((n, 2, 2))
    for mask in range(1, 16):
        prod = None
        for i in range(4):
            f = E[i] if (mask >> i) & 1 else B[i]
            prod = f if prod is None else np.matmul(f, prod)
        out += np.broadcast_to(prod, out.shape)
    return out


def _humpty_eps4(eps3):
    eps3 = np.atleast_2d(np.asarray(eps3, dtype=float))
    eps4 = np.zeros((eps3.shape[0], 4))
    eps4[:, 0] = eps3[:, 0]
    eps4[:, 2] = eps3[:, 1]
    eps4[:, 3] = eps3[:, 2]
    return eps4


def humpty_draws_np(eps3, dx, t):
    """Per-draw visibility ``exp(-|(S + 1) r0|^2)`` for switching errors.

    ``eps3`` holds ``(eps1, eps3, eps24)`` per row; the second segment is
    exact after the rescaling of ``t``.
    """
    eps4 = _humpty_eps4(eps3)
    d = closure_defect_np(np.zeros_like(eps4), eps4, t)
    return np.exp(-(dx * dx) * (d[:, 1, 1] ** 2 + d[:, 1, 0] ** 2))


def humpty_sums_np(eps3, dx, t):
    v = humpty_draws_np(eps3, dx, t)
    return float(np.sum(v)), float(np.sum(v * v))


def propagate_affine_np(M, c, steps, r0, s0):
    """Iterate ``r -> M r + c`` and ``s -> M s M^T``; returns every step."""
    n = r0.shape[0]
    rs = np.empty((steps + 1, n))
    ss = np.empty((steps + 1, n, n))
    rs[0], ss[0] = r0, s0
    r, s = r0.copy(), s0.copy()
    for k in range(steps):
        r = M @ r + c
        s = M @ s @ M.T
        rs[k + 1], ss[k + 1] = r, s
    return rs, ss


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------


_qho_nb = njit(cache=True, nogil=True)(_qho_deviation)
_iho_nb = njit(cache=True, nogil=True)(_iho_deviation)


@njit(cache=True, nogil=True)
def _defect_one_nb(da, eps, t, Bs, out):
    # matrices are held as flat (a, b, c, d) rows to keep everything in registers
    F = np.empty((2, 4, 4))
    for i in range(4):
        if i % 2 == 0:
            e11, e12, e21, e22 = _qho_nb(da[i], eps[i])
        else:
            e11, e12, e21, e22 = _iho_nb(da[i], eps[i], t)
        F[1, i, 0] = e11
        F[1, i, 1] = e12
        F[1, i, 2] = e21
        F[1, i, 3] = e22
        F[0, i, 0] = Bs[i, 0, 0]
        F[0, i, 1] = Bs[i, 0, 1]
        F[0, i, 2] = Bs[i, 1, 0]
        F[0, i, 3] = Bs[i, 1, 1]
    s11 = 0.0
    s12 = 0.0
    s21 = 0.0
    s22 = 0.0
    for mask in range(1, 16):
        w = mask & 1
        p11 = F[w, 0, 0]
        p12 = F[w, 0, 1]
        p21 = F[w, 0, 2]
        p22 = F[w, 0, 3]
        for i in range(1, 4):
            w = (mask >> i) & 1
            a = F[w, i, 0]
            b = F[w, i, 1]
            c = F[w, i, 2]
            d = F[w, i, 3]
            q11 = a * p11 + b * p21
            q12 = a * p12 + b * p22
            q21 = c * p11 + d * p21
            q22 = c * p12 + d * p22
            p11 = q11
            p12 = q12
            p21 = q21
            p22 = q22
        s11 += p11
        s12 += p12
        s21 += p21
        s22 += p22
    out[0, 0] = s11
    out[0, 1] = s12
    out[1, 0] = s21
    out[1, 1] = s22


@njit(cache=True, nogil=True)
def _defect_batch_nb(da, eps, t, Bs):
    n = da.shape[0]
    out = np.empty((n, 2, 2))
    tmp = np.empty((2, 2))
    for j in range(n):
        _defect_one_nb(da[j], eps[j], t, Bs, tmp)
        out[j] = tmp
    return out


@njit(cache=True, nogil=True)
def _humpty_draws_nb(eps3, dx, t, Bs):
    n = eps3.shape[0]
    da = np.zeros(4)
    e4 = np.zeros(4)
    tmp = np.empty((2, 2))
    out = np.empty(n)
    for j in range(n):
        e4[0] = eps3[j, 0]
        e4[2] = eps3[j, 1]
        e4[3] = eps3[j, 2]
        _defect_one_nb(da, e4, t, Bs, tmp)
        out[j] = np.exp(-(dx * dx) * (tmp[1, 1] ** 2 + tmp[1, 0] ** 2))
    return out


@njit(cache=True, nogil=True)
def _humpty_sums_nb(eps3, dx, t, Bs):
    v = _humpty_draws_nb(eps3, dx, t, Bs)
    s1 = 0.0
    s2 = 0.0
    for j in range(v.shape[0]):
        s1 += v[j]
        s2 += v[j] * v[j]
    return s1, s2


@njit(cache=True, nogil=True)
def propagate_affine_nb(M, c, steps, r0, s0):
    n = r0.shape[0]
    rs = np.empty((steps + 1, n))
    ss = np.empty((steps + 1, n, n))
    rs[0] = r0
    ss[0] = s0
    r = r0.copy()
    s = s0.copy()
    Mt = M.T.copy()
    for k in range(steps):
        r = M @ r + c
        s = M @ s @ Mt
        rs[k + 1] = r
        ss[k + 1] = s
    return rs, ss


def _stack_refs(t):
    return np.ascontiguousarray(np.stack(reference_maps(t)))


def closure_defect_nb(da, eps, t):
    da = np.ascontiguousarray(np.atleast_2d(np.asarray(da, dtype=float)))
    eps = np.ascontiguousarray(np.atleast_2d(np.asarray(eps, dtype=float)))
    return _defect_batch_nb(da, eps, float(t), _stack_refs(t))


def humpty_draws_nb(eps3, dx, t):
    eps3 = np.ascontiguousarray(np.atleast_2d(np.asarray(eps3, dtype=float)))
    return _humpty_draws_nb(eps3, float(dx), float(t), _stack_refs(t))


def humpty_sums_nb(eps3, dx, t):
    eps3 = np.ascontiguousarray(np.atleast_2d(np.asarray(eps3, dtype=float)))
    s1, s2 = _humpty_sums_nb(eps3, float(dx), float(t), _stack_refs(t))
    return float(s1), float(s2)


def _propagate_nb_wrapper(M, c, steps, r0, s0):
    return propagate_affine_nb(
        np.ascontiguousarray(M, dtype=float),
        np.ascontiguousarray(c, dtype=float),
        int(steps),
        np.ascontiguousarray(r0, dtype=float),
        np.ascontiguousarray(s0, dtype=float),
    )


if USE_NUMBA:
    closure_defect = closure_defect_nb
    humpty_draws = humpty_draws_nb
    humpty_sums = humpty_sums_nb
    propagate_affine = _propagate_nb_wrapper
    BACKEND = "numba"
else:
    closure_defect = closure_defect_np
    humpty_draws = humpty_draws_np
    humpty_sums = humpty_sums_np
    propagate_affine = propagate_affine_np
    BACKEND = "numpy"
