"""Acceptance criteria, one test per criterion.

Each test appends a single ``PASS``/``FAIL`` line (shown in the terminal
summary and on stdout with ``-s``) and then asserts, so a failing
criterion is reported as a failing test with its diagnostics.
"""

import math
from fractions import Fraction
import time
import warnings

import numpy as np
import pytest

from catlift import decoherence, gie, kernels, robustness
from catlift.gie import GravCouplings
from catlift.interferometer import (
    HBAR,
    TrapSetup,
    close_interferometer,
    force_phase,
    force_phase_report,
    ideal_protocol_unitary,
    max_superposition,
    optimal_time_force,
)
from catlift.phase_space import characteristic_fn, higher_moments, symplectic_form

# published comparison table, per set-up
SETUPS = [
    dict(M=1e-15, w=10.0, x0=7.3e-11, init=7.3e-9, gG=2.1e-14, T=1.1, dX=1.2e7, dXm=9.5e-4, P=3.2e-13,
         sf=5.6e-31, dt=2.4e-13, se=1.8e-13, R=4.1e-7),
    dict(M=1e-14, w=100.0, x0=7.3e-12, init=7.3e-10, gG=2.1e-15, T=0.12, dX=4.1e7, dXm=3.0e-4, P=7.5e-15,
         sf=1.7e-29, dt=2.4e-15, se=1.8e-15, R=8.8e-7),
    dict(M=1e-13, w=1000.0, x0=7.3e-13, init=7.3e-11, gG=2.1e-16, T=0.014, dX=1.3e8, dXm=9.4e-5, P=1.7e-16,
         sf=5.6e-28, dt=2.4e-17, se=1.8e-17, R=1.8e-6),
]  # fmt: skip


def report(log, n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    log.append(line)
    print(line)


def test_criterion_1_protocol_closure(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_M = worst_rho = 0.0
    for _ in range(200):
        dx = rng.uniform(0, 1e3)
        t = rng.uniform(0, 5 * math.pi)
        u = ideal_protocol_unitary(t)
        worst_M = max(worst_M, np.abs(u.closure_defect()).max())
        rho = close_interferometer([dx, 0.0], u).matrix
        worst_rho = max(worst_rho, np.abs(rho - 0.5).max())
    dt = time.perf_counter() - t0
    ok = worst_M <= 1e-10 and worst_rho <= 1e-10 and dt < 1.0
    report(acceptance_log, 1, ok, f"max|S_tot+1|={worst_M:.1e}, max|rho-|+><+||={worst_rho:.1e}, {dt:.2f}s")
    assert ok


def test_criterion_2_table(acceptance_log):
    t0 = time.perf_counter()
    fails, implied = [], []
    for i, row in enumerate(SETUPS, 1):
        s = TrapSetup.from_density(row["M"], row["w"], 100.0, 3.5e3, distance=40e-6)
        c = gie.grav_couplings(s)
        T, _ = gie.optimal_time_gie(s, couplings=c)
        t_tot_s = (3 * math.pi + 2 * T) / s.omega
        big, big_m = max_superposition(100.0, T, s.x0)
        checks = {
            "x0": (s.x0, row["x0"]),
            "initial": (s.x0 * s.delta_x, row["init"]),
            "g_G": (c.g, row["gG"]),
            "dX": (big, row["dX"]),
            "x0*dX": (big_m, row["dXm"]),
            "dt": (robustness.sudden_bound(100.0, T, s.omega), row["dt"]),
            "sigma_eps": (robustness.sigma_eps_bound(100.0, T, s.omega), row["se"]),
            "sigma_f": (decoherence.force_noise_bound(s, T), row["sf"]),
        }
        for name, (got, want) in checks.items():
            if abs(got / want - 1) > 0.05:
                fails.append(f"set-up {i} {name} {got:.3g} vs {want:.3g}")
        p = decoherence.pressure_bound(s.radius, t_tot_s)
        if not row["P"] / 10 <= p <= row["P"] * 10:
            fails.append(f"set-up {i} P {p:.3g} vs {row['P']:.3g}")
        wT, want_wT = T, row["T"] * row["w"]
        if abs(wT / want_wT - 1) > 0.15 or not 3 * math.pi <= wT <= 5 * math.pi:
            fails.append(f"set-up {i} wT_o {wT:.3f} vs {want_wT:.3g}")
        # diagnostic only: expansion time implied by the tabulated sigma_eps bound
        implied.append(-0.5 * math.log(row["se"] * s.omega * 100 * math.sqrt(math.pi * (math.pi - 1)) / 4) - T)
    dt = time.perf_counter() - t0
    ok = not fails and dt < 300
    detail = f"{len(fails)} of 30 checks off ({'; '.join(fails)}); " if fails else "all 30 checks within tolerance; "
    detail += f"tabulated t-dependent rows imply t_o larger by {', '.join(f'{d:+.3f}' for d in implied)}; {dt:.1f}s"
    report(acceptance_log, 2, ok, detail)
    assert ok, detail


def test_criterion_3_force_phase(acceptance_log):
    rng = np.random.default_rng(3)
    s = TrapSetup(1e-14, 100.0, 10.0)
    worst = {"closed_form": 0.0, "composed": 0.0}
    printed_ok = 0
    for _ in range(50):
        g = rng.uniform(1e-6, 1e-3)
        t = rng.uniform(0, 4 * math.pi)
        f = g * HBAR * s.omega / s.x0
        rep = force_phase_report(f, s, t, steps=10_000)
        for k in worst:
            worst[k] = max(worst[k], abs(getattr(rep, k) / rep.oracle - 1))
        printed_ok += "displacement_printed" in rep.verdict
    phis = []
    for arg in np.logspace(-8, -2, 13):
        f = arg * HBAR * s.omega / (4 * s.x0 * s.delta_x)
        phis.append(force_phase(f, s, optimal_time_force(f, s)))
    ok = max(worst.values()) <= 1e-6 and 0.5 <= min(phis) and max(phis) <= 1.0
    report(
        acceptance_log, 3, ok,
        f"closed form rel.err {worst['closed_form']:.1e}, composed {worst['composed']:.1e} vs 1e4-step oracle; "
        f"alternative printed displacement agrees in {printed_ok}/50; phi_f(T_o^f) in [{min(phis):.4f}, {max(phis):.4f}]",
    )  # fmt: skip
    assert ok


def test_criterion_4_gie_pipeline(acceptance_log):
    t0 = time.perf_counter()
    lam0 = min(gie.lambda_pt(GravCouplings(0.0, 1e-4), 100.0, t) for t in np.linspace(0, 8 * math.pi, 41))
    bell_rho = 0.5 * np.array([[1, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 1]], dtype=complex)
    bell = gie.ppt_negativity(bell_rho)[0]
    n_ok = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for M in np.logspace(-16, -12, 10):
            for w in np.logspace(1, 3, 10):
                for dx in np.logspace(0, 3, 10):
                    s = TrapSetup(M, w, dx, distance=40e-6)
                    c = gie.grav_couplings(s)
                    for t in (2 * math.pi, 4 * math.pi):
                        gie.gie_state(c, dx, t)  # validates Hermitian / trace / PSD
                    n_ok += 1
    # mass independence with dx ~ M^{-1/2}
    curves, t_opts = [], []
    ts = np.linspace(0.0, 11.0, 111)
    for M in (1e-15, 1e-14, 1e-13):
        s = TrapSetup(M, 100.0, 100.0 * math.sqrt(1e-14 / M), distance=40e-6)
        c = gie.grav_couplings(s)
        curves.append(gie.lambda_curve(c, s.delta_x, ts))
        t_opts.append(gie.optimal_time_gie(s, couplings=c)[0])
    below = ts < min(t_opts)
    dev = np.max([np.abs(curves[i] - curves[0]) for i in (1, 2)], axis=0)
    spread = dev[below].max()
    # the curvature shift 2 g_G grows like g_G e^{2t}, so scaling holds only to leading order
    t_ok = ts[below][dev[below] <= 1e-6].max()
    dt = time.perf_counter() - t0
    ok = lam0 >= -1e-12 and bell == -0.5 and n_ok == 1000 and spread <= 1e-6 and dt < 600
    report(
        acceptance_log, 4, ok,
        f"min lambda(g=0)={lam0:.1e}, Bell={bell}, {n_ok}/1000 grid states valid, "
        f"mass-scaled curves differ by {spread:.1e} for t < {min(t_opts):.2f} (within 1e-6 up to t = {t_ok:.1f}), {dt:.1f}s",
    )  # fmt: skip
    assert ok


def test_criterion_5_dephasing(acceptance_log):
    s = TrapSetup(1e-14, 100.0, 100.0, distance=40e-6)
    c = gie.grav_couplings(s)
    rng = np.random.default_rng(5)
    worst_w = 0.0
    for _ in range(100):
        res = gie.gie_result(c, 100.0, rng.uniform(6, 14), rng.uniform(0, 0.05) * s.omega, s.omega)
        worst_w = max(worst_w, abs(np.trace(res.witness @ res.rho.matrix).real - res.lam))
    ratios = [0.0, 1e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1]
    mono = True
    for t in np.linspace(6, 14, 17):
        lams = [gie.lambda_pt(c, 100.0, t, r * s.omega, s.omega) for r in ratios]
        mono &= bool(np.all(np.diff(lams) >= -1e-14))
    T0, _ = gie.optimal_time_gie(s, couplings=c)
    lam_dec = gie.lambda_pt(c, 100.0, T0, 1e-2 * s.omega, s.omega)
    shift = 0.0
    for r in (1e-3, 1e-2):
        Tq, _ = gie.optimal_time_gie(s, couplings=c, gamma_q=r * s.omega)
        shift = max(shift, abs(Tq - T0))
    ok = worst_w <= 1e-12 and mono and lam_dec < 0 and shift < gie.MAX_GRID_STEP
    report(
        acceptance_log, 5, ok,
        f"|Tr(W rho)-lambda|<={worst_w:.1e}, monotone={mono}, lambda(T_o, Gq/w=1e-2)={lam_dec:.4f}, "
        f"T_o shift {shift:.2e} (grid step {gie.MAX_GRID_STEP:.4f})",
    )  # fmt: skip
    assert ok


def test_criterion_6_position_noise(acceptance_log):
    worst = 0.0
    for dx, t in ((100.0, 4 * math.pi), (10.0, 1.0), (1000.0, 5 * math.pi)):
        base = decoherence.decohered_qubit_density(dx, t, 0.0).matrix
        for g in (0.1, 1.0):
            worst = max(worst, np.abs(decoherence.decohered_qubit_density(dx, t, g).matrix - base).max())
    g = 0.7
    dplus_exact = np.array_equal(decoherence.diffusion_integral_qho(g), g / 4 * np.array([[math.pi, 2.0], [2.0, math.pi]]))
    dplus_err = np.abs(decoherence.diffusion_integral_qho(g) - g / 4 * np.array([[math.pi, 2.0], [2.0, math.pi]])).max()
    dd = decoherence.DriftDiffusion.position_noise("IHO", 1.0)
    worst_q = 0.0
    for t in np.linspace(0.1, 4 * math.pi, 12):
        ref = decoherence.diffusion_integral_quad(dd.A, dd.D, t, tol=1e-12)
        got = decoherence.diffusion_integral_iho(1.0, t)
        worst_q = max(worst_q, np.abs(got / ref - 1).max())
    ok = worst <= 1e-12 and dplus_err == 0.0 and worst_q <= 1e-9
    report(
        acceptance_log, 6, ok,
        f"qubit state change {worst:.1e}, D_t+ exact={dplus_exact} (err {dplus_err:.1e}), "
        f"D_t- vs quadrature rel.err {worst_q:.1e}",
    )  # fmt: skip
    assert ok


def test_criterion_7_humpty_dumpty(acceptance_log):
    t0 = time.perf_counter()
    worst_z = 0.0
    for dx in (10.0, 30.0, 100.0, 300.0, 1000.0):
        for t in np.linspace(0.5 * math.pi, 3 * math.pi, 5):
            for s in (1e-6, 1e-5, 1e-4):
                v, se = robustness.humpty_visibility_mc(dx, t, s, 100_000, seed=7)
                va = robustness.humpty_visibility_analytic(dx, t, s)
                z = abs(v - va) / se if se > 0 else (0.0 if v == va else math.inf)
                worst_z = max(worst_z, z)
    v_bound = min(
        robustness.humpty_visibility_mc(dx, t, robustness.sigma_eps_bound(dx, t), 100_000, seed=1)[0]
        for dx, t in ((100.0, 4 * math.pi), (10.0, 2 * math.pi), (1000.0, 3 * math.pi))
    )
    a = robustness.humpty_visibility_mc(100.0, 2 * math.pi, 1e-5, 100_000, seed=99)
    b = robustness.humpty_visibility_mc(100.0, 2 * math.pi, 1e-5, 100_000, seed=99)
    dt = time.perf_counter() - t0
    ok = worst_z <= 3 and v_bound >= 0.3 and a == b and dt < 120
    report(
        acceptance_log, 7, ok,
        f"MC vs analytic worst |z|={worst_z:.2f} over 75 points, visibility at bound >= {v_bound:.3f}, "
        f"reproducible={a == b}, {dt:.1f}s ({kernels.BACKEND})",
    )  # fmt: skip
    assert ok


# O(h^4) central stencils, exact rationals (float weights would reintroduce roundoff)
F = Fraction
D4 = (F(-1, 6), 2, F(-13, 2), F(28, 3), F(-13, 2), 2, F(-1, 6))
D3 = (F(1, 8), -1, F(13, 8), 0, F(-13, 8), 1, F(-1, 8))
D2 = (F(-1, 12), F(4, 3), F(-5, 2), F(4, 3), F(-1, 12))


def test_criterion_8_moments(acceptance_log):
    """Finite differences of chi at step 1e-3.

    A fourth difference at h = 1e-3 amplifies double rounding by 1/h^4, a
    floor near 1e-4, so chi is evaluated in 40-digit arithmetic from the
    same closed form; its agreement with ``characteristic_fn`` is checked
    at every stencil point.
    """
    mpmath = pytest.importorskip("mpmath")
    mp = mpmath.mp
    mp.dps = 40
    rng = np.random.default_rng(8)
    om = symplectic_form(1)
    h = mpmath.mpf("1e-3")

    def mpq(c):
        c = F(c)
        return mpmath.mpf(c.numerator) / c.denominator

    worst = worst_chi = 0.0
    for _ in range(100):
        r = rng.uniform(-1.5, 1.5, 2)
        z, th = rng.uniform(-0.5, 0.5), rng.uniform(0, math.pi)
        R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        S = R @ np.diag([math.exp(z), math.exp(-z)])
        sig = S @ S.T
        rm = [mpmath.mpf(v) for v in r]
        sm = [[mpmath.mpf(v) for v in row] for row in sig]

        def chi(i, j):
            # w = Omega rbar = (i h, j h)
            wx, wp = i * h, j * h
            q = sm[0][0] * wx**2 + 2 * sm[0][1] * wx * wp + sm[1][1] * wp**2
            val = mpmath.exp(-q / 4 + 1j * (wx * rm[0] + wp * rm[1]))
            ref = characteristic_fn(r, sig, -om @ np.array([float(wx), float(wp)]))
            nonlocal_err[0] = max(nonlocal_err[0], abs(complex(val) - ref))
            return val

        nonlocal_err = [0.0]
        d4x = sum(c * chi(k, 0) for k, c in zip(range(-3, 4), map(mpq, D4))) / h**4
        d4p = sum(c * chi(0, k) for k, c in zip(range(-3, 4), map(mpq, D4))) / h**4
        d3x = sum(c * chi(k, 0) for k, c in zip(range(-3, 4), map(mpq, D3))) / h**3
        d22 = sum(a * b * chi(i, j) for i, a in zip(range(-2, 3), map(mpq, D2)) for j, b in zip(range(-2, 3), map(mpq, D2))) / h**4
        worst_chi = max(worst_chi, nonlocal_err[0])
        m = higher_moments(r, sig)
        refs = {"x3": float(mpmath.re(1j * d3x)), "x4": float(mpmath.re(d4x)), "p4": float(mpmath.re(d4p)),
                "x2p2": 2 * float(mpmath.re(d22))}  # fmt: skip
        for key, ref in refs.items():
            worst = max(worst, abs(m[key] - ref) / max(1.0, abs(ref)))
    vac = higher_moments([0.0, 0.0], np.eye(2))["x4"]
    ok = worst <= 1e-5 and worst_chi <= 1e-14 and abs(vac - 0.75) <= 1e-10
    report(
        acceptance_log, 8, ok,
        f"step-1e-3 chi derivatives rel.err {worst:.1e} (chi mirror vs characteristic_fn {worst_chi:.1e}), "
        f"vacuum <x^4>={vac}",
    )  # fmt: skip
    assert ok
