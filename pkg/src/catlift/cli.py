"""Command-line front end.

``catlift <command> --config FILE [--out PATH] [--format csv|json] [--seed N]``

Every command writes one table with a fixed column order.  CSV files have a
single header row; JSON files hold ``{"command", "schema_version",
"columns", "rows"}`` with one object per row.  Floats are written with
``repr`` so that output is bit-stable.  Files are written to a temporary
sibling and renamed, so a failed run never leaves a partial file behind.

Exit codes: 0 success, 1 computation error, 2 invalid usage or config,
3 output could not be written.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import decoherence, gie, robustness
from .config import SCHEMA_VERSION, ConfigError, ScenarioConfig, SetupConfig, load_config
from .interferometer import (
    ProtocolSchedule,
    create_cat,
    force_displacement,
    force_coupling,
    force_phase,
    max_superposition,
    optimal_time_force,
    phase_from_displacement,
    protocol_trajectory,
)

COMMANDS = ("table", "trajectory", "wigner", "force", "gie", "robustness")
PAULI_LABELS = "IXYZ"

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class Table:
    def __init__(self, columns):
        self.columns = list(columns)
        self.rows: list[list] = []

    def add(self, **values):
        missing = set(self.columns) ^ set(values)
        if missing:
            raise KeyError(f"row columns differ from header: {sorted(missing)}")
        self.rows.append([values[c] for c in self.columns])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def _jsonable(v):
    if isinstance(v, np.floating):
        v = float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def render(table: Table, fmt: str, command: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()
    doc = {
        "command": command,
        "schema_version": SCHEMA_VERSION,
        "columns": table.columns,
        "rows": [{c: _jsonable(v) for c, v in zip(table.columns, row)} for row in table.rows],
    }
    return json.dumps(doc, indent=1) + "\n"


def write_atomic(path: Path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent if str(path.parent) else ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _t_grid(cfg: ScenarioConfig) -> np.ndarray:
    g = cfg.grid
    return np.linspace(g.t_start, g.t_stop, g.t_points)


def _expansion_time(cfg: ScenarioConfig, sc: SetupConfig) -> float:
    if cfg.protocol.t_minus is not None:
        return cfg.protocol.t_minus
    setup = sc.to_setup()
    if setup.distance is None:
        raise ConfigError(f"setup {sc.name!r}: protocol.t_minus is unset and distance_m is missing")
    return gie.optimal_time_gie(setup)[0]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_table(cfg: ScenarioConfig) -> Table:
    """One row per set-up with the derived comparison quantities."""
    cols = [
        "name", "mass_kg", "omega_rad_s", "delta_x", "radius_m", "x0_m", "initial_superposition_m",
        "g_G", "f_G", "t_opt_G", "t_opt_G_s", "lambda_pt_opt", "t_tot", "t_tot_s", "frequency_hz",
        "max_superposition", "max_superposition_m", "decoherence_rate_hz", "pressure_bound_pa",
        "pressure_bound_consistent_pa", "sigma_f_bound_n", "sudden_dt_s", "sigma_eps_bound", "sigma_eps_bound_s",
    ]  # fmt: skip
    out = Table(cols)
    for sc in cfg.setup:
        s = sc.to_setup()
        if s.distance is None:
            raise ConfigError(f"setup {sc.name!r}: the table needs distance_m")
        c = gie.grav_couplings(s)
        t_opt, lam = gie.optimal_time_gie(s, couplings=c)
        t_tot = 3.0 * math.pi + 2.0 * t_opt
        t_tot_s = t_tot / s.omega
        big, big_m = max_superposition(s.delta_x, t_opt, s.x0)
        if s.radius is not None:
            p_pr = decoherence.pressure_bound(s.radius, t_tot_s, cfg.noise.gas.temperature_k, cfg.noise.gas.m_air_kg)
            p_co = decoherence.pressure_bound(
                s.radius, t_tot_s, cfg.noise.gas.temperature_k, cfg.noise.gas.m_air_kg, form="consistent"
            )
        else:
            p_pr = p_co = None
        out.add(
            name=sc.name, mass_kg=s.mass, omega_rad_s=s.omega, delta_x=s.delta_x, radius_m=s.radius,
            x0_m=s.x0, initial_superposition_m=s.x0 * s.delta_x, g_G=c.g, f_G=c.f,
            t_opt_G=t_opt, t_opt_G_s=t_opt / s.omega, lambda_pt_opt=lam, t_tot=t_tot, t_tot_s=t_tot_s,
            frequency_hz=1.0 / t_tot_s, max_superposition=big, max_superposition_m=big_m,
            decoherence_rate_hz=1.0 / t_tot_s, pressure_bound_pa=p_pr, pressure_bound_consistent_pa=p_co,
            sigma_f_bound_n=decoherence.force_noise_bound(s, t_opt),
            sudden_dt_s=robustness.sudden_bound(s.delta_x, t_opt, s.omega),
            sigma_eps_bound=robustness.sigma_eps_bound(s.delta_x, t_opt),
            sigma_eps_bound_s=robustness.sigma_eps_bound(s.delta_x, t_opt, s.omega),
        )  # fmt: skip
    return out


def cmd_trajectory(cfg: ScenarioConfig) -> Table:
    sc = cfg.selected_setup()
    s = sc.to_setup()
    t_minus = _expansion_time(cfg, sc)
    cat = create_cat(s, cfg.protocol.t0)
    times = np.linspace(0.0, ProtocolSchedule.expansion(t_minus).duration, cfg.trajectory.points)
    cols = ["t", "t_s", "x_plus", "p_plus", "x_minus", "p_minus", "x_plus_m", "x_minus_m", "sigma_xx", "sigma_xp", "sigma_pp"]
    out = Table(cols)
    for st in protocol_trajectory(cat, t_minus, times):
        (xp, pp), (xm, pm) = st.means
        sg = st.covs[0]
        out.add(
            t=st.t, t_s=st.t / s.omega, x_plus=xp, p_plus=pp, x_minus=xm, p_minus=pm,
            x_plus_m=xp * s.x0, x_minus_m=xm * s.x0, sigma_xx=sg[0, 0], sigma_xp=sg[0, 1], sigma_pp=sg[1, 1],
        )  # fmt: skip
    return out


def cmd_wigner(cfg: ScenarioConfig) -> Table:
    sc = cfg.selected_setup()
    s = sc.to_setup()
    t_minus = _expansion_time(cfg, sc)
    w = cfg.wigner
    xs = np.linspace(w.x_min, w.x_max, w.points)
    ps = np.linspace(w.p_min, w.p_max, w.points)
    X, P = np.meshgrid(xs, ps, indexing="ij")
    pts = np.stack([X.ravel(), P.ravel()], axis=1)
    cat = create_cat(s, cfg.protocol.t0)
    out = Table(["t", "x", "p", "wigner"])
    for st in protocol_trajectory(cat, t_minus, sorted(w.times)):
        vals = st.wigner(pts, w.prefactor)
        for (x, p), v in zip(pts, vals):
            out.add(t=st.t, x=x, p=p, wigner=float(v))
    return out


def cmd_force(cfg: ScenarioConfig) -> Table:
    sc = cfg.selected_setup()
    s = sc.to_setup()
    f = cfg.force.force_n
    g = force_coupling(f, s)
    try:
        t_opt = optimal_time_force(f, s)
    except ValueError:
        t_opt = math.nan
    r0 = np.array([s.delta_x, 0.0])
    out = Table(["t_minus", "t_minus_s", "force_n", "g", "phi_f_rad", "phi_f_composed_rad", "t_opt_f", "t_opt_f_s"])
    for t in _t_grid(cfg):
        out.add(
            t_minus=t, t_minus_s=t / s.omega, force_n=f, g=g, phi_f_rad=force_phase(f, s, t),
            phi_f_composed_rad=phase_from_displacement(r0, force_displacement(g, t)),
            t_opt_f=t_opt, t_opt_f_s=t_opt / s.omega,
        )  # fmt: skip
    return out


def cmd_gie(cfg: ScenarioConfig) -> Table:
    sc = cfg.selected_setup()
    s = sc.to_setup()
    c = gie.grav_couplings(s)
    wit_cols = [f"witness_{a}{b}" for a in PAULI_LABELS for b in PAULI_LABELS]
    out = Table(["t_minus", "t_minus_s", "gamma_q_over_omega", "lambda_pt", *wit_cols])
    for ratio in cfg.gie.gamma_q_over_omega:
        for t in _t_grid(cfg):
            res = gie.gie_result(c, s.delta_x, t, ratio * s.omega, s.omega)
            coeffs = gie.pauli_decomposition(res.witness).ravel()
            out.add(
                t_minus=t, t_minus_s=t / s.omega, gamma_q_over_omega=ratio, lambda_pt=res.lam,
                **dict(zip(wit_cols, coeffs)),
            )  # fmt: skip
    return out


def cmd_robustness(cfg: ScenarioConfig) -> Table:
    sc = cfg.selected_setup()
    s = sc.to_setup()
    rb = cfg.robustness
    grid = _t_grid(cfg)
    seeds = np.random.SeedSequence(cfg.run.seed).generate_state(len(grid) * len(rb.sigma_eps), dtype=np.uint64)
    cols = [
        "t_minus", "t_minus_s", "sigma_eps", "visibility_analytic", "visibility_leading", "visibility_mc",
        "visibility_mc_se", "sudden_variance", "sudden_dt_s", "sigma_eps_bound", "sigma_eps_bound_s",
    ]  # fmt: skip
    out = Table(cols)
    k = 0
    for t in grid:
        for se in rb.sigma_eps:
            v_mc, v_se = robustness.humpty_visibility_mc(
                s.delta_x, t, se, cfg.run.samples, int(seeds[k]), method=rb.method
            )
            k += 1
            lead = robustness.humpty_visibility_analytic(s.delta_x, t, se, leading=True) if se > 0 and s.delta_x > 0 else 1.0
            out.add(
                t_minus=t, t_minus_s=t / s.omega, sigma_eps=se,
                visibility_analytic=robustness.humpty_visibility_analytic(s.delta_x, t, se),
                visibility_leading=lead, visibility_mc=v_mc, visibility_mc_se=v_se,
                sudden_variance=robustness.sudden_variance(s.delta_x, t, rb.f_avg),
                sudden_dt_s=robustness.sudden_bound(s.delta_x, t, s.omega),
                sigma_eps_bound=robustness.sigma_eps_bound(s.delta_x, t),
                sigma_eps_bound_s=robustness.sigma_eps_bound(s.delta_x, t, s.omega),
            )  # fmt: skip
    return out


HANDLERS = {
    "table": cmd_table,
    "trajectory": cmd_trajectory,
    "wigner": cmd_wigner,
    "force": cmd_force,
    "gie": cmd_gie,
    "robustness": cmd_robustness,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catlift", description="Expansion-protocol cat interferometry calculations.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML scenario file (schema_version = 1)")
    p.add_argument("--out", help="output file; defaults to run.out or standard output")
    p.add_argument("--format", choices=("csv", "json"), help="overrides run.format")
    p.add_argument("--seed", type=int, help="overrides run.seed (unsigned 64-bit)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = cfg.model_copy(update={"run": cfg.run.model_copy(update={"seed": args.seed})})
    except ConfigError as exc:
        print(f"catlift: {exc}", file=sys.stderr)
        return EXIT_USAGE
    fmt = args.format or cfg.run.format
    out = args.out or cfg.run.out
    try:
        table = HANDLERS[args.command](cfg)
        text = render(table, fmt, args.command)
    except ConfigError as exc:
        print(f"catlift: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"catlift: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    if out is None:
        sys.stdout.write(text)
        return EXIT_OK
    try:
        write_atomic(Path(out), text)
    except OSError as exc:
        print(f"catlift: cannot write {out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
