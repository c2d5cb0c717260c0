"""Command-line front end.

Subcommands::

    fdwlan solve     one configuration, per-annulus table plus summary
    fdwlan sweep     S_FD, S_HD and gain over a range of n, M or d
    fdwlan simulate  Monte Carlo estimates next to the analytical values
    fdwlan figures   canned sweeps for the p_h / tau / p / throughput curves

All output is CSV, numbers with 9 significant digits, rates in Mb/s.  The
first line of every file is a ``# schema: ...`` comment naming the layout.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig
from .geometry import GeometryConfig, annulus_layout, hidden_counts, hidden_prob
from .model import Regime, SolverError
from .simulator import SimConfig, estimate, realized_hidden_counts, trace_replication
from .throughput import AnalysisOptions, analyze

log = logging.getLogger("fdwlan")

SOLVE_SCHEMA = "fdwlan.solve/1"
SOLVE_COLUMNS = ["regime", "row", "i", "d_i", "n_i", "h_i", "tau", "p",
                 "P_t", "P_s", "P_s_hd", "P_s_fd", "S_Mbps", "gain", "iterations"]
SWEEP_SCHEMA = "fdwlan.sweep/1"
SWEEP_COLUMNS = ["variable", "value", "n", "M", "p_h_max", "S_FD_Mbps", "S_HD_Mbps", "gain", "status"]
SIM_SCHEMA = "fdwlan.simulate/1"
SIM_COLUMNS = ["regime", "quantity", "node", "analytical", "empirical", "ci95", "rel_error"]
TRAJ_SCHEMA = "fdwlan.trajectory/1"

EXIT_CONFIG = 2
EXIT_SOLVER = 3


def fmt(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return f"{value:.9g}"


class Table:
    def __init__(self, schema, columns):
        self.schema = schema
        self.columns = columns
        self.rows = []

    def add(self, **values):
        unknown = set(values) - set(self.columns)
        if unknown:
            raise KeyError(f"unknown columns {sorted(unknown)}")
        self.rows.append([fmt(values.get(c)) for c in self.columns])

    def render(self):
        buf = io.StringIO()
        buf.write(f"# schema: {self.schema}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def write_output(text, path):
    """Write atomically so a failed run never leaves a partial file."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fdwlan-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _regimes(name):
    return {"fd": [Regime.FD], "hd": [Regime.HD], "both": [Regime.FD, Regime.HD]}[name]


def solve_table(cfg: RunConfig) -> Table:
    table = Table(SOLVE_SCHEMA, SOLVE_COLUMNS)
    layout = annulus_layout(cfg.geometry)
    reports = {reg: analyze(cfg.geometry, cfg.mac_phy, reg, cfg.analysis)
               for reg in _regimes(cfg.regime)}
    gain = None
    if len(reports) == 2:
        gain = reports[Regime.FD].S / reports[Regime.HD].S
    hidden = hidden_counts(cfg.geometry, cfg.analysis.h_normalization)
    for reg, rep in reports.items():
        sol = rep.solution
        for i in range(layout.M):
            table.add(regime=reg.value, row="annulus", i=i + 1, d_i=layout.distances[i],
                      n_i=layout.node_counts[i], h_i=hidden.h[i],
                      tau=sol.tau_sta[i], p=sol.p_sta[i])
        table.add(regime=reg.value, row="ap", tau=sol.tau_ap, p=sol.p_ap)
        table.add(regime=reg.value, row="summary", P_t=rep.P_t, P_s=rep.P_s,
                  P_s_hd=rep.P_s_hd_part, P_s_fd=rep.P_s_fd_part, S_Mbps=rep.S / 1e6,
                  gain=gain, iterations=sol.iterations)
    return table


def _point_config(cfg, variable, value):
    g = cfg.geometry
    if variable == "n":
        return GeometryConfig(r=g.r, M=g.M, n=int(value))
    if variable == "M":
        return GeometryConfig(r=g.r, M=int(value), n=g.n)
    return g


def sweep_table(cfg: RunConfig) -> Table:
    table = Table(SWEEP_SCHEMA, SWEEP_COLUMNS)
    variable = cfg.sweep.variable
    if not cfg.sweep.values:
        raise ConfigError("sweep needs at least one value")
    for value in cfg.sweep.values:
        if variable == "d":
            g = cfg.geometry
            try:
                ph = hidden_prob(g.r, float(value))
            except ValueError as exc:
                table.add(variable=variable, value=value, n=g.n, M=g.M, status=f"error: {exc}")
                continue
            table.add(variable=variable, value=value, n=g.n, M=g.M, p_h_max=ph, status="geometry")
            continue
        try:
            g = _point_config(cfg, variable, value)
        except ValueError as exc:
            table.add(variable=variable, value=value, status=f"error: {exc}")
            continue
        ph = hidden_prob(g.r, annulus_layout(g).distances[-1])
        row = dict(variable=variable, value=value, n=g.n, M=g.M, p_h_max=ph)
        try:
            s = {}
            for reg in _regimes(cfg.regime):
                s[reg] = analyze(g, cfg.mac_phy, reg, cfg.analysis).S
        except SolverError as exc:
            log.warning("sweep point %s=%s failed: %s", variable, value, exc)
            table.add(**row, status="no-convergence")
            continue
        gain = s[Regime.FD] / s[Regime.HD] if len(s) == 2 else None
        table.add(**row, S_FD_Mbps=s[Regime.FD] / 1e6 if Regime.FD in s else None,
                  S_HD_Mbps=s[Regime.HD] / 1e6 if Regime.HD in s else None,
                  gain=gain, status="ok")
    return table


def _sim_config(cfg: RunConfig, regime) -> SimConfig:
    s = cfg.sim
    return SimConfig(geometry=cfg.geometry, mac_phy=cfg.mac_phy, regime=regime,
                     horizon=s.horizon, seed=s.seed, topology_mode=s.topology_mode,
                     rho_source=cfg.analysis.rho_source, rho=cfg.analysis.rho,
                     payload_mode=cfg.analysis.payload_mode, n_batches=s.n_batches)


def _mean_realized(runs, geometry):
    counts = [realized_hidden_counts(r.topology, geometry) for r in runs]
    first = counts[0]
    return dataclasses.replace(
        first,
        h=np.mean([c.h for c in counts], axis=0),
        h_cond=np.mean([c.h_cond for c in counts], axis=0),
        p_h=np.mean([c.p_h for c in counts], axis=0),
        p_cond=np.mean([c.p_cond for c in counts], axis=0),
    )


def _rel(a, e):
    if a is None or not np.isfinite(e) or a == 0:
        return None
    return (e - a) / a


def simulate_table(cfg: RunConfig, *, kernel=None, workers=None) -> Table:
    table = Table(SIM_SCHEMA, SIM_COLUMNS)
    for reg in _regimes(cfg.regime):
        sim = estimate(_sim_config(cfg, reg), cfg.sim.replications, kernel=kernel, workers=workers)
        hidden = _mean_realized(sim.runs, cfg.geometry) if cfg.sim.comparator == "realized" else None
        rep = analyze(cfg.geometry, cfg.mac_phy, reg, cfg.analysis, hidden=hidden)
        sol = rep.solution

        def row(quantity, node, a, e, ci):
            table.add(regime=reg.value, quantity=quantity, node=node, analytical=a,
                      empirical=e, ci95=ci, rel_error=_rel(a, e))

        row("tau", "ap", sol.tau_ap, sim.tau_ap_hat, sim.ci95["tau_ap"])
        row("p", "ap", sol.p_ap, sim.p_ap_hat, sim.ci95["p_ap"])
        for i in range(cfg.geometry.M):
            row("tau", f"annulus{i + 1}", sol.tau_sta[i], sim.tau_hat_annulus[i], sim.ci95["tau_sta"][i])
            row("p", f"annulus{i + 1}", sol.p_sta[i], sim.p_hat_annulus[i], sim.ci95["p_sta"][i])
        row("S_Mbps", "bss", rep.S / 1e6, sim.S_hat / 1e6, sim.ci95["S"] / 1e6)
        c = sim.counters
        for name in ("idle", "success_hd", "success_sfd", "success_afd", "collisions"):
            row(f"count_{name}", "bss", None, getattr(c, name), None)
        if sim.warning:
            log.warning("%s: %s", reg.value, sim.warning)
    return table


FIGURES = ("fig4", "fig5", "fig6", "fig7")


def figure_tables(cfg: RunConfig, which=FIGURES):
    """Canned sweeps: p_h at the outermost annulus vs M, tau and p vs n, throughput vs n."""
    out = {}
    if "fig4" in which:
        fig4 = cfg.replace(sweep=cfgmod.SweepSpec("M", tuple(range(1, 51))), regime="fd")
        table = Table("fdwlan.fig4/1", ["M", "d_M", "p_h_max"])
        g = fig4.geometry
        for M in fig4.sweep.values:
            d = annulus_layout(GeometryConfig(r=g.r, M=M, n=g.n)).distances[-1]
            table.add(M=M, d_M=d / g.r, p_h_max=hidden_prob(g.r, d))
        out["fig4"] = table
    ns = tuple(range(5, 51, 5))
    M = 5
    if "fig5" in which or "fig6" in which:
        sols = {n: analyze(GeometryConfig(r=cfg.geometry.r, M=M, n=n), cfg.mac_phy, Regime.FD,
                           cfg.analysis).solution for n in ns}
        for name, attr_ap, attr_sta in (("fig5", "tau_ap", "tau_sta"), ("fig6", "p_ap", "p_sta")):
            if name not in which:
                continue
            cols = ["n", "ap"] + [f"annulus{i}" for i in range(1, M + 1)]
            table = Table(f"fdwlan.{name}/1", cols)
            for n, sol in sols.items():
                values = dict(zip(cols[2:], getattr(sol, attr_sta)))
                table.add(n=n, ap=getattr(sol, attr_ap), **values)
            out[name] = table
    if "fig7" in which:
        fig7 = cfg.replace(geometry=GeometryConfig(r=cfg.geometry.r, M=M, n=cfg.geometry.n),
                           sweep=cfgmod.SweepSpec("n", ns), regime="both")
        out["fig7"] = sweep_table(fig7)
    return out


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI configuration (defaults: shipped profile)")
    common.add_argument("--regime", choices=cfgmod.REGIMES)
    common.add_argument("--out", metavar="PATH", help="output file ('-' for stdout)")
    common.add_argument("--seed", type=int)
    common.add_argument("--replications", type=int)
    common.add_argument("--h-normalization", choices=("literal", "rescaled"))
    common.add_argument("--payload-mode", choices=("mpdu", "payload"))
    common.add_argument("--rho-source", choices=("slot", "delay"))
    common.add_argument("--ap-weighting", choices=("literal", "per-station"))
    common.add_argument("-n", "--stations", type=int, dest="n", help="number of STAs")
    common.add_argument("-M", "--annuli", type=int, dest="M", help="number of annuli")
    common.add_argument("--dump-config", metavar="PATH", help="also write the effective config")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fdwlan", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve one configuration")
    sw = sub.add_parser("sweep", parents=[common], help="sweep n, M or d")
    sw.add_argument("--variable", choices=cfgmod.SWEEP_VARIABLES)
    sw.add_argument("--values", help="start:stop[:step] or comma list")
    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo vs analytical")
    sim.add_argument("--horizon", type=int)
    sim.add_argument("--topology", choices=("sampled", "annulus-pinned"))
    sim.add_argument("--comparator", choices=("geometric", "realized"))
    sim.add_argument("--kernel", choices=("compiled", "python"))
    sim.add_argument("--workers", type=int)
    sim.add_argument("--trace", metavar="PATH", help="per-slot trace of the first replication")
    fig = sub.add_parser("figures", parents=[common], help="canned figure sweeps (writes a directory)")
    fig.add_argument("--which", choices=FIGURES, action="append")
    return parser


def effective_config(args) -> RunConfig:
    cfg = cfgmod.default_profile()
    if args.config:
        cfg = cfgmod.load(args.config, cfg)
    g, a, s = cfg.geometry, cfg.analysis, cfg.sim
    try:
        g = GeometryConfig(r=g.r, M=args.M if args.M is not None else g.M,
                           n=args.n if args.n is not None else g.n)
        a = AnalysisOptions(
            payload_mode=args.payload_mode or a.payload_mode,
            rho_source=args.rho_source or a.rho_source,
            h_normalization=args.h_normalization or a.h_normalization,
            ap_weighting=args.ap_weighting or a.ap_weighting,
            rho=a.rho,
        )
        sim_changes = {}
        if args.seed is not None:
            sim_changes["seed"] = args.seed
        if args.replications is not None:
            sim_changes["replications"] = args.replications
        for attr, key in (("horizon", "horizon"), ("topology", "topology_mode"),
                          ("comparator", "comparator")):
            if getattr(args, attr, None) is not None:
                sim_changes[key] = getattr(args, attr)
        s = dataclasses.replace(s, **sim_changes)
        sweep = cfg.sweep
        if getattr(args, "variable", None) or getattr(args, "values", None):
            sweep = cfgmod.SweepSpec(args.variable or sweep.variable,
                                     cfgmod.parse_values(args.values) if args.values else sweep.values)
        return cfg.replace(geometry=g, analysis=a, sim=s, sweep=sweep,
                           regime=args.regime or cfg.regime, out=args.out or cfg.out)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = effective_config(args)
    except ConfigError as exc:
        print(f"fdwlan: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dump_config:
        write_output(cfgmod.dumps(cfg), args.dump_config)
    try:
        if args.command == "solve":
            write_output(solve_table(cfg).render(), cfg.out)
        elif args.command == "sweep":
            write_output(sweep_table(cfg).render(), cfg.out)
        elif args.command == "simulate":
            if args.trace:
                trace_replication(_sim_config(cfg, _regimes(cfg.regime)[0]), 0, args.trace)
            write_output(simulate_table(cfg, kernel=args.kernel, workers=args.workers).render(),
                         cfg.out)
        elif args.command == "figures":
            outdir = cfg.out or "figures"
            which = tuple(args.which or FIGURES)
            tables = figure_tables(cfg, which)
            os.makedirs(outdir, exist_ok=True)
            for name, table in tables.items():
                write_output(table.render(), os.path.join(outdir, f"{name}.csv"))
    except SolverError as exc:
        last = exc.last
        print(f"fdwlan: solver failed: {exc}; last iterate tau_ap={last.tau_ap:.6g} "
              f"p_ap={last.p_ap:.6g}", file=sys.stderr)
        return EXIT_SOLVER
    except ConfigError as exc:
        print(f"fdwlan: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
