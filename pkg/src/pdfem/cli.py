"""Command-line entry point: ``pdfem {run,calibrate,cfl,converge}``.

Exit codes: 0 success, 2 configuration error, 3 numerical blow-up, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from pdfem import simulate
from pdfem.config import ConfigError, load_config
from pdfem.fem import lumped_nodal_mass
from pdfem.integrate import BlowUpError
from pdfem.material import MaterialError
from pdfem.mesh import MeshError

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("pdfem")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdfem", description="Nonlocal finite element fracture simulations.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("run", "run the time loop and write energies and snapshots"),
                        ("calibrate", "print calibrated material constants as JSON"),
                        ("cfl", "print the CFL report as JSON"),
                        ("converge", "run the mesh study and write the rate table")]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="configuration file")
        s.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="kernel threads")
        s.add_argument("--output", help="output directory (overrides output.directory)")
        s.add_argument("--linearized", action="store_true", help="use the linearized force")
        s.add_argument("--seed", type=int, default=0, help="seed for randomized start vectors")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _run(args, cfg) -> int:
    out = args.output or cfg.output.directory
    res = simulate.run_simulation(cfg, args.workers, out, linearized=args.linearized)
    last = res.energies[-1][2]
    print(json.dumps({"output": str(out), "dt": res.dt, "dt_max": res.cfl.dt_max, "steps": res.energies[-1][0],
                      "total_energy": last.total, "crack_length": last.crack_length}))
    return EXIT_OK


def _calibrate(args, cfg) -> int:
    print(json.dumps(simulate.calibration(cfg)))
    return EXIT_OK


def _cfl(args, cfg) -> int:
    ctx = simulate.build_context(cfg, args.workers)
    mass = lumped_nodal_mass(ctx.mesh, ctx.material.density)
    rep = simulate.cfl_report(ctx, mass, cfg.discretization.cfl_iterations, check_min=True, seed=args.seed)
    print(json.dumps(rep.to_json()))
    return EXIT_OK


def _converge(args, cfg) -> int:
    out = args.output or cfg.output.directory
    res = simulate.convergence_study(cfg, args.workers, out)
    for row in res.rows:
        print(f"t={row[0]:.6g} alpha={row[1]:.4f}")
    return EXIT_OK


COMMANDS = {"run": _run, "calibrate": _calibrate, "cfl": _cfl, "converge": _converge}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, MaterialError, MeshError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
