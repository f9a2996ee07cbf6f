"""Command-line front end.

Subcommands::

    varcoherence coherence   --scheme fd --dim 2 --n 8 --probes 10
    varcoherence convergence --scheme fd --case sin1d --n 16 --n 32 --n 64
    varcoherence greengauss  --scheme fv --mesh cart2d --n 3
    varcoherence solve       --scheme mfd --case sinsin2d --n 16 --out results/

Exit codes: 0 pass, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fd, fem, fv, mfd, studies
from .functional import ExtremalNotFound
from .linalg import SolverError
from .mesh import build_cartesian_grid, build_centered_mesh
from .problem import CASE_NAMES, LegendreError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULT_NS = {"coherence": [8], "convergence": [8, 16, 32], "greengauss": [5], "solve": [8]}


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    scheme: str
    case: str | None
    dim: int | None
    ns: tuple[int, ...]
    mode: str
    stencil: str
    probes: int
    seed: int
    tol: float | None
    mesh_kind: str | None
    mesh_file: str | None
    out: Path | None
    break_continuity: bool = False

    def __post_init__(self):
        if any(n < 1 for n in self.ns):
            raise UsageError("resolutions must be positive")
        if any(b <= a for a, b in zip(self.ns, self.ns[1:])):
            raise UsageError("the resolution list must be strictly increasing")
        if self.tol is not None and not self.tol > 0.0:
            raise UsageError("tolerance must be positive")
        if self.probes < 1:
            raise UsageError("at least one probe is needed")
        if self.mesh_file is not None and not Path(self.mesh_file).is_file():
            raise UsageError(f"mesh file {self.mesh_file!r} not found")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varcoherence", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scheme", required=True, choices=studies.SCHEMES)
    common.add_argument("--case", choices=CASE_NAMES, default=None, help="manufactured case")
    common.add_argument("--dim", type=int, choices=(1, 2, 3), default=None)
    common.add_argument("--n", type=int, action="append", default=None,
                        help="resolution (cells or grid intervals per direction); repeatable")
    common.add_argument("--mode", choices=mfd.MODES, default="rt0", help="mfd inner product")
    common.add_argument("--stencil", choices=fd.STENCILS, default="forward", help="fd stencil pair")
    common.add_argument("--probes", type=int, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--mesh", default=None,
                        help=f"named mesh ({', '.join(studies.MESH_KINDS)}) or a mesh file")
    common.add_argument("--out", type=Path, default=None, help="output directory")

    sub.add_parser("coherence", parents=[common], help="gradient vs mass-scaled residual at random states")
    sub.add_parser("convergence", parents=[common], help="error table against a manufactured solution")
    gg = sub.add_parser("greengauss", parents=[common], help="discrete Green-Gauss identity (fd, fv)")
    gg.add_argument("--break-continuity", action="store_true", help=argparse.SUPPRESS)
    sub.add_parser("solve", parents=[common], help="solve once and dump the discrete solution")
    return parser


def _config(args) -> RunConfig:
    mesh_kind = mesh_file = None
    if args.mesh is not None:
        if args.mesh in studies.MESH_KINDS:
            mesh_kind = args.mesh
        else:
            mesh_file = args.mesh
    probes = args.probes if args.probes is not None else (20 if args.command == "greengauss" else 10)
    ns = args.n or DEFAULT_NS[args.command]
    if args.command == "convergence" and args.scheme == "fd" and args.n is None:
        ns = [16, 32, 64]
    return RunConfig(
        command=args.command, scheme=args.scheme, case=args.case, dim=args.dim, ns=tuple(ns),
        mode=args.mode, stencil=args.stencil, probes=probes, seed=args.seed, tol=args.tol,
        mesh_kind=mesh_kind, mesh_file=mesh_file, out=args.out,
        break_continuity=getattr(args, "break_continuity", False),
    )


def _emit(text: str, cfg: RunConfig, filename: str) -> None:
    sys.stdout.write(text)
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / filename).write_text(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _dim(cfg: RunConfig, fallback: int) -> int:
    if cfg.dim is not None:
        return cfg.dim
    if cfg.case is not None:
        return studies.manufactured_case(cfg.case).d
    if cfg.mesh_kind is not None:
        return 1 if cfg.mesh_kind == "interval" else 2
    return fallback


def cmd_coherence(cfg: RunConfig) -> int:
    dim = _dim(cfg, 2)
    if dim == 3 and cfg.scheme != "fd":
        raise UsageError("only finite differences support d = 3")
    reports = studies.run_coherence(
        cfg.scheme, cfg.ns, dim=dim, case=cfg.case, mesh_kind=cfg.mesh_kind, mesh_file=cfg.mesh_file,
        mode=cfg.mode, stencil=cfg.stencil, probes=cfg.probes, seed=cfg.seed, tol=cfg.tol,
    )
    passed = all(r.passed for r in reports)
    _emit(_dump_json({"command": "coherence", "scheme": cfg.scheme, "seed": cfg.seed,
                      "reports": [r.to_dict() for r in reports], "pass": passed}), cfg, "coherence.json")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_convergence(cfg: RunConfig) -> int:
    if cfg.case is None:
        raise UsageError("convergence needs --case")
    if cfg.mesh_file is not None:
        raise UsageError("convergence runs on named mesh families, not on a single mesh file")
    rows = studies.convergence_study(cfg.scheme, cfg.case, cfg.ns, cfg.mesh_kind, cfg.mode, cfg.stencil)
    _emit(studies.convergence_csv(rows), cfg, "convergence.csv")
    return EXIT_OK


def cmd_greengauss(cfg: RunConfig) -> int:
    if cfg.scheme not in ("fd", "fv"):
        raise UsageError("the Green-Gauss suite covers the fd and fv schemes")
    if cfg.scheme == "fd":
        dims = (cfg.dim,) if cfg.dim is not None else (1, 2, 3)
    else:
        if cfg.dim == 3:
            raise UsageError("finite volumes support d = 1, 2")
        dims = (cfg.dim,) if cfg.dim is not None else ((_dim(cfg, 2),) if cfg.mesh_kind else (1, 2))
    results = studies.run_green_gauss(
        cfg.scheme, cfg.ns, dims=dims, mesh_kind=cfg.mesh_kind, mesh_file=cfg.mesh_file, stencil=cfg.stencil,
        probes=cfg.probes, seed=cfg.seed, tol=cfg.tol if cfg.tol is not None else 1e-12,
        break_continuity=cfg.break_continuity,
    )
    passed = all(r.passed for r in results)
    _emit(_dump_json({"command": "greengauss", "scheme": cfg.scheme, "seed": cfg.seed,
                      "results": [r.to_dict() for r in results], "pass": passed}), cfg, "greengauss.json")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_solve(cfg: RunConfig) -> int:
    """Solve on the finest requested resolution; dump CSVs to ``--out`` and print a summary."""
    n = cfg.ns[-1]
    dim = _dim(cfg, 2)
    L, mc = studies.default_problem(dim, cfg.case)
    summary = {"command": "solve", "scheme": cfg.scheme, "case": cfg.case or "poisson-f1", "n": n}
    out = cfg.out
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    if cfg.scheme == "fd":
        grid = build_cartesian_grid(dim, n)
        u = fd.fd_solve(L, grid, stencil=cfg.stencil)
        x, uh = grid.nodes(), u
        if out is not None:
            fd.write_nodal_csv(out / "solution.csv", grid, u)
    else:
        if cfg.mesh_file is not None:
            cm = studies.load_mesh(cfg.mesh_file)
            if cm.dim != dim:
                raise UsageError(f"mesh file is {cm.dim}-dimensional, the problem is {dim}-dimensional")
        else:
            kind = cfg.mesh_kind or studies.default_mesh_kind(cfg.scheme, dim, cfg.mode)
            cm = studies.named_mesh(kind, n)
            if cm.dim != dim:
                raise UsageError(f"mesh kind {kind!r} is not {dim}-dimensional")
        if cfg.scheme == "fem":
            base = cm.base if hasattr(cm, "base") else cm
            space = fem.build_p1_space(base, quad=3)
            uh = fem.fem_solve(L, space)
            x = space.nodes
            if out is not None:
                fem.write_p1_csv(out / "solution.csv", space, uh)
        else:
            cm = cm if hasattr(cm, "base") else build_centered_mesh(cm)
            x = cm.cell_centers
            if cfg.scheme == "fv":
                uh = fv.fv_solve(L.poisson.f, cm)
                if out is not None:
                    fv.write_cell_csv(out / "solution.csv", cm, uh)
            else:
                state = mfd.mfd_solve(cm, L.poisson.alpha, L.poisson.f, cfg.mode)
                uh = state.u
                if out is not None:
                    mfd.write_mixed_csv(out / "cells.csv", out / "faces.csv", state)
    summary["dofs"] = int(np.size(uh))
    summary["u_max"] = float(np.max(np.abs(uh)))
    if mc is not None:
        summary["err_max"] = float(np.max(np.abs(np.ravel(uh) - np.ravel(mc.u(x)))))
    sys.stdout.write(_dump_json(summary))
    return EXIT_OK


COMMANDS = {"coherence": cmd_coherence, "convergence": cmd_convergence,
            "greengauss": cmd_greengauss, "solve": cmd_solve}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[cfg.command](cfg)
    except (SolverError, ExtremalNotFound, LegendreError) as exc:
        print(f"varcoherence: numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"varcoherence: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
