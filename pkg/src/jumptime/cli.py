"""Command-line entry point: ``jumptime <subcommand> [--config FILE] [overrides]``.

Exit codes: 0 success, 1 acceptance/consistency/boundary failure, 2 config
error, 3 dark-contact domain error.  Every run writes ``manifest.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMAS, ConfigError, ExperimentConfig, LockError, RunManifest, output_lock
from .dissipators import DarkTrapped, DissipatorConfigError
from .models import DarkContactError, ModelValidationError, MomentumGrid, model_from_dict
from .topology import ConsistencyError
from .trajectories import RNG_NAME, SEAM_LIMIT, TrajectoryConfig, _wrap, ensemble_average

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DARK = 0, 1, 2, 3

SUBCOMMANDS = {
    "simulate": "trajectories",
    "jumptime-map": "jumptime-map",
    "walltime": "walltime",
    "topology": "topology",
    "steady-state": "steady-state",
    "fig2": "fig2",
    "verify": "verify",
}


class BoundaryViolation(RuntimeError):
    pass


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def _emit(manifest: RunManifest, out: Path, name: str, header, rows, schema: str) -> Path:
    path = out / name
    _write_csv(path, header, rows)
    manifest.add_file(path, SCHEMAS[schema])
    return path


def _coords(shape, origin) -> np.ndarray:
    n = shape[0]
    return origin[0] + _wrap(np.arange(n) - origin[0], n)


# -- subcommands -----------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> int:
    tc = TrajectoryConfig(cfg.build_model(), cfg.build_dissipator(), cfg.grid_shape(), cfg.cell(),
                          cfg.init_sublattice, cfg.n_max)
    acc = ensemble_average(tc, cfg.N, cfg.base_seed)
    manifest.rng = RNG_NAME
    manifest.dark_trapped = acc.trapped
    rows = [(v, obs, m, s, c) for _, v, obs, m, s, c in acc.rows()]
    _emit(manifest, out, "observables.csv", ["n", "observable", "mean", "std_err", "count"], rows, "observables")
    return _boundary(acc.seam_max, manifest)


def _boundary(seam: float, manifest: RunManifest) -> int:
    manifest.notes.append(f"max seam occupancy {seam:.3e} (limit {SEAM_LIMIT:g})")
    if seam >= SEAM_LIMIT:
        raise BoundaryViolation(f"seam occupancy {seam:.3e} exceeds {SEAM_LIMIT:g}; enlarge L")
    return EXIT_OK


def cmd_jumptime_map(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> int:
    from .propagators import DensityKernel, evolve_kernel, kernel_function
    from .reference import DenseDensityMatrix, jumptime_map, kernel_to_dense, localized_density
    model, dis = cfg.build_model(), cfg.build_dissipator()
    shape = cfg.grid_shape()
    rho = localized_density(shape, cfg.cell(), cfg.init_sublattice)
    kern = None
    try:
        kernel_function(model, dis)
        if model.dimension == 1 and cfg.init_sublattice == "A":
            kern = DensityKernel.localized(MomentumGrid(shape), cfg.cell())
    except ValueError:
        manifest.notes.append("no scalar kernel for this dissipator; dense map only")
    rows = []
    for n in range(cfg.n_max + 1):
        if n:
            res = jumptime_map(rho, model, dis, shape)
            rho = res.rho
            if kern is not None:
                kern = evolve_kernel(kern, model, dis, 1)
        dm = DenseDensityMatrix(rho, shape)
        diag = np.real(np.diag(rho)).reshape(-1, 2)
        diff = float(np.abs(rho - kernel_to_dense(kern.matrix, shape)).max()) if kern is not None else float("nan")
        rows.append((n, float(dm.position_mean(cfg.cell())[0]), float(diag[:, 0].sum()), float(diag[:, 1].sum()),
                     dm.trace, diff))
    _emit(manifest, out, "jumptime_map.csv", ["n", "x_mean", "popA", "popB", "trace", "kernel_max_diff"], rows,
          "jumptime_map")
    return EXIT_OK


def cmd_walltime(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> int:
    from .dissipators import total_rate
    from .reference import integrate_master, localized_density
    model, dis = cfg.build_model(), cfg.build_dissipator()
    times = cfg.times or [0.5, 1.0, 2.0, 3.0]
    shape = cfg.grid_shape()
    rows = []
    dim = 2 * int(np.prod(shape))
    if dim <= 128:
        states = integrate_master(localized_density(shape, cfg.cell(), cfg.init_sublattice), model, dis, times, shape)
        for t, st in zip(times, states):
            diag = np.real(np.diag(st.rho)).reshape(-1, 2)
            rows.append((float(t), "master", "x", float(st.position_mean(cfg.cell())[0]), 0.0, 0))
            rows.append((float(t), "master", "popA", float(diag[:, 0].sum()), 0.0, 0))
    else:
        manifest.notes.append(f"dense master equation skipped (dimension {dim} > 128)")
    g = total_rate(dis)
    tc = TrajectoryConfig(model, dis, shape, cfg.cell(), cfg.init_sublattice, times=tuple(g * t for t in times))
    manifest.rng = RNG_NAME
    acc = ensemble_average(tc, cfg.N, cfg.base_seed)
    manifest.dark_trapped = acc.trapped
    for (kind, idx, obs, m, s, c) in acc.rows(("x", "popA")):
        rows.append((float(times[idx]), "trajectories", obs, m, s, c))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    _emit(manifest, out, "walltime.csv", ["t", "source", "observable", "mean", "std_err", "count"], rows, "walltime")
    return _boundary(acc.seam_max, manifest)


def cmd_topology(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> int:
    from .topology import topology_report
    model, dis = cfg.build_model(), cfg.build_dissipator()
    sweep = cfg.sweep
    if not sweep:
        rep = topology_report(model, dis, with_chern=model.dimension == 2)
        path = out / "topology.json"
        path.write_text(rep.to_json() + "\n")
        manifest.add_file(path)
        manifest.convergence = [a.history for a in rep.axes]
        return EXIT_OK
    param, values = sweep.get("param"), sweep.get("values")
    if not param or not values:
        raise ConfigError("topology sweep needs 'param' and 'values'")
    rows = []
    for val in values:
        m = model_from_dict(dict(cfg.model, **{param: float(val)}))
        try:
            rep = topology_report(m, dis)
            for i, a in enumerate(rep.axes):
                rows.append((float(val), i + 1, a.W, a.T, a.R1, a.R2, a.defect))
        except DarkContactError:
            for i in range(m.dimension):
                rows.append((float(val), i + 1) + (float("nan"),) * 5)
    _emit(manifest, out, "phase_diagram.csv", [param, "axis", "W", "T", "R1", "R2", "defect"], rows, "phase_diagram")
    return EXIT_OK


def cmd_steady_state(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> int:
    from .steady import bloch_steady_state, crossover_rows
    from .dissipators import total_rate
    ratios = cfg.sweep.get("ratios", list(np.round(np.linspace(0.1, 2.0, 39), 6)))
    gammas = cfg.sweep.get("gammas", [total_rate(cfg.build_dissipator())])
    w = float(cfg.sweep.get("w", 1.0))
    rows = crossover_rows(ratios, gammas, w, jumptime=cfg.sweep.get("jumptime", True))
    _emit(manifest, out, "crossover.csv", ["v_over_w", "gamma", "J_ss", "a_times_T"], rows, "crossover")
    model = cfg.build_model()
    if model.dimension == 1:
        pts = MomentumGrid((cfg.N_p,)).flat_points
        r = bloch_steady_state(model, total_rate(cfg.build_dissipator()), pts).r
        path = out / "steady_bloch.csv"
        _write_csv(path, ["p", "rx", "ry", "rz"], [(float(p[0]), *map(float, v)) for p, v in zip(pts, r)])
        manifest.add_file(path)
    return EXIT_OK


FIG2_HIST_N = (0, 3)


def cmd_fig2(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> int:
    from .acceptance import fig2_ensembles
    ens = fig2_ensembles(cfg.N, cfg.n_max, cfg.L, cfg.base_seed)
    manifest.rng = RNG_NAME
    coords = _coords((cfg.L,), (0,))
    transport, hist, skew = [], [], []
    seam = 0.0
    for (phase, collapse), acc in ens.items():
        seam = max(seam, acc.seam_max)
        manifest.dark_trapped += acc.trapped
        step = 1.0 if phase == "topological" else 0.0
        for n in range(cfg.n_max + 1):
            lab = ("n", n)
            transport.append((phase, collapse, n, float(acc.mean(lab, "x")[0]), float(acc.stderr(lab, "x")[0]),
                              acc.count(lab), n * step))
            prob = np.real(acc.mean(lab, "pos_hist"))
            mu = float(prob @ coords)
            var = float(prob @ (coords - mu) ** 2)
            sk = float(prob @ (coords - mu) ** 3) / var ** 1.5 if var > 0 else 0.0
            skew.append((phase, collapse, n, mu, var, sk))
            if n in FIG2_HIST_N:
                order = np.argsort(coords)
                hist += [(phase, collapse, n, int(coords[j]), float(prob[j])) for j in order]
    _emit(manifest, out, "transport.csv", ["phase", "collapse", "n", "mean_x", "std_err", "count", "analytic"],
          transport, "transport")
    _emit(manifest, out, "histograms.csv", ["phase", "collapse", "n", "x", "probability"], hist, "histogram")
    _emit(manifest, out, "skewness.csv", ["phase", "collapse", "n", "mean", "variance", "skewness"], skew, "skewness")
    return _boundary(seam, manifest)


def cmd_verify(cfg: ExperimentConfig, out: Path, manifest: RunManifest, only=None) -> int:
    from .acceptance import CHECKS, run_all
    keys = only or list(CHECKS)
    unknown = [k for k in keys if k not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; available: {list(CHECKS)}")
    results = run_all(keys, echo=lambda s: print(s, flush=True))
    _write_csv(out / "verify.csv", ["check", "title", "passed", "seconds", "detail"],
               [(r.key, r.title, r.passed, round(r.seconds, 3), r.detail) for r in results])
    manifest.add_file(out / "verify.csv")
    failed = [r.key for r in results if not r.passed]
    total = sum(r.seconds for r in results)
    print(f"{len(results) - len(failed)}/{len(results)} checks passed in {total:.0f}s"
          + (f"; failed: {', '.join(failed)}" if failed else ""))
    manifest.notes.append(f"failed checks: {failed}")
    return EXIT_FAIL if failed else EXIT_OK


HANDLERS = {
    "simulate": cmd_simulate, "jumptime-map": cmd_jumptime_map, "walltime": cmd_walltime,
    "topology": cmd_topology, "steady-state": cmd_steady_state, "fig2": cmd_fig2, "verify": cmd_verify,
}


# -- argument handling --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jumptime", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"jumptime {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--output", help="output directory (one run per directory)")
        p.add_argument("--model-json", help="model as inline JSON")
        p.add_argument("--dissipator-json", help="dissipator as inline JSON")
        p.add_argument("--trajectories", type=int, dest="N", help="number of trajectories")
        p.add_argument("--n-max", type=int, help="number of jumps per trajectory")
        p.add_argument("--lattice-size", type=int, dest="L", help="cells per axis")
        p.add_argument("--momentum-points", type=int, dest="N_p", help="momentum grid size")
        p.add_argument("--base-seed", type=int)
        p.add_argument("--times", help="comma-separated walltimes")
        p.add_argument("--sweep-json", help="sweep specification as inline JSON")
        if name == "verify":
            p.add_argument("--only", help="comma-separated check keys")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"cannot parse {args.config}: {exc}") from exc
    data["kind"] = SUBCOMMANDS[args.command]
    for key in ("N", "n_max", "L", "N_p", "base_seed", "output"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    try:
        if args.model_json:
            data["model"] = json.loads(args.model_json)
        if args.dissipator_json:
            data["dissipator"] = json.loads(args.dissipator_json)
        if args.sweep_json:
            data["sweep"] = json.loads(args.sweep_json)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid inline JSON: {exc}") from exc
    if args.times:
        try:
            data["times"] = [float(t) for t in args.times.split(",")]
        except ValueError as exc:
            raise ConfigError(f"invalid --times: {exc}") from exc
    if "output" not in data:
        data["output"] = f"runs/{args.command}"
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        cfg.build_model()
        cfg.build_dissipator()
        out = Path(cfg.output)
        with output_lock(out):
            return _run(cfg, args, out)
    except (ConfigError, ModelValidationError, DissipatorConfigError, LockError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _run(cfg: ExperimentConfig, args, out: Path) -> int:
    manifest = RunManifest(cfg.content_hash(), command=" ".join(["jumptime", *sys.argv[1:]]))
    (out / "config.json").write_text(cfg.to_json() + "\n")
    manifest.add_file(out / "config.json")
    t0 = time.perf_counter()
    code = EXIT_FAIL
    try:
        handler = HANDLERS[args.command]
        if args.command == "verify":
            code = handler(cfg, out, manifest, args.only.split(",") if args.only else None)
        else:
            code = handler(cfg, out, manifest)
    except (ConfigError, ModelValidationError, DissipatorConfigError) as exc:
        code, manifest.error = EXIT_CONFIG, f"config error: {exc}"
    except (DarkContactError, DarkTrapped) as exc:
        code, manifest.error = EXIT_DARK, f"dark-contact domain error: {exc}"
    except (ConsistencyError, BoundaryViolation, AssertionError) as exc:
        code, manifest.error = EXIT_FAIL, f"{type(exc).__name__}: {exc}"
    finally:
        manifest.exit_code = code
        manifest.status = "ok" if code == EXIT_OK else "failed"
        manifest.wall_seconds = round(time.perf_counter() - t0, 3)
        manifest.write(out)
    if manifest.error:
        print(manifest.error, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
