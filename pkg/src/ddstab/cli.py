"""Command-line front end.

Exit codes form a stable contract:
  0   success / informative verdict
  2   well-formed negative verdict (not informative, verification failed)
  1   operational failure (bad file, solver breakdown)
  64  usage error

Option values resolve as flag > environment (DDSTAB_*) > config file >
built-in default. All outputs are plain JSON/CSV and byte-stable for a
fixed config and seed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .data import (build_data_matrices, consistent_set, load_trajectory,
                   trajectory_to_csv, trajectory_to_json)
from .errors import DataFormatError, PreconditionError, SolverFailure
from .experiments import (MonteCarloConfig, demo_example1, demo_example2,
                          demo_three_tank, run_monte_carlo, three_tank_model,
                          zoh_discretize)
from .informativity import check_stabilizability_prior
from .linalg import NumericalConfig, row_compress
from .sdp import get_backend
from .synthesis import (FeedbackGain, GainProvenance, LmiFeasibilityProblem,
                        SolveStatus, gain_from_plain, problem_to_json,
                        solve_plain_lmi, synthesize_stab)
from .verification import decomposition_check, structural_nullity, verify_gain

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_NEGATIVE = 2
EXIT_USAGE = 64

_CONFIG_FIELDS = ("rank_rel_tol", "subspace_tol", "schur_margin", "psd_margin",
                  "equality_tol")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _resolve(flag_value, env_key: str, file_value, default, cast):
    if flag_value is not None:
        return cast(flag_value)
    env = os.environ.get(env_key)
    if env is not None:
        return cast(env)
    if file_value is not None:
        return cast(file_value)
    return default


def _load_config_file(path: str | None) -> dict:
    path = path or os.environ.get("DDSTAB_CONFIG")
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"config file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise DataFormatError(f"config file {path}: expected a JSON object")
    return payload


def _settings(args) -> dict:
    """Merge flags, environment, and config file into one settings dict."""
    file_cfg = _load_config_file(getattr(args, "config", None))
    tol_kwargs = {}
    for name in _CONFIG_FIELDS:
        value = _resolve(getattr(args, name, None), f"DDSTAB_{name.upper()}",
                         file_cfg.get(name), None, float)
        if value is not None:
            tol_kwargs[name] = value
    try:
        numcfg = NumericalConfig(**tol_kwargs)
    except ValueError as exc:
        raise DataFormatError(f"invalid tolerance configuration: {exc}") from exc
    scales = _resolve(getattr(args, "scales", None), "DDSTAB_SCALES",
                      file_cfg.get("scales"), (0.1, 1.0, 10.0), _parse_scales)
    return {
        "numcfg": numcfg,
        "seed": _resolve(getattr(args, "seed", None), "DDSTAB_SEED",
                         file_cfg.get("seed"), 3, int),
        "out": _resolve(getattr(args, "out", None), "DDSTAB_OUT",
                        file_cfg.get("out"), "out", str),
        "fmt": _resolve(getattr(args, "format", None), "DDSTAB_FORMAT",
                        file_cfg.get("format"), "json", str),
        "backend_name": _resolve(getattr(args, "backend", None), "DDSTAB_BACKEND",
                                 file_cfg.get("backend"), "builtin", str),
        "samples": _resolve(getattr(args, "samples", None), "DDSTAB_SAMPLES",
                            file_cfg.get("samples"), 200, int),
        "scales": scales,
    }


def _parse_scales(value) -> tuple[float, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    return tuple(float(v) for v in str(value).split(",") if v.strip())


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _gain_payload(gain: FeedbackGain, sol=None, comp=None, branch=None) -> dict:
    payload = {
        "K": gain.K.tolist(),
        "provenance": gain.provenance.value,
        "k2": None if gain.k2 is None else gain.k2.tolist(),
        "k2_policy": gain.k2_policy,
    }
    if sol is not None:
        payload["theta"] = None if sol.theta is None else sol.theta.tolist()
        payload["slack"] = sol.slack
    if branch is not None:
        payload["branch"] = branch
    if comp is not None:
        payload["row_compression"] = {"S": comp.S.tolist(), "r": comp.r}
    return payload


def _gain_from_file(path: str) -> FeedbackGain:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        K = np.array(payload["K"], dtype=float)
        provenance = GainProvenance(payload.get("provenance", "plain"))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataFormatError(f"gain file {path}: {exc}") from exc
    return FeedbackGain(K=np.atleast_2d(K), provenance=provenance)


def cmd_informativity(args) -> int:
    settings = _settings(args)
    traj = load_trajectory(args.data)
    D = build_data_matrices(traj)
    report = check_stabilizability_prior(D, settings["numcfg"],
                                         get_backend(settings["backend_name"]))
    path = _write(settings["out"], "informativity.json", _dump_json(report.to_dict()))
    print(f"wrote {path}")
    print(f"stabilizability-prior informative: "
          f"{report.stabilization_stabilizability_prior}")
    return EXIT_OK if report.stabilization_stabilizability_prior else EXIT_NEGATIVE


def cmd_synthesize(args) -> int:
    settings = _settings(args)
    numcfg = settings["numcfg"]
    backend = get_backend(settings["backend_name"])
    traj = load_trajectory(args.data)
    D = build_data_matrices(traj)
    comp = row_compress(D.x_minus, D.x_plus, numcfg)
    if args.dump_problem:
        problem = LmiFeasibilityProblem(
            diag_coeff=D.x_minus if comp.r == D.n else comp.x_hat_minus,
            offdiag_coeff=D.x_plus if comp.r == D.n else comp.x_hat_plus)
        _write(settings["out"], "problem.json", problem_to_json(problem))
    if comp.r == D.n:
        sol = solve_plain_lmi(D, numcfg, backend)
        if sol.status is SolveStatus.SOLVER_FAILURE:
            raise SolverFailure("plain LMI solve broke down")
        if not sol.feasible:
            _write(settings["out"], "gain.json",
                   _dump_json({"informative": False, "branch": "full_rank"}))
            print("not informative for stabilization (full-rank branch)")
            return EXIT_NEGATIVE
        gain = gain_from_plain(D, sol, numcfg)
        payload = _gain_payload(gain, sol, comp, branch="full_rank")
    else:
        try:
            gain, sol, comp = synthesize_stab(D, numcfg, backend=backend, comp=comp)
        except PreconditionError:
            _write(settings["out"], "gain.json",
                   _dump_json({"informative": False, "branch": "rank_deficient"}))
            print("not informative for stabilization under the stabilizability prior")
            return EXIT_NEGATIVE
        payload = _gain_payload(gain, sol, comp, branch="rank_deficient")
    path = _write(settings["out"], "gain.json", _dump_json(payload))
    print(f"wrote {path}")
    print(f"K = {gain.K.tolist()}")
    return EXIT_OK


def cmd_verify(args) -> int:
    settings = _settings(args)
    numcfg = settings["numcfg"]
    traj = load_trajectory(args.data)
    D = build_data_matrices(traj)
    gain = _gain_from_file(args.gain)
    cs = consistent_set(D, numcfg)
    report = verify_gain(cs, gain, n_samples=settings["samples"],
                         scales=settings["scales"], seed=settings["seed"], cfg=numcfg)
    payload = report.to_dict()
    payload["structural_nullity_particular"] = structural_nullity(
        cs, gain, cs.particular, numcfg)
    comp = row_compress(D.x_minus, D.x_plus, numcfg)
    try:
        decomp = decomposition_check(D, comp, cs.particular, numcfg)
        payload["decomposition"] = {
            "a21_norm": decomp.a21_norm,
            "b2_norm": decomp.b2_norm,
            "a22_spectral_radius": decomp.a22_spectral_radius,
            "ok": decomp.ok,
        }
    except PreconditionError as exc:
        payload["decomposition"] = {"skipped": str(exc)}
    path = _write(settings["out"], "verification.json", _dump_json(payload))
    print(f"wrote {path}")
    print(f"pass: {report.passed} (max spectral radius {report.max_spectral_radius:.6f})")
    return EXIT_OK if report.passed else EXIT_NEGATIVE


def cmd_montecarlo(args) -> int:
    settings = _settings(args)
    system = zoh_discretize(three_tank_model())
    mc = MonteCarloConfig(system=system,
                          scenarios=args.scenarios,
                          t_list=tuple(args.T_list),
                          seed=settings["seed"],
                          workers=args.workers)
    result = run_monte_carlo(mc, settings["numcfg"])
    pct = result.percentages()
    summary = {
        "scenarios": mc.scenarios,
        "seed": mc.seed,
        "poisson_lambda": mc.poisson_lambda,
        "solver_failures": result.solver_failures,
        "per_T": {str(T): pct[T] for T in mc.t_list},
    }
    path = _write(settings["out"], "montecarlo.json", _dump_json(summary))
    lines = ["scenario,T,identification,stabilization,stabilizability_prior"]
    for v in result.verdicts:
        lines.append(f"{v.scenario},{v.T},{int(v.identification)},"
                     f"{int(v.stabilization)},{int(v.stabilization_stabilizability_prior)}")
    csv_path = _write(settings["out"], "montecarlo.csv", "\n".join(lines) + "\n")
    print(f"wrote {path} and {csv_path}")
    for T in mc.t_list:
        row = pct[T]
        print(f"T={T}: ident {row['identification_pct']:.1f}%  "
              f"plain {row['stabilization_pct']:.1f}%  "
              f"stab-prior {row['stabilizability_prior_pct']:.1f}%")
    if result.solver_failures:
        print(f"solver failures: {result.solver_failures}")
    return EXIT_OK


def _demo_example1_bundle(settings) -> None:
    bundle = demo_example1(settings["numcfg"], seed=settings["seed"],
                           n_samples=settings["samples"])
    out = settings["out"]
    if settings["fmt"] == "csv":
        _write(out, "data.csv", trajectory_to_csv(bundle["trajectory"]))
    else:
        _write(out, "data.json", trajectory_to_json(bundle["trajectory"]))
    _write(out, "informativity.json", _dump_json(bundle["informativity"].to_dict()))
    _write(out, "gain.json", _dump_json(_gain_payload(
        bundle["gain"], bundle["solution"], bundle["compression"],
        branch="rank_deficient")))
    _write(out, "verification.json", _dump_json(bundle["verification"].to_dict()))


def _demo_example2_bundle(settings) -> None:
    bundle = demo_example2(cfg=settings["numcfg"])
    lines = ["a,b1,b2,controllable"]
    for a, b1, b2, ctrb in bundle["grid"]:
        lines.append(f"{a!r},{b1!r},{b2!r},{int(ctrb)}")
    _write(settings["out"], "plane_grid.csv", "\n".join(lines) + "\n")
    _write(settings["out"], "summary.json", _dump_json(
        {"uncontrollable_points": bundle["uncontrollable_points"],
         "grid_points": len(bundle["grid"])}))


def _demo_three_tank_bundle(settings) -> None:
    bundle = demo_three_tank(settings["numcfg"], seed=settings["seed"],
                             n_samples=settings["samples"])
    out = settings["out"]
    _write(out, "model.json", _dump_json({
        "A_continuous": bundle["continuous"].A.tolist(),
        "B_continuous": bundle["continuous"].B.tolist(),
        "sample_time": bundle["continuous"].sample_time,
        "A": bundle["system"].A.tolist(),
        "B": bundle["system"].B.tolist(),
    }))
    if settings["fmt"] == "csv":
        _write(out, "data.csv", trajectory_to_csv(bundle["trajectory"]))
    else:
        _write(out, "data.json", trajectory_to_json(bundle["trajectory"]))
    _write(out, "informativity.json", _dump_json(bundle["informativity"].to_dict()))
    _write(out, "gain.json", _dump_json(_gain_payload(
        bundle["gain"], bundle["solution"], bundle["compression"],
        branch="rank_deficient")))
    _write(out, "verification.json", _dump_json(bundle["verification"].to_dict()))
    eigs = bundle["closed_loop_eigenvalues"]
    _write(out, "spectrum.json", _dump_json({
        "closed_loop_eigenvalues_real": np.real(eigs).tolist(),
        "closed_loop_eigenvalues_imag": np.imag(eigs).tolist(),
        "closed_loop_spectral_radius": bundle["closed_loop_spectral_radius"],
    }))


def cmd_demo(args) -> int:
    settings = _settings(args)
    bundles = {
        "example1": _demo_example1_bundle,
        "example2": _demo_example2_bundle,
        "three-tank": _demo_three_tank_bundle,
    }
    bundles[args.name](settings)
    print(f"wrote demo bundle to {settings['out']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ddstab",
                     description="data-driven stabilization from input-state data")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON file with tolerances and defaults")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory (default ./out)")
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument("--backend", choices=("builtin", "cvxpy"), default=None)
        p.add_argument("--samples", type=int, default=None,
                       help="verification draws per scale")
        p.add_argument("--scales", default=None,
                       help="comma list of sampling scales, e.g. 0.1,1,10")
        for name in _CONFIG_FIELDS:
            p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float,
                           default=None, help=argparse.SUPPRESS)

    p = sub.add_parser("informativity", help="classify a dataset")
    p.add_argument("data", help="trajectory file (.json or .csv)")
    add_common(p)
    p.set_defaults(func=cmd_informativity)

    p = sub.add_parser("synthesize", help="compute a stabilizing gain")
    p.add_argument("data")
    p.add_argument("--dump-problem", action="store_true",
                   help="also write the feasibility problem as JSON")
    add_common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verify", help="check a gain against the consistent family")
    p.add_argument("data")
    p.add_argument("gain", help="gain file produced by synthesize")
    add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("montecarlo", help="informativity rates under random excitation")
    p.add_argument("--scenarios", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--T-list", type=int, nargs="+", default=[3, 4, 5, 10, 100])
    add_common(p)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("demo", help="run a bundled scenario")
    p.add_argument("name", choices=("example1", "example2", "three-tank"))
    add_common(p)
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataFormatError, OSError, SolverFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
