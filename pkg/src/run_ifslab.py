import argparse
import hashlib
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from chaosgame.orbit import OrbitConfig, compare_orbit, omega_limit, run_orbit, stochastic_driver_run
from codespace.coding import coding_point, cylinder_diameters, williams_points
from codespace.words import Word, is_disjunctive_upto
from config.config import DEFAULTS, GALLERY_DIR, LOG_LEVEL
from errors.exceptions import EscapeError, IFSLabError, NonConvergenceError, ValidationError
from hyperspace.cloud import PointCloud, hausdorff
from hyperspace.hutchinson import attractor, invariance_residual, maximal_attractor
from loggers.logger import format_failure, get_logger, log_run_end, log_run_start, setup_logging
from mapkit.analysis import classify
from mapkit.maps import IFSystem
from measurekit.measures import (
    DiscreteMeasure,
    bernoulli_pushforward,
    invariant_measure,
    mann_average,
    mass_within,
    measure_mean,
    support_cloud,
)
from measurekit.transport import monge_kantorovich
from readers.spec_reader import load_ifs, parse_driver, read_cloud_csv, read_measure_csv
from writers.emit import (
    emit_cloud_csv,
    emit_image,
    emit_measure_csv,
    emit_orbit_csv,
    emit_plan_csv,
    emit_ppm,
    emit_report,
)

logger = get_logger(__name__)


def _claim(value, tolerance: float | None = None, source: str | None = None) -> dict:
    """A reported number together with the tolerance it is judged against."""
    return {"value": value, "tolerance": tolerance, "source": source}


def _parse_floats(text: str | None, label: str) -> list[float] | None:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as e:
        raise ValidationError(f"{label} '{text}' is not a comma-separated list of numbers") from e


def _start_point(args: argparse.Namespace, ifs: IFSystem) -> np.ndarray:
    x0 = _parse_floats(args.x0, "--x0")
    if x0 is None:
        return ifs.domain.center
    if len(x0) != ifs.dim:
        raise ValidationError(f"--x0 has {len(x0)} coordinates, the IFS acts on R^{ifs.dim}")
    return np.asarray(x0, dtype=float)


def _resolve_spec(value: str) -> Path:
    path = Path(value)
    if not path.exists() and (GALLERY_DIR / f"{value}.json").exists():
        return GALLERY_DIR / f"{value}.json"
    return path


def _load(args: argparse.Namespace) -> tuple[IFSystem, dict]:
    if not args.ifs:
        raise ValidationError(f"{args.command} needs --ifs PATH (or a gallery id)")
    path = _resolve_spec(args.ifs)
    ifs = load_ifs(path)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    return ifs, {"ifs": str(args.ifs), "ifs_sha256": digest, "seed": args.seed}


def _out(args: argparse.Namespace, name: str) -> Path:
    return Path(args.out) / name


def cmd_render(args: argparse.Namespace) -> dict:
    ifs, inputs = _load(args)
    tol = args.tol if args.tol is not None else DEFAULTS["tol"]
    prune_eps = args.prune_eps if args.prune_eps is not None else tol / 4
    seed = PointCloud(_start_point(args, ifs)[None, :], space=ifs.space)

    cloud, trace = attractor(ifs, seed, tol, args.max_iter, prune_eps)
    if not trace.converged:
        raise NonConvergenceError(
            f"attractor iteration did not reach tol {tol:g} within {args.max_iter} steps",
            args.max_iter,
            trace.records[-1]["residual"] if trace.records else None,
        )

    emit_cloud_csv(cloud, _out(args, "attractor.csv"))
    emit_image(cloud, _out(args, "attractor.pgm"), args.width, args.height, ifs.domain)
    residual = invariance_residual(ifs, cloud, prune_eps)
    return {
        "inputs": inputs,
        "metrics": {
            "steps": len(trace.records),
            "size": len(cloud),
            "last_step": _claim(trace.steps[-1], tol, "--tol"),
            "invariance_residual": _claim(residual, 2 * prune_eps, "2 * prune_eps"),
        },
        "flags": {"converged": trace.converged},
        "error_budget": {"pruning_per_step": _claim(prune_eps / 2, prune_eps, "--prune-eps")},
        "trace": trace.to_dict(),
    }


def cmd_iterate(args: argparse.Namespace) -> dict:
    ifs, inputs = _load(args)
    grid = args.grid or DEFAULTS["grid_points"]
    spacing = float(ifs.domain.widths.max()) / max(grid - 1, 1)
    prune_eps = args.prune_eps if args.prune_eps is not None else spacing
    n = args.n if args.n is not None else 20

    x0 = PointCloud(ifs.domain.grid(grid), space=ifs.space)
    cloud, monotone = maximal_attractor(ifs, x0, n, prune_eps)
    emit_cloud_csv(cloud, _out(args, "maximal.csv"))
    emit_image(cloud, _out(args, "maximal.pgm"), args.width, args.height, ifs.domain)
    return {
        "inputs": {**inputs, "grid": grid},
        "metrics": {
            "size": len(cloud),
            "trapping_excess": _claim(monotone["trapping_excess"], prune_eps, "--prune-eps"),
            "max_step_excess": _claim(max(monotone["excesses"], default=0.0), prune_eps, "--prune-eps"),
        },
        "flags": {"monotone": monotone["monotone"]},
        "error_budget": {"grid_spacing": _claim(spacing, prune_eps, "--grid")},
        "report": monotone,
    }


def _chaos_trials(args: argparse.Namespace, ifs: IFSystem, inputs: dict, n: int, tol: float, reference) -> dict:
    driver = parse_driver(args.driver, ifs.N, args.seed, ifs.weights)
    result = stochastic_driver_run(
        ifs,
        _start_point(args, ifs),
        driver,
        n,
        args.trials,
        seed=args.seed,
        reference=reference,
        k=args.depth or 6,
        tol=tol,
        burn_in=args.burn_in,
        prune_eps=args.prune_eps,
    )
    report = {"inputs": inputs, "metrics": {"disjunctive_count": result["disjunctive_count"]}, "flags": {}, "trials": result}
    if reference is not None:
        pooled = result.get("pooled_hausdorff")
        passed = pooled is not None and pooled <= tol
        report["metrics"]["pooled_hausdorff"] = _claim(pooled, tol, "--tol")
        report["metrics"]["passed_count"] = result["passed_count"]
        report["flags"]["passed"] = passed
        if not passed:
            report["reason"] = {"reason": "omega-limit exceeds reference", "exit_code": 3}
    return report


def cmd_chaos(args: argparse.Namespace) -> dict:
    ifs, inputs = _load(args)
    n = args.n if args.n is not None else DEFAULTS["orbit_length"]
    tol = args.tol if args.tol is not None else 0.02
    prune_eps = args.prune_eps if args.prune_eps is not None else tol / 4
    reference = read_cloud_csv(args.ref, ifs.space) if args.ref else None
    inputs = {**inputs, "driver": args.driver, "ref": args.ref}

    if args.trials > 1:
        return _chaos_trials(args, ifs, inputs, n, tol, reference)

    driver = parse_driver(args.driver, ifs.N, args.seed, ifs.weights)
    cfg = OrbitConfig(x0=_start_point(args, ifs), driver=driver, n=n, burn_in=args.burn_in, stride=args.stride)
    try:
        orbit = run_orbit(ifs, cfg)
    except EscapeError as exc:
        if reference is None:
            raise
        return {
            "inputs": inputs,
            "metrics": {},
            "flags": {"passed": False},
            "reason": {"reason": "orbit unbounded", "exit_code": 3, "details": exc.details()},
        }

    labels = orbit.recorded_symbols()
    emit_orbit_csv(orbit.indices, labels, orbit.points, _out(args, "orbit.csv"))
    estimate = omega_limit(orbit, cfg.burn_in, prune_eps, ifs.space)
    emit_cloud_csv(estimate.cloud, _out(args, "omega.csv"))
    emit_image(estimate.cloud, _out(args, "omega.pgm"), args.width, args.height, ifs.domain)
    if args.ppm:
        emit_ppm(orbit.points, labels, _out(args, "orbit.ppm"), args.width, args.height, ifs.domain)

    report = {
        "inputs": inputs,
        "metrics": {"omega_size": len(estimate.cloud), "burn_in": cfg.burn_in, "tail": estimate.stats},
        "flags": {},
        "error_budget": {"pruning": _claim(prune_eps / 2, prune_eps, "--prune-eps")},
    }
    if reference is not None:
        check = compare_orbit(ifs, orbit, cfg, reference, tol, prune_eps)
        report["metrics"]["hausdorff"] = _claim(check["hausdorff"], tol, "--tol")
        report["flags"]["passed"] = check["passed"]
        report["check"] = check
        if not check["passed"]:
            report["reason"] = {"reason": check["reason"], "exit_code": 3}
    return report


def _initial_measure(args: argparse.Namespace, ifs: IFSystem) -> DiscreteMeasure:
    return DiscreteMeasure.dirac(_start_point(args, ifs), ifs.space)


def cmd_measure(args: argparse.Namespace) -> dict:
    ifs, inputs = _load(args)
    tol = args.tol if args.tol is not None else DEFAULTS["tol"]
    merge_radius = args.merge_radius if args.merge_radius is not None else DEFAULTS["merge_radius"]
    inputs = {**inputs, "mode": args.mode, "merge_radius": merge_radius}
    metrics: dict = {}
    budget: dict = {}

    if args.mode == "invariant":
        mu, trace = invariant_measure(ifs, _initial_measure(args, ifs), tol, args.max_iter, merge_radius)
        metrics["steps"] = len(trace.residuals)
        metrics["final_residual"] = _claim(trace.final_residual, tol + 2 * trace.merge_error, "--tol + merge error")
        budget["merge"] = _claim(trace.merge_error, None, "--merge-radius")
    elif args.mode == "mann":
        n = args.n if args.n is not None else 500
        mu, residual, info = mann_average(ifs, _initial_measure(args, ifs), n, merge_radius)
        diameter = ifs.space.diameter(ifs.domain)
        metrics["residual"] = _claim(residual, 2 * diameter / n + 2 * info["merge_error"], "2 diam / n + merge error")
        budget["merge"] = _claim(info["merge_error"], None, "--merge-radius")
    else:
        depth = args.depth or 12
        mu = bernoulli_pushforward(ifs, depth, seed=args.seed, merge_radius=merge_radius)
        metrics["depth"] = depth
        budget["merge"] = _claim(mu.merge_error, None, "--merge-radius")

    emit_measure_csv(mu, _out(args, "measure.csv"))
    emit_image(support_cloud(mu), _out(args, "support.pgm"), args.width, args.height, ifs.domain)
    metrics.update({"atoms": len(mu), "mean": measure_mean(mu).tolist()})
    if ifs.dim == 1:
        metrics["mass_near_center"] = mass_within(mu, ifs.domain.center, 0.05 * ifs.domain.diam)

    if args.ref:
        reference = read_measure_csv(args.ref, ifs.space)
        distance, plan = monge_kantorovich(mu, reference)
        emit_plan_csv(plan, _out(args, "plan.csv"))
        metrics["d_mk_to_reference"] = _claim(distance, tol, "--tol")
    return {"inputs": inputs, "metrics": metrics, "flags": {}, "error_budget": budget}


def cmd_classify(args: argparse.Namespace) -> dict:
    ifs, inputs = _load(args)
    coeffs = _parse_floats(args.coeffs, "--coeffs")
    report = classify(ifs, coeffs, p_max=args.p_max, rng_seed=args.seed)
    flags = {"banach": report.banach, "edelstein_evidence": report.edelstein_evidence}
    if report.average_contractive is not None:
        flags["average_contractive"] = report.average_contractive
    if report.average_rakotch is not None:
        flags["average_rakotch"] = report.average_rakotch
    return {
        "inputs": {**inputs, "coeffs": coeffs, "p_max": args.p_max},
        "metrics": {"lipschitz": report.lipschitz, "eventual_p": report.eventual_p},
        "flags": flags,
        "classification": report.to_dict(),
    }


def cmd_codes(args: argparse.Namespace) -> dict:
    ifs, inputs = _load(args)
    tol = args.tol if args.tol is not None else DEFAULTS["tol"]
    metrics: dict = {}
    flags: dict = {}

    if args.k_max:
        cloud = williams_points(ifs, args.k_max, tol, args.max_iter)
        emit_cloud_csv(cloud, _out(args, "williams.csv"))
        metrics["williams_points"] = len(cloud)
        if args.ref:
            reference = read_cloud_csv(args.ref, ifs.space)
            metrics["hausdorff_to_reference"] = _claim(hausdorff(cloud, reference), tol, "--tol")

    if args.word:
        word = Word.parse(args.word, ifs.N)
        point, _ = coding_point(ifs, word, _start_point(args, ifs))
        metrics["coding_point"] = {"word": str(word), "point": point.tolist()}
        metrics["cylinder_diameters"] = cylinder_diameters(ifs, word, args.grid or DEFAULTS["grid_points"])

    if args.n:
        k = args.depth or 3
        prefix = Word(tuple(parse_driver(args.driver, ifs.N, args.seed, ifs.weights).take(args.n)), ifs.N)
        disjunctive, missing = is_disjunctive_upto(prefix, k)
        metrics["prefix"] = {"driver": args.driver, "length": args.n, "k": k, "missing": [list(w) for w in missing]}
        flags["disjunctive"] = disjunctive

    if not metrics:
        raise ValidationError("codes needs at least one of --k-max, --word or --n")
    return {"inputs": inputs, "metrics": metrics, "flags": flags}


def gallery_ids() -> list[str]:
    return sorted(p.stem for p in GALLERY_DIR.glob("*.json"))


def cmd_examples(args: argparse.Namespace) -> dict:
    ids = gallery_ids()
    if args.show:
        if args.show not in ids:
            raise ValidationError(f"unknown gallery id '{args.show}', expected one of {ids}")
        print((GALLERY_DIR / f"{args.show}.json").read_text(encoding="utf-8"), end="")
    elif args.export:
        target = Path(args.export)
        target.mkdir(parents=True, exist_ok=True)
        for gallery_id in ids:
            shutil.copyfile(GALLERY_DIR / f"{gallery_id}.json", target / f"{gallery_id}.json")
        logger.info(f"Exported {len(ids)} gallery specs to {target}")
    else:
        for gallery_id in ids:
            print(gallery_id)
    return {"metrics": {"gallery_size": len(ids)}, "flags": {}}


HANDLERS = {
    "render": cmd_render,
    "iterate": cmd_iterate,
    "chaos": cmd_chaos,
    "measure": cmd_measure,
    "classify": cmd_classify,
    "codes": cmd_codes,
    "examples": cmd_examples,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ifs", help="IFS spec JSON, or a gallery id")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=DEFAULTS["seed"])
    parser.add_argument("--tol", type=float)
    parser.add_argument("--prune-eps", type=float)
    parser.add_argument("--max-iter", type=int, default=DEFAULTS["max_iter"])
    parser.add_argument("--x0", help="starting point, comma separated")
    parser.add_argument("--width", type=int, default=DEFAULTS["image_width"])
    parser.add_argument("--height", type=int, default=DEFAULTS["image_height"])
    parser.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ifslab", description="Iterated function systems: attractors, chaos game, invariant measures.")
    sub = parser.add_subparsers(dest="command", required=True)

    render = sub.add_parser("render", help="attractor by Hutchinson iteration")
    _add_common(render)

    iterate = sub.add_parser("iterate", help="maximal attractor approximant F^n(grid)")
    _add_common(iterate)
    iterate.add_argument("-n", "--n", type=int)
    iterate.add_argument("--grid", type=int)

    chaos = sub.add_parser("chaos", help="chaos game orbit and omega-limit check")
    _add_common(chaos)
    chaos.add_argument("-n", "--n", type=int)
    chaos.add_argument("--burn-in", type=int)
    chaos.add_argument("--stride", type=int, default=1)
    chaos.add_argument("--driver", default="champernowne")
    chaos.add_argument("--ref", help="reference cloud CSV")
    chaos.add_argument("--trials", type=int, default=1)
    chaos.add_argument("--depth", type=int, help="word length for the disjunctivity check of stochastic trials")
    chaos.add_argument("--ppm", action="store_true", help="also write orbit.ppm coloured by map index")

    measure = sub.add_parser("measure", help="invariant measure approximations")
    _add_common(measure)
    measure.add_argument("--mode", choices=("invariant", "mann", "bernoulli"), default="invariant")
    measure.add_argument("-n", "--n", type=int)
    measure.add_argument("--depth", type=int)
    measure.add_argument("--merge-radius", type=float)
    measure.add_argument("--ref", help="reference measure CSV")

    classify_p = sub.add_parser("classify", help="contraction classification")
    _add_common(classify_p)
    classify_p.add_argument("--coeffs", help="average-Rakotch coefficients, comma separated")
    classify_p.add_argument("--p-max", type=int, default=DEFAULTS["p_max"])

    codes = sub.add_parser("codes", help="Williams points, coding map and disjunctivity")
    _add_common(codes)
    codes.add_argument("--k-max", type=int)
    codes.add_argument("--word")
    codes.add_argument("--grid", type=int)
    codes.add_argument("-n", "--n", type=int)
    codes.add_argument("--depth", type=int)
    codes.add_argument("--driver", default="champernowne")
    codes.add_argument("--ref", help="reference cloud CSV")

    examples = sub.add_parser("examples", help="built-in gallery")
    examples.add_argument("--list", action="store_true")
    examples.add_argument("--show", metavar="ID")
    examples.add_argument("--export", metavar="DIR")
    examples.add_argument("--out", default="out")
    return parser


def run(args: argparse.Namespace) -> tuple[int, dict]:
    """Execute one command; every outcome maps to exit code 0, 1, 2 or 3."""
    start = time.perf_counter()
    try:
        report = HANDLERS[args.command](args)
        exit_code = report.get("reason", {}).get("exit_code", 0)
    except IFSLabError as exc:
        logger.error(f"{args.command} failed: {exc}")
        report = {"reason": format_failure(args.command, exc)}
        exit_code = exc.exit_code
    except Exception as exc:
        logger.exception(f"{args.command} failed with an internal error")
        report = {"reason": format_failure(args.command, exc)}
        exit_code = 1

    report["command"] = args.command
    report["exit_code"] = exit_code
    if getattr(args, "timings", False):
        report["timings"] = {"wall_seconds": time.perf_counter() - start}
    return exit_code, report


def main(argv: list[str] | None = None) -> int:
    setup_logging(LOG_LEVEL)
    args = build_parser().parse_args(argv)
    start_time = log_run_start(args.command)

    exit_code, report = run(args)
    if args.command != "examples" or exit_code != 0:
        try:
            emit_report(report, _out(args, "report.json"))
        except OSError as exc:
            logger.error(f"Could not write report: {exc}")
            exit_code = exit_code or 1

    log_run_end(args.command, start_time, report)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
