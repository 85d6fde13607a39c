"""Batch front-end: ``transversality estimate|verify|ap``.

Exit codes: 0 success, 1 a check failed, 2 bad input (unparsable scene,
manifest or arguments).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .altproj import estimate_linear_rate, run_ap
from .cones import (
    compare_cones_on_C,
    restrict_to_C,
    sample_relative_cone,
    sample_restricted_cone,
    theorem2_sequence_check,
    write_comparison_csv,
)
from .constants import KINDS, check_orderings, estimate
from .constructions import FAULTS, bisector_foot, run_case1_corpus, run_chain_corpus
from .errors import TransversalityError
from .scene import RadiusSchedule, Scene, corpus_dir, load_scene

CSV_COLUMNS = ("scene", "constant", "estimate", "smallest_radius", "value_at_smallest_radius",
               "feasible_count", "drift", "empty_feasible", "seed")
RADIUS_COLUMNS = ("scene", "constant", "radius", "value", "feasible_count", "seed")
CHAIN_DELTAS = (1e-2, 1e-3)


class ManifestError(TransversalityError, ValueError):
    pass


@dataclass(frozen=True)
class RunManifest:
    scenes: tuple
    constants: tuple = KINDS
    schedule: RadiusSchedule = field(default_factory=RadiusSchedule.geometric)
    out: Path = Path("reports")
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not self.scenes:
            raise ManifestError("manifest lists no scenes")
        bad = [c for c in self.constants if c not in KINDS]
        if bad or not self.constants:
            raise ManifestError(f"unknown constants {bad}; choose from {', '.join(KINDS)}")
        object.__setattr__(self, "scenes", tuple(Path(p) for p in self.scenes))
        object.__setattr__(self, "out", Path(self.out))
        if self.schedule.seed != self.seed:
            s = self.schedule
            object.__setattr__(self, "schedule", RadiusSchedule(s.radii, s.samples_per_radius,
                                                                s.relaxation, self.seed))

    def to_dict(self) -> dict:
        return {"scenes": [str(p) for p in self.scenes], "constants": list(self.constants),
                "schedule": self.schedule.to_dict(), "seed": self.seed}

    @classmethod
    def from_file(cls, path, out=None, jobs=None) -> "RunManifest":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"{path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ManifestError(f"{path}: manifest must be a JSON object")
        scenes = [p if Path(p).is_absolute() else path.parent / p for p in d.get("scenes", [])]
        sd = d.get("schedule", {})
        seed = int(d.get("seed", 0))
        try:
            if "radii" in sd:
                sched = RadiusSchedule(tuple(sd["radii"]), int(sd.get("samples_per_radius", 2000)),
                                       float(sd.get("relaxation", 1.0)), seed)
            else:
                sched = RadiusSchedule.geometric(sd.get("delta0", 0.5), sd.get("factor", 0.5),
                                                 sd.get("count", 5),
                                                 sd.get("samples_per_radius", 2000),
                                                 sd.get("relaxation", 1.0), seed)
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"{path}: bad schedule: {exc}") from exc
        return cls(tuple(scenes), tuple(d.get("constants", KINDS)), sched,
                   Path(out or d.get("out", "reports")), seed, int(jobs or d.get("jobs", 1)))


def _scene_id(path: Path) -> str:
    return path.stem


def _load_all(paths) -> dict[str, Scene]:
    out = {}
    for p in paths:
        try:
            out[_scene_id(p)] = load_scene(p)
        except (OSError, TransversalityError, ValueError, TypeError) as exc:
            raise ManifestError(f"cannot load scene {p}: {exc}") from exc
    return out


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _estimate_task(args):
    path, kind, sched = args
    return estimate(kind, load_scene(path), sched).to_dict()


def _run_tasks(tasks, jobs: int):
    if jobs <= 1:
        return [_estimate_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_estimate_task, tasks))


class _Est:
    """Minimal view of an estimate dict for check_orderings."""

    def __init__(self, d):
        self.kind = d["kind"]
        self.extrapolated = d["extrapolated"]


def cmd_estimate(manifest: RunManifest) -> int:
    scenes = _load_all(manifest.scenes)
    tasks = [(str(p), k, manifest.schedule) for p in manifest.scenes for k in manifest.constants]
    results = _run_tasks(tasks, manifest.jobs)
    manifest.out.mkdir(parents=True, exist_ok=True)
    rows, per_radius, ok = [], [], True
    it = iter(results)
    for p in manifest.scenes:
        sid = _scene_id(p)
        ests = {k: next(it) for k in manifest.constants}
        checks = check_orderings([_Est(e) for e in ests.values()], scene=sid)
        ok &= all(c.passed for c in checks)
        _dump({"scene": sid, "fingerprint": scenes[sid].fingerprint, "seed": manifest.seed,
               "schedule": manifest.schedule.to_dict(), "estimates": ests,
               "orderings": [c.__dict__ for c in checks]}, manifest.out / f"{sid}.json")
        for k, e in ests.items():
            per_radius.append((sid, k, e))
            last = e["per_radius_values"][-1]
            rows.append([sid, k, repr(e["extrapolated"]), repr(last["radius"]), repr(last["value"]),
                         last["feasible_count"], repr(e["drift"]), e["empty_feasible"],
                         manifest.seed])
    with (manifest.out / "estimates.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(rows)
    with (manifest.out / "per_radius.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RADIUS_COLUMNS)
        for sid, k, e in per_radius:
            for r in e["per_radius_values"]:
                w.writerow([sid, k, repr(r["radius"]), repr(r["value"]), r["feasible_count"],
                            manifest.seed])
    _dump(manifest.to_dict(), manifest.out / "manifest.json")
    return 0 if ok else 1


def verify_constructions(count: int, seed: int, fault: str | None = None) -> dict:
    foot = FAULTS[fault] if fault else bisector_foot
    chain = [run_chain_corpus(count, dp, seed + i, stress_every=10, foot=foot)
             for i, dp in enumerate(CHAIN_DELTAS)]
    case1 = [run_case1_corpus(count, dp, seed + 100 + i) for i, dp in enumerate(CHAIN_DELTAS)]
    failing = sorted({name for c in chain for name in c["failures"]})
    passed = not failing and all(c["failures"] == 0 for c in case1)
    return {"chain": chain, "case1": case1, "failing_links": failing, "passed": passed}


def verify_cones(scenes: dict[str, Scene], sched: RadiusSchedule) -> tuple[dict, list]:
    out, comps = {}, []
    for sid, sc in scenes.items():
        rel, res = sample_relative_cone(sc, sched), sample_restricted_cone(sc, sched)
        comp = compare_cones_on_C(rel, res, scene=sid)
        comps.append(comp)
        relC = restrict_to_C(rel)
        seq_fail = 0
        seen = set()
        for i in range(len(relC)):
            j = int(relC.provenance[i])
            if j in seen:
                continue
            seen.add(j)
            seq_fail += not theorem2_sequence_check(sc, relC.pair(i)).passed
        out[sid] = {"comparison": comp.to_dict(), "sequences_checked": len(seen),
                    "sequence_failures": seq_fail,
                    "passed": comp.passed and seq_fail == 0}
    return out, comps


def cmd_verify(manifest: RunManifest, suite: str = "all", count: int = 10_000,
               fault: str | None = None) -> int:
    scenes = _load_all(manifest.scenes)
    manifest.out.mkdir(parents=True, exist_ok=True)
    report = {"seed": manifest.seed, "suite": suite}
    ok = True
    if suite in ("constructions", "all"):
        report["constructions"] = verify_constructions(count, manifest.seed, fault)
        ok &= report["constructions"]["passed"]
        for name in report["constructions"]["failing_links"]:
            print(f"FAIL construction link: {name}", file=sys.stderr)
    if suite in ("cones", "all"):
        report["cones"], comps = verify_cones(scenes, manifest.schedule)
        write_comparison_csv(comps, manifest.out / "cones.csv")
        for sid, r in report["cones"].items():
            ok &= r["passed"]
            if not r["passed"]:
                print(f"FAIL cones: {sid}", file=sys.stderr)
    report["passed"] = bool(ok)
    _dump(report, manifest.out / "verify.json")
    return 0 if ok else 1


def _parse_radii(text: str) -> tuple[float, float, int]:
    try:
        d0, f, n = text.split(",")
        return float(d0), float(f), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError("expected delta0,factor,count") from None


def _parse_vector(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated numbers") from None


def _parse_constants(text: str) -> tuple:
    return tuple(c.strip() for c in text.split(",") if c.strip())


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenes", type=Path, help="directory of scene JSON files (default: bundled corpus)")
    p.add_argument("--manifest", type=Path, help="run manifest JSON (overrides --scenes)")
    p.add_argument("--radii", type=_parse_radii, default=(0.5, 0.5, 5), metavar="D0,FACTOR,COUNT")
    p.add_argument("--samples", type=int, default=2000, help="samples per radius")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("reports"))
    p.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="transversality",
                                 description="Estimate and cross-check transversality constants.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    est = sub.add_parser("estimate", help="estimate constants and check their orderings")
    _add_run_options(est)
    est.add_argument("--constants", type=_parse_constants, default=KINDS)
    ver = sub.add_parser("verify", help="construction chain and cone comparison suites")
    _add_run_options(ver)
    ver.add_argument("--suite", choices=("constructions", "cones", "all"), default="all")
    ver.add_argument("--count", type=int, default=10_000, help="random instances per delta'")
    ver.add_argument("--inject-fault", choices=sorted(FAULTS), default=None,
                     help="swap in a deliberately broken construction (mutation check)")
    run = sub.add_parser("ap", help="run alternating projections on one scene")
    run.add_argument("--scene", type=Path, required=True)
    run.add_argument("--x0", type=_parse_vector, required=True)
    run.add_argument("--iters", type=int, default=100)
    run.add_argument("--tol", type=float, default=1e-12)
    run.add_argument("--burn-in", type=int, default=1)
    run.add_argument("--csv", type=Path, help="write the trajectory here")
    return ap


def _manifest_from_args(args, constants=KINDS) -> RunManifest:
    if args.manifest is not None:
        return RunManifest.from_file(args.manifest, out=args.out, jobs=args.jobs)
    d = args.scenes or corpus_dir()
    if not d.is_dir():
        raise ManifestError(f"{d} is not a directory")
    d0, f, n = args.radii
    try:
        sched = RadiusSchedule.geometric(d0, f, n, args.samples, 1.0, args.seed)
    except ValueError as exc:
        raise ManifestError(str(exc)) from exc
    return RunManifest(tuple(sorted(d.glob("*.json"))), constants, sched, args.out,
                       args.seed, args.jobs)


def _cmd_ap(args) -> int:
    try:
        scene = load_scene(args.scene)
    except (OSError, TransversalityError, ValueError) as exc:
        raise ManifestError(f"cannot load scene {args.scene}: {exc}") from exc
    traj = run_ap(scene, np.asarray(args.x0), args.iters, args.tol)
    try:
        rate = estimate_linear_rate(traj, args.burn_in)
    except ValueError:
        rate = None
    if args.csv is not None:
        traj.to_csv(args.csv)
    print(json.dumps({"cycles": traj.cycles, "converged": traj.converged, "rate": rate,
                      "final_residual": float(traj.residuals[-1]),
                      "limit": None if traj.limit is None else traj.limit.tolist()}, indent=2))
    return 0 if traj.converged else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "ap":
            return _cmd_ap(args)
        if args.command == "estimate":
            return cmd_estimate(_manifest_from_args(args, args.constants))
        return cmd_verify(_manifest_from_args(args), args.suite, args.count, args.inject_fault)
    except TransversalityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
