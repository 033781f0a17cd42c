"""Command line runner: simulate | verify | fit | oracle | revealments.

Every command reads a single JSON document (``--spec``), rejects unknown
keys, and writes CSV or JSON carrying the master seed and the SHA-256 of the
canonical spec.  Exit codes: 0 success, 2 usage or schema error, 3 resource
limit, 4 verdict failed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import inspect
import io
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import oracle
from .estimators import bernoulli as eb
from .estimators import gaussian as eg
from .estimators import revealment as er
from .estimators.core import (CSV_FIELDS, EventSpec, GaussianModel, InvalidData, Report, Term,
                              csv_row, fit_exponential_decay, fit_power_law, model_dict,
                              model_from_dict)
from .estimators.mc import mc_estimate
from .explorer import (AnnulusSeed, FullReveal, GaussianLevelLine, GaussianLine, GaussianOneArm,
                       HyperplaneSweep, Interface, OriginCluster)
from .gaussian import InvalidParameter
from .lattice import (InvalidQuery, LatticeBox, UnsupportedDimension, all_open, crossing, dictator,
                      one_arm, rect_crossing, two_arm, two_point)
from .parallel import set_workers

EXIT_OK, EXIT_USAGE, EXIT_RESOURCE, EXIT_VERDICT = 0, 2, 3, 4


class SpecError(ValueError):
    pass


# ----------------------------------------------------------------- helpers
def clean(x):
    """JSON-safe copy: numpy scalars and arrays, Fractions, non-finite floats."""
    if isinstance(x, dict):
        return {str(k): clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating, Fraction)):
        v = float(x)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return x


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


def spec_hash(spec: dict) -> str:
    return hashlib.sha256(json.dumps(spec, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _only(d: dict, allowed, where: str):
    bad = set(d) - set(allowed)
    if bad:
        raise SpecError(f"unknown keys in {where}: {sorted(bad)}")


def _num(v):
    """Numbers, or exact fractions written as strings like "1/2"."""
    if isinstance(v, str):
        return Fraction(v)
    return v


def resolve_seed(cli_seed, spec: dict) -> int:
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get("PERCOLAB_SEED")
    if env:
        return int(env)
    return int(spec.get("seed", 0))


def _model(d):
    if isinstance(d, GaussianModel):
        return d
    if not isinstance(d, dict):
        raise SpecError("model must be an object")
    return model_from_dict(d)


# --------------------------------------------------------------- instances
INSTANCE_KEYS = {"kind", "n_edges", "edge", "a", "b", "R", "k", "d", "v", "box"}


def build_instance(inst: dict, algorithm: str = "full"):
    """(event, algorithm) for exact enumeration.

    kinds: dictator / all_open (n_edges, edge), rect (a columns, b rows),
    one_arm (R, d), two_arm (R), crossing (R, k, d), two_point (v, box).
    algorithms: full, origin, hyperplane, interface.
    """
    _only(inst, INSTANCE_KEYS, "instance")
    kind = inst.get("kind")
    d = int(inst.get("d", 2))
    if algorithm == "origin":
        if kind != "one_arm":
            raise SpecError("the origin algorithm determines one_arm instances")
        alg = OriginCluster(int(inst["R"]), d)
        return alg.event, alg
    if algorithm in ("hyperplane", "interface"):
        cls = HyperplaneSweep if algorithm == "hyperplane" else Interface
        if kind == "rect":
            alg = cls(box=LatticeBox.rectangle(int(inst["a"]), int(inst["b"])))
        elif kind == "crossing":
            k = _num(inst.get("k", 1))
            alg = cls(k, int(inst["R"]), d) if algorithm == "hyperplane" else cls(k, int(inst["R"]))
        else:
            raise SpecError(f"the {algorithm} algorithm determines crossings")
        return alg.event, alg
    if algorithm != "full":
        raise SpecError(f"unknown algorithm {algorithm!r}")
    if kind in ("dictator", "all_open"):
        m = int(inst.get("n_edges", 1))
        box = LatticeBox.rectangle(m + 1, 1)
        ev = dictator(m, int(inst.get("edge", 0))) if kind == "dictator" else all_open(m, range(m))
    elif kind == "rect":
        a, b = int(inst["a"]), int(inst["b"])
        box = LatticeBox.rectangle(a, b)
        ev = rect_crossing(box, a, b)
    elif kind == "one_arm":
        box = LatticeBox.cube(d, int(inst["R"]))
        ev = one_arm(box, int(inst["R"]))
    elif kind == "two_arm":
        box = LatticeBox.cube(2, int(inst["R"]))
        ev = two_arm(box, int(inst["R"]))
    elif kind == "crossing":
        k = _num(inst.get("k", 1))
        box = LatticeBox.crossing_box(d, int(inst["R"]), k)
        ev = crossing(box, k, int(inst["R"]))
    elif kind == "two_point":
        v = tuple(int(x) for x in inst["v"])
        box = LatticeBox.cube(len(v), int(inst.get("box", 1)))
        ev = two_point(box, v)
    else:
        raise SpecError(f"unknown instance kind {kind!r}")
    return ev, FullReveal(box, ev)


def _subset(sub, alg):
    if sub is None or sub == "all":
        return list(alg.units)
    if sub == "support":
        return alg.event.support.tolist()
    return [int(e) for e in sub]


def _from_check(name: str, res, info=None) -> Report:
    extra = {k: v for k, v in res.extra.items() if np.isscalar(v)}
    extra["slack"] = res.slack
    extra.update(info or {})
    return Report(name, {"lhs": Term(float(res.lhs)), "rhs": Term(float(res.rhs))}, bool(res.holds), None, extra)


# ------------------------------------------------------------------- checks
def v_osss(instance, p, algorithm="full", subset=None):
    ev, alg = build_instance(instance, algorithm)
    p = _num(p)
    if subset is None:
        return _from_check("osss", oracle.check_osss(ev, alg, p), {"algorithm": alg.name})
    return _from_check("osss-extended", oracle.check_osss_extended(ev, alg, _subset(subset, alg), p),
                       {"algorithm": alg.name})


def v_genub(instance, p, q, algorithm="full", subset=None):
    ev, alg = build_instance(instance, algorithm)
    return _from_check("genub", oracle.check_genub(ev, alg, _subset(subset, alg), _num(p), _num(q)))


def v_genlb(instance, p, algorithm="full", subset=None):
    ev, alg = build_instance(instance, algorithm)
    return _from_check("genlb", oracle.check_genlb(ev, alg, _subset(subset, alg), _num(p)))


def v_genrevbound(instance, p, algorithm="full", subset=None):
    ev, alg = build_instance(instance, algorithm)
    return _from_check("genrevbound", oracle.check_genrevbound(ev, alg, _subset(subset, alg), _num(p)))


def v_kl(p=0.3, q=0.6, n=6, rule="first_success", tol=1e-12):
    rules = {"first_success": oracle.first_success, "never": oracle.never}
    if rule not in rules:
        raise SpecError(f"unknown stopping rule {rule!r}")
    lhs, rhs, diff = oracle.kl_stopped(float(p), float(q), int(n), rules[rule])
    return Report("kl-stopped", {"lhs": Term(lhs), "rhs": Term(rhs)}, bool(diff <= tol), None,
                  {"abs_diff": diff, "n": n, "p": p, "q": q, "rule": rule})


def v_pinsker(step=0.01):
    worst = oracle.pinsker_sweep(float(step))
    return Report("pinsker", {"worst_slack": Term(worst)}, worst >= 0, None, {"step": step})


def v_isoperimetry(a=0.3, eps=0.1, c=oracle.ISO_C):
    worst = oracle.isoperimetry_sweep(c=float(c))
    lhs, rhs, ok = oracle.isoperimetry_halfspace_check(float(a), float(eps), float(c))
    return Report("isoperimetry", {"lhs": Term(lhs), "rhs": Term(rhs), "worst_slack": Term(worst)},
                  bool(ok and worst >= 0), None, {"a": a, "eps": eps, "c": c})


def v_ubb1(p, q, R, n, seed, d=2, box=None):
    return eb.check_ubb1(float(p), float(q), int(R), int(n), seed, int(d), box)


def v_ubb2(p, k, R_list, n, seed):
    return eb.check_ubb2(float(p), float(k), R_list, int(n), seed)


def v_lbb(p, k, R_list, n, seed):
    return eb.check_lbb(float(p), float(k), R_list, int(n), seed)


def v_two_arm(R, n, seed, p=0.5, model=None, r=1.0):
    if model is not None:
        return eg.check_two_arm_square_gaussian(_model(model), float(r), float(R), int(n), seed)
    return eb.check_two_arm_square(int(R), int(n), seed, float(p))


def v_truncation(r_list, n, seed, R=16.0, ell=0.0, mesh=0.25, k=1.0):
    return eg.check_truncation(r_list, float(R), float(ell), int(n), seed, float(mesh), float(k))


def v_russo(model, s, R, n, seed, k=1.0, h=eg.FD_STEP):
    return eg.check_gaussian_russo(_model(model), float(s), float(R), int(n), seed, float(k), float(h))


def v_lbderiv(model, s, R, n, seed, subset="all", k=1.0, algorithm="random-line", h=eg.FD_STEP):
    return eg.check_lbderiv(_model(model), float(s), float(R), int(n), seed, subset, float(k), algorithm, float(h))


def v_ubgf(variant, seed, **params):
    if "model" in params:
        params["model"] = _model(params["model"])
    return eg.check_ubgf(variant, seed=seed, **params)


def v_lbgf(model, k, R_list, n, seed, variant=1):
    return eg.check_lbgf(_model(model), float(k), R_list, int(n), seed, int(variant))


def v_square_symmetry(seed, R=32.0, n=4000, mesh=0.25, r=3.0, n_fine=None, tol=0.05):
    return eg.check_square_symmetry(float(R), int(n), seed, float(mesh), float(r), n_fine, float(tol))


CHECKS = {
    "osss": v_osss, "genub": v_genub, "genlb": v_genlb, "genrevbound": v_genrevbound,
    "kl-stopped": v_kl, "pinsker": v_pinsker, "isoperimetry": v_isoperimetry,
    "ubb1": v_ubb1, "ubb2": v_ubb2, "lbb": v_lbb, "two-arm-square": v_two_arm,
    "truncation": v_truncation, "gaussian-russo": v_russo, "lbderiv": v_lbderiv,
    "ubgf": v_ubgf, "lbgf": v_lbgf, "square-symmetry": v_square_symmetry,
}


def run_check(name: str, params: dict, seed: int) -> Report:
    if name not in CHECKS:
        raise SpecError(f"unknown check {name!r}; known: {sorted(CHECKS)}")
    fn = CHECKS[name]
    sig = inspect.signature(fn)
    kw = dict(params)
    if "seed" in sig.parameters:
        kw["seed"] = seed
    try:
        sig.bind(**kw)
    except TypeError as exc:
        raise SpecError(f"bad parameters for {name}: {exc}") from None
    return fn(**kw)


# --------------------------------------------------------------- algorithms
def build_algorithm(d: dict, model):
    """Algorithm from {"name", "R", "k", "s", "d"}; Gaussian ones use the model's kernel."""
    _only(d, {"name", "R", "k", "s", "d"}, "algorithm")
    name = d.get("name")
    R, k = d.get("R"), _num(d.get("k", 1))
    if R is None:
        raise SpecError("algorithm needs R")
    if name == "origin-cluster":
        return OriginCluster(int(R), int(d.get("d", 2)))
    if name == "hyperplane":
        return HyperplaneSweep(k, int(R), int(d.get("d", 2)))
    if name == "interface":
        return Interface(k, int(R))
    if not isinstance(model, GaussianModel):
        raise SpecError(f"{name!r} needs a Gaussian model")
    q, s = model.kernel, d.get("s")
    table = {
        "gaussian-line": lambda: GaussianLine(q, float(k), float(R), s, "random"),
        "gaussian-left-line": lambda: GaussianLine(q, float(k), float(R), s, "left"),
        "gaussian-level-line": lambda: GaussianLevelLine(q, float(k), float(R), s),
        "gaussian-one-arm": lambda: GaussianOneArm(q, float(R), s),
        "annulus": lambda: AnnulusSeed(q, float(R), s),
    }
    if name not in table:
        raise SpecError(f"unknown algorithm {name!r}")
    return table[name]()


def bound_check(alg_spec: dict, model, n: int, seed: int) -> Report:
    name, R, k = alg_spec["name"], alg_spec["R"], float(alg_spec.get("k", 1))
    if name == "origin-cluster":
        return er.check_origin_cluster_bound(model.p, int(R), n, seed, model.d)
    if name == "hyperplane":
        return er.check_hyperplane_bound(model.p, int(R), n, seed, k, model.d)
    if name == "interface":
        return er.check_interface_bound(model.p, int(R), n, seed, k)
    variants = {"gaussian-line": "random", "gaussian-left-line": "left", "gaussian-level-line": "level"}
    if name in variants:
        return er.check_gaussian_line_bound(model, float(R), n, seed, variants[name], k)
    if name == "annulus":
        return er.check_annulus_bound(model, float(R), n, seed)
    raise SpecError(f"no revealment bound for {name!r}")


# ----------------------------------------------------------------- commands
def _write(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(spec: dict, seed: int, out) -> int:
    _only(spec, {"model", "event", "events", "R", "n", "seed", "out"}, "spec")
    model = _model(spec.get("model"))
    events = spec.get("events") or ([spec["event"]] if "event" in spec else None)
    if not events:
        raise SpecError("simulate needs event or events")
    n = int(spec.get("n", 0))
    buf = io.StringIO()
    buf.write(f"# percolab simulate seed={seed} spec_sha256={spec_hash(spec)}\n")
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for e in events:
        if not isinstance(e, dict):
            raise SpecError("event must be an object")
        kind = e.get("kind", e.get("event"))
        Rs = spec.get("R") if kind in ("one_arm", "two_arm", "crossing") and spec.get("R") else [None]
        for R in Rs:
            cur = EventSpec.from_dict(e if R is None else {**e, "R": R})
            est = mc_estimate(cur, model, n, seed)
            w.writerow(csv_row(model, cur, est))
    _write(buf.getvalue(), out or spec.get("out"))
    return EXIT_OK


def cmd_verify(check: str, spec: dict, seed: int, out) -> int:
    _only(spec, {"params", "seed", "out"}, "spec")
    rep = run_check(check, spec.get("params", {}), seed)
    doc = rep.as_dict()
    doc.update({"seed": seed, "spec_sha256": spec_hash(spec)})
    _write(dumps(doc), out or spec.get("out"))
    return EXIT_OK if rep.verdict else EXIT_VERDICT


def read_points(path) -> tuple[list, list]:
    text = Path(path).read_text()
    rows = list(csv.DictReader(line for line in text.splitlines() if not line.startswith("#")))
    if not rows:
        raise InvalidData("no data rows")
    if set(CSV_FIELDS) - set(rows[0]):
        raise InvalidData("CSV does not follow the estimator schema")
    groups = {(r["model"], r["event"], r["param"], r["k"]) for r in rows}
    if len(groups) != 1:
        raise InvalidData(f"rows mix {len(groups)} model/event/parameter groups")
    try:
        pts = [(float(r["R"]), float(r["estimate"]), float(r["stderr"])) for r in rows]
    except ValueError as exc:
        raise InvalidData(str(exc)) from None
    return pts, sorted({int(r["seed"]) for r in rows})


def cmd_fit(path, kind: str, out, plot) -> int:
    pts, seeds = read_points(path)
    fit = fit_power_law(pts, "eta1 proxy") if kind == "power" else fit_exponential_decay(pts, "decay rate")
    doc = fit.as_dict()
    doc.update({"seeds": seeds, "input_sha256": hashlib.sha256(Path(path).read_bytes()).hexdigest()})
    plot = plot or str(Path(out).with_suffix(".plot.csv") if out else Path(path).with_suffix(".plot.csv"))
    with open(plot, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        xl = "log_R" if kind == "power" else "R"
        w.writerow([xl, "log_P", "log_P_stderr", "log_P_fit"])
        for R, P, s in pts:
            x = math.log(R) if kind == "power" else R
            w.writerow([repr(x), repr(math.log(P)), repr(s / P), repr(fit.intercept + fit.slope * x)])
    doc["plot_data"] = plot
    _write(dumps(doc), out)
    return EXIT_OK


def cmd_oracle(spec: dict, out) -> int:
    _only(spec, {"instance", "algorithm", "p", "quantities", "subset", "seed", "out"}, "spec")
    ev, alg = build_instance(spec.get("instance", {}), spec.get("algorithm", "full"))
    ps = spec.get("p", "1/2")
    ps = ps if isinstance(ps, list) else [ps]
    qs = spec.get("quantities", ["probability"])
    _only({q: 0 for q in qs}, {"probability", "influence", "derivative", "revealment", "conditional_variance"},
          "quantities")
    results = []
    for p in ps:
        p = _num(p)
        row = {"p": p}
        if "probability" in qs:
            row["probability"] = oracle.enumerate_probability(ev, ev.support, p)
        if "influence" in qs:
            row["influence"] = {int(e): oracle.enumerate_influence(ev, int(e), p) for e in ev.support}
        if "derivative" in qs:
            row["derivative"] = math.fsum(float(oracle.enumerate_pivotal_derivative(ev, int(e), p))
                                          for e in ev.support)
        if "revealment" in qs:
            exr = oracle.enumerate_revealment(alg, p)
            row["revealment"] = {"rev": exr.rev, "expected_size": exr.expected_size, "determines": exr.determines}
        if "conditional_variance" in qs:
            row["conditional_variance"] = oracle.enumerate_conditional_variance(
                ev, _subset(spec.get("subset"), alg), p, edges=alg.units)
        if isinstance(p, Fraction) and "probability" in row and isinstance(row["probability"], Fraction):
            row["probability_exact"] = str(row["probability"])
        results.append(row)
    doc = {"instance": spec.get("instance"), "algorithm": alg.name, "event": ev.name,
           "n_edges": int(len(ev.support)), "results": results, "spec_sha256": spec_hash(spec),
           "seed": spec.get("seed", 0)}
    _write(dumps(doc), out or spec.get("out"))
    return EXIT_OK


def cmd_revealments(spec: dict, seed: int, out) -> int:
    _only(spec, {"model", "algorithm", "n", "bound", "seed", "out"}, "spec")
    model = _model(spec.get("model"))
    alg_spec = spec.get("algorithm")
    if not isinstance(alg_spec, dict):
        raise SpecError("algorithm must be an object")
    alg = build_algorithm(alg_spec, model)
    n = int(spec.get("n", 0))
    table = er.estimate_revealments(alg, model, n, seed)
    doc = {"algorithm": alg.name, "model": model_dict(model), "n": table.n, "rev": table.rev,
           "stderr": table.stderr, "expected_size": table.mean_size, "expected_size_stderr": table.size_stderr,
           "seed": seed, "spec_sha256": spec_hash(spec)}
    code = EXIT_OK
    if spec.get("bound"):
        rep = bound_check(alg_spec, model, n, seed)
        doc["bound"] = rep.as_dict()
        code = EXIT_OK if rep.verdict else EXIT_VERDICT
    _write(dumps(doc), out or spec.get("out"))
    return code


# -------------------------------------------------------------------- main
def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="percolab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="JSON experiment spec")
    common.add_argument("--seed", type=int, help="master seed (overrides spec and PERCOLAB_SEED)")
    common.add_argument("--workers", type=int, default=1, help="worker processes (never changes results)")
    common.add_argument("--out", help="output path (default stdout)")
    sub = ap.add_subparsers(dest="cmd", required=True)
    sub.add_parser("simulate", parents=[common], help="MC estimates as CSV rows")
    v = sub.add_parser("verify", parents=[common], help="run an inequality check")
    v.add_argument("check", help=", ".join(sorted(CHECKS)))
    f = sub.add_parser("fit", parents=[common], help="power-law or exponential fit of a CSV")
    f.add_argument("csv")
    f.add_argument("--kind", choices=("power", "exp"), default="power")
    f.add_argument("--plot", help="plot-data CSV path")
    sub.add_parser("oracle", parents=[common], help="exact enumeration fixtures")
    sub.add_parser("revealments", parents=[common], help="revealment table (and bound check)")
    return ap


def _load(path) -> dict:
    if not path:
        raise SpecError("--spec is required")
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read spec: {exc}") from None
    if not isinstance(spec, dict):
        raise SpecError("spec must be a JSON object")
    return spec


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise SpecError("--workers must be >= 1")
        set_workers(args.workers)
        if args.cmd == "fit":
            return cmd_fit(args.csv, args.kind, args.out, args.plot)
        spec = _load(args.spec)
        seed = resolve_seed(args.seed, spec)
        if args.cmd == "simulate":
            return cmd_simulate(spec, seed, args.out)
        if args.cmd == "verify":
            return cmd_verify(args.check, spec, seed, args.out)
        if args.cmd == "oracle":
            return cmd_oracle(spec, args.out)
        return cmd_revealments(spec, seed, args.out)
    except oracle.ResourceLimit as exc:
        print(f"percolab: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (SpecError, InvalidParameter, InvalidData, InvalidQuery, UnsupportedDimension,
            oracle.ContractViolation, KeyError, TypeError, ValueError, OSError) as exc:
        print(f"percolab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
