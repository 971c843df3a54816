"""Command-line interface: state construction, bounds, noise scans, self-tests.

Exit codes: 0 success, 2 validation failure, 3 solver nonconvergence,
4 certification hypothesis unmet.  Scan rows are computed concurrently
(HARDYLAB_WORKERS processes, default all cores) with per-point seeds
derived from the master seed, so the CSV is byte-identical for identical
flags regardless of the worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .behavior import (Scenario, hardy_statistics, joint_distribution,
                       measurements_from_pairs)
from .errors import (HypothesisUnmetError, NumericError, ValidationError)
from .linalg import StateVector
from .npa import npa_upper_bound
from .polytope import BoundQuery, local_max, nosignaling_max
from .selftest import ObservablePair, canonical_observables, selftest_report
from .states import (MeasurementPair, hardy_state, is_genuinely_entangled,
                     pmax)
from .variational import lower_bound

SCHEMA = 1
SCAN_HEADER = ("epsilon,local,no_signaling,npa_upper,npa_level,"
               "variational_lower,restarts,seed")
ROW_SLACK = 2e-3


def _pairs_from_spec(spec: dict) -> list[MeasurementPair]:
    pairs = []
    for entry in spec["pairs"]:
        are, aim = entry["alpha"]
        bre, bim = entry["beta"]
        pairs.append(MeasurementPair(complex(are, aim), complex(bre, bim)))
    return pairs


def load_state_spec(path: str):
    """Parse a state spec file: measurement pairs, optional amplitudes."""
    with open(path) as fh:
        spec = json.load(fh)
    if spec.get("schema") != SCHEMA:
        raise ValidationError(f"unsupported schema {spec.get('schema')!r}")
    n = int(spec["n"])
    pairs = _pairs_from_spec(spec) if "pairs" in spec else None
    state = None
    if "amplitudes" in spec:
        amp = spec["amplitudes"]
        amps = np.array(amp["re"], dtype=float) + 1j * np.array(amp["im"], dtype=float)
        dims = tuple(int(d) for d in amp.get("dims", [2] * n))
        state = StateVector(dims, amps)
    return n, pairs, state


def load_observables(path: str) -> list[ObservablePair]:
    with open(path) as fh:
        spec = json.load(fh)
    if spec.get("schema") != SCHEMA:
        raise ValidationError(f"unsupported schema {spec.get('schema')!r}")
    out = []
    for party in spec["parties"]:
        mats = []
        for key in ("a1", "a2"):
            entry = party[key]
            mats.append(np.array(entry["re"], dtype=float)
                        + 1j * np.array(entry["im"], dtype=float))
        out.append(ObservablePair(a1=mats[0], a2=mats[1]))
    return out


def cmd_state(args) -> int:
    if args.spec:
        n, pairs, state = load_state_spec(args.spec)
        if pairs is None:
            raise ValidationError("state spec must carry measurement pairs")
    else:
        if args.n is None or args.alpha_sq is None:
            raise ValidationError("state needs --n and --alpha-sq (or --spec)")
        n = args.n
        pairs = [MeasurementPair.from_alpha_sq(args.alpha_sq)] * n
        state = None
    if state is None:
        state = hardy_state(n, pairs)
    stats = hardy_statistics(joint_distribution(state, measurements_from_pairs(pairs)))
    doc = {
        "schema": SCHEMA,
        "kind": "state",
        "n": n,
        "dims": list(state.dims),
        "pairs": [{"alpha": [p.alpha.real, p.alpha.imag],
                   "beta": [p.beta.real, p.beta.imag]} for p in pairs],
        "amplitudes": {
            "re": [float(v) for v in state.amps.real],
            "im": [float(v) for v in state.amps.imag],
            "dims": list(state.dims),
        },
        "success_probability": stats.p,
        "zero_residuals": [float(z) for z in stats.zeros],
        "genuinely_entangled": bool(is_genuinely_entangled(state, tol=args.tol)),
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_pmax(args) -> int:
    res = pmax(args.n)
    print(f"t={res.t:.12f}, p={res.p_max:.12f}")
    return 0


def _bound_value(method: str, n: int, epsilon: float, level: int,
                 restarts: int, seed: int, tol: float):
    if method == "local":
        sol = local_max(BoundQuery(n, epsilon))
        return sol.value, {"status": sol.status}
    if method == "ns":
        sol = nosignaling_max(BoundQuery(n, epsilon))
        return sol.value, {"status": sol.status}
    if method == "npa":
        value = npa_upper_bound(Scenario(n), level, epsilon, tol=tol)
        return value, {"level": level, "tol": tol}
    if method == "variational":
        if n != 3:
            raise ValidationError("the variational family is three-party only")
        res = lower_bound(epsilon, restarts=restarts, seed=seed)
        return res.value, {
            "restarts": res.restarts_used,
            "seed": res.seed,
            "constraints": [float(v) for v in res.constraint_values],
        }
    raise ValidationError(f"unknown method {method!r}")


def cmd_bounds(args) -> int:
    if not 0.0 <= args.epsilon <= 0.3:
        raise ValidationError(f"epsilon = {args.epsilon!r} outside [0, 0.3]")
    value, diag = _bound_value(args.method, args.n, args.epsilon, args.level,
                               args.restarts, args.seed, args.tol)
    print(f"{value:.6f}")
    print(json.dumps({"method": args.method, "epsilon": args.epsilon,
                      "n": args.n, "value": value, **diag}))
    return 0


def scan_point_seed(seed: int, idx: int) -> int:
    return (seed * 1_000_003 + idx) % (2 ** 63)


def _scan_point(task):
    idx, epsilon, level, restarts, seed, tol = task
    try:
        q = BoundQuery(3, epsilon)
        loc = local_max(q).value
        ns = nosignaling_max(q).value
        npa = npa_upper_bound(Scenario(3), level, epsilon, tol=tol)
        var = lower_bound(epsilon, restarts=restarts,
                          seed=scan_point_seed(seed, idx)).value
        return idx, (loc, ns, npa, var), None
    except (ValidationError, NumericError) as exc:
        return idx, None, f"{type(exc).__name__}: {exc}"


def _check_row(epsilon, loc, ns, npa, var) -> list[str]:
    problems = []
    if loc > npa + ROW_SLACK:
        problems.append(f"local {loc:.6f} exceeds npa {npa:.6f}")
    if var > npa + ROW_SLACK:
        problems.append(f"variational {var:.6f} exceeds npa {npa:.6f}")
    if npa > ns + ROW_SLACK:
        problems.append(f"npa {npa:.6f} exceeds no-signaling {ns:.6f}")
    return [f"epsilon={epsilon:.6f}: {p}" for p in problems]


def cmd_scan(args) -> int:
    if args.steps < 2:
        raise ValidationError("need at least two grid points")
    if not 0.0 <= args.eps_from < args.eps_to <= 0.25:
        raise ValidationError("grid must satisfy 0 <= from < to <= 0.25")
    grid = [args.eps_from + k * (args.eps_to - args.eps_from) / (args.steps - 1)
            for k in range(args.steps)]
    tasks = [(k, eps, args.level, args.restarts, args.seed, args.tol)
             for k, eps in enumerate(grid)]
    workers = int(os.environ.get("HARDYLAB_WORKERS", os.cpu_count() or 1))
    results = {}
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for idx, row, err in pool.map(_scan_point, tasks):
                results[idx] = (row, err)
    else:
        for task in tasks:
            idx, row, err = _scan_point(task)
            results[idx] = (row, err)

    problems = []
    prev = None
    lines = [SCAN_HEADER]
    for k, eps in enumerate(grid):
        row, err = results[k]
        if err is not None:
            problems.append(f"epsilon={eps:.6f}: {err}")
            lines.append(f"{eps:.6f},nan,nan,nan,{args.level},nan,"
                         f"{args.restarts},{args.seed}")
            prev = None
            continue
        loc, ns, npa, var = row
        problems += _check_row(eps, loc, ns, npa, var)
        if prev is not None:
            for name, cur, old in (("no_signaling", ns, prev[1]),
                                   ("npa_upper", npa, prev[2]),
                                   ("variational_lower", var, prev[3])):
                if cur < old - ROW_SLACK:
                    problems.append(
                        f"epsilon={eps:.6f}: {name} decreased from {old:.6f} to {cur:.6f}")
        prev = (loc, ns, npa, var)
        lines.append(f"{eps:.6f},{loc:.9f},{ns:.9f},{npa:.9f},{args.level},"
                     f"{var:.9f},{args.restarts},{args.seed}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if problems:
        for p in problems:
            print(f"scan check failed: {p}", file=sys.stderr)
        return 3
    return 0


def cmd_selftest(args) -> int:
    if args.state:
        n, pairs, state = load_state_spec(args.state)
        if state is None:
            if pairs is None:
                raise ValidationError("state spec carries neither pairs nor amplitudes")
            state = hardy_state(n, pairs)
    elif args.canonical:
        n = args.canonical
        state = hardy_state(n, [MeasurementPair.from_alpha_sq(pmax(n).t)] * n)
    else:
        raise ValidationError("selftest needs --state or --canonical")
    if args.observables:
        observables = load_observables(args.observables)
    else:
        observables = canonical_observables(len(state.dims))
    report = selftest_report(state, observables, tol=args.tol)
    ok = report.total_fidelity >= 1.0 - args.tol
    lines = ["selftest-report/1",
             f"total_fidelity {report.total_fidelity:.12f}",
             f"observed_p {report.observed_p:.12f}",
             f"max_zero_term {float(np.max(report.observed_zeros)):.3e}",
             "junk_dims " + ",".join(str(d) for d in report.junk_dims),
             f"degenerate_weight {report.degenerate_weight:.12f}",
             f"verdict {'PASS' if ok else 'FAIL'} tol {args.tol:.1e}"]
    for party, decomp in enumerate(report.decompositions, start=1):
        angles = ",".join(f"{b.angle:.9f}" for b in decomp.two_dim_blocks())
        degen = sum(1 for b in decomp.blocks if b.degenerate)
        lines.append(f"party {party} blocks2d {len(decomp.two_dim_blocks())} "
                     f"angles {angles or '-'} degenerate {degen}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(f"total_fidelity {report.total_fidelity:.12f}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hardylab",
        description="n-party Hardy states, nonlocality bounds and self-tests")
    sub = parser.add_subparsers(dest="command", required=True)

    p_state = sub.add_parser("state", help="construct a Hardy state")
    p_state.add_argument("--n", type=int)
    p_state.add_argument("--alpha-sq", dest="alpha_sq", type=float)
    p_state.add_argument("--spec", type=str)
    p_state.add_argument("--out", type=str)
    p_state.add_argument("--tol", type=float, default=1e-9)
    p_state.set_defaults(func=cmd_state)

    p_pmax = sub.add_parser("pmax", help="optimal success probability")
    p_pmax.add_argument("--n", type=int, required=True)
    p_pmax.set_defaults(func=cmd_pmax)

    p_bounds = sub.add_parser("bounds", help="one noisy bound value")
    p_bounds.add_argument("--method", required=True,
                          choices=("local", "ns", "npa", "variational"))
    p_bounds.add_argument("--epsilon", type=float, required=True)
    p_bounds.add_argument("--n", type=int, default=3)
    p_bounds.add_argument("--level", type=int, default=2)
    p_bounds.add_argument("--restarts", type=int, default=50)
    p_bounds.add_argument("--seed", type=int, default=0)
    p_bounds.add_argument("--tol", type=float, default=1e-6)
    p_bounds.set_defaults(func=cmd_bounds)

    p_scan = sub.add_parser("scan", help="noise scan (CSV)")
    p_scan.add_argument("--eps-from", dest="eps_from", type=float, default=0.0)
    p_scan.add_argument("--eps-to", dest="eps_to", type=float, default=0.25)
    p_scan.add_argument("--steps", type=int, default=26)
    p_scan.add_argument("--level", type=int, default=2)
    p_scan.add_argument("--restarts", type=int, default=50)
    p_scan.add_argument("--seed", type=int, default=0)
    p_scan.add_argument("--tol", type=float, default=1e-6)
    p_scan.add_argument("--out", type=str)
    p_scan.set_defaults(func=cmd_scan)

    p_self = sub.add_parser("selftest", help="blockwise certification report")
    p_self.add_argument("--state", type=str)
    p_self.add_argument("--canonical", type=int)
    p_self.add_argument("--observables", type=str)
    p_self.add_argument("--tol", type=float, default=1e-6)
    p_self.add_argument("--out", type=str)
    p_self.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except HypothesisUnmetError as exc:
        print(f"hypothesis unmet: {exc}", file=sys.stderr)
        return 4
    except (ValueError, KeyError, OSError) as exc:
        # ValidationError and malformed input files (JSON decoding errors
        # subclass ValueError, absent keys raise KeyError) all map to 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
