"""Command-line front end: ``plan``, ``run``, ``estimate``, ``scaling``, ``verify``.

Commands communicate only through JSON/CSV files. Every output embeds the
manifest of the command that produced it and its SHA-256; no timestamps are
written, so re-running a manifest's ``argv`` reproduces the files byte for
byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .circuits import (
    Circuit,
    Schedule,
    Variant,
    circuits_for_subsets,
)
from .estimate import (
    Method,
    MleConfig,
    delta_err_by_cnot_count,
    direct_estimate_all,
    fidelity,
    fit_scaling,
    group_records,
    mle_estimate,
)
from .experiments import error_sweep, loglog_slope, sweep_observations
from .sim import (
    RNG_NAME,
    RNG_STREAM_RULE,
    CapacityError,
    MeasurementRecord,
    NoiseSpec,
    StateSpec,
    make_reference_state,
    run_plan,
)
from .subsets import (
    ElementIndex,
    SubsetKey,
    all_elements,
    plan_subsets,
    plan_to_json,
    threshold_plan,
)

logger = logging.getLogger("seeqst")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAPACITY = 3


class UsageError(ValueError):
    pass


# --- file helpers -------------------------------------------------------------------


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def manifest_hash(manifest: dict) -> str:
    return hashlib.sha256(json.dumps(manifest, sort_keys=True).encode()).hexdigest()


def make_manifest(command: str, argv, **fields) -> dict:
    return {"command": command, "argv": list(argv), "tool_version": __version__, **fields}


def write_json(path: Path, doc: dict, manifest: dict) -> None:
    doc = {"manifest": manifest, "manifest_sha256": manifest_hash(manifest), **doc}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(doc))


def read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{path} does not exist")
    return json.loads(path.read_text())


def parse_elements(text: str, n_qubits: int) -> list[ElementIndex]:
    if text.startswith("@"):
        text = Path(text[1:]).read_text().replace("\n", ",")
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise UsageError("--elements is empty")
    return [ElementIndex.parse(p, n_qubits) for p in parts]


def load_diagonal(path: str, n_qubits: int) -> np.ndarray:
    doc = read_json(path)
    if isinstance(doc, list):
        return np.asarray(doc, dtype=float)
    for rec in doc.get("records", []):
        if rec["mask"] == 0:
            return MeasurementRecord.from_json(rec).frequencies(n_qubits)
    raise UsageError(f"{path} holds neither a population list nor a diagonal record")


# --- commands ---------------------------------------------------------------------


def cmd_plan(args, argv) -> int:
    n = args.n_qubits
    if args.full and args.elements:
        raise UsageError("--full and --elements are mutually exclusive")
    if not args.full and not args.elements:
        raise UsageError("give either --full or --elements")
    elements = all_elements(n) if args.full else parse_elements(args.elements, n)
    if args.threshold is not None:
        if args.diagonal is None:
            raise UsageError("--threshold needs --diagonal")
        keys = threshold_plan(load_diagonal(args.diagonal, n), elements, args.threshold)
    else:
        keys = plan_subsets(elements)

    variant = Variant(args.variant.upper())
    schedule = Schedule(args.connectivity.upper().replace("-", "_"))
    circuits = circuits_for_subsets(keys, variant, schedule)

    out = Path(args.out)
    manifest = make_manifest(
        "plan",
        argv,
        n_qubits=n,
        variant=variant.value,
        schedule=schedule.value,
        threshold=args.threshold,
    )
    plan_doc = plan_to_json(keys)
    plan_doc.update(
        variant=variant.value,
        schedule=schedule.value,
        circuit_count=len(circuits),
        circuits_file="circuits.json",
    )
    write_json(out / "plan.json", plan_doc, manifest)
    write_json(out / "circuits.json", {"circuits": [c.to_json() for c in circuits]}, manifest)

    max_layers = max((c.two_qubit_layers for c in circuits), default=0)
    max_cnots = max((c.cnot_count for c in circuits), default=0)
    print(f"{len(keys)} subsets, {len(circuits)} circuits ({variant.value}, {schedule.value})")
    print(f"max two-qubit layers {max_layers}, max CNOTs per circuit {max_cnots}")
    return EXIT_OK


def cmd_run(args, argv) -> int:
    plan_path = Path(args.plan)
    plan = read_json(plan_path)
    circuits_doc = read_json(plan_path.parent / plan.get("circuits_file", "circuits.json"))
    circuits = [Circuit.from_json(c) for c in circuits_doc["circuits"]]
    n = int(plan["n_qubits"])
    noise = NoiseSpec.parse(args.noise)
    state_spec = StateSpec.parse(args.state)
    if args.shots < 1:
        raise UsageError("--shots must be >= 1")

    # pure references stay statevectors when noiseless, so larger N fits
    vec = state_spec.vector(n)
    state = vec if vec is not None and noise.is_noiseless else make_reference_state(state_spec, n)
    records = run_plan(state, circuits, args.shots, noise, args.seed, args.jobs, args.exact)

    manifest = make_manifest(
        "run",
        argv,
        plan_sha256=plan["manifest_sha256"],
        n_qubits=n,
        state=str(state_spec),
        noise=str(noise),
        shots=args.shots,
        seed=args.seed,
        exact=args.exact,
    )
    doc = {
        "n_qubits": n,
        "variant": plan["variant"],
        "schedule": plan["schedule"],
        "state": str(state_spec),
        "rng": {"generator": RNG_NAME, "stream_rule": RNG_STREAM_RULE, "master_seed": args.seed},
        "records": [r.to_json() for r in records],
    }
    write_json(Path(args.out) / "records.json", doc, manifest)
    print(f"{len(records)} records written to {Path(args.out) / 'records.json'}")
    return EXIT_OK


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def cmd_estimate(args, argv) -> int:
    doc = read_json(args.records)
    n = int(doc["n_qubits"])
    schedule = Schedule(doc.get("schedule", "CHAIN"))
    records = [MeasurementRecord.from_json(r) for r in doc["records"]]
    if not records:
        raise UsageError("records file is empty")
    method = Method(args.method.upper())
    keys = [SubsetKey(mask, n) for mask in sorted(group_records(records))]
    truth = make_reference_state(StateSpec.parse(args.truth), n) if args.truth else None

    config: dict = {}
    fid = None
    if method is Method.DIRECT:
        values = direct_estimate_all(records, n, schedule, args.jobs)
    else:
        cfg = MleConfig(max_iters=args.max_iters, learning_rate=args.learning_rate, seed=args.mle_seed)
        result = mle_estimate(records, n, cfg, schedule)
        config = {**cfg.to_json(), "final_loss": result.loss, "iterations": result.iterations, "converged": result.converged}
        values = {
            ElementIndex(r, r ^ k.mask, n): complex(result.rho[r, r ^ k.mask])
            for k in keys
            for r in range(1 << n)
        }
        if truth is not None:
            fid = fidelity(result.rho, truth)

    by_cnot = delta_err_by_cnot_count(values, truth, keys) if truth is not None else {}
    elements = [
        {"row": e.row, "col": e.col, "re": v.real, "im": v.imag}
        for e, v in sorted(values.items(), key=lambda item: (item[0].row, item[0].col))
    ]
    manifest = make_manifest(
        "estimate",
        argv,
        records_sha256=doc["manifest_sha256"],
        method=method.value,
        truth=args.truth,
    )
    report = {
        "method": method.value,
        "n_qubits": n,
        "elements": elements,
        "metrics": {"fidelity": fid, "delta_err_by_cnot_count": {str(k): v for k, v in by_cnot.items()}},
        "config": config,
        "rng": doc.get("rng", {}),
    }
    out = Path(args.out)
    write_json(out / "report.json", report, manifest)
    if args.csv:
        groups: dict = {}
        for k in keys:
            groups.setdefault(max(k.m - 1, 0), []).append(k)
        rows = [(c, len(groups[c]), len(groups[c]) << n, by_cnot.get(c, "")) for c in sorted(groups)]
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        Path(args.csv).write_text(_csv_text(("cnot_count", "n_subsets", "n_elements", "delta_err"), rows))
    print(f"{method.value}: {len(elements)} elements" + (f", fidelity {fid:.6f}" if fid is not None else ""))
    for c, v in by_cnot.items():
        print(f"  {c} CNOTs: delta_err {v:.3e}")
    return EXIT_OK


def cmd_scaling(args, argv) -> int:
    if not args.n_qubits or not args.budgets or args.states < 1:
        raise UsageError("empty sweep: give --n-qubits, --budgets and --states >= 1")
    variant = Variant(args.variant.upper())
    rows, observations, slopes = [], [], {}
    for n in args.n_qubits:
        sweep = error_sweep(n, args.budgets, args.states, variant, args.seed)
        rows.extend(sweep.rows())
        observations.extend(sweep_observations(sweep))
        mean = sweep.mean()
        for m in range(n + 1):
            if len(sweep.budgets) >= 2:
                slopes[f"N={n},M={m}"] = loglog_slope(sweep.budgets, mean[:, m])

    model = fit_scaling(observations)  # raises on a sweep too small to fit
    per_budget = {}
    for n_, _m, s, err in observations:
        per_budget.setdefault(s, []).append(err)
    if len(per_budget) >= 2:
        budgets = sorted(per_budget)
        slopes["overall"] = loglog_slope(budgets, [np.mean(per_budget[s]) for s in budgets])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ("n_qubits", "m", "samples", "variant", "mean_delta_err", "std_delta_err", "n_states")
    (out / "observations.csv").write_text(_csv_text(header, rows))
    manifest = make_manifest(
        "scaling",
        argv,
        n_qubits=list(args.n_qubits),
        budgets=list(args.budgets),
        states=args.states,
        variant=variant.value,
        seed=args.seed,
    )
    write_json(out / "model.json", {"model": model.to_json(), "loglog_slopes": slopes}, manifest)
    print(f"{len(rows)} observation rows; fitted {model.to_json()}")
    for key, slope in slopes.items():
        print(f"  {key}: slope {slope:+.3f}")
    return EXIT_OK


def cmd_verify(args, argv) -> int:
    from .verify import run_checks

    results = run_checks(args.max_qubits, min(args.max_qubits, 4), min(args.max_qubits, 5))
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else 1


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seeqst", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="map requested elements to subsets and circuits")
    p.add_argument("-n", "--n-qubits", type=int, required=True)
    p.add_argument("--full", action="store_true", help="plan the whole density matrix")
    p.add_argument("--elements", help="comma list of row:col, or @file")
    p.add_argument("--variant", default="seeqst", choices=["seeqst", "local"])
    p.add_argument("--connectivity", default="chain", choices=["chain", "all-to-all"])
    p.add_argument("--threshold", type=float, help="drop subsets below this sqrt(p_i p_j)")
    p.add_argument("--diagonal", help="JSON population list or records file with the diagonal record")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="simulate a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--state", default="plusy", help="plusy | ghz-i | random:<seed>")
    p.add_argument("--shots", type=int, default=16384)
    p.add_argument("--noise", default="none", help="none | ad:<gamma> | depol:<p>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true", help="also store exact outcome probabilities")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("estimate", help="reconstruct elements from records")
    p.add_argument("--records", required=True)
    p.add_argument("--method", default="direct", choices=["direct", "mle"])
    p.add_argument("--truth", help="reference state for metrics: plusy | ghz-i | random:<seed>")
    p.add_argument("--csv", help="write delta_err by CNOT count to this CSV")
    p.add_argument("--max-iters", type=int, default=MleConfig.max_iters)
    p.add_argument("--learning-rate", type=float, default=MleConfig.learning_rate)
    p.add_argument("--mle-seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("scaling", help="error-vs-samples sweep and model fit")
    p.add_argument("--n-qubits", type=int, nargs="*", default=[3, 4, 5])
    p.add_argument("--budgets", type=int, nargs="*", default=[2**10, 2**12, 2**14, 2**16])
    p.add_argument("--states", type=int, default=30)
    p.add_argument("--variant", default="local", choices=["local", "seeqst"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("verify", help="run the structural property checks")
    p.add_argument("--max-qubits", type=int, default=8)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
