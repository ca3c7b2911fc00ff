"""Command-line interface: compute measures, verify relations, hunt monogamy violators, sweep families.

State files are JSON::

    {"dims": [2, 2], "labels": ["A", "B"], "kind": "pure",
     "data": [[re, im], ...]}

``kind`` is ``pure`` (``data`` lists the amplitudes) or ``density``
(``data`` lists rows of the matrix, row-major).  Numbers are written with
17 significant digits so that write -> read -> write is byte-identical.

Exit codes: 0 success, 1 input or usage error, 2 optimizer did not
converge (compute) or a proved relation was violated (verify).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import measures as ms
from . import randgen
from .optimizer import OptimizerConfig
from .qcore import DensityOperator, InvalidStateError, LabelError, PureState, as_density, entropy, mutual_information
from .relations import CHECKS, HOLDS, INCONCLUSIVE, PROVED, VIOLATED, check_superadditivity, run_checks

REPORT_HEADER = ["state_id", "seed", "check", "value_lhs", "value_rhs", "residual", "tolerance", "verdict",
                 "restarts", "converged", "ms"]
SWEEP_HEADER = ["family", "param", "measure", "value", "mutual_information", "s_b", "converged", "restarts", "ms"]

EXTRA_MEASURES = {
    "concurrence": lambda rho, measured=None, config=None: ms.concurrence(rho),
    "eof-closed": lambda rho, measured=None, config=None: ms.eof_two_qubit(rho),
}
COMPUTE_MEASURES = {**ms.MEASURES, **EXTRA_MEASURES}
DILATION_MEASURES = ("uqd-disturbance", "uqd-gain-bound")
FIXTURES = {"ghz": randgen.ghz, "w": randgen.w_state, "bell-product": randgen.bell_product,
            "product": lambda: randgen.product((2, 2, 2))}


class StateFileError(ValueError):
    pass


class UsageError(Exception):
    pass


# ---- state files ---------------------------------------------------------

def _num(x: float) -> str:
    x = float(x)
    if not np.isfinite(x):
        raise StateFileError("data must be finite")
    return format(x, ".17g")


def _pair(z) -> str:
    return f"[{_num(z.real)}, {_num(z.imag)}]"


def dump_state(state) -> str:
    """Canonical JSON text for a PureState or DensityOperator."""
    head = (f'{{"dims": {json.dumps(list(state.dims))}, "labels": {json.dumps(list(state.labels))}, ')
    if isinstance(state, PureState):
        body = ", ".join(_pair(z) for z in state.vector)
        return head + f'"kind": "pure", "data": [{body}]}}\n'
    rows = ",\n  ".join("[" + ", ".join(_pair(z) for z in row) + "]" for row in state.matrix)
    return head + f'"kind": "density", "data": [\n  {rows}\n]}}\n'


def _complex_array(data, shape, what):
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        raise StateFileError(f"{what}: data must be nested arrays of [re, im] number pairs") from None
    if arr.shape != shape + (2,):
        raise StateFileError(f"{what}: data shape {arr.shape[:-1] if arr.ndim else ()} does not match "
                             f"expected {shape} of [re, im] pairs")
    if not np.all(np.isfinite(arr)):
        raise StateFileError(f"{what}: data must be finite")
    return arr[..., 0] + 1j * arr[..., 1]


def parse_state(text: str):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise StateFileError(f"not valid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise StateFileError("state file must be a JSON object")
    missing = [k for k in ("dims", "labels", "kind", "data") if k not in obj]
    if missing:
        raise StateFileError(f"missing field(s): {', '.join(missing)}")
    dims, labels, kind = obj["dims"], obj["labels"], obj["kind"]
    if not isinstance(dims, list) or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in dims):
        raise StateFileError("dims must be a list of positive integers")
    if not isinstance(labels, list) or not all(isinstance(l, str) for l in labels):
        raise StateFileError("labels must be a list of strings")
    if len(labels) != len(dims):
        raise StateFileError(f"{len(labels)} labels but {len(dims)} dims")
    n = int(np.prod(dims))
    try:
        if kind == "pure":
            return PureState(tuple(labels), _complex_array(obj["data"], (n,), "pure"), dims=dims)
        if kind == "density":
            return DensityOperator(tuple(labels), _complex_array(obj["data"], (n, n), "density"), dims=dims)
    except (InvalidStateError, LabelError) as e:
        raise StateFileError(f"invalid state: {e}") from None
    raise StateFileError(f"kind must be 'pure' or 'density', got {kind!r}")


def read_state(path) -> object:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise StateFileError(f"cannot read {path}: {e.strerror}") from None
    return parse_state(text)


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_state(path, state) -> None:
    write_atomic(path, dump_state(state))


# ---- reports -------------------------------------------------------------

def report_row(rep) -> dict:
    return {
        "state_id": rep.state_id,
        "seed": "" if rep.seed is None else rep.seed,
        "check": rep.relation,
        "value_lhs": repr(rep.lhs),
        "value_rhs": repr(rep.rhs),
        "residual": repr(rep.residual),
        "tolerance": repr(rep.tolerance),
        "verdict": rep.verdict,
        "restarts": rep.restarts,
        "converged": str(rep.converged).lower(),
        "ms": f"{rep.ms:.1f}",
    }


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def write_rows(path, header, rows) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        write_atomic(path, json.dumps(rows, indent=1) + "\n")
    else:
        write_atomic(path, _csv_text(header, rows))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            return _jsonable(np.stack([x.real, x.imag], axis=-1))
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


# ---- argument helpers ------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must be comma-separated integers, got {text!r}") from None
    if any(d < 2 for d in dims):
        raise argparse.ArgumentTypeError("every dimension must be >= 2")
    return dims


def param_grid(text: str) -> np.ndarray:
    """Inclusive grid from ``lo:hi:step``."""
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("need step > 0 and hi >= lo")
    n = int(np.floor((hi - lo) / step + 1e-9))
    return np.round(lo + step * np.arange(n + 1), 12)


def _config(args, base: OptimizerConfig | None = None) -> OptimizerConfig:
    cfg = base or OptimizerConfig()
    changes = {}
    for name in ("restarts", "tol", "seed", "outcomes"):
        v = getattr(args, name, None)
        if v is not None:
            changes[name] = v
    return replace(cfg, **changes) if changes else cfg


# ---- compute -----------------------------------------------------------------

def cmd_compute(args) -> int:
    state = read_state(args.state)
    labels = state.labels
    measured = args.measured or labels[-1]
    if measured not in labels:
        raise UsageError(f"measured label {measured!r} not in {list(labels)}")
    if len(labels) < 2:
        raise UsageError("measures need at least two subsystems")
    base = ms.DILATION_CONFIG if args.measure in DILATION_MEASURES else None
    config = _config(args, base)
    rho = as_density(state)
    t0 = time.perf_counter()
    fn = COMPUTE_MEASURES[args.measure]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = fn(rho, measured, config=config)
    elapsed = (time.perf_counter() - t0) * 1e3
    if not isinstance(res, ms.MeasureResult):
        res = ms.MeasureResult(float(res))
    out = {
        "measure": args.measure,
        "measured": measured,
        "value": res.value,
        "converged": res.converged,
        "restarts": res.restarts,
        "evaluations": res.evaluations,
        "ms": round(elapsed, 1),
        "warnings": [str(w.message) for w in caught],
        "diagnostics": _jsonable(res.diagnostics),
    }
    if args.format == "json":
        print(json.dumps(out, indent=1))
    else:
        keys = ["measure", "measured", "value", "converged", "restarts", "evaluations", "ms"]
        row = {k: str(out[k]).lower() if isinstance(out[k], bool) else out[k] for k in keys}
        sys.stdout.write(_csv_text(keys, [row]))
    return 0 if res.converged else 2


# ---- verify ------------------------------------------------------------------

_QUBIT_PAIR_CHECKS = ("kw", "conservation-ef")


def _verify_one(task):
    state_id, seed, psi, relations, config, tol = task
    reps = run_checks(psi, relations, config, state_id=state_id, seed=seed)
    if tol is not None:
        for r in reps:
            r.tolerance = tol
    return reps


def _superadditivity_one(task):
    state_id, seed, index, dims, config, tol = task
    r1 = randgen.random_density(dims, int(np.prod(dims)), seed, stream=2 * index)
    r2 = randgen.random_density(dims, int(np.prod(dims)), seed, stream=2 * index + 1)
    rep = check_superadditivity(r1, r2, config)
    rep.state_id, rep.seed = state_id, seed
    if tol is not None:
        rep.tolerance = tol
    return [rep]


def _map(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def _summary(reps) -> tuple[str, int]:
    counts = {HOLDS: 0, VIOLATED: 0, INCONCLUSIVE: 0}
    bad = 0
    for r in reps:
        counts[r.verdict] += 1
        if r.verdict == VIOLATED and (r.relation in PROVED or r.relation == "superadditivity") and not r.exploratory:
            bad += 1
    line = (f"holds={counts[HOLDS]} violated={counts[VIOLATED]} inconclusive={counts[INCONCLUSIVE]} "
            f"proved_violations={bad}")
    return line, bad


def _tripartite(state, source):
    if isinstance(state, DensityOperator):
        if state.rank() != 1:
            raise UsageError(f"{source}: relations need a pure tripartite state")
        lam, vec = np.linalg.eigh(state.matrix)
        state = PureState(state.space, vec[:, -1])
    if len(state.labels) != 3:
        raise UsageError(f"{source}: relations need exactly three subsystems, got {len(state.labels)}")
    return state


def cmd_verify(args) -> int:
    if args.relation == "all":
        relations = list(CHECKS)
    elif args.relation in CHECKS or args.relation == "superadditivity":
        relations = [args.relation]
    else:
        raise UsageError(f"unknown relation {args.relation!r}; choose from all, superadditivity, {', '.join(CHECKS)}")
    config = _config(args)
    tol = args.tol

    if args.relation == "superadditivity":
        if args.state or args.fixture:
            raise UsageError("superadditivity samples random state pairs; --state/--fixture do not apply")
        if args.samples < 1:
            raise UsageError("--samples must be >= 1")
        dims = args.dims[:2]
        tasks = [(f"pair-{args.seed}-{i}", args.seed, i, dims, config, tol) for i in range(args.samples)]
        reps = [r for rs in _map(_superadditivity_one, tasks, args.jobs) for r in rs]
    else:
        if args.state:
            states = [(Path(args.state).stem, _tripartite(read_state(args.state), args.state))]
        elif args.fixture:
            states = [(args.fixture, FIXTURES[args.fixture]())]
        else:
            if args.samples < 1:
                raise UsageError("--samples must be >= 1")
            if len(args.dims) != 3:
                raise UsageError("--dims needs three dimensions d1,d2,d3")
            states = [(f"haar-{args.seed}-{i}", randgen.haar_pure(args.dims, args.seed, stream=i))
                      for i in range(args.samples)]
        qubits = all(psi.dims[:2] == (2, 2) for _, psi in states)
        if not qubits:
            asked = [r for r in relations if r in _QUBIT_PAIR_CHECKS]
            if args.relation != "all" and asked:
                raise UsageError(f"{asked[0]} needs qubits in the first two subsystems")
            relations = [r for r in relations if r not in _QUBIT_PAIR_CHECKS]
        tasks = [(sid, args.seed, psi, relations, config, tol) for sid, psi in states]
        reps = [r for rs in _map(_verify_one, tasks, args.jobs) for r in rs]

    if args.report:
        write_rows(args.report, REPORT_HEADER, [report_row(r) for r in reps])
    line, bad = _summary(reps)
    print(line)
    return 0 if bad == 0 else 2


# ---- falsify -----------------------------------------------------------------

FALSIFIABLE = ("discord-monogamy",)


def _screen(task):
    state_id, seed, psi, config = task
    return run_checks(psi, ["discord-monogamy"], config, state_id=state_id, seed=seed)[0]


def cmd_falsify(args) -> int:
    if args.samples < 0:
        raise UsageError("--samples must be >= 0")
    if len(args.dims) != 3:
        raise UsageError("--dims needs three dimensions d1,d2,d3")
    screen_cfg = OptimizerConfig(restarts=args.restarts, seed=args.seed)
    confirm_cfg = OptimizerConfig(seed=args.seed)
    states = []
    if args.include_fixtures:
        states += [(name, FIXTURES[name]()) for name in ("w", "ghz", "bell-product")]
    states += [(f"haar-{args.seed}-{i}", randgen.haar_pure(args.dims, args.seed, stream=i))
               for i in range(args.samples)]
    if not states:
        raise UsageError("nothing to test: use --samples >= 1 or --include-fixtures")
    reps = _map(_screen, [(sid, args.seed, psi, screen_cfg) for sid, psi in states], args.jobs)

    # a short search can only overestimate discord, so satisfiers are final while
    # violators are re-checked from their serialized files with the full search
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.report).with_suffix("").with_name(
        Path(args.report).stem + "_violators")
    violators = 0
    final = []
    for (sid, psi), rep in zip(states, reps):
        if rep.verdict == VIOLATED:
            path = out_dir / f"{sid}.json"
            write_state(path, psi)
            again = run_checks(_tripartite(read_state(path), str(path)), ["discord-monogamy"], confirm_cfg,
                               state_id=sid, seed=args.seed)[0]
            rep = again
            if rep.verdict == VIOLATED:
                violators += 1
            else:
                path.unlink()
        final.append(rep)
    satisfiers = sum(1 for r in final if r.verdict == HOLDS and r.residual < -r.tolerance)
    boundary = sum(1 for r in final if abs(r.residual) <= r.tolerance)
    inconclusive = sum(1 for r in final if r.verdict == INCONCLUSIVE)
    write_rows(args.report, REPORT_HEADER, [report_row(r) for r in final])
    print(f"samples={len(final)} violators={violators} satisfiers={satisfiers} boundary={boundary} "
          f"inconclusive={inconclusive} violator_files={out_dir}")
    return 0


# ---- sweep -------------------------------------------------------------------

def cmd_sweep(args) -> int:
    measures = [m.strip() for m in args.measures.split(",") if m.strip()]
    unknown = [m for m in measures if m not in COMPUTE_MEASURES]
    if unknown or not measures:
        raise UsageError(f"unknown measure(s) {unknown}; choose from {sorted(COMPUTE_MEASURES)}")
    if args.family not in ("werner",):
        raise UsageError(f"unknown family {args.family!r}; choose from werner")
    rows = []
    for p in args.param:
        rho = randgen.family(args.family, p=float(p))
        mi = mutual_information(rho, ("A", "B"))
        s_b = entropy(rho.reduce("B"))
        for name in measures:
            base = ms.DILATION_CONFIG if name in DILATION_MEASURES else None
            t0 = time.perf_counter()
            res = COMPUTE_MEASURES[name](rho, "B", config=_config(args, base))
            elapsed = (time.perf_counter() - t0) * 1e3
            if not isinstance(res, ms.MeasureResult):
                res = ms.MeasureResult(float(res))
            rows.append({
                "family": args.family, "param": repr(float(p)), "measure": name, "value": repr(res.value),
                "mutual_information": repr(mi), "s_b": repr(s_b), "converged": str(res.converged).lower(),
                "restarts": res.restarts, "ms": f"{elapsed:.1f}",
            })
    write_rows(args.report, SWEEP_HEADER, rows)
    print(f"rows={len(rows)} params={len(args.param)} measures={','.join(measures)} report={args.report}")
    return 0


# ---- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="uqdiscord", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def opt_flags(p, seed_required=False):
        p.add_argument("--restarts", type=int, help="optimizer restarts (default 24)")
        p.add_argument("--tol", type=float, help="optimizer tolerance / relation tolerance override")
        p.add_argument("--seed", type=int, required=seed_required, help="master seed for every random choice")

    c = sub.add_parser("compute", help="compute one measure on a state file")
    c.add_argument("--state", required=True)
    c.add_argument("--measure", required=True, choices=sorted(COMPUTE_MEASURES))
    c.add_argument("--measured", help="measured subsystem label (default: last label)")
    c.add_argument("--outcomes", type=int, help="number of POVM outcomes (default: a von Neumann measurement)")
    c.add_argument("--format", choices=("json", "csv"), default="json")
    opt_flags(c)
    c.set_defaults(func=cmd_compute)

    v = sub.add_parser("verify", help="check relations on seeded random states or a given state")
    v.add_argument("--relation", required=True, help="relation id, 'superadditivity' or 'all'")
    v.add_argument("--samples", type=int, default=1)
    v.add_argument("--dims", type=_dims, default=(2, 2, 2))
    v.add_argument("--state", help="verify a single tripartite pure state file instead of sampling")
    v.add_argument("--fixture", choices=sorted(FIXTURES), help="verify a built-in fixture instead of sampling")
    v.add_argument("--report")
    v.add_argument("--jobs", type=int, default=1)
    opt_flags(v, seed_required=True)
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("falsify", help="search seeded random states for violations of an inequality")
    f.add_argument("--inequality", required=True, choices=FALSIFIABLE)
    f.add_argument("--samples", type=int, required=True)
    f.add_argument("--dims", type=_dims, default=(2, 2, 2))
    f.add_argument("--seed", type=int, required=True)
    f.add_argument("--report", required=True)
    f.add_argument("--restarts", type=int, default=4, help="restarts of the screening search (default 4)")
    f.add_argument("--out-dir", help="directory for violator state files (default: next to the report)")
    f.add_argument("--include-fixtures", action="store_true", help="also test the W, GHZ and Bell x |0> fixtures")
    f.add_argument("--jobs", type=int, default=1)
    f.set_defaults(func=cmd_falsify)

    s = sub.add_parser("sweep", help="tabulate measures along a one-parameter state family")
    s.add_argument("--family", required=True)
    s.add_argument("--param", required=True, type=param_grid, help="lo:hi:step, inclusive")
    s.add_argument("--measures", required=True, help="comma-separated measure names")
    s.add_argument("--report", required=True)
    opt_flags(s)
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (StateFileError, UsageError, LabelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
