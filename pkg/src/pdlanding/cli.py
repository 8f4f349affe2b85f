"""
Command-line front end: ``pdlanding solve | verify | sweep``.

Scenario files are JSON documents; see ``SCENARIO_SCHEMA`` for the accepted
keys. Angles are given in degrees in files and converted to radians here.

Exit codes: 0 ok, 1 solver failure, 2 verification failure, 64 bad input,
65 bad trajectory CSV.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from .analyze import StructureReport, _jsonable, analyze_trajectory
from .direct import TranscriptionConfig, solve_direct
from .indirect import ShootingError, solve_indirect
from .integrate import IntegrationError, Trajectory, attach_diagnostics
from .model import ConstraintSet, ModelError, Scenario, State, VehicleParams
from .pmp import running_cost_multiplier

log = logging.getLogger(__name__)

EXIT_OK, EXIT_SOLVER, EXIT_VERIFY, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 64, 65

METHODS = ("indirect", "direct", "auto")

# section -> {key: required}
SCENARIO_SCHEMA = {
    "vehicle": {"thrust_max": True, "flow_rate": False, "mass_empty": True, "gravity": True,
                "throttle_min": True, "throttle_max": True, "pressure_term": False},
    "constraints": {"pointing_deg": False, "glide_slope_deg": False},
    "initial": {"position": True, "velocity": True, "mass": True},
    "final": {"position_xy": False, "time": False},
    "solver": {"method": False, "options": False},
}
TOP_LEVEL = {"vehicle": True, "constraints": False, "initial": True, "final": False,
             "cost": False, "solver": False}
SOLVER_OPTIONS = ("n_nodes", "n_steps", "max_iter", "seed")

CSV_COLUMNS = ("t", "x", "y", "z", "vx", "vy", "vz", "m", "ux", "uy", "uz",
               "throttle", "h", "psi", "qr_dot_d", "pointing_slack")
FUEL_COLUMN = "fuel"
COSTATE_COLUMNS = ("p_rx", "p_ry", "p_rz", "p_vx", "p_vy", "p_vz", "p_m")

SWEEP_PARAMS = ("gamma", "theta", "u_min", "u_max", "q", "sigma")
SWEEP_COLUMNS = ("value", "status", "cost", "t_f", "structure", "contacts",
                 "switching_times", "pointing_active_s", "message")


class ScenarioError(ValueError):
    """Malformed scenario document; the message names the offending key."""


class TrajectoryFileError(ValueError):
    """Trajectory CSV that does not follow the documented layout."""


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------

def _check_keys(section: dict, allowed: dict, where: str):
    if not isinstance(section, dict):
        raise ScenarioError(f"{where}: expected an object")
    for key in section:
        if key not in allowed:
            raise ScenarioError(f"{where}.{key}: unknown key")
    for key, required in allowed.items():
        if required and key not in section:
            raise ScenarioError(f"{where}.{key}: missing required key")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(f"{where}: expected a finite number, got {value!r}")
    return float(value)


def _vector(value, n: int, where: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != n:
        raise ScenarioError(f"{where}: expected a list of {n} numbers")
    return np.array([_number(v, f"{where}[{i}]") for i, v in enumerate(value)])


def _angle(value, where: str) -> Optional[float]:
    """Degrees in ``[0, 90)`` to radians; ``None`` disables the constraint."""
    if value is None:
        return None
    deg = _number(value, where)
    if not 0.0 <= deg < 90.0:
        raise ScenarioError(f"{where}: angle must lie in [0, 90) degrees, got {deg:g}")
    return math.radians(deg)


def scenario_from_dict(doc: dict) -> Tuple[Scenario, dict]:
    """
    Build a ``Scenario`` and the solver settings from a parsed document.

    Raises ``ScenarioError`` naming the first offending key.
    """
    _check_keys(doc, TOP_LEVEL, "scenario")
    for name, allowed in SCENARIO_SCHEMA.items():
        if name in doc:
            _check_keys(doc[name], allowed, name)

    veh = {k: _number(v, f"vehicle.{k}") for k, v in doc["vehicle"].items()}
    veh.setdefault("flow_rate", 0.0)
    veh.setdefault("pressure_term", 0.0)
    try:
        params = VehicleParams(**veh)
    except ModelError as exc:
        key = _model_error_key(str(exc), "vehicle")
        raise ScenarioError(f"{key}: {exc}") from None

    cons = doc.get("constraints", {})
    theta = _angle(cons.get("pointing_deg"), "constraints.pointing_deg")
    gamma = _angle(cons.get("glide_slope_deg"), "constraints.glide_slope_deg")
    constraints = ConstraintSet(
        pointing_half_angle=theta or 0.0, glide_slope_angle=gamma or 0.0,
        glide_slope_enabled=gamma is not None, pointing_enabled=theta is not None)

    ini = doc["initial"]
    state = State(_vector(ini["position"], 3, "initial.position"),
                  _vector(ini["velocity"], 3, "initial.velocity"),
                  _number(ini["mass"], "initial.mass"))

    fin = doc.get("final", {})
    xy = fin.get("position_xy", [0.0, 0.0])
    xy = None if xy is None else _vector(xy, 2, "final.position_xy")
    t_f = fin.get("time")
    t_f = None if t_f is None else _number(t_f, "final.time")

    cost = doc.get("cost", "min_fuel" if params.flow_rate == 0.0 else "max_final_mass")
    try:
        scenario = Scenario(params, constraints, state, xy, cost, t_f)
    except ModelError as exc:
        raise ScenarioError(f"{_model_error_key(str(exc), 'scenario')}: {exc}") from None

    solver = doc.get("solver", {})
    method = solver.get("method", "auto")
    if method not in METHODS:
        raise ScenarioError(f"solver.method: expected one of {METHODS}, got {method!r}")
    options = solver.get("options", {})
    if not isinstance(options, dict):
        raise ScenarioError("solver.options: expected an object")
    for key, value in options.items():
        if key not in SOLVER_OPTIONS:
            raise ScenarioError(f"solver.options.{key}: unknown key")
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"solver.options.{key}: expected an integer, got {value!r}")
    return scenario, {"method": method, **options}


_ERROR_KEYS = (
    ("throttle bounds", "vehicle.throttle_min"),
    ("net thrust", "vehicle.pressure_term"),
    ("atmosphere model", "vehicle.pressure_term"),
    ("initial mass", "initial.mass"),
    ("initial position", "initial.position"),
    ("final_time", "final.time"),
    ("unknown cost", "cost"),
)


def _model_error_key(message: str, default: str) -> str:
    for phrase, key in _ERROR_KEYS:
        if phrase in message:
            return key
    for key in SCENARIO_SCHEMA["vehicle"]:
        if message.startswith(key):
            return f"vehicle.{key}"
    return default


def load_scenario(path: str) -> Tuple[Scenario, dict, dict]:
    """Read a scenario file; returns ``(scenario, solver_settings, raw_document)``."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    scenario, solver = scenario_from_dict(doc)
    return scenario, solver, doc


# ---------------------------------------------------------------------------
# trajectory CSV
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    value = float(value)
    return repr(value) if math.isfinite(value) else ""


def _column_or_nan(values, n):
    return np.full(n, np.nan) if values is None else values


def trajectory_to_csv(traj: Trajectory) -> str:
    """
    Serialize a trajectory in the documented column layout.

    The fuel column (running throttle integral) follows the fixed columns,
    then the adjoint columns when the trajectory carries them. Floats are
    written with ``repr`` so they read back bit-exactly; NaN is an empty
    field.
    """
    n = len(traj)
    u = traj.controls
    cols = [traj.times, *traj.states.T, *u.T, traj.throttles,
            _column_or_nan(traj.h, n), _column_or_nan(traj.psi, n),
            _column_or_nan(traj.qr_dot_d, n), _column_or_nan(traj.pointing_slack, n)]
    header = list(CSV_COLUMNS)
    if traj.fuel_trace is not None:
        header.append(FUEL_COLUMN)
        cols.append(traj.fuel_trace)
    if traj.costates is not None:
        header.extend(COSTATE_COLUMNS)
        cols.extend(traj.costates.T)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*cols):
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_trajectory_csv(path: str, scenario: Scenario) -> Trajectory:
    """
    Rebuild a trajectory from CSV and recompute its diagnostics.

    The stored ``h``/``psi``/``qr_dot_d``/``pointing_slack`` columns are
    ignored in favour of values recomputed against ``scenario``.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise TrajectoryFileError(f"{path}: {exc.strerror}") from None
    if not rows:
        raise TrajectoryFileError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    fixed = len(CSV_COLUMNS)
    if tuple(header[:fixed]) != CSV_COLUMNS:
        raise TrajectoryFileError(
            f"column mismatch: expected {','.join(CSV_COLUMNS)} first, got {','.join(header[:fixed])}")
    extra = header[fixed:]
    has_fuel = bool(extra) and extra[0] == FUEL_COLUMN
    if has_fuel:
        extra = extra[1:]
    if extra and tuple(extra) != COSTATE_COLUMNS:
        raise TrajectoryFileError(
            f"column mismatch: optional columns must be {FUEL_COLUMN} then {','.join(COSTATE_COLUMNS)}")
    data = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise TrajectoryFileError(f"line {i}: expected {len(header)} fields, got {len(row)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            try:
                data[i - 2, j] = float(cell) if cell else np.nan
            except ValueError:
                raise TrajectoryFileError(f"line {i}, column {header[j]}: not a number: {cell!r}") from None
    col = {name: data[:, j] for j, name in enumerate(header)}
    required = ("t", "x", "y", "z", "vx", "vy", "vz", "m", "ux", "uy", "uz", "throttle")
    for name in required + tuple(extra) + ((FUEL_COLUMN,) if has_fuel else ()):
        if not np.all(np.isfinite(col[name])):
            raise TrajectoryFileError(f"column {name}: missing or non-finite values")
    u = np.column_stack([col["ux"], col["uy"], col["uz"]])
    norm = np.linalg.norm(u, axis=1)
    if np.any(norm == 0.0):
        raise TrajectoryFileError("zero thrust vector: the direction is undefined")
    costates = np.column_stack([col[c] for c in COSTATE_COLUMNS]) if extra else None
    try:
        traj = Trajectory(
            col["t"], np.column_stack([col[c] for c in ("x", "y", "z", "vx", "vy", "vz", "m")]),
            u / norm[:, None], col["throttle"].copy(), model=scenario.model,
            costates=costates, mu_accum=None if costates is None else np.zeros((len(norm), 3)),
            p_w=running_cost_multiplier(scenario.cost, scenario.params.flow_rate),
            fuel_trace=col[FUEL_COLUMN].copy() if has_fuel else None,
            meta={"solver": "external", "source": os.path.basename(path)})
    except ValueError as exc:
        raise TrajectoryFileError(str(exc)) from None
    return attach_diagnostics(traj, scenario)


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------

def run_solver(scenario: Scenario, method: str, options: dict):
    """
    Dispatch to a solver; returns ``(trajectory, report, method_used, notes)``.

    ``auto`` tries shooting first and falls back to transcription when
    shooting fails or the resulting trajectory violates the glide slope,
    which the shooting method does not impose.
    """
    notes = []
    if method in ("indirect", "auto"):
        try:
            traj, report = solve_indirect(scenario, n_steps=options.get("n_steps", 400),
                                          max_iter=options.get("max_iter", 200),
                                          seed=options.get("seed", 0))
        except (ShootingError, IntegrationError) as exc:
            if method == "indirect":
                raise
            notes.append(f"indirect failed ({type(exc).__name__}: {exc}); using direct")
        else:
            glide = report.verdicts.get("glide_slope")
            if method == "indirect" or glide is None or glide.status != "fail":
                return traj, report, "indirect", notes
            notes.append("indirect solution violates the glide slope; using direct")
    config = TranscriptionConfig(n_nodes=options.get("n_nodes", 100))
    traj, report, _ = solve_direct(scenario, config)
    return traj, report, "direct", notes


def exit_status(report: StructureReport) -> int:
    if not report.converged:
        return EXIT_SOLVER
    return EXIT_OK if report.passed else EXIT_VERIFY


def summary_line(traj: Trajectory, report: StructureReport, method: str) -> str:
    return (f"cost={traj.cost_value:.6f} t_f={traj.t_f:.4f} "
            f"structure={report.describe()} method={method}")


def cmd_solve(args) -> int:
    scenario, solver, _ = load_scenario(args.scenario)
    method = args.method or solver.pop("method")
    solver.pop("method", None)
    if args.nodes is not None:
        solver["n_nodes"] = args.nodes
    if args.seed is not None:
        solver["seed"] = args.seed
    try:
        traj, report, used, notes = run_solver(scenario, method, solver)
    except (ShootingError, IntegrationError, RuntimeError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for note in notes:
        print(f"note: {note}")
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "trajectory.csv"), "w", newline="") as fh:
        fh.write(trajectory_to_csv(traj))
    doc = {"method": used, "notes": notes, "cost": traj.cost_value, "t_f": traj.t_f,
           **report.to_dict()}
    with open(os.path.join(args.out_dir, "structure_report.json"), "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2)
        fh.write("\n")
    print(summary_line(traj, report, used))
    code = exit_status(report)
    if code == EXIT_SOLVER:
        print("solver did not converge: "
              + ", ".join(k for k, v in report.solver.items() if v.status == "fail"))
    elif code == EXIT_VERIFY:
        print("verification failed: " + ", ".join(report.failures()))
    return code


def verdict_table(report: StructureReport) -> str:
    lines = [f"{'check':<28} {'status':<8} {'margin':>12}  message"]
    for name, v in list(report.verdicts.items()) + list(report.solver.items()):
        margin = "" if v.margin is None or not math.isfinite(v.margin) else f"{v.margin:.4g}"
        lines.append(f"{name:<28} {v.status:<8} {margin:>12}  {v.message}")
    return "\n".join(lines)


def cmd_verify(args) -> int:
    scenario, _, _ = load_scenario(args.scenario)
    traj = read_trajectory_csv(args.trajectory, scenario)
    report = analyze_trajectory(traj, scenario)
    print(f"structure: {report.describe()}")
    print(verdict_table(report))
    return EXIT_OK if report.passed else EXIT_VERIFY


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _sweep_document(doc: dict, param: str, value: str) -> dict:
    """Copy of ``doc`` with one parameter replaced; ``off`` disables an angle."""
    doc = json.loads(json.dumps(doc))
    text = value.strip().lower()
    if param in ("gamma", "theta"):
        key = "glide_slope_deg" if param == "gamma" else "pointing_deg"
        angle = None if text == "off" else float(text)
        # a half-angle of 90 degrees or more does not restrict anything
        if angle is not None and param == "theta" and angle >= 90.0:
            angle = None
        doc.setdefault("constraints", {})[key] = angle
        return doc
    key = {"u_min": "throttle_min", "u_max": "throttle_max", "q": "flow_rate",
           "sigma": "pressure_term"}[param]
    doc["vehicle"][key] = float(text)
    return doc


def _pointing_active_time(traj: Trajectory, tol: float = 1e-6) -> float:
    slack = traj.pointing_slack
    if slack is None or not np.any(np.isfinite(slack)):
        return 0.0
    active = np.abs(slack) <= tol
    both = active[:-1] & active[1:]
    return float(np.sum(np.diff(traj.times)[both]))


def sweep_one(doc: dict, param: str, value: str, method: Optional[str]) -> dict:
    """Solve one sweep point; failures are returned in the row, never raised."""
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row["value"] = value
    try:
        scenario, solver = scenario_from_dict(_sweep_document(doc, param, value))
    except (ScenarioError, ValueError) as exc:
        row.update(status="invalid", message=str(exc))
        return row
    chosen = method or solver.pop("method")
    solver.pop("method", None)
    try:
        traj, report, used, notes = run_solver(scenario, chosen, solver)
    except Exception as exc:  # noqa: BLE001 - recorded in the row
        row.update(status="solver_failure", message=f"{type(exc).__name__}: {exc}")
        return row
    code = exit_status(report)
    row.update(
        status={EXIT_OK: "ok", EXIT_SOLVER: "solver_failure", EXIT_VERIFY: "verify_failure"}[code],
        cost=_fmt(traj.cost_value), t_f=_fmt(traj.t_f), structure=report.structure,
        contacts=str(len(report.contacts)),
        switching_times=" ".join(f"{t:.4f}" for t in report.switching_times),
        pointing_active_s=f"{_pointing_active_time(traj):.4f}",
        message="; ".join(notes + [f"method={used}"] + report.failures()))
    return row


def _sweep_task(task):
    return sweep_one(*task)


def cmd_sweep(args) -> int:
    values = [v for v in (args.values or "").split(",") if v.strip()]
    if not values:
        raise ScenarioError("--values: empty value list")
    _, _, doc = load_scenario(args.scenario)
    tasks = [(doc, args.param, v.strip(), args.method) for v in values]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(args.jobs, len(tasks))) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "sweep.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    for r in rows:
        print(f"{args.param}={r['value']}: {r['status']} {r['structure']} "
              f"contacts={r['contacts']} cost={r['cost']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdlanding", description="Powered-descent landing solver and verifier.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve a scenario and verify the result")
    p.add_argument("scenario")
    p.add_argument("--method", choices=METHODS, default=None,
                   help="overrides solver.method from the file (default auto)")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--nodes", type=int, default=None, help="transcription nodes (direct)")
    p.add_argument("--seed", type=int, default=None, help="seed for shooting restarts")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="verify a trajectory CSV against a scenario")
    p.add_argument("trajectory")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="solve a scenario over a list of parameter values")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma-separated; 'off' disables gamma/theta")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrajectoryFileError as exc:
        print(f"invalid trajectory: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
