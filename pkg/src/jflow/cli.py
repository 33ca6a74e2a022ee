"""Command line front end for the flow laboratory.

Subcommands:

  flow         integrate the trace-form flow from a JSON config
  critical     Newton solve for the critical potential
  conditions   pointwise condition margins for one constant pair
  functionals  evaluate the energy functionals for one potential
  cone         exact surface-lattice cone tests and divisor certificates
  proptest     run the randomized property suites under a fixed seed

Configs are strictly validated: any unknown or malformed field aborts with
exit code 2 and a message naming the field path.  Results are emitted as
JSON with the fully resolved configuration embedded, so a report describes
its own provenance; wall time sits in its own top-level key ("wall_time_s")
and is the only field expected to differ between identical runs.

Exit codes:
  0  success
  1  property suite found a counterexample
  2  config or lattice schema violation
  3  inadmissible input (non-positive form, potential outside the cone)
  4  flow blow-up (positivity loss or monitor past its ceiling)
  5  timeout or iteration budget exhausted
  6  internal invariant violation (descent monotonicity, certificate audit)

JFLOW_THREADS caps the BLAS thread pool best-effort: the package __init__
copies it into the usual thread-count variables, which takes effect when
jflow is imported before numpy.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction

import numpy as np

from .cone import (BUILTIN_LATTICES, ConeError, LatticeError, builtin_lattice,
                   class_condition, divisor_search, load_lattice, nakai_test,
                   verify_certificate)
from .critical import NewtonSettings, newton_solve
from .flow import (FlowSetup, NumericalFailureError, monitor_max_principle,
                   run, write_series_csv)
from .functionals import (PathSpec, eval_IE_JE, eval_Jhat, eval_entropy,
                          eval_mabuchi, flow_functional_bundle,
                          ie_second_form, path_independence_gap)
from .hermitian import (SingularFormError, check_condition,
                        cone_form_positive, relative_spectrum)
from .sampling import (FAULTS, make_rng, random_admissible_potential,
                       report_digest, run_property_suites)
from .torus import (DERIV_MODES, GRID_MODES, PotentialField, TorusGrid,
                    class_constant_c, cosine_mode, load_field, save_field)

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_SCHEMA = 2
EXIT_INADMISSIBLE = 3
EXIT_BLOWUP = 4
EXIT_TIMEOUT = 5
EXIT_INVARIANT = 6


class SchemaError(ValueError):
    """A config field is missing, unknown, or has the wrong shape."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"field {field!r}: {message}")


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _reject_unknown(obj: dict, allowed, path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise SchemaError(_join(path, key), "unknown field")


def _as_int(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(path, f"expected an integer, got {type(value).__name__}")
    if minimum is not None and value < minimum:
        raise SchemaError(path, f"must be at least {minimum}")
    return value


def _as_float(value, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(value).__name__}")
    out = float(value)
    if positive and not out > 0.0:
        raise SchemaError(path, "must be positive")
    return out


def _as_bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise SchemaError(path, f"expected true/false, got {type(value).__name__}")
    return value


def _as_choice(value, choices, path: str) -> str:
    if value not in choices:
        raise SchemaError(path, f"must be one of {tuple(choices)}")
    return value


def _parse_entry(value, path: str) -> complex:
    if isinstance(value, bool):
        raise SchemaError(path, "matrix entries must be numbers")
    if isinstance(value, (int, float)):
        return complex(value)
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                    for v in value)):
        return complex(value[0], value[1])
    raise SchemaError(path, "matrix entries are numbers or [re, im] pairs")


def _parse_matrix(value, n: int, path: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != n:
        raise SchemaError(path, f"expected {n} rows")
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != n:
            raise SchemaError(f"{path}[{i}]", f"expected {n} entries")
        for j, entry in enumerate(row):
            out[i, j] = _parse_entry(entry, f"{path}[{i}][{j}]")
    if np.max(np.abs(out - out.conj().T)) > 1e-12 * max(1.0, np.abs(out).max()):
        raise SchemaError(path, "matrix must be Hermitian")
    return out


def _matrix_to_json(m: np.ndarray) -> list:
    out = []
    for row in np.asarray(m, dtype=complex):
        entries = []
        for v in row:
            if v.imag == 0.0:
                entries.append(float(v.real))
            else:
                entries.append([float(v.real), float(v.imag)])
        out.append(entries)
    return out


def _require_positive_matrix(m: np.ndarray, name: str) -> np.ndarray:
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise SingularFormError(f"{name} must be positive definite") from None
    return m


_PHI0_MODE_KEYS = ("k", "amplitude", "phase")
_PHI0_RANDOM_DEFAULTS = {"seed": 0, "band": 2, "amplitude": 0.5,
                         "rel_margin": 0.25}


def _parse_phi0(value, naxes: int, path: str) -> dict:
    """Normalize the initial-potential spec to exactly one variant."""
    if value is None:
        return {"zero": True}
    if not isinstance(value, dict):
        raise SchemaError(path, "expected an object")
    variants = ("zero", "modes", "file", "random")
    _reject_unknown(value, variants, path)
    if len(value) != 1:
        raise SchemaError(path, f"exactly one of {variants} must be given")
    if "zero" in value:
        if value["zero"] is not True:
            raise SchemaError(_join(path, "zero"), "the only allowed value is true")
        return {"zero": True}
    if "file" in value:
        if not isinstance(value["file"], str):
            raise SchemaError(_join(path, "file"), "expected a path string")
        return {"file": value["file"]}
    if "random" in value:
        spec = value["random"]
        if not isinstance(spec, dict):
            raise SchemaError(_join(path, "random"), "expected an object")
        _reject_unknown(spec, _PHI0_RANDOM_DEFAULTS, _join(path, "random"))
        merged = dict(_PHI0_RANDOM_DEFAULTS)
        merged.update(spec)
        merged["seed"] = _as_int(merged["seed"], _join(path, "random.seed"))
        merged["band"] = _as_int(merged["band"], _join(path, "random.band"), 1)
        merged["amplitude"] = _as_float(
            merged["amplitude"], _join(path, "random.amplitude"), positive=True)
        merged["rel_margin"] = _as_float(
            merged["rel_margin"], _join(path, "random.rel_margin"))
        if not 0.0 < merged["rel_margin"] < 1.0:
            raise SchemaError(_join(path, "random.rel_margin"),
                              "must lie strictly between 0 and 1")
        return {"random": merged}
    modes = value["modes"]
    if not isinstance(modes, list) or not modes:
        raise SchemaError(_join(path, "modes"), "expected a non-empty list")
    parsed = []
    for i, mode in enumerate(modes):
        mpath = f"{path}.modes[{i}]"
        if not isinstance(mode, dict):
            raise SchemaError(mpath, "expected an object")
        _reject_unknown(mode, _PHI0_MODE_KEYS, mpath)
        if "k" not in mode or "amplitude" not in mode:
            raise SchemaError(mpath, "needs k and amplitude")
        k = mode["k"]
        if (not isinstance(k, list) or len(k) != naxes
                or not all(isinstance(x, int) and not isinstance(x, bool)
                           for x in k)):
            raise SchemaError(_join(mpath, "k"),
                              f"expected {naxes} integer components")
        parsed.append({
            "k": list(k),
            "amplitude": _as_float(mode["amplitude"], _join(mpath, "amplitude")),
            "phase": _as_float(mode.get("phase", 0.0), _join(mpath, "phase")),
        })
    return {"modes": parsed}


def _build_phi0(spec: dict, grid: TorusGrid, chi0: np.ndarray,
                deriv: str) -> np.ndarray:
    if "zero" in spec:
        return grid.zeros()
    if "modes" in spec:
        phi = grid.zeros()
        for mode in spec["modes"]:
            phi = phi + cosine_mode(grid, mode["k"], mode["amplitude"],
                                    mode["phase"])
        return phi
    if "file" in spec:
        field, _ = load_field(spec["file"])
        if field.grid != grid:
            raise SchemaError(
                "phi0.file",
                f"stored grid {field.grid.describe()} does not match the "
                f"configured grid {grid.describe()}")
        return np.asarray(field.values, dtype=float)
    params = spec["random"]
    rng = make_rng(params["seed"], stream=7)
    return random_admissible_potential(
        rng, grid, chi0, band=params["band"], amplitude=params["amplitude"],
        rel_margin=params["rel_margin"], deriv=deriv)


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except FileNotFoundError:
        raise SchemaError("(config)", f"no such file: {path}") from None
    except json.JSONDecodeError as err:
        raise SchemaError("(config)", f"invalid JSON: {err}") from None
    if not isinstance(data, dict):
        raise SchemaError("(config)", "top level must be an object")
    return data


_PROBLEM_FIELDS = ("n", "points", "mode", "deriv", "omega", "chi0", "phi0")


def _build_problem(cfg: dict, extra_allowed=()) -> dict:
    """Grid, forms, and initial potential shared by several subcommands."""
    _reject_unknown(cfg, set(_PROBLEM_FIELDS) | set(extra_allowed), "")
    for key in ("n", "points", "omega", "chi0"):
        if key not in cfg:
            raise SchemaError(key, "required field is missing")
    n = _as_int(cfg["n"], "n", 1)
    points = _as_int(cfg["points"], "points", 8)
    mode = _as_choice(cfg.get("mode", "invariant"), GRID_MODES, "mode")
    deriv = _as_choice(cfg.get("deriv", "fd4"), DERIV_MODES, "deriv")
    grid = TorusGrid(n=n, points=points, mode=mode)
    omega = _require_positive_matrix(_parse_matrix(cfg["omega"], n, "omega"),
                                     "omega")
    chi0 = _require_positive_matrix(_parse_matrix(cfg["chi0"], n, "chi0"),
                                    "chi0")
    phi0_spec = _parse_phi0(cfg.get("phi0"), grid.naxes, "phi0")
    phi0 = _build_phi0(phi0_spec, grid, chi0, deriv)
    resolved = {
        "n": n, "points": points, "mode": mode, "deriv": deriv,
        "omega": _matrix_to_json(omega), "chi0": _matrix_to_json(chi0),
        "phi0": phi0_spec,
    }
    return {"grid": grid, "omega": omega, "chi0": chi0, "phi0": phi0,
            "deriv": deriv, "resolved": resolved}


def _emit(payload: dict, out_path: str | None, quiet: bool,
          headline: str) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w", encoding="ascii") as handle:
            handle.write(text + "\n")
        if not quiet:
            print(headline)
    elif quiet:
        print(headline)
    else:
        print(text)


_FLOW_DEFAULTS = {
    "normalize": False, "tol_converge": 1e-8, "t_max": 1e3, "safety": 0.9,
    "sample_interval": 10, "blowup_ceiling": 1e6, "max_steps": 10_000_000,
    "jhat_steps": 32, "mabuchi_steps": 16,
}


def cmd_flow(args) -> int:
    cfg = _load_config(args.config)
    problem = _build_problem(cfg, extra_allowed=_FLOW_DEFAULTS)
    merged = dict(_FLOW_DEFAULTS)
    for key in _FLOW_DEFAULTS:
        if key in cfg:
            merged[key] = cfg[key]
    normalize = _as_bool(merged["normalize"], "normalize")
    tol = _as_float(merged["tol_converge"], "tol_converge", positive=True)
    t_max = _as_float(merged["t_max"], "t_max", positive=True)
    safety = _as_float(merged["safety"], "safety", positive=True)
    interval = _as_int(merged["sample_interval"], "sample_interval", 1)
    ceiling = _as_float(merged["blowup_ceiling"], "blowup_ceiling", positive=True)
    max_steps = _as_int(merged["max_steps"], "max_steps", 1)
    jhat_steps = _as_int(merged["jhat_steps"], "jhat_steps", 16)
    mab_steps = _as_int(merged["mabuchi_steps"], "mabuchi_steps", 16)

    setup = FlowSetup(grid=problem["grid"], omega=problem["omega"],
                      chi0=problem["chi0"], deriv=problem["deriv"],
                      normalize=normalize, tol_converge=tol, t_max=t_max,
                      safety=safety, sample_interval=interval,
                      blowup_ceiling=ceiling, jhat_steps=jhat_steps,
                      mabuchi_steps=mab_steps)
    resolved = dict(problem["resolved"])
    resolved.update({
        "normalize": normalize, "tol_converge": tol, "t_max": t_max,
        "safety": safety, "sample_interval": interval,
        "blowup_ceiling": ceiling, "max_steps": max_steps,
        "jhat_steps": jhat_steps, "mabuchi_steps": mab_steps,
    })

    t0 = time.perf_counter()
    note = ""
    try:
        result = run(setup, problem["phi0"], max_steps=max_steps)
    except NumericalFailureError as err:
        payload = {
            "command": "flow", "config": resolved, "verdict": "blowup",
            "note": str(err), "exit_code": EXIT_BLOWUP,
            "wall_time_s": time.perf_counter() - t0,
        }
        _emit(payload, args.summary, args.quiet, "flow: blowup (non-finite)")
        return EXIT_BLOWUP

    code = {"converged": EXIT_OK, "blowup": EXIT_BLOWUP,
            "timeout": EXIT_TIMEOUT}[result.verdict]
    if code == EXIT_OK and not result.jhat_monotone:
        code = EXIT_INVARIANT
        note = "descent invariant violated: sampled Jhat is not monotone"

    if args.csv:
        write_series_csv(args.csv, result.records)
    first, last = result.records[0], result.records[-1]
    monitor = monitor_max_principle(result)
    monitor["band"] = list(monitor["band"])
    payload = {
        "command": "flow",
        "config": resolved,
        "verdict": result.verdict,
        "exit_code": code,
        "note": note,
        "c": setup.c,
        "omega_scale": setup.omega_scale,
        "steps": result.steps,
        "samples": len(result.records),
        "initial": {"t": first.t, "residual": first.residual,
                    "Jhat": first.Jhat, "lam_min": first.lam_min,
                    "lam_max": first.lam_max},
        "final": {"t": last.t, "residual": last.residual, "Jhat": last.Jhat,
                  "lam_min": last.lam_min, "lam_max": last.lam_max,
                  "sup_phi": last.sup_phi, "inf_phi": last.inf_phi,
                  "blowup": last.blowup, "entropy": last.entropy},
        "monitor": monitor,
        "jhat_monotone": result.jhat_monotone,
        "csv": args.csv,
        "wall_time_s": result.wall_time_s,
    }
    _emit(payload, args.summary, args.quiet,
          f"flow: {result.verdict} after {result.steps} steps, "
          f"residual {last.residual:.3e}")
    return code


_NEWTON_FIELDS = ("tol", "max_iters", "damping", "cg_rtol", "cg_maxiter",
                  "damping_floor")


def cmd_critical(args) -> int:
    cfg = _load_config(args.config)
    problem = _build_problem(cfg, extra_allowed=("newton",))
    newton_cfg = cfg.get("newton", {})
    if not isinstance(newton_cfg, dict):
        raise SchemaError("newton", "expected an object")
    _reject_unknown(newton_cfg, _NEWTON_FIELDS, "newton")
    defaults = NewtonSettings()
    settings = NewtonSettings(
        tol=_as_float(newton_cfg.get("tol", defaults.tol), "newton.tol",
                      positive=True),
        max_iters=_as_int(newton_cfg.get("max_iters", defaults.max_iters),
                          "newton.max_iters", 1),
        damping=_as_float(newton_cfg.get("damping", defaults.damping),
                          "newton.damping", positive=True),
        cg_rtol=_as_float(newton_cfg.get("cg_rtol", defaults.cg_rtol),
                          "newton.cg_rtol", positive=True),
        cg_maxiter=_as_int(newton_cfg.get("cg_maxiter", defaults.cg_maxiter),
                           "newton.cg_maxiter", 1),
        damping_floor=_as_float(
            newton_cfg.get("damping_floor", defaults.damping_floor),
            "newton.damping_floor", positive=True),
    )
    resolved = dict(problem["resolved"])
    resolved["newton"] = {
        "tol": settings.tol, "max_iters": settings.max_iters,
        "damping": settings.damping, "cg_rtol": settings.cg_rtol,
        "cg_maxiter": settings.cg_maxiter,
        "damping_floor": settings.damping_floor,
    }

    t0 = time.perf_counter()
    phi, report = newton_solve(problem["grid"], problem["omega"],
                               problem["chi0"], problem["phi0"],
                               settings, problem["deriv"])
    wall = time.perf_counter() - t0
    if args.save_field:
        save_field(args.save_field, PotentialField(problem["grid"], phi),
                   meta={"source": "critical"})
    code = EXIT_OK if report.converged else EXIT_TIMEOUT
    final_res = report.residuals[-1] if report.residuals else float("nan")
    payload = {
        "command": "critical",
        "config": resolved,
        "exit_code": code,
        "newton": report.as_dict(),
        "final_residual": final_res,
        "c": class_constant_c(problem["omega"], problem["chi0"]),
        "sup_phi": float(np.max(phi)),
        "inf_phi": float(np.min(phi)),
        "field": args.save_field,
        "wall_time_s": wall,
    }
    _emit(payload, args.summary, args.quiet,
          f"critical: {'converged' if report.converged else report.message} "
          f"in {report.iterations} iterations, residual {final_res:.3e}")
    return code


_CONDITIONS_FIELDS = ("omega", "chi", "normalize")


def cmd_conditions(args) -> int:
    cfg = _load_config(args.config)
    _reject_unknown(cfg, _CONDITIONS_FIELDS, "")
    for key in ("omega", "chi"):
        if key not in cfg:
            raise SchemaError(key, "required field is missing")
    if not isinstance(cfg["omega"], list) or not cfg["omega"]:
        raise SchemaError("omega", "expected a matrix (list of rows)")
    n = len(cfg["omega"])
    omega = _require_positive_matrix(_parse_matrix(cfg["omega"], n, "omega"),
                                     "omega")
    chi = _require_positive_matrix(_parse_matrix(cfg["chi"], n, "chi"), "chi")
    normalize = _as_bool(cfg.get("normalize", False), "normalize")
    t0 = time.perf_counter()
    omega_input = omega
    c = class_constant_c(omega, chi)
    if normalize:
        omega = omega / (n * c)
    spec = relative_spectrum(omega, chi)
    conditions = {}
    for which in ("C1", "C2", "C3"):
        rep = check_condition(omega, chi, which)
        conditions[which] = {"passed": rep.passed,
                             "margin": rep.margin,
                             "boundary": rep.boundary}
    cone = None
    if n >= 2:
        rep = cone_form_positive(omega, chi)
        cone = {"passed": rep.passed, "margin": rep.margin,
                "boundary": rep.boundary}
    payload = {
        "command": "conditions",
        "config": {"omega": _matrix_to_json(omega_input),
                   "chi": _matrix_to_json(chi),
                   "normalize": normalize},
        "exit_code": EXIT_OK,
        "n": n,
        "c": c,
        "nc": n * c,
        "lambdas": [float(v) for v in spec.lambdas],
        "trace_of_inverse": spec.trace_of_inverse(),
        "conditions": conditions,
        "cone": cone,
        "wall_time_s": time.perf_counter() - t0,
    }
    _emit(payload, args.summary, args.quiet,
          "conditions: " + ", ".join(
              f"{k}={'pass' if v['passed'] else 'fail'}"
              for k, v in conditions.items()))
    return EXIT_OK


_FUNCTIONAL_DEFAULTS = {"path_steps": 32, "mabuchi_steps": 16,
                        "compare_paths": True}


def cmd_functionals(args) -> int:
    cfg = _load_config(args.config)
    problem = _build_problem(cfg, extra_allowed=_FUNCTIONAL_DEFAULTS)
    steps = _as_int(cfg.get("path_steps", 32), "path_steps", 16)
    mab_steps = _as_int(cfg.get("mabuchi_steps", 16), "mabuchi_steps", 16)
    compare = _as_bool(cfg.get("compare_paths", True), "compare_paths")
    grid, omega, chi0 = problem["grid"], problem["omega"], problem["chi0"]
    phi, deriv = problem["phi0"], problem["deriv"]
    resolved = dict(problem["resolved"])
    resolved.update({"path_steps": steps, "mabuchi_steps": mab_steps,
                     "compare_paths": compare})

    t0 = time.perf_counter()
    bundle = flow_functional_bundle(grid, omega, chi0, phi,
                                    path=PathSpec("linear", steps),
                                    deriv=deriv)
    ie, je = eval_IE_JE(grid, chi0, phi, deriv)
    ie2 = ie_second_form(grid, chi0, phi, deriv)
    entropy = eval_entropy(grid, chi0, phi, deriv)
    mabuchi = eval_mabuchi(grid, chi0, phi, PathSpec("linear", mab_steps),
                           deriv)
    gaps = None
    if compare:
        j_lin, j_quad, j_rel = path_independence_gap(
            eval_Jhat, grid, omega, chi0, phi, steps=steps, deriv=deriv)
        m_lin, m_quad, m_rel = path_independence_gap(
            eval_mabuchi, grid, chi0, phi, steps=mab_steps, deriv=deriv)
        gaps = {
            "Jhat": {"linear": j_lin, "quadratic": j_quad, "rel": j_rel},
            "mabuchi": {"linear": m_lin, "quadratic": m_quad, "rel": m_rel},
        }
    payload = {
        "command": "functionals",
        "config": resolved,
        "exit_code": EXIT_OK,
        "c": class_constant_c(omega, chi0),
        "values": {
            "J": bundle["J"], "I": bundle["I"], "Jhat": bundle["Jhat"],
            "IE": ie, "JE": je, "IE_second_form": ie2,
            "entropy": entropy, "mabuchi": mabuchi,
        },
        "ie_route_gap": abs(ie - ie2) / max(1.0, abs(ie)),
        "path_gaps": gaps,
        "wall_time_s": time.perf_counter() - t0,
    }
    _emit(payload, args.summary, args.quiet,
          f"functionals: Jhat={bundle['Jhat']:.6e} IE={ie:.6e} JE={je:.6e}")
    return EXIT_OK


def _parse_class(text: str, rank: int, name: str) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != rank:
        raise SchemaError(name, f"expected {rank} comma-separated components")
    try:
        return tuple(Fraction(p) for p in parts)
    except (ValueError, ZeroDivisionError) as err:
        raise SchemaError(name, f"bad rational component: {err}") from None


def cmd_cone(args) -> int:
    if args.lattice in BUILTIN_LATTICES:
        lattice = builtin_lattice(args.lattice)
    else:
        try:
            lattice = load_lattice(args.lattice)
        except FileNotFoundError:
            raise SchemaError(
                "lattice",
                f"{args.lattice!r} is neither a builtin "
                f"({', '.join(BUILTIN_LATTICES)}) nor a readable file"
            ) from None
        except json.JSONDecodeError as err:
            raise SchemaError("lattice", f"invalid JSON: {err}") from None

    if args.alpha is None and (args.omega is None or args.chi0 is None):
        raise SchemaError("alpha", "give --alpha, or both --omega and --chi0")
    if args.alpha is not None and (args.omega or args.chi0):
        raise SchemaError("alpha", "--alpha excludes --omega/--chi0")

    t0 = time.perf_counter()
    code = EXIT_OK
    payload = {
        "command": "cone",
        "lattice": lattice.as_dict(),
        "exit_code": EXIT_OK,
    }
    if args.alpha is not None:
        alpha = _parse_class(args.alpha, lattice.rank, "alpha")
        nakai = nakai_test(lattice, alpha)
        search = divisor_search(lattice, alpha)
        verified = verify_certificate(lattice, alpha, search)
        payload.update({
            "alpha": [str(x) for x in alpha],
            "nakai": {"passed": nakai.passed, "square": str(nakai.square),
                      "detail": nakai.describe()},
            "search": search.as_dict(),
            "verified": verified,
        })
        if not verified:
            code = EXIT_INVARIANT
            payload["note"] = ("certificate failed its independent audit"
                               if search.status == "certificate" else
                               "search result failed its independent audit")
    else:
        omega = _parse_class(args.omega, lattice.rank, "omega")
        chi0 = _parse_class(args.chi0, lattice.rank, "chi0")
        cond = class_condition(lattice, omega, chi0)
        payload.update({
            "omega": [str(x) for x in omega],
            "chi0": [str(x) for x in chi0],
            "c": str(cond["c"]),
            "target": [str(x) for x in cond["target"]],
            "identity_square": cond["identity_square"],
            "identity_mixed": cond["identity_mixed"],
            "target_nakai": cond["nakai"].describe(),
            "needs_divisor": cond["needs_divisor"],
        })
        if not (cond["identity_square"] and cond["identity_mixed"]):
            code = EXIT_INVARIANT
            payload["note"] = "exact class identities failed"
        elif cond["needs_divisor"]:
            search = divisor_search(lattice, cond["target"])
            verified = verify_certificate(lattice, cond["target"], search)
            payload["search"] = search.as_dict()
            payload["verified"] = verified
            if not verified:
                code = EXIT_INVARIANT
                payload["note"] = "certificate failed its independent audit"
    payload["exit_code"] = code
    payload["wall_time_s"] = time.perf_counter() - t0
    status = payload.get("search", {}).get("status", "kahler")
    _emit(payload, args.out, args.quiet, f"cone: {status}")
    return code


def cmd_proptest(args) -> int:
    sizes = {}
    if args.conditions_samples is not None:
        sizes["conditions"] = args.conditions_samples
    if args.functionals_samples is not None:
        sizes["functionals"] = args.functionals_samples
    if args.cone_samples is not None:
        sizes["cone"] = args.cone_samples
    t0 = time.perf_counter()
    report = run_property_suites(args.seed, sizes=sizes or None,
                                 fault=args.inject_fault)
    wall = time.perf_counter() - t0
    payload = {
        "command": "proptest",
        "report": report,
        "digest": report_digest(report),
        "exit_code": EXIT_OK if report["all_passed"] else EXIT_PROPERTY_FAILURE,
        "wall_time_s": wall,
    }
    _emit(payload, args.out, args.quiet,
          f"proptest: {'all passed' if report['all_passed'] else 'FAILED'} "
          f"(digest {payload['digest'][:16]})")
    return payload["exit_code"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jflow",
        description="flow runs, critical solves, cone certificates, and "
                    "property suites for constant Hermitian pairs on tori")
    sub = parser.add_subparsers(dest="command", required=True)

    flow_p = sub.add_parser("flow", help="integrate the flow from a config")
    flow_p.add_argument("config", help="JSON config path")
    flow_p.add_argument("--csv", help="write the sampled time series here")
    flow_p.add_argument("--summary", help="write the JSON summary here")
    flow_p.add_argument("--quiet", action="store_true",
                        help="print only the one-line verdict")
    flow_p.set_defaults(func=cmd_flow)

    crit_p = sub.add_parser("critical", help="Newton solve from a config")
    crit_p.add_argument("config")
    crit_p.add_argument("--save-field", help="write the solution potential here")
    crit_p.add_argument("--summary")
    crit_p.add_argument("--quiet", action="store_true")
    crit_p.set_defaults(func=cmd_critical)

    cond_p = sub.add_parser("conditions",
                            help="condition margins for one constant pair")
    cond_p.add_argument("config")
    cond_p.add_argument("--summary")
    cond_p.add_argument("--quiet", action="store_true")
    cond_p.set_defaults(func=cmd_conditions)

    func_p = sub.add_parser("functionals",
                            help="evaluate the energies for one potential")
    func_p.add_argument("config")
    func_p.add_argument("--summary")
    func_p.add_argument("--quiet", action="store_true")
    func_p.set_defaults(func=cmd_functionals)

    cone_p = sub.add_parser("cone",
                            help="exact cone tests and divisor certificates")
    cone_p.add_argument("lattice",
                        help=f"builtin name ({', '.join(BUILTIN_LATTICES)}) "
                             f"or a lattice JSON path")
    cone_p.add_argument("--alpha", help="class to decompose, e.g. '3,1'")
    cone_p.add_argument("--omega", help="Kahler class for the pair condition")
    cone_p.add_argument("--chi0", help="Kahler class for the pair condition")
    cone_p.add_argument("--out", help="write the JSON report here")
    cone_p.add_argument("--quiet", action="store_true")
    cone_p.set_defaults(func=cmd_cone)

    prop_p = sub.add_parser("proptest", help="randomized property suites")
    prop_p.add_argument("--seed", type=int, default=0)
    prop_p.add_argument("--conditions-samples", type=int, default=None)
    prop_p.add_argument("--functionals-samples", type=int, default=None)
    prop_p.add_argument("--cone-samples", type=int, default=None)
    prop_p.add_argument("--inject-fault", choices=FAULTS, default=None,
                        help="test-only: sabotage a checker to prove the "
                             "suite catches it")
    prop_p.add_argument("--out", help="write the JSON report here")
    prop_p.add_argument("--quiet", action="store_true")
    prop_p.set_defaults(func=cmd_proptest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except LatticeError as err:
        print(f"lattice error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except (SingularFormError, ConeError) as err:
        print(f"inadmissible input: {err}", file=sys.stderr)
        return EXIT_INADMISSIBLE


if __name__ == "__main__":
    sys.exit(main())
