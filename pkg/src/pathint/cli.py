"""Experiment runner tying the simulation modules to reproducible artifacts.

Each experiment is described by a small document: a kind, kind-specific
parameters, a 64-bit seed, and an output path.  Running it writes one CSV
whose bytes depend only on the document, plus a sidecar JSON manifest with
the document hash, library version, and wall-clock time.  The manifest is
the only artifact allowed to differ between identical runs.

Exit codes: 0 success, 2 bad experiment document, 3 a work cap tripped,
4 an internal invariant tripped.  Failures print one machine-parsable JSON
line to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .decomp import Decomposition, decomposition_from_json
from .errors import CapExceeded, InvariantViolation, SpecError
from .lattice import (
    LatticeConfig,
    Potential,
    constant_potential,
    gauss_sum_check,
    gaussian_packet,
    harmonic_potential,
    lagrangian_step,
    split_step_reference,
    square_well_potential,
    zero_potential,
)
from .long_time import (
    TimeDependentHamiltonian,
    adiabatic_bounds,
    interaction_frame,
    jump_bounds,
    longtime_error,
    two_level_sweep,
)
from .short_time import simulate
from .trotter import error_bound, measured_error, schedule

KINDS = ("trotter-error", "short-sim", "long-sim", "lagrangian-sim", "gauss-check")

_SPEC_FIELDS = {"kind", "params", "seed", "output"}

_PARAM_FIELDS: dict[str, set[str]] = {
    "trotter-error": {"decomp", "k", "r_list", "t"},
    "short-sim": {"decomp", "k", "r", "t", "bits", "sweep"},
    "long-sim": {"system", "T_sweep", "r"},
    "lagrangian-sim": {"n", "xmax", "mass", "r", "potential", "initial"},
    "gauss-check": {"count", "max_coeff"},
}

_OPTIONAL_FIELDS: dict[str, set[str]] = {
    "trotter-error": set(),
    "short-sim": {"sweep"},
    "long-sim": {"r"},
    "lagrangian-sim": set(),
    "gauss-check": set(),
}

_QUERY_COLUMNS = (
    ("queries_O_ind", "index"),
    ("queries_O_IM", "magnitude"),
    ("queries_O_IP", "phase"),
    ("queries_O_EP", "eigenphase"),
)


@dataclass(frozen=True)
class ExperimentSpec:
    """A fully described experiment: what to run, with what seed, written where."""

    kind: str
    params: dict[str, Any]
    seed: int
    output: str


def spec_from_dict(doc: object) -> ExperimentSpec:
    if not isinstance(doc, dict):
        raise SpecError("experiment document must be a JSON object")
    unknown = set(doc) - _SPEC_FIELDS
    if unknown:
        raise SpecError(f"unknown experiment fields: {sorted(unknown)}")
    missing = _SPEC_FIELDS - set(doc)
    if missing:
        raise SpecError(f"missing experiment fields: {sorted(missing)}")
    kind = doc["kind"]
    if kind not in KINDS:
        raise SpecError(f"unknown experiment kind {kind!r}")
    seed = doc["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise SpecError("seed must be an integer in [0, 2^64)")
    output = doc["output"]
    if not isinstance(output, str) or not output:
        raise SpecError("output must be a non-empty path string")
    params = doc["params"]
    if not isinstance(params, dict):
        raise SpecError("params must be a JSON object")
    _validate_params(kind, params)
    return ExperimentSpec(kind=kind, params=params, seed=seed, output=output)


def spec_to_dict(spec: ExperimentSpec) -> dict[str, Any]:
    return {
        "kind": spec.kind,
        "params": spec.params,
        "seed": spec.seed,
        "output": spec.output,
    }


def spec_hash(spec: ExperimentSpec) -> str:
    canon = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _validate_params(kind: str, params: dict[str, Any]) -> None:
    allowed = _PARAM_FIELDS[kind]
    unknown = set(params) - allowed
    if unknown:
        raise SpecError(f"unknown params for {kind}: {sorted(unknown)}")
    missing = allowed - _OPTIONAL_FIELDS[kind] - set(params)
    if missing:
        raise SpecError(f"missing params for {kind}: {sorted(missing)}")


def _require_int(params: dict[str, Any], name: str, minimum: int) -> int:
    value = params[name]
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise SpecError(f"param {name!r} must be an integer >= {minimum}")
    return value


def _require_number(params: dict[str, Any], name: str) -> float:
    value = params[name]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"param {name!r} must be a number")
    return float(value)


def _fmt(value: Any) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


# ---------------------------------------------------------------------------
# parameter document helpers shared by flags and spec files


def _json_or_path(value: Any, what: str) -> dict[str, Any]:
    """Accept an inline JSON object, a JSON string, or a path to a JSON file."""
    if isinstance(value, dict):
        return value
    if isinstance(value, str):
        text = value
        if not value.lstrip().startswith("{"):
            path = Path(value)
            if not path.is_file():
                raise SpecError(f"{what} file not found: {value}")
            text = path.read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{what} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise SpecError(f"{what} must be a JSON object")
        return doc
    raise SpecError(f"{what} must be a JSON object or a path")


def _decomposition_from_param(value: Any) -> Decomposition:
    return decomposition_from_json(_json_or_path(value, "decomposition"))


def _system_builder(value: Any) -> Callable[[float], TimeDependentHamiltonian]:
    """Turn a system description into a total-time -> Hamiltonian builder.

    Builtin string form: sweep:<linear|sine>:<a>,<b>.  JSON form: a document
    with family 'sweep' or 'interaction-frame'; the latter rebuilds per
    total time because its drift scales with it.
    """
    if isinstance(value, str) and value.startswith("sweep:"):
        pieces = value.split(":")
        if len(pieces) != 3 or "," not in pieces[2]:
            raise SpecError("builtin system must look like sweep:<shape>:<a>,<b>")
        shape = pieces[1]
        try:
            a, b = (float(v) for v in pieces[2].split(","))
        except ValueError:
            raise SpecError("builtin system coefficients must be numbers") from None
        ham = two_level_sweep(a, b, shape=shape)
        return lambda total_time: ham
    doc = _json_or_path(value, "system")
    family = doc.get("family")
    if family == "sweep":
        allowed = {"family", "shape", "a", "b", "grid"}
        unknown = set(doc) - allowed
        if unknown:
            raise SpecError(f"unknown sweep system fields: {sorted(unknown)}")
        if not {"shape", "a", "b"} <= set(doc):
            raise SpecError("sweep system needs shape, a, b")
        ham = two_level_sweep(
            float(doc["a"]), float(doc["b"]),
            shape=doc["shape"], grid=int(doc.get("grid", 256)),
        )
        return lambda total_time: ham
    if family == "interaction-frame":
        allowed = {"family", "generator", "coupling", "grid"}
        unknown = set(doc) - allowed
        if unknown:
            raise SpecError(f"unknown interaction-frame fields: {sorted(unknown)}")
        if not {"generator", "coupling"} <= set(doc):
            raise SpecError("interaction-frame system needs generator and coupling")
        gen = decomposition_from_json(_json_or_path(doc["generator"], "generator"))
        coup = decomposition_from_json(_json_or_path(doc["coupling"], "coupling"))
        grid = int(doc.get("grid", 64))
        return lambda total_time: interaction_frame(
            gen.total(), coup.total(), total_time, grid=grid
        )
    raise SpecError("system family must be 'sweep' or 'interaction-frame'")


def _potential_from_param(value: Any, cfg: LatticeConfig) -> Potential:
    """Parse zero | constant:<c> | harmonic:<omega>,<center> | well:<depth>,<left>,<right>.

    The JSON form uses {"name": ..., ...} with the same parameters.
    """
    if isinstance(value, str) and not value.lstrip().startswith("{"):
        name, _, rest = value.partition(":")
        args = []
        if rest:
            try:
                args = [float(v) for v in rest.split(",")]
            except ValueError:
                raise SpecError("potential parameters must be numbers") from None
        doc: dict[str, Any] = {"name": name}
        if name == "constant" and len(args) == 1:
            doc["level"] = args[0]
        elif name == "harmonic" and len(args) == 2:
            doc["omega"], doc["center"] = args
        elif name == "well" and len(args) == 3:
            doc["depth"], doc["left"], doc["right"] = args
        elif name != "zero" or args:
            raise SpecError(f"malformed potential {value!r}")
    else:
        doc = _json_or_path(value, "potential")
    name = doc.get("name")
    fields = set(doc) - {"name"}
    if name == "zero" and not fields:
        return zero_potential()
    if name == "constant" and fields == {"level"}:
        return constant_potential(float(doc["level"]))
    if name == "harmonic" and fields == {"omega", "center"}:
        return harmonic_potential(
            cfg.mass, float(doc["omega"]), float(doc["center"]), cfg.x_max
        )
    if name == "well" and fields == {"depth", "left", "right"}:
        return square_well_potential(
            float(doc["depth"]), float(doc["left"]), float(doc["right"])
        )
    raise SpecError(f"unrecognized potential document: {doc}")


def _initial_state(value: Any, cfg: LatticeConfig) -> np.ndarray:
    if not isinstance(value, str):
        raise SpecError("initial state must be a string")
    name, _, rest = value.partition(":")
    if name == "gaussian":
        try:
            x0, sigma, k0 = (float(v) for v in rest.split(","))
        except ValueError:
            raise SpecError("gaussian initial state needs x0,sigma,k0") from None
        return gaussian_packet(cfg, x0, sigma, k0)
    if name == "basis":
        try:
            q = int(rest)
        except ValueError:
            raise SpecError("basis initial state needs a grid index") from None
        if not 0 <= q < cfg.dim:
            raise SpecError("basis index out of range")
        state = np.zeros(cfg.dim, dtype=complex)
        state[q] = 1.0
        return state
    raise SpecError("initial state must be gaussian:x0,sigma,k0 or basis:q")


# ---------------------------------------------------------------------------
# runners


def _run_trotter_error(params: dict[str, Any], seed: int) -> tuple[list[str], list[list[str]]]:
    decomp = _decomposition_from_param(params["decomp"])
    k = _require_int(params, "k", 0)
    t = _require_number(params, "t")
    r_list = params["r_list"]
    if not isinstance(r_list, list) or not r_list:
        raise SpecError("param 'r_list' must be a non-empty list of integers")
    rows = []
    for r in r_list:
        if not isinstance(r, int) or r < 1:
            raise SpecError("r_list entries must be positive integers")
        sched = schedule(decomp.term_count, k, r, t)
        bound = error_bound(decomp, k, t, r)
        meas = measured_error(decomp, sched)
        rows.append([_fmt(k), _fmt(r), _fmt(bound), _fmt(meas)])
    return ["k", "r", "bound", "measured"], rows


_SHORT_SWEEPABLE = {"k": int, "r": int, "t": float, "bits": int}


def _run_short_sim(params: dict[str, Any], seed: int) -> tuple[list[str], list[list[str]]]:
    decomp = _decomposition_from_param(params["decomp"])
    base = {
        "k": _require_int(params, "k", 0),
        "r": _require_int(params, "r", 1),
        "t": _require_number(params, "t"),
        "bits": _require_int(params, "bits", 1),
    }
    points = [base]
    sweep = params.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or set(sweep) != {"param", "values"}:
            raise SpecError("sweep must be {'param': name, 'values': list}")
        name = sweep["param"]
        if name not in _SHORT_SWEEPABLE:
            raise SpecError(f"sweep param must be one of {sorted(_SHORT_SWEEPABLE)}")
        values = sweep["values"]
        if not isinstance(values, list) or not values:
            raise SpecError("sweep values must be a non-empty list")
        caster = _SHORT_SWEEPABLE[name]
        points = [dict(base, **{name: caster(v)}) for v in values]
    header = ["k", "r", "B", "d", "M", "measured_error", "bound"]
    header += [col for col, _ in _QUERY_COLUMNS]
    rows = []
    for pt in points:
        res = simulate(decomp, pt["k"], pt["r"], pt["t"], pt["bits"])
        bound = 4.0 * (res.rounding_bound + res.trotter_bound)
        row = [
            _fmt(res.k), _fmt(res.r), _fmt(res.bits), _fmt(res.d), _fmt(res.M),
            _fmt(res.measured_error), _fmt(bound),
        ]
        row += [_fmt(res.queries.get(key, 0)) for _, key in _QUERY_COLUMNS]
        rows.append(row)
    return header, rows


def _run_long_sim(params: dict[str, Any], seed: int) -> tuple[list[str], list[list[str]]]:
    builder = _system_builder(params["system"])
    sweep = params["T_sweep"]
    if not isinstance(sweep, list) or not sweep:
        raise SpecError("param 'T_sweep' must be a non-empty list of times")
    r = params.get("r")
    if r is not None and (not isinstance(r, int) or r < 4):
        raise SpecError("param 'r' must be an integer >= 4")
    rows = []
    for raw in sweep:
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or raw <= 0:
            raise SpecError("T_sweep entries must be positive numbers")
        total_time = float(raw)
        ham = builder(total_time)
        bounds = adiabatic_bounds(ham)
        # first omitted orders: the odd three-transition term, then the
        # full next even/odd pair
        _, odd1 = jump_bounds(bounds, total_time, 1)
        even2, odd2 = jump_bounds(bounds, total_time, 2)
        meas = longtime_error(ham, total_time, r)
        r_used = r if r is not None else ham.grid
        rows.append([
            _fmt(total_time), _fmt(r_used), _fmt(meas), _fmt(odd1 + even2 + odd2),
        ])
    return ["T", "r", "measured_error", "truncation_bound"], rows


def _run_lagrangian_sim(params: dict[str, Any], seed: int) -> tuple[list[str], list[list[str]]]:
    cfg = LatticeConfig(
        n=_require_int(params, "n", 1),
        x_max=_require_number(params, "xmax"),
        mass=_require_number(params, "mass"),
        r=_require_int(params, "r", 1),
    )
    potential = _potential_from_param(params["potential"], cfg)
    state = _initial_state(params["initial"], cfg)
    reference = state.copy()
    split = split_step_reference(cfg, potential)
    positions = cfg.positions()
    momenta = 2.0 * np.pi * np.arange(cfg.dim) / cfg.x_max
    header = ["step", "norm", "fidelity", "position_mean", "momentum_mean"]
    rows = []
    for step in range(cfg.r + 1):
        if step > 0:
            state = lagrangian_step(cfg, potential, state)
            reference = split @ reference
        norm = float(np.linalg.norm(state))
        fidelity = float(abs(np.vdot(reference, state)))
        weights = np.abs(state) ** 2
        modes = np.abs(np.fft.fft(state, norm="ortho")) ** 2
        rows.append([
            _fmt(step), _fmt(norm), _fmt(fidelity),
            _fmt(float(weights @ positions)), _fmt(float(modes @ momenta)),
        ])
    return header, rows


def _run_gauss_check(params: dict[str, Any], seed: int) -> tuple[list[str], list[list[str]]]:
    count = _require_int(params, "count", 1)
    max_coeff = _require_int(params, "max_coeff", 1)
    children = np.random.SeedSequence(seed).spawn(count)
    header = [
        "index", "a", "b", "c",
        "lhs_real", "lhs_imag", "rhs_real", "rhs_imag", "abs_diff", "tolerance",
    ]
    rows = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        a = c = 0
        while a == 0:
            a = int(rng.integers(-max_coeff, max_coeff + 1))
        while c == 0:
            c = int(rng.integers(-max_coeff, max_coeff + 1))
        b = int(rng.integers(-max_coeff, max_coeff + 1))
        if (a * c + b) % 2 != 0:
            b = b + 1 if b < max_coeff else b - 1
        lhs, rhs = gauss_sum_check(a, b, c)
        diff = abs(lhs - rhs)
        tol = 1e-9 * np.sqrt(abs(c))
        rows.append([
            _fmt(i), _fmt(a), _fmt(b), _fmt(c),
            _fmt(lhs.real), _fmt(lhs.imag), _fmt(rhs.real), _fmt(rhs.imag),
            _fmt(diff), _fmt(tol),
        ])
    return header, rows


_RUNNERS: dict[str, Callable[[dict[str, Any], int], tuple[list[str], list[list[str]]]]] = {
    "trotter-error": _run_trotter_error,
    "short-sim": _run_short_sim,
    "long-sim": _run_long_sim,
    "lagrangian-sim": _run_lagrangian_sim,
    "gauss-check": _run_gauss_check,
}


def run(spec: ExperimentSpec) -> None:
    """Execute one experiment: write its CSV and sidecar manifest."""
    start = time.perf_counter()
    header, rows = _RUNNERS[spec.kind](spec.params, spec.seed)
    lines = [",".join(header)] + [",".join(row) for row in rows]
    out = Path(spec.output)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(("\n".join(lines) + "\n").encode())
    manifest = {
        "spec_hash": spec_hash(spec),
        "version": __version__,
        "wall_clock_seconds": time.perf_counter() - start,
    }
    Path(str(out) + ".manifest.json").write_text(
        json.dumps(manifest, sort_keys=True) + "\n"
    )


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--spec", help="path to a full experiment JSON document")
    sub.add_argument("--seed", type=int, default=None, help="64-bit RNG seed")
    sub.add_argument("--out", help="output CSV path")
    sub.add_argument(
        "--jobs", type=int, default=1,
        help="sweep parallelism; execution is serial and row order is "
        "deterministic either way",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathint",
        description="Run reproducible simulation experiments; one CSV per run.",
    )
    subs = parser.add_subparsers(dest="kind", required=True)

    sub = subs.add_parser("trotter-error", help="product-formula error sweep over r")
    _add_common(sub)
    sub.add_argument("--decomp", help="decomposition JSON (inline or path)")
    sub.add_argument("--k", type=int)
    sub.add_argument("--r-list", help="comma-separated step counts")
    sub.add_argument("--t", type=float)

    sub = subs.add_parser("short-sim", help="amplified path-sum simulation")
    _add_common(sub)
    sub.add_argument("--decomp", help="decomposition JSON (inline or path)")
    sub.add_argument("--k", type=int)
    sub.add_argument("--r", type=int)
    sub.add_argument("--t", type=float)
    sub.add_argument("--bits", type=int)
    sub.add_argument("--sweep", help="param:v1,v2,... over one of k,r,t,bits")

    sub = subs.add_parser("long-sim", help="slow-sweep truncated propagator errors")
    _add_common(sub)
    sub.add_argument("--system", help="sweep:<shape>:<a>,<b>, JSON, or a path")
    sub.add_argument("--T-sweep", dest="T_sweep", help="comma-separated total times")
    sub.add_argument("--r", type=int, help="quadrature panel count")

    sub = subs.add_parser("lagrangian-sim", help="lattice action-phase trajectory")
    _add_common(sub)
    sub.add_argument("--n", type=int)
    sub.add_argument("--xmax", type=float)
    sub.add_argument("--mass", type=float)
    sub.add_argument("--r", type=int)
    sub.add_argument("--potential", help="zero|constant:c|harmonic:omega,x0|well:d,l,r")
    sub.add_argument("--initial", help="gaussian:x0,sigma,k0 or basis:q")

    sub = subs.add_parser("gauss-check", help="reciprocity fuzz over random triples")
    _add_common(sub)
    sub.add_argument("--count", type=int)
    sub.add_argument("--max-coeff", dest="max_coeff", type=int)

    return parser


def _int_list(text: str, what: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise SpecError(f"{what} must be comma-separated integers") from None


def _float_list(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise SpecError(f"{what} must be comma-separated numbers") from None


def _inline_params(args: argparse.Namespace) -> dict[str, Any]:
    def need(name: str, flag: str) -> Any:
        value = getattr(args, name)
        if value is None:
            raise SpecError(f"missing required flag {flag} (or use --spec)")
        return value

    if args.kind == "trotter-error":
        return {
            "decomp": _json_or_path(need("decomp", "--decomp"), "decomposition"),
            "k": need("k", "--k"),
            "r_list": _int_list(need("r_list", "--r-list"), "--r-list"),
            "t": need("t", "--t"),
        }
    if args.kind == "short-sim":
        params: dict[str, Any] = {
            "decomp": _json_or_path(need("decomp", "--decomp"), "decomposition"),
            "k": need("k", "--k"),
            "r": need("r", "--r"),
            "t": need("t", "--t"),
            "bits": need("bits", "--bits"),
        }
        if args.sweep is not None:
            name, _, rest = args.sweep.partition(":")
            if name not in _SHORT_SWEEPABLE or not rest:
                raise SpecError("--sweep must look like param:v1,v2,...")
            if _SHORT_SWEEPABLE[name] is int:
                values: list[Any] = _int_list(rest, "--sweep values")
            else:
                values = _float_list(rest, "--sweep values")
            params["sweep"] = {"param": name, "values": values}
        return params
    if args.kind == "long-sim":
        system = need("system", "--system")
        if isinstance(system, str) and not system.startswith("sweep:"):
            system = _json_or_path(system, "system")
        params = {
            "system": system,
            "T_sweep": _float_list(need("T_sweep", "--T-sweep"), "--T-sweep"),
        }
        if args.r is not None:
            params["r"] = args.r
        return params
    if args.kind == "lagrangian-sim":
        potential = need("potential", "--potential")
        if isinstance(potential, str) and potential.lstrip().startswith("{"):
            potential = _json_or_path(potential, "potential")
        return {
            "n": need("n", "--n"),
            "xmax": need("xmax", "--xmax"),
            "mass": need("mass", "--mass"),
            "r": need("r", "--r"),
            "potential": potential,
            "initial": need("initial", "--initial"),
        }
    return {
        "count": need("count", "--count"),
        "max_coeff": need("max_coeff", "--max-coeff"),
    }


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    if args.jobs < 1:
        raise SpecError("--jobs must be at least 1")
    if args.spec is not None:
        path = Path(args.spec)
        if not path.is_file():
            raise SpecError(f"spec file not found: {args.spec}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SpecError(f"spec file is not valid JSON: {exc}") from None
        spec = spec_from_dict(doc)
        if spec.kind != args.kind:
            raise SpecError(
                f"spec kind {spec.kind!r} does not match subcommand {args.kind!r}"
            )
        if args.seed is not None or args.out is not None:
            doc = spec_to_dict(spec)
            if args.seed is not None:
                doc["seed"] = args.seed
            if args.out is not None:
                doc["output"] = args.out
            spec = spec_from_dict(doc)
        return spec
    if args.out is None:
        raise SpecError("missing required flag --out (or use --spec)")
    doc = {
        "kind": args.kind,
        "params": _inline_params(args),
        "seed": args.seed if args.seed is not None else 0,
        "output": args.out,
    }
    return spec_from_dict(doc)


def _blame_module(exc: BaseException) -> str:
    name = "pathint.cli"
    tb = exc.__traceback__
    while tb is not None:
        frame_name = tb.tb_frame.f_globals.get("__name__", "")
        if frame_name.startswith("pathint.") and frame_name != "pathint.cli":
            name = frame_name
        tb = tb.tb_next
    return name


def _fail(category: str, exc: BaseException, code: int) -> int:
    message = " ".join(str(exc).split())
    line = json.dumps(
        {"error": category, "module": _blame_module(exc), "message": message}
    )
    print(line, file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = _spec_from_args(args)
        run(spec)
    except SpecError as exc:
        return _fail("spec", exc, 2)
    except CapExceeded as exc:
        return _fail("cap", exc, 3)
    except InvariantViolation as exc:
        return _fail("invariant", exc, 4)
    return 0


if __name__ == "__main__":
    sys.exit(main())
