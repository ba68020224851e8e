"""Command-line pipeline: compile, simulate, spectrum, classify, fitj.

Stage boundaries are files so each step can be run, inspected and tested
in isolation.  Outputs are byte-deterministic: JSON is emitted with sorted
keys and floats at 17 significant digits, CSV rows likewise.

Exit codes: 0 success (classify: constant), 1 classify: balanced,
2 classify: error or malformed flags (argparse), 64 usage errors,
65 invalid/corrupt data, 66 missing input file.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import functions as fn
from . import spectra
from .compiler import CompileOptions, CompilerError, PulseProgram, compile_function
from .simulator import Fid, acquire, run_program, thermal_state
from .spinsys import SpinSystem, alanine

EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66


def dump_json(obj) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""

    def emit(o):
        if isinstance(o, bool):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, float):
            if o != o or o in (float("inf"), float("-inf")):
                raise ValueError("non-finite float in JSON output")
            return format(o, ".17g")
        if isinstance(o, int):
            return str(o)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, (list, tuple)):
            return "[" + ",".join(emit(v) for v in o) + "]"
        if isinstance(o, dict):
            items = sorted(o.items(), key=lambda kv: str(kv[0]))
            return "{" + ",".join(f"{json.dumps(str(k))}:{emit(v)}" for k, v in items) + "}"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return emit(obj) + "\n"


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from exc


def _load_system(path) -> SpinSystem:
    if path is None:
        return alanine()
    return SpinSystem.from_dict(_load_json(path))


def _select_function(args) -> fn.FunctionSpec:
    if bool(args.function) == bool(args.table):
        raise UsageError("exactly one of --function or --table is required")
    if args.function:
        return fn.named_function(args.function)
    return fn.expand_gf2(fn.parse_table_string(args.table))


class UsageError(ValueError):
    pass


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_functions(args) -> int:
    if args.action == "list":
        sizes = {}
        for table in fn.all_admissible_tables():
            cls = fn.canonical_class(fn.expand_gf2(table))
            sizes[cls.class_id] = sizes.get(cls.class_id, 0) + 1
        rows = []
        for class_id, name in enumerate(fn.REPRESENTATIVE_NAMES):
            spec = fn.named_function(name)
            cls = fn.canonical_class(spec)
            rows.append(
                {
                    "name": name,
                    "polynomial": spec.polynomial_str(),
                    "kind": cls.kind,
                    "class_id": class_id,
                    "class_size": sizes[class_id],
                    "active_class": cls.active_class,
                }
            )
        if args.json:
            sys.stdout.write(dump_json(rows))
        else:
            print(f"{'name':6} {'kind':9} {'class':5} {'size':4} {'active':6} polynomial")
            for r in rows:
                print(
                    f"{r['name']:6} {r['kind']:9} {r['class_id']:5} "
                    f"{r['class_size']:4} {r['active_class']:6} {r['polynomial']}"
                )
        return 0
    # show
    spec = _select_function(args)
    kind = fn.classify_kind(spec.truth_table)
    info = {
        "table": "".join(str(b) for b in spec.truth_table),
        "polynomial": spec.polynomial_str(),
        "kind": kind,
    }
    if kind != "neither":
        cls = fn.canonical_class(spec)
        info.update(
            {
                "class_id": cls.class_id,
                "class_representative": cls.name,
                "active_class": cls.active_class,
                "permutation": list(cls.permutation),
            }
        )
    sys.stdout.write(dump_json(info))
    return 0


def cmd_compile(args) -> int:
    spec = _select_function(args)
    system = _load_system(args.system)
    options = CompileOptions(
        indirect=args.indirect,
        thermal_input=not args.no_thermal_shortcut,
        timed=args.mode == "timed",
    )
    program = compile_function(spec, system, options)
    _write(args.out, dump_json(program.to_dict()))
    print(f"compiled {spec.polynomial_str()!r}: {len(program.active)} active ops, "
          f"duration {program.duration_s * 1e3:.3f} ms -> {args.out}")
    return 0


def cmd_simulate(args) -> int:
    program = PulseProgram.from_dict(_load_json(args.program))
    system = _load_system(args.system)
    mode = args.mode or program.metadata.get("mode", "ideal")
    rho = run_program(thermal_state(system), program, system, mode)
    fid = acquire(rho, system, n_points=args.points, sweep_hz=args.sweep,
                  phi_acq_deg=args.phi_acq)
    _write(args.out, dump_json(fid.to_dict()))
    print(f"simulated ({mode}): {args.points} points at {args.sweep} Hz sweep -> {args.out}")
    return 0


def cmd_spectrum(args) -> int:
    fid = Fid.from_dict(_load_json(args.fid))
    spec = spectra.fft_spectrum(fid)
    _write(args.out, spectra.spectrum_to_csv(spec))
    if args.svg:
        windows = None
        if args.system or args.default_system_windows:
            system = _load_system(args.system)
            windows = spectra.default_windows(system)
        _write(args.svg, spectra.render_spectrum_svg(spec, windows))
    print(f"spectrum: {spec.freqs_hz.size} points -> {args.out}")
    return 0


def cmd_classify(args) -> int:
    f_spec = spectra.spectrum_from_csv(open(args.spectrum).read())
    fiducial = spectra.spectrum_from_csv(open(args.fiducial).read())
    verdict = spectra.classify_dj(f_spec, fiducial, threshold=args.threshold)
    print(verdict)
    return 0 if verdict == "constant" else 1


def cmd_fitj(args) -> int:
    spec = spectra.spectrum_from_csv(open(args.spectrum).read())
    fit = spectra.fit_j_from_dispersion(spec, args.center, args.window)
    report = dump_json(fit.to_dict())
    if args.out:
        _write(args.out, report)
    sys.stdout.write(report)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="djnmr",
        description="Compile Boolean functions to NMR pulse programs, "
        "simulate them, and analyse the output spectra.",
    )
    p.add_argument("--seed", type=int, default=None, help="reserved; accepted and ignored")
    sub = p.add_subparsers(dest="command", required=True)

    pf = sub.add_parser("functions", help="list or inspect the admissible functions")
    pf.add_argument("action", choices=["list", "show"])
    pf.add_argument("--function", help="named representative (const, f1..f10)")
    pf.add_argument("--table", help="truth table bits, x = 0 leftmost")
    pf.add_argument("--json", action="store_true")
    pf.set_defaults(func=cmd_functions)

    pc = sub.add_parser("compile", help="compile a function to a pulse program")
    pc.add_argument("--function")
    pc.add_argument("--table")
    pc.add_argument("--system", help="spin-system JSON (default: bundled alanine)")
    pc.add_argument("--out", required=True)
    pc.add_argument("--indirect", choices=["swap-cnot", "swap-scal"], default="swap-cnot")
    pc.add_argument("--mode", choices=["ideal", "timed"], default="ideal")
    pc.add_argument("--no-thermal-shortcut", action="store_true")
    pc.set_defaults(func=cmd_compile)

    ps = sub.add_parser("simulate", help="run a pulse program from thermal equilibrium")
    ps.add_argument("--program", required=True)
    ps.add_argument("--system")
    ps.add_argument("--out", required=True)
    ps.add_argument("--mode", choices=["ideal", "timed"], default=None,
                    help="override the program's compiled mode")
    ps.add_argument("--points", type=int, default=4096)
    ps.add_argument("--sweep", type=float, default=400.0)
    ps.add_argument("--phi-acq", type=float, default=0.0)
    ps.set_defaults(func=cmd_simulate)

    pp = sub.add_parser("spectrum", help="Fourier transform an acquired FID")
    pp.add_argument("--fid", required=True)
    pp.add_argument("--out", required=True)
    pp.add_argument("--svg", help="also render an SVG plot")
    pp.add_argument("--system", help="spin system for per-multiplet SVG insets")
    pp.add_argument("--default-system-windows", action="store_true",
                    help="use the bundled system's windows for SVG insets")
    pp.set_defaults(func=cmd_spectrum)

    pk = sub.add_parser("classify", help="balanced/constant decision against a fiducial")
    pk.add_argument("--spectrum", required=True)
    pk.add_argument("--fiducial", required=True)
    pk.add_argument("--threshold", type=float, default=0.2)
    pk.set_defaults(func=cmd_classify)

    pj = sub.add_parser("fitj", help="extract J from a dispersion-mode doublet")
    pj.add_argument("--spectrum", required=True)
    pj.add_argument("--center", type=float, required=True)
    pj.add_argument("--window", type=float, required=True)
    pj.add_argument("--out")
    pj.set_defaults(func=cmd_fitj)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    is_classify = args.command == "classify"
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"djnmr: missing input file: {exc.filename or exc}", file=sys.stderr)
        return 2 if is_classify else EX_NOINPUT
    except UsageError as exc:
        print(f"djnmr: {exc}", file=sys.stderr)
        return 2 if is_classify else EX_USAGE
    except (ValueError, CompilerError) as exc:
        print(f"djnmr: {exc}", file=sys.stderr)
        return 2 if is_classify else EX_DATAERR


if __name__ == "__main__":
    sys.exit(main())
