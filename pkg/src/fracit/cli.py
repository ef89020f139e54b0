"""``fracit`` command line.

Data goes to stdout, logs to stderr.  Exit codes:

* 0: success
* 1: a verification row failed
* 2: input outside the mathematical domain
* 3: numerical failure (no decay, precision ceiling, no convergence)
* 4: degenerate fixed-point multiplier while building a hyper-operator level
* 5: output could not be written

Numbers in JSON output are decimal strings so no digits are lost to binary
floats.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from typing import Iterable, List, Optional

import mpmath as mp

from . import errors
from .differintegral import EvalConfig
from .dynamics import ExpBase, find_fixed_point
from .hyperops import DEFAULT_MAX_LEVEL, build_level, hyper_eval_result, verify_hyper_recursion
from .iteration import complex_iterate, orbit_theta, period, verify_semigroup
from .koenigs import koenigs_iterate, schroder_model
from .numerics import MIN_DIGITS, PrecisionContext
from .tetration import tetrate_result, verify_tetration

log = logging.getLogger("fracit")

EXIT_OK, EXIT_FAILED, EXIT_DOMAIN, EXIT_NUMERIC, EXIT_DEGENERATE, EXIT_IO = range(6)

PARSE_DIGITS = 120

TABLE_HEADER = ["z_re", "z_im", "val_re", "val_im", "err"]

NUMERIC_ERRORS = (
    errors.NonIntegrable,
    errors.PrecisionExhausted,
    errors.NoConvergence,
    errors.NotConverged,
    errors.QuadratureStall,
    errors.BasinEscape,
    errors.NearIntegerPole,
)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing helpers


def parse_complex(text: str) -> mp.mpc:
    """``"re"`` or ``"re,im"``; decimal points only, independent of locale."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) > 2 or not all(parts):
        raise UsageError(f"cannot parse complex number {text!r}; expected 're' or 're,im'")
    try:
        # Parse well beyond any working precision so typed digits stay exact.
        with mp.workdps(PARSE_DIGITS):
            re = mp.mpf(parts[0])
            im = mp.mpf(parts[1]) if len(parts) == 2 else mp.mpf(0)
    except (ValueError, TypeError):
        raise UsageError(f"cannot parse complex number {text!r}") from None
    return mp.mpc(re, im) if im else re


def _real(text: str):
    v = parse_complex(text)
    if isinstance(v, mp.mpc):
        raise UsageError(f"expected a real number, got {text!r}")
    return v


def _grid_value(text: str):
    text = text.strip()
    try:
        if "j" in text:
            # Python's complex() syntax; values pass through binary floats.
            c = complex(text)
            return mp.mpc(c.real, c.imag) if c.imag else mp.mpf(c.real)
        with mp.workdps(PARSE_DIGITS):
            return mp.mpf(text)
    except (ValueError, TypeError):
        raise UsageError(f"cannot parse grid value {text!r}") from None


def frange(start, stop, step) -> List:
    """``start, start+step, ...`` up to ``stop`` inclusive (a relative 1e-9 slack absorbs rounding)."""
    if step <= 0:
        raise UsageError("step must be positive")
    if stop < start:
        return []
    out, k = [], 0
    while True:
        with mp.workdps(PARSE_DIGITS):
            v = start + k * step
        if v > stop + step * mp.mpf("1e-9"):
            break
        out.append(v)
        k += 1
    return out


def parse_grid_spec(spec: Optional[str]) -> dict:
    """``"z=0.25:3:0.25;xi=1,1.5"``: ranges ``start:stop:step`` or comma lists.

    List entries use Python complex syntax for non-real values (``0.5+0.5j``).
    """
    out = {}
    if not spec:
        return out
    for item in spec.split(";"):
        if not item.strip():
            continue
        if "=" not in item:
            raise UsageError(f"grid item {item!r} needs the form name=values")
        name, values = (s.strip() for s in item.split("=", 1))
        if not values:
            out[name] = []
        elif ":" in values:
            bits = values.split(":")
            if len(bits) != 3:
                raise UsageError(f"range {values!r} needs start:stop:step")
            out[name] = frange(*(_grid_value(b) for b in bits))
        else:
            out[name] = [_grid_value(v) for v in values.split(",")]
    return out


def fmt(x, digits: int) -> str:
    return mp.nstr(x, digits, strip_zeros=False) if x != 0 else "0"


def fmt_err(e) -> str:
    return f"{float(e):.3e}"


def _parts(v):
    v = mp.mpmathify(v)
    if isinstance(v, mp.mpc):
        return v.real, v.imag
    return v, mp.mpf(0)


def _cfg(args) -> EvalConfig:
    return EvalConfig(ctx=PrecisionContext(args.digits), tol=args.tol)


def _emit(obj, args, out=None):
    out = out or sys.stdout
    if getattr(args, "format", "json") == "text":
        for k, v in obj.items():
            out.write(f"{k}: {v}\n")
    else:
        out.write(json.dumps(obj, indent=2) + "\n")


def _error_object(exc: BaseException, code: int) -> dict:
    err = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    level = getattr(exc, "level", None)
    if level is not None:
        err["level"] = level
    return {"error": err}


# ---------------------------------------------------------------------------
# commands


def cmd_fixed_point(args) -> int:
    ctx = PrecisionContext(args.digits)
    m = ExpBase(_real(args.alpha))
    fp = find_fixed_point(m, ctx)
    _emit(
        {
            "alpha": fmt(m.alpha, args.digits),
            "beta": fmt(fp.beta, args.digits),
            "multiplier": fmt(fp.multiplier, args.digits),
            "residual": fmt_err(fp.residual),
        },
        args,
    )
    return EXIT_OK


def cmd_tetrate(args) -> int:
    cfg = _cfg(args)
    alpha = _real(args.alpha)
    z = parse_complex(args.z)
    res = tetrate_result(alpha, z, cfg)
    if not res.error_estimate <= cfg.tol:
        raise errors.PrecisionExhausted(f"error estimate {res.error_estimate:.3g} exceeds tol={cfg.tol:g}")
    re, im = _parts(res.value)
    _emit(
        {
            "value": {"re": fmt(re, args.digits), "im": fmt(im, args.digits)},
            "error_estimate": fmt_err(res.error_estimate),
            "params": {"alpha": args.alpha, "z": args.z, "digits": args.digits, "tol": args.tol, "path": res.path},
        },
        args,
    )
    return EXIT_OK


def cmd_hyper(args) -> int:
    cfg = _cfg(args)
    alpha = _real(args.alpha)
    z = parse_complex(args.z)
    tower = build_level(alpha, args.n, cfg, args.max_level)
    res = hyper_eval_result(tower, z)
    re, im = _parts(res.value)
    meta = {"level": tower.level}
    if tower.omega is not None:
        meta["omega"] = fmt(tower.omega.beta, args.digits)
        meta["multiplier"] = fmt(tower.omega.multiplier, args.digits)
    meta["coefficients"] = [fmt(c, args.digits) for c in tower.coeffs[:6]]
    _emit(
        {
            "value": {"re": fmt(re, args.digits), "im": fmt(im, args.digits)},
            "error_estimate": fmt_err(res.error_estimate),
            "tower": meta,
            "params": {"alpha": args.alpha, "n": args.n, "z": args.z, "digits": args.digits, "tol": args.tol},
        },
        args,
    )
    return EXIT_OK


# Each suite yields rows (inputs dict, residual, tolerance).

_STANDARD_Z = [mp.mpf(k) / 4 for k in range(1, 13)]


def _suite_semigroup(alpha, grid, cfg):
    m = ExpBase(alpha)
    zs = grid.get("z", [mp.mpf("0.25"), mp.mpf("0.5"), mp.mpf("1.5"), mp.mpc("0.5", "0.5")])
    xis = grid.get("xi", [mp.mpf(1), mp.mpf("1.5"), mp.mpf("1.9")])
    for xi in xis:
        for z1 in zs:
            for z2 in zs:
                yield {"xi": xi, "z1": z1, "z2": z2}, verify_semigroup(m, z1, z2, xi, cfg), 1e-7


def _suite_tetration(alpha, grid, cfg):
    zs = grid.get("z", _STANDARD_Z + [mp.mpc("0.5", "0.5"), mp.mpc("1", "0.25")])
    for z in zs:
        yield {"z": z}, verify_tetration(alpha, z, cfg), 1e-8


def _suite_hyper(alpha, grid, cfg):
    ns = [int(n.real if isinstance(n, mp.mpc) else n) for n in grid.get("n", [2])]
    xs = grid.get("x", [mp.mpf("0.5"), mp.mpf(1), mp.mpf("1.5"), mp.mpf(2)])
    for n in ns:
        for x in xs:
            yield {"n": n, "x": x}, verify_hyper_recursion(alpha, n, x, cfg), 1e-6


def _suite_koenigs(alpha, grid, cfg):
    m = ExpBase(alpha)
    model = schroder_model(m, cfg.ctx)
    xis = grid.get("xi", [model.fp.beta - mp.mpf("0.1")])
    zs = grid.get("z", [mp.mpc(re, im) for re in _STANDARD_Z for im in (0, 0.5, -0.5, 1, -1)])
    for xi in xis:
        for z in zs:
            diff = abs(koenigs_iterate(model, m, z, xi, cfg.ctx) - complex_iterate(m, z, xi, cfg))
            yield {"xi": xi, "z": z}, diff, 1e-7
        for z in grid.get("zp", [mp.mpf(1), mp.mpf(2)]):
            shifted = z + period(m, cfg)
            diff = abs(koenigs_iterate(model, m, shifted, xi, cfg.ctx) - complex_iterate(m, z, xi, cfg))
            yield {"xi": xi, "z": z, "shifted_by_period": 1}, diff, 1e-6


def _suite_limits(alpha, grid, cfg):
    from .differintegral import zero_limit_identity

    m = ExpBase(alpha)
    xis = grid.get("xi", [mp.mpf(1), mp.mpf("1.5"), mp.mpf("1.9")])
    fp = find_fixed_point(m, cfg.ctx)
    z_far = mp.mpf("20.5")
    for xi in xis:
        ts = orbit_theta(m, xi, cfg)
        yield {"xi": xi, "check": "z_to_0"}, zero_limit_identity(ts, cfg, xi=xi, exact_tail=True), 1e-9
        # Below beta the map contracts by at most lambda per step.
        bound = float(fp.multiplier**20 * abs(xi - fp.beta))
        yield {"xi": xi, "check": "z_to_inf", "z": z_far}, abs(complex_iterate(m, z_far, xi, cfg) - fp.beta), bound


SUITES = {
    "semigroup": _suite_semigroup,
    "tetration": _suite_tetration,
    "hyper": _suite_hyper,
    "koenigs": _suite_koenigs,
    "limits": _suite_limits,
}


def _cell(v, digits):
    if isinstance(v, (int, str)):
        return str(v)
    re, im = _parts(v)
    short = lambda x: mp.nstr(x, digits)
    return short(re) if im == 0 else f"{short(re)}{'+' if im >= 0 else '-'}{short(abs(im))}j"


def cmd_verify(args) -> int:
    cfg = _cfg(args)
    alpha = _real(args.alpha)
    grid = parse_grid_spec(args.grid_spec)
    if any(len(v) == 0 for v in grid.values()):
        log.warning("grid is empty; no rows to verify")
        if args.format == "csv":
            sys.stdout.write("suite,inputs,residual,tolerance,pass\n")
        return EXIT_OK
    rows = []
    for inputs, residual, tol in SUITES[args.suite](alpha, grid, cfg):
        ok = bool(residual <= tol)
        rows.append((inputs, residual, tol, ok))
        log.info("%s %s residual=%s pass=%s", args.suite, inputs, fmt_err(residual), ok)
    digits = min(args.digits, 17)
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["suite", "inputs", "residual", "tolerance", "pass"])
        for inputs, residual, tol, ok in rows:
            desc = " ".join(f"{k}={_cell(v, digits)}" for k, v in inputs.items())
            w.writerow([args.suite, desc, fmt_err(residual), f"{tol:g}", "true" if ok else "false"])
    else:
        for inputs, residual, tol, ok in rows:
            obj = {
                "suite": args.suite,
                "inputs": {k: _cell(v, digits) for k, v in inputs.items()},
                "residual": fmt_err(residual),
                "tolerance": f"{tol:g}",
                "pass": ok,
            }
            sys.stdout.write(json.dumps(obj) + "\n")
    return EXIT_OK if all(r[3] for r in rows) else EXIT_FAILED


def _parse_range(text: str):
    bits = [b for b in str(text).replace(",", ":").split(":") if b.strip()]
    if len(bits) != 2:
        raise UsageError(f"--range needs 'start:stop', got {text!r}")
    start, stop = _real(bits[0]), _real(bits[1])
    if not (start > 0 and stop >= start):
        raise UsageError("--range needs 0 < start <= stop")
    return start, stop


def table_rows(args) -> Iterable[list]:
    cfg = _cfg(args)
    alpha = _real(args.alpha)
    start, stop = _parse_range(args.range)
    step = _real(args.step)
    if step <= 0:
        raise UsageError("--step must be positive")
    zs = frange(start, stop, step) or [start]
    if args.what == "hyper":
        tower = build_level(alpha, args.n, cfg, args.max_level)
        evaluate = lambda z: hyper_eval_result(tower, z)
    else:
        evaluate = lambda z: tetrate_result(alpha, z, cfg)
    for z in zs:
        res = evaluate(z)
        re, im = _parts(res.value)
        yield [mp.nstr(z, 15), "0", fmt(re, args.digits), fmt(im, args.digits), fmt_err(res.error_estimate)]


def cmd_table(args) -> int:
    rows = list(table_rows(args))
    buf = io.StringIO()
    if args.format == "csv":
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        w.writerows(rows)
    else:
        buf.write(json.dumps([dict(zip(TABLE_HEADER, r)) for r in rows], indent=2) + "\n")
    text = buf.getvalue()
    if args.out in (None, "-"):
        sys.stdout.write(text)
        return EXIT_OK
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        log.error("cannot write %s: %s", args.out, exc)
        sys.stdout.write(json.dumps(_error_object(exc, EXIT_IO)) + "\n")
        return EXIT_IO
    log.info("wrote %d rows to %s", len(rows), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parser


def _default_digits() -> int:
    env = os.environ.get("FRACIT_DIGITS")
    if env:
        try:
            return int(env)
        except ValueError:
            log.warning("ignoring non-integer FRACIT_DIGITS=%r", env)
    return 30


def build_parser(defaults: Optional[dict] = None) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--digits", type=int, default=_default_digits(), help="decimal digits (env FRACIT_DIGITS)")
    common.add_argument("--tol", type=float, default=1e-10, help="absolute error tolerance")
    common.add_argument("--max-level", type=int, default=DEFAULT_MAX_LEVEL, dest="max_level")
    common.add_argument("--config", help="JSON file of defaults; explicit flags win")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(prog="fracit", description="Complex iterates, tetration and hyper-operators.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("fixed-point", parents=[common], help="attracting fixed point of alpha**x")
    s.add_argument("--alpha", required=True)
    s.add_argument("--format", choices=["json", "text"], default="json")
    s.set_defaults(func=cmd_fixed_point)

    s = sub.add_parser("tetrate", parents=[common], help="^z alpha")
    s.add_argument("--alpha", required=True)
    s.add_argument("--z", required=True, help="'re' or 're,im'")
    s.add_argument("--format", choices=["json", "text"], default="json")
    s.set_defaults(func=cmd_tetrate)

    s = sub.add_parser("hyper", parents=[common], help="alpha ^^n z")
    s.add_argument("--alpha", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--z", required=True, help="'re' or 're,im'")
    s.add_argument("--format", choices=["json", "text"], default="json")
    s.set_defaults(func=cmd_hyper)

    s = sub.add_parser("verify", parents=[common], help="run a verification suite")
    s.add_argument("--suite", choices=sorted(SUITES), required=True)
    s.add_argument("--alpha", default="1.41421356237")
    s.add_argument("--grid-spec", dest="grid_spec", help="e.g. 'z=0.25:3:0.25;xi=1,1.5'")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("table", parents=[common], help="tabulate tetration or a hyper-operator")
    s.add_argument("--what", choices=["tetration", "hyper"], default="tetration")
    s.add_argument("--alpha", required=True)
    s.add_argument("--n", type=int, default=2, help="level for --what hyper")
    s.add_argument("--range", required=True, help="'start:stop'")
    s.add_argument("--step", required=True)
    s.add_argument("--out", default="-")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.set_defaults(func=cmd_table)

    if defaults:
        for action in sub.choices.values():
            known = {a.dest for a in action._actions}
            action.set_defaults(**{k: v for k, v in defaults.items() if k in known})
    return p


def _load_config(argv) -> dict:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    ns, _ = pre.parse_known_args(argv)
    if not ns.config:
        return {}
    with open(ns.config, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise UsageError("--config must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        defaults = _load_config(argv)
    except (OSError, ValueError, UsageError) as exc:
        sys.stderr.write(f"fracit: bad --config: {exc}\n")
        return EXIT_DOMAIN
    args = build_parser(defaults).parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    code = EXIT_OK
    try:
        if args.digits < MIN_DIGITS:
            raise UsageError(f"--digits must be at least {MIN_DIGITS}")
        code = args.func(args)
    except errors.DegenerateMultiplier as exc:
        code = EXIT_DEGENERATE if args.command == "hyper" else EXIT_DOMAIN
        _report(exc, code)
    except (errors.DomainError, UsageError) as exc:
        code = EXIT_DOMAIN
        _report(exc, code)
    except NUMERIC_ERRORS as exc:
        code = EXIT_NUMERIC
        _report(exc, code)
    except OSError as exc:
        code = EXIT_IO
        _report(exc, code)
    sys.stdout.flush()
    return code


def _report(exc, code):
    log.error("%s: %s", type(exc).__name__, exc)
    sys.stdout.write(json.dumps(_error_object(exc, code)) + "\n")


if __name__ == "__main__":
    sys.exit(main())
