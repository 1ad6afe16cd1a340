"""``dpa-clt`` command line.

Exit codes: 0 success, 1 invalid input or usage, 2 internal error.  Model
parameters come from ``--alpha/--gamma/--lambda/--mu`` and optionally a
``--config`` file of ``key = value`` lines; explicit flags win.  Every
subcommand writes a ``<output>.manifest.json`` next to its main output.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from . import __version__
from .covariance import TAILS, VARIANTS, final_covariance
from .errors import BoxTooSmall, CapacityExceeded, ParameterError
from .exact import ENUM_CAP, enumerate_exact
from .io import RunManifest, write_csv, write_json
from .limits import p_grid
from .martingale import xi_matrix, xi_table
from .params import IndexWindow, ModelParams, parse_pair, read_config, validate
from .sim import grow
from .verify import run_ensemble

USER_ERRORS = (ValueError, CapacityExceeded, BoxTooSmall)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _pair(text: str) -> tuple[int, int]:
    try:
        return parse_pair(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def resolve_params(args) -> ModelParams:
    cfg = read_config(args.config) if args.config else {}
    vals = {}
    for key, flag in (("alpha", "alpha"), ("gamma", "gamma"), ("lambda", "lam"), ("mu", "mu")):
        v = getattr(args, flag)
        if v is None and key in cfg:
            v = float(cfg[key])
        vals[key] = v
    missing = [f"--{k}" for k in ("alpha", "lambda", "mu") if vals[k] is None]
    if missing:
        raise UsageError(f"missing required parameter(s): {', '.join(missing)}")
    return validate(vals["alpha"], vals["gamma"], vals["lambda"], vals["mu"])


def _manifest(args, argv, params: ModelParams, **seeds) -> RunManifest:
    m = RunManifest(command=args.command, argv=list(argv), params=params.as_dict(), seeds=seeds)
    if args.config:
        m.add_input(args.config)
    return m


def _close(m: RunManifest, outputs, manifest_path: Path) -> None:
    for p in outputs:
        m.add_output(p)
    m.finish().write(manifest_path)


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".manifest.json")


def cmd_limits(args, argv) -> None:
    params = resolve_params(args)
    g = p_grid(params, max(args.imax, 1), max(args.jmax, 1))
    out = Path(args.out)
    rows = [(i, j, float(g.p[i, j])) for i in range(args.imax + 1) for j in range(args.jmax + 1)]
    write_csv(out, ("i", "j", "p"), rows)
    diag = out.with_name(out.stem + ".diagnostics.json")
    write_json(diag, {"params": params.as_dict(), **g.diagnostics()})
    _close(_manifest(args, argv, params), [out, diag], _sidecar(out))


def cmd_xi(args, argv) -> None:
    params = resolve_params(args)
    i, j = args.target
    t = xi_table(params, i, j)
    out = Path(args.out)
    write_csv(out, ("k", "l", "xi"), [(k, l, t[k, l]) for k in range(i + 1) for l in range(j + 1)])
    _close(_manifest(args, argv, params), [out], _sidecar(out))


def cmd_xi_matrix(args, argv) -> None:
    params = resolve_params(args)
    xm = xi_matrix(params, IndexWindow(*args.window))
    out = Path(args.out)
    rows = [
        (i, j, k, l, float(xm.matrix[a, b]))
        for a, (i, j) in enumerate(xm.coords)
        for b, (k, l) in enumerate(xm.coords)
    ]
    write_csv(out, ("i", "j", "k", "l", "xi"), rows)
    _close(_manifest(args, argv, params), [out], _sidecar(out))


def cmd_covariance(args, argv) -> None:
    params = resolve_params(args)
    model = final_covariance(
        params, IndexWindow(*args.window), variant=args.variant, tail=args.tail, box=args.box
    )
    out = Path(args.out)
    write_json(
        out,
        {
            "params": params.as_dict(),
            "window": list(args.window),
            "coords": [list(c) for c in model.coords],
            "variant": model.variant,
            "A": model.A.tolist(),
            "B": model.B.tolist(),
            "C": model.C.tolist(),
            "Ctilde": model.Ctilde.tolist(),
            "final_cov": model.final.tolist(),
            "final_cov_by_variant": {k: v.tolist() for k, v in model.final_by_variant.items()},
            "xi_matrix": model.xi.matrix.tolist(),
            "diagnostics": model.diagnostics(),
        },
    )
    _close(_manifest(args, argv, params), [out], _sidecar(out))


def cmd_simulate(args, argv) -> None:
    params = resolve_params(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for run in range(args.runs):
        stream = run if args.runs > 1 else None
        if args.window is None:
            res = grow(params, args.n, args.seed, stream=stream)
            rows.extend((run, args.n, i, j, c) for i, j, c in res.counts.rows())
        else:
            res = grow(
                params, args.n, args.seed, stream=stream, window=IndexWindow(*args.window),
                checkpoints=args.checkpoints, full_counts=False,
            )
            wc = res.window_counts()
            for t, cp in enumerate(res.checkpoints):
                rows.extend(
                    (run, cp, i, j, int(wc[t, a])) for a, (i, j) in enumerate(res.window.coords)
                )
    out = outdir / "counts.csv"
    write_csv(out, ("run", "checkpoint_n", "i", "j", "count"), rows)
    m = _manifest(args, argv, params, seed=args.seed, runs=args.runs)
    _close(m, [out], outdir / "manifest.json")


def cmd_enumerate(args, argv) -> None:
    params = resolve_params(args)
    dist = enumerate_exact(params, args.n)[-1]
    out = Path(args.out)
    write_json(
        out,
        {
            "params": params.as_dict(),
            "n": args.n,
            "states": [
                {"state": [list(c) for c in s], "prob": pr} for s, pr in sorted(dist.items())
            ],
        },
    )
    _close(_manifest(args, argv, params), [out], _sidecar(out))


def cmd_verify(args, argv) -> None:
    params = resolve_params(args)
    report = run_ensemble(
        params, args.n, args.runs, args.seed, IndexWindow(*args.window),
        workers=args.workers, checkpoints=args.checkpoints, variant=args.variant,
    )
    out = Path(args.report)
    write_json(out, report.to_dict())
    outputs = [out]
    if args.qq:
        write_csv(args.qq, ("i", "j", "rank", "normal_quantile", "standardized"), report.qq_rows())
        outputs.append(Path(args.qq))
    _close(_manifest(args, argv, params, seed=args.seed), outputs, _sidecar(out))
    f = report.final
    if f.adjudication is not None:
        print(
            f"mismatch (SE units): "
            + ", ".join(f"{k}={v:.2f}" for k, v in sorted(f.mismatch_se.items()))
            + f"; matching variant: {f.adjudication['matching_variant'] or f.adjudication['status']}"
        )


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("model parameters")
    g.add_argument("--alpha", type=float)
    g.add_argument("--gamma", type=float, help="defaults to 1 - alpha")
    g.add_argument("--lambda", dest="lam", type=float, metavar="LAMBDA")
    g.add_argument("--mu", type=float)
    g.add_argument("--config", help="key = value file; explicit flags take precedence")

    parser = _Parser(prog="dpa-clt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    parser.set_defaults(_subparsers=sub.choices)

    p = sub.add_parser("limits", parents=[common], help="limiting distribution p_ij")
    p.add_argument("--imax", type=int, required=True)
    p.add_argument("--jmax", type=int, required=True)
    p.add_argument("--out", default="p.csv")
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("xi", parents=[common], help="xi table for one target")
    p.add_argument("--target", type=_pair, required=True, metavar="I,J")
    p.add_argument("--out", default="xi.csv")
    p.set_defaults(func=cmd_xi)

    p = sub.add_parser("xi-matrix", parents=[common], help="Xi over a window (long format)")
    p.add_argument("--window", type=_pair, required=True, metavar="I,O")
    p.add_argument("--out", default="xi_matrix.csv")
    p.set_defaults(func=cmd_xi_matrix)

    p = sub.add_parser("covariance", parents=[common], help="limiting covariance over a window")
    p.add_argument("--window", type=_pair, required=True, metavar="I,O")
    p.add_argument("--box", type=_pair, metavar="R,Q")
    p.add_argument("--variant", choices=VARIANTS, default="corrected")
    p.add_argument("--tail", choices=TAILS, default="closed")
    p.add_argument("--out", default="cov.json")
    p.set_defaults(func=cmd_covariance)

    p = sub.add_parser("simulate", parents=[common], help="grow graphs and record degree counts")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--window", type=_pair, metavar="I,O")
    p.add_argument("--checkpoints", type=_int_list, metavar="N1,N2,...")
    p.add_argument("--out", default="sim")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("enumerate", parents=[common], help=f"exact law of the count grid (n <= {ENUM_CAP})")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", default="exact.json")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("verify", parents=[common], help="Monte Carlo check of the limit theory")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--window", type=_pair, default=(2, 2), metavar="I,O")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--variant", choices=VARIANTS, default="corrected")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--checkpoints", type=_int_list, metavar="N1,N2,...")
    p.add_argument("--report", default="report.json")
    p.add_argument("--qq")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        args.func(args, argv)
    except UsageError as exc:
        if args is not None:
            args._subparsers[args.command].print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return 1
    except (ParameterError, *USER_ERRORS) as exc:
        print(f"dpa-clt: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
