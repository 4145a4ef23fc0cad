"""Command-line interface.

Subcommands: ``generate``, ``fit``, ``exp-recovery``, ``exp-periods``,
``exp-noise``. Exit codes: 0 success, 1 validation/usage error,
2 numerical failure. All randomness is controlled by --seed/--seeds;
SDSBM_THREADS caps parallelism (0 = auto).
"""
from __future__ import annotations

import argparse
import sys

from .em import FitConfig, fit_network, write_fit_results
from .errors import NumericalError, ValidationError
from .experiments import (
    DEFAULT_NOISE_GRID,
    ExperimentSpec,
    run_noise_sweep,
    run_period_sweep,
    run_recovery,
)
from .netgen import NetworkConfig, generate, read_network, write_network
from .seasonal import PRESET_OFFSETS, NoiseParams, sine_offsets


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_offsets(text: str, d: int) -> tuple[float, ...]:
    if text in PRESET_OFFSETS:
        offsets = PRESET_OFFSETS[text]
        if len(offsets) != d:
            raise ValidationError(
                f"preset {text!r} has period {len(offsets)}, but --period is {d}"
            )
        return offsets
    if text.startswith("sine:"):
        return sine_offsets(d, float(text.split(":", 1)[1]))
    if text == "zero":
        return (0.0,) * d
    try:
        offsets = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(
            f"--offsets must be a preset name ({', '.join(PRESET_OFFSETS)}), "
            f"'sine:<amplitude>', 'zero', or comma-separated reals; got {text!r}"
        ) from None
    if len(offsets) != d:
        raise ValidationError(f"got {len(offsets)} offsets for period {d}")
    return offsets


def _parse_int_list(text: str) -> tuple[int, ...]:
    values: list[int] = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-", 1)
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(part))
    return tuple(values)


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _add_generator_flags(p: argparse.ArgumentParser, steps_default: bool = True):
    p.add_argument("--types", type=int, default=3, help="number of node types k")
    p.add_argument("--period", type=int, default=8, help="seasonal period d")
    p.add_argument("--bias", type=float, default=0.5, help="initial bias m0")
    p.add_argument("--offsets", default="paper-d8",
                   help="preset name, 'sine:<amp>', 'zero', or comma list of d reals")
    p.add_argument("--q-m", type=float, default=1e-8, help="bias process variance")
    p.add_argument("--q-s", type=float, default=1e-8, help="seasonal process variance")
    p.add_argument("--r", type=float, default=5.5e-3, help="density measurement variance")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--block-n", type=int, default=None,
                       help="possible edges per block (direct override)")
    group.add_argument("--nodes-per-type", default=None,
                       help="comma list of node counts (or one count for all types)")
    if steps_default:
        p.add_argument("--steps", type=int, default=80, help="number of time steps T")


def _add_fit_flags(p: argparse.ArgumentParser):
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6,
                   help="relative log-likelihood convergence tolerance")
    p.add_argument("--init-q-m", type=float, default=1.0)
    p.add_argument("--init-q-s", type=float, default=1.0)
    p.add_argument("--init-r", type=float, default=1.0)
    p.add_argument("--r-lo", type=float, default=1e-12, help="lower r search bound")
    p.add_argument("--r-hi", type=float, default=1.0, help="upper r search bound")
    p.add_argument("--literal-init", action="store_true",
                   help="all-ones initial state mean instead of the data-driven default")


def _build_parser() -> _Parser:
    parser = _Parser(prog="sdsbm",
                     description="Seasonal block-structured dynamic networks: "
                                 "generation, inference, experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="sample a network file from the model")
    _add_generator_flags(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--adjacency", action="store_true",
                   help="record adjacency snapshots (requires --nodes-per-type)")
    g.add_argument("--no-truth", action="store_true", help="omit the ground-truth record")
    g.add_argument("--out", required=True, help="output network file")

    f = sub.add_parser("fit", help="fit noise parameters for every block of a network file")
    f.add_argument("--in", dest="infile", required=True, help="input network file")
    f.add_argument("--out", required=True, help="output fit file")
    f.add_argument("--period", type=int, default=None,
                   help="seasonal period d (default: from the network file)")
    _add_fit_flags(f)
    f.add_argument("--threads", type=int, default=None)

    rec = sub.add_parser("exp-recovery", help="single-network recovery trace CSV")
    _add_generator_flags(rec, steps_default=False)
    rec.add_argument("--periods", type=int, default=10, help="observed periods (T = periods*d)")
    rec.add_argument("--seed", type=int, default=0)
    rec.add_argument("--block", default="0,1", help="block pair to trace, e.g. 0,1")
    rec.add_argument("--out", required=True)

    per = sub.add_parser("exp-periods", help="MSE vs observed periods sweep CSV")
    _add_generator_flags(per, steps_default=False)
    per.add_argument("--seeds", default="0-9", help="comma list or lo-hi range")
    per.add_argument("--multiples", default="2-10", help="period counts to sweep")
    per.add_argument("--threads", type=int, default=None)
    per.add_argument("--out", required=True)

    noi = sub.add_parser("exp-noise", help="MSE vs measurement noise sweep CSV")
    _add_generator_flags(noi, steps_default=False)
    noi.add_argument("--periods", type=int, default=10)
    noi.add_argument("--seeds", default="0-9")
    noi.add_argument("--grid", default=None,
                     help="comma list of r values (default half-decade grid)")
    noi.add_argument("--threads", type=int, default=None)
    noi.add_argument("--out", required=True)

    return parser


def _network_config(args, T: int, seed: int) -> NetworkConfig:
    d = args.period
    offsets = _parse_offsets(args.offsets, d)
    noise = NoiseParams(q_m=args.q_m, q_s=args.q_s, r=args.r)
    block_n = args.block_n
    nodes = None
    if args.nodes_per_type is not None:
        parts = _parse_int_list(args.nodes_per_type)
        nodes = parts * args.types if len(parts) == 1 else parts
    if block_n is None and nodes is None:
        block_n = 1000
    return NetworkConfig.uniform(
        k=args.types, d=d, T=T, seed=seed, m0=args.bias, period_offsets=offsets,
        noise=noise, block_n=block_n, nodes_per_type=nodes,
        with_adjacency=getattr(args, "adjacency", False),
        with_truth=not getattr(args, "no_truth", False),
    )


def _experiment_spec(args, kind: str, seeds, sweep_values) -> ExperimentSpec:
    offsets = _parse_offsets(args.offsets, args.period)
    if args.nodes_per_type is not None:
        raise ValidationError("experiments use --block-n (node counts not supported here)")
    return ExperimentSpec(
        kind=kind, seeds=seeds, sweep_values=sweep_values, out_path=args.out,
        k=args.types, d=args.period, block_n=args.block_n or 1000, m0=args.bias,
        offsets=offsets, q_m=args.q_m, q_s=args.q_s, r=args.r,
        periods=getattr(args, "periods", 10),
        block=tuple(_parse_int_list(args.block)) if hasattr(args, "block") else (0, 1),
        threads=getattr(args, "threads", None),
    )


def _run(args) -> int:
    if args.command == "generate":
        net = generate(_network_config(args, T=args.steps, seed=args.seed))
        write_network(net, args.out)
        print(f"wrote {len(net.blocks)} blocks x {net.T} steps to {args.out}")
        return 0

    if args.command == "fit":
        net = read_network(args.infile)
        config = FitConfig(
            d=args.period if args.period is not None else net.d,
            max_iters=args.max_iters, loglik_rel_tol=args.tol,
            init_q_m=args.init_q_m, init_q_s=args.init_q_s, init_r=args.init_r,
            r_bracket=(args.r_lo, args.r_hi), literal_init=args.literal_init,
        )
        netfit = fit_network(net, config, threads=args.threads)
        write_fit_results(netfit, args.out)
        print(f"fitted {len(netfit.results)} blocks "
              f"({len(netfit.failures)} failures) to {args.out}")
        if netfit.failures and not netfit.results:
            raise NumericalError("all block fits failed: "
                                 + "; ".join(netfit.failures.values()))
        return 0

    if args.command == "exp-recovery":
        spec = _experiment_spec(args, "recovery", (args.seed,), None)
        rows = run_recovery(spec)
        print(f"wrote {len(rows)} rows to {args.out}")
        return 0

    if args.command == "exp-periods":
        seeds = _parse_int_list(args.seeds)
        multiples = tuple(float(m) for m in _parse_int_list(args.multiples))
        spec = _experiment_spec(args, "periods", seeds, multiples)
        rows = run_period_sweep(spec)
        print(f"wrote {len(rows)} rows to {args.out}")
        return 0

    if args.command == "exp-noise":
        seeds = _parse_int_list(args.seeds)
        grid = _parse_float_list(args.grid) if args.grid else DEFAULT_NOISE_GRID
        spec = _experiment_spec(args, "noise", seeds, grid)
        rows = run_noise_sweep(spec)
        print(f"wrote {len(rows)} rows to {args.out}")
        return 0

    raise ValidationError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except FileNotFoundError as exc:
        print(f"sdsbm: error: file not found: {exc.filename}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"sdsbm: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"sdsbm: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
