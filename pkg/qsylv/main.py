from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from qsylv.api import commands
from qsylv.api.codec import serialize
from qsylv.core.config import get_settings
from qsylv.core.errors import Inconsistent, QSylvError
from qsylv.services.chain_solver import DimsSpec
from qsylv.services.numlin import RankPolicy
from qsylv.services.quat_core import EtaUnit

logger = logging.getLogger("qsylv")


def _dims(value: str) -> DimsSpec:
    """``3`` for a fixed size or ``1-3`` for a uniform draw per dimension."""
    try:
        if "-" in value:
            low, high = (int(part) for part in value.split("-", 1))
            if not 0 <= low <= high:
                raise ValueError
            return (low, high)
        size = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid dims {value!r}; use N or LOW-HIGH") from None
    if size < 0:
        raise argparse.ArgumentTypeError("dims must be non-negative")
    return size


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def _positive(value: str) -> float:
    number = float(value)
    if not number > 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return number


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="write the document here instead of stdout")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    ranked = argparse.ArgumentParser(add_help=False, parents=[common])
    ranked.add_argument("--tol", type=_positive, help="relative rank tolerance (overrides QSYLV_TOL)")

    parser = argparse.ArgumentParser(
        prog="qsylv",
        description="Solvability certificates and solutions for quaternion Sylvester chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("check", "rank-equality certificate of a chain"),
        ("eta-check", "certificate for an eta-Hermitian solution"),
        ("oracle", "brute-force consistency verdict"),
    ):
        command = sub.add_parser(name, parents=[ranked], help=text)
        command.add_argument("problem", nargs="?", default="-", help="problem file or - for stdin")

    for name, text in (("solve", "construct a chain solution"), ("eta-solve", "construct an eta-Hermitian solution")):
        command = sub.add_parser(name, parents=[ranked], help=text)
        command.add_argument("problem", nargs="?", default="-", help="problem file or - for stdin")
        command.add_argument("--seed", type=_seed, help="sample the free parameters with this seed")

    verify = sub.add_parser("verify", parents=[common], help="check residuals of a solution file")
    verify.add_argument("problem")
    verify.add_argument("solution")
    verify.add_argument(
        "--tol", type=_positive, help="residual tolerance (overrides QSYLV_RESIDUAL_TOL)"
    )

    gen = sub.add_parser("gen", parents=[common], help="generate a random problem")
    gen.add_argument("--k", type=int, default=2)
    gen.add_argument("--dims", type=_dims, default=2)
    gen.add_argument("--seed", type=_seed, default=0)
    gen.add_argument("--mode", choices=["consistent", "perturbed"], default="consistent")
    gen.add_argument(
        "--style", choices=["generic", "rank_deficient", "zero_blocks", "mixed"], default="generic"
    )
    gen.add_argument("--eta", choices=[unit.value for unit in EtaUnit], help="emit an eta problem")
    return parser


def _read(source: str) -> bytes:
    if source == "-":
        return sys.stdin.buffer.read()
    return Path(source).read_bytes()


def _configure_logging(verbose: int) -> None:
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, get_settings().log_level.upper(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _policy(args: argparse.Namespace) -> RankPolicy:
    return RankPolicy(rel_tol=args.tol) if args.tol is not None else RankPolicy.from_settings()


def _dispatch(args: argparse.Namespace) -> commands.CommandResult:
    match args.command:
        case "check":
            return commands.check(_read(args.problem), _policy(args))
        case "eta-check":
            return commands.eta_check(_read(args.problem), _policy(args))
        case "solve":
            return commands.solve(_read(args.problem), _policy(args), args.seed)
        case "eta-solve":
            return commands.eta_solve(_read(args.problem), _policy(args), args.seed)
        case "oracle":
            return commands.oracle(_read(args.problem), _policy(args))
        case "verify":
            return commands.verify(_read(args.problem), _read(args.solution), args.tol)
        case "gen":
            eta = EtaUnit(args.eta) if args.eta else None
            return commands.gen(args.k, args.dims, args.seed, args.mode, args.style, eta)
    raise AssertionError(f"unhandled command {args.command}")


def cli_main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        _configure_logging(args.verbose)
        result = _dispatch(args)
    except Inconsistent as exc:
        print(f"qsylv: inconsistent: {exc}", file=sys.stderr)
        return commands.EXIT_INCONSISTENT
    except (QSylvError, OSError, RuntimeError) as exc:
        print(f"qsylv: error: {exc}", file=sys.stderr)
        return commands.EXIT_USAGE

    text = serialize(result.document)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if result.message:
        print(f"qsylv: {result.message}", file=sys.stderr)
    logger.info("%s finished with exit code %d", args.command, result.exit_code)
    return result.exit_code


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
