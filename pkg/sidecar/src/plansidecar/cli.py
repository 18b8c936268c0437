"""Sidecar command line: init-student, train-verifier, serve."""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .config import SidecarConfig, VerifierTrainConfig
from .server import SidecarServer
from .student import StudentModel
from .verifier import train_verifier


def cmd_init_student(args) -> int:
    model = StudentModel.builtin(args.seed)
    directory = model.save(args.out, {"seed": args.seed})
    print(f"wrote student artifact -> {directory}")
    return 0


def cmd_train_verifier(args) -> int:
    config = VerifierTrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    try:
        directory, metrics = train_verifier(args.dataset, args.out, config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(metrics, indent=2, sort_keys=True))
    print(f"wrote verifier artifact -> {directory}")
    return 0


def cmd_serve(args) -> int:
    config = SidecarConfig(
        student=args.student,
        verifier=args.verifier,
        completion=args.completion,
        deterministic=args.deterministic,
        host=args.host,
        port=args.port,
    )
    try:
        server = SidecarServer(config)
    except (OSError, ValueError) as exc:
        print(f"startup failed: {exc}", file=sys.stderr)
        return 1
    print(f"serving at {server.address}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plansidecar", description=__doc__)
    parser.add_argument("--version", action="version", version=f"plansidecar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-student", help="create a seeded tiny student artifact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_student)

    p = sub.add_parser("train-verifier", help="train the step verifier on pair records")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_verifier)

    p = sub.add_parser("serve", help="serve the wire protocol")
    p.add_argument("--student", default="builtin:0")
    p.add_argument("--verifier", default="builtin:0")
    p.add_argument("--completion", default=None)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8764)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
