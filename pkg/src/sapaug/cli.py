"""Command-line entry point: ``sapaug <subcommand> ...``.

Exit status is 0 on success, 1 for bad input or usage, 2 for numerical or
state failures. Diagnostics go to stderr; results go to stdout or files.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .augment import DEFAULT_N_CM, DEFAULT_NUM_MASKS
from .betafn import inc_beta
from .errors import InputError, NumericalError, StateError
from .fileio import atomic_write_text, read_wav, write_features, write_wav
from .pipeline import augment_sample, plan_sample
from .policy import KINDS, PolicyParams, PolicySet, policy_curve

log = logging.getLogger("sapaug")

SEED_ENV = "SAPAUG_SEED"
SEED_MAX = 2**64 - 1


class UsageError(InputError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; we want 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _parse_seed(text, source: str) -> int:
    try:
        seed = int(text)
    except (TypeError, ValueError):
        raise InputError(f"{source}: seed must be an integer, got {text!r}") from None
    if not 0 <= seed <= SEED_MAX:
        raise InputError(f"{source}: seed must be in [0, 2**64), got {seed}")
    return seed


def resolve_seed(flag, fallback=None) -> int:
    """``--seed`` wins, then ``fallback`` (e.g. from a config file), then $SAPAUG_SEED, then 0."""
    if flag is not None:
        return _parse_seed(flag, "--seed")
    if fallback is not None:
        return _parse_seed(fallback, "config seed")
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        return _parse_seed(env, SEED_ENV)
    return 0


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: bad JSON ({exc})") from exc


def load_policy_config(path) -> dict:
    """Parse a policy file: ``{"policies": {...}, "num_masks", "n_cm", "seed"}``."""
    obj = _read_json(path)
    if not isinstance(obj, dict) or not isinstance(obj.get("policies"), dict):
        raise InputError(f"{path}: expected an object with a 'policies' mapping")
    unknown = set(obj["policies"]) - {k.value for k in KINDS}
    if unknown:
        raise InputError(f"{path}: unknown augmentation(s) {sorted(unknown)}")
    cfg = {
        "policies": PolicySet.from_dict(obj["policies"]),
        "num_masks": obj.get("num_masks", DEFAULT_NUM_MASKS),
        "n_cm": obj.get("n_cm", DEFAULT_N_CM),
        "seed": obj.get("seed"),
    }
    for key in ("num_masks", "n_cm"):
        v = cfg[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise InputError(f"{path}: {key} must be a positive integer, got {v!r}")
    return cfg


def _emit(text: str, out) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_ibeta(args) -> int:
    print(f"{inc_beta(args.alpha, args.beta, args.x):.15g}")
    return 0


def cmd_policy_curve(args) -> int:
    params = PolicyParams(args.s, args.a)
    if args.batch < 1:
        raise InputError(f"--batch must be >= 1, got {args.batch}")
    rows = ["l_rank,x,lambda"]
    rows += [f"{r},{x:.17g},{lam:.17g}" for r, x, lam in policy_curve(params, args.batch)]
    _emit("\n".join(rows) + "\n", args.out)
    return 0


def cmd_augment(args) -> int:
    if not (args.out_wav or args.out_feat):
        raise InputError("nothing to do: give --out-wav and/or --out-feat")
    cfg = load_policy_config(args.policy)
    seed = resolve_seed(args.seed, cfg["seed"])
    if not 1 <= args.rank <= args.batch:
        raise InputError(f"--rank must lie in 1..{args.batch}, got {args.rank}")
    x = read_wav(args.input)
    pair = read_wav(args.pair) if args.pair else None
    plan = plan_sample(0, args.rank, args.batch, cfg["policies"], seed)

    def partner_for(kind, rng):
        if pair is None:
            raise InputError(f"{kind.value} was selected but no --pair was given")
        return pair

    out_x, feat = augment_sample(x, plan, seed, partner_for, num_masks=cfg["num_masks"], n_cm=cfg["n_cm"])
    if args.out_wav:
        write_wav(args.out_wav, out_x)
    if args.out_feat:
        write_features(args.out_feat, feat)
    summary = {
        "seed": seed,
        "rank": args.rank,
        "batch": args.batch,
        "applied": {k.value: plan.entries[k].selected for k in KINDS},
        "lambda": {k.value: plan.entries[k].lam for k in KINDS},
        "strength": {k.value: plan.entries[k].strength.value for k in KINDS},
        "frames": feat.shape[0],
        "bins": feat.shape[1],
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def _dataset_config(args):
    from .harness import DatasetConfig

    return DatasetConfig(n_train=args.n_train, n_val=args.n_val)


def _train_config(args):
    from .harness import TrainConfig

    return TrainConfig(epochs=args.epochs)


def cmd_search(args) -> int:
    from .harness import PolicyObjective, decode_policies, generate_dataset
    from .search import MAX_Q, SearchSpace, policy_space, run_search

    seed = resolve_seed(args.seed)
    space = SearchSpace.from_json(_read_json(args.space)) if args.space else policy_space()
    expected = policy_space().names
    if space.names != expected:
        raise InputError("search space must list the policy dimensions " + ", ".join(expected))
    if not 1 <= args.parallel <= MAX_Q:
        raise InputError(f"--parallel must lie in 1..{MAX_Q}, got {args.parallel}")
    dataset = generate_dataset(_dataset_config(args), seed)
    objective = PolicyObjective(dataset, _train_config(args), space=space)
    workers = min(args.parallel, os.cpu_count() or 1)
    history = run_search(
        objective, space, args.budget, q=args.parallel, seed=seed, log_path=args.log,
        n_init=args.n_init, workers=workers,
    )
    best = history.best()
    result = {
        "policies": decode_policies(best.point, space).to_dict(),
        "num_masks": DEFAULT_NUM_MASKS,
        "n_cm": DEFAULT_N_CM,
        "seed": seed,
    }
    if args.best_out:
        atomic_write_text(args.best_out, json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"best_trial": best.id, "objective": best.objective, **result}, sort_keys=True))
    return 0


def cmd_harness(args) -> int:
    from .harness import PolicyObjective, generate_dataset

    cfg = load_policy_config(args.policy)
    seed = resolve_seed(args.seed, cfg["seed"])
    dataset = generate_dataset(_dataset_config(args), seed)
    tc = replace(_train_config(args), num_masks=cfg["num_masks"], n_cm=cfg["n_cm"])
    objective = PolicyObjective(dataset, tc)
    result = {
        "seed": seed,
        "baseline_accuracy": objective.baseline(),
        "policy_accuracy": objective.evaluate(cfg["policies"]),
    }
    print(json.dumps(result, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_harness_size(p):
    p.add_argument("--n-train", type=int, default=512, help="training split size")
    p.add_argument("--n-val", type=int, default=256, help="validation split size")
    p.add_argument("--epochs", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sapaug", description="Sample-adaptive audio augmentation tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    parser.add_argument("-q", "--quiet", action="store_true", help="errors only")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ibeta", help="regularized incomplete beta I_x(alpha, beta)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--x", type=float, required=True)
    p.set_defaults(func=cmd_ibeta)

    p = sub.add_parser("policy-curve", help="lambda for every rank of a batch, as CSV")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_policy_curve)

    p = sub.add_parser("augment", help="augment one waveform as if it held a given loss rank")
    p.add_argument("--in", dest="input", required=True, help="input WAV")
    p.add_argument("--pair", help="partner WAV for sample pairing / cutmix")
    p.add_argument("--policy", required=True, help="policy JSON")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--seed")
    p.add_argument("--out-wav", help="raw-domain result (WAV)")
    p.add_argument("--out-feat", help="features (.csv for CSV, otherwise binary)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("search", help="Bayesian search for a policy on the synthetic task")
    p.add_argument("--space", help="search-space JSON (default: the standard policy space)")
    p.add_argument("--budget", type=int, required=True, help="number of trials")
    p.add_argument("--parallel", type=int, default=1, help="suggestions per round")
    p.add_argument("--log", required=True, help="trial log (JSON lines); resumed if present")
    p.add_argument("--seed")
    p.add_argument("--n-init", type=int, default=10, help="quasi-random trials before the GP takes over")
    p.add_argument("--best-out", help="write the best policy as policy JSON")
    _add_harness_size(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("harness", help="baseline vs policy accuracy on the synthetic task")
    p.add_argument("--policy", required=True, help="policy JSON")
    p.add_argument("--seed")
    _add_harness_size(p)
    p.set_defaults(func=cmd_harness)
    return parser


def _setup_logging(verbose: int, quiet: bool) -> None:
    level = logging.ERROR if quiet else (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    _setup_logging(args.verbose, args.quiet)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"sapaug {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, StateError) as exc:
        print(f"sapaug {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"sapaug {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
