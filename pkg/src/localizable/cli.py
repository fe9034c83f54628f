"""Command-line interface.

Subcommands: ``run``, ``verify``, ``search``, ``paper-report``,
``export-protocol``.  JSON is the canonical output; ``--format table`` renders
the same data as aligned text.  Exit codes: 0 success, 1 a verification or
sampling check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__, protocols, report, search
from .bases import basis_from_id
from .engine import enumerate_branches, protocol_to_dict, sample_counts
from .linalg import CONSTRUCT_TOL, EQUAL_TOL, PRUNE_TOL, ResourceError, ValidationError, max_qubits, set_max_qubits
from .protocols import SorkinScenario
from .states import parse_state
from .verify import (
    HAAR_SEEDS,
    TOL,
    check_born_equivalence,
    check_ebits,
    check_erasure,
    check_ideal,
    check_no_signaling,
    check_protocol_no_signaling,
    spanning_inputs,
)

SEED_ENV = "LOCALIZABLE_SEED"
CHECKS = ("born", "nosig", "ideal", "erasure", "ebits")


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _resolve(pid: str):
    try:
        obj = protocols.get(pid)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    proto = obj.middle if isinstance(obj, SorkinScenario) else obj
    if proto.n_qubits > max_qubits():
        raise UsageError(f"protocol {pid} needs {proto.n_qubits} qubits, above --max-qubits {max_qubits()}")
    return obj, proto


def _state(text: str | None, obj, proto):
    if text is None:
        if isinstance(obj, SorkinScenario) and obj.psi0 is not None:
            return obj.psi0
        raise UsageError("--input is required for this protocol")
    try:
        return parse_state(text, proto.n_inputs)
    except (ValueError, ValidationError) as exc:
        raise UsageError(f"invalid input state: {exc}") from None


def _envelope(args, **body) -> dict:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    return {
        "command": args.command,
        "config": config,
        "version": __version__,
        "tolerances": {"construct": CONSTRUCT_TOL, "equal": EQUAL_TOL, "prune": PRUNE_TOL, "verify": TOL},
        **body,
    }


# ---------------------------------------------------------------------------
# subcommands; each returns (report, exit code)


def cmd_run(args):
    obj, proto = _resolve(args.protocol)
    psi = _state(args.input, obj, proto)
    exact = enumerate_branches(proto, psi).distribution()
    out = _envelope(args, protocol=proto.name, seeds=[args.seed], distribution=exact)
    code = 0
    if args.samples:
        counts = sample_counts(proto, psi, args.samples, args.seed)
        rows, ok = [], True
        for lab, q in exact.items():
            n = counts.get(lab, 0)
            sigma = math.sqrt(args.samples * q * (1 - q))
            dev = abs(n - args.samples * q)
            within = dev <= 3 * sigma if sigma > 0 else dev == 0
            ok &= within
            rows.append({"label": lab, "exact": q, "count": n, "frequency": n / args.samples,
                         "sigmas": dev / sigma if sigma > 0 else 0.0, "within_3sigma": within})
        out["samples"] = {"shots": args.samples, "rows": rows, "within_3sigma": ok}
        code = 0 if ok else 1
    return out, code


def _verify_one(check: str, obj, proto, seeds):
    if check == "nosig":
        if isinstance(obj, SorkinScenario):
            return check_no_signaling(obj)
        inputs = spanning_inputs(protocols.target_basis(proto), proto.n_inputs, seeds)
        return check_protocol_no_signaling(proto, inputs)
    if check == "born":
        return check_born_equivalence(proto, test_states=spanning_inputs(
            protocols.target_basis(proto), proto.n_inputs, seeds, products=False))
    if check == "ideal":
        return check_ideal(proto)
    if check == "erasure":
        return check_erasure(proto, spanning_inputs(protocols.target_basis(proto), proto.n_inputs, seeds))
    return check_ebits(proto)


def cmd_verify(args):
    checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    bad = [c for c in checks if c not in CHECKS]
    if bad or not checks:
        raise UsageError(f"unknown checks {bad}; choose from {','.join(CHECKS)}")
    obj, proto = _resolve(args.protocol)
    seeds = list(range(args.seed, args.seed + len(HAAR_SEEDS)))
    reports = [_verify_one(c, obj, proto, seeds) for c in checks]
    all_pass = all(r.passed for r in reports)
    all_fail = not any(r.passed for r in reports)
    ok = all_fail if args.expect_fail else all_pass
    out = _envelope(args, protocol=obj.name, seeds=seeds, reports=[r.to_dict() for r in reports],
                    all_passed=all_pass)
    return out, 0 if ok else 1


def cmd_search(args):
    try:
        target = basis_from_id(args.target)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.ebits < 0 or args.restarts <= 0 or args.budget <= 0:
        raise UsageError("--ebits must be >= 0, --restarts and --budget positive")
    template = search.ProtocolTemplate(args.ebits)
    if template.n_qubits > max_qubits():
        raise UsageError(f"{args.ebits}-ebit template exceeds --max-qubits {max_qubits()}")
    try:
        res = search.optimize(template, target, args.restarts, args.seed, args.budget, args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    body = res.to_dict()
    if not args.traces:
        body.pop("traces")
    out = _envelope(args, seeds=[args.seed], result=body)
    code = 0
    if args.min_score is not None and res.best_score < args.min_score:
        code = 1
    return out, code


def cmd_paper_report(args):
    if args.restarts <= 0 or args.budget <= 0:
        raise UsageError("--restarts and --budget must be positive")
    bundle = report.build_report(args.restarts, args.seed, args.budget, not args.skip_search, args.workers)
    out = _envelope(args, **bundle)
    return out, 0 if bundle["summary"]["failed"] == 0 else 1


def cmd_export(args):
    obj, proto = _resolve(args.protocol)
    return protocol_to_dict(proto), 0


# ---------------------------------------------------------------------------
# rendering and output


def _table(out: dict) -> str:
    cmd = out["command"]
    if cmd == "run":
        rows = [{"label": k, "probability": v} for k, v in out["distribution"].items()]
        text = report.render_table(rows, ("label", "probability"))
        if "samples" in out:
            text += "\n\n" + report.render_table(out["samples"]["rows"],
                                                  ("label", "exact", "count", "frequency", "sigmas", "within_3sigma"))
        return text
    if cmd == "verify":
        rows = [{"check": r["check"], "subject": r["subject"], "verdict": r["verdict"], "value": r["value"],
                 "worst_input": (r["witnesses"][0]["input_id"] + " " + r["witnesses"][0]["detail"]).strip()
                 if r["witnesses"] else ""} for r in out["reports"]]
        return report.render_table(rows, ("check", "subject", "verdict", "value", "worst_input"))
    if cmd == "search":
        r = out["result"]
        rows = [{"field": k, "value": r[k]} for k in
                ("target", "ebits", "restarts", "seed", "budget", "best_score", "worst_case", "verified_score",
                 "evidence")]
        return report.render_table(rows, ("field", "value"))
    if cmd == "paper-report":
        return report.render_table(out["rows"]) + f"\n\n{out['summary']}"
    return json.dumps(out, indent=2)


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def render(out: dict, fmt: str) -> str:
    if fmt == "table" and "command" in out:
        return _table(out)
    return json.dumps(out, indent=2, default=_default)


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the target directory and ``os.replace``."""
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="localizable", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "table"), default="json")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("--max-qubits", type=int, default=12, help="refuse registers larger than this")
    common.add_argument("--seed", type=int, default=None, help=f"default from ${SEED_ENV}, else 0")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="exact outcome distribution of a protocol")
    p.add_argument("protocol", help="sorkin-naive, twisted, bsm, bsm-ideal, ejm, ghz:<n>, ghz-ideal:<n>")
    p.add_argument("--input", "-i", help='state: "00", "1+", "bell:2", "ejm:1", "ghz3:+000", "haar:<seed>", "[...]"')
    p.add_argument("--samples", type=int, default=0, help="also draw this many seeded samples and 3-sigma check them")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", parents=[common], help="run verifiers on a protocol")
    p.add_argument("protocol")
    p.add_argument("--checks", default=",".join(CHECKS), help="comma-separated subset of " + ",".join(CHECKS))
    p.add_argument("--expect-fail", action="store_true", help="succeed only if every selected check fails")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("search", parents=[common], help="numerical search for a local protocol")
    p.add_argument("--target", required=True, help="basis id: bell, twisted, ejm, t_alpha:<angle>, ...")
    p.add_argument("--ebits", type=int, default=1)
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--budget", type=int, default=4000, help="objective evaluations per restart")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--min-score", type=float, default=None, help="exit 1 if the best score is below this")
    p.add_argument("--traces", action="store_true", help="include per-restart score traces")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("paper-report", parents=[common], help="every claim check in one bundle")
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--budget", type=int, default=4000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--skip-search", action="store_true")
    p.set_defaults(func=cmd_paper_report)

    p = sub.add_parser("export-protocol", parents=[common], help="protocol JSON of a shipped instance")
    p.add_argument("protocol")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    previous = max_qubits()
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if args.max_qubits < 1:
            raise UsageError("--max-qubits must be positive")
        set_max_qubits(args.max_qubits)
        out, code = args.func(args)
        text = render(out, args.format)
    except (UsageError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        set_max_qubits(previous)
    if args.output:
        write_atomic(args.output, text)
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
