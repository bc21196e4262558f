#!/usr/bin/env python3
"""
NewHope Backdoor Lab - command line

Runs seeded batches of the Ring-LWE key exchange, the trapdoored-generator
attack and its controls, and writes JSON reports.

Usage:
    python nhlab.py exchange [options]        # Honest sessions, agreement rate
    python nhlab.py backdoor [options]        # Trapdoored generator, recovery rate
    python nhlab.py control [options]         # Honest generator with an unrelated trapdoor
    python nhlab.py cached [options]          # One trapdoored a cached for --ttl sessions
    python nhlab.py mitm [options]            # Oscar substitutes Message1
    python nhlab.py sweep [options]           # Bound and recovery over (k, p, weight)
    python nhlab.py verify-claims [options]   # Claim-by-claim acceptance report
    python nhlab.py decode-d4 "1/2 1/2 0 0"   # D4 nearest point and 24-cell class
    python nhlab.py recover --transcript T.json --trapdoor K.json

Options (after the subcommand):
    --seed HEX64 --trials N --backend peikert|d4 --param NAME|ID --out PATH
    --config FILE --workers N --quiet --verbose
    --p P --weight W --ttl T --weights 2,16 --p-values 67 --k-values 16

Seeds fall back to NHLAB_SEED (environment or .env), then to a fresh random
seed echoed in the report.

Exit codes: 0 success, 2 configuration error, 3 decode error, 4 claim failure.

Examples:
    python nhlab.py exchange --trials 100 --backend d4
    python nhlab.py backdoor --p 67 --weight 2 --export-dir results/session0
    python nhlab.py verify-claims --seed 00...01 --out results/claims.json
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError

from src.backdoor import TrapdoorKey, recover_from_transcript
from src.claims import require_passed
from src.config import CONFIG_KEYS, build_scenario_config
from src.errors import ClaimFailure, ConfigError, DecodeError, LabError, ParameterError
from src.harness import LabHarness, Report, Scenario, backdoor_session, honest_session, validate_report
from src.params_ring import NotInvertible
from src.protocol import Transcript
from src.reconcile import RationalPoint4, explain_d4_decode

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DECODE = 3
EXIT_CLAIM = 4

SCENARIO_COMMANDS = {
    "exchange": Scenario.HONEST,
    "backdoor": Scenario.BACKDOOR,
    "control": Scenario.UNIFORM_CONTROL,
    "cached": Scenario.CACHED_A,
    "mitm": Scenario.MITM,
    "sweep": Scenario.SWEEP,
    "verify-claims": Scenario.VERIFY_CLAIMS,
}

logger = logging.getLogger("nhlab")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", help="64 hex characters (fallback: NHLAB_SEED)")
    common.add_argument("--trials", type=int, help="Trials per batch (default 1000)")
    common.add_argument("--backend", choices=["peikert", "d4"], help="Reconciliation backend")
    common.add_argument("--param", help="Parameter set name or id (default newhope1024)")
    common.add_argument("--out", help="Write the JSON report here instead of stdout")
    common.add_argument("--config", help="key = value settings file; flags override it")
    common.add_argument("--workers", type=int, help="Worker processes for trial batches")
    common.add_argument("--quiet", action="store_true", help="Warnings only, no progress bars")
    common.add_argument("--verbose", action="store_true", help="Debug logging and progress messages")
    common.add_argument("--p", type=int, help="Trapdoor prime (default: the parameter set's)")
    common.add_argument("--weight", type=int, help="Trapdoor Hamming weight (default 2)")
    common.add_argument("--ttl", type=int, help="Sessions per cached generator (default 5)")
    common.add_argument("--weights", help="Sweep weights, comma separated")
    common.add_argument("--p-values", dest="p_values", help="Sweep primes, comma separated")
    common.add_argument("--k-values", dest="k_values", help="Sweep noise parameters, comma separated")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nhlab.py",
        description="NewHope key exchange and trapdoored-generator lab.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Exit codes: 0 success, 2 configuration error, 3 decode error, 4 claim failure.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_options()

    for name, scenario in SCENARIO_COMMANDS.items():
        sub = subparsers.add_parser(name, parents=[common], help=f"Run the {scenario.value} scenario")
        sub.set_defaults(handler=run_scenario_command, scenario=scenario)
        if name == "exchange":
            sub.add_argument("--transcript-out", help="Also write trial 0's transcript JSON here")
        if name == "backdoor":
            sub.add_argument("--export-dir", help="Also write trial 0's trapdoor.json and transcript.json here")

    decode = subparsers.add_parser("decode-d4", help="Decode a rational 4-point to D4")
    decode.add_argument("point", help='Four coordinates, e.g. "0.6, 0.6, 0.1, 0.1" or "1/2 1/2 0 0"')
    decode.add_argument("--out", help="Write the result as JSON")
    decode.add_argument("--quiet", action="store_true")
    decode.add_argument("--verbose", action="store_true")
    decode.set_defaults(handler=run_decode_d4)

    recover = subparsers.add_parser("recover", help="Recover a session from its transcript and a trapdoor export")
    recover.add_argument("--transcript", required=True, help="Transcript JSON")
    recover.add_argument("--trapdoor", required=True, help="Trapdoor export JSON")
    recover.add_argument("--out", help="Write the result as JSON")
    recover.add_argument("--quiet", action="store_true")
    recover.add_argument("--verbose", action="store_true")
    recover.set_defaults(handler=run_recover)
    return parser


def configure_logging(args: argparse.Namespace) -> None:
    if args.quiet:
        level = logging.WARNING
    elif args.verbose:
        level = logging.DEBUG
    else:
        level = logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _cli_values(args: argparse.Namespace) -> Dict[str, Any]:
    return {key: getattr(args, key) for key in CONFIG_KEYS if getattr(args, key, None) is not None}


def _write_json(data: Dict[str, Any], path: str) -> str:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return str(out)


def _emit(data: Dict[str, Any], out: Optional[str], quiet: bool) -> None:
    if out:
        path = _write_json(data, out)
        if not quiet:
            print(f"✓ Written to {path}")
    else:
        print(json.dumps(data, sort_keys=True, indent=2))


def _emit_report(report: Report, out: Optional[str], quiet: bool) -> None:
    data = report.to_dict()
    is_valid, error = validate_report(data)
    if not is_valid:
        logger.warning("Report does not match its schema: %s", error)
    _emit(data, out, quiet)


def _print_summary(report: Report) -> None:
    for name, summary in sorted(report.aggregates.items()):
        print(f"  {name}: {summary.successes}/{summary.count} = {summary.rate:.4f} "
              f"[{summary.ci_low:.4f}, {summary.ci_high:.4f}]")
    for claim in report.claims or []:
        print(f"  {'✓' if claim.passed else '✗'} {claim.claim_id}: {claim.detail}")


def run_scenario_command(args: argparse.Namespace) -> int:
    config, out = build_scenario_config(args.scenario, _cli_values(args), args.config)
    harness = LabHarness(config, verbose=args.verbose, show_progress_bar=not args.quiet)
    report = harness.run()
    _emit_report(report, out, args.quiet)
    if out and not args.quiet:
        _print_summary(report)

    settings = config.trial_settings()
    if getattr(args, "transcript_out", None):
        transcript = honest_session(settings, 0)
        _write_json(transcript.to_dict(), args.transcript_out)
    if getattr(args, "export_dir", None):
        key, transcript = backdoor_session(settings, 0)
        export_dir = Path(args.export_dir)
        _write_json(key.to_dict(), str(export_dir / "trapdoor.json"))
        _write_json(transcript.to_dict(), str(export_dir / "transcript.json"))
        logger.info("Exported trial 0 trapdoor and transcript to %s", export_dir)

    if args.scenario is Scenario.VERIFY_CLAIMS:
        require_passed(report)
    return EXIT_OK


def run_decode_d4(args: argparse.Namespace) -> int:
    result = explain_d4_decode(RationalPoint4.parse(args.point))
    if args.out:
        _emit(result.to_dict(), args.out, args.quiet)
        return EXIT_OK
    print(f"Point:      {result.point}")
    print(f"Decoded:    {result.decoded}")
    print(f"Distance²:  {result.squared_distance}")
    print(f"Nearest:    {', '.join(str(p) for p in result.nearest)}")
    print(f"Offset:     {result.region.value} the Voronoi cell (24-cell)")
    return EXIT_OK


def _read_json(path: str, schema_name: str) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"Cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DecodeError(f"{path} is not valid JSON: {exc}") from exc
    is_valid, error = validate_report(data, schema_name)
    if not is_valid:
        raise DecodeError(f"{path} does not match the {schema_name} schema: {error}")
    return data


def run_recover(args: argparse.Namespace) -> int:
    transcript = Transcript.from_dict(_read_json(args.transcript, "transcript"))
    key = TrapdoorKey.from_dict(_read_json(args.trapdoor, "trapdoor"), transcript.config.param)
    outcome = recover_from_transcript(transcript, key)
    if isinstance(outcome, NotInvertible):
        result = {"recovered": False, "reason": outcome.reason}
    else:
        result = {
            "recovered": True,
            "overflow": outcome.overflow,
            "attacker_key_hex": outcome.key.to_hex(),
            "matches_alice_key": outcome.key == transcript.alice_key,
            "matches_bob_key": outcome.key == transcript.bob_key,
        }
    _emit(result, args.out, args.quiet)
    return EXIT_OK


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args)
    try:
        return args.handler(args)
    except ClaimFailure as exc:
        print(f"❌ Claim failed: {exc}", file=sys.stderr)
        return EXIT_CLAIM
    except DecodeError as exc:
        print(f"❌ Decode error: {exc}", file=sys.stderr)
        return EXIT_DECODE
    except (ConfigError, ParameterError, ValidationError) as exc:
        print(f"❌ Configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LabError as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
