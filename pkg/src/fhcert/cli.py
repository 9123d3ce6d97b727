"""``fh-cert`` command line: JSON reports on disk, a short summary on stdout.

Exit status is 0 when every check of the command passes, 1 when a check
fails and 2 on bad input or configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import certificate as certmod
from . import lemmas
from .cohomology import GModule, cohomology_report
from .cryst import CrystGroup, preset
from .errors import FhCertError, HypothesisFailed
from .groups import (
    FiniteSemidirect,
    enumerate_cyclic_subgroups,
    enumerate_hyperelementary_subgroups,
    enumerate_subgroups,
)
from .linalg import format_rational, matrix_order_mod, parse_rational
from .simplicial import CONVENTIONS, check_nerve_contraction, estimate_DN, grid_box_cover, sample_close_pairs

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad command-line input or configuration."""


@dataclass
class RunConfig:
    command: str
    inputs: list[str] = field(default_factory=list)
    numbers: dict = field(default_factory=dict)
    workers: int = 1
    out: str | None = None
    convention: str = "unit-edge"
    options: dict = field(default_factory=dict)


def rational(text: str) -> Fraction:
    """Exact rational from ``p/q``, an integer or a finite decimal."""
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not an exact rational: {text!r}") from exc


def _json_arg(text: str):
    """Inline JSON, or the contents of a JSON file."""
    try:
        if text.lstrip().startswith(("{", "[")):
            return json.loads(text)
        return json.loads(Path(text).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read JSON from {text!r}: {exc}") from exc


def dump_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_report(payload, out: str | None) -> None:
    if out:
        Path(out).write_text(dump_json(payload))


# ---------------------------------------------------------------------------
# subcommands; each returns (exit status, report payload, summary line)


def _load_group(text: str) -> CrystGroup:
    if text.lstrip().startswith("{") or text.endswith(".json"):
        return CrystGroup.from_json(_json_arg(text))
    return preset(text)


def run_build(cfg: RunConfig):
    o = cfg.options
    G = _load_group(o["group"])
    cert = certmod.build_certificate(G, cfg.numbers["R"], cfg.numbers["eps"], cfg.convention)
    if o.get("tamper") is not None:
        cert = certmod.tamper_certificate(cert, o["tamper"])
    payload = cert.to_json()
    status = EXIT_OK if not cert.unhandled else EXIT_FAIL
    summary = (f"built {len(cert.entries)} entries for {G.name} (modulus {cert.modulus}, "
               f"primes {cert.primes}); {len(cert.unhandled)} unhandled subgroups")
    return status, payload, summary


def run_verify(cfg: RunConfig):
    path = cfg.inputs[0]
    try:
        cert = certmod.FHCertificate.from_json(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise InputError(f"cannot load certificate {path!r}: {exc}") from exc
    report = certmod.verify_certificate(cert, cfg.numbers.get("ball"), not cfg.options["no_coverage"])
    payload = report.to_json()
    failed = [k for k, v in report.clauses.items() if v is False]
    summary = "certificate verified" if report.ok else f"verification failed: {', '.join(failed) or 'see report'}"
    if not report.ok:
        bad = report.failures()
        if bad:
            first = bad[0]
            detail = {k: v for k, v in first.get("clauses", {}).items() if not v}
            summary += f"; first failing entry {first['index']}: {sorted(detail)}"
    return (EXIT_OK if report.ok else EXIT_FAIL), payload, summary


_SWEEP = re.compile(r"^gl(\d+)-mod(\d+)$")


def _lemma_report(name: str, params: dict, sweep: str | None, cap: int | None) -> lemmas.LemmaReport:
    p = dict(params)
    try:
        if name == "rs-kills-v":
            if sweep:
                m = _SWEEP.match(sweep)
                if not m:
                    raise InputError(f"unknown sweep {sweep!r}; expected glN-modS")
                return lemmas.sweep_rs_kills_v(int(m.group(1)), int(m.group(2)))
            return lemmas.check_rs_kills_v(p["M"], p["s"], p["r"], p["v"], p["j"], p["s_prime"], p["r_prime"])
        if sweep:
            raise InputError("--sweep applies to rs-kills-v only")
        if name == "prime-power":
            if "C" in p:
                C = p["C"]
                G = FiniteSemidirect.cyclic(p["M"], p["s"], p["r_prime"] * p["s"])
                return lemmas.find_prime_power(p["M"], p["s"], p["r_prime"], G.element(tuple(C["v"]), C["top"]))
            return lemmas.sweep_prime_power(p["M"], p["s"], p.get("r_prime"))
        if name == "cyclic-good":
            return lemmas.check_cyclic_good(p["M"], p["o"], p["nu"], p["p1"], p["p2"], p.get("r_mode", "full"),
                                            p.get("list_subgroups", True), cap)
        if name == "hyper-good":
            r = p.get("r")
            if r is None:
                r = p["s"] * matrix_order_mod(lemmas._mat(p["M"]), p["s"])
            return lemmas.check_hyper_good(p["M"], p["o"], p["nu"], p["s"], r, p.get("p1"), p.get("p2"), cap)
        if name == "section7":
            table = p["table"] if "table" in p else lemmas.cyclic_table(p["m"])
            return lemmas.section7_index_check(table, p["w"], p["i"], cap)
    except KeyError as exc:
        raise InputError(f"missing lemma parameter {exc}") from exc
    raise InputError(f"unknown lemma {name!r}")


def run_lemma(cfg: RunConfig):
    o = cfg.options
    params = _json_arg(o["params"]) if o.get("params") else {}
    if not isinstance(params, dict):
        raise InputError("lemma parameters must be a JSON object")
    if not params and not o.get("sweep"):
        if o["lemma"] not in DEFAULT_LEMMA_PARAMS:
            raise InputError(f"lemma {o['lemma']} needs --params or --sweep")
        params = DEFAULT_LEMMA_PARAMS[o["lemma"]]
        if o["lemma"] == "rs-kills-v":
            o["sweep"] = params["sweep"]
    try:
        report = _lemma_report(o["lemma"], params, o.get("sweep"), o.get("cap"))
    except HypothesisFailed as exc:
        report = lemmas.LemmaReport(o["lemma"], params, "hypothesis_failed", {"reason": str(exc)})
    payload = report.to_json()
    summary = f"{report.lemma}: {report.verdict} {report.counts}"
    return (EXIT_OK if report.verdict in ("holds", "vacuous") else EXIT_FAIL), payload, summary


DEFAULT_LEMMA_PARAMS = {
    "rs-kills-v": {"sweep": "gl2-mod3"},
    "section7": {"m": 6, "w": [1, -1, 1, -1, 1, -1], "i": 5},
}


def run_cohomology(cfg: RunConfig):
    payload = _json_arg(cfg.inputs[0])
    try:
        mod = GModule.from_json(payload)
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"bad module description: {exc}") from exc
    degrees = tuple(cfg.options["degrees"])
    report = cohomology_report(mod, degrees)
    ok = all(report.get("annihilated", {}).values())
    summary = ", ".join(f"H^{k} = {report[str(k)]['group']}" for k in degrees)
    return (EXIT_OK if ok else EXIT_FAIL), report, summary


def _finite_group(o: dict) -> FiniteSemidirect:
    if o.get("group"):
        return _load_group(o["group"]).quotient(o["s"])
    if o.get("M"):
        M = _json_arg(o["M"])
        M = [[M]] if isinstance(M, int) else M
        r = o.get("r") or matrix_order_mod(lemmas._mat(M), o["s"])
        return FiniteSemidirect.cyclic(M, o["s"], r)
    raise InputError("subgroups needs --group or --M")


def run_subgroups(cfg: RunConfig):
    o = cfg.options
    G = _finite_group(o)
    kind = o["kind"]
    if kind == "cyclic":
        subs = enumerate_cyclic_subgroups(G, o.get("cap"))
    elif kind == "hyperelementary":
        subs = [h.subgroup for h in enumerate_hyperelementary_subgroups(G, o.get("cap"))]
    else:
        subs = enumerate_subgroups(G, o.get("cap"))
    payload = {"group": {"n": G.n, "s": G.s, "top_order": G.top.order, "order": G.order},
               "kind": kind, "count": len(subs)}
    if o.get("list"):
        payload["subgroups"] = [H.to_json() for H in subs]
    return EXIT_OK, payload, f"{len(subs)} {kind} subgroups of a group of order {G.order}"


def run_nerve_check(cfg: RunConfig):
    n = cfg.numbers
    cover = grid_box_cover(n["lo"], n["hi"], n["cell"], n["margin"])
    pairs = sample_close_pairs(n["lo"], n["hi"], n["omega"] / (8 * cfg.options["N"]), cfg.options["pairs"],
                               cfg.options["seed"])
    try:
        report = check_nerve_contraction(cover, n["omega"], cfg.options["N"], pairs, (n["lo"], n["hi"]),
                                         cfg.options["grid"], cfg.convention)
    except HypothesisFailed as exc:
        payload = {"ok": False, "hypothesis_failed": str(exc), "witness": exc.witness}
        return EXIT_FAIL, payload, f"hypothesis failed: {exc}"
    payload = report.to_json()
    payload["cover"] = {"lo": format_rational(n["lo"]), "hi": format_rational(n["hi"]),
                        "cell": format_rational(n["cell"]), "margin": format_rational(n["margin"]),
                        "boxes": len(cover)}
    summary = f"nerve contraction {'holds' if report.ok else 'fails'} on {report.pairs_checked} pairs"
    return (EXIT_OK if report.ok else EXIT_FAIL), payload, summary


def run_dn_estimate(cfg: RunConfig):
    o = cfg.options
    est = estimate_DN(o["N"], o["samples"], o["seed"], o["denom"])
    payload = est.to_json()
    return (EXIT_OK if est.consistent else EXIT_FAIL), payload, f"D_{o['N']} estimate {payload['estimate']}"


COMMANDS = {
    "build": run_build,
    "verify": run_verify,
    "lemma": run_lemma,
    "cohomology": run_cohomology,
    "subgroups": run_subgroups,
    "nerve-check": run_nerve_check,
    "dn-estimate": run_dn_estimate,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; the report is written even when checks fail."""
    try:
        status, payload, summary = COMMANDS[cfg.command](cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FhCertError, ValueError, KeyError, TypeError) as exc:
        payload = {"ok": False, "error": type(exc).__name__, "message": str(exc)}
        write_report(payload, cfg.out)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    write_report(payload, cfg.out)
    print(summary)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fh-cert", description="Finite checks for controlled-topology "
                                     "certificates of crystallographic groups.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="JSON report path")
    common.add_argument("--workers", type=int, default=1, help="worker count (runs are sequential)")
    common.add_argument("--convention", choices=CONVENTIONS, default="unit-edge", help="l1 metric convention")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", parents=[common], help="build a certificate")
    p.add_argument("--group", required=True, help="preset name (Zn:n, Zn-minus-id:n, Dinfty) or JSON")
    p.add_argument("--R", type=rational, required=True)
    p.add_argument("--eps", type=rational, required=True)
    p.add_argument("--tamper", type=rational, default=None, help="shift every map offset (fault injection)")

    p = sub.add_parser("verify", parents=[common], help="verify a certificate")
    p.add_argument("certificate")
    p.add_argument("--ball", type=int, default=None, help="ball radius (default R + 4)")
    p.add_argument("--report", help="alias for --out")
    p.add_argument("--no-coverage", action="store_true", help="skip the subgroup coverage check")

    p = sub.add_parser("lemma", parents=[common], help="run a lemma oracle")
    p.add_argument("lemma", choices=["rs-kills-v", "prime-power", "cyclic-good", "hyper-good", "section7"])
    p.add_argument("--params", help="JSON file or inline JSON object")
    p.add_argument("--sweep", help="exhaustive sweep, e.g. gl2-mod3")
    p.add_argument("--cap", type=int, default=None, help="enumeration cap")

    p = sub.add_parser("cohomology", parents=[common], help="cohomology of a G-module")
    p.add_argument("module", help="JSON file or inline JSON")
    p.add_argument("--degrees", type=int, nargs="+", default=[0, 1, 2])

    p = sub.add_parser("subgroups", parents=[common], help="enumerate subgroups of a finite quotient")
    p.add_argument("--group", help="crystallographic group to reduce mod s")
    p.add_argument("--M", help="matrix (JSON) generating a cyclic top group")
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--r", type=int, default=None, help="top order (default ord(M mod s))")
    p.add_argument("--kind", choices=["all", "cyclic", "hyperelementary"], default="all")
    p.add_argument("--list", action="store_true", help="include every subgroup in the report")
    p.add_argument("--cap", type=int, default=None)

    p = sub.add_parser("nerve-check", parents=[common], help="nerve-map contraction on a box grid")
    p.add_argument("--lo", type=rational, default=Fraction(0))
    p.add_argument("--hi", type=rational, default=Fraction(10))
    p.add_argument("--cell", type=rational, default=Fraction(4))
    p.add_argument("--margin", type=rational, default=Fraction(2))
    p.add_argument("--omega", type=rational, default=Fraction(1))
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--pairs", type=int, default=10_000)
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("dn-estimate", parents=[common], help="estimate the subdivision constant D_N")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--denom", type=int, default=12)
    return parser


_NUMERIC = ("R", "eps", "ball", "lo", "hi", "cell", "margin", "omega")
_INPUTS = ("certificate", "module")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = vars(args).copy()
    command = values.pop("command")
    out = values.pop("out", None)
    report = values.pop("report", None)
    cfg = RunConfig(command, out=report or out, workers=values.pop("workers", 1),
                    convention=values.pop("convention", "unit-edge"))
    for key in _INPUTS:
        if key in values:
            cfg.inputs.append(values.pop(key))
    for key in _NUMERIC:
        if key in values:
            cfg.numbers[key] = values.pop(key)
    cfg.options = values
    if cfg.workers < 1:
        raise InputError("--workers must be positive")
    if os.environ.get("FH_CERT_MAX_ENUM"):
        try:
            int(os.environ["FH_CERT_MAX_ENUM"])
        except ValueError as exc:
            raise InputError("FH_CERT_MAX_ENUM must be an integer") from exc
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = config_from_args(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
