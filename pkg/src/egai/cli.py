"""Command-line front end: ``egai test``, ``egai simulate`` and ``egai diagnose``.

Exit codes: 0 success, 2 input or configuration error, 3 contract mismatch
(wrong evidence kind, or a failed wealth audit).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
from typing import List, Optional, Sequence, TextIO

import numpy as np

from . import metrics
from .core import ConfigError, EGaiError, Evidence, EvidenceError, EvidenceKind, GaiConfig, RaiConfig
from .procedures import DEFAULT_MEM_DECAY, parse_kind, make_procedure

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONTRACT = 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def fmt(x: float) -> str:
    """17 significant digits: parsing the text gives back the same double."""
    return format(float(x), ".17g")


# ---- input parsing -------------------------------------------------------

def read_stream(fh: TextIO):
    """Parse ``t,value[,label]`` records; returns ``(kind or None, rows)``.

    Comment lines start with ``#``; ``# kind=e`` or ``# kind=p`` declares
    the evidence kind. ``rows`` holds ``(lineno, t, value, label)`` tuples.
    """
    kind = None
    header = None
    rows = []
    last_t = None
    for lineno, raw in enumerate(fh, start=1):
        line = raw.rstrip("\r\n")
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped[1:].strip()
            if body.lower().startswith("kind"):
                key, _, val = body.partition("=")
                if key.strip().lower() != "kind" or not val.strip():
                    raise CliError(EXIT_INPUT, f"line {lineno}: malformed kind declaration")
                try:
                    declared = EvidenceKind.parse(val)
                except EvidenceError:
                    raise CliError(EXIT_INPUT, f"line {lineno}: unknown kind {val.strip()!r}") from None
                if kind is not None and declared is not kind:
                    raise CliError(EXIT_INPUT, f"line {lineno}: conflicting kind declarations")
                kind = declared
            continue
        fields = [f.strip() for f in line.split(",")]
        if header is None:
            if fields not in (["t", "value"], ["t", "value", "label"]):
                raise CliError(EXIT_INPUT, f"line {lineno}: expected header 't,value' or 't,value,label'")
            header = fields
            continue
        if len(fields) != len(header):
            raise CliError(EXIT_INPUT, f"line {lineno}: expected {len(header)} fields, got {len(fields)}")
        try:
            t = int(fields[0])
        except ValueError:
            raise CliError(EXIT_INPUT, f"line {lineno}: t is not an integer") from None
        if last_t is not None and t <= last_t:
            raise CliError(EXIT_INPUT, f"line {lineno}: t must be strictly increasing")
        last_t = t
        try:
            value = float(fields[1])
        except ValueError:
            raise CliError(EXIT_INPUT, f"line {lineno}: value is not a number") from None
        label = None
        if len(header) == 3:
            if fields[2] not in ("0", "1"):
                raise CliError(EXIT_INPUT, f"line {lineno}: label must be 0 or 1")
            label = int(fields[2])
        rows.append((lineno, t, value, label))
    return kind, rows


# ---- procedure configuration from flags ---------------------------------

_RAI_FLAGS = ("alpha", "omega1", "phi", "psi", "lam", "decay")
_GAI_FLAGS = ("alpha", "w0", "gamma", "lam")
_FLAG_NAMES = {"lam": "--lambda"}


def _gamma_arg(text: str):
    if text is None:
        return None
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) > 1:
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise ConfigError("gamma", f"cannot parse sequence {text!r}") from None
    return text.strip()


def build_procedure(args):
    kind, mem = parse_kind(args.procedure)
    given = {
        "alpha": args.alpha, "omega1": args.omega1, "phi": args.phi, "psi": args.psi,
        "lam": args.lam, "decay": args.decay, "w0": args.w0, "gamma": _gamma_arg(args.gamma),
    }
    given = {k: v for k, v in given.items() if v is not None}
    allowed = _RAI_FLAGS if kind.is_rai else _GAI_FLAGS
    for key in given:
        if key not in allowed:
            raise ConfigError(_FLAG_NAMES.get(key, "--" + key), f"does not apply to {kind.value}")
    if args.horizon is not None:
        if not kind.is_rai:
            raise ConfigError("--horizon", f"does not apply to {kind.value}")
        if args.horizon < 1:
            raise ConfigError("--horizon", "must be a positive integer")
        given.setdefault("omega1", min(0.005, 1.0 / args.horizon))
    if kind.is_rai:
        if mem:
            given.setdefault("decay", DEFAULT_MEM_DECAY)
        config = RaiConfig(**given)
    else:
        config = GaiConfig(**given)
    return make_procedure(kind, config), mem


def cmd_test(args, stdout: TextIO) -> int:
    proc, _ = build_procedure(args)
    with open(args.input, "r", encoding="utf-8", newline="") as fh:
        declared, rows = read_stream(fh)
    flag_kind = EvidenceKind.parse(args.kind) if args.kind else None
    if flag_kind is not None and declared is not None and flag_kind is not declared:
        raise CliError(EXIT_CONTRACT, f"--kind {flag_kind.value} contradicts the file's kind={declared.value}")
    kind = flag_kind or declared or proc.evidence_kind
    if kind is not proc.evidence_kind:
        raise CliError(
            EXIT_CONTRACT, f"{proc.name} expects {proc.evidence_kind.value}-values but the input holds {kind.value}-values"
        )
    # validate everything before emitting anything
    evidence = []
    for lineno, t, value, label in rows:
        try:
            evidence.append(Evidence(kind, value))
        except EvidenceError as exc:
            raise CliError(EXIT_INPUT, f"line {lineno}: {exc}") from None
    out = open(args.output, "w", encoding="utf-8", newline="\n") if args.output else stdout
    try:
        for (lineno, t, value, label), ev in zip(rows, evidence):
            wealth = proc.state.remaining_wealth
            omega = proc.state.omega
            d = proc.step(ev)
            parts = [
                f'"t": {t}',
                f'"level": {fmt(d.level)}',
                f'"value": {fmt(value)}',
                f'"reject": {"true" if d.reject else "false"}',
                f'"remaining_wealth": {fmt(wealth)}',
                f'"omega": {"null" if omega is None else fmt(omega)}',
                f'"kind": "{kind.value}"',
                f'"procedure": "{proc.name}"',
            ]
            if label is not None:
                parts.append(f'"label": {label}')
            out.write("{" + ", ".join(parts) + "}\n")
    finally:
        if out is not stdout:
            out.close()
    return EXIT_OK


# ---- simulate --------------------------------------------------------------

def cmd_simulate(args, stdout: TextIO) -> int:
    from .simharness import RESULT_COLUMNS, load_experiment, result_rows
    import dataclasses

    if not os.path.isfile(args.config):
        raise CliError(EXIT_INPUT, f"config file {args.config!r} not found")
    exp = load_experiment(args.config)
    if args.reps is not None:
        if args.reps < 1:
            raise ConfigError("reps", "must be >= 1")
        exp = dataclasses.replace(exp, reps=args.reps)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        exp = dataclasses.replace(exp, seed=args.seed)
    rows = result_rows(exp.run())
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "results.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, float) else v for v in (row[c] for c in RESULT_COLUMNS)])
    stdout.write(f"wrote {len(rows)} rows to {path}\n")
    return EXIT_OK


# ---- diagnose --------------------------------------------------------------

ESTIMATORS = ("auto", "lord", "saffron", "mem-lord", "mem-saffron", "gai-lord", "gai-saffron")

_AUTO = {
    "e-lord": "lord", "pl-rai": "lord", "e-lond": "lord",
    "e-saffron": "saffron", "ps-rai": "saffron",
    "lord++": "gai-lord", "saffron": "gai-saffron",
}


def read_decisions(path):
    levels, rejects, values, labels = [], [], [], []
    kind = procedure = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                levels.append(float(rec["level"]))
                rejects.append(bool(rec["reject"]))
                values.append(float(rec["value"]))
                labels.append(rec.get("label"))
                rk = EvidenceKind.parse(rec.get("kind", kind.value if kind else "e"))
            except (ValueError, KeyError, TypeError, EvidenceError) as exc:
                raise CliError(EXIT_INPUT, f"line {lineno}: malformed decision record ({exc})") from None
            if kind is not None and rk is not kind:
                raise CliError(EXIT_INPUT, f"line {lineno}: evidence kind changes within the file")
            kind = rk
            procedure = rec.get("procedure", procedure)
    return kind or EvidenceKind.E, procedure, levels, rejects, values, labels


def _read_labels(path):
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#") or row[0].strip() == "t":
                continue
            val = row[-1].strip()
            if val not in ("0", "1"):
                raise CliError(EXIT_INPUT, f"{path} line {lineno}: label must be 0 or 1")
            out.append(int(val))
    return out


def _resolve_estimators(chosen: Sequence[str], procedure: Optional[str]) -> List[str]:
    names = []
    for name in chosen or ["auto"]:
        if name == "auto":
            if procedure is None:
                name = "lord"
            else:
                kind, mem = parse_kind(procedure)
                name = ("mem-" if mem else "") + _AUTO[kind.value]
        if name not in names:
            names.append(name)
    return names


def _trajectory(name, run, lam, decay):
    if name == "lord":
        return metrics.fdp_hat_lord_trajectory(run)
    if name == "saffron":
        return metrics.fdp_hat_saffron_trajectory(run, lam)
    if name == "mem-lord":
        return metrics.fdp_hat_lord_trajectory(run, decay)
    if name == "mem-saffron":
        return metrics.fdp_hat_saffron_trajectory(run, lam, decay)
    if name == "gai-lord":
        return metrics.fdp_hat_gai_lord_trajectory(run)
    return metrics.fdp_hat_gai_saffron_trajectory(run, lam)


def cmd_diagnose(args, stdout: TextIO) -> int:
    kind, procedure, levels, rejects, values, labels = read_decisions(args.decisions)
    if args.labels:
        labels = _read_labels(args.labels)
        if len(labels) != len(levels):
            raise CliError(EXIT_INPUT, f"{len(labels)} labels for {len(levels)} decisions")
    have_labels = bool(levels) and all(v is not None for v in labels)
    if not have_labels and any(v is not None for v in labels):
        raise CliError(EXIT_INPUT, "labels are present on some records only")
    try:
        names = _resolve_estimators(args.estimator, procedure)
    except (ConfigError, KeyError):
        raise CliError(EXIT_INPUT, f"cannot infer an estimator for procedure {procedure!r}") from None
    mem_proc = procedure is not None and procedure.lower().startswith("mem-")
    decay = args.decay if args.decay is not None else (DEFAULT_MEM_DECAY if mem_proc else 1.0)
    if not 0.0 < decay <= 1.0:
        raise ConfigError("--decay", "must lie in (0, 1]")
    lam = args.lam
    if lam is None:
        lam = 0.5 if procedure is not None and parse_kind(procedure)[0].value == "saffron" else 0.1
    if not 0.0 <= lam < 1.0:
        raise ConfigError("--lambda", "must lie in [0, 1)")
    run = metrics.LabeledRun(
        np.array(levels, dtype=float), np.array(rejects, dtype=bool), np.array(values, dtype=float),
        kind, np.array(labels, dtype=int) if have_labels else None,
    )
    columns = {f"fdp_hat_{n.replace('-', '_')}": _trajectory(n, run, lam, decay) for n in names}
    if have_labels:
        columns["fdp_star_e"] = metrics.fdp_star_e_trajectory(run)
        columns["fdp"] = metrics.fdp_trajectory(run)
        columns["power"] = metrics.power_trajectory(run)
        columns["mem_fdp"] = metrics.mem_fdp_trajectory(run, decay)
        columns["mem_power"] = metrics.mem_power_trajectory(run, decay)
    out = open(args.output, "w", encoding="utf-8", newline="") if args.output else stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["t", *columns])
        for i in range(len(run)):
            writer.writerow([i + 1, *(fmt(c[i]) for c in columns.values())])
    finally:
        if out is not stdout:
            out.close()
    if args.alpha is not None:
        bound = args.alpha * (1.0 + args.rtol)
        for n in names:
            traj = columns[f"fdp_hat_{n.replace('-', '_')}"]
            bad = np.nonzero(traj > bound)[0]
            if bad.size:
                i = int(bad[0])
                raise CliError(
                    EXIT_CONTRACT, f"audit failed: fdp_hat_{n} = {fmt(traj[i])} exceeds alpha = {fmt(args.alpha)} at t = {i + 1}"
                )
    return EXIT_OK


# ---- argument parsing -----------------------------------------------------

def _add_procedure_flags(p):
    p.add_argument("--alpha", type=float, help="target FDR level (default 0.05)")
    p.add_argument("--omega1", type=float, help="initial allocation fraction of the RAI procedures")
    p.add_argument("--phi", type=float, help="growth factor of omega after non-rejections")
    p.add_argument("--psi", type=float, help="shrink factor of omega after rejections")
    p.add_argument("--lambda", dest="lam", type=float, help="candidate threshold of adaptive procedures")
    p.add_argument("--decay", type=float, help="decaying-memory factor d in (0, 1]")
    p.add_argument("--gamma", help="gamma family (pi2, lord, saffron) or a comma-separated sequence")
    p.add_argument("--w0", type=float, help="initial wealth of the GAI baselines")
    p.add_argument("--horizon", type=int, help="set omega1 = min(0.005, 1/horizon) unless --omega1 is given")


def build_parser() -> argparse.ArgumentParser:
    # argparse exits 2 on usage errors, the same code as any other input error
    parser = argparse.ArgumentParser(prog="egai", description="Online FDR control with e-values and p-values.")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run a procedure over an evidence CSV and emit JSONL decisions")
    t.add_argument("input", help="CSV with header t,value[,label]")
    t.add_argument("--procedure", "-P", default="e-lord", help="e-lord, e-saffron, pl-rai, ps-rai, mem-*, e-lond, lord++, saffron")
    t.add_argument("--kind", choices=("e", "p"), help="evidence kind when the file does not declare it")
    t.add_argument("--output", "-o", help="JSONL output path (default stdout)")
    _add_procedure_flags(t)

    s = sub.add_parser("simulate", help="run a YAML experiment and write results.csv")
    s.add_argument("config", help="YAML experiment file")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--reps", type=int, help="override the number of replications")
    s.add_argument("--seed", type=int, help="override the experiment seed")

    d = sub.add_parser("diagnose", help="FDP estimator trajectories and labelled metrics for a decision log")
    d.add_argument("decisions", help="JSONL written by 'egai test'")
    d.add_argument("--labels", help="CSV whose last column holds 0/1 labels, one row per decision")
    d.add_argument("--estimator", action="append", choices=ESTIMATORS,
                   help="estimator to report (repeatable; default picks the one matching the procedure)")
    d.add_argument("--lambda", dest="lam", type=float, help="lambda of the adaptive estimators")
    d.add_argument("--decay", type=float, help="decay of the mem estimators")
    d.add_argument("--alpha", type=float, help="audit: exit 3 if a reported estimator exceeds alpha")
    d.add_argument("--rtol", type=float, default=1e-12, help="relative slack of the audit (default 1e-12)")
    d.add_argument("--output", "-o", help="CSV output path (default stdout)")
    return parser


def main(argv: Optional[Sequence[str]] = None, stdout: TextIO = None, stderr: TextIO = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stderr(stderr), contextlib.redirect_stdout(stdout):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {"test": cmd_test, "simulate": cmd_simulate, "diagnose": cmd_diagnose}
    try:
        return handlers[args.command](args, stdout)
    except CliError as exc:
        stderr.write(f"egai {args.command}: {exc}\n")
        return exc.code
    except ConfigError as exc:
        stderr.write(f"egai {args.command}: invalid {exc.field}: {exc}\n")
        return EXIT_INPUT
    except (EGaiError, OSError, ValueError) as exc:
        stderr.write(f"egai {args.command}: {exc}\n")
        return EXIT_INPUT


def entry_point():  # pragma: no cover - thin wrapper for the console script
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    entry_point()
