"""Command-line front end: generate, select, analyze, verify-automaton, pipeline.

Exit codes: 0 success, 1 negative verdict under ``--strict``, 2 usage or
validation error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .automata import (
    build_leap_automaton,
    build_modulo_automaton,
    build_remove_automaton,
    read_automaton_file,
    run_with_automaton,
    verification_report,
    write_automaton_file,
)
from .digits import (
    DigitStream,
    gen_champernowne,
    gen_constant,
    gen_periodic,
    gen_seeded_uniform,
    read_digit_file,
    write_body,
    write_digit_file,
)
from .rules import Leap, Modulo, RemoveTop, SelectionRule, parse_rule
from .stats import (
    DEFAULT_KMAX,
    DEFAULT_THRESHOLDS,
    census,
    cross_check_ratio,
    report,
    write_census_csv,
)

log = logging.getLogger("normsel")

SOURCES = ("champernowne", "constant", "periodic", "seeded-uniform")


class UsageError(Exception):
    pass


def parse_pattern(text: str) -> list[int]:
    """'12' -> [1, 2]; '10,3' -> [10, 3]."""
    text = text.strip()
    if not text:
        raise ValueError("empty pattern")
    if "," in text:
        return [int(t) for t in text.split(",") if t.strip()]
    return [int(ch, 36) for ch in text]


def parse_thresholds(text: str) -> dict[int, float]:
    """'1:0.01,2:0.02' -> {1: 0.01, 2: 0.02}."""
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        j, _, v = part.partition(":")
        out[int(j)] = float(v)
    return out


def make_source(source: str, base: int, count: int, *, seed: int = 0, digit: int | None = None, pattern: str | None = None) -> DigitStream:
    if source == "champernowne":
        return gen_champernowne(base, count)
    if source == "constant":
        if digit is None:
            raise ValueError("constant source needs --digit")
        return gen_constant(base, digit, count)
    if source == "periodic":
        if not pattern:
            raise ValueError("periodic source needs --pattern")
        return gen_periodic(base, parse_pattern(pattern), count)
    if source == "seeded-uniform":
        return gen_seeded_uniform(base, seed, count)
    raise ValueError(f"unknown source {source!r}; expected one of {', '.join(SOURCES)}")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def emit_json(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def run_selection(rule: SelectionRule, stream: DigitStream, out: Path, indices_out: Path | None) -> tuple[int, DigitStream]:
    """Stream the rule's output straight to disk. Returns (selected count, output stream)."""
    rule.check_base(stream.base)
    out_base = rule.output_base(stream.base)
    digits_tmp: list[int] = []
    count = 0
    idx_fh = open(indices_out, "w", encoding="ascii") if indices_out else None
    try:
        # the digit file header needs no length, so write incrementally
        with open(out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(f"# base={out_base}\n")
            for n, d in rule.iter_select(stream):
                count += 1
                digits_tmp.append(d)
                if idx_fh:
                    idx_fh.write(f"{n}\n")
                if len(digits_tmp) >= 1 << 16:
                    _flush(fh, digits_tmp, out_base)
            _flush(fh, digits_tmp, out_base)
    finally:
        if idx_fh:
            idx_fh.close()
    return count, read_digit_file(out)


def _flush(fh, digits: list[int], base: int) -> None:
    write_body(fh, digits, base, 100)
    digits.clear()


def automaton_for(rule: SelectionRule, base: int, k: int):
    """Matching augmented automaton for a rule, or None if there is none."""
    if isinstance(rule, Leap) and rule.n1 == 1:
        return build_leap_automaton(base, k)
    if isinstance(rule, RemoveTop):
        return build_remove_automaton(base, k)
    if isinstance(rule, Modulo):
        return build_modulo_automaton(base, k, rule.N, rule.L)
    return None


# -- subcommands -------------------------------------------------------------


def cmd_generate(args) -> int:
    stream = make_source(args.source, args.base, args.count, seed=args.seed, digit=args.digit, pattern=args.pattern)
    write_digit_file(stream, args.out)
    log.info("wrote %d base-%d digits to %s", args.count, args.base, args.out)
    return 0


def cmd_select(args) -> int:
    rule = parse_rule(args.rule)
    stream = read_digit_file(args.input)
    count, _ = run_selection(rule, stream, Path(args.out), Path(args.indices_out) if args.indices_out else None)
    log.info("%s selected %d of %d positions", rule.descriptor(), count, len(stream))
    return 0


def cmd_analyze(args) -> int:
    stream = read_digit_file(args.input)
    thresholds = parse_thresholds(args.thresholds) if args.thresholds else DEFAULT_THRESHOLDS
    c = census(stream, args.kmax)
    rep = report(c, thresholds=thresholds)
    emit_json(rep.to_json(), args.out)
    if args.csv:
        write_census_csv(c, args.csv)
    if args.strict and not rep.consistent_with_normal:
        return 1
    return 0


def cmd_verify_automaton(args) -> int:
    if args.file:
        a = read_automaton_file(args.file)
    elif args.builder == "leap":
        a = build_leap_automaton(args.base, args.k)
    elif args.builder == "remove":
        a = build_remove_automaton(args.base, args.k)
    elif args.builder == "modulo":
        if args.N is None or args.L is None:
            raise UsageError("modulo builder needs --N and --L")
        a = build_modulo_automaton(args.base, args.k, args.N, args.L)
    else:
        raise UsageError("give --builder or --file")
    rep = verification_report(a)
    emit_json(rep, args.out)
    if args.export:
        write_automaton_file(a, args.export)
    if args.strict and not (rep["transitive"] and rep["measure_preserved"]):
        return 1
    return 0


@dataclass
class PipelineConfig:
    """Settings of one end-to-end experiment, read from an INI ``[pipeline]`` section."""

    source: str
    base: int
    count: int
    out_dir: Path
    seed: int = 0
    digit: int | None = None
    pattern: str | None = None
    rule: str | None = None
    kmax: int = DEFAULT_KMAX
    thresholds: dict[int, float] = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    automaton_k: int = 1

    @classmethod
    def from_file(cls, path: str | Path, out_dir: str | None = None) -> PipelineConfig:
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        if not cp.read(path, encoding="utf-8"):
            raise UsageError(f"cannot read config {path}")
        if "pipeline" not in cp:
            raise UsageError(f"{path}: missing [pipeline] section")
        sec = cp["pipeline"]
        known = {"source", "base", "count", "seed", "digit", "pattern", "rule", "kmax", "thresholds", "automaton_k", "out_dir"}
        unknown = set(sec) - known
        if unknown:
            raise UsageError(f"{path}: unknown key(s) {', '.join(sorted(unknown))}")
        try:
            return cls(
                source=sec["source"],
                base=sec.getint("base"),
                count=sec.getint("count"),
                out_dir=Path(out_dir or sec.get("out_dir", "pipeline_out")),
                seed=sec.getint("seed", 0),
                digit=sec.getint("digit") if sec.get("digit") else None,
                pattern=sec.get("pattern") or None,
                rule=sec.get("rule") or None,
                kmax=sec.getint("kmax", DEFAULT_KMAX),
                thresholds=parse_thresholds(sec["thresholds"]) if sec.get("thresholds") else dict(DEFAULT_THRESHOLDS),
                automaton_k=sec.getint("automaton_k", 1),
            )
        except KeyError as exc:
            raise UsageError(f"{path}: missing key {exc.args[0]}") from exc

    def validate(self) -> tuple[DigitStream, SelectionRule | None]:
        if self.count is None or self.count < 1:
            raise UsageError("count must be a positive digit budget")
        if self.kmax < 1 or self.automaton_k < 1:
            raise UsageError("kmax and automaton_k must be >= 1")
        stream = make_source(self.source, self.base, self.count, seed=self.seed, digit=self.digit, pattern=self.pattern)
        rule = parse_rule(self.rule) if self.rule else None
        if rule is not None:
            rule.check_base(self.base)
        return stream, rule

    def describe(self) -> dict:
        return {
            "source": self.source,
            "base": self.base,
            "count": self.count,
            "seed": self.seed,
            "digit": self.digit,
            "pattern": self.pattern,
            "rule": self.rule,
            "kmax": self.kmax,
            "thresholds": {str(j): t for j, t in sorted(self.thresholds.items())},
            "automaton_k": self.automaton_k,
        }


def run_pipeline(cfg: PipelineConfig) -> dict:
    """generate -> select -> analyze -> cross-check; returns the manifest."""
    stream, rule = cfg.validate()
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, Path] = {}

    files["input"] = out / "input.digits"
    write_digit_file(stream, files["input"])
    stream_in = read_digit_file(files["input"])
    rep_in = report(census(stream_in, cfg.kmax), thresholds=cfg.thresholds)
    files["input_report"] = out / "input_report.json"
    emit_json(rep_in.to_json(), str(files["input_report"]))
    manifest: dict = {
        "version": __version__,
        "config": cfg.describe(),
        "source_descriptor": stream.describe(),
        "input_verdict": rep_in.verdict,
    }

    if rule is not None:
        files["output"] = out / "output.digits"
        files["indices"] = out / "indices.txt"
        count, selected = run_selection(rule, stream_in, files["output"], files["indices"])
        manifest["rule_descriptor"] = rule.descriptor()
        manifest["selected"] = count
        manifest["selection_density"] = count / cfg.count
        if count >= cfg.kmax:
            rep_out = report(census(selected, cfg.kmax), thresholds=cfg.thresholds)
            rep_out.selection_density = count / cfg.count
            out_json = rep_out.to_json()
            manifest["output_verdict"] = rep_out.verdict
        else:
            out_json = {"error": "empty stream" if count == 0 else "stream shorter than kmax", "positions": count}
            manifest["output_verdict"] = None
        files["output_report"] = out / "output_report.json"
        emit_json(out_json, str(files["output_report"]))

        a = automaton_for(rule, cfg.base, cfg.automaton_k)
        if a is not None:
            files["automaton_report"] = out / "automaton_report.json"
            emit_json(verification_report(a), str(files["automaton_report"]))
            run = run_with_automaton(a, stream_in)
            if run.selected_visits.steps:
                kk = max(cfg.automaton_k, 1)
                cc = cross_check_ratio(census(selected, kk), a, run)
                files["crosscheck"] = out / "crosscheck.json"
                emit_json(cc.to_json(), str(files["crosscheck"]))
                manifest["crosscheck_ok"] = cc.ok

    manifest["files"] = {name: {"path": p.name, "sha256": sha256_file(p)} for name, p in files.items()}
    emit_json(manifest, str(out / "manifest.json"))
    return manifest


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig.from_file(args.config, args.out_dir)
    manifest = run_pipeline(cfg)
    log.info("pipeline finished: %s", cfg.out_dir / "manifest.json")
    if args.strict and manifest.get("output_verdict", manifest["input_verdict"]) != "consistent-with-normal":
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="normsel", description="Normality-preserving digit selection experiments")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a digit file")
    g.add_argument("--source", required=True, choices=SOURCES)
    g.add_argument("--base", type=int, default=10)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--digit", type=int)
    g.add_argument("--pattern")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("select", help="apply a selection rule to a digit file")
    s.add_argument("--rule", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--indices-out")
    s.set_defaults(func=cmd_select)

    a = sub.add_parser("analyze", help="block-frequency report for a digit file")
    a.add_argument("--in", dest="input", required=True)
    a.add_argument("--kmax", type=int, default=DEFAULT_KMAX)
    a.add_argument("--thresholds", help="e.g. 1:0.01,2:0.02")
    a.add_argument("--out")
    a.add_argument("--csv")
    a.add_argument("--strict", action="store_true")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify-automaton", help="check transitivity and measure preservation")
    v.add_argument("--builder", choices=("leap", "remove", "modulo"))
    v.add_argument("--file")
    v.add_argument("--base", type=int, default=10)
    v.add_argument("--k", type=int, default=1)
    v.add_argument("--N", type=int)
    v.add_argument("--L", type=int)
    v.add_argument("--out")
    v.add_argument("--export")
    v.add_argument("--strict", action="store_true")
    v.set_defaults(func=cmd_verify_automaton)

    pl = sub.add_parser("pipeline", help="run a full experiment from a config file")
    pl.add_argument("--config", required=True)
    pl.add_argument("--out-dir")
    pl.add_argument("--strict", action="store_true")
    pl.set_defaults(func=cmd_pipeline)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"normsel {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
