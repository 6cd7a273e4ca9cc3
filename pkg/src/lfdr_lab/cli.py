"""Command-line interface.

Subcommands: ``analyze`` (multiple testing on a z-value file), ``oracle``
(exact threshold report for a known mixture), ``simulate`` (replication
studies and figure data from a JSON config), ``estimate-null`` (ECF null
diagnostics) and ``replay`` (re-run a recorded manifest).

Exit codes: 0 success, 2 input/config error, 3 insufficient data, 4
invalid/infeasible parameters, 5 estimator degeneracy.  Every command writes
a RunManifest JSON; replaying it reproduces the outputs byte-for-byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core_model import (
    GaussianComponent,
    TwoGroupModel,
    mixture_model,
    two_sided_pvalue,
)
from .errors import (
    DegenerateCF,
    DegenerateData,
    DegenerateMarginal,
    Infeasible,
    InvalidModel,
    LfdrLabError,
    NotEnoughData,
)
from .estimation import (
    NullEstimate,
    estimate_marginal_kde,
    estimate_null_ecf,
    estimate_p0_tail,
)
from .oracle import OracleRule, oracle_lfdr_rule, oracle_pvalue_rule
from .procedures import DecisionTable, adaptive_bh, bh_stepup, estimated_lfdr_values, lfdr_stepup
from .simulation import (
    PROCEDURES,
    SimConfig,
    concentrated_alternative_demo,
    figure1_csv,
    figure2_data,
    run_replicated,
    simresult_csv,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DATA = 3
EXIT_PARAMS = 4
EXIT_DEGENERATE = 5


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    """Everything needed to re-run a command and reproduce its outputs."""

    command: str
    parameters: dict = field(default_factory=dict)
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    seed: int | None = None
    tool_version: str = __version__

    def write(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _fmt6(x: float) -> str:
    """Reports print 6 significant digits; CSV keeps full precision."""
    return f"{x:.6g}"


def read_z_file(path: str) -> np.ndarray:
    """Read z-values: plain text one-per-line or CSV with a ``z`` column.

    UTF-8; blank lines and lines starting with ``#`` are ignored.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read {path}: {exc}")
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise CliError(EXIT_INPUT, f"{path}: no data lines")
    try:
        return np.array([float(ln) for ln in lines])
    except ValueError:
        pass
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    if reader.fieldnames is None or "z" not in reader.fieldnames:
        raise CliError(EXIT_INPUT, f"{path}: expected one z per line or a 'z' CSV column")
    try:
        return np.array([float(row["z"]) for row in reader])
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_INPUT, f"{path}: malformed z column ({exc})")


def parse_components(spec: str) -> list:
    """Parse "w:mean:sd,w:mean:sd,..." into (w, mean, sd) triples."""
    out = []
    for part in spec.split(","):
        fields = part.strip().split(":")
        if len(fields) != 3:
            raise CliError(EXIT_INPUT, f"bad component {part!r}; expected w:mean:sd")
        try:
            out.append(tuple(float(x) for x in fields))
        except ValueError:
            raise CliError(EXIT_INPUT, f"bad component {part!r}; expected numbers")
    return out


def _build_model(p0: float, components: list) -> TwoGroupModel:
    total = p0 + sum(w for w, _, _ in components)
    if abs(total - 1.0) > 1e-9:
        raise CliError(EXIT_PARAMS, f"weights sum to {total!r}, must be 1 within 1e-9")
    # nudge p0 so the model invariant (1e-12) holds exactly
    p0_exact = 1.0 - sum(w for w, _, _ in components)
    try:
        return mixture_model(p0_exact, components)
    except InvalidModel as exc:
        raise CliError(EXIT_PARAMS, str(exc))


def decision_table_csv(table: DecisionTable) -> str:
    buf = io.StringIO()
    buf.write("index,z,pvalue,lfdr_hat,reject\n")
    for row in table.rows:
        z = "" if math.isnan(row.z) else repr(row.z)
        p = "" if math.isnan(row.pvalue) else repr(row.pvalue)
        lf = "" if math.isnan(row.lfdr_hat) else repr(row.lfdr_hat)
        buf.write(f"{row.index},{z},{p},{lf},{'true' if row.reject else 'false'}\n")
    return buf.getvalue()


def _write_output(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    z = read_z_file(args.input)
    m = z.size
    if args.null == "estimated" and m < 100:
        raise CliError(EXIT_DATA, f"--null estimated needs m >= 100, got {m}")
    try:
        if args.null == "estimated":
            null_est = estimate_null_ecf(z)
            null_comp = GaussianComponent(null_est.u0_hat, null_est.sigma0_hat)
        else:
            null_est = None
            null_comp = GaussianComponent(0.0, 1.0)
        pvalues = two_sided_pvalue(z, null_comp)

        if args.procedure == "bh":
            table = bh_stepup(pvalues, args.alpha)
        elif args.procedure == "abh":
            p0_hat = null_est.p0_hat if null_est else estimate_p0_tail(pvalues)
            table = adaptive_bh(pvalues, args.alpha, p0_hat)
        else:  # lfdr
            if m == 1:
                # a single observation cannot support a marginal estimate;
                # the capped ratio degenerates to 1
                values = np.array([1.0])
            else:
                if null_est is None:
                    null_est = NullEstimate(
                        p0_hat=estimate_p0_tail(pvalues),
                        u0_hat=0.0,
                        sigma0_hat=1.0,
                        t_star=math.nan,
                        cf_magnitude_at_t_star=math.nan,
                    )
                marginal = estimate_marginal_kde(z)
                values = estimated_lfdr_values(z, null_est, marginal)
            table = lfdr_stepup(values, args.alpha)
        table.attach_z(z)
    except NotEnoughData as exc:
        raise CliError(EXIT_DATA, str(exc))
    except (DegenerateCF, DegenerateData, DegenerateMarginal) as exc:
        raise CliError(EXIT_DEGENERATE, str(exc))
    except ValueError as exc:
        raise CliError(EXIT_PARAMS, str(exc))

    _write_output(decision_table_csv(table), args.out)
    manifest = RunManifest(
        command="analyze",
        parameters={
            "alpha": args.alpha,
            "procedure": args.procedure,
            "null": args.null,
        },
        inputs=[args.input],
        outputs=[args.out] if args.out else [],
    )
    manifest.write(Path(args.manifest or _default_manifest_path("analyze", args.out)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def _region_text(rule: OracleRule) -> str:
    parts = [f"[{_fmt6(lo)}, {_fmt6(hi)}]" for lo, hi in rule.region.intervals]
    return " u ".join(parts) if parts else "(empty)"


def _rule_report(name: str, rule: OracleRule | None, note: str = "") -> str:
    if rule is None:
        return f"{name}\n  infeasible: {note}\n"
    return (
        f"{name}\n"
        f"  threshold = {_fmt6(rule.threshold)}\n"
        f"  region    = {_region_text(rule)}\n"
        f"  mFDR      = {_fmt6(rule.mfdr)}\n"
        f"  mFNR      = {_fmt6(rule.mfnr)}\n"
    )


def cmd_oracle(args) -> int:
    components = parse_components(args.components) if args.components else []
    model = _build_model(args.p0, components)
    if not (0.0 < args.alpha < 1.0):
        raise CliError(EXIT_PARAMS, f"alpha must be in (0, 1), got {args.alpha}")

    rules = {}
    notes = {}
    for kind, solver in (("pvalue", oracle_pvalue_rule), ("lfdr", oracle_lfdr_rule)):
        try:
            rules[kind] = solver(model, args.alpha)
        except Infeasible as exc:
            rules[kind] = None
            notes[kind] = str(exc)

    report = io.StringIO()
    report.write(f"two-group model: p0 = {_fmt6(model.p0)}, null = N({_fmt6(model.null.mean)}, {_fmt6(model.null.sd)}^2)\n")
    for w, c in model.nonnull:
        report.write(f"  nonnull: w = {_fmt6(w)}, N({_fmt6(c.mean)}, {_fmt6(c.sd)}^2)\n")
    report.write(f"target mFDR = {_fmt6(args.alpha)}\n\n")
    report.write(_rule_report("p-value oracle rule", rules["pvalue"], notes.get("pvalue", "")))
    report.write(_rule_report("lfdr oracle rule", rules["lfdr"], notes.get("lfdr", "")))
    sys.stdout.write(report.getvalue())

    outputs = []
    if args.csv:
        buf = io.StringIO()
        buf.write("kind,threshold,mfdr,mfnr,region\n")
        for kind in ("pvalue", "lfdr"):
            rule = rules[kind]
            if rule is None:
                buf.write(f"{kind},,,,infeasible\n")
            else:
                region = ";".join(f"{lo!r}:{hi!r}" for lo, hi in rule.region.intervals)
                buf.write(f"{kind},{rule.threshold!r},{rule.mfdr!r},{rule.mfnr!r},{region}\n")
        Path(args.csv).write_text(buf.getvalue())
        outputs.append(args.csv)

    manifest = RunManifest(
        command="oracle",
        parameters={"p0": args.p0, "components": args.components, "alpha": args.alpha},
        outputs=outputs,
    )
    manifest.write(Path(args.manifest or _default_manifest_path("oracle", args.csv)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _figure2_report(fig) -> str:
    buf = io.StringIO()
    buf.write("asymmetric-mixture oracle comparison (nonnull means -3 and 4, p1 = 0.15)\n\n")
    buf.write(_rule_report("p-value oracle rule", fig.pvalue_rule))
    buf.write(_rule_report("lfdr oracle rule", fig.lfdr_rule))
    buf.write("\nprobes:\n")
    for pp in fig.probes:
        buf.write(
            f"  z = {_fmt6(pp.z)}: p-value = {_fmt6(pp.pvalue)}, lfdr = {_fmt6(pp.lfdr)}, "
            f"rejected by lfdr rule: {pp.rejected_by_lfdr}, "
            f"rejected by p-value rule: {pp.rejected_by_pvalue}\n"
        )
    return buf.getvalue()


def _concentrated_report(demo) -> str:
    return (
        "concentrated-alternative demo (nonnull N(1.5, 0.1^2))\n"
        f"  hypotheses: {demo.m}, top set size: {demo.top}\n"
        f"  nonnull fraction among smallest p-values: {_fmt6(demo.capture_by_pvalue)}\n"
        f"  nonnull fraction among smallest lfdr:     {_fmt6(demo.capture_by_lfdr)}\n"
        f"  exact lfdr at z = 1.5: {_fmt6(demo.lfdr_at_mode)}\n"
        f"  exact lfdr at z = 4.0: {_fmt6(demo.lfdr_at_far_tail)}\n"
    )


def _parse_sim_config(cfg: dict) -> SimConfig:
    required = {"p0", "components", "m", "reps", "alpha", "seed"}
    missing = required - set(cfg)
    if missing:
        raise CliError(EXIT_INPUT, f"config missing keys: {sorted(missing)}")
    comps = cfg["components"]
    if isinstance(comps, str):
        comps = parse_components(comps)
    else:
        try:
            comps = [tuple(float(x) for x in c) for c in comps]
        except (TypeError, ValueError):
            raise CliError(EXIT_INPUT, "components must be [[w, mean, sd], ...] or 'w:mean:sd,...'")
        if any(len(c) != 3 for c in comps):
            raise CliError(EXIT_INPUT, "each component needs exactly (w, mean, sd)")
    model = _build_model(float(cfg["p0"]), comps)
    try:
        return SimConfig(
            model=model,
            m=int(cfg["m"]),
            reps=int(cfg["reps"]),
            alpha=float(cfg["alpha"]),
            seed=int(cfg["seed"]),
            rho=float(cfg.get("rho", 0.0)),
            procedures=tuple(cfg.get("procedures", PROCEDURES)),
        )
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"bad config: {exc}")


def cmd_simulate(args) -> int:
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INPUT, f"config is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise CliError(EXIT_INPUT, "config must be a JSON object")

    # normalize {"figure": "1a"} to the explicit figure keys
    fig = cfg.pop("figure", None)
    if isinstance(fig, str):
        fig = fig.lower()
        if fig in {"1a", "1b", "1c", "1d"}:
            cfg.setdefault("figure1", fig[1])
        elif fig == "2":
            cfg.setdefault("figure2", True)
        elif fig == "concentrated":
            cfg.setdefault("concentrated", True)
        else:
            raise CliError(EXIT_INPUT, f"unknown figure {fig!r}")

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name: str, text: str):
        path = outdir / name
        path.write_text(text)
        written.append(str(path))

    try:
        if "figure1" in cfg:
            panel = str(cfg["figure1"]).lower()
            if panel not in {"a", "b", "c", "d"}:
                raise CliError(EXIT_INPUT, f"figure1 panel must be a..d, got {panel!r}")
            emit(f"figure1_{panel}.csv", figure1_csv(panel))
        elif "figure2" in cfg and cfg["figure2"]:
            fig2 = figure2_data()
            buf = io.StringIO()
            buf.write("p1,mfnr_pvalue,mfnr_lfdr\n")
            for row in fig2.curve:
                buf.write(f"{row.sweep!r},{row.mfnr_pvalue!r},{row.mfnr_lfdr!r}\n")
            emit("figure2_curve.csv", buf.getvalue())
            emit("figure2_report.txt", _figure2_report(fig2))
        elif "concentrated" in cfg and cfg["concentrated"]:
            demo = concentrated_alternative_demo()
            emit("concentrated_report.txt", _concentrated_report(demo))
        else:
            sim_config = _parse_sim_config(cfg)
            result = run_replicated(sim_config)
            emit("replication.csv", simresult_csv(result))
    except CliError:
        for path in written:
            Path(path).unlink(missing_ok=True)
        raise
    except LfdrLabError as exc:
        for path in written:
            Path(path).unlink(missing_ok=True)
        if isinstance(exc, NotEnoughData):
            raise CliError(EXIT_DATA, str(exc))
        if isinstance(exc, (DegenerateCF, DegenerateData, DegenerateMarginal)):
            raise CliError(EXIT_DEGENERATE, str(exc))
        raise CliError(EXIT_PARAMS, str(exc))

    manifest = RunManifest(
        command="simulate",
        parameters={"config": cfg},
        inputs=[args.config],
        outputs=written,
        seed=cfg.get("seed"),
    )
    manifest.write(outdir / "manifest.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate-null
# ---------------------------------------------------------------------------

def cmd_estimate_null(args) -> int:
    z = read_z_file(args.input)
    try:
        est = estimate_null_ecf(z)
    except NotEnoughData as exc:
        raise CliError(EXIT_DATA, str(exc))
    except DegenerateCF as exc:
        raise CliError(EXIT_DEGENERATE, str(exc))
    sys.stdout.write(
        f"p0_hat     = {_fmt6(est.p0_hat)}\n"
        f"u0_hat     = {_fmt6(est.u0_hat)}\n"
        f"sigma0_hat = {_fmt6(est.sigma0_hat)}\n"
        f"t_star     = {_fmt6(est.t_star)}\n"
        f"|psi(t*)|  = {_fmt6(est.cf_magnitude_at_t_star)}\n"
    )
    sys.stdout.write("p0_hat,u0_hat,sigma0_hat,t_star,cf_magnitude_at_t_star\n")
    sys.stdout.write(
        f"{est.p0_hat!r},{est.u0_hat!r},{est.sigma0_hat!r},"
        f"{est.t_star!r},{est.cf_magnitude_at_t_star!r}\n"
    )
    manifest = RunManifest(command="estimate-null", inputs=[args.input])
    manifest.write(Path(args.manifest or _default_manifest_path("estimate-null", None)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

def _default_manifest_path(command: str, primary_out: str | None) -> str:
    if primary_out:
        return primary_out + ".manifest.json"
    return f"{command.replace('-', '_')}_manifest.json"


def cmd_replay(args) -> int:
    try:
        data = json.loads(Path(args.manifest_file).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_INPUT, f"cannot load manifest: {exc}")
    command = data.get("command")
    params = data.get("parameters", {})
    inputs = data.get("inputs", [])
    outputs = data.get("outputs", [])
    if command == "analyze":
        argv = [
            "analyze", inputs[0],
            "--alpha", str(params["alpha"]),
            "--procedure", params["procedure"],
            "--null", params["null"],
        ]
        if outputs:
            argv += ["--out", outputs[0]]
        argv += ["--manifest", args.manifest_file]
    elif command == "oracle":
        argv = ["oracle", "--p0", str(params["p0"]), "--alpha", str(params["alpha"])]
        if params.get("components"):
            argv += ["--components", params["components"]]
        if outputs:
            argv += ["--csv", outputs[0]]
        argv += ["--manifest", args.manifest_file]
    elif command == "simulate":
        # rebuild the normalized config next to the manifest
        cfg_path = Path(args.manifest_file).with_suffix(".replay.json")
        cfg_path.write_text(json.dumps(params["config"], sort_keys=True))
        outdir = str(Path(outputs[0]).parent) if outputs else str(Path(args.manifest_file).parent)
        argv = ["simulate", "--config", str(cfg_path), "--out", outdir]
    elif command == "estimate-null":
        argv = ["estimate-null", inputs[0], "--manifest", args.manifest_file]
    else:
        raise CliError(EXIT_INPUT, f"manifest has unknown command {command!r}")
    return main(argv)


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lfdr-lab",
        description="Two-group-model multiple testing: procedures, oracle rules, null estimation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="run a testing procedure on a z-value file")
    p.add_argument("input", help="z-values: one per line, or CSV with a 'z' column")
    p.add_argument("--alpha", type=float, default=0.10, help="FDR level (default 0.10)")
    p.add_argument("--procedure", choices=["bh", "abh", "lfdr"], default="bh")
    p.add_argument("--null", choices=["theoretical", "estimated"], default="theoretical",
                   help="theoretical N(0,1) or ECF-estimated null")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--manifest", help="manifest path (default: derived from --out)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("oracle", help="exact oracle thresholds for a known mixture")
    p.add_argument("--p0", type=float, required=True, help="null proportion")
    p.add_argument("--components", default="", help="nonnull components 'w:mean:sd,...'")
    p.add_argument("--alpha", type=float, required=True, help="target mFDR")
    p.add_argument("--csv", help="also write a machine-readable CSV")
    p.add_argument("--manifest", help="manifest path")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("simulate", help="replication study or figure data from a JSON config")
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-null", help="estimate (p0, u0, sigma0) from a z-value file")
    p.add_argument("input", help="z-values: one per line, or CSV with a 'z' column")
    p.add_argument("--manifest", help="manifest path")
    p.set_defaults(func=cmd_estimate_null)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest_file")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except LfdrLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMS


if __name__ == "__main__":
    sys.exit(main())
