"""Command-line harness: run verification suites and emit residual reports."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field

from .errors import QCGeomError, UsageError
from .models import SUPPORTED_N
from .suites import MODELS, SUITES, CheckResult, SuiteConfig, calibrations, run_checks

FIELDS = ("name", "paper_ref", "max_residual", "tolerance", "samples", "pass", "skipped")


@dataclass(frozen=True)
class CheckReport:
    suite: str
    model: str
    n: int
    seed: int
    calibration: float
    results: tuple[CheckResult, ...] = ()
    calibrations: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failed(self) -> list[CheckResult]:
        return [r for r in self.results if not r.passed]

    def to_json(self) -> dict:
        return {
            "suite": self.suite,
            "model": self.model,
            "n": self.n,
            "seed": self.seed,
            "calibration": self.calibration,
            "calibrations": dict(sorted(self.calibrations.items())),
            "checks": [r.to_json() for r in self.results],
            "passed": self.passed,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CheckReport":
        return cls(
            suite=d["suite"],
            model=d["model"],
            n=int(d["n"]),
            seed=int(d["seed"]),
            calibration=float(d["calibration"]),
            results=tuple(CheckResult.from_json(c) for c in d["checks"]),
            calibrations={k: float(v) for k, v in d.get("calibrations", {}).items()},
        )


def run_suite(name: str, config: SuiteConfig) -> CheckReport:
    if name not in SUITES and name != "all":
        raise UsageError(f"unknown suite {name!r}; choose from {', '.join(SUITES + ('all',))}")
    if config.n not in SUPPORTED_N:
        raise UsageError(f"n must be one of {SUPPORTED_N}")
    if config.samples is not None and config.samples < 2:
        raise UsageError("samples must be at least 2")
    if config.tol is not None and not config.tol >= 0:
        raise UsageError("tolerance must be non-negative")
    results = tuple(run_checks(name, config))
    cal = calibrations(config)
    model = config.models[0] if len(config.models) == 1 else "both"
    main_cal = cal.get("sphere", next(iter(cal.values())))
    return CheckReport(name, model, config.n, config.seed, main_cal, results, cal)


def format_report(report: CheckReport, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report.to_json(), indent=2, ensure_ascii=False) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("suite", "model", "n", "seed", "calibration") + FIELDS)
        head = (report.suite, report.model, report.n, report.seed, repr(report.calibration))
        for r in report.results:
            d = r.to_json()
            w.writerow(head + tuple(repr(d[k]) if isinstance(d[k], float) else d[k] for k in FIELDS))
        return buf.getvalue()
    raise UsageError(f"unknown format {fmt!r}")


def parse_report(text: str) -> CheckReport:
    """Inverse of the JSON form of :func:`format_report`."""
    return CheckReport.from_json(json.loads(text))


def emit_report(report: CheckReport, fmt: str = "json", out: str | None = None) -> None:
    text = format_report(report, fmt)
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcgeom", description="Run numerical verification suites on the qc model spaces.")
    p.add_argument("--suite", required=True, choices=SUITES + ("all",))
    p.add_argument("--model", default="both", choices=MODELS + ("both",))
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--samples", type=int, default=None, help="sample points (default 50; integrals 20000)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tol", type=float, default=None, help="override every deterministic tolerance")
    p.add_argument("--format", default="json", choices=("json", "csv"))
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    models = MODELS if args.model == "both" else (args.model,)
    cfg = SuiteConfig(n=args.n, seed=args.seed, samples=args.samples, tol=args.tol, models=models)
    try:
        report = run_suite(args.suite, cfg)
        emit_report(report, args.format, args.out)
    except QCGeomError as exc:
        print(f"qcgeom: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"qcgeom: cannot write report: {exc}", file=sys.stderr)
        return 2
    for r in report.failed:
        print(f"FAIL {r.name}: {r.max_residual:.3e} > {r.tolerance:.1e}", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
