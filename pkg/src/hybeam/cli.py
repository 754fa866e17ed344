"""Experiment configuration files, orchestration, and CSV emission.

Config files are flat ``key = value`` lines (format version 1).  Blank lines
and ``#`` comments are ignored; unknown keys are rejected.  Scenario keys are
the :class:`~hybeam.config.ScenarioConfig` fields; experiment keys are

    axis    = snr_fc | m_nodes | sigma_h_sq | eps_h
    values  = comma-separated, strictly monotone
    designs = comma-separated design kinds
    output  = CSV path (default results.csv)

Results are written as RFC-4180-style CSV with columns sweep_axis,
sweep_value, design, mse_mean, mse_stderr, bound, trials_used, failures.
Exit codes: 0 on success, 1 on configuration errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .config import ScenarioConfig
from .errors import BeamformingError, ConfigError
from .sim import DESIGN_KINDS, SWEEP_AXES, sweep

CONFIG_VERSION = 1

_INT_FIELDS = {
    "m_nodes", "n_t", "n_r", "p", "q", "n_cl",
    "n_rf_node", "n_rf_fc", "trials", "master_seed",
}
_FLOAT_FIELDS = {
    "snr_ob_db", "snr_fc_db", "beta", "alpha_fc",
    "sigma_h_sq", "eps_h", "rho_t", "rho_node",
}
_STR_FIELDS = {"ball_mode"}
_SCENARIO_FIELDS = _INT_FIELDS | _FLOAT_FIELDS | _STR_FIELDS
_EXPERIMENT_FIELDS = {"axis", "values", "designs", "output", "config_version"}

CSV_COLUMNS = (
    "sweep_axis", "sweep_value", "design",
    "mse_mean", "mse_stderr", "bound", "trials_used", "failures",
)


@dataclass(frozen=True)
class ExperimentSpec:
    """A fully validated experiment: scenario, sweep, designs, output path."""

    scenario: ScenarioConfig
    axis: str
    values: tuple[float, ...]
    designs: tuple[str, ...]
    output: str = "results.csv"

    def validate(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"axis must be one of {tuple(SWEEP_AXES)}")
        if len(self.values) == 0:
            raise ConfigError("values must be non-empty")
        diffs = [b - a for a, b in zip(self.values, self.values[1:])]
        if diffs and not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            raise ConfigError("axis values must be strictly monotone")
        if not self.designs:
            raise ConfigError("designs must be non-empty")
        for d in self.designs:
            if d not in DESIGN_KINDS:
                raise ConfigError(
                    f"unknown design {d!r}; choose from {DESIGN_KINDS}"
                )
        if self.axis == "m_nodes" and any(v != int(v) or v < 1 for v in self.values):
            raise ConfigError("m_nodes axis values must be positive integers")


def parse_config(text: str) -> ExperimentSpec:
    """Parse and validate a flat key-value experiment description."""
    scenario_kwargs: dict = {}
    experiment: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in scenario_kwargs or key in experiment:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _INT_FIELDS:
                scenario_kwargs[key] = int(value)
            elif key in _FLOAT_FIELDS:
                scenario_kwargs[key] = float(value)
            elif key in _STR_FIELDS:
                scenario_kwargs[key] = value
            elif key == "config_version":
                if int(value) != CONFIG_VERSION:
                    raise ConfigError(
                        f"line {lineno}: unsupported config_version {value}"
                    )
            elif key == "axis":
                experiment["axis"] = value
            elif key == "values":
                experiment["values"] = tuple(
                    float(v) for v in value.split(",") if v.strip()
                )
            elif key == "designs":
                experiment["designs"] = tuple(
                    v.strip() for v in value.split(",") if v.strip()
                )
            elif key == "output":
                experiment["output"] = value
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc

    for required in ("axis", "values", "designs"):
        if required not in experiment:
            raise ConfigError(f"missing required key {required!r}")
    try:
        scenario = ScenarioConfig(**scenario_kwargs)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    spec = ExperimentSpec(scenario=scenario, **experiment)
    spec.validate()
    return spec


def serialize_config(spec: ExperimentSpec) -> str:
    """Canonical text form of a spec; parses back to an equal spec."""
    lines = [f"config_version = {CONFIG_VERSION}"]
    for f in fields(ScenarioConfig):
        lines.append(f"{f.name} = {getattr(spec.scenario, f.name)}")
    lines.append(f"axis = {spec.axis}")
    lines.append("values = " + ", ".join(repr(v) for v in spec.values))
    lines.append("designs = " + ", ".join(spec.designs))
    lines.append(f"output = {spec.output}")
    return "\n".join(lines) + "\n"


def _format_number(x: float) -> str:
    xf = float(x)
    if math.isnan(xf):
        return "nan"
    if xf == 0.0:
        return "0.00000000e+00"
    if abs(xf) < 1e-3:
        return f"{xf:.8e}"
    return f"{xf:.9g}"


def run_experiment(spec: ExperimentSpec) -> int:
    """Run the sweep and write its CSV; returns the process exit status.

    Partial results are still written when some trials fail; any failure makes
    the status nonzero.
    """
    spec.validate()
    result = sweep(spec.scenario, spec.axis, list(spec.values), list(spec.designs))
    out_path = Path(spec.output)
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in result.rows:
            writer.writerow(
                [
                    spec.axis,
                    _format_number(row.sweep_value),
                    row.design,
                    _format_number(row.mse_mean),
                    _format_number(row.mse_stderr),
                    _format_number(row.bound),
                    str(row.trials_used),
                    str(row.failures),
                ]
            )
    total_failures = sum(row.failures for row in result.rows)
    return 0 if total_failures == 0 else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hybeam",
        description="Run a precoder-design MSE sweep described by a config file.",
    )
    parser.add_argument("config", help="path to the experiment config file")
    parser.add_argument("--seed", type=int, default=None, help="override master_seed")
    parser.add_argument("--trials", type=int, default=None, help="override trials")
    parser.add_argument("--output", default=None, help="override the CSV path")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        spec = parse_config(text)
        overrides = {}
        if args.seed is not None:
            overrides["master_seed"] = args.seed
        if args.trials is not None:
            overrides["trials"] = args.trials
        if overrides:
            spec = replace(spec, scenario=replace(spec.scenario, **overrides))
        if args.output is not None:
            spec = replace(spec, output=args.output)
        spec.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return run_experiment(spec)
    except BeamformingError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
