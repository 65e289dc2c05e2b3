"""Scenario-driven command line front end.

Usage::

    confkg <verb> --config scenario.ini [--out DIR] [--tol X]

Verbs: transform, spectrum, compare-pictures, superposition,
verify-invariants.  The scenario file is INI: sections ``[profile]``,
``[kgrid]``, ``[tolerances]``, ``[transform]``, ``[branch.<n>]`` and
``[output]``; see the README for every key.  Flags override file values.

Exit status: 0 when every report entry passes, 1 when one fails, 2 for an
invalid scenario, 3 for a numerical failure.
"""
from __future__ import annotations

import configparser
import json
import math
import os
import platform
import re
import sys
from dataclasses import dataclass, field

import click
import numpy as np
import scipy

from . import __version__
from . import invariants as inv
from .bogoliubov import CSV_HEADER
from .errors import ConfKGError
from .geometry import ConformalFactor, ScaleFactorProfile
from .qrfstate import Branch, BranchState, MassTerm

EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

VERBS = ("transform", "spectrum", "compare-pictures", "superposition", "verify-invariants")


class ConfigError(Exception):
    def __init__(self, path, message, section=None, key=None, line=None):
        where = f"{path}:{line}" if line else str(path)
        loc = f"[{section}]" if section else ""
        if key:
            loc += f" {key}"
        super().__init__(f"{where}: {loc + ': ' if loc else ''}{message}")


@dataclass
class Scenario:
    path: str
    profile: ScaleFactorProfile
    m: float
    xi: float
    ks: np.ndarray
    tol: float
    static_tol: float
    out_dir: str
    transform: dict = field(default_factory=dict)
    branches: list = field(default_factory=list)
    echo: dict = field(default_factory=dict)


class _Reader:
    """Typed access to a parsed INI file with line-aware diagnostics."""

    def __init__(self, path):
        self.path = path
        try:
            with open(path) as fh:
                self.lines = fh.read().splitlines()
        except OSError as exc:
            raise ConfigError(path, f"cannot read config: {exc.strerror}") from exc
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            self.cp.read_string("\n".join(self.lines), source=str(path))
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(path, exc.message.splitlines()[0], line=line) from exc
        self.echo = {s: dict(self.cp[s]) for s in self.cp.sections()}

    def line_of(self, section, key=None):
        in_section = False
        for i, raw in enumerate(self.lines, 1):
            text = raw.strip()
            if text.startswith("["):
                in_section = text[1:].split("]")[0].strip() == section
                if in_section and key is None:
                    return i
            elif in_section and key and re.match(rf"{re.escape(key)}\s*[=:]", text, re.I):
                return i
        return None

    def error(self, section, key, message):
        return ConfigError(self.path, message, section, key, self.line_of(section, key))

    def has(self, section, key=None):
        if not self.cp.has_section(section):
            return False
        return key is None or self.cp.has_option(section, key)

    def float(self, section, key, default=None, *, positive=False, nonneg=False):
        if not self.has(section, key):
            if default is None:
                raise self.error(section, None, f"missing required key {key!r}")
            return float(default)
        raw = self.cp.get(section, key)
        try:
            val = float(raw)
        except ValueError:
            raise self.error(section, key, f"expected a number, got {raw!r}") from None
        if not math.isfinite(val):
            raise self.error(section, key, "must be finite")
        if positive and not val > 0:
            raise self.error(section, key, "must be positive")
        if nonneg and val < 0:
            raise self.error(section, key, "must be non-negative")
        return val

    def int(self, section, key, default=None, *, minimum=None):
        if not self.has(section, key):
            if default is None:
                raise self.error(section, None, f"missing required key {key!r}")
            return int(default)
        raw = self.cp.get(section, key)
        try:
            val = int(raw)
        except ValueError:
            raise self.error(section, key, f"expected an integer, got {raw!r}") from None
        if minimum is not None and val < minimum:
            raise self.error(section, key, f"must be >= {minimum}")
        return val

    def choice(self, section, key, options, default):
        val = self.cp.get(section, key, fallback=default).strip().lower()
        if val not in options:
            raise self.error(section, key, f"must be one of {', '.join(options)}, got {val!r}")
        return val


def _profile(reader, section):
    kind = reader.choice(section, "kind", ("tanh", "constant"), "tanh")
    if kind == "constant":
        return ScaleFactorProfile.constant(reader.float(section, "a", positive=True))
    a_in = reader.float(section, "a_in", positive=True)
    a_out = reader.float(section, "a_out", positive=True)
    rho = reader.float(section, "rho", 1.0, positive=True)
    return ScaleFactorProfile.tanh(a_in, a_out, rho)


def _kgrid(reader):
    s = "kgrid"
    spacing = reader.choice(s, "spacing", ("log", "linear"), "log")
    k_min = reader.float(s, "k_min", 0.1)
    k_max = reader.float(s, "k_max", 10.0)
    count = reader.int(s, "count", 64, minimum=1)
    if spacing == "log" and not k_min > 0:
        raise reader.error(s, "k_min", "must be > 0 for log spacing")
    if k_min < 0:
        raise reader.error(s, "k_min", "must be non-negative")
    if count > 1 and not k_max > k_min:
        raise reader.error(s, "k_max", "must exceed k_min")
    if count == 1:
        return np.array([k_min])
    return np.geomspace(k_min, k_max, count) if spacing == "log" else np.linspace(k_min, k_max, count)


def _branches(reader, m, xi):
    names = sorted((s for s in reader.cp.sections() if s.startswith("branch.")),
                   key=lambda s: (len(s), s))
    out = []
    for s in names:
        re_amp = reader.float(s, "re_amp", reader.float(s, "amplitude", 0.0))
        im_amp = reader.float(s, "im_amp", 0.0)
        if not reader.has(s, "re_amp") and not reader.has(s, "amplitude"):
            raise reader.error(s, None, "missing amplitude (re_amp or amplitude)")
        out.append(Branch(complex(re_amp, im_amp), ConformalFactor.from_scale(_profile(reader, s)),
                          MassTerm(m * m, xi)))
    return out


def load_scenario(path, out=None, tol=None):
    """Parse and validate a scenario file; flags override file values."""
    reader = _Reader(path)
    if not reader.has("profile"):
        raise ConfigError(path, "missing required section [profile]")
    profile = _profile(reader, "profile")
    m = reader.float("profile", "m", 1.0, nonneg=True)
    xi = reader.float("profile", "xi", 0.0)
    ks = _kgrid(reader)
    file_tol = reader.float("tolerances", "tol", 1e-10, positive=True)
    static_tol = reader.float("tolerances", "static_tol", 1e-8, positive=True)
    if tol is not None and not tol > 0:
        raise ConfigError(path, "--tol must be positive")
    transform = {}
    if reader.has("transform"):
        s = "transform"
        transform = {
            "H": reader.float(s, "H", 1.0, positive=True),
            "m2": reader.float(s, "m2", 1.0),
            "t_min": reader.float(s, "t_min", 0.0),
            "t_max": reader.float(s, "t_max", 1.0),
            "nt": reader.int(s, "nt", 101, minimum=3),
        }
        if not transform["t_max"] > transform["t_min"]:
            raise reader.error(s, "t_max", "must exceed t_min")
    branches = _branches(reader, m, xi)
    out_dir = out or reader.cp.get("output", "dir", fallback="confkg-out")
    return Scenario(path=str(path), profile=profile, m=m, xi=xi, ks=ks,
                    tol=tol if tol is not None else file_tol, static_tol=static_tol,
                    out_dir=out_dir, transform=transform, branches=branches, echo=reader.echo)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _fmt(v):
    return format(float(v), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, allow_nan=False)
        fh.write("\n")


def _metadata(scn, verb):
    return {
        "job": verb,
        "confkg": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "tol": scn.tol,
        "static_tol": scn.static_tol,
        "config": scn.echo,
    }


def _report(scn, verb, checks):
    return {
        "metadata": _metadata(scn, verb),
        "checks": [c.to_dict() for c in checks],
        "pass": all(c.passed for c in checks),
    }


def workers_from_env():
    raw = os.environ.get("CONFKG_THREADS", "1").strip() or "1"
    try:
        n = int(raw)
    except ValueError:
        raise click.UsageError(f"CONFKG_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise click.UsageError("CONFKG_THREADS must be >= 0")
    return n


# --------------------------------------------------------------------------
# jobs
# --------------------------------------------------------------------------

def _job_transform(scn, workers):
    p = scn.transform or {"H": 1.0, "m2": 1.0, "t_min": 0.0, "t_max": 1.0, "nt": 101}
    t = np.linspace(p["t_min"], p["t_max"], p["nt"])
    tt, num, closed = inv.transform_mass(p["H"], p["m2"], t)
    _write_csv(os.path.join(scn.out_dir, "transform.csv"), ("t", "mass2_numeric", "mass2_closed_form"),
               zip(tt, num, closed))
    return [inv.check_transform(p["H"], p["m2"], t), inv.check_exponential_composition()]


def _job_spectrum(scn, workers):
    check, sp = inv.check_unitarity(scn.profile, scn.m, scn.ks, scn.tol, xi=scn.xi, workers=workers)
    sp.to_csv(os.path.join(scn.out_dir, "spectrum.csv"))
    return [check]


def _job_pictures(scn, workers):
    curved, flat = inv.compare_pictures(scn.profile, scn.m, scn.ks, scn.tol, xi=scn.xi, workers=workers)
    diff = np.abs(curved.n - flat.n)
    _write_csv(os.path.join(scn.out_dir, "pictures.csv"), ("k", "n_curved", "n_flat", "abs_diff"),
               zip(curved.k, curved.n, flat.n, diff))
    return [
        inv.below("picture_agreement", diff.max(), 1e-10),
        inv.below("unitarity_curved", curved.max_unitarity_defect, 1e-8),
        inv.below("unitarity_flat", flat.max_unitarity_defect, 1e-8),
    ]


def _state(scn):
    if not scn.branches:
        raise ConfigError(scn.path, "superposition jobs need at least one [branch.<n>] section")
    try:
        return BranchState(tuple(scn.branches), "mass")
    except ValueError as exc:
        raise ConfigError(scn.path, str(exc), "branch.*") from exc


def _job_superposition(scn, workers):
    state = _state(scn)
    ks = [float(k) for k in scn.ks]
    checks, metric_frame, before, after = inv.superposition_report(state, ks, scn.tol)
    payload = {
        "state": state.to_dict(),
        "metric_frame": metric_frame.to_dict(),
        "expectations": [
            {"k": k, "n_mass_frame": a, "n_metric_frame": b}
            for (k, a), (_, b) in zip(before, after)
        ],
        "metadata": _metadata(scn, "superposition"),
    }
    _write_json(os.path.join(scn.out_dir, "superposition.json"), payload)
    return checks


def _job_verify(scn, workers):
    prof, m, ks, tol = scn.profile, scn.m, scn.ks, scn.tol
    checks = [inv.check_unitarity(prof, m, ks, tol, xi=scn.xi, workers=workers)[0]]
    if prof.kind == "tanh" and m > 0:
        checks.append(inv.check_analytic_oracle(prof, m, ks, tol, workers=workers))
    checks.append(inv.check_pictures(prof, m, ks, tol, xi=scn.xi, workers=workers))
    checks.append(inv.check_static_profile(prof.a_in, m, ks, tol, workers=workers))
    checks.append(inv.check_massless(prof, ks, tol, workers=workers))
    checks.append(inv.check_kg_convergence())
    checks.append(inv.check_exponential_composition())
    if prof.kind == "tanh":
        checks.append(inv.check_linearity(prof, m, ks, tol, xi=scn.xi))
    if scn.branches:
        checks.extend(inv.superposition_report(_state(scn), [float(k) for k in ks], tol)[0])
    return checks


JOBS = {
    "transform": _job_transform,
    "spectrum": _job_spectrum,
    "compare-pictures": _job_pictures,
    "superposition": _job_superposition,
    "verify-invariants": _job_verify,
}


def run(verb, scn, workers=1):
    """Run one job, write its artifacts and report; return the exit status."""
    os.makedirs(scn.out_dir, exist_ok=True)
    checks = JOBS[verb](scn, workers)
    report = _report(scn, verb, checks)
    _write_json(os.path.join(scn.out_dir, "report.json"), report)
    for c in checks:
        click.echo(f"{'PASS' if c.passed else 'FAIL'} {c.name}: defect={c.defect:.3e} tol={c.tolerance:.1e}")
    return 0 if report["pass"] else EXIT_FAIL


def _command(verb):
    @click.command(verb, help=f"Run the {verb} job for a scenario file.")
    @click.option("--config", "config", required=True, type=click.Path(dir_okay=False),
                  help="Scenario INI file.")
    @click.option("--out", "out", default=None, help="Output directory (overrides [output] dir).")
    @click.option("--tol", "tol", type=float, default=None, help="Integrator tolerance.")
    def cmd(config, out, tol):
        try:
            scn = load_scenario(config, out, tol)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        try:
            status = run(verb, scn, workers_from_env())
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except ConfKGError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)
        sys.exit(status)
    return cmd


@click.group(help="Conformal Klein-Gordon toolkit.")
@click.version_option(__version__, prog_name="confkg")
def main():
    pass


for _verb in VERBS:
    main.add_command(_command(_verb))

__all__ = ["main", "run", "load_scenario", "Scenario", "ConfigError", "CSV_HEADER"]
