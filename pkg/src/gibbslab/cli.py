"""Command-line experiment runner.

``gibbslab COMMAND --config PATH [--out DIR]`` builds a subject from a JSON
config, runs one family of checks and writes ``report.json``,
``defects.csv`` and ``violations.csv`` into the output directory.  See the
README for the config schema.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import re
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .criteria import (DEFAULT_THRESHOLDS, check_radii, gibbs_verdict, inner_ball,
                       sullivan_envelope, window_centre)
from .distribution import parse_probability, to_exact
from .errors import DomainError, GibbsLabError
from .fields import (FieldTable, MixtureField, ProductMeasure, TransferChain, fcycle2_suite,
                     fcycle_suite, reconstruct_field)
from .lattice import Configuration, Volume, as_site
from .potential import BUILTINS, build_potential, moebius_extract
from .specification import (GibbsSpecification, ReconstructedSpecification,
                            onepoint_cycle_suite, quasilocality_modulus,
                            spec_consistency_suite)

COMMANDS = ("validate", "diagnose", "reconstruct", "extract", "scan")
SUBJECT_KINDS = ("potential", "field_table", "mixture", "transfer_chain", "product")
EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_EXPECTATION = 0, 1, 2, 3
DEFECT_COLUMNS = ["site", "symbol", "radius", "condition", "defect"]
VIOLATION_COLUMNS = ["check", "scope", "defect", "tolerance", "status"]


class ConfigError(Exception):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")


# config ---------------------------------------------------------------------

class Config:
    """Parsed and validated experiment config."""

    def __init__(self, path: str, numeric: str | None = None, budget: float | None = None):
        self.path = path
        try:
            self.raw = Path(path).read_bytes()
        except OSError as exc:
            raise ConfigError(path, 0, f"cannot read config: {exc.strerror}")
        self.text = self.raw.decode("utf-8", errors="replace")
        self.sha256 = hashlib.sha256(self.raw).hexdigest()
        try:
            self.doc = json.loads(self.text)
        except json.JSONDecodeError as exc:
            raise ConfigError(path, exc.lineno, f"invalid JSON: {exc.msg}")
        if not isinstance(self.doc, dict):
            raise ConfigError(path, 1, "the config must be a JSON object")
        self.numeric = numeric or self.get("numeric", "float")
        if self.numeric not in ("float", "rational"):
            self.fail("numeric", "must be 'float' or 'rational'")
        self.exact = self.numeric == "rational"
        self.budget = budget if budget is not None else self.get("budget")
        self.tolerance = float(self.get("tolerance", 1e-10))
        self.window = self._window()
        self.site = self._site()
        radii = self.get("radii", [1, 2])
        try:
            self.radii = check_radii(radii)
        except (DomainError, TypeError, ValueError) as exc:
            self.fail("radii", str(exc))
        self.thresholds = dict(DEFAULT_THRESHOLDS)
        th = self.get("thresholds", {})
        unknown = set(th) - set(DEFAULT_THRESHOLDS)
        if unknown:
            self.fail("thresholds", f"unknown threshold(s) {sorted(unknown)}")
        self.thresholds.update({k: float(v) for k, v in th.items()})
        self.max_volume = int(self.get("max_volume", 2))
        self.truncation_radius = self.get("truncation_radius")
        self.subject_doc = self.get("subject")
        if not isinstance(self.subject_doc, dict):
            self.fail("subject", "missing or not an object")
        if self.subject_doc.get("kind") not in SUBJECT_KINDS:
            self.fail("kind", f"subject kind must be one of {list(SUBJECT_KINDS)}")

    def get(self, key, default=None):
        return self.doc.get(key, default)

    def line_of(self, key: str) -> int:
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return self.text.count("\n", 0, m.start()) + 1 if m else 1

    def fail(self, key: str, message: str):
        raise ConfigError(self.path, self.line_of(key), f"field '{key}': {message}")

    def _window(self) -> Volume:
        w = self.get("window")
        if not isinstance(w, dict) or "extents" not in w:
            self.fail("window", "needs an 'extents' list")
        try:
            extents = [int(e) for e in w["extents"]]
            if not extents or any(e < 1 for e in extents):
                raise ValueError("extents must be positive")
            return Volume.box(extents, w.get("origin"))
        except (TypeError, ValueError, DomainError) as exc:
            self.fail("window", str(exc))

    def _site(self):
        s = self.get("site")
        if s is None:
            try:
                return window_centre(self.window)
            except DomainError as exc:
                self.fail("window", str(exc))
        s = as_site(s)
        if s not in self.window:
            self.fail("site", f"{list(s)} is outside the window")
        return s


def _number(value, exact: bool):
    return parse_probability(value) if exact else float(parse_probability(value))


def build_potential_from(cfg: Config, doc: dict):
    name = doc.get("name")
    if name not in BUILTINS:
        cfg.fail("name", f"unknown potential {name!r}; choose from {sorted(BUILTINS)}")
    params = dict(doc.get("params", {}))
    if name == "ising_weights":
        for key in ("pair_weight", "field_weight"):
            if key in params and params[key] is not None:
                params[key] = Fraction(params[key])
    if name not in ("zero", "exponential_pair"):
        params.setdefault("dimension", len(cfg.window.sites[0]))
    try:
        pot = build_potential(name, **params)
    except (TypeError, DomainError) as exc:
        cfg.fail("params", str(exc))
    if pot.dimension != len(cfg.window.sites[0]):
        cfg.fail("window", "window dimension differs from the potential's")
    if cfg.exact and not pot.exact:
        cfg.fail("numeric", f"potential {name!r} has no rational Boltzmann weights; "
                            "use 'ising_weights' or 'zero'")
    return pot


def build_subject(cfg: Config):
    """Returns ``(kind, subject)``; potentials come back as potentials."""
    doc = cfg.subject_doc
    kind = doc["kind"]
    W, exact = cfg.window, cfg.exact
    try:
        if kind == "potential":
            return kind, build_potential_from(cfg, doc)
        if kind == "field_table":
            if "path" not in doc:
                cfg.fail("path", "field_table subjects need a 'path'")
            fpath = Path(cfg.path).parent / doc["path"]
            if not fpath.exists():
                cfg.fail("path", f"file {doc['path']!r} does not exist")
            ft = FieldTable.load(fpath)
            if ft.window != W:
                cfg.fail("window", "the window differs from the field table's window")
            if exact and not ft.exact:
                ft = FieldTable(W, to_exact(ft.table.probs), ft.alphabet_size)
            return kind, ft
        if kind == "product":
            return kind, ProductMeasure([_number(v, exact) for v in doc["p"]], W, exact)
        if kind == "mixture":
            comps = []
            for c in doc.get("components", []):
                p = [_number(v, exact) for v in c["p"]]
                comps.append((_number(c["weight"], exact), ProductMeasure(p, W, exact)))
            return kind, MixtureField(comps, W)
        if kind == "transfer_chain":
            if exact:
                cfg.fail("numeric", "transfer chains are float-only")
            pot = build_potential_from(cfg, doc.get("potential", {}))
            return kind, TransferChain(pot, W)
    except KeyError as exc:
        cfg.fail(exc.args[0], "missing")
    except (DomainError, GibbsLabError, ValueError, ZeroDivisionError) as exc:
        cfg.fail("subject", str(exc))


def as_field(cfg: Config, kind: str, subject):
    """A field on the window for every subject kind."""
    if kind == "potential":
        return FieldTable.from_potential(subject, cfg.window, exact=cfg.exact)
    return subject


def as_table(cfg: Config, field) -> FieldTable:
    if isinstance(field, FieldTable):
        return field
    return FieldTable(cfg.window, field.cylinder(cfg.window).reshape(-1), field.alphabet_size)


def specification_of(cfg: Config, kind: str, subject):
    if kind == "potential":
        return GibbsSpecification(subject, cfg.window, cfg.truncation_radius, cfg.exact,
                                  cfg.budget)
    return as_field(cfg, kind, subject).specification()


def _volumes(cfg: Config):
    vols = cfg.get("volumes")
    if vols is None:
        out = []
        for r in range(1, cfg.max_volume + 1):
            out.extend(v for v in cfg.window.subsets(nonempty=True) if len(v) == r)
        return out
    try:
        out = [Volume(as_site(s) for s in v) for v in vols]
    except (TypeError, ValueError, DomainError) as exc:
        cfg.fail("volumes", str(exc))
    for v in out:
        if not len(v) or not v.issubset(cfg.window):
            cfg.fail("volumes", f"{[list(s) for s in v]} is empty or leaves the window")
    return out


# commands -------------------------------------------------------------------

def _num(v):
    return str(v) if isinstance(v, Fraction) else float(v)


class Run:
    def __init__(self, cfg: Config, threads: int):
        self.cfg = cfg
        self.threads = threads
        self.violations: list[list] = []
        self.defects: list[list] = []
        self.results: dict = {}

    def check(self, name: str, scope: str, defect, tol: float | None = None):
        tol = self.cfg.tolerance if tol is None else tol
        ok = defect <= tol
        self.violations.append([name, scope, "%.17g" % float(defect), "%.17g" % tol,
                                "ok" if ok else "fail"])
        self.results.setdefault("checks", {})[f"{name}:{scope}"] = _num(defect)
        return ok

    def failed(self) -> bool:
        return any(row[-1] == "fail" for row in self.violations)


def cmd_validate(run: Run, kind, subject):
    cfg = run.cfg
    Q = specification_of(cfg, kind, subject)
    run.check("spec_consistency", "volumes", spec_consistency_suite(Q, _volumes(cfg)))
    run.check("onepoint_cycle", "site_pairs", onepoint_cycle_suite(Q.onepoint()))
    q = as_field(cfg, kind, subject).onepoint()
    run.check("finite_cycle", "site_pairs", fcycle_suite(q, max_support=cfg.get("max_support")))
    run.check("finite_cycle_single", "site_pairs", fcycle2_suite(q))
    run.results["max_violation"] = max(float(r[2]) for r in run.violations)


def cmd_diagnose(run: Run, kind, subject):
    cfg = run.cfg
    field = as_field(cfg, kind, subject)
    rep = gibbs_verdict(field, cfg.radii, cfg.thresholds, cfg.site, cfg.budget, run.threads)
    run.results["verdict"] = rep.to_json()
    for row in csv.reader(io.StringIO(rep.to_csv())):
        if row and row[0] != "site":
            run.defects.append(row)
    return rep


def cmd_reconstruct(run: Run, kind, subject):
    cfg = run.cfg
    Q = specification_of(cfg, kind, subject)
    R = ReconstructedSpecification(Q.onepoint())
    worst = Fraction(0) if cfg.exact else 0.0
    for v in _volumes(cfg):
        d = np.abs(np.asarray(R.window_tensor(v)) - np.asarray(Q.window_tensor(v))).max()
        worst = max(worst, d if cfg.exact else float(d))
    run.check("spec_from_onepoint", "volumes", worst)
    table = as_table(cfg, as_field(cfg, kind, subject))
    rec = reconstruct_field(table.onepoint(), cfg.window)
    run.check("field_from_kernel", "total_variation", rec.table.total_variation(table.table))


def cmd_extract(run: Run, kind, subject):
    cfg = run.cfg
    table = as_table(cfg, as_field(cfg, kind, subject))
    pot = moebius_extract(table.table)
    run.results["potential"] = {"alphabet_size": pot.alphabet_size,
                                "terms": [{"support": t["support"],
                                           "values": np.asarray(t["values"], dtype=float).tolist()}
                                          for t in pot.to_json()]}
    rebuilt = GibbsSpecification(pot, cfg.window).onepoint()
    direct = table.specification().onepoint()
    worst = 0.0
    for t in cfg.window:
        d = np.abs(rebuilt.window_tensor(t) - np.asarray(direct.window_tensor(t), dtype=float))
        worst = max(worst, float(d.max()))
    # extraction goes through logarithms, so rational runs get a float floor
    run.check("gibbs_of_extracted", "onepoint", worst, max(cfg.tolerance, 1e-10))


def cmd_scan(run: Run, kind, subject):
    cfg = run.cfg
    t, k = cfg.site, None
    if kind == "potential":
        q = GibbsSpecification(subject, cfg.window, cfg.truncation_radius, False,
                               cfg.budget).onepoint()
    else:
        q = as_field(cfg, kind, subject).onepoint()
    k = q.alphabet_size
    rows = []
    for R in cfg.radii:
        inner_ball(cfg.window, t, R)
    for x in range(k):
        mods = quasilocality_modulus(q, t, x, cfg.radii, cfg.budget)
        for R, m in zip(cfg.radii, mods):
            entry = {"symbol": x, "radius": R, "modulus": m}
            if kind == "potential":
                tau = subject.tail(t, R)
                entry["tail"] = tau
                entry["bound"] = math.expm1(2 * tau)
            lam = inner_ball(cfg.window, t, R)
            entry["envelopes"] = {
                str(a): list(sullivan_envelope(q, t, x, lam, Configuration.constant(lam, a),
                                               cfg.budget)) for a in range(k)}
            rows.append(entry)
            run.defects.append([" ".join(map(str, t)), x, R, "modulus", "%.17g" % m])
            if "bound" in entry:
                run.check("modulus_bound", f"x={x},R={R}", m - entry["bound"], 0.0)
    run.results["scan"] = rows


HANDLERS = {"validate": cmd_validate, "diagnose": cmd_diagnose, "reconstruct": cmd_reconstruct,
            "extract": cmd_extract, "scan": cmd_scan}


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gibbslab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gibbslab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--numeric", choices=("float", "rational"), default=None)
        sp.add_argument("--expect", choices=("gibbs", "non-gibbs"), default=None)
        sp.add_argument("--budget", type=float, default=None,
                        help="enumeration guard in bits")
    return p


ExperimentConfig = Config


def run(config_path, command: str = "validate", out="out", threads: int = 1,
        numeric: str | None = None, expect: str | None = None,
        budget: float | None = None) -> int:
    """Programmatic entry point; returns the process exit status."""
    argv = [command, "--config", str(config_path), "--out", str(out), "--threads", str(threads)]
    if numeric:
        argv += ["--numeric", numeric]
    if expect:
        argv += ["--expect", expect]
    if budget is not None:
        argv += ["--budget", str(budget)]
    return main(argv)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = Config(args.config, args.numeric, args.budget)
        kind, subject = build_subject(cfg)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    run = Run(cfg, max(1, args.threads))
    try:
        rep = HANDLERS[args.command](run, kind, subject)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except GibbsLabError as exc:
        print(f"{cfg.path}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "command": args.command, "version": __version__, "config_sha256": cfg.sha256,
        "numeric": cfg.numeric, "subject": cfg.subject_doc,
        "window": [list(s) for s in cfg.window], "site": list(cfg.site),
        "tolerance": cfg.tolerance, "results": run.results,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_csv(out / "defects.csv", DEFECT_COLUMNS, run.defects)
    _write_csv(out / "violations.csv", VIOLATION_COLUMNS, run.violations)
    if run.failed():
        print(f"violations above tolerance; see {out / 'violations.csv'}", file=sys.stderr)
        return EXIT_VIOLATION
    if args.command == "diagnose":
        print(f"verdict: {rep.verdict}")
        if args.expect == "gibbs" and rep.verdict == "non-gibbs-flagged":
            return EXIT_EXPECTATION
        if args.expect == "non-gibbs" and rep.verdict == "gibbs-consistent":
            return EXIT_EXPECTATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
