"""Command-line driver: ``delaunay-s4 {solve,trace,reproduce,closed-form,geometry}``.

Exit codes
    0  success
    1  bad input (arguments, config file, point outside the domain)
    2  Newton failure or a seed that does not correct onto the curve
    3  the profile ran into the boundary of the half disk
    4  ``reproduce`` found a point outside its tolerance (report still written)

Floats in JSON output carry 17 significant digits and no timestamps are
written, so reruns with the same configuration give identical files.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import figures
from .closed_form import (
    ELLIPSE_LENGTH, KINDS, ExplicitSolutionKind, lemma_H, pwcmc_consistency, pwcmc_values,
    singular_generator_M, singular_generator_Mf,
)
from .continuation import (
    ContinuationConfig, detect_events, locate_by_H, tangent_at, trace, trace_branch,
)
from .errors import (
    CMCError, DomainError, IllConditioned, LeftDomain, NoConvergence, NotBracketed, SeedInvalid,
    SingularEncounter, StallAtDsMin,
)
from .geometry import assemble_M_components, equal_H_radius, extend_periodic, is_embedded, \
    sphere_cylinder_intersection
from .ode import IntegratorConfig, ModelParams
from .shooting import NewtonConfig, ShootingPoint, newton_correct, refine_fixed_H, shoot

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_SINGULAR, EXIT_REPRODUCE = 0, 1, 2, 3, 4

# reference closing points (a, H, T) for ell = m = 1
PRESETS = {
    "Z1": (0.577096, -0.707791, 2.30054),
    "Z2": (0.514328, -0.844304, 2.26274),
    "Z3": (0.433855, -0.947962, 2.22231),
    "Z4": (0.635046, -0.258674, 2.37217),
    "Z5": (0.707096, -0.0899734, 2.45894),
    "Z6": (0.73801, 0.0, 2.51519),
    "Z7": (0.745402, 0.0299556, 2.54038),
    "Z8": (0.743855, 0.0565645, 2.5915),
    "Z9": (0.720997, 0.0299491, 2.64565),
    "Z10": (0.703734, 0.000563715, 2.70305),
}
# which crossing of the branch with the preset's H is meant
OCCURRENCE = {"Z9": 2, "Z10": 2}
EXPECTED_EMBEDDED = {name: i < 4 for i, name in enumerate(PRESETS)}
# approximate singular limits at the two ends of the branch
Z0 = (0.57735, -0.707107, 2.30075)
ZF = (0.707107, 0.0, 2.70129)
REPRODUCE_TOL = 2e-3
FORMATS = ("json", "csv", "svg")


# ------------------------------------------------------------------ config


@dataclass
class RunConfig:
    ell: int = 1
    m: int = 1
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    continuation: ContinuationConfig = field(default_factory=ContinuationConfig)
    seed: object = "Z1"
    output_dir: str | None = None
    formats: tuple = FORMATS

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.ell, self.m)

    def seed_point(self) -> ShootingPoint:
        return resolve_seed(self.seed)

    def items(self) -> list:
        """Flat ``(key, value)`` pairs, the same keys a config file accepts."""
        out = [("ell", self.ell), ("m", self.m)]
        for name in ("integrator", "newton", "continuation"):
            obj = getattr(self, name)
            out += [(f"{name}.{f.name}", getattr(obj, f.name)) for f in dataclasses.fields(obj)]
        seed = self.seed
        if isinstance(seed, ShootingPoint):
            seed = f"{seed.a!r},{seed.H!r},{seed.T!r}"
        out += [("seed", seed), ("output_dir", self.output_dir or ""),
                ("formats", ",".join(self.formats))]
        return out


def resolve_seed(seed) -> ShootingPoint:
    if isinstance(seed, ShootingPoint):
        return seed
    key = str(seed).strip()
    if key.upper() in PRESETS:
        return ShootingPoint(*PRESETS[key.upper()])
    parts = key.split(",")
    if len(parts) == 3:
        try:
            return ShootingPoint(*(float(p) for p in parts))
        except ValueError:
            pass
    raise ValueError(f"unknown preset {seed!r} (expected Z1..Z10 or 'a,H,T')")


def _coerce(text: str, default):
    text = text.strip()
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(default, int):
        return int(float(text)) if float(text).is_integer() else int(text)
    return float(text)


def apply_settings(cfg: RunConfig, settings: dict) -> RunConfig:
    """Return a copy of ``cfg`` with flat ``key -> str`` settings applied."""
    groups = {"integrator": {}, "newton": {}, "continuation": {}}
    top = {}
    for key, raw in settings.items():
        if "." in key:
            group, name = key.split(".", 1)
            if group not in groups:
                raise ValueError(f"unknown config section {group!r}")
            obj = getattr(cfg, group)
            names = {f.name for f in dataclasses.fields(obj)}
            if name not in names:
                raise ValueError(f"unknown key {key!r}")
            groups[group][name] = _coerce(raw, getattr(obj, name))
        elif key in ("ell", "m"):
            top[key] = _coerce(raw, 1)
        elif key == "seed":
            top["seed"] = raw.strip()
        elif key == "output_dir":
            top["output_dir"] = raw.strip() or None
        elif key == "formats":
            top["formats"] = parse_formats(raw)
        else:
            raise ValueError(f"unknown key {key!r}")
    for group, vals in groups.items():
        if vals:
            top[group] = dataclasses.replace(getattr(cfg, group), **vals)
    return dataclasses.replace(cfg, **top)


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    text = Path(path).read_text()
    parser.read_string("[run]\n" + text)
    return dict(parser["run"])


def parse_formats(text: str) -> tuple:
    fmts = tuple(f.strip().lower() for f in text.split(",") if f.strip())
    bad = [f for f in fmts if f not in FORMATS]
    if bad:
        raise ValueError(f"unknown format(s) {bad}; choose from {FORMATS}")
    return fmts


# ------------------------------------------------------------------ output


def _json_value(v) -> str:
    if isinstance(v, (bool, np.bool_)) or v is None:
        return json.dumps(None if v is None else bool(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, ShootingPoint):
        return _json_value({"a": v.a, "H": v.H, "T": v.T})
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    if dataclasses.is_dataclass(v):
        return _json_value({f.name: getattr(v, f.name) for f in dataclasses.fields(v)})
    return json.dumps(str(v))


def dumps(obj) -> str:
    """JSON text with floats written to 17 significant digits."""
    return _json_value(obj)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(float(x), ".17g") if isinstance(x, (float, np.floating)) else x
                    for x in row])
    return buf.getvalue()


class Writer:
    """Writes artifacts into ``output_dir`` for the enabled formats."""

    def __init__(self, cfg: RunConfig):
        self.dir = Path(cfg.output_dir) if cfg.output_dir else None
        self.formats = cfg.formats
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, fmt: str, text: str):
        if self.dir is None or fmt not in self.formats:
            return None
        path = self.dir / name
        path.write_text(text)
        return path


def profile_csv(table) -> str:
    return _csv_text(("t", "f1", "f2", "theta", "f3"), table)


def point_record(Z: ShootingPoint, report, embedded: bool, **extra) -> dict:
    rec = {"a": Z.a, "H": Z.H, "T": Z.T, "r_f1": report.r_f1, "r_theta": report.r_theta,
           "min_f2": report.min_f2, "min_f3": report.min_f3, "embedded": embedded}
    rec.update(extra)
    return rec


def branch_records(branch) -> list:
    return [{"index": i, "s": p.s, "a": p.Z.a, "H": p.Z.H, "T": p.Z.T,
             "r_f1": p.residual[0], "r_theta": p.residual[1], "tangent": list(p.tangent),
             "min_f2": p.min_f2, "min_f3": p.min_f3, "embedded": p.embedded}
            for i, p in enumerate(branch.points)]


def event_records(events) -> list:
    return [{"kind": e.kind, "s": e.s_at, "a": e.Z_at.a, "H": e.Z_at.H, "T": e.Z_at.T,
             "info": e.info} for e in events]


def closed_form_block() -> dict:
    v = pwcmc_values(1)
    r = equal_H_radius()
    return {"radius_squared": r * r, "abs_H_equal_radius": math.sqrt(1 - r * r) / r,
            "pwcmc": {"H": v.H, "r1": v.r1, "r2": v.r2}, "Mf_period": ELLIPSE_LENGTH}


# ---------------------------------------------------------------- commands


def cmd_solve(cfg: RunConfig, free_H: bool = False, out=None) -> int:
    """Correct a single point onto the closing set and report it."""
    out = out or sys.stdout
    params = cfg.params
    guess = cfg.seed_point()
    if free_H:
        tan = tangent_at(params, guess, None, cfg.newton, cfg.integrator)
        Z, info = newton_correct(params, guess, tan, guess, cfg.newton, cfg.integrator,
                                 full_output=True)
    else:
        Z, info = refine_fixed_H(params, guess.H, guess.a, guess.T, cfg.newton, cfg.integrator,
                                 full_output=True)
    prof = extend_periodic(info.report.trajectory, source=Z)
    emb = is_embedded(prof)
    rec = point_record(Z, info.report, emb.embedded, iterations=info.iterations,
                       closure_error=prof.closure_error)
    text = dumps(rec)
    out.write(text + "\n")
    w = Writer(cfg)
    w.write("solve.json", "json", text + "\n")
    w.write("profile.csv", "csv", profile_csv(prof.table()))
    w.write("profile.svg", "svg", figures.profile_figure(prof.table(), _label(Z)))
    return EXIT_OK


def _label(Z: ShootingPoint) -> str:
    return f"a={Z.a:.6f}  H={Z.H:.6f}  T={Z.T:.5f}"


def run_trace(cfg: RunConfig, direction: str = "both"):
    params = cfg.params
    seed = cfg.seed_point()
    if direction == "both":
        branch = trace_branch(params, seed, cfg.continuation, cfg.newton, cfg.integrator)
    else:
        sign = 1 if direction == "up" else -1
        branch = trace(params, seed, sign, cfg.continuation, cfg.newton, cfg.integrator)
    events = detect_events(params, branch)
    return branch, events


def write_branch(cfg: RunConfig, branch, events, w: Writer):
    lines = "".join(dumps(r) + "\n" for r in branch_records(branch))
    w.write("branch.jsonl", "json", lines)
    w.write("events.json", "json", dumps(event_records(events)) + "\n")
    arr = branch.array()
    w.write("branch_3d.csv", "csv", _csv_text(("s", "a", "H", "T"), arr))
    marks = [(e.Z_at.a, e.Z_at.H) for e in events]
    w.write("branch_aH.svg", "svg", figures.branch_figure(arr[:, 1], arr[:, 2], marks))
    return lines


def cmd_trace(cfg: RunConfig, direction: str = "both", out=None) -> int:
    """Trace the branch through the seed and write branch artifacts."""
    out = out or sys.stdout
    branch, events = run_trace(cfg, direction)
    write_branch(cfg, branch, events, Writer(cfg))
    summary = {"points": len(branch), "termination": branch.termination,
               "start": branch[0].Z, "end": branch[-1].Z,
               "events": [{"kind": e.kind, "s": e.s_at, "Z": e.Z_at} for e in events]}
    out.write(dumps(summary) + "\n")
    return EXIT_OK


def locate_presets(branch) -> list:
    """Locate every preset on ``branch`` by its H value; one row per preset."""
    rows = []
    for name, (a, H, T) in PRESETS.items():
        row = {"name": name, "a_ref": a, "H": H, "T_ref": T}
        try:
            Z = locate_by_H(branch, H, OCCURRENCE.get(name, 1))
            rep = shoot(branch.params, Z, branch.integrator)
            emb = is_embedded(extend_periodic(rep.trajectory, source=Z)).embedded
            row.update(a=Z.a, T=Z.T, H_found=Z.H, da=abs(Z.a - a), dT=abs(Z.T - T), embedded=emb)
            row["ok"] = (row["da"] < REPRODUCE_TOL and row["dT"] < REPRODUCE_TOL
                         and emb == EXPECTED_EMBEDDED[name])
            row["table"] = rep.trajectory
        except (NotBracketed, NoConvergence, LeftDomain, SingularEncounter, IllConditioned) as exc:
            row.update(a=math.nan, T=math.nan, H_found=math.nan, da=math.nan, dT=math.nan,
                       embedded=None, ok=False, error=str(exc))
        row["embedded_expected"] = EXPECTED_EMBEDDED[name]
        rows.append(row)
    return rows


def cmd_reproduce(cfg: RunConfig, out=None) -> int:
    """Trace from Z1, locate Z1..Z10 and compare with the preset values."""
    out = out or sys.stdout
    cfg = dataclasses.replace(cfg, seed="Z1")
    branch, events = run_trace(cfg)
    w = Writer(cfg)
    write_branch(cfg, branch, events, w)
    rows = locate_presets(branch)
    cols = ("name", "H", "a_ref", "a", "da", "T_ref", "T", "dT", "embedded",
            "embedded_expected", "ok")
    for row in rows:
        traj = row.pop("table", None)
        if traj is not None:
            prof = extend_periodic(traj)
            w.write(f"{row['name']}.svg", "svg", figures.profile_figure(prof.table(), row["name"]))
            w.write(f"{row['name']}_profile.csv", "csv", profile_csv(prof.table()))
    H = branch.array()[:, 2]
    hmin = [e for e in events if e.kind == "HMin"]
    hmax = [e for e in events if e.kind == "HMax"]
    report = {
        "rows": [{k: r.get(k) for k in cols + ("error",) if k in r} for r in rows],
        "H_min": min([e.Z_at.H for e in hmin] + [float(H.min())]),
        "H_max": max([e.Z_at.H for e in hmax] + [float(H.max())]),
        "start": branch[0].Z, "end": branch[-1].Z,
        "closed_form": closed_form_block(),
    }
    w.write("reproduce.json", "json", dumps(report) + "\n")
    w.write("reproduce.csv", "csv", _csv_text(cols, [[r.get(k) for k in cols] for r in rows]))
    out.write(_table_text(rows, cols))
    out.write(dumps({k: v for k, v in report.items() if k != "rows"}) + "\n")
    return EXIT_OK if all(r["ok"] for r in rows) else EXIT_REPRODUCE


def _table_text(rows, cols) -> str:
    def cell(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v)
    lines = ["  ".join(f"{c:>12}" for c in cols)]
    for r in rows:
        lines.append("  ".join(f"{cell(r.get(c)):>12}" for c in cols))
    return "\n".join(lines) + "\n"


def cmd_closed_form(cfg: RunConfig, out=None) -> int:
    """Explicit-solution mean curvatures, generator constants and curves."""
    out = out or sys.stdout
    ell, m = cfg.ell, cfg.m
    if ell < 1 or m < 1:
        raise DomainError("ell and m must be >= 1")
    grid = [round(0.1 * k, 10) for k in range(1, 10)]
    lemma = {tag: [{"radius": r, "abs_H": lemma_H(ExplicitSolutionKind(tag, r), ell, m)}
                   for r in grid] for tag in KINDS}
    cons = pwcmc_consistency(ell, m)
    rec = {"ell": ell, "m": m, "n": ell + m + 1, "feasible": cons["feasible"],
           "obstruction_residual": cons["residual"], "lemma_abs_H": lemma}
    w = Writer(cfg)
    if cons["feasible"]:
        v = pwcmc_values(ell)
        rec.update(H=v.H, r1=v.r1, r2=v.r2)
        gen = singular_generator_M(ell)
        rec["generator_M"] = {"breakpoints": list(gen.breakpoints), "period": gen.period}
        w.write("generator_M.csv", "csv", profile_csv(gen.table(200)))
        w.write("generator_M.svg", "svg", figures.profile_figure(gen.table(200), "generator M"))
    if ell == 1 and m == 1:
        gen = singular_generator_Mf()
        rec["generator_Mf"] = {"breakpoints": list(gen.breakpoints), "period": gen.period}
        w.write("generator_Mf.csv", "csv", profile_csv(gen.table(200)))
        w.write("generator_Mf.svg", "svg", figures.profile_figure(gen.table(200), "generator Mf"))
    text = dumps(rec)
    w.write("closed_form.json", "json", text + "\n")
    out.write(text + "\n")
    return EXIT_OK


def cmd_geometry(cfg: RunConfig, r1=None, r2=None, out=None) -> int:
    """Pieces of the piecewise hypersurface and a sphere/cylinder intersection."""
    out = out or sys.stdout
    asm = assemble_M_components()
    r = asm["radius"]
    r1 = r if r1 is None else r1
    r2 = r if r2 is None else r2
    inter = sphere_cylinder_intersection(r1, r2)
    rec = {
        "radius": r, "radius_squared": r * r, "H": asm["H"],
        "components": [{"kind": c.kind, "constants": c.constants, "H": c.H}
                       for c in asm["components"]],
        "circles": [{"kind": c.kind, "constants": c.constants} for c in asm["circles"]],
        "checks": asm["checks"],
        "intersection": {"r1": r1, "r2": r2, "case": inter.case, "radii": list(inter.radii)},
    }
    text = dumps(rec)
    Writer(cfg).write("geometry.json", "json", text + "\n")
    out.write(text + "\n")
    return EXIT_OK


# ------------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--ell", type=int, help="dimension of the first sphere factor")
    common.add_argument("--m", type=int, help="dimension of the second sphere factor")
    common.add_argument("--preset", help="seed from a named preset (Z1..Z10)")
    common.add_argument("-a", type=float, help="initial height f2(0)")
    common.add_argument("-H", type=float, help="mean curvature")
    common.add_argument("-T", type=float, help="half period")
    common.add_argument("--tol", type=float, help="integrator abs and rel tolerance")
    common.add_argument("--ds", type=float, help="initial continuation step")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", help="comma list from json,csv,svg")
    common.add_argument("--show-config", action="store_true",
                        help="print the resolved configuration and exit")

    p = _Parser(prog="delaunay-s4", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("solve", parents=[common], help="correct one point")
    s.add_argument("--free-H", action="store_true",
                   help="let H move (Newton orthogonal to the branch) instead of fixing it")
    t = sub.add_parser("trace", parents=[common], help="trace the branch through the seed")
    t.add_argument("--direction", choices=("both", "up", "down"), default="both",
                   help="up/down follow increasing/decreasing H from the seed")
    sub.add_parser("reproduce", parents=[common], help="locate Z1..Z10 on the traced branch")
    sub.add_parser("closed-form", parents=[common], help="closed-form constants and generators")
    g = sub.add_parser("geometry", parents=[common], help="pieces of the generator M")
    g.add_argument("--r1", type=float, help="umbilical sphere radius")
    g.add_argument("--r2", type=float, help="Clifford factor radius")
    return p


def config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = apply_settings(cfg, read_config_file(args.config))
    over = {}
    if args.ell is not None:
        over["ell"] = str(args.ell)
    if args.m is not None:
        over["m"] = str(args.m)
    if args.tol is not None:
        over["integrator.abs_tol"] = over["integrator.rel_tol"] = repr(args.tol)
    if args.ds is not None:
        over["continuation.ds_init"] = repr(args.ds)
        cc = cfg.continuation
        over["continuation.ds_min"] = repr(min(cc.ds_min, args.ds))
        over["continuation.ds_max"] = repr(max(cc.ds_max, args.ds))
    if args.out is not None:
        over["output_dir"] = args.out
    if args.format is not None:
        over["formats"] = args.format
    cfg = apply_settings(cfg, over)
    manual = [args.a, args.H, args.T]
    if args.preset is not None:
        if any(v is not None for v in manual):
            raise ValueError("--preset cannot be combined with -a/-H/-T")
        resolve_seed(args.preset)
        cfg = dataclasses.replace(cfg, seed=args.preset.upper())
    elif any(v is not None for v in manual):
        if any(v is None for v in manual):
            raise ValueError("-a, -H and -T must be given together")
        cfg = dataclasses.replace(cfg, seed=ShootingPoint(*manual))
    cfg.seed_point()  # fail early on a bad seed
    ModelParams(cfg.ell, cfg.m)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ValueError, OSError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.show_config:
        for key, val in cfg.items():
            print(f"{key} = {val}")
        return EXIT_OK
    try:
        if args.command == "solve":
            return cmd_solve(cfg, args.free_H)
        if args.command == "trace":
            return cmd_trace(cfg, args.direction)
        if args.command == "reproduce":
            return cmd_reproduce(cfg)
        if args.command == "closed-form":
            return cmd_closed_form(cfg)
        return cmd_geometry(cfg, args.r1, args.r2)
    except SingularEncounter as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (NoConvergence, SeedInvalid, LeftDomain, IllConditioned, StallAtDsMin) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CMCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
