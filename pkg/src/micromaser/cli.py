"""Command-line sweeps: ``micromaser run <config> [--recipe figN] [--set key=value ...]``.

A config is an INI file::

    [sweep]
    axis = nex          ; or gtint
    min = 0.01
    max = 100
    steps = 50
    scale = log         ; or linear

    [physics]
    gt_int = pi/sqrt(2) ; numbers or simple expressions in pi, sqrt
    nbar = 0
    p = 0
    eta_e = 1
    eta_g = 1

    [windows]
    N = inf             ; comma separated; inf is the asymptotic window
    t = inf

    [run]
    methods = direct
    name = sweep
    seed = 0
    n_traj = 10000
    burn_in = 20

Time is measured in cavity lifetimes (kappa is fixed to 1/2).  The run writes
``<name>.csv`` and a gnuplot script ``<name>.gp`` to the output directory.
"""

import argparse
import ast
import configparser
import csv
import difflib
import io
import math
import operator
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import MicromaserError, TruncationWarning
from .stats import Window, closed_form_report, is_solvable, q_direct, q_spectral
from .superop import PumpConfig

HEADER = ["nex_or_gtint", "Q_e", "Q_g", "Qt_e", "Qt_g", "Q_f", "mean_Ne", "mean_Ng",
          "method", "window", "status"]
METHODS = ("direct", "spectral", "closed_form", "monte_carlo")

SCHEMA = {
    "sweep": {"axis": "nex", "min": None, "max": None, "steps": "50", "scale": "linear"},
    "physics": {"gt_int": None, "nex": None, "nbar": "0", "p": "0", "eta_e": "1", "eta_g": "1"},
    "windows": {"N": "inf", "t": "inf"},
    "run": {"methods": "direct", "name": "sweep", "seed": "0", "n_traj": "10000",
            "burn_in": "20"},
}

_R = "[run]\nname = {name}\n"
RECIPES = {
    "fig1": "[sweep]\naxis=nex\nmin=0.01\nmax=100\nsteps=50\nscale=log\n"
            "[physics]\ngt_int=pi/sqrt(2)\nnbar=0\np=0\n",
    "fig2": "[sweep]\naxis=nex\nmin=0.01\nmax=100\nsteps=50\nscale=log\n"
            "[physics]\ngt_int=pi/sqrt(2)\nnbar=0.1\np=0\n",
    "fig3": "[sweep]\naxis=nex\nmin=0.01\nmax=100\nsteps=50\nscale=log\n"
            "[physics]\ngt_int=pi/sqrt(2)\nnbar=0\np=0.5\n",
    "fig4": "[sweep]\naxis=nex\nmin=0.5\nmax=100\nsteps=200\n"
            "[physics]\ngt_int=1.54\nnbar=0.145\np=0\n",
    "fig5": "[sweep]\naxis=nex\nmin=0.5\nmax=100\nsteps=200\n"
            "[physics]\ngt_int=1.54\nnbar=0\np=0\n",
    "fig6": "[sweep]\naxis=gtint\nmin=0.05\nmax=10\nsteps=200\n"
            "[physics]\nnex=1\nnbar=0.1\np=0\n",
    "fig7": "[sweep]\naxis=gtint\nmin=0.05\nmax=10\nsteps=200\n"
            "[physics]\nnex=5\nnbar=0.1\np=0\n",
    "fig8": "[sweep]\naxis=gtint\nmin=0.05\nmax=40\nsteps=400\n"
            "[physics]\nnex=30\nnbar=0.1\np=0\n",
    "fig9": "[sweep]\naxis=gtint\nmin=0.05\nmax=10\nsteps=200\n"
            "[physics]\nnex=5\nnbar=0\np=0\n",
    "fig10": "[sweep]\naxis=nex\nmin=0.01\nmax=100\nsteps=50\nscale=log\n"
             "[physics]\ngt_int=pi/2\nnbar=0\np=0\n",
    "fig11": "[sweep]\naxis=nex\nmin=0.01\nmax=100\nsteps=50\nscale=log\n"
             "[physics]\ngt_int=pi/2\nnbar=0.1\np=0\n",
    "fig12": "[sweep]\naxis=nex\nmin=0.01\nmax=100\nsteps=50\nscale=log\n"
             "[physics]\ngt_int=pi/sqrt(19)\nnbar=0\np=0\n",
    "fig13": "[sweep]\naxis=nex\nmin=0.01\nmax=100\nsteps=50\nscale=log\n"
             "[physics]\ngt_int=pi/sqrt(19)\nnbar=0.1\np=0\n",
    "fig14": "[sweep]\naxis=nex\nmin=0.5\nmax=100\nsteps=100\n"
             "[physics]\ngt_int=1.54\nnbar=0.1\np=0\n"
             "[windows]\nN=\nt=1,5,10,100,1000,inf\n",
    "fig15": "[sweep]\naxis=nex\nmin=0.5\nmax=100\nsteps=100\n"
             "[physics]\ngt_int=1.54\nnbar=0.1\np=0\n"
             "[windows]\nN=20,50,100,500,1000,inf\nt=\n",
}
RECIPES = {k: v + _R.format(name=k) for k, v in RECIPES.items()}


class ConfigError(ValueError):
    pass


_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg,
        ast.UAdd: operator.pos}
_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf}
_FUNCS = {"sqrt": math.sqrt}


def parse_number(text: str, key: str = "value") -> float:
    """Parse a float or a small arithmetic expression such as ``pi/sqrt(2)``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"{key}: cannot read {text!r} as a number")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError:
        raise ConfigError(f"{key}: cannot read {text!r} as a number") from None


def _suggest(word, options):
    close = difflib.get_close_matches(word, list(options), n=1, cutoff=0.0)
    return f"; did you mean {close[0]!r}?" if close else ""


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    points: tuple
    base: dict
    n_windows: tuple
    t_windows: tuple
    methods: tuple
    name: str
    seed: int
    n_traj: int
    burn_in: float
    scale: str

    def config_at(self, x) -> PumpConfig:
        kw = dict(self.base)
        kw["nex" if self.axis == "nex" else "gt_int"] = float(x)
        return PumpConfig(**kw)


def _read_raw(texts):
    raw = {s: {} for s in SCHEMA}
    for text in texts:
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        for section in cp.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]{_suggest(section, SCHEMA)}")
            for key, value in cp.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(
                        f"unknown key {key!r} in [{section}]{_suggest(key, SCHEMA[section])}")
                raw[section][key] = value
    return raw


def _apply_overrides(raw, overrides):
    owners = {}
    for section, keys in SCHEMA.items():
        for key in keys:
            owners.setdefault(key, []).append(section)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if "." in key:
            section, key = key.split(".", 1)
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]{_suggest(section, SCHEMA)}")
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]{_suggest(key, SCHEMA[section])}")
        else:
            if key not in owners:
                raise ConfigError(f"unknown key {key!r}{_suggest(key, owners)}")
            if len(owners[key]) > 1:
                raise ConfigError(f"key {key!r} is ambiguous; write section.{key}")
            section = owners[key][0]
        raw[section][key] = value


def _windows(text, kind, key):
    out = []
    for part in (text or "").split(","):
        if part.strip():
            size = parse_number(part, key)
            try:
                out.append(Window(kind, size))
            except MicromaserError as exc:
                raise ConfigError(f"{key}: {exc}") from None
    return tuple(out)


def build_spec(texts=(), overrides=()) -> SweepSpec:
    """Merge config texts (later ones win) and ``key=value`` overrides, then validate."""
    raw = _read_raw(texts)
    _apply_overrides(raw, overrides)
    val = {s: {**{k: v for k, v in SCHEMA[s].items() if v is not None}, **raw[s]} for s in SCHEMA}
    sw, ph, wn, rn = val["sweep"], val["physics"], val["windows"], val["run"]
    # an empty physics value unsets it, so a recipe's fixed parameter can become the axis
    ph = {k: v for k, v in ph.items() if v.strip()}

    axis = sw["axis"].strip()
    if axis not in ("nex", "gtint"):
        raise ConfigError(f"sweep.axis must be 'nex' or 'gtint', got {axis!r}")
    for key in ("min", "max"):
        if key not in sw:
            raise ConfigError(f"sweep.{key} is required")
    lo, hi = parse_number(sw["min"], "sweep.min"), parse_number(sw["max"], "sweep.max")
    steps = parse_number(sw["steps"], "sweep.steps")
    if steps != int(steps) or steps < 2:
        raise ConfigError(f"sweep.steps must be an integer >= 2, got {sw['steps']!r}")
    if not lo < hi:
        raise ConfigError(f"sweep.min must be below sweep.max ({lo} >= {hi})")
    scale = sw["scale"].strip()
    if scale not in ("linear", "log"):
        raise ConfigError(f"sweep.scale must be 'linear' or 'log', got {scale!r}")
    if scale == "log" and lo <= 0:
        raise ConfigError("a log sweep needs sweep.min > 0")
    if axis == "nex" and lo < 0:
        raise ConfigError("nex must be non-negative")
    if axis == "gtint" and lo < 0:
        raise ConfigError("gt_int must be non-negative")
    points = np.geomspace(lo, hi, int(steps)) if scale == "log" else np.linspace(lo, hi, int(steps))

    fixed = "gt_int" if axis == "nex" else "nex"
    if fixed not in ph:
        raise ConfigError(f"physics.{fixed} is required when sweeping {axis}")
    swept = "nex" if axis == "nex" else "gt_int"
    if swept in ph:
        raise ConfigError(f"physics.{swept} is the sweep axis and cannot also be fixed")
    base = {k: parse_number(v, f"physics.{k}") for k, v in ph.items()}
    if not 0 <= base["p"] <= 1:
        raise ConfigError(f"physics.p must lie in [0, 1], got {base['p']}")
    for key in ("eta_e", "eta_g"):
        if not 0 <= base[key] <= 1:
            raise ConfigError(f"physics.{key} must lie in [0, 1], got {base[key]}")
    if base["nbar"] < 0:
        raise ConfigError("physics.nbar must be non-negative")
    try:
        # every point of the sweep must be a valid configuration
        for x in (lo, hi):
            kw = dict(base)
            kw[swept] = float(x)
            PumpConfig(**kw)
    except (ValueError, MicromaserError) as exc:
        raise ConfigError(f"invalid physics: {exc}") from None

    n_windows = _windows(wn["N"], "N", "windows.N")
    t_windows = _windows(wn["t"], "t", "windows.t")
    if not n_windows and not t_windows:
        raise ConfigError("no counting windows requested")

    methods = tuple(m.strip() for m in rn["methods"].split(",") if m.strip())
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}{_suggest(m, METHODS)}")
    if not methods:
        raise ConfigError("run.methods is empty")
    if "closed_form" in methods:
        probe = PumpConfig(**{**base, swept: float(hi)})
        if axis == "gtint" or not is_solvable(probe):
            raise ConfigError("closed_form needs gt_int = pi/sqrt(2) and nbar = 0 at every point")
        if any(not w.asymptotic for w in n_windows + t_windows):
            raise ConfigError("closed_form only covers asymptotic windows")
    n_traj = int(parse_number(rn["n_traj"], "run.n_traj"))
    burn_in = parse_number(rn["burn_in"], "run.burn_in")
    if "monte_carlo" in methods:
        if any(w.asymptotic for w in n_windows + t_windows):
            raise ConfigError("monte_carlo needs finite windows only")
        if n_traj < 1000:
            raise ConfigError("monte_carlo needs run.n_traj >= 1000")
        if not 0 <= burn_in < math.inf:
            raise ConfigError("run.burn_in must be finite and non-negative")
    name = rn["name"].strip()
    if not name or os.sep in name:
        raise ConfigError(f"run.name {name!r} is not a plain file name")
    seed = int(parse_number(rn["seed"], "run.seed"))
    return SweepSpec(axis, tuple(float(x) for x in points), base, n_windows, t_windows,
                     methods, name, seed, n_traj, burn_in, scale)


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x)) if math.isfinite(x) else str(x)


def _row_plan(spec: SweepSpec):
    """Pairs of (fixed-N window or None, fixed-t window or None) that share a row."""
    plan = [(w, None) for w in spec.n_windows if not w.asymptotic]
    plan += [(None, w) for w in spec.t_windows if not w.asymptotic]
    n_inf = next((w for w in spec.n_windows if w.asymptotic), None)
    t_inf = next((w for w in spec.t_windows if w.asymptotic), None)
    if n_inf or t_inf:
        plan.append((n_inf, t_inf))
    return plan


def _label(wn, wt):
    if wn and wt:
        return "inf"
    return (wn or wt).label


def _status_name(exc):
    name = type(exc).__name__
    return "".join("_" + c.lower() if c.isupper() else c for c in name).lstrip("_").replace("_error", "")


def _evaluate(method, cfg, window, spec, index):
    if method == "direct":
        return q_direct(cfg, window)
    if method == "spectral":
        return q_spectral(cfg, window)
    if method == "closed_form":
        return closed_form_report(cfg, window)
    from .oracle import simulate

    seed = spec.seed * 1_000_003 + index
    return simulate(cfg, spec.n_traj, [window], seed=seed, burn_in=spec.burn_in)[0]


def _point_rows(spec: SweepSpec, index: int):
    x = spec.points[index]
    cfg = spec.config_at(x)
    rows = []
    for method in spec.methods:
        for wn, wt in _row_plan(spec):
            row = dict.fromkeys(HEADER, "")
            row["nex_or_gtint"] = _fmt(x)
            row["method"], row["window"] = method, _label(wn, wt)
            status = []
            qf = None
            for w, cols in ((wn, ("Q_e", "Q_g")), (wt, ("Qt_e", "Qt_g"))):
                if w is None:
                    continue
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    try:
                        rep = _evaluate(method, cfg, w, spec, index)
                    except (MicromaserError, np.linalg.LinAlgError) as exc:
                        status.append(_status_name(exc))
                        continue
                if any(issubclass(c.category, TruncationWarning) for c in caught):
                    status.append("truncation")
                row[cols[0]], row[cols[1]] = _fmt(rep.q_e), _fmt(rep.q_g)
                if not row["mean_Ne"] or w is wn:
                    row["mean_Ne"], row["mean_Ng"] = _fmt(rep.mean_e), _fmt(rep.mean_g)
                qf = rep.q_f if rep.q_f is not None else qf
            if qf is None and method == "closed_form":
                from .stats import field_q

                qf = field_q(cfg)
            row["Q_f"] = _fmt(qf)
            row["status"] = ";".join(dict.fromkeys(status)) or "ok"
            rows.append(row)
    return rows


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list:
    """All CSV rows in axis order."""
    idx = range(len(spec.points))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(lambda i: _point_rows(spec, i), idx))
    else:
        chunks = [_point_rows(spec, i) for i in idx]
    return [r for chunk in chunks for r in chunk]


def csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=HEADER, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def plot_script(spec: SweepSpec, csv_name: str) -> str:
    """gnuplot script plotting every Q column against the sweep axis."""
    qf_scale = 0.1 if spec.name == "fig1" else 1.0
    xlabel = "N_ex" if spec.axis == "nex" else "g t_int"
    lines = [
        f"# {spec.name}: Q-parameters against {xlabel}",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set xlabel '{xlabel}'",
        "set ylabel 'Q'",
    ]
    if spec.scale == "log":
        lines.append("set logscale x")
    method = spec.methods[0]
    qf_label = "Q_f x 0.1" if qf_scale != 1.0 else "Q_f"
    plots = []
    for wn, wt in _row_plan(spec):
        label = _label(wn, wt)
        sel = f'(strcol(9) eq "{method}" && strcol(10) eq "{label}")'
        for col, name, w in ((2, "Q_e", wn), (3, "Q_g", wn), (4, "~Q_e", wt), (5, "~Q_g", wt)):
            if w is not None:
                plots.append(f"'{csv_name}' using 1:({sel} ? ${col} : NaN) with lines "
                             f"title '{name} {label}'")
    plots.append(f"'{csv_name}' using 1:(strcol(9) eq \"{method}\" ? $6*{qf_scale:g} : NaN) "
                 f"with lines dt 2 title '{qf_label}'")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="micromaser", description="Micromaser atom-counting statistics sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a parameter sweep")
    run.add_argument("config", nargs="?", help="INI config file")
    run.add_argument("--recipe", choices=sorted(RECIPES, key=lambda k: int(k[3:])),
                     help="start from a built-in figure recipe")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--seed", type=int, help="Monte Carlo seed (overrides run.seed)")
    run.add_argument("--jobs", type=int, default=1, help="worker threads")
    sub.add_parser("recipes", help="list the built-in recipes")
    args = parser.parse_args(argv)

    if args.command == "recipes":
        for name in sorted(RECIPES, key=lambda k: int(k[3:])):
            print(f"[{name}]\n{RECIPES[name]}")
        return 0

    texts = []
    if args.recipe:
        texts.append(RECIPES[args.recipe])
    if args.config:
        try:
            with open(args.config) as fh:
                texts.append(fh.read())
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    if not texts:
        print("error: give a config file or --recipe", file=sys.stderr)
        return 2
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        spec = build_spec(texts, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    os.makedirs(args.out, exist_ok=True)
    rows = run_sweep(spec, args.jobs)
    csv_name = f"{spec.name}.csv"
    with open(os.path.join(args.out, csv_name), "w", newline="") as fh:
        fh.write(csv_text(rows))
    with open(os.path.join(args.out, f"{spec.name}.gp"), "w") as fh:
        fh.write(plot_script(spec, csv_name))
    print(f"wrote {len(rows)} rows to {os.path.join(args.out, csv_name)}")
    return 0
