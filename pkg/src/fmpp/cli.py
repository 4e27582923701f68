"""Command-line interface: ``fmpp <command> [options]``.

Every run writes its result CSV, an SVG plot where a curve is meaningful,
and a JSON provenance record holding the full configuration text, so
``fmpp <command> --config run.provenance.json`` repeats the run exactly.
If a run fails, every file it already wrote is deleted and the process exits
with the code mapped from the error's ``code``.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .datasets import PROVINCES_WINDOW, provinces_paths
from .envelopes import NullModel, envelope
from .errors import EXIT_CODES, FmppError, InvalidArgument, MalformedInput
from .geometry import Ball, Box, Sector, parse_window, rect
from .intensity import IntensitySpec, fit_intensity
from .pattern import LabelIn, MarkSet, Pattern, load_pattern, save_pattern
from .plotting import plot_svg
from .simulate import (
    LGCP,
    Binomial,
    BrownianMarks,
    GeostatMarks,
    GrowthInteraction,
    GrowthResult,
    IntensityMarks,
    Poisson,
    coverage_fraction,
    lisa_marks,
    simulate_ground,
    simulate_marks,
)
from .summaries import KQuery, estimate_k
from .testfuncs import parse_test_function

__all__ = ["main", "RunConfig", "PROVENANCE_SCHEMA", "SELFTEST_FAILED"]

COMMANDS = ("estimate", "envelope", "intensity", "simulate", "lisa", "coverage", "selftest")
SCHEMA_ID = "fmpp-provenance/1"
SELFTEST_FAILED = 3

PROVENANCE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fmpp run provenance",
    "type": "object",
    "required": ["schema", "fmpp_version", "command", "config", "config_text", "seed", "outputs", "environment"],
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "fmpp_version": {"type": "string"},
        "command": {"enum": list(COMMANDS)},
        "config": {"type": "object", "additionalProperties": {"type": "string"}},
        "config_text": {"type": "string"},
        "seed": {"type": ["integer", "null"]},
        "outputs": {"type": "array", "items": {"type": "string"}},
        "query": {"type": "object"},
        "summary": {"type": "object"},
        "environment": {
            "type": "object",
            "required": ["python", "numpy"],
            "properties": {"python": {"type": "string"}, "numpy": {"type": "string"}},
        },
    },
}

# option name -> (default, help); None means "not set"
OPTIONS = {
    "dataset": (None, "use the bundled synthetic pattern: demography | sexratio"),
    "window": (None, "rect(xmin, xmax, ymin, ymax) or poly(x y; x y; ...)"),
    "points": (None, "points CSV: id,x,y[,label][,scalar]"),
    "curves": (None, "curves CSV: id,t,value"),
    "r": (None, "r-grid start:stop:step (stop inclusive)"),
    "test_fn": ("one", "test function, e.g. vario, lp:2, max(sup,aux-vario)"),
    "correction": ("translational", "minus-sampling | translational | isotropic | none"),
    "intensity": ("homog", "homog | kernel[:h] | grid:<csv>"),
    "normalization": ("hamilton", "raw | hamilton | ground-normalized"),
    "order": ("2", "2 or 3"),
    "elem": ("ball", "ball | sector:phi:psi | box:a:b (unit template scaled by r)"),
    "cond_labels": (None, "comma list of labels for the conditioning point"),
    "neighbor_labels": (None, "comma list of labels for neighbours"),
    "null": ("relabel", "poisson | relabel"),
    "nsim": ("39", "number of null replicates"),
    "rank": ("1", "envelope uses the rank-th smallest/largest replicate"),
    "transform": ("identity", "identity | cbrt"),
    "seed": ("0", "root random seed"),
    "threads": ("1", "worker threads for replicates"),
    "ground": ("poisson:100", "poisson:<rate> | binomial:<n> | lgcp:<mu>,<var>,<scale>"),
    "marks": ("brownian:sigma=1", "brownian:... | geostat:... | intensity:... | gi:lambda=..,K=..,c=..,sigint=..,mu=.."),
    "grid": ("0:20:1", "time grid start:stop:step for simulated curves"),
    "h": (None, "LISA radius grid start:stop:step"),
    "radius": (None, "coverage disk radius (default: the points' scalar mark)"),
    "res": (None, "lattice resolution (intensity: 64, coverage: 512)"),
    "replicates": ("100", "selftest Monte Carlo replicates"),
    "out": (None, "simulate: points.csv,curves.csv file names"),
    "out_dir": (".", "directory for all outputs"),
    "name": (None, "output file stem (default depends on the command)"),
}

PATH_KEYS = ("points", "curves")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """A command plus string-valued settings; round-trips through :meth:`to_text`."""

    command: str
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidArgument(f"unknown command {self.command!r}")
        unknown = set(self.settings) - set(OPTIONS)
        if unknown:
            raise InvalidArgument(f"unknown settings: {sorted(unknown)}")

    def get(self, key):
        v = self.settings.get(key)
        return OPTIONS[key][0] if v is None else v

    def to_text(self) -> str:
        lines = [f"command = {self.command}"]
        lines += [f"{k} = {v}" for k, v in sorted(self.settings.items()) if v is not None]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, command=None) -> "RunConfig":
        settings = {}
        for ln in text.splitlines():
            s = ln.strip()
            if not s or s.startswith("#"):
                continue
            key, sep, val = s.partition("=")
            if not sep:
                raise MalformedInput(f"config line without '=': {ln!r}")
            settings[key.strip().replace("-", "_")] = val.strip()
        cmd = settings.pop("command", None) or command
        if cmd is None:
            raise MalformedInput("config does not name a command")
        return cls(cmd, settings)


def _read_config_file(path: str) -> RunConfig:
    if not os.path.exists(path):
        from .errors import FileNotFound

        raise FileNotFound(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        try:
            text = json.loads(text)["config_text"]
        except (ValueError, KeyError):
            raise MalformedInput("JSON config must be a provenance record with config_text") from None
    return RunConfig.from_text(text)


def _grid(text: str, what: str) -> np.ndarray:
    try:
        a, b, c = (float(v) for v in text.split(":"))
    except ValueError:
        raise InvalidArgument(f"{what} must be start:stop:step, got {text!r}") from None
    if c <= 0 or b < a:
        raise InvalidArgument(f"{what} needs step > 0 and stop >= start")
    k = int(np.floor((b - a) / c + 1e-9))
    return a + c * np.arange(k + 1)


def _labels(text):
    if not text:
        return MarkSet()
    try:
        return MarkSet((LabelIn(int(v) for v in text.split(",")),))
    except ValueError:
        raise InvalidArgument(f"labels must be integers, got {text!r}") from None


def _elem(text: str):
    name, *args = text.split(":")
    try:
        vals = [float(a) for a in args]
    except ValueError:
        raise InvalidArgument(f"bad structuring element {text!r}") from None
    if name == "ball" and not vals:
        return Ball(1.0)
    if name == "sector" and len(vals) == 2:
        return Sector(1.0, *vals)
    if name == "box" and len(vals) == 2:
        return Box(*vals)
    raise InvalidArgument(f"bad structuring element {text!r}")


def _intensity(text: str):
    kind, _, arg = text.partition(":")
    if kind in ("homog", "homogeneous"):
        return IntensitySpec("homogeneous")
    if kind == "kernel":
        if not arg:
            return IntensitySpec("kernel")
        try:
            return IntensitySpec("kernel", bandwidth=float(arg))
        except ValueError:
            raise InvalidArgument(f"bad kernel bandwidth {arg!r}") from None
    if kind == "grid" and arg:
        return IntensitySpec("grid", grid_path=os.path.abspath(arg))
    raise InvalidArgument(f"bad intensity {text!r}")


def _int(cfg, key):
    try:
        return int(cfg.get(key))
    except (TypeError, ValueError):
        raise InvalidArgument(f"--{key.replace('_', '-')} must be an integer") from None


def _window(cfg):
    text = cfg.get("window")
    if text is None:
        if cfg.get("dataset"):
            return PROVINCES_WINDOW
        raise InvalidArgument("--window is required")
    return parse_window(text)


def _pattern(cfg) -> Pattern:
    pts, cur = cfg.get("points"), cfg.get("curves")
    if cfg.get("dataset"):
        if cfg.get("dataset") not in ("demography", "sexratio"):
            raise InvalidArgument("--dataset must be demography or sexratio")
        dp, dc = provinces_paths(cfg.get("dataset"))
        pts, cur = pts or dp, cur or dc
    if pts is None or cur is None:
        raise InvalidArgument("--points and --curves are required")
    return load_pattern(pts, cur, _window(cfg))


def _query(cfg) -> KQuery:
    if cfg.get("r") is None:
        raise InvalidArgument("--r is required")
    order = _int(cfg, "order")
    if order not in (2, 3):
        raise InvalidArgument("--order must be 2 or 3")
    nb = _labels(cfg.get("neighbor_labels"))
    return KQuery(
        tuple(_grid(cfg.get("r"), "--r")),
        test=parse_test_function(cfg.get("test_fn")),
        cond=_labels(cfg.get("cond_labels")),
        neighbors=(nb,) * (order - 1),
        elems=(_elem(cfg.get("elem")),),
        correction=cfg.get("correction"),
        intensity=_intensity(cfg.get("intensity")),
        normalization=cfg.get("normalization"),
    )


def _keyvals(text: str, aliases: dict):
    out = {}
    for part in filter(None, text.split(",")):
        k, sep, v = part.partition("=")
        if not sep:
            raise InvalidArgument(f"expected key=value, got {part!r}")
        k = aliases.get(k.strip(), k.strip())
        try:
            out[k] = float(v)
        except ValueError:
            raise InvalidArgument(f"bad number in {part!r}") from None
    return out


def _ground_model(text: str):
    kind, _, arg = text.partition(":")
    try:
        if kind == "poisson":
            return Poisson(float(arg))
        if kind == "binomial":
            return Binomial(int(arg))
        if kind == "lgcp":
            mu, var, scale = (float(v) for v in arg.split(","))
            return LGCP(mu, var, scale)
    except ValueError:
        raise InvalidArgument(f"bad ground model {text!r}") from None
    raise InvalidArgument(f"bad ground model {text!r}")


def _mark_model(text: str):
    kind, _, arg = text.partition(":")
    try:
        if kind == "brownian":
            return BrownianMarks(**_keyvals(arg, {}))
        if kind == "geostat":
            return GeostatMarks(**_keyvals(arg, {"space": "scale_space", "time": "scale_time"}))
        if kind == "intensity":
            return IntensityMarks(**_keyvals(arg, {}))
        if kind == "gi":
            return GrowthInteraction(**_keyvals(arg, {"lambda": "lam", "sigint": "sigma_int", "sigma": "noise"}))
    except TypeError as exc:
        raise InvalidArgument(f"bad mark model {text!r}: {exc}") from None
    raise InvalidArgument(f"bad mark model {text!r}")


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


class _Outputs:
    """Tracks written files so a failed run can remove them."""

    def __init__(self, directory: str):
        self.dir = directory
        self.created_dir = not os.path.isdir(directory)
        self.files = []

    def path(self, name: str) -> str:
        os.makedirs(self.dir, exist_ok=True)
        p = os.path.join(self.dir, name)
        self.files.append(p)
        return p

    def write(self, name: str, text: str) -> str:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return p

    def rollback(self):
        for p in self.files:
            if os.path.exists(p):
                os.remove(p)
        if self.created_dir and os.path.isdir(self.dir) and not os.listdir(self.dir):
            os.rmdir(self.dir)


def _r_label(cfg):
    return {"xlabel": "r", "ylabel": "K"}


def _cmd_estimate(cfg, out, echo):
    p = _pattern(cfg)
    q = _query(cfg)
    est = estimate_k(p, q)
    stem = cfg.get("name") or "k"
    echo["stem"] = stem
    out.write(f"{stem}.csv", est.to_csv())
    svg = plot_svg([(est.r, est.values, f"K ({q.test.to_text()})")], labels={
        "title": f"{q.test.to_text()} / {q.correction}", **_r_label(cfg)})
    out.write(f"{stem}.svg", svg)
    echo["query"] = est.query
    echo["summary"] = {"n_points": len(p), "rows": len(est.r), "empty_conditioning": est.empty_conditioning}


def _cmd_envelope(cfg, out, echo):
    p = _pattern(cfg)
    q = _query(cfg)
    nm = NullModel(cfg.get("null"), nsim=_int(cfg, "nsim"), seed=_int(cfg, "seed"))
    env = envelope(p, q, nm, transform=cfg.get("transform"), rank=_int(cfg, "rank"), threads=_int(cfg, "threads"))
    stem = cfg.get("name") or f"envelope-{cfg.get('null')}"
    echo["stem"] = stem
    out.write(f"{stem}.csv", env.to_csv())
    ylab = "K^(1/3)" if env.transform == "cube-root" else "K"
    svg = plot_svg(
        [(env.r, env.stat, "data"), (env.r, env.mean, "null mean")],
        band=(env.r, env.lo, env.hi),
        labels={"title": f"{q.test.to_text()}: {nm.kind}, {nm.nsim} simulations", "xlabel": "r", "ylabel": ylab},
    )
    out.write(f"{stem}.svg", svg)
    echo["query"] = q.describe()
    echo["summary"] = {"n_points": len(p), "null": nm.kind, "nsim": nm.nsim, "level": env.level}


def _cmd_intensity(cfg, out, echo):
    p = _pattern(cfg)
    spec = _intensity(cfg.get("intensity"))
    model = fit_intensity(p, spec.kind, spec.bandwidth, spec.per_label, spec.grid_path)
    res = int(cfg.get("res") or 64)
    if res < 2:
        raise InvalidArgument("--res must be >= 2")
    x0, x1, y0, y1 = p.window.bbox
    xs = np.linspace(x0, x1, res)
    ys = np.linspace(y0, y1, res)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    inside = p.window.contains(pts)
    rho = np.zeros(len(pts))
    rho[inside] = model(pts[inside])
    lines = ["x,y,rho"] + [f"{x!r},{y!r},{v!r}" for (x, y), v in zip(pts.tolist(), rho.tolist())]
    stem = cfg.get("name") or "intensity"
    out.write(f"{stem}.csv", "\n".join(lines) + "\n")
    echo["summary"] = {"model": model.describe(), "res": res}


def _cmd_simulate(cfg, out, echo):
    window = parse_window(cfg.get("window")) if cfg.get("window") else rect(0, 1, 0, 1)
    seed = _int(cfg, "seed")
    grid = _grid(cfg.get("grid"), "--grid")
    xy = simulate_ground(_ground_model(cfg.get("ground")), window, np.random.default_rng([seed, 0]))
    model = _mark_model(cfg.get("marks"))
    if isinstance(model, IntensityMarks) and model.b != 0:
        rate = len(xy) / window.area
        model = IntensityMarks(model.a, model.b, model.noise, lambda q: np.full(len(q), rate))
    res = simulate_marks(model, xy, grid, np.random.default_rng([seed, 1]))
    curves = res.curves if isinstance(res, GrowthResult) else res
    p = Pattern(window, xy, grid, curves.reshape(len(xy), len(grid)))
    names = (cfg.get("out") or "points.csv,curves.csv").split(",")
    if len(names) != 2:
        raise InvalidArgument("--out needs two comma-separated file names")
    save_pattern(p, out.path(names[0]), out.path(names[1]))
    echo["summary"] = {"n_points": len(p), "grid_len": len(grid)}


def _cmd_lisa(cfg, out, echo):
    p = _pattern(cfg)
    if cfg.get("h") is None:
        raise InvalidArgument("--h is required")
    h = _grid(cfg.get("h"), "--h")
    curves = lisa_marks(p.xy, h)
    lp = p.replace(grid=h, curves=curves)
    stem = cfg.get("name") or "lisa"
    save_pattern(lp, out.path(f"{stem}-points.csv"), out.path(f"{stem}-curves.csv"))
    svg = plot_svg([(h, curves.mean(axis=0), "mean local count")],
                   band=(h, curves.min(axis=0), curves.max(axis=0)),
                   labels={"title": "local neighbour counts", "xlabel": "h", "ylabel": "count"})
    out.write(f"{stem}.svg", svg)
    echo["summary"] = {"n_points": len(p), "rows": len(h)}


def _cmd_coverage(cfg, out, echo):
    p = _pattern(cfg)
    if cfg.get("radius") is not None:
        radii = np.full(len(p), float(cfg.get("radius")))
    elif p.scalars is not None:
        radii = np.asarray(p.scalars)
    else:
        raise InvalidArgument("--radius is required when the points have no scalar mark")
    res = int(cfg.get("res") or 512)
    frac = coverage_fraction(p.xy, radii, p.window, res=res)
    stem = cfg.get("name") or "coverage"
    out.write(f"{stem}.csv", f"fraction\n{frac!r}\n")
    echo["summary"] = {"fraction": frac, "res": res}


def _cmd_selftest(cfg, out, echo):
    from .selftest import run_selftest

    results = run_selftest(replicates=_int(cfg, "replicates"), seed=_int(cfg, "seed"), verbose=print)
    lines = ["check,r,mean,target,z,passed"] + [
        f"{c.name},{c.r!r},{c.mean!r},{c.target!r},{c.z!r},{str(c.passed).lower()}" for c in results
    ]
    stem = cfg.get("name") or "selftest"
    out.write(f"{stem}.csv", "\n".join(lines) + "\n")
    ok = all(c.passed for c in results)
    echo["summary"] = {"passed": ok, "checks": len(results)}
    print("selftest:", "PASS" if ok else "FAIL")
    return 0 if ok else SELFTEST_FAILED


RUNNERS = {
    "estimate": _cmd_estimate,
    "envelope": _cmd_envelope,
    "intensity": _cmd_intensity,
    "simulate": _cmd_simulate,
    "lisa": _cmd_lisa,
    "coverage": _cmd_coverage,
    "selftest": _cmd_selftest,
}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg``; returns the process exit status."""
    out = _Outputs(cfg.get("out_dir"))
    try:
        seed = int(cfg.get("seed"))
    except ValueError:
        seed = None
    echo = {
        "schema": SCHEMA_ID,
        "fmpp_version": __version__,
        "command": cfg.command,
        "config": {k: v for k, v in sorted(cfg.settings.items()) if v is not None},
        "config_text": cfg.to_text(),
        "seed": seed,
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
    }
    try:
        status = RUNNERS[cfg.command](cfg, out, echo) or 0
        stem = echo.pop("stem", None) or cfg.get("name") or cfg.command
        prov = os.path.join(out.dir, f"{stem}.provenance.json")
        echo["outputs"] = [os.path.basename(f) for f in out.files] + [os.path.basename(prov)]
        out.write(os.path.basename(prov), json.dumps(echo, indent=2, sort_keys=True, default=_json_default) + "\n")
        return status
    except FmppError as exc:
        out.rollback()
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_CODES[exc.code]
    except Exception:
        out.rollback()
        raise


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fmpp", description="Summary statistics for functional marked point patterns.")
    ap.add_argument("--version", action="version", version=f"fmpp {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", help="key=value file or a provenance JSON; flags override it")
        for key, (default, help_) in OPTIONS.items():
            suffix = "" if default is None else f" (default: {default})"
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=help_ + suffix)
    return ap


def config_from_args(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    settings = {}
    if args.config:
        base = _read_config_file(args.config)
        settings.update(base.settings)
    for key in OPTIONS:
        v = getattr(args, key)
        if v is not None:
            settings[key] = v
    for key in PATH_KEYS:
        if settings.get(key):
            settings[key] = os.path.abspath(settings[key])
    return RunConfig(args.command, settings)


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except FmppError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_CODES[exc.code]
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
