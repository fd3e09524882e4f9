"""Command-line entry point: ``isgraph {graph,simulate,sweep,sweep-rho,bounds}``.

Parameters come from an optional flat ``key = value`` file (``--config``)
and ``--set key=value`` overrides, which win. Units are m^-2 for densities,
m for distances and bits per complex dimension for rates.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import hex_bound_report, square_search, square_supercritical_check
from .channel import ChannelParams, InvalidEdgeLength, model_from_name, rho_max
from .graph import MODES, build_isgraph, format_float as fmt, write_dump
from .percolation import (
    DEFAULT_CROSSINGS,
    PercolationEstimate,
    TrialConfig,
    extract_critical_density,
    outcome_tensor,
    proxy_metadata,
    sample_trial,
    _sweep,
)

EXIT_CONFIG = 2
EXIT_IO = 3

CSV_COLUMNS = ["lambda_l", "mode", "p_hat", "ci_low", "ci_high", "trials", "successes",
               "L", "R", "rho", "lambda_e", "seed"]

COMMON = {
    "model": "power_law", "gamma": "4", "snr0": "10", "rho": "0", "lambda_e": "1", "L": "10",
    "out": "out", "torus": "false", "workers": "1",
}
DEFAULTS = {
    "graph": {"lambda_l": "5", "svg_mode": "weak"},
    "simulate": {"lambda_l": "5", "modes": "weak", "trials": "400"},
    "sweep": {"modes": "weak,strong", "trials": "400", "crn": "true",
              "crossings": ",".join(str(c) for c in DEFAULT_CROSSINGS)},
    "sweep-rho": {"lambda_l": "6", "modes": "weak", "trials": "400"},
    "bounds": {},
}
REQUIRED = {
    "graph": ["seed"],
    "simulate": ["seed"],
    "sweep": ["seed", "lambda_grid"],
    "sweep-rho": ["seed", "rho_grid"],
    "bounds": ["lambda_l_grid"],
}
KNOWN = set(COMMON) | {"seed", "R", "snr0_db", "eaves_padding", "lambda_grid", "rho_grid",
                       "lambda_l_grid", "lambda_e_grid", "d", "n_e"}
for _d in DEFAULTS.values():
    KNOWN |= set(_d)


class ConfigError(ValueError):
    pass


def read_config_file(path) -> dict[str, str]:
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        k, v = line.split("=", 1)
        cfg[k.strip()] = v.strip()
    return cfg


def parse_grid(text: str) -> list[float]:
    """``a,b,c`` or inclusive ``start:stop:step``."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0:
                raise ConfigError(f"grid step must be > 0 in {text!r}")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            vals = [round(start + k * step, 12) for k in range(n)]
        else:
            vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from None
    if not vals:
        raise ConfigError(f"empty grid {text!r}")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"grid must be strictly increasing: {text!r}")
    return vals


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def resolve(command: str, file_cfg: dict[str, str], overrides: dict[str, str]) -> dict[str, str]:
    cfg = {**COMMON, **DEFAULTS[command], **file_cfg, **overrides}
    unknown = sorted(set(cfg) - KNOWN)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    missing = [k for k in REQUIRED[command] if k not in cfg]
    if missing:
        raise ConfigError(f"{command}: missing required key(s): {', '.join(missing)}")
    if "snr0_db" in cfg:
        cfg["snr0"] = fmt(10.0 ** (float(cfg.pop("snr0_db")) / 10.0))
    if "R" not in cfg:
        cfg["R"] = fmt(0.4 * float(cfg["L"]))
    return dict(sorted(cfg.items()))


class Experiment:
    """Typed view over a resolved string config."""

    def __init__(self, command: str, cfg: dict[str, str]):
        self.command = command
        self.raw = cfg
        try:
            self.model = model_from_name(cfg["model"], float(cfg["gamma"]))
            self.params = ChannelParams(float(cfg["snr0"]), float(cfg["rho"]))
            self.lambda_e = float(cfg["lambda_e"])
            self.L = float(cfg["L"])
            self.R = float(cfg["R"])
            self.torus = _bool(cfg["torus"])
            self.workers = int(cfg["workers"])
            self.out = Path(cfg["out"])
            self.seed = int(cfg["seed"]) if "seed" in cfg else None
            self.modes = [m.strip() for m in cfg.get("modes", "weak").split(",") if m.strip()]
            self.pad = float(cfg["eaves_padding"]) if "eaves_padding" in cfg else None
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None
        if self.lambda_e < 0:
            raise ConfigError("lambda_e must be >= 0")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ConfigError(f"unknown mode(s) {bad}; expected any of {MODES}")

    def trial_config(self, lambda_l: float, trials: int = 1) -> TrialConfig:
        try:
            return TrialConfig(lambda_l, self.lambda_e, self.params, self.model, L=self.L, R=self.R,
                               trials=trials, master_seed=self.seed, mode=self.modes[0],
                               eaves_padding=self.pad, torus=self.torus)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def header(self) -> dict:
        # where the files land has no bearing on the results, so it is not recorded
        cfg = {k: v for k, v in self.raw.items() if k != "out"}
        return {"version": __version__, "command": self.command, "config": cfg}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, float) else fmt(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return fmt(v) if not math.isfinite(v) else float(fmt(v))
    return obj


def write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], str) else fmt(r[c]) if isinstance(r[c], float) else r[c]
                    for c in CSV_COLUMNS])
    return buf.getvalue()


def _rows(exp: Experiment, cfg: TrialConfig, lambdas, rhos, counts, trials) -> list[dict]:
    rows = []
    for a, lam in enumerate(lambdas):
        for b, rho in enumerate(rhos):
            for c, mode in enumerate(exp.modes):
                e = PercolationEstimate.from_counts(int(counts[a, b, c]), trials)
                rows.append({"lambda_l": float(lam), "mode": mode, "p_hat": e.p_hat, "ci_low": e.ci_low,
                             "ci_high": e.ci_high, "trials": e.trials, "successes": e.successes,
                             "L": cfg.L, "R": cfg.R, "rho": float(rho), "lambda_e": cfg.lambda_e,
                             "seed": cfg.master_seed})
    return rows


def _run_grid(exp: Experiment, stem: str, lambdas, rhos, trials: int, crn: bool = True,
              crossings=()) -> int:
    cfg = exp.trial_config(max(lambdas), trials)
    partial = {"t": np.zeros((0, len(lambdas), len(rhos), len(exp.modes)), dtype=bool)}

    def keep(t):
        partial["t"] = t

    truncated = False
    try:
        if crn or len(lambdas) == 1:
            t = outcome_tensor(cfg, lambdas, rhos, exp.modes, exp.workers, on_chunk=keep)
        else:
            parts = []
            for k, lam in enumerate(lambdas):
                parts.append(outcome_tensor(cfg.replace(lambda_l=lam), [lam], rhos, exp.modes, exp.workers,
                                            salt=k + 1))
            t = np.concatenate(parts, axis=1)
    except KeyboardInterrupt:
        t, truncated = partial["t"], True
    done = len(t)
    counts = t.sum(axis=0) if done else np.zeros((len(lambdas), len(rhos), len(exp.modes)), int)
    report = exp.header()
    report.update({"truncated": truncated, "trials_completed": done,
                   "proxy": proxy_metadata(cfg), "rho_max": rho_max(exp.params, exp.model)})
    rows = _rows(exp, cfg, lambdas, rhos, counts, done) if done else []
    if crossings and done:
        report["critical_density"] = {
            mode: {fmt(x): extract_critical_density(
                _sweep("lambda_l", lambdas, counts[:, 0, c], done, mode, ()), x) for x in crossings}
            for c, mode in enumerate(exp.modes)
        }
    report["results"] = rows
    exp.out.mkdir(parents=True, exist_ok=True)
    (exp.out / f"{stem}.csv").write_text(csv_text(rows))
    write_json(exp.out / f"{stem}.json", report)
    return 130 if truncated else 0


def cmd_simulate(exp: Experiment) -> int:
    return _run_grid(exp, "simulate", [float(exp.raw["lambda_l"])], [exp.params.rho],
                     int(exp.raw["trials"]))


def cmd_sweep(exp: Experiment) -> int:
    crossings = [float(c) for c in exp.raw["crossings"].split(",")]
    return _run_grid(exp, "sweep", parse_grid(exp.raw["lambda_grid"]), [exp.params.rho],
                     int(exp.raw["trials"]), _bool(exp.raw["crn"]), crossings)


def cmd_sweep_rho(exp: Experiment) -> int:
    rhos = parse_grid(exp.raw["rho_grid"])
    if rhos[0] < 0:
        raise ConfigError("rho grid must be non-negative")
    return _run_grid(exp, "sweep_rho", [float(exp.raw["lambda_l"])], rhos, int(exp.raw["trials"]))


def cmd_graph(exp: Experiment) -> int:
    lam = float(exp.raw["lambda_l"])
    cfg = exp.trial_config(lam)
    real, _ = sample_trial(cfg, 0)
    g = build_isgraph(real, exp.params, exp.model)
    write_dump(g, real.eaves, exp.out)
    svg_mode = exp.raw["svg_mode"]
    if svg_mode not in MODES:
        raise ConfigError(f"svg_mode must be one of {MODES}")
    (exp.out / "graph.svg").write_text(render_svg(g, real.eaves, svg_mode, exp.header()))
    meta = exp.header()
    meta.update({"nodes": g.n, "eavesdroppers": len(real.eaves), "edges": g.edge_count,
                 "files": ["nodes.txt", "radii.txt", "edges.txt", "eaves.txt", "graph.svg"]})
    write_json(exp.out / "graph.json", meta)
    return 0


def cmd_bounds(exp: Experiment) -> int:
    lls = parse_grid(exp.raw["lambda_l_grid"])
    les = parse_grid(exp.raw["lambda_e_grid"]) if "lambda_e_grid" in exp.raw else [exp.lambda_e]
    d = float(exp.raw["d"]) if "d" in exp.raw else None
    n_e = int(exp.raw["n_e"]) if "n_e" in exp.raw else None
    points = []
    for le in les:
        for ll in lls:
            entry = {"lambda_l": ll, "lambda_e": le}
            try:
                entry["hex"] = vars(hex_bound_report(ll, le)) if le > 0 else {"error": "lambda_e must be > 0"}
            except ValueError as exc:
                entry["hex"] = {"error": str(exc)}
            try:
                if d is None:
                    rep = square_search(ll, le, exp.params, exp.model, n_e)
                else:
                    rep = square_supercritical_check(ll, le, exp.params, exp.model, d, n_e)
                entry["square"] = vars(rep)
            except InvalidEdgeLength as exc:
                entry["square"] = {"error": str(exc)}
            points.append(entry)
    report = exp.header()
    report["points"] = points
    write_json(exp.out / "bounds.json", report)
    return 0


def render_svg(graph, eaves, mode: str = "weak", meta: dict | None = None, size: int = 800) -> str:
    """Scatter of legitimate nodes (blue), eavesdroppers (red) and edges of ``mode``."""
    w = graph.window
    s = size / max(w.width, w.height)

    def px(x, y):
        return fmt((x - w.xmin) * s), fmt((w.ymax - y) * s)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{fmt(w.width * s)}" height="{fmt(w.height * s)}">']
    if meta is not None:
        out.append(f"<metadata>{json.dumps(_jsonable(meta), sort_keys=True)}</metadata>")
    out.append('<defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="6" '
               'markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#555"/></marker></defs>')
    out.append('<rect width="100%" height="100%" fill="white"/>')
    m = graph.matrix(mode).tocoo()
    for i, j in zip(m.row, m.col):
        if mode in ("weak", "strong") and j < i:
            continue
        x1, y1 = px(*graph.nodes[i])
        x2, y2 = px(*graph.nodes[j])
        if mode in ("weak", "strong"):
            out.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="#888" stroke-width="1"/>')
        else:
            if mode == "in":
                x1, y1, x2, y2 = x2, y2, x1, y1
            out.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="#555" stroke-width="1" '
                       'marker-end="url(#arrow)"/>')
    for k, (x, y) in enumerate(graph.nodes):
        cx, cy = px(x, y)
        colour = "#111" if k == 0 else "#1f5fbf"
        out.append(f'<circle cx="{cx}" cy="{cy}" r="3" fill="{colour}"/>')
    for x, y in eaves:
        if not w.contains((x, y)):
            continue
        cx, cy = px(x, y)
        out.append(f'<rect x="{fmt(float(cx) - 3)}" y="{fmt(float(cy) - 3)}" width="6" height="6" fill="#c0392b"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


COMMANDS = {
    "graph": cmd_graph,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "sweep-rho": cmd_sweep_rho,
    "bounds": cmd_bounds,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isgraph", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", "-c", help="flat key = value file")
        sp.add_argument("--set", "-s", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("--out", "-o", help="output directory (same as --set out=...)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_cfg = read_config_file(args.config) if args.config else {}
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v.strip()
        if args.out:
            overrides["out"] = args.out
        cfg = resolve(args.command, file_cfg, overrides)
        exp = Experiment(args.command, cfg)
        return COMMANDS[args.command](exp)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        where = getattr(exc, "filename", None) or ""
        print(f"I/O error{(' at ' + str(where)) if where else ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
