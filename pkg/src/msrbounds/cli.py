"""Command-line entry point.

    msrbounds bounds --config scen.toml --out results --mode synced --sweep sync.bandwidth=10e6,50e6
    msrbounds sync-report --config scen.toml --out results
    msrbounds plot-data results
    msrbounds validate-config --config scen.toml

Outputs are overwritten on every run.  Log verbosity follows the
``MSRBOUNDS_LOG`` environment variable (DEBUG, INFO, WARNING, ...).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ScenarioConfig, dumps_config, load_config, loads_config
from .errors import ConfigurationError, MsrBoundsError
from .scenario import PERCENTILES, SweepResult, point_priors, run_sweep

logger = logging.getLogger("msrbounds")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

DRAW_COLUMNS = ["draw", "x", "y", "z", "vx", "vy", "vz", "peb_m", "veb_mps", "singular_flag"]
SYNC_COLUMNS = ["follower_id", "distance_m", "sigma_t_ns", "sigma_f_hz", "outage_fraction"]


def fmt(x) -> str:
    """Locale-independent number formatting, 9 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".9g")


def build_id() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


class Manifest:
    """Run manifest written before the computation and finalized after."""

    def __init__(self, path: Path, command: str, cfg: ScenarioConfig | None, outputs: list[Path]):
        self.path = path
        self.data = {
            "tool": "msrbounds",
            "version": __version__,
            "build_id": build_id(),
            "backend": kernels.BACKEND,
            "command": command,
            "argv": sys.argv[1:],
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "seed": cfg.run.seed if cfg is not None else None,
            "config": cfg.to_dict() if cfg is not None else None,
            "config_toml": dumps_config(cfg) if cfg is not None else None,
            "outputs": [p.name for p in outputs],
            "status": "running",
        }
        self._write()

    def _write(self):
        tmp = self.path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self.data, indent=2, allow_nan=True) + "\n", encoding="utf-8")
        tmp.replace(self.path)

    def finalize(self, outputs: list[Path] | None = None, **extra):
        if outputs is not None:
            self.data["outputs"] = [p.name for p in outputs]
        self.data.update(extra)
        self.data["status"] = "complete"
        self.data["finished"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        self._write()


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def parse_sweep(specs: list[str]) -> dict[str, list[str]]:
    axes: dict[str, list[str]] = {}
    for spec in specs or []:
        name, sep, values = spec.partition("=")
        if not sep or not name.strip() or not values.strip():
            raise ConfigurationError(f"--sweep expects param=v1,v2,... (got {spec!r})")
        axes[name.strip()] = [v.strip() for v in values.split(",") if v.strip()]
    return axes


def resolve_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else loads_config("")
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["run.seed"] = args.seed
    if getattr(args, "mode", None):
        overrides["run.mode"] = args.mode
    if getattr(args, "draws", None) is not None:
        overrides["targets.count"] = args.draws
    if overrides:
        cfg = cfg.with_overrides(overrides)
    extra = parse_sweep(getattr(args, "sweep", None))
    if extra:
        axes = cfg.sweep_axes
        axes.update(extra)
        cfg = cfg.with_sweep(axes)
    return cfg


def prepare_out(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    return out


# --------------------------------------------------------------------------
# bounds
# --------------------------------------------------------------------------

def draw_rows(result: SweepResult):
    axes = list(result.axes)
    for pt in result.points:
        coords = [pt.coords[a] for a in axes]
        for k in range(pt.n_draws):
            row = coords + [k, *pt.p[k], *pt.v[k], pt.peb[k], pt.veb[k], bool(pt.singular[k])]
            if pt.range_error is not None:
                row += [pt.range_error[k], pt.range_rate_error[k]]
            yield row


def summary_rows(result: SweepResult):
    axes = list(result.axes)
    for pt in result.points:
        row = [pt.coords[a] for a in axes] + [pt.n_draws, pt.outage_count]
        row += list(pt.peb_percentiles) + list(pt.veb_percentiles)
        if pt.range_error is not None:
            row += list(np.percentile(pt.range_error, PERCENTILES))
            row += list(np.percentile(pt.range_rate_error, PERCENTILES))
        yield row


def cmd_bounds(args) -> int:
    cfg = resolve_config(args)
    out = prepare_out(args.out)
    mode = cfg.run.mode
    stem = f"bounds_{mode}"
    draws_path = out / f"{stem}_draws.csv"
    summary_path = out / f"{stem}_summary.csv"
    manifest = Manifest(out / f"{stem}_manifest.json", "bounds", cfg, [draws_path, summary_path])

    result = run_sweep(cfg)
    axes = list(result.axes)
    mono = mode == "monostatic"
    header = axes + DRAW_COLUMNS + (["range_error_m", "range_rate_error_mps"] if mono else [])
    write_csv(draws_path, header, draw_rows(result))
    pct = [f"p{q}" for q in PERCENTILES]
    s_header = axes + ["n_draws", "outage_count"]
    s_header += [f"peb_m_{q}" for q in pct] + [f"veb_mps_{q}" for q in pct]
    if mono:
        s_header += [f"range_error_m_{q}" for q in pct] + [f"range_rate_error_mps_{q}" for q in pct]
    write_csv(summary_path, s_header, summary_rows(result))
    manifest.finalize(n_points=len(result.points))
    logger.info("wrote %s and %s", draws_path, summary_path)
    return EXIT_OK


# --------------------------------------------------------------------------
# sync-report
# --------------------------------------------------------------------------

def cmd_sync_report(args) -> int:
    cfg = resolve_config(args)
    out = prepare_out(args.out)
    path = out / "sync_report.csv"
    manifest = Manifest(out / "sync_report_manifest.json", "sync-report", cfg, [path])
    priors = point_priors(cfg)[1:]
    rows = (
        [pr.radar_id, pr.distance, pr.sigma_t * 1e9, pr.sigma_f, pr.outage_fraction]
        for pr in priors
    )
    write_csv(path, SYNC_COLUMNS, rows)
    manifest.finalize()
    return EXIT_OK


# --------------------------------------------------------------------------
# plot-data
# --------------------------------------------------------------------------

def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigurationError(f"{path} is empty")
    return rows[0], rows[1:]


def _check_complete(manifest_path: Path) -> None:
    if not manifest_path.exists():
        raise ConfigurationError(f"missing manifest {manifest_path.name}")
    data = json.loads(manifest_path.read_text(encoding="utf-8"))
    if data.get("status") != "complete":
        raise ConfigurationError(f"{manifest_path.name}: run did not complete")
    for name in data.get("outputs", []):
        if not (manifest_path.parent / name).exists():
            raise ConfigurationError(f"{manifest_path.name}: output {name} is missing")


def _cdf_series(values: np.ndarray):
    x = np.sort(values)
    n = len(x)
    return [(x[k], (k + 1) / n) for k in range(n)]


def _series_text(header: str, pairs) -> str:
    lines = [f"# {header}"]
    lines += [f"{fmt(a)} {fmt(b)}" for a, b in pairs]
    return "\n".join(lines) + "\n"


def _label(coords: dict) -> str:
    if not coords:
        return ""
    return "__" + "__".join(f"{k}={v}" for k, v in coords.items())


def collect_plot_data(results: Path) -> dict[str, str]:
    """Map output filename -> file text for every curve found in ``results``."""
    files: dict[str, str] = {}
    draws = sorted(results.glob("bounds_*_draws.csv"))
    for path in draws:
        mode = path.name[len("bounds_"):-len("_draws.csv")]
        _check_complete(results / f"bounds_{mode}_manifest.json")
        header, rows = _read_csv(path)
        if "draw" not in header:
            raise ConfigurationError(f"{path.name}: no 'draw' column")
        n_axes = header.index("draw")
        groups: dict[tuple, list[list[str]]] = {}
        for row in rows:
            groups.setdefault(tuple(row[:n_axes]), []).append(row)
        curves = {"peb_m": "peb", "veb_mps": "veb", "range_error_m": "range_error",
                  "range_rate_error_mps": "range_rate_error"}
        for key, grp in groups.items():
            label = _label(dict(zip(header[:n_axes], key)))
            for col, short in curves.items():
                if col not in header:
                    continue
                j = header.index(col)
                vals = np.array([float(r[j]) for r in grp])
                name = f"cdf_{short}_{mode}{label}.dat"
                files[name] = _series_text(f"{col} cdf", _cdf_series(vals))
    sync = results / "sync_report.csv"
    if sync.exists():
        _check_complete(results / "sync_report_manifest.json")
        header, rows = _read_csv(sync)
        i_id = header.index("follower_id")
        for col, name in (("sigma_t_ns", "sigma_t_vs_follower.dat"), ("sigma_f_hz", "sigma_f_vs_follower.dat")):
            j = header.index(col)
            pairs = sorted((int(r[i_id]), float(r[j])) for r in rows)
            files[name] = _series_text(f"follower_id {col}", pairs)
    if not files:
        raise ConfigurationError(f"no results found in {results}")
    return files


def cmd_plot_data(args) -> int:
    results = Path(args.results)
    if not results.is_dir():
        raise ConfigurationError(f"results directory {results} does not exist")
    files = collect_plot_data(results)  # all reading/validation before any write
    out = prepare_out(args.out or results / "plotdata")
    paths = [out / name for name in sorted(files)]
    manifest = Manifest(out / "plotdata_manifest.json", "plot-data", None, paths)
    for path in paths:
        path.write_text(files[path.name], encoding="utf-8")
    manifest.finalize(source=str(results))
    return EXIT_OK


def cmd_validate_config(args) -> int:
    cfg = resolve_config(args)
    sys.stdout.write(dumps_config(cfg))
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msrbounds", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="TOML scenario file (defaults apply when omitted)")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        if out_required:
            p.add_argument("--out", required=True, help="output directory")

    b = sub.add_parser("bounds", help="PEB/VEB over random targets and sweeps")
    common(b)
    b.add_argument("--mode", choices=["ideal", "synced", "monostatic"])
    b.add_argument("--sweep", action="append", metavar="PARAM=V1,V2,...")
    b.add_argument("--draws", type=int, help="number of target draws")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("sync-report", help="per-follower sync error table")
    common(s)
    s.set_defaults(func=cmd_sync_report)

    pd = sub.add_parser("plot-data", help="CDF / per-follower series from results")
    pd.add_argument("results", help="directory written by bounds / sync-report")
    pd.add_argument("--out", help="where to write series (default RESULTS/plotdata)")
    pd.set_defaults(func=cmd_plot_data)

    v = sub.add_parser("validate-config", help="check a config and print it with defaults filled in")
    common(v, out_required=False)
    v.add_argument("--mode", choices=["ideal", "synced", "monostatic"])
    v.add_argument("--sweep", action="append", metavar="PARAM=V1,V2,...")
    v.add_argument("--draws", type=int)
    v.set_defaults(func=cmd_validate_config)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("MSRBOUNDS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"msrbounds: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MsrBoundsError, OSError) as exc:
        print(f"msrbounds: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
