"""Command-line entry point.

Subcommands: gen-train, gen-trials, observe, eval, fit-tau, dynamics,
report. Values resolve with this precedence: command-line flag, then TOML
config file (--config), then the CBB_SEED environment variable (seed only),
then built-in defaults. Every run writes a resolved_config.json snapshot
next to its outputs.

Directory-producing commands build into a ".partial" sibling and rename it
into place on success, so an interrupted run never leaves a half-written
tree at the target path. Single-file outputs are written via a temp file
and an atomic rename.

Exit codes: 0 success; 2 usage or configuration problem; 3 generation
could not satisfy a requested condition; 4 IO failure or a violated file
contract (missing masks, malformed manifests or CSVs).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import re
import shutil
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import CbbError, GenerationFailed, MissingExternalMask, NoSuitableSite
from .metrics import (
    DEFAULT_TAU_GRID,
    dynamics as compute_dynamics,
    load_human_csv,
    score_trial,
    summarize,
)
from .observers import ExternalObserver, make_observer
from .raster import read_mask, write_mask
from .report import (
    curve_csv,
    dynamics_csv,
    load_dynamics_csv,
    load_report,
    records_csv,
    report_json_str,
    summary_md,
    svg_detection_curve,
    svg_dynamics,
)
from .trials import BatteryConfig, DatasetConfig, build_battery, build_training_set, read_manifest

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GENERATION = 3
EXIT_IO = 4

_TOML_KEYS = {
    "seed", "resolution", "n", "observer", "tau_grid", "human_csv",
    "jobs", "rel_area", "include_nochange",
}


class UsageError(ValueError):
    """A flag, config value, or their combination cannot be used."""


def _write_text_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _snapshot(out_dir: Path, resolved: dict) -> None:
    _write_text_atomic(
        out_dir / "resolved_config.json",
        json.dumps(resolved, sort_keys=True, indent=2) + "\n",
    )


def _build_tree(out: Path, build, resolved: dict):
    """Build a directory atomically: fill a .partial sibling, then rename."""
    partial = out.parent / (out.name + ".partial")
    if partial.exists():
        shutil.rmtree(partial)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        partial.mkdir()
        result = build(partial)
        _snapshot(partial, resolved)
    except BaseException:
        shutil.rmtree(partial, ignore_errors=True)
        raise
    if out.exists():
        if any(out.iterdir()):
            raise OSError(f"refusing to overwrite non-empty directory {out}")
        out.rmdir()
    os.replace(partial, out)
    return result


def _load_battery(path: str):
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.jsonl"
    if not p.is_file():
        raise OSError(f"battery manifest not found: {p}")
    bundle = read_manifest(p)
    if not hasattr(bundle, "trials"):
        raise UsageError(f"{p} is a training manifest, not a battery")
    return bundle


def _pmap(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _apply_toml(ns: argparse.Namespace) -> None:
    if not getattr(ns, "config", None):
        return
    with open(ns.config, "rb") as fh:
        data = tomllib.load(fh)
    unknown = sorted(set(data) - _TOML_KEYS)
    if unknown:
        raise UsageError(f"{ns.config}: unknown config keys: {', '.join(unknown)}")
    for key, value in data.items():
        if hasattr(ns, key) and getattr(ns, key) is None:
            setattr(ns, key, value)


def _resolve_seed(ns: argparse.Namespace) -> None:
    if getattr(ns, "seed", None) is not None:
        return
    env = os.environ.get("CBB_SEED")
    if env is not None:
        try:
            ns.seed = int(env)
        except ValueError:
            raise UsageError(f"CBB_SEED must be an integer, got {env!r}") from None
    else:
        ns.seed = 0


def _parse_tau_grid(value) -> tuple[float, ...]:
    if value is None:
        return DEFAULT_TAU_GRID
    if isinstance(value, str):
        parts = [p for p in value.split(",") if p.strip()]
        try:
            grid = tuple(float(p) for p in parts)
        except ValueError:
            raise UsageError(f"bad tau grid value in {value!r}") from None
    else:
        grid = tuple(float(v) for v in value)
    if not grid or grid[0] <= 0 or any(a >= b for a, b in zip(grid, grid[1:])):
        raise UsageError("tau grid must be positive and strictly increasing")
    return grid


def _resolve_common(ns: argparse.Namespace) -> None:
    _apply_toml(ns)
    if hasattr(ns, "seed"):
        _resolve_seed(ns)
    if getattr(ns, "resolution", None) is None and hasattr(ns, "resolution"):
        ns.resolution = 512
    if getattr(ns, "jobs", None) is None and hasattr(ns, "jobs"):
        ns.jobs = os.cpu_count() or 1
    if hasattr(ns, "jobs") and ns.jobs < 1:
        raise UsageError(f"--jobs must be at least 1, got {ns.jobs}")
    if hasattr(ns, "observer") and ns.observer is None:
        ns.observer = "exact"
    if hasattr(ns, "include_nochange") and ns.include_nochange is None:
        ns.include_nochange = True
    if hasattr(ns, "rel_area") and ns.rel_area is None:
        ns.rel_area = 0.05


def _make_config(factory, **kwargs):
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_gen_train(ns: argparse.Namespace) -> int:
    n = 100 if ns.n is None else int(ns.n)
    cfg = _make_config(
        DatasetConfig, n_images=n, resolution=int(ns.resolution), seed=int(ns.seed)
    )
    out = Path(ns.out)
    resolved = {
        "command": "gen-train", "out": str(out), "n_images": n,
        "resolution": cfg.resolution, "seed": cfg.seed,
    }
    training = _build_tree(out, lambda d: build_training_set(cfg, d), resolved)
    print(f"wrote {len(training.examples)} training pairs to {out}")
    return EXIT_OK


def cmd_gen_trials(ns: argparse.Namespace) -> int:
    n = 10 if ns.n is None else int(ns.n)
    cfg = _make_config(
        BatteryConfig,
        n_per_condition=n,
        rel_area=float(ns.rel_area),
        resolution=int(ns.resolution),
        include_nochange=bool(ns.include_nochange),
        seed=int(ns.seed),
    )
    out = Path(ns.out)
    resolved = {
        "command": "gen-trials", "out": str(out),
        "n_per_condition": cfg.n_per_condition, "rel_area": cfg.rel_area,
        "resolution": cfg.resolution,
        "include_nochange": cfg.include_nochange, "seed": cfg.seed,
    }
    battery = _build_tree(out, lambda d: build_battery(cfg, d), resolved)
    print(f"wrote {len(battery.trials)} trials to {out}")
    return EXIT_OK


def _check_external(observer) -> None:
    if isinstance(observer, ExternalObserver) and not Path(observer.directory).is_dir():
        raise MissingExternalMask(
            f"external mask directory {observer.directory} does not exist"
        )


def cmd_observe(ns: argparse.Namespace) -> int:
    battery = _load_battery(ns.battery)
    observer = make_observer(ns.observer)
    _check_external(observer)
    out = Path(ns.out)
    resolved = {
        "command": "observe", "battery": str(ns.battery),
        "observer": ns.observer, "out": str(out), "jobs": ns.jobs,
    }

    def build(target: Path):
        def one(trial):
            for role, mask_path in (("init", trial.init_path), ("out", trial.out_path)):
                mask = read_mask(mask_path)
                seen = observer.observe(mask, trial_id=trial.trial_id, role=role)
                write_mask(target / f"{trial.trial_id}_{role}.png", seen)

        _pmap(one, battery.trials, ns.jobs)

    _build_tree(out, build, resolved)
    print(f"wrote {2 * len(battery.trials)} masks to {out}")
    return EXIT_OK


def cmd_eval(ns: argparse.Namespace) -> int:
    battery = _load_battery(ns.battery)
    observer = make_observer(ns.observer)
    _check_external(observer)
    tau_grid = _parse_tau_grid(ns.tau_grid)
    records = _pmap(
        lambda t: score_trial(t, observer), battery.trials, ns.jobs
    )
    report = summarize(battery.battery_id, observer.spec, records, tau_grid)
    if ns.human_csv:
        report = report.with_fit(load_human_csv(ns.human_csv))
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_text_atomic(out / "report.json", report_json_str(report))
    _write_text_atomic(out / "rac_records.csv", records_csv(report))
    _write_text_atomic(out / "detection_curve.csv", curve_csv(report))
    _snapshot(
        out,
        {
            "command": "eval", "battery": str(ns.battery),
            "observer": ns.observer, "tau_grid": list(tau_grid),
            "human_csv": ns.human_csv, "out": str(out), "jobs": ns.jobs,
        },
    )
    means = ", ".join(f"{c}={v:.3f}" for c, v in sorted(report.mean_rac.items()))
    line = f"scored {len(records)} trials under {observer.spec}: mean RAC {means}"
    if report.tau_star is not None:
        line += f"; tau*={report.tau_star:g}% rmse={report.rmse_at_tau_star:.4f}"
    print(line)
    return EXIT_OK


def cmd_fit_tau(ns: argparse.Namespace) -> int:
    report = load_report(ns.report)
    human = load_human_csv(ns.human_csv)
    fitted = report.with_fit(human)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_text_atomic(
        out / "fit.json",
        json.dumps(
            {
                "battery_id": fitted.battery_id,
                "observer_spec": fitted.observer_spec,
                "tau_star_percent": fitted.tau_star,
                "rmse_at_tau_star": fitted.rmse_at_tau_star,
            },
            sort_keys=True,
            indent=2,
        )
        + "\n",
    )
    _snapshot(
        out,
        {
            "command": "fit-tau", "report": str(ns.report),
            "human_csv": str(ns.human_csv), "out": str(out),
        },
    )
    print(f"tau*={fitted.tau_star:g}% rmse={fitted.rmse_at_tau_star:.6f}")
    return EXIT_OK


def _epoch_sort_key(path: Path):
    match = re.search(r"(\d+)$", path.name)
    return (0, int(match.group(1)), path.name) if match else (1, 0, path.name)


def cmd_dynamics(ns: argparse.Namespace) -> int:
    battery = _load_battery(ns.battery)
    dirs = sorted((Path(d) for d in ns.epochs), key=_epoch_sort_key)
    for d in dirs:
        if not d.is_dir():
            raise OSError(f"epoch directory not found: {d}")
    rows = compute_dynamics(dirs, battery)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_text_atomic(out / "dynamics.csv", dynamics_csv(rows))
    _snapshot(
        out,
        {
            "command": "dynamics", "battery": str(ns.battery),
            "epochs": [str(d) for d in dirs], "out": str(out),
        },
    )
    for row in rows:
        cells = ", ".join(f"{c}={v:.3f}" for c, v in sorted(row.mean_rac.items()))
        print(f"{row.label}: {cells}")
    return EXIT_OK


def cmd_report(ns: argparse.Namespace) -> int:
    report = load_report(ns.report)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_text_atomic(out / "detection_curve.svg", svg_detection_curve(report))
    _write_text_atomic(out / "summary.md", summary_md(report))
    written = ["detection_curve.svg", "summary.md"]
    if ns.dynamics_csv:
        rows = load_dynamics_csv(ns.dynamics_csv)
        _write_text_atomic(out / "dynamics.svg", svg_dynamics(rows))
        written.append("dynamics.svg")
    _snapshot(
        out,
        {
            "command": "report", "report": str(ns.report),
            "dynamics_csv": ns.dynamics_csv, "out": str(out),
        },
    )
    print(f"wrote {', '.join(written)} to {out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbb",
        description="Generate polygon change-detection batteries, run "
        "coarse-shape observers, and score area-change sensitivity.",
    )
    sub = parser.add_subparsers(dest="subcommand", metavar="subcommand")

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="TOML config file (flags take precedence)")

    p = sub.add_parser("gen-train", help="materialize a training set")
    common(p)
    p.add_argument("--n", type=int, help="number of images (default 100)")
    p.add_argument("--resolution", type=int, help="image side in px (default 512)")
    p.add_argument("--seed", type=int, help="master seed (default CBB_SEED or 0)")
    p.set_defaults(func=cmd_gen_train)

    p = sub.add_parser("gen-trials", help="materialize an evaluation battery")
    common(p)
    p.add_argument("--n", type=int, help="trials per condition (default 10)")
    p.add_argument("--resolution", type=int, help="image side in px (default 512)")
    p.add_argument("--seed", type=int, help="master seed (default CBB_SEED or 0)")
    p.add_argument("--rel-area", type=float, dest="rel_area",
                   help="edit piece area as a fraction of the shape (default 0.05)")
    p.add_argument("--no-nochange", dest="include_nochange",
                   action="store_const", const=False,
                   help="skip the no-change condition")
    p.set_defaults(func=cmd_gen_trials)

    p = sub.add_parser("observe", help="run an observer over a battery, "
                       "writing its masks")
    p.add_argument("battery", help="battery directory or manifest path")
    common(p)
    p.add_argument("--observer",
                   help="exact | hull | closing:<r> | external:<dir>")
    p.add_argument("--jobs", type=int, help="parallel workers")
    p.set_defaults(func=cmd_observe)

    p = sub.add_parser("eval", help="score a battery under an observer")
    p.add_argument("battery", help="battery directory or manifest path")
    common(p)
    p.add_argument("--observer",
                   help="exact | hull | closing:<r> | external:<dir>")
    p.add_argument("--tau-grid", dest="tau_grid",
                   help="comma-separated percent thresholds")
    p.add_argument("--human-csv", dest="human_csv",
                   help="reference accuracies (condition,accuracy) to fit tau")
    p.add_argument("--jobs", type=int, help="parallel workers")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fit-tau", help="fit the detection threshold to "
                       "reference accuracies")
    p.add_argument("report", help="report.json from eval")
    common(p)
    p.add_argument("--human-csv", dest="human_csv", required=True,
                   help="reference accuracies (condition,accuracy)")
    p.set_defaults(func=cmd_fit_tau)

    p = sub.add_parser("dynamics", help="aggregate mean ratios over ordered "
                       "mask snapshots")
    p.add_argument("battery", help="battery directory or manifest path")
    p.add_argument("epochs", nargs="+", help="mask directories, one per snapshot")
    common(p)
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("report", help="render plots and a markdown summary")
    p.add_argument("report", help="report.json from eval")
    common(p)
    p.add_argument("--dynamics-csv", dest="dynamics_csv",
                   help="dynamics.csv to plot as well")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if not hasattr(ns, "func"):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        _resolve_common(ns)
        if hasattr(ns, "observer"):
            make_observer(ns.observer)  # surface spec typos as usage errors
        if hasattr(ns, "tau_grid"):
            _parse_tau_grid(ns.tau_grid)
    except (UsageError, ValueError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"cbb: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return ns.func(ns)
    except UsageError as exc:
        print(f"cbb: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GenerationFailed, NoSuitableSite) as exc:
        print(f"cbb: generation failed: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except (CbbError, OSError, ValueError) as exc:
        print(f"cbb: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
