"""Offline figure rendering from the experiment CSV outputs.

Three figure kinds, all batch artifacts (matplotlib Agg, no display):

- ``learning_curve``: one mean line + one std band per policy label, from
  ``learning_curve.csv`` files (``step, mean_reward, std_reward``).  Several
  files under the same label are treated as seeds and aggregated.
- ``tracking``: velocity / pitch / height traces from a
  ``disturb_trace.csv`` (``t, v, v_d, pitch, height, fx``) with the desired
  velocity schedule overlaid and the force events marked.
- ``orbits``: per-leg joint phase portraits from an ``orbits.csv``
  (``t, leg, q_hip, qd_hip, q_knee, qd_knee``).

Inputs are never mutated; rendering identical inputs yields identical plot
geometry.  Schema violations raise :class:`SchemaError` naming the offending
column.
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

FIGURE_KINDS = ("learning_curve", "tracking", "orbits")

LEARNING_CURVE_COLUMNS = ("step", "mean_reward", "std_reward")
TRACKING_COLUMNS = ("t", "v", "v_d", "pitch", "height", "fx")
ORBITS_COLUMNS = ("t", "leg", "q_hip", "qd_hip", "q_knee", "qd_knee")

LEG_NAMES = ("FL", "FR", "BL", "BR")


class SchemaError(ValueError):
    """An input CSV does not match the documented schema."""

    def __init__(self, path, column: str, reason: str):
        self.column = column
        super().__init__(f"{path}: column {column!r} {reason}")


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    inputs: dict[str, tuple[Path, ...]]   # label -> CSV paths
    output: Path
    title: str = ""
    force_times: tuple[float, ...] = (12.0, 16.0)
    dpi: int = 150

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")
        for paths in self.inputs.values():
            for p in paths:
                if not Path(p).exists():
                    raise FileNotFoundError(p)


def read_table(path, columns) -> dict[str, np.ndarray]:
    """Parse a CSV with the exact expected header into float columns."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(path, columns[0], "missing (empty file)")
        for col in columns:
            if col not in header:
                raise SchemaError(path, col, "missing from header")
        extra = [c for c in header if c not in columns]
        if extra:
            raise SchemaError(path, extra[0], "not part of the schema")
        rows = list(reader)
    if not rows:
        raise SchemaError(path, columns[0], "has no data rows")
    out = {}
    for col in columns:
        j = header.index(col)
        try:
            out[col] = np.array([float(r[j]) for r in rows])
        except (ValueError, IndexError):
            raise SchemaError(path, col, "contains a non-numeric value")
    return out


def _render_learning_curve(spec: PlotSpec, ax) -> None:
    for label, paths in sorted(spec.inputs.items()):
        tables = [read_table(p, LEARNING_CURVE_COLUMNS) for p in paths]
        steps = tables[0]["step"]
        for t in tables[1:]:
            if t["step"].shape != steps.shape or np.any(t["step"] != steps):
                raise SchemaError(paths[0], "step",
                                  "differs across seed files of one label")
        means = np.stack([t["mean_reward"] for t in tables])
        if len(tables) > 1:
            mean = means.mean(axis=0)
            band = means.std(axis=0)
        else:
            mean = means[0]
            band = tables[0]["std_reward"]
        line, = ax.plot(steps, mean, label=label)
        ax.fill_between(steps, mean - band, mean + band,
                        color=line.get_color(), alpha=0.25, linewidth=0)
    ax.set_xlabel("training step")
    ax.set_ylabel("mean evaluation reward")
    ax.legend()


def _render_tracking(spec: PlotSpec, fig) -> None:
    (label, paths), = spec.inputs.items()
    t = read_table(paths[0], TRACKING_COLUMNS)
    axes = fig.subplots(3, 1, sharex=True)
    axes[0].plot(t["t"], t["v"], label=f"{label} velocity")
    axes[0].plot(t["t"], t["v_d"], linestyle="--", label="desired")
    axes[0].set_ylabel("velocity [m/s]")
    axes[0].legend()
    axes[1].plot(t["t"], t["pitch"])
    axes[1].set_ylabel("pitch [rad]")
    axes[2].plot(t["t"], t["height"])
    axes[2].set_ylabel("height [m]")
    axes[2].set_xlabel("time [s]")
    for ax in axes:
        for ft in spec.force_times:
            ax.axvline(ft, color="red", linestyle=":", linewidth=1.0)


def _render_orbits(spec: PlotSpec, fig) -> None:
    (_, paths), = spec.inputs.items()
    t = read_table(paths[0], ORBITS_COLUMNS)
    axes = fig.subplots(2, 2)
    for leg, ax in enumerate(axes.flat):
        sel = t["leg"] == leg
        if not np.any(sel):
            raise SchemaError(paths[0], "leg", f"has no rows for leg {leg}")
        ax.plot(t["q_hip"][sel], t["qd_hip"][sel], linewidth=0.8,
                label="hip")
        ax.plot(t["q_knee"][sel], t["qd_knee"][sel], linewidth=0.8,
                label="knee")
        ax.set_title(LEG_NAMES[leg])
        ax.set_xlabel("angle [rad]")
        ax.set_ylabel("rate [rad/s]")
    axes.flat[0].legend()


def render(spec: PlotSpec) -> Path:
    """Render the figure described by ``spec``; returns the output path."""
    fig = plt.figure(figsize=(8, 6))
    try:
        if spec.kind == "learning_curve":
            _render_learning_curve(spec, fig.subplots())
        elif spec.kind == "tracking":
            _render_tracking(spec, fig)
        else:
            _render_orbits(spec, fig)
        if spec.title:
            fig.suptitle(spec.title)
        fig.tight_layout()
        spec.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.output, dpi=spec.dpi)
    finally:
        plt.close(fig)
    return spec.output


def parse_inputs(pairs) -> dict[str, tuple[Path, ...]]:
    inputs: dict[str, list[Path]] = {}
    for pair in pairs:
        if "=" in pair:
            label, path = pair.split("=", 1)
        else:
            label, path = Path(pair).stem, pair
        inputs.setdefault(label, []).append(Path(path))
    return {k: tuple(v) for k, v in inputs.items()}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    ap.add_argument("--input", action="append", required=True,
                    metavar="[LABEL=]CSV",
                    help="input CSV; repeat to overlay/aggregate by label")
    ap.add_argument("--out", type=Path, required=True,
                    help="output image path")
    ap.add_argument("--title", default="")
    ap.add_argument("--force-times", type=float, nargs="*",
                    default=[12.0, 16.0],
                    help="disturbance marker times for the tracking figure")
    args = ap.parse_args(argv)
    spec = PlotSpec(kind=args.kind, inputs=parse_inputs(args.input),
                    output=args.out, title=args.title,
                    force_times=tuple(args.force_times))
    print(render(spec))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
