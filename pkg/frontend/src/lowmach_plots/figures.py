"""Figure builders: log-log convergence panels and energy histories.

Rendering is bit-stable for fixed inputs and renderer version: the Agg
backend, a pinned svg hashsalt, and scrubbed date/software metadata.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import MissingQuantity  # noqa: E402
from . import reportio  # noqa: E402

plt.rcParams["svg.hashsalt"] = "lowmach-plots"

RATE_QUANTITIES = ("sup_rate_R", "u_combined", "sup_rate_div",
                   "sup_rel_energy")
_LABELS = {
    "sup_rate_R": "sup |R-1| (H^s)",
    "u_combined": "sup |u-u_ref|^2 (L2) + int |u-u_ref|^2 (H^1)",
    "sup_rate_div": "sup |div u| (H^(s-1))",
    "sup_rel_energy": "sup relative energy",
}


@dataclass(frozen=True)
class FigureSpec:
    """What to render: report path, quantity selection, guide-line slopes,
    output location and format."""

    report_path: str
    out_dir: str
    quantities: tuple = RATE_QUANTITIES
    guide_slopes: tuple = (1.0, 2.0)
    image_format: str = "svg"


def _save(fig, path, image_format):
    meta = {"Date": None} if image_format == "svg" else \
        {"Software": "lowmach-plots"}
    fig.savefig(path, format=image_format, metadata=meta)
    plt.close(fig)


def build_rates_figure(quantity, eps, values, slope_annotation,
                       guide_slopes=(1.0, 2.0)):
    """One log-log panel; returns (fig, annotation_text).

    The annotation quotes the report-stored slope to three decimals; the
    data arrays are exactly the file values.
    """
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.loglog(eps, values, "ko-", label=_LABELS.get(quantity, quantity))
    e0, v0 = eps[0], values[0]
    for g in guide_slopes:
        ax.loglog(eps, [v0 * (e / e0) ** g for e in eps], "--",
                  linewidth=0.8, label=f"slope {g:g} guide")
    text = f"slope {slope_annotation}"
    ax.annotate(text, xy=(0.05, 0.9), xycoords="axes fraction")
    ax.set_xlabel("Mach parameter")
    ax.set_ylabel(_LABELS.get(quantity, quantity))
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    return fig, text


def plot_rates(spec: FigureSpec):
    """Render one panel per selected quantity; returns the written paths
    keyed by quantity along with the annotation texts."""
    runs, slopes = reportio.parse_rate_report(spec.report_path)
    complete = [r for r in runs if r.get("status") == "ok"]
    if len(complete) < 2:
        raise MissingQuantity(
            f"report has {len(complete)} complete runs; need >= 2")
    os.makedirs(spec.out_dir, exist_ok=True)
    written = {}
    for quantity in spec.quantities:
        if any(quantity not in r for r in complete):
            raise MissingQuantity(f"quantity {quantity!r} not in report runs")
        if quantity not in slopes:
            raise MissingQuantity(f"no fitted slope for {quantity!r}")
        eps = [r["epsilon"] for r in complete]
        values = [r[quantity] for r in complete]
        annotation = f"{slopes[quantity]['slope']:.3f}"
        fig, text = build_rates_figure(quantity, eps, values, annotation,
                                       spec.guide_slopes)
        path = os.path.join(spec.out_dir,
                            f"rates_{quantity}.{spec.image_format}")
        _save(fig, path, spec.image_format)
        written[quantity] = (path, text)
    return written


TWOFLUID_CURVES = ("E_s", "F_s", "rel_energy")
REFERENCE_CURVES = ("kinetic_energy", "enstrophy")


def build_energy_figure(t, curves):
    """Time-history panel; curves is an ordered dict name -> values."""
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    for name, values in curves.items():
        ax.plot(t, values, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("energy functionals")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def plot_energy(run_dir, out_dir, image_format="svg"):
    """Render the energy history of a run directory (two-fluid or
    reference schema, auto-detected); returns (path, curve dict)."""
    csv_path = os.path.join(run_dir, "energy.csv")
    cols = reportio.read_csv_columns(csv_path)
    if "t" not in cols or not cols["t"]:
        raise MissingQuantity(f"{csv_path} has no time column")
    names = [c for c in TWOFLUID_CURVES if c in cols] or \
        [c for c in REFERENCE_CURVES if c in cols]
    if not names:
        raise MissingQuantity(
            f"{csv_path} has none of the known energy columns")
    curves = {name: cols[name] for name in names}
    fig = build_energy_figure(cols["t"], curves)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"energy.{image_format}")
    _save(fig, path, image_format)
    return path, curves
