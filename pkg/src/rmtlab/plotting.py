"""Deterministic SVG figures."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "rmtlab", "svg.fonttype": "none", "figure.figsize": (6.0, 4.0),
       "font.size": 9}


def _finish(fig, path):
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": "rmtlab"})
    plt.close(fig)
    data = buf.getvalue()
    with open(path, "wb") as fh:
        fh.write(data)
    return path


def _nonempty(*arrays):
    for a in arrays:
        if a is None or np.size(a) == 0:
            raise ValueError("empty series")


def density_overlay(path, E, rho, esd_edges=None, esd_values=None, label="rho_alpha"):
    _nonempty(E, rho)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        if esd_edges is not None and esd_values is not None:
            _nonempty(esd_values)
            w = np.diff(esd_edges)
            ax.bar(esd_edges[:-1], np.asarray(esd_values) / w, width=w, align="edge",
                   color="0.8", edgecolor="0.5", label="ESD", gid="esd")
        ax.plot(E, rho, color="C0", label=label, gid="density")
        ax.set_xlabel("E")
        ax.set_ylabel("density")
        ax.legend()
        return _finish(fig, path)


def spacing_histogram(path, spacings, reference=None, bins=40, s_max=4.0):
    """Histogram of ``spacings`` with the Wigner surmise path and an optional reference sample."""
    _nonempty(spacings)
    edges = np.linspace(0, s_max, bins + 1)
    s = np.linspace(0, s_max, 400)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.hist(spacings, edges, density=True, histtype="stepfilled", alpha=0.5, color="C0",
                label="ensemble", gid="spacings")
        if reference is not None:
            _nonempty(reference)
            ax.hist(reference, edges, density=True, histtype="step", color="C1",
                    label="GOE sample", gid="goe-spacings")
        ax.plot(s, np.pi * s / 2 * np.exp(-np.pi * s * s / 4), color="k", lw=1.0,
                label="Wigner surmise", gid="wigner-surmise")
        ax.set_xlabel("s")
        ax.set_ylabel("p(s)")
        ax.legend()
        return _finish(fig, path)


def heatmap(path, energies, etas, values, label="mean |m_N - m_alpha|"):
    values = np.asarray(values, dtype=float)
    _nonempty(energies, etas, values)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        im = ax.imshow(values, aspect="auto", origin="lower", cmap="viridis",
                       extent=(min(energies), max(energies), 0, len(etas)))
        ax.set_yticks(np.arange(len(etas)) + 0.5)
        ax.set_yticklabels([f"{e:.3g}" for e in etas])
        ax.set_xlabel("E")
        ax.set_ylabel("eta")
        fig.colorbar(im, ax=ax, label=label)
        return _finish(fig, path)


def scatter(path, x, y, bound=None, xlabel="eigenvalue", ylabel="sqrt(N) |u|_inf"):
    _nonempty(x, y)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.scatter(x, y, s=3, color="C0", gid="points")
        if bound is not None:
            ax.axhline(bound, color="C3", lw=1.0, gid="bound")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return _finish(fig, path)


def emit_svg(report: dict, kind: str, path):
    """Dispatch on ``kind`` in {density, spacing, heatmap, scatter}."""
    if not report:
        raise ValueError("empty report")
    if kind == "density":
        return density_overlay(path, report["E"], report["rho"], report.get("esd_edges"),
                               report.get("esd_values"))
    if kind == "spacing":
        return spacing_histogram(path, report["spacings"], report.get("reference"))
    if kind == "heatmap":
        return heatmap(path, report["energies"], report["etas"], report["values"])
    if kind == "scatter":
        return scatter(path, report["x"], report["y"], report.get("bound"))
    raise ValueError(f"unknown plot kind {kind!r}")
