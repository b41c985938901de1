"""Plot emission for an artifact directory: SVG charts rendered with
matplotlib plus standalone scripts that redraw them from the CSV files."""

from __future__ import annotations

import glob
import json
import os
import warnings
from pathlib import Path

import numpy as np

PLOTS = ("energy_loglog", "snapshots", "moments", "dissipation")


def _load_csv(path: Path):
    if not path.exists():
        return None
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data if data.size else None


def _figure():
    import matplotlib
    from matplotlib.figure import Figure

    matplotlib.rcParams["svg.hashsalt"] = "aggdiff"
    fig = Figure(figsize=(6, 4))
    return fig, fig.add_subplot(1, 1, 1)


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})


def envelope(t, gap, gamma: float, window: float = 0.5):
    """C_env (1+t)^(-1/gamma) pinned at the start of the last ``window`` of samples."""
    k0 = min(int(np.floor((1 - window) * len(t))), len(t) - 1)
    C = max(gap[k0], 0.0) * (1 + t[k0]) ** (1 / gamma)
    return C * (1 + np.asarray(t)) ** (-1 / gamma)


def _energy_plot(d, manifest, out):
    t, gap = d[:, 0], d[:, 3] - manifest["E_infty"]
    gamma = manifest["gamma"]
    fig, ax = _figure()
    keep = gap > 0
    ax.loglog(1 + t[keep], gap[keep], label="E - E_inf")
    ax.loglog(1 + t, envelope(t, gap, gamma), "--", label=f"(1+t)^(-1/{gamma:g})")
    ax.set_xlabel("1 + t")
    ax.set_ylabel("E - E_inf")
    ax.legend()
    _save(fig, out)


def _snapshot_plot(files, out):
    fig, ax = _figure()
    pick = files if len(files) <= 6 else [files[int(i)] for i in np.linspace(0, len(files) - 1, 6)]
    for f in pick:
        d = np.loadtxt(f, delimiter=",", skiprows=1, ndmin=2)
        ax.plot(d[:, 0], d[:, 1], label=Path(f).stem)
    ax.set_xlabel("x")
    ax.set_ylabel("rho")
    ax.legend(fontsize="small")
    _save(fig, out)


def _moment_plot(d, out):
    fig, ax = _figure()
    ax.plot(d[:, 0], d[:, 5], label="m1")
    if np.all(np.isfinite(d[:, 6])):
        ax.plot(d[:, 0], d[:, 6], label="m_phi")
    ax.set_xlabel("t")
    ax.legend()
    _save(fig, out)


def _dissipation_plot(d, out):
    fig, ax = _figure()
    pos = d[:, 1] > 0
    ax.semilogy(d[pos, 0], d[pos, 1], label="dissipation")
    pos = d[:, 2] > 0
    ax.semilogy(d[pos, 0], d[pos, 2], "--", label="calibrated floor")
    ax.set_xlabel("t")
    ax.legend()
    _save(fig, out)


SCRIPT_HEAD = '''import os
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
TRAJ = os.path.join(HERE, "trajectory")
'''

SCRIPTS = {
    "energy_loglog": SCRIPT_HEAD + '''GAMMA = {gamma!r}
E_INF = {E_infty!r}
d = np.loadtxt(os.path.join(TRAJ, "energy.csv"), delimiter=",", skiprows=1, ndmin=2)
t, gap = d[:, 0], d[:, 3] - E_INF
k0 = min(int(np.floor(0.5 * len(t))), len(t) - 1)
C = max(gap[k0], 0.0) * (1 + t[k0]) ** (1 / GAMMA)
keep = gap > 0
plt.loglog(1 + t[keep], gap[keep], label="E - E_inf")
plt.loglog(1 + t, C * (1 + t) ** (-1 / GAMMA), "--", label="envelope, slope -1/gamma")
plt.xlabel("1 + t")
plt.legend()
plt.savefig(os.path.join(HERE, "energy_loglog.png"))
''',
    "snapshots": SCRIPT_HEAD + '''import glob
files = sorted(glob.glob(os.path.join(TRAJ, "snapshot_t*.csv")),
               key=lambda f: int(os.path.basename(f)[10:-4]))
step = max(1, len(files) // 6)
for f in files[::step]:
    d = np.loadtxt(f, delimiter=",", skiprows=1, ndmin=2)
    plt.plot(d[:, 0], d[:, 1], label=os.path.basename(f)[:-4])
plt.xlabel("x")
plt.legend(fontsize="small")
plt.savefig(os.path.join(HERE, "snapshots.png"))
''',
    "moments": SCRIPT_HEAD + '''d = np.loadtxt(os.path.join(TRAJ, "energy.csv"), delimiter=",", skiprows=1, ndmin=2)
plt.plot(d[:, 0], d[:, 5], label="m1")
plt.plot(d[:, 0], d[:, 6], label="m_phi")
plt.xlabel("t")
plt.legend()
plt.savefig(os.path.join(HERE, "moments.png"))
''',
    "dissipation": SCRIPT_HEAD + '''d = np.loadtxt(os.path.join(TRAJ, "dissipation_bound.csv"), delimiter=",", skiprows=1, ndmin=2)
plt.semilogy(d[:, 0], d[:, 1], label="dissipation")
plt.semilogy(d[:, 0], np.where(d[:, 2] > 0, d[:, 2], np.nan), "--", label="calibrated floor")
plt.xlabel("t")
plt.legend()
plt.savefig(os.path.join(HERE, "dissipation.png"))
''',
}


def emit_plots(artifact_dir, manifest: dict | None = None) -> list[str]:
    """Write <name>.svg and plot_<name>.py for each chart whose inputs exist.

    Missing or empty inputs skip that chart with a warning.  Returns the
    list of files written (relative names).
    """
    root = Path(artifact_dir)
    if manifest is None:
        mpath = root / "manifest.json"
        if mpath.exists():
            with open(mpath) as fh:
                manifest = json.load(fh)
        else:
            manifest = {}
    traj = root / "trajectory"
    energy = _load_csv(traj / "energy.csv")
    written = []

    def done(name):
        if "gamma" in manifest and "E_infty" in manifest:
            params = {"gamma": float(manifest["gamma"]), "E_infty": float(manifest["E_infty"])}
        else:
            params = {"gamma": float("nan"), "E_infty": 0.0}
        script = SCRIPTS[name].replace("{gamma!r}", repr(params["gamma"])).replace(
            "{E_infty!r}", repr(params["E_infty"]))
        (root / f"plot_{name}.py").write_text(script)
        written.extend([f"{name}.svg", f"plot_{name}.py"])

    if energy is None or "gamma" not in manifest or "E_infty" not in manifest:
        warnings.warn(f"{root}: energy series or manifest missing; skipping energy_loglog")
    else:
        _energy_plot(energy, manifest, root / "energy_loglog.svg")
        done("energy_loglog")

    snaps = sorted(glob.glob(str(traj / "snapshot_t*.csv")),
                   key=lambda f: int(os.path.basename(f)[10:-4]))
    if not snaps:
        warnings.warn(f"{root}: no snapshots; skipping snapshots")
    else:
        _snapshot_plot(snaps, root / "snapshots.svg")
        done("snapshots")

    if energy is None:
        warnings.warn(f"{root}: energy series missing; skipping moments")
    else:
        _moment_plot(energy, root / "moments.svg")
        done("moments")

    diss = _load_csv(traj / "dissipation_bound.csv")
    if diss is None:
        warnings.warn(f"{root}: dissipation bound series missing; skipping dissipation")
    else:
        _dissipation_plot(diss, root / "dissipation.svg")
        done("dissipation")
    return written
