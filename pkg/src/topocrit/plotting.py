"""Optional figure rendering for experiment outputs (needs matplotlib)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def render(spec: dict, path, title=None):
    kind = spec["kind"]
    fig, ax = plt.subplots(figsize=(4.5, 3.4), dpi=150)
    if kind == "band":
        ax.plot(spec["x"], spec["y"], lw=1.2)
        ax.set_xlabel("k")
        ax.set_ylabel("E+(k)")
    elif kind == "scaling":
        x, y = np.asarray(spec["x"], float), np.asarray(spec["y"], float)
        ax.loglog(x, y, "o", ms=4)
        fit = spec.get("fit")
        if fit is not None:
            xx = np.geomspace(x.min(), x.max(), 50)
            ax.loglog(xx, fit.predict(xx), "-", lw=1, label=f"slope {fit.exponent:.3f}")
            ax.legend(frameon=False)
        ax.set_xlabel(spec.get("xlabel", "L"))
        ax.set_ylabel(spec.get("ylabel", "F_Q"))
    elif kind == "phase":
        g = spec["grid"]
        x, y = spec["x"], spec["y"]
        im = ax.imshow(g.T, origin="lower", aspect="auto", interpolation="nearest",
                       extent=[x[0], x[-1], y[0], y[-1]])
        fig.colorbar(im, ax=ax, label="invariant")
        ax.set_xlabel(spec.get("xlabel", ""))
        ax.set_ylabel(spec.get("ylabel", ""))
    elif kind == "ghz":
        rows = np.asarray(spec["rows"], float)
        for N in np.unique(rows[:, 1]):
            sel = rows[:, 1] == N
            ax.loglog(rows[sel, 0], rows[sel, 8], "o-", ms=4, label=f"N={int(N)}")
        ax.set_xlabel("L")
        ax.set_ylabel("F_Q")
        ax.legend(frameon=False, fontsize=7)
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
