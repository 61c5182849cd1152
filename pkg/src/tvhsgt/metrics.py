"""Per-round performance and error quantities.

Conventions: the consensus error is the phi-weighted squared deviation from
the phi-weighted average iterate, the tracking error is the pi-scaled
deviation of the trackers from their network sum, and time-averaged regret
divides the running regret sum by the number of elapsed rounds (t+1 for
0-based t). Regularity series are forward differences; the last round of a
run has no successor and reports 0.0.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

CSV_COLUMNS = (
    "t",
    "regret_inc",
    "regret_avg",
    "consensus2",
    "tracking2",
    "opt2",
    "gradest2",
    "q_t",
    "p_t",
    "loss",
    "accuracy",
)


@dataclass(frozen=True)
class RoundMetrics:
    """CSV row for one round, in the pinned column order."""

    t: int
    regret_inc: float
    regret_avg: float
    consensus2: float
    tracking2: float
    opt2: float
    gradest2: float
    q_t: float
    p_t: float
    loss: float
    accuracy: float

    def as_row(self) -> str:
        parts = [str(self.t)]
        for f in fields(self)[1:]:
            parts.append(format(getattr(self, f.name), ".17g"))
        return ",".join(parts)


def weighted_average(xs: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Convex combination sum_i phi_i x_i of the stacked iterates (n, d)."""
    if xs.shape[0] != phi.shape[0]:
        raise ValueError(
            f"{xs.shape[0]} iterates but {phi.shape[0]} weights"
        )
    return phi @ xs


def consensus_error(xs: np.ndarray, phi: np.ndarray) -> float:
    """Squared phi-weighted consensus error sum_i phi_i ||x_i - x_hat||^2."""
    x_hat = weighted_average(xs, phi)
    dev = xs - x_hat
    return float(phi @ np.sum(dev * dev, axis=1))


def tracking_error(ys: np.ndarray, pi: np.ndarray) -> float:
    """Squared tracking error sum_i pi_i ||y_i/pi_i - sum_j y_j||^2."""
    if np.any(pi <= 0):
        raise ValueError("tracking error needs strictly positive pi")
    total = ys.sum(axis=0)
    dev = ys / pi[:, None] - total
    return float(pi @ np.sum(dev * dev, axis=1))


def regret_accumulate(increments: np.ndarray) -> tuple[float, np.ndarray]:
    """Cumulative dynamic regret and its running time average."""
    increments = np.asarray(increments, dtype=np.float64)
    cum = np.cumsum(increments)
    averaged = cum / np.arange(1, len(increments) + 1)
    return float(cum[-1]) if len(increments) else 0.0, averaged


def optimum_path_lengths(optima: np.ndarray) -> np.ndarray:
    """p_t = ||x*_{t+1} - x*_t||, with 0.0 in the terminal slot."""
    out = np.zeros(optima.shape[0])
    if optima.shape[0] > 1:
        out[:-1] = np.linalg.norm(np.diff(optima, axis=0), axis=1)
    return out


def regularity(
    optima: np.ndarray, q_estimates: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Aligned (p_t, q_t) series for a run."""
    p = optimum_path_lengths(optima)
    q = np.asarray(q_estimates, dtype=np.float64)
    if q.shape != p.shape:
        raise ValueError("q series length must match the optimum track")
    return p, q


def rows_to_csv(rows) -> str:
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(r.as_row() for r in rows)
    return "\n".join(lines) + "\n"
