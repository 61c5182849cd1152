"""Numerical stability certificate and inequality monitors.

The coupled error vector V_t stacks the consensus error, the tracking
error, the optimality gap of the weighted average, and the hybrid gradient
estimation error. A 4x4 nonnegative matrix M(alpha) bounds the one-round
transition of V_t; the certificate constructs a positive vector delta and
step-size bounds B1-B3 such that M(alpha) delta < delta componentwise,
which pins the spectral radius below one. The monitors replay recorded
trajectories (seed-averaged) against the individual inequalities that the
certificate is assembled from, and against the assembled system itself.

One deliberate correction to the printed uniform constants: the (3,3)
entry of M must dominate the per-round factor 1 - alpha*mu*n*phi^T pi, so
m11 uses the uniform lower bound eta of phi^T pi (m11 = mu*n*eta). The
uniform zeta/nu constants use the loose (c*varphi + varphi)^2 <=
4*varphi^2 envelope; the tighter per-round values are kept for audit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import AnalysisError, CertificateError, ConfigError, DiagnosticsError
from .network import GraphStats, MixingPair, ProbSequences

V_LABELS = ("consensus2", "tracking2", "opt2", "gradest2")

MONITOR_NAMES = (
    "sum_tracker_bound",
    "tracker_weighted_norm_bound",
    "consensus_contraction",
    "decision_step_bound",
    "hybrid_step_bound",
    "tracking_contraction",
    "gradient_error_contraction",
    "coupled_system",
)


@dataclass(frozen=True)
class ContractionParams:
    """Uniform mixing-contraction constants plus per-round audit values.

    c and tau bound the row/column mixing contraction factors, eta lower
    bounds phi_t^T pi_t, psi/kappa/varphi/gamma upper bound the per-round
    weight-derived scalars, and zeta/nu are the tighter per-round-envelope
    forms of the derived constants (the certificate itself rebuilds the
    looser uniform forms). zeta0 is the free split parameter of the
    gradient-error recursion; None defers to the certificate default.
    """

    c: float
    tau: float
    eta: float
    psi: float
    kappa: float
    varphi: float
    gamma: float
    zeta: float
    nu: float
    a_min: float
    b_min: float
    L_g: float
    zeta0: float | None
    per_round: dict

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise CertificateError(f"row contraction c={self.c} outside (0, 1)")
        if not 0.0 < self.tau < 1.0:
            raise CertificateError(f"column contraction tau={self.tau} outside (0, 1)")
        if not 0.0 < self.eta <= 1.0:
            raise CertificateError(f"eta={self.eta} outside (0, 1]")
        if self.kappa < 1.0 or self.varphi < 1.0:
            raise CertificateError("kappa and varphi must be at least 1")


def measure_contraction(
    pairs: Sequence[MixingPair],
    seqs: ProbSequences,
    stats: Sequence[GraphStats],
    L_g: float = 1.0,
    zeta0: float | None = None,
) -> ContractionParams:
    """Evaluate the per-round contraction formulas and their uniform bounds.

    Per round t: c_t^2 = 1 - min(phi_{t+1}) a^2 / (max(phi_t)^2 D_t K_t)
    and tau_t^2 = 1 - min(pi_t)^2 b^2 / (max(pi_t)^2 max(pi_{t+1}) D_t K_t),
    with a, b the smallest positive mixing weights over the horizon.
    """
    T = len(pairs)
    if T == 0 or len(stats) < T or seqs.phi.shape[0] < T + 1:
        raise ConfigError("measure_contraction needs pairs, stats, and phi/pi tables")
    a = min(p.a_min for p in pairs)
    b = min(p.b_min for p in pairs)
    phi, pi = seqs.phi, seqs.pi

    varphi_t = np.sqrt(1.0 / phi.min(axis=1))
    kappa_t = np.sqrt(1.0 / pi.min(axis=1))
    psi_t = kappa_t**2
    gamma_t = np.sqrt((phi * pi).max(axis=1))

    c_t = np.empty(T)
    tau_t = np.empty(T)
    for t in range(T):
        d_k = stats[t].diameter * stats[t].max_edge_utility
        c_sq = 1.0 - phi[t + 1].min() * a**2 / (phi[t].max() ** 2 * d_k)
        tau_sq = 1.0 - (pi[t].min() ** 2 * b**2) / (
            pi[t].max() ** 2 * pi[t + 1].max() * d_k
        )
        if not 0.0 < c_sq < 1.0 or not 0.0 < tau_sq < 1.0:
            raise CertificateError(
                f"contraction factor outside (0,1) at round {t}: "
                f"c^2={c_sq:.6g}, tau^2={tau_sq:.6g}"
            )
        c_t[t] = math.sqrt(c_sq)
        tau_t[t] = math.sqrt(tau_sq)

    c = float(c_t.max())
    tau = float(tau_t.max())
    eta = float(np.sum(phi * pi, axis=1).min())

    # tighter per-round forms of the derived constants, kept for audit
    nu_t = (
        6.0
        * L_g**2
        * (c * varphi_t[1 : T + 1] + 1.0) ** 2
        * gamma_t[:T] ** 2
        * tau**2
        * psi_t[:T]
        / (1.0 - tau)
    )
    zeta_t = (
        6.0
        * L_g**2
        * (c * varphi_t[1 : T + 1] + varphi_t[:T]) ** 2
        * tau**2
        * psi_t[:T]
        / (1.0 - tau)
    )

    return ContractionParams(
        c=c,
        tau=tau,
        eta=eta,
        psi=float(psi_t.max()),
        kappa=float(kappa_t.max()),
        varphi=float(varphi_t.max()),
        gamma=float(gamma_t.max()),
        zeta=float(zeta_t.max()),
        nu=float(nu_t.max()),
        a_min=a,
        b_min=b,
        L_g=L_g,
        zeta0=zeta0,
        per_round={
            "c_t": c_t,
            "tau_t": tau_t,
            "gamma_t": gamma_t[:T],
            "psi_t": psi_t[:T],
            "kappa_t": kappa_t[:T],
            "varphi_t": varphi_t[: T + 1],
            "zeta_t": zeta_t,
            "nu_t": nu_t,
            "phi_dot_pi": np.sum(phi * pi, axis=1)[: T + 1],
        },
    )


def default_zeta0(beta: float, static: bool = False) -> float:
    if static:
        return 0.0
    if not 0.0 < beta < 1.0:
        raise ConfigError(
            f"the certificate needs beta in (0, 1), got beta={beta}"
        )
    return min(0.5 * (1.0 / (1.0 - beta) ** 2 - 1.0), 1.0)


def m_constants(
    beta: float,
    params: ContractionParams,
    n: int,
    mu: float,
    L_g: float,
    zeta0: float | None = None,
) -> dict:
    """Uniform coefficients m0..m16 of the transition matrix M(alpha)."""
    if mu <= 0 or L_g <= 0:
        raise ConfigError("m constants need positive mu and L_g")
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"beta must be in [0, 1], got {beta}")
    if zeta0 is None:
        zeta0 = params.zeta0 if params.zeta0 is not None else default_zeta0(beta)
    if zeta0 < 0 or (beta < 1.0 and zeta0 >= 1.0 / (1.0 - beta) ** 2 - 1.0):
        if zeta0 != 0.0:
            raise ConfigError(
                f"zeta0={zeta0} outside [0, 1/(1-beta)^2 - 1) for beta={beta}"
            )
    c, tau = params.c, params.tau
    varphi, psi, eta = params.varphi, params.psi, params.eta
    one_minus_tau = 1.0 - tau
    zeta = 24.0 * L_g**2 * varphi**2 * tau**2 * psi / one_minus_tau
    nu = 6.0 * L_g**2 * (c * varphi + 1.0) ** 2 * tau**2 * psi / one_minus_tau
    cc = c**2 * (1.0 + c**2) / (1.0 - c**2)
    m13 = 24.0 * (1.0 - beta) ** 2 * L_g**2 * (c * varphi + 1.0) ** 2
    return {
        "m0": (1.0 - beta) ** 2 * (1.0 + zeta0),
        "m1": 2.0 * n * L_g**2 * varphi**2 * cc,
        "m2": cc,
        "m3": 2.0 * n * cc,
        "m4": zeta,
        "m5": nu,
        "m6": 2.0 * n * L_g**2 * nu,
        "m7": 3.0 * psi * beta**2 * tau**2 / one_minus_tau,
        "m8": 2.0 * n * nu,
        "m9": 4.0 * L_g**2 * varphi**2 / mu,
        "m10": 4.0 / (mu * n * eta),
        # uniform (3,3) coefficient: must dominate mu*n*phi^T pi from below
        "m11": mu * n * eta,
        "m12": 4.0 / mu,
        "m13": m13,
        "m14": 24.0 * (1.0 - beta) ** 2 * L_g**2 * varphi**2 * (1.0 + c) ** 2,
        "m15": 2.0 * n * L_g**2 * varphi**2 * m13,
        "m16": 2.0 * n * m13,
        "zeta0": zeta0,
    }


def build_M(
    alpha: float,
    beta: float,
    params: ContractionParams,
    n: int,
    mu: float,
    L_g: float,
    zeta0: float | None = None,
) -> np.ndarray:
    """Assemble the 4x4 transition bound M(alpha)."""
    m = m_constants(beta, params, n, mu, L_g, zeta0)
    c, tau = params.c, params.tau
    a2 = alpha**2
    return np.array(
        [
            [
                (1.0 + c**2) / 2.0 + a2 * m["m1"],
                a2 * m["m2"],
                a2 * m["m1"],
                a2 * m["m3"],
            ],
            [
                m["m4"] + a2 * m["m6"],
                tau + a2 * m["m5"],
                a2 * m["m6"],
                m["m7"] + a2 * m["m8"],
            ],
            [
                alpha * m["m9"],
                alpha * m["m10"],
                1.0 - alpha * m["m11"],
                alpha * m["m12"],
            ],
            [
                m["m14"] + a2 * m["m15"],
                a2 * m["m13"],
                a2 * m["m15"],
                m["m0"] + a2 * m["m16"],
            ],
        ]
    )


def spectral_radius_power(
    M: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    v0: np.ndarray | None = None,
    squarings: int = 6,
) -> float:
    """Dominant eigenvalue of a nonnegative matrix by power iteration.

    The matrix is first powered up by repeated squaring (with rescaling)
    so nearly degenerate spectra still separate within the iteration cap;
    the 2^squarings-th root restores rho(M). Iteration stops when the
    Collatz-Wielandt bracket min_i (Pv)_i/v_i <= rho(P) <= max_i (Pv)_i/v_i
    closes to the relative tolerance, which is sound for any positive
    start. ``v0`` seeds the iteration.
    """
    if (M < 0).any():
        raise ConfigError("power iteration expects a nonnegative matrix")
    power = 1 << squarings
    P = np.array(M, dtype=np.float64)
    log_scale = 0.0
    for _ in range(squarings):
        P = P @ P
        peak = float(P.max())
        if peak <= 0.0:
            return 0.0
        log_scale = 2.0 * log_scale + math.log(peak)
        P /= peak
    if v0 is not None and (np.asarray(v0) > 0).all():
        v = np.asarray(v0, dtype=np.float64)
    else:
        v = np.ones(M.shape[0])
    v = v / v.max()
    lo = hi = 0.0
    for _ in range(max_iter):
        w = P @ v
        if (w <= 0.0).any():
            # reducible corner case: keep the iterate strictly positive
            w = w + 1e-300
        ratios = w / v
        lo, hi = float(ratios.min()), float(ratios.max())
        if hi <= 0.0:
            return 0.0
        if hi - lo <= tol * hi:
            mid = 0.5 * (lo + hi)
            return math.exp((math.log(mid) + log_scale) / power)
        v = w / w.max()
    raise AnalysisError(
        f"power iteration bracket did not close in {max_iter} steps "
        f"(width {hi - lo:.3e})"
    )


def _balance(M: np.ndarray, sweeps: int = 8) -> np.ndarray:
    """Diagonal similarity scaling equalizing row and column norms."""
    B = np.array(M, dtype=np.float64)
    for _ in range(sweeps):
        rows = np.linalg.norm(B, axis=1)
        cols = np.linalg.norm(B, axis=0)
        scale = np.sqrt(np.where(rows > 0, cols / np.maximum(rows, 1e-300), 1.0))
        scale = np.where((rows > 0) & (cols > 0), scale, 1.0)
        B = B * scale[:, None] / scale[None, :]
    return B


def spectral_radius_charpoly(
    M: np.ndarray, scale: np.ndarray | None = None, with_error: bool = False
):
    """Spectral radius via the quartic characteristic polynomial.

    The matrix is first balanced by a diagonal similarity (eigenvalues
    unchanged) so wildly scaled entries do not poison the coefficients,
    which come from the Faddeev-LeVerrier trace identities; the roots come
    from numpy's companion-matrix solver. ``scale`` supplies a known good
    balancing vector (e.g. the certificate's delta). With ``with_error``
    the achievable accuracy of the dominant root is returned as well
    (coefficient rounding divided by the root's derivative conditioning;
    clustered spectra near 1 cannot be resolved better than that).
    """
    if M.shape != (4, 4):
        raise ConfigError("charpoly route is specific to the 4x4 system")
    if scale is not None and (np.asarray(scale) > 0).all():
        d = np.asarray(scale, dtype=np.float64)
        B = M / d[:, None] * d[None, :]
    else:
        B = M
    B = _balance(B)
    t1 = float(np.trace(B))
    B2 = B @ B
    t2 = float(np.trace(B2))
    t3 = float(np.trace(B2 @ B))
    coeffs = np.array(
        [
            1.0,
            -t1,
            (t1**2 - t2) / 2.0,
            -(t1**3 - 3.0 * t1 * t2 + 2.0 * t3) / 6.0,
            float(np.linalg.det(B)),
        ]
    )
    roots = np.roots(coeffs)
    k = int(np.argmax(np.abs(roots)))
    rho = float(np.abs(roots[k]))
    if not with_error:
        return rho
    deriv = np.prod([roots[k] - roots[j] for j in range(4) if j != k])
    powers = np.abs(roots[k]) ** np.arange(4, -1, -1)
    coeff_noise = 8.0 * np.finfo(float).eps * float(np.abs(coeffs) @ powers)
    err = coeff_noise / max(abs(deriv), 1e-300)
    return rho, float(err)


@dataclass(frozen=True)
class StabilityCertificate:
    """Certified step size with its supporting algebra.

    bounds holds (B1, B2, B3, gd_bound) where gd_bound = 2/(n(mu+L_g)eta);
    alpha is the certified step size (safety factor applied), delta the
    positive vector with M(alpha) delta < delta, rho the verified spectral
    radius. steady_state is filled by the static-case bound.
    """

    M: np.ndarray
    m_consts: dict
    delta: np.ndarray
    bounds: tuple
    alpha: float
    rho: float
    params: ContractionParams
    n: int
    mu: float
    L_g: float
    beta: float
    zeta0: float
    static: bool
    steady_state: np.ndarray | None = None


def certify_step_size(
    params: ContractionParams,
    n: int,
    mu: float,
    L_g: float,
    beta: float,
    zeta0: float | None = None,
    static: bool = False,
    safety: float = 0.9,
    rho_agree_tol: float = 1e-8,
) -> StabilityCertificate:
    """Construct delta and the step-size bounds, then verify the certificate.

    delta_1 = 1, delta_4 = 2 m14/(1-m0), delta_2 = (2/(1-tau))(m4 +
    2 m7 m14/(1-m0)), delta_3 = (2/m11)(m9 + m10 delta_2 + m12 delta_4);
    the certified alpha is safety * min(B1, B2, B3, 2/(n(mu+L_g)eta)).
    Verification failure raises CertificateError (it indicates a formula
    transcription bug, not a property of the inputs).
    """
    if not 0.0 < beta < 1.0:
        raise ConfigError(
            f"certificate requires beta in (0, 1), got beta={beta}"
        )
    if zeta0 is None:
        zeta0 = (
            params.zeta0
            if params.zeta0 is not None
            else default_zeta0(beta, static=static)
        )
    m = m_constants(beta, params, n, mu, L_g, zeta0)
    if m["m0"] >= 1.0:
        raise ConfigError(
            f"m0={m['m0']:.6g} >= 1; pick a smaller zeta0 or larger beta"
        )
    tau = params.tau
    c = params.c
    d1 = 1.0
    d4 = 2.0 * m["m14"] / (1.0 - m["m0"])
    d2 = (2.0 / (1.0 - tau)) * (m["m4"] + 2.0 * m["m7"] * m["m14"] / (1.0 - m["m0"]))
    d3 = (2.0 / m["m11"]) * (m["m9"] + m["m10"] * d2 + m["m12"] * d4)
    delta = np.array([d1, d2, d3, d4])
    if not (delta > 0).all():
        raise CertificateError(f"delta is not positive: {delta}")

    b1 = math.sqrt(
        (1.0 - c**2)
        * d1
        / (2.0 * (m["m1"] * d1 + m["m2"] * d2 + m["m1"] * d3 + m["m3"] * d4))
    )
    b2 = math.sqrt(
        (m["m4"] * d1 + m["m7"] * d4)
        / (m["m6"] * d1 + m["m5"] * d2 + m["m6"] * d3 + m["m8"] * d4)
    )
    b3 = math.sqrt(
        m["m14"]
        * d1
        / (m["m15"] * d1 + m["m13"] * d2 + m["m15"] * d3 + m["m16"] * d4)
    )
    gd_bound = 2.0 / (n * (mu + L_g) * params.eta)
    alpha = safety * min(b1, b2, b3, gd_bound)

    M = build_M(alpha, beta, params, n, mu, L_g, zeta0)
    lhs = M @ delta
    if not (lhs < delta).all():
        raise CertificateError(
            f"M(alpha) delta < delta violated at alpha={alpha:.6g}: "
            f"{lhs} vs {delta}"
        )
    rho = spectral_radius_power(M, v0=delta)
    rho_check, rho_check_err = spectral_radius_charpoly(
        M, scale=delta, with_error=True
    )
    if abs(rho - rho_check) > max(rho_agree_tol, 10.0 * rho_check_err):
        raise CertificateError(
            f"spectral radius routes disagree: {rho:.12g} vs {rho_check:.12g} "
            f"(companion route resolvable to {rho_check_err:.2e})"
        )
    if rho >= 1.0:
        raise CertificateError(f"rho(M(alpha))={rho:.6g} >= 1 at certified alpha")
    return StabilityCertificate(
        M=M,
        m_consts=m,
        delta=delta,
        bounds=(b1, b2, b3, gd_bound),
        alpha=alpha,
        rho=rho,
        params=params,
        n=n,
        mu=mu,
        L_g=L_g,
        beta=beta,
        zeta0=zeta0,
        static=static,
    )


def corollary_steady_state(
    cert: StabilityCertificate, beta: float, sigma2: float, n: int
) -> np.ndarray:
    """Static-case limiting bound (I - M)^-1 b with b proportional to beta^2 sigma^2."""
    rho = spectral_radius_power(cert.M, v0=cert.delta)
    if rho >= 1.0:
        raise CertificateError(f"steady state needs rho < 1, got {rho:.6g}")
    tau, psi = cert.params.tau, cert.params.psi
    b = np.array(
        [
            0.0,
            2.0 * n * tau**2 * psi * beta**2 * sigma2 / (1.0 - tau),
            0.0,
            2.0 * n * beta**2 * sigma2,
        ]
    )
    eye = np.eye(4)
    try:
        out = np.linalg.solve(eye - cert.M, b)
    except np.linalg.LinAlgError as exc:
        raise CertificateError("I - M(alpha) is singular") from exc
    if (out < -1e-12 * max(1.0, float(np.abs(out).max()))).any():
        raise CertificateError(f"steady-state bound has negative entries: {out}")
    return np.maximum(out, 0.0)


def attach_steady_state(
    cert: StabilityCertificate, beta: float, sigma2: float, n: int
) -> StabilityCertificate:
    return replace(cert, steady_state=corollary_steady_state(cert, beta, sigma2, n))


# ---------------------------------------------------------------------------
# inequality monitors


@dataclass
class MonitorTrace:
    """Seed-averaged per-round expectations of the monitored quantities.

    Arrays are indexed by round; dx2/dz2 hold the squared step norms of
    the transition recorded at the departing round. phi/pi are the shared
    weight tables of the (common) topology realization.
    """

    consensus2: np.ndarray
    tracking2: np.ndarray
    opt2: np.ndarray
    gradest2: np.ndarray
    sum_y2: np.ndarray
    y_pinv2: np.ndarray
    dx2: np.ndarray
    dz2: np.ndarray
    q: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    pi: np.ndarray
    n_replicas: int

    @classmethod
    def from_results(cls, results: Sequence) -> "MonitorTrace":
        if not results:
            raise DiagnosticsError("no run results supplied")
        first = results[0]
        if first.trace is None or first.seqs is None:
            raise DiagnosticsError("runs must be executed with collect_trace=True")
        for r in results[1:]:
            if not np.array_equal(r.seqs.phi, first.seqs.phi):
                raise DiagnosticsError(
                    "monitor replicas must share one topology realization"
                )
        keys = (
            "consensus2",
            "tracking2",
            "opt2",
            "gradest2",
            "sum_y2",
            "y_pinv2",
            "dx2",
            "dz2",
            "q",
            "p",
        )
        stacked = {
            k: np.mean([r.trace[k] for r in results], axis=0) for k in keys
        }
        return cls(
            **stacked,
            phi=first.seqs.phi,
            pi=first.seqs.pi,
            n_replicas=len(results),
        )


@dataclass(frozen=True)
class MonitorCheck:
    name: str
    n_checked: int
    worst_ratio: float
    violations: tuple


@dataclass(frozen=True)
class MonitorReport:
    checks: dict
    slack: float

    @property
    def clean(self) -> bool:
        return all(not chk.violations for chk in self.checks.values())

    def summary(self) -> str:
        lines = [f"inequality monitors (slack {self.slack:g})"]
        for name, chk in self.checks.items():
            status = "ok" if not chk.violations else f"{len(chk.violations)} violations"
            lines.append(
                f"  {name:<30s} worst LHS/RHS {chk.worst_ratio:9.4f} "
                f"over {chk.n_checked} rounds: {status}"
            )
        return "\n".join(lines)


def _scan(name, lhs, rhs, slack, atol=1e-12):
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    ratios = lhs / np.maximum(rhs, 1e-300)
    bad = lhs > slack * rhs + atol
    violations = tuple(
        (int(t), float(lhs[t]), float(rhs[t])) for t in np.nonzero(bad)[0]
    )
    worst = float(ratios.max()) if len(ratios) else 0.0
    return MonitorCheck(
        name=name, n_checked=len(lhs), worst_ratio=worst, violations=violations
    )


def lemma_monitors(
    trace: MonitorTrace,
    params: ContractionParams,
    alpha: float,
    beta: float,
    mu: float,
    L_g: float,
    sigma2: float,
    n: int,
    zeta0: float | None = None,
    slack: float = 1.1,
    min_replicas: int = 20,
    monitors: Sequence[str] | None = None,
) -> MonitorReport:
    """Check the recorded expectations against the certificate inequalities.

    Expectations are Monte-Carlo over seed replicas, so each inequality is
    enforced with a multiplicative slack. Monitors are diagnostics: the
    report lists violating rounds, it never raises on them.
    """
    if trace.n_replicas < min_replicas:
        raise DiagnosticsError(
            f"monitors need at least {min_replicas} replicas, got {trace.n_replicas}"
        )
    if zeta0 is None:
        zeta0 = (
            params.zeta0
            if params.zeta0 is not None
            else default_zeta0(beta, static=bool(np.all(trace.q == 0.0)))
        )
    if zeta0 == 0.0 and np.any(trace.q > 0.0):
        raise ConfigError("zeta0=0 is only valid when q_t is identically zero")
    selected = tuple(monitors) if monitors is not None else MONITOR_NAMES
    unknown = set(selected) - set(MONITOR_NAMES)
    if unknown:
        raise ConfigError(f"unknown monitors: {sorted(unknown)}")

    T = len(trace.consensus2)
    c, tau = params.c, params.tau
    varphi_t = np.sqrt(1.0 / trace.phi.min(axis=1))
    kappa_t = np.sqrt(1.0 / trace.pi.min(axis=1))
    gamma_t = np.sqrt((trace.phi * trace.pi).max(axis=1))

    cons = trace.consensus2
    S2 = trace.tracking2
    opt = trace.opt2
    ge = trace.gradest2
    q2 = trace.q**2
    vp2 = varphi_t[:T] ** 2
    vp_next = varphi_t[1 : T + 1]
    g2 = gamma_t[:T] ** 2
    mix = (c * vp_next + 1.0) ** 2
    mix_far = (c * vp_next + varphi_t[:T]) ** 2
    L2 = L_g**2

    checks: dict[str, MonitorCheck] = {}

    if "sum_tracker_bound" in selected:
        rhs = 2.0 * n * ge + 2.0 * L2 * n * vp2 * (opt + cons)
        checks["sum_tracker_bound"] = _scan(
            "sum_tracker_bound", trace.sum_y2, rhs, slack
        )
    if "tracker_weighted_norm_bound" in selected:
        rhs = 2.0 * n * ge + 2.0 * L2 * n * vp2 * (opt + cons) + S2
        checks["tracker_weighted_norm_bound"] = _scan(
            "tracker_weighted_norm_bound", trace.y_pinv2, rhs, slack
        )
    if "consensus_contraction" in selected:
        cc = c**2 * (1.0 + c**2) / (1.0 - c**2)
        rhs = (
            ((1.0 + c**2) / 2.0 + 2.0 * alpha**2 * cc * g2 * L2 * n * vp2) * cons
            + alpha**2 * cc * g2 * S2
            + 2.0 * alpha**2 * cc * g2 * L2 * n * vp2 * opt
            + 2.0 * alpha**2 * cc * g2 * n * ge
        )
        checks["consensus_contraction"] = _scan(
            "consensus_contraction", cons[1:], rhs[:-1], slack
        )
    if "decision_step_bound" in selected:
        rhs = (
            (2.0 * mix_far + 4.0 * alpha**2 * g2 * L2 * n * vp2 * mix) * cons
            + 4.0 * alpha**2 * g2 * mix * L2 * n * vp2 * opt
            + 4.0 * alpha**2 * g2 * mix * n * ge
            + 2.0 * alpha**2 * g2 * mix * S2
        )
        checks["decision_step_bound"] = _scan(
            "decision_step_bound", trace.dx2, rhs, slack
        )
    if "hybrid_step_bound" in selected:
        rhs = (
            (6.0 * L2 * mix_far + 12.0 * alpha**2 * L2**2 * n * vp2 * mix * g2) * cons
            + 12.0 * alpha**2 * L2**2 * n * vp2 * mix * g2 * opt
            + (12.0 * alpha**2 * L2 * n * mix * g2 + 3.0 * beta**2) * ge
            + 6.0 * alpha**2 * L2 * mix * g2 * S2
            + 6.0 * beta**2 * n * q2
            + 6.0 * beta**2 * n * sigma2
        )
        checks["hybrid_step_bound"] = _scan(
            "hybrid_step_bound", trace.dz2, rhs, slack
        )
    if "tracking_contraction" in selected:
        rhs = tau * S2 + tau**2 * kappa_t[:T] ** 2 / (1.0 - tau) * trace.dz2
        checks["tracking_contraction"] = _scan(
            "tracking_contraction", S2[1:], rhs[:-1], slack
        )
    if "gradient_error_contraction" in selected:
        m0 = (1.0 - beta) ** 2 * (1.0 + zeta0)
        drift = np.zeros(T)
        if zeta0 > 0:
            drift = (8.0 + 1.0 / zeta0) * n * (1.0 - beta) ** 2 * q2
        # the fresh-noise term carries 2*n*beta^2*sigma2: the factor 2 from
        # the Young split of beta*delta1 + (1-beta)(delta1-delta2), matching
        # the assembled-system constant
        rhs = (
            m0 * ge
            + drift
            + 2.0 * n * beta**2 * sigma2
            + 12.0 * (1.0 - beta) ** 2 * L2 * trace.dx2
        )
        checks["gradient_error_contraction"] = _scan(
            "gradient_error_contraction", ge[1:], rhs[:-1], slack
        )
    if "coupled_system" in selected:
        M = build_M(alpha, beta, params, n, mu, L_g, zeta0)
        V = np.stack([cons, S2, opt, ge], axis=1)
        k1 = 6.0 * n * beta**2 * tau**2 * params.psi / (1.0 - tau)
        k3 = (
            (8.0 + 1.0 / zeta0) * n * (1.0 - beta) ** 2 if zeta0 > 0 else 0.0
        )
        k2 = 4.0 / (mu * alpha * n * params.eta)
        b2 = np.array(
            [
                0.0,
                6.0 * n * tau**2 * params.psi * beta**2 * sigma2 / (1.0 - tau),
                0.0,
                2.0 * n * beta**2 * sigma2,
            ]
        )
        rhs = V[:-1] @ M.T + b2
        rhs[:, 1] += k1 * q2[:-1]
        rhs[:, 2] += k2 * trace.p[:-1] ** 2
        rhs[:, 3] += k3 * q2[:-1]
        lhs = V[1:]
        checks["coupled_system"] = _scan(
            "coupled_system", lhs.ravel(), rhs.ravel(), slack
        )

    return MonitorReport(checks=checks, slack=slack)
