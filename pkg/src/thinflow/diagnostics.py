"""Norm functionals along trajectories and numerical inequality verification.

A trajectory is summarized by the scalar functionals of the velocity split
u = r + s + w (horizontal/vertical parts of the vertical average, plus the
oscillatory remainder):

    theta = ||u||_2,  chi = ||D^2 w||_2,
    planar family:  phi = ||D r||_2,              psi = ||D s||_2,
    full family:    phi = sqrt(||D r||^2 + ||D w||^2),
                    psi = sqrt(||D s||^2 + ||D w||^2),

with tilde variants using D^2.  The full-family definitions reduce to the
planar ones when w = 0.  Differential inequalities between these quantities
are verified post hoc: time derivatives are estimated by second-order
finite differences and the unknown constants are fitted by a Chebyshev
(max-residual) linear program, so verdicts are reproducible.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import ifft2
from scipy.optimize import linprog

from .spectral import (
    DomainSpec,
    SpectralField,
    divergence_defect,
    inner_l2,
    ksq_grid,
    load_checkpoint,
    norm_ds,
    norm_l2,
)

__all__ = [
    "DiagnosticSeries",
    "SeriesBuilder",
    "InequalityReport",
    "RegularityBoundsReport",
    "REGIMES",
    "sample_functionals",
    "compute_series",
    "check_enstrophy_miracle",
    "s_transport_residual",
    "check_diff_inequalities",
    "fit_shared_constants",
    "evaluate_regularity_bounds",
    "energy_budget",
    "energy_identity_residuals",
    "write_residual_traces",
    "reports_to_json",
]

#: CSV schema: leading columns are fixed; the planar-family extras follow.
CSV_COLUMNS = [
    "t",
    "theta",
    "phi",
    "psi",
    "phi_tilde",
    "psi_tilde",
    "chi",
    "h1",
    "h2",
    "F",
    "phi_2d",
    "psi_2d",
    "phi_tilde_2d",
    "psi_tilde_2d",
]


@dataclass(frozen=True)
class DiagnosticSeries:
    """Time-indexed norm functionals of a run.

    phi/psi and their tilde variants are the full-family definitions; the
    _2d arrays hold the planar-family ones.  F is the forcing L2 magnitude.
    """

    times: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    phi_tilde: np.ndarray
    psi_tilde: np.ndarray
    chi: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    forcing: np.ndarray
    phi_2d: np.ndarray
    psi_2d: np.ndarray
    phi_tilde_2d: np.ndarray
    psi_tilde_2d: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def family(self, regime: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(phi, psi, phi_tilde, psi_tilde) for 'planar' or 'full'."""
        if regime == "planar":
            return self.phi_2d, self.psi_2d, self.phi_tilde_2d, self.psi_tilde_2d
        if regime in ("full", "full-split"):
            return self.phi, self.psi, self.phi_tilde, self.psi_tilde
        raise ValueError(f"unknown regime {regime!r}")

    def to_csv(self, path) -> None:
        cols = [
            self.times, self.theta, self.phi, self.psi, self.phi_tilde,
            self.psi_tilde, self.chi, self.h1, self.h2, self.forcing,
            self.phi_2d, self.psi_2d, self.phi_tilde_2d, self.psi_tilde_2d,
        ]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in zip(*cols):
                writer.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "DiagnosticSeries":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[: len(CSV_COLUMNS)] != CSV_COLUMNS:
                raise ValueError(f"unexpected diagnostics CSV header in {path}")
            rows = [[float(v) for v in row] for row in reader]
        data = np.asarray(rows, dtype=float)
        return cls(*(data[:, i] for i in range(len(CSV_COLUMNS))))


class SeriesBuilder:
    """Append-only accumulator used while a run is in progress."""

    def __init__(self):
        self._rows: list[tuple] = []

    def append(self, t: float, u: SpectralField, forcing_l2: float) -> None:
        self._rows.append((t,) + sample_functionals(u) + (forcing_l2,))

    def finish(self) -> DiagnosticSeries:
        if not self._rows:
            empty = np.zeros(0)
            return DiagnosticSeries(*([empty] * len(CSV_COLUMNS)))
        data = np.asarray(self._rows, dtype=float)
        # builder rows: t, theta, phi, psi, phit, psit, chi, h1, h2,
        #               phi2d, psi2d, phit2d, psit2d, F
        order = [0, 1, 2, 3, 4, 5, 6, 7, 8, 13, 9, 10, 11, 12]
        return DiagnosticSeries(*(data[:, i] for i in order))


def _split_norms(u: SpectralField) -> dict[str, float]:
    """Squared derivative norms of the r, s, w parts without materializing them."""
    d = u.domain
    vol = d.volume
    ksq = ksq_grid(d)
    abs2 = np.abs(u.coeffs) ** 2
    four_pi2 = (2.0 * np.pi) ** 2

    p0 = abs2[..., d.n3]            # (3, M1, M2) vertical-average modes
    ksq_p0 = ksq[..., d.n3]
    w_abs2 = abs2.copy()
    w_abs2[..., d.n3] = 0.0         # oscillatory modes only

    def wsum(a, weights):
        return float(np.sum(weights * a))

    dr2 = vol * four_pi2 * (wsum(p0[0], ksq_p0) + wsum(p0[1], ksq_p0))
    ds2 = vol * four_pi2 * wsum(p0[2], ksq_p0)
    dw2 = vol * four_pi2 * float(np.sum(ksq * np.sum(w_abs2, axis=0)))
    d2r2 = vol * four_pi2**2 * (wsum(p0[0], ksq_p0**2) + wsum(p0[1], ksq_p0**2))
    d2s2 = vol * four_pi2**2 * wsum(p0[2], ksq_p0**2)
    d2w2 = vol * four_pi2**2 * float(np.sum(ksq**2 * np.sum(w_abs2, axis=0)))

    theta2 = vol * float(np.sum(abs2))
    du2 = dr2 + ds2 + dw2
    d2u2 = d2r2 + d2s2 + d2w2
    return {
        "theta2": theta2,
        "dr2": dr2, "ds2": ds2, "dw2": dw2,
        "d2r2": d2r2, "d2s2": d2s2, "d2w2": d2w2,
        "du2": du2, "d2u2": d2u2,
    }


def sample_functionals(u: SpectralField) -> tuple:
    """One diagnostics row (without t and F), see SeriesBuilder.append."""
    n = _split_norms(u)
    sqrt = np.sqrt
    theta = sqrt(n["theta2"])
    phi_full = sqrt(n["dr2"] + n["dw2"])
    psi_full = sqrt(n["ds2"] + n["dw2"])
    phit_full = sqrt(n["d2r2"] + n["d2w2"])
    psit_full = sqrt(n["d2s2"] + n["d2w2"])
    chi = sqrt(n["d2w2"])
    h1 = sqrt(n["theta2"] + n["du2"])
    h2 = sqrt(n["theta2"] + n["du2"] + n["d2u2"])
    return (
        theta, phi_full, psi_full, phit_full, psit_full, chi, h1, h2,
        sqrt(n["dr2"]), sqrt(n["ds2"]), sqrt(n["d2r2"]), sqrt(n["d2s2"]),
    )


def compute_series(fields, times, forcing=None) -> DiagnosticSeries:
    """Diagnostics from in-memory fields or checkpoint paths.

    forcing may be None (F = 0), an array of per-sample L2 magnitudes, or an
    object with a ``value(t)`` method returning a field.
    """
    times = np.asarray(times, dtype=float)
    builder = SeriesBuilder()
    for i, (item, t) in enumerate(zip(fields, times)):
        if isinstance(item, SpectralField):
            u = item
        else:
            u, _ = load_checkpoint(item)
        if forcing is None:
            f_l2 = 0.0
        elif hasattr(forcing, "value"):
            f_l2 = norm_l2(forcing.value(t))
        else:
            f_l2 = float(np.asarray(forcing)[i])
        builder.append(float(t), u, f_l2)
    return builder.finish()


# ---------------------------------------------------------------------------
# Pointwise identities: the planar vorticity-stretching cancellation and the
# transport term that survives for the vertical component.
# ---------------------------------------------------------------------------

def _require_planar(u: SpectralField, name: str, tol: float = 1e-12) -> None:
    scale = float(np.max(np.abs(u.coeffs)))
    if scale == 0.0:
        return
    off = np.abs(u.coeffs).copy()
    off[..., u.domain.n3] = 0.0
    if float(np.max(off)) > tol * scale:
        raise ValueError(f"{name} must be independent of the thin direction")


def _planar_slabs(u: SpectralField) -> np.ndarray:
    """(3, M1, M2) coefficient slab of a z-independent field."""
    return u.coeffs[..., u.domain.n3]


def _synth2d(slab: np.ndarray, d: DomainSpec, grid: tuple[int, int]) -> np.ndarray:
    m1 = np.arange(-d.n1, d.n1 + 1) % grid[0]
    m2 = np.arange(-d.n2, d.n2 + 1) % grid[1]
    full = np.zeros(slab.shape[:-2] + grid, dtype=np.complex128)
    full[..., m1[:, None], m2[None, :]] = slab
    return (ifft2(full, axes=(-2, -1), workers=-1) * np.prod(grid)).real


def _ksq2d(d: DomainSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k1 = (np.arange(-d.n1, d.n1 + 1) / d.l1).reshape(-1, 1)
    k2 = (np.arange(-d.n2, d.n2 + 1) / d.l2).reshape(1, -1)
    return k1, k2, k1 * k1 + k2 * k2


def check_enstrophy_miracle(r: SpectralField, grid: tuple[int, int] | None = None) -> float:
    """Normalized quadrature of the planar cancellation integral.

    For a z-independent, divergence-free horizontal field r the integral
    of lap(r) . (r . grad r) over the horizontal box vanishes identically;
    the return value is |integral| / (||D^2 r|| ||D r||^2) computed with
    exact (oversampled) quadrature, so it measures pure roundoff.
    """
    d = r.domain
    _require_planar(r, "r")
    if float(np.max(np.abs(r.coeffs[2]))) > 1e-12 * max(float(np.max(np.abs(r.coeffs))), 1e-300):
        raise ValueError("r must have zero vertical component")
    if divergence_defect(r) > 1e-10:
        raise ValueError("r must be divergence-free")
    if grid is None:
        grid = (3 * d.n1 + 2, 3 * d.n2 + 2)
    slab = _planar_slabs(r)[:2]
    k1, k2, ksq = _ksq2d(d)
    two_pi_i = 2j * np.pi
    lap = _synth2d(-((2 * np.pi) ** 2) * ksq * slab, d, grid)
    rx = _synth2d(two_pi_i * k1 * slab, d, grid)
    ry = _synth2d(two_pi_i * k2 * slab, d, grid)
    rp = _synth2d(slab, d, grid)
    integrand = np.sum(lap * (rp[0] * rx + rp[1] * ry), axis=0)
    area = d.l1 * d.l2
    integral = area * float(np.mean(integrand))
    # 2D norms of the slab (independent of eps)
    nrm = lambda w: float(np.sqrt(area * np.sum(w)))
    dr = nrm((2 * np.pi) ** 2 * ksq * np.sum(np.abs(slab) ** 2, axis=0))
    d2r = nrm((2 * np.pi) ** 4 * ksq**2 * np.sum(np.abs(slab) ** 2, axis=0))
    denom = d2r * dr**2
    if denom == 0.0:
        return 0.0
    return abs(integral) / denom


def s_transport_residual(
    r: SpectralField, s: SpectralField, grid: tuple[int, int] | None = None
) -> float:
    """|integral of lap(s3) (r . grad s3)| / (||D^2 s3|| ||r . grad s3||).

    The analogue of the planar cancellation for the transported vertical
    component: it does NOT vanish in general, which is why that term needs
    an inequality estimate rather than an identity.  The normalization is
    the Cauchy-Schwarz bound of the integral, so the result lies in [0, 1].
    """
    d = r.domain
    _require_planar(r, "r")
    _require_planar(s, "s")
    if grid is None:
        grid = (3 * d.n1 + 2, 3 * d.n2 + 2)
    rslab = _planar_slabs(r)[:2]
    sslab = _planar_slabs(s)[2]
    k1, k2, ksq = _ksq2d(d)
    two_pi_i = 2j * np.pi
    lap_s = _synth2d(-((2 * np.pi) ** 2) * ksq * sslab, d, grid)
    sx = _synth2d(two_pi_i * k1 * sslab, d, grid)
    sy = _synth2d(two_pi_i * k2 * sslab, d, grid)
    rp = _synth2d(rslab, d, grid)
    transport = rp[0] * sx + rp[1] * sy
    area = d.l1 * d.l2
    integral = area * float(np.mean(lap_s * transport))
    d2s = float(np.sqrt(area * np.sum((2 * np.pi) ** 4 * ksq**2 * np.abs(sslab) ** 2)))
    tnorm = float(np.sqrt(area * np.mean(transport**2)))
    denom = d2s * tnorm
    if denom == 0.0:
        return 0.0
    return abs(integral) / denom


# ---------------------------------------------------------------------------
# Differential-inequality fitting.
# ---------------------------------------------------------------------------

@dataclass
class InequalityReport:
    """Outcome of fitting one differential inequality on one trajectory."""

    name: str
    fitted_constants: dict[str, float]
    residual_max: float
    slack: float
    verdict: str
    trajectory_id: str
    term_peaks: dict[str, float]
    times: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "fitted_constants": self.fitted_constants,
            "residual_max": self.residual_max,
            "slack": self.slack,
            "verdict": self.verdict,
            "trajectory_id": self.trajectory_id,
            "term_peaks": self.term_peaks,
        }


def _ddt(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Second-order derivative estimate (centered, one-sided at the ends)."""
    return np.gradient(values, times, edge_order=2)


def _inequality_defs(series: DiagnosticSeries, eps: float, regime: str):
    """(name, lhs, {constant: column}) triples for the requested regime."""
    t = series.times
    F2 = series.forcing**2
    if regime == "planar":
        phi, psi, phit, psit = series.family("planar")
        return [
            ("planar-phi", _ddt(t, phi**2),
             {"damping": -(phit**2), "source": F2}),
            ("planar-psi", _ddt(t, psi**2),
             {"damping": -(psit**2), "coupling": phi**2 * psi**2 / eps, "source": F2}),
            ("planar-energy", _ddt(t, series.theta**2),
             {"damping": -(phi**2 + psi**2), "source": F2}),
        ]
    if regime == "full":
        phi, psi, phit, psit = series.family("full")
        chi2 = series.chi**2
        shear = np.sqrt(eps) * (phi + psi) * chi2
        return [
            ("full-phi", _ddt(t, phi**2),
             {"damping": -(phit**2), "shear_damping": -chi2,
              "shear_coupling": shear, "source": F2}),
            ("full-psi", _ddt(t, psi**2),
             {"damping": -(psit**2), "shear_damping": -chi2,
              "coupling": phi**2 * psi**2 / eps,
              "shear_coupling": shear, "source": F2}),
            ("full-energy", _ddt(t, series.theta**2),
             {"damping": -(phi**2 + psi**2), "source": F2}),
        ]
    if regime == "full-split":
        dr2 = series.phi_2d**2
        ds2 = series.psi_2d**2
        dw2 = np.maximum(series.phi**2 - series.phi_2d**2, 0.0)
        chi2 = series.chi**2
        dv = np.sqrt(dr2 + ds2)
        dw = np.sqrt(dw2)
        return [
            ("split-horizontal", _ddt(t, dr2),
             {"damping": -(series.phi_tilde_2d**2),
              "shear_coupling": np.sqrt(eps) * dv * chi2, "source": F2}),
            ("split-vertical", _ddt(t, ds2),
             {"damping": -(series.psi_tilde_2d**2),
              "coupling": dr2 * ds2 / eps,
              "shear_coupling": np.sqrt(eps) * dv * chi2, "source": F2}),
            ("split-shear", _ddt(t, dw2),
             {"damping": -chi2,
              "shear_coupling": np.sqrt(eps) * dv * chi2,
              "self_coupling": np.sqrt(eps) * dw * chi2, "source": F2}),
        ]
    raise ValueError(f"unknown regime {regime!r}")


def _fit_chebyshev(
    lhs: np.ndarray,
    cols: dict[str, np.ndarray],
    bounds: dict[str, tuple[float, float]],
) -> tuple[dict[str, float], float]:
    """Fit constants of the bound lhs_i <= sum_j c_j col_j[i].

    The verdict question is whether nonnegative constants exist, but the
    minimizer of the plain max residual is degenerate (inflating a source
    constant drives the residual to the box corner), so the fit is anchored:
    first find the best achievable residual level, then at that level pick
    the most informative vertex - damping-like constants (columns <= 0) as
    large, source-like ones as small, as the data allows.  On an exact decay
    trajectory this recovers the true damping rate.
    """
    names = list(cols)
    A_terms = np.column_stack([cols[n] for n in names])
    m, J = A_terms.shape
    weights = np.array(
        [max(float(np.max(np.abs(A_terms[:, j]), initial=0.0)), 0.0) for j in range(J)]
    )
    active = weights > 0.0
    lhs_scale = float(np.max(np.abs(lhs), initial=0.0))

    def informative_fit(target: float):
        if not np.any(active):
            return np.array([bounds[n][0] for n in names])
        damping_like = np.array(
            [bool(np.max(A_terms[:, j], initial=0.0) <= 0.0) for j in range(J)]
        )
        # maximize damping, minimize sources; the slight asymmetry breaks the
        # degenerate ray where a damping/source pair trades off one-for-one,
        # and the primary damping term is preferred over secondary ones
        pref = np.array([1.0 if n == "damping" else 0.9 for n in names])
        obj = np.where(damping_like, -(1.0 - 1e-3) * pref * weights, weights)
        obj = np.where(active, obj, 0.0)
        res = linprog(
            c=obj[active],
            A_ub=-A_terms[:, active],
            b_ub=target - lhs,
            bounds=[bounds[names[j]] for j in range(J) if active[j]],
            method="highs",
        )
        if not res.success:
            return None
        x = np.array([bounds[n][0] for n in names])
        x[active] = res.x
        return x

    x = informative_fit(1e-13 * max(lhs_scale, 1e-300))
    if x is None:
        # infeasible at zero residual: find the Chebyshev optimum first
        A_ub = np.hstack([-np.ones((m, 1)), -A_terms])
        res1 = linprog(
            c=np.concatenate([[1.0], np.zeros(J)]),
            A_ub=A_ub,
            b_ub=-lhs,
            bounds=[(None, None)] + [bounds[n] for n in names],
            method="highs",
        )
        if not res1.success:
            raise RuntimeError(f"constant fit LP failed: {res1.message}")
        z_star = float(res1.x[0])
        target = z_star + 1e-12 * max(1.0, abs(z_star)) + 1e-10 * lhs_scale
        x = informative_fit(target)
        if x is None:
            x = res1.x[1:]
    constants = {n: float(v) for n, v in zip(names, x)}
    residuals = lhs - A_terms @ x
    return constants, float(np.max(residuals))


_DEFAULT_BOUNDS = (0.0, 1e9)


def _fit_one(
    name: str,
    times: np.ndarray,
    lhs: np.ndarray,
    cols: dict[str, np.ndarray],
    slack_rel: float,
    bounds: dict[str, tuple[float, float]] | None,
    trajectory_id: str,
) -> InequalityReport:
    box = {n: _DEFAULT_BOUNDS for n in cols}
    if bounds:
        box.update({n: bounds[n] for n in bounds if n in box})
    constants, residual_max = _fit_chebyshev(lhs, cols, box)
    term_peaks = {
        n: float(np.max(np.abs(constants[n] * cols[n]), initial=0.0)) for n in cols
    }
    scale = float(np.max(np.abs(lhs), initial=0.0)) + sum(term_peaks.values())
    slack = slack_rel * max(scale, 1e-300)
    A = np.column_stack([cols[n] for n in cols])
    x = np.array([constants[n] for n in cols])
    residuals = lhs - A @ x
    verdict = "pass" if residual_max <= slack else "fail"
    return InequalityReport(
        name=name,
        fitted_constants=constants,
        residual_max=residual_max,
        slack=slack,
        verdict=verdict,
        trajectory_id=trajectory_id,
        term_peaks=term_peaks,
        times=times,
        residuals=residuals,
    )


def check_diff_inequalities(
    series: DiagnosticSeries,
    eps: float,
    regime: str,
    slack_rel: float = 1e-6,
    bounds: dict[str, tuple[float, float]] | None = None,
    trajectory_id: str = "",
) -> list[InequalityReport]:
    """Fit and verify the differential-inequality system of a regime.

    regime: 'planar' for the z-independent system, 'full' for the combined
    system with the shear terms, 'full-split' for the three per-quantity
    inequalities the combined system is assembled from.
    """
    if len(series) < 5:
        raise ValueError("series too short to estimate time derivatives (< 5 samples)")
    reports = []
    for name, lhs, cols in _inequality_defs(series, eps, regime):
        reports.append(
            _fit_one(name, series.times, lhs, cols, slack_rel, bounds, trajectory_id)
        )
    return reports


def fit_shared_constants(
    series_list: list[DiagnosticSeries],
    eps: float,
    regime: str,
    slack_rel: float = 1e-6,
    bounds: dict[str, tuple[float, float]] | None = None,
) -> list[InequalityReport]:
    """One constant set per inequality covering every trajectory at once."""
    if not series_list:
        raise ValueError("no trajectories supplied")
    for s in series_list:
        if len(s) < 5:
            raise ValueError("series too short to estimate time derivatives (< 5 samples)")
    per = [_inequality_defs(s, eps, regime) for s in series_list]
    reports = []
    for idx in range(len(per[0])):
        name = per[0][idx][0]
        lhs = np.concatenate([defs[idx][1] for defs in per])
        keys = per[0][idx][2].keys()
        cols = {k: np.concatenate([defs[idx][2][k] for defs in per]) for k in keys}
        times = np.concatenate([s.times for s in series_list])
        reports.append(
            _fit_one(name, times, lhs, cols, slack_rel, bounds, "shared")
        )
    return reports


def write_residual_traces(reports: list[InequalityReport], path) -> None:
    """CSV of residual traces, one column per inequality (plotting aid)."""
    if not reports:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [r.name for r in reports])
        for i, t in enumerate(reports[0].times):
            writer.writerow(
                [f"{t:.17g}"] + [f"{r.residuals[i]:.17g}" for r in reports]
            )


def reports_to_json(reports: list[InequalityReport], path) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Conclusion-level bounds.
# ---------------------------------------------------------------------------

@dataclass
class RegularityBoundsReport:
    """Smallest admissible prefactors for the H1 conclusion bounds."""

    sup_h1: float
    tail_sup_h1: float
    tail_window: tuple[float, float]
    h2_sq_integral: float
    M: float
    rhs_uniform: float
    rhs_tail: float
    c_uniform: float | None
    c_tail: float | None
    vacuous: bool = False
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "sup_h1": self.sup_h1,
            "tail_sup_h1": self.tail_sup_h1,
            "tail_window": list(self.tail_window),
            "h2_sq_integral": self.h2_sq_integral,
            "M": self.M,
            "rhs_uniform": self.rhs_uniform,
            "rhs_tail": self.rhs_tail,
            "c_uniform": self.c_uniform,
            "c_tail": self.c_tail,
            "vacuous": self.vacuous,
            "message": self.message,
        }


def evaluate_regularity_bounds(
    series: DiagnosticSeries,
    U: float,
    F: float,
    l1: float,
    l2: float,
    nu: float,
    eps: float,
    M: float | None = None,
    tail_fraction: float = 0.25,
    blowup: dict | None = None,
) -> RegularityBoundsReport:
    """Evaluate the H1 conclusion bounds along a finished run.

    Computes sup_t ||u||_H1, the sup over the trailing window (a finite-
    horizon stand-in for the limsup), and the trapezoid integral of
    ||u||_H2^2; reports the smallest prefactor c that would make each bound
    hold.  A blown-up run yields a vacuous report: the smallness hypothesis
    M <= c^-1 nu sqrt(l2) / l1 was presumably violated.
    """
    if M is None:
        M = max(U, (l1 / nu) * F)
    rhs_uniform = max(M, (l1**1.5 / (nu * np.sqrt(l2))) * M**2 / np.sqrt(eps))
    rhs_tail = max((l1 / nu) * F, (l1**3.5 / (nu**3 * np.sqrt(l2))) * F**2 / np.sqrt(eps))
    if blowup is not None:
        return RegularityBoundsReport(
            sup_h1=float(np.max(series.h1, initial=0.0)),
            tail_sup_h1=float("nan"),
            tail_window=(float("nan"), float("nan")),
            h2_sq_integral=float("nan"),
            M=M,
            rhs_uniform=rhs_uniform,
            rhs_tail=rhs_tail,
            c_uniform=None,
            c_tail=None,
            vacuous=True,
            message=(
                "bound vacuous - the run blew up, so the smallness hypothesis "
                "on M was presumably violated"
            ),
        )
    t = series.times
    span = t[-1] - t[0]
    t_tail = t[-1] - tail_fraction * span
    tail_mask = t >= t_tail
    sup_h1 = float(np.max(series.h1))
    tail_sup = float(np.max(series.h1[tail_mask]))
    h2_int = float(np.trapezoid(series.h2**2, t))
    c_uniform = sup_h1 / rhs_uniform if rhs_uniform > 0 else None
    c_tail = tail_sup / rhs_tail if rhs_tail > 0 else None
    return RegularityBoundsReport(
        sup_h1=sup_h1,
        tail_sup_h1=tail_sup,
        tail_window=(float(t_tail), float(t[-1])),
        h2_sq_integral=h2_int,
        M=M,
        rhs_uniform=rhs_uniform,
        rhs_tail=rhs_tail,
        c_uniform=c_uniform,
        c_tail=c_tail,
    )


def energy_budget(u: SpectralField, forcing_value: SpectralField | None = None) -> float:
    """Exact instantaneous d/dt ||u||_2^2 of the Galerkin system.

    Advection is energy-neutral, so the budget is -2 nu ||D u||^2 plus twice
    the forcing inner product.  Used to validate the finite-difference
    derivative estimates.
    """
    d = u.domain
    out = -2.0 * d.nu * norm_ds(u, 1.0) ** 2
    if forcing_value is not None:
        out += 2.0 * inner_l2(u, forcing_value)
    return out


def energy_identity_residuals(
    series: DiagnosticSeries, nu: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-interval residual of the unforced energy identity.

    Over consecutive sample pairs [t_i, t_{i+2}] compares the slope of
    theta^2 with -2 nu ||Du||^2, the latter Simpson-averaged through the
    midpoint sample (an endpoint average cannot resolve the identity to the
    tolerances this check is used at).  Requires a per-step sampled series;
    returns (interval midpoints, |residual|, nu * averaged ||Du||^2), so
    residual / scale is the relative closure of the identity.
    """
    if len(series) < 3:
        raise ValueError("need at least 3 samples for the energy identity check")
    th2 = series.theta**2
    du2 = series.h1**2 - series.theta**2
    i = np.arange(0, len(series) - 2, 2)
    h = series.times[i + 2] - series.times[i]
    slope = (th2[i + 2] - th2[i]) / h
    avg_du2 = (du2[i] + 4.0 * du2[i + 1] + du2[i + 2]) / 6.0
    residual = np.abs(slope + 2.0 * nu * avg_du2)
    return series.times[i + 1], residual, nu * avg_du2


REGIMES = ("planar", "full", "full-split")
