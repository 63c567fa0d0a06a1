"""Empirical best-constant estimation for the functional inequalities.

Each estimator maximizes the ratio LHS/RHS of an inequality over randomized
trial ensembles plus a derivative-free refinement pass, so every reported
constant is a certified lower bound on the true one: the maximizing field is
stored and reproduces the ratio.  Upper bounds are never claimed.

Inequalities (keys accepted by estimate_constant):

    thin-sup         sup |w|  <= C ||D^2 w||_2   for w with no vertical mean
    thin-l4          ||w||_4  <= C ||D w||_2     for w with no vertical mean
    planar-l4        ||f||_4  <= C ||D^(1/2) f||_2   for 2D mean-zero f
    poincare         ||f||_2  <= C ||D^alpha f||_2
    hausdorff-young  ||w||_p  <= V^(1/p) (sum |w_hat|^p')^(1/p'),  p' = p/(p-1)

The thin-domain constants are expected to scale like eps^(1/2) (sup case)
and eps^(1/4) (L4 case); fit_eps_scaling turns a sweep of estimates into a
log-log slope.  The sup norm is approximated on a 4x oversampled grid
(documented approximation: the sup of a band-limited function is read off
dense samples); the L4 norms use exact quadrature of the quartic.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import ifft2, next_fast_len

from .spectral import (
    DomainSpec,
    SpectralField,
    hermitian_symmetrize,
    ksq_grid,
    min_nonzero_k,
    norm_ds,
    norm_l2,
)

__all__ = [
    "Field2D",
    "ConstantEstimate",
    "DyadicProfile",
    "ScalingFit",
    "INEQUALITIES",
    "estimate_constant",
    "fit_eps_scaling",
    "dyadic_decompose",
    "thin_sweep_resolution",
    "single_mode_floor_planar_l4",
    "write_sweep_csv",
    "estimate_to_json",
]

INEQUALITIES = ("thin-sup", "thin-l4", "planar-l4", "poincare", "hausdorff-young")


# ---------------------------------------------------------------------------
# 2D scalar fields (the planar-l4 inequality and the dyadic decomposition
# live on the horizontal box alone).
# ---------------------------------------------------------------------------

class Field2D:
    """Immutable mean-zero scalar field on the horizontal periodic box."""

    __slots__ = ("l1", "l2", "n1", "n2", "coeffs")

    def __init__(self, l1: float, l2: float, n1: int, n2: int, coeffs: np.ndarray):
        arr = np.array(coeffs, dtype=np.complex128, order="C", copy=True)
        if arr.shape != (2 * n1 + 1, 2 * n2 + 1):
            raise ValueError(f"coefficient shape {arr.shape} != {(2*n1+1, 2*n2+1)}")
        sym = 0.5 * (arr + np.conj(np.flip(arr)))
        scale = float(np.max(np.abs(sym))) if sym.size else 0.0
        if float(np.max(np.abs(arr - sym))) > 1e-6 * max(scale, 1e-300):
            raise ValueError("coefficients are not Hermitian-symmetric")
        sym[n1, n2] = 0.0
        sym.flags.writeable = False
        object.__setattr__(self, "l1", float(l1))
        object.__setattr__(self, "l2", float(l2))
        object.__setattr__(self, "n1", int(n1))
        object.__setattr__(self, "n2", int(n2))
        object.__setattr__(self, "coeffs", sym)

    def __setattr__(self, name, value):
        raise AttributeError("Field2D is immutable")

    @property
    def area(self) -> float:
        return self.l1 * self.l2

    def kmag(self) -> np.ndarray:
        """|r| = sqrt(r1^2/l1^2 + r2^2/l2^2) over the mode box."""
        k1 = (np.arange(-self.n1, self.n1 + 1) / self.l1).reshape(-1, 1)
        k2 = (np.arange(-self.n2, self.n2 + 1) / self.l2).reshape(1, -1)
        return np.sqrt(k1 * k1 + k2 * k2)

    def norm_l2(self) -> float:
        return float(np.sqrt(self.area * np.sum(np.abs(self.coeffs) ** 2)))

    def norm_ds(self, alpha: float) -> float:
        mult = (2.0 * np.pi * self.kmag()) ** alpha
        mult[self.n1, self.n2] = 0.0
        return float(np.sqrt(self.area * np.sum(mult**2 * np.abs(self.coeffs) ** 2)))

    def samples(self, grid: tuple[int, int]) -> np.ndarray:
        m1 = np.arange(-self.n1, self.n1 + 1) % grid[0]
        m2 = np.arange(-self.n2, self.n2 + 1) % grid[1]
        full = np.zeros(grid, dtype=np.complex128)
        full[m1[:, None], m2[None, :]] = self.coeffs
        return (ifft2(full, workers=-1) * np.prod(grid)).real

    def norm_l4(self) -> float:
        grid = (next_fast_len(4 * self.n1 + 2), next_fast_len(4 * self.n2 + 2))
        vals = self.samples(grid)
        return float((self.area * np.mean(vals**4)) ** 0.25)

    def embed(self, eps: float, nu: float = 1.0, n3: int = 1) -> SpectralField:
        """3D single-component embedding (for checkpointing a maximizer)."""
        spec = DomainSpec(l1=self.l1, l2=self.l2, eps=eps, nu=nu, n1=self.n1, n2=self.n2, n3=n3)
        out = np.zeros((3,) + spec.shape, dtype=np.complex128)
        out[0, :, :, n3] = self.coeffs
        return SpectralField(spec, out)


# ---------------------------------------------------------------------------
# Dyadic block decomposition.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicProfile:
    """Block norms A_m over the rings 2^m <= |r| < 2^(m+1), m >= 0.

    total_sq collects sum A_m^2 (equals the coefficient mass at |r| >= 1),
    weighted_sq collects sum 2^m A_m^2, and multiplier_constant is the
    explicit constant for weighted_sq <= c ||D^(1/2) f||_2^2 coming from
    2^m <= |r| on each block, namely 1/(2 pi l1 l2).
    """

    block_norms: np.ndarray
    total_sq: float
    weighted_sq: float
    half_deriv_norm: float
    multiplier_constant: float

    @property
    def satisfies_multiplier_bound(self) -> bool:
        bound = self.multiplier_constant * self.half_deriv_norm**2
        return self.weighted_sq <= bound * (1.0 + 1e-12)


def dyadic_decompose(f: Field2D) -> DyadicProfile:
    """Littlewood-Paley style block profile of a 2D mean-zero field."""
    kmag = f.kmag()
    abs2 = np.abs(f.coeffs) ** 2
    mask = kmag >= 1.0
    if not np.any(mask):
        return DyadicProfile(np.zeros(0), 0.0, 0.0, f.norm_ds(0.5), 1.0 / (2 * np.pi * f.area))
    m_of = np.floor(np.log2(kmag, where=mask, out=np.zeros_like(kmag))).astype(int)
    m_max = int(np.max(m_of[mask]))
    blocks = np.zeros(m_max + 1)
    np.add.at(blocks, m_of[mask], abs2[mask])
    block_norms = np.sqrt(blocks)
    weights = 2.0 ** np.arange(m_max + 1)
    return DyadicProfile(
        block_norms=block_norms,
        total_sq=float(np.sum(blocks)),
        weighted_sq=float(np.sum(weights * blocks)),
        half_deriv_norm=f.norm_ds(0.5),
        multiplier_constant=1.0 / (2.0 * np.pi * f.area),
    )


# ---------------------------------------------------------------------------
# Ratio evaluation.
# ---------------------------------------------------------------------------

def _q_plane_eval(
    slab_pos: np.ndarray,
    n3: int,
    grid_xy: tuple[int, int],
    z_count: int,
    power: float | None,
) -> float:
    """sup (power None) or mean of |w|^power over the grid, plane by plane.

    slab_pos[c, p] holds the (M1, M2) coefficient slab of component c at
    vertical mode p >= 0; the p < 0 slabs are their conjugate mirrors, so
    w(., ., z) = W_0 + 2 Re sum_{p>0} W_p e^(2 pi i p z / eps).  Keeping only
    one z-plane in memory at a time bounds the footprint at large grids.
    """
    n_comp, n_pos = slab_pos.shape[:2]
    planes = ifft2(slab_pos, axes=(-2, -1), workers=-1) * np.prod(grid_xy)
    acc = 0.0
    for iz in range(z_count):
        frac = iz / z_count
        mag2 = None
        for c in range(n_comp):
            wz = planes[c, 0].real.copy()
            for p in range(1, n_pos):
                phase = np.exp(2j * np.pi * p * frac)
                wz += 2.0 * (planes[c, p] * phase).real
            mag2 = wz * wz if mag2 is None else mag2 + wz * wz
        if power is None:
            acc = max(acc, float(np.max(mag2)))
        else:
            acc += float(np.mean(mag2 ** (power / 2.0)))
    if power is None:
        return float(np.sqrt(acc))
    return acc / z_count


def _slab_pos(coeffs: np.ndarray, spec: DomainSpec, grid_xy: tuple[int, int]) -> np.ndarray:
    """Embed the p >= 0 coefficient slabs onto the (padded) horizontal grid."""
    m1 = np.arange(-spec.n1, spec.n1 + 1) % grid_xy[0]
    m2 = np.arange(-spec.n2, spec.n2 + 1) % grid_xy[1]
    n_pos = spec.n3 + 1
    out = np.zeros((coeffs.shape[0], n_pos) + grid_xy, dtype=np.complex128)
    src = coeffs[..., spec.n3 :]  # p = 0 .. n3
    out[:, :, m1[:, None], m2[None, :]] = np.moveaxis(src, -1, 1)
    return out


def sup_norm(u: SpectralField, oversample: int = 4) -> float:
    """sup |u| read off an oversampled grid (plane-synthesis evaluation)."""
    d = u.domain
    gx = next_fast_len(oversample * (2 * d.n1 + 1))
    gy = next_fast_len(oversample * (2 * d.n2 + 1))
    gz = max(oversample * (2 * d.n3 + 1), 1)
    slabs = _slab_pos(u.coeffs, d, (gx, gy))
    return _q_plane_eval(slabs, d.n3, (gx, gy), gz, power=None)


def lp_norm(u: SpectralField, p: float, oversample: int = 4, exact_quartic: bool = True) -> float:
    """||u||_p by grid quadrature.

    Exact for p = 2 and (with the default padding) p = 4; other exponents
    are approximations on the oversampled grid.
    """
    d = u.domain
    if p == 2.0:
        return norm_l2(u)
    if np.isinf(p):
        return sup_norm(u, oversample)
    if p == 4.0 and exact_quartic:
        gx = next_fast_len(4 * d.n1 + 2)
        gy = next_fast_len(4 * d.n2 + 2)
        gz = 4 * d.n3 + 2
    else:
        gx = next_fast_len(oversample * (2 * d.n1 + 1))
        gy = next_fast_len(oversample * (2 * d.n2 + 1))
        gz = oversample * (2 * d.n3 + 1)
    slabs = _slab_pos(u.coeffs, d, (gx, gy))
    mean_pow = _q_plane_eval(slabs, d.n3, (gx, gy), gz, power=p)
    return float((d.volume * mean_pow) ** (1.0 / p))


def _ratio_thin_sup(u: SpectralField, oversample: int) -> float:
    den = norm_ds(u, 2.0)
    return sup_norm(u, oversample) / den if den > 0 else 0.0


def _ratio_thin_l4(u: SpectralField, oversample: int) -> float:
    den = norm_ds(u, 1.0)
    return lp_norm(u, 4.0, oversample) / den if den > 0 else 0.0


def _ratio_planar_l4(f: Field2D) -> float:
    den = f.norm_ds(0.5)
    return f.norm_l4() / den if den > 0 else 0.0


def _ratio_poincare(u: SpectralField, alpha: float) -> float:
    den = norm_ds(u, alpha)
    return norm_l2(u) / den if den > 0 else 0.0


def _ratio_hausdorff_young(u: SpectralField, p: float, oversample: int) -> float:
    pprime = 1.0 if np.isinf(p) else p / (p - 1.0)
    vol_factor = 1.0 if np.isinf(p) else u.domain.volume ** (1.0 / p)
    den = vol_factor * float(np.sum(np.abs(u.coeffs) ** pprime) ** (1.0 / pprime))
    return lp_norm(u, p, oversample) / den if den > 0 else 0.0


# ---------------------------------------------------------------------------
# Trial ensembles.
# ---------------------------------------------------------------------------

def _q_mask_random(spec: DomainSpec, rng, envelope) -> SpectralField:
    shape = (3,) + spec.shape
    raw = np.zeros(shape, dtype=np.complex128)
    raw[0] = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    raw[0] *= envelope
    raw[0, :, :, spec.n3] = 0.0  # no vertical mean: live in the range of Q
    return SpectralField(spec, hermitian_symmetrize(raw))


def _thin_profile(spec: DomainSpec, exponent: float) -> SpectralField:
    """Deterministic positive-coefficient profile |k|^(-exponent) on p != 0.

    For the sup inequality the exponent 4 profile attains the Cauchy-Schwarz
    bound exactly on the retained box (all coefficients positive, so the sup
    sits at the origin and equals the coefficient sum).
    """
    ksq = np.asarray(ksq_grid(spec)).copy()
    ksq[spec.n1, spec.n2, spec.n3] = 1.0
    prof = ksq ** (-exponent / 2.0)
    prof[:, :, spec.n3] = 0.0
    raw = np.zeros((3,) + spec.shape, dtype=np.complex128)
    raw[0] = prof
    return SpectralField(spec, raw)


def _random_2d(f_shape, rng, l1, l2, n1, n2, envelope) -> Field2D:
    raw = rng.standard_normal(f_shape) + 1j * rng.standard_normal(f_shape)
    raw *= envelope
    sym = 0.5 * (raw + np.conj(np.flip(raw)))
    return Field2D(l1, l2, n1, n2, sym)


def single_mode_floor_planar_l4(l1: float = 1.0, l2: float = 1.0) -> float:
    """Analytic planar-l4 ratio of the single cosine mode cos(2 pi x / l1).

    Closed form: ||f||_4 = (3/8)^(1/4) (l1 l2)^(1/4) from the quartic cosine
    integral, and the conjugate pair at r = (+-1, 0) gives
    ||D^(1/2) f||_2^2 = 2 pi (l1 l2 / l1) * 1/2, so for l1 = l2 = 1 the
    ratio is (3/8)^(1/4) / sqrt(pi) ~ 0.44150.
    """
    l4 = (3.0 / 8.0) ** 0.25 * (l1 * l2) ** 0.25
    d_half = np.sqrt(2.0 * np.pi * (1.0 / l1) * (l1 * l2) * 0.5)
    return float(l4 / d_half)


@dataclass
class ConstantEstimate:
    """Best found LHS/RHS ratio with the maximizing field."""

    inequality: str
    l1: float
    l2: float
    eps: float | None
    resolution: tuple[int, ...]
    trial_count: int
    max_ratio: float
    maximizer: object
    best_trial_kind: str
    params: dict = field(default_factory=dict)
    convergence: float | None = None
    ensemble_best: dict = field(default_factory=dict)

    def reproduced_ratio(self) -> float:
        """Re-evaluate the stored maximizer (certified-lower-bound check)."""
        return _RATIO_DISPATCH[self.inequality](self.maximizer, self.params)

    def to_dict(self) -> dict:
        return {
            "inequality": self.inequality,
            "l1": self.l1,
            "l2": self.l2,
            "eps": self.eps,
            "resolution": list(self.resolution),
            "trial_count": self.trial_count,
            "max_ratio": self.max_ratio,
            "best_trial_kind": self.best_trial_kind,
            "params": self.params,
            "convergence": self.convergence,
            "ensemble_best": self.ensemble_best,
        }


_RATIO_DISPATCH = {
    "thin-sup": lambda u, params: _ratio_thin_sup(u, params.get("oversample", 4)),
    "thin-l4": lambda u, params: _ratio_thin_l4(u, params.get("oversample", 4)),
    "planar-l4": lambda f, params: _ratio_planar_l4(f),
    "poincare": lambda u, params: _ratio_poincare(u, params.get("alpha", 1.0)),
    "hausdorff-young": lambda u, params: _ratio_hausdorff_young(
        u, params.get("p", 4.0), params.get("oversample", 4)
    ),
}


def _refine_coordinates(best, ratio_fn, rng, budget: int, top_k: int = 40):
    """Cyclic coordinate ascent on the largest coefficients of the incumbent.

    Perturbs real and imaginary parts of the dominant modes (keeping the
    Hermitian mirror in sync), with a step that shrinks whenever a full pass
    yields no improvement.  Derivative-free and reproducible given the rng.
    """
    if budget <= 0:
        return best, 0.0
    if isinstance(best, Field2D):
        coeffs = best.coeffs.copy()
        make = lambda c: Field2D(best.l1, best.l2, best.n1, best.n2, c)
        sym = lambda c: 0.5 * (c + np.conj(np.flip(c)))
    else:
        coeffs = best.coeffs.copy()
        make = lambda c: SpectralField(best.domain, c)
        sym = hermitian_symmetrize
    flat = np.abs(coeffs).ravel()
    order = np.argsort(flat)[::-1][: min(top_k, flat.size)]
    scale = float(np.max(flat))
    if scale == 0.0:
        return best, 0.0
    best_ratio = ratio_fn(make(coeffs))
    step = 0.25
    evals = 0
    improved_any = False
    while evals < budget and step > 1e-3:
        improved = False
        for idx in order:
            if evals >= budget:
                break
            for delta in (step * scale, -step * scale, 1j * step * scale, -1j * step * scale):
                cand = coeffs.copy()
                cand.ravel()[idx] += delta
                cand = sym(cand)
                r = ratio_fn(make(cand))
                evals += 1
                if r > best_ratio * (1.0 + 1e-12):
                    coeffs, best_ratio, improved = cand, r, True
                    improved_any = True
                    break
                if evals >= budget:
                    break
        if not improved:
            step *= 0.5
    return (make(coeffs) if improved_any else best), best_ratio


def estimate_constant(
    inequality: str,
    domain: DomainSpec,
    resolution: tuple[int, int, int] | None = None,
    budget: int = 200,
    seed: int = 0,
    oversample: int = 4,
    alpha: float = 1.0,
    p: float = 4.0,
    refine: bool = True,
) -> ConstantEstimate:
    """Randomized lower-bound estimation of an inequality constant.

    budget counts ratio evaluations and is split between the trial ensembles
    (white / power-law / single-block / deterministic profiles) and the
    coordinate-ascent refinement of the best trial.
    """
    if inequality not in INEQUALITIES:
        raise ValueError(f"unknown inequality {inequality!r}; pick one of {INEQUALITIES}")
    if budget <= 0:
        raise ValueError("budget must be positive")
    rng = np.random.default_rng(seed)
    params = {"oversample": oversample, "alpha": alpha, "p": p}

    if resolution is not None:
        domain = DomainSpec(
            l1=domain.l1, l2=domain.l2, eps=domain.eps, nu=domain.nu,
            n1=resolution[0], n2=resolution[1], n3=resolution[2],
        )

    trial_budget = budget if not refine else max(budget // 2, 1)
    refine_budget = budget - trial_budget if refine else 0

    best = None
    best_ratio = -1.0
    best_kind = ""
    ensemble_best: dict[str, float] = {}
    trials = 0

    def consider(candidate, kind: str):
        nonlocal best, best_ratio, best_kind, trials
        r = _RATIO_DISPATCH[inequality](candidate, params)
        trials += 1
        ensemble_best[kind] = max(ensemble_best.get(kind, 0.0), r)
        if r > best_ratio:
            best, best_ratio, best_kind = candidate, r, kind

    if inequality == "planar-l4":
        n1, n2 = domain.n1, domain.n2
        shape = (2 * n1 + 1, 2 * n2 + 1)
        kmag = Field2D(domain.l1, domain.l2, n1, n2, np.zeros(shape)).kmag()
        kmag_safe = np.where(kmag == 0, 1.0, kmag)
        # the single-mode floor first: it is also the analytic regression target
        single = np.zeros(shape, dtype=np.complex128)
        single[n1 + 1, n2] = 0.5
        single[n1 - 1, n2] = 0.5
        consider(Field2D(domain.l1, domain.l2, n1, n2, single), "single-mode")
        for s in (1.0, 1.25, 1.5, 1.75, 2.0):
            consider(
                Field2D(domain.l1, domain.l2, n1, n2, (kmag_safe**-s) * (kmag >= 1.0)),
                f"profile-{s}",
            )
        n_blocks = max(1, int(np.log2(max(np.max(kmag), 2.0))))
        while trials < trial_budget:
            pick = rng.integers(0, 4)
            if pick == 0:
                consider(_random_2d(shape, rng, domain.l1, domain.l2, n1, n2, 1.0), "white")
            elif pick == 1:
                consider(
                    _random_2d(shape, rng, domain.l1, domain.l2, n1, n2, kmag_safe**-1.0),
                    "powerlaw-1",
                )
            elif pick == 2:
                consider(
                    _random_2d(shape, rng, domain.l1, domain.l2, n1, n2, kmag_safe**-1.5),
                    "powerlaw-1.5",
                )
            else:
                m = int(rng.integers(0, n_blocks))
                env = ((kmag >= 2.0**m) & (kmag < 2.0 ** (m + 1))).astype(float)
                consider(
                    _random_2d(shape, rng, domain.l1, domain.l2, n1, n2, env),
                    f"block-{m}",
                )
    else:
        ksq = np.asarray(ksq_grid(domain))
        kmin2 = min_nonzero_k(domain) ** 2
        ksq_safe = np.where(ksq == 0, kmin2, ksq)
        if inequality in ("thin-sup", "thin-l4", "hausdorff-young"):
            # deterministic near-extremal profiles on the range of Q
            exponents = (4.0,) if inequality == "thin-sup" else (2.5, 3.0, 3.5)
            for e in exponents:
                consider(_thin_profile(domain, e), f"profile-{e}")
        if inequality == "poincare":
            lowest = np.zeros((3,) + domain.shape, dtype=np.complex128)
            axis = int(np.argmax([domain.l1, domain.l2, domain.eps]))
            idx = [domain.n1, domain.n2, domain.n3]
            idx[axis] += 1
            lowest[(0,) + tuple(idx)] = 0.5
            consider(SpectralField(domain, hermitian_symmetrize(lowest)), "lowest-mode")
        q_constrained = inequality in ("thin-sup", "thin-l4", "hausdorff-young")
        while trials < trial_budget:
            pick = rng.integers(0, 3)
            env = {0: 1.0, 1: (ksq_safe / kmin2) ** -0.5, 2: (ksq_safe / kmin2) ** -1.0}[int(pick)]
            if q_constrained:
                consider(_q_mask_random(domain, rng, env), f"random-{pick}")
            else:
                raw = np.zeros((3,) + domain.shape, dtype=np.complex128)
                raw[0] = (rng.standard_normal(domain.shape) + 1j * rng.standard_normal(domain.shape)) * env
                consider(SpectralField(domain, hermitian_symmetrize(raw)), f"random-{pick}")

    if refine and refine_budget > 0:
        ratio_fn = lambda cand: _RATIO_DISPATCH[inequality](cand, params)
        refined, refined_ratio = _refine_coordinates(best, ratio_fn, rng, refine_budget)
        if refined_ratio > best_ratio:
            best, best_ratio = refined, refined_ratio
            best_kind += "+ascent"

    res = (domain.n1, domain.n2) if inequality == "planar-l4" else (domain.n1, domain.n2, domain.n3)
    return ConstantEstimate(
        inequality=inequality,
        l1=domain.l1,
        l2=domain.l2,
        eps=None if inequality == "planar-l4" else domain.eps,
        resolution=res,
        trial_count=trials,
        max_ratio=best_ratio,
        maximizer=best,
        best_trial_kind=best_kind,
        params=params,
        ensemble_best=ensemble_best,
    )


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares log-log slope of max_ratio against eps."""

    inequality: str
    eps_values: np.ndarray
    max_ratios: np.ndarray
    slope: float
    intercept: float
    stderr: float
    expected_slope: float | None
    normalized_ratios: np.ndarray

    def to_dict(self) -> dict:
        return {
            "inequality": self.inequality,
            "eps_values": self.eps_values.tolist(),
            "max_ratios": self.max_ratios.tolist(),
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "expected_slope": self.expected_slope,
            "normalized_ratios": self.normalized_ratios.tolist(),
        }


_EXPECTED_SLOPE = {"thin-sup": 0.5, "thin-l4": 0.25}


def fit_eps_scaling(
    inequality: str,
    eps_values,
    estimates: list[ConstantEstimate],
) -> ScalingFit:
    """Slope of log(max_ratio) vs log(eps) over a sweep of estimates.

    Needs at least 3 points (4+, geometric, recommended).  The normalized
    ratios divide out the predicted eps power, so a correct scaling reads
    as flatness.
    """
    eps_values = np.asarray(eps_values, dtype=float)
    if len(eps_values) < 3:
        raise ValueError("need at least 3 eps values to fit a slope")
    if len(estimates) != len(eps_values):
        raise ValueError("one estimate per eps value required")
    ratios = np.array([e.max_ratio for e in estimates])
    x = np.log(eps_values)
    y = np.log(ratios)
    coef, cov = np.polyfit(x, y, 1, cov=True)
    slope, intercept = float(coef[0]), float(coef[1])
    stderr = float(np.sqrt(cov[0, 0]))
    expected = _EXPECTED_SLOPE.get(inequality)
    normalized = ratios / eps_values ** (expected if expected is not None else 0.0)
    return ScalingFit(
        inequality=inequality,
        eps_values=eps_values,
        max_ratios=ratios,
        slope=slope,
        intercept=intercept,
        stderr=stderr,
        expected_slope=expected,
        normalized_ratios=normalized,
    )


def thin_sweep_resolution(
    eps: float, l1: float = 4.0, beta: float = 0.25, cap: int = 64, n3: int = 2
) -> tuple[int, int, int]:
    """Horizontal resolution rule for thin-constant sweeps.

    The extremizing fields concentrate at horizontal frequency ~ 1/eps, so
    the retained horizontal band n1/l1 must track beta/eps; keeping
    beta = n1 eps / l1 constant across a sweep removes the truncation's own
    eps dependence from the fitted slope.  With the default l1 = 4 box this
    is n1 = 1/eps for the usual dyadic eps sweep.
    """
    n = int(min(cap, max(4, round(beta * l1 / eps))))
    return (n, n, n3)


def write_sweep_csv(path, eps_values, estimates: list[ConstantEstimate]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eps", "n1", "n2", "n3", "max_ratio", "trials", "best_kind"])
        for eps, est in zip(eps_values, estimates):
            res = est.resolution if len(est.resolution) == 3 else est.resolution + (0,)
            writer.writerow(
                [eps, res[0], res[1], res[2], f"{est.max_ratio:.17g}", est.trial_count, est.best_trial_kind]
            )


def estimate_to_json(estimate: ConstantEstimate, path, maximizer_ref: str | None = None) -> None:
    doc = estimate.to_dict()
    doc["maximizer_checkpoint"] = maximizer_ref
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
