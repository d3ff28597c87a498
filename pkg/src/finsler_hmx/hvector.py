"""h-vector fields: construction, residuals, covariant-derivative tensors and search."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import jets
from .fields import Poly, monomial_basis
from .finsler import FinslerSpace, TensorFrame, cov_derivs, fundamental_tensors
from .jets import Jet, PointDirection

POLE_TOL = 1e-6
BETA_TOL = 1e-12


class ChangeDomainError(ValueError):
    """The point-direction lies outside the domain of the metric change."""


class PoleError(ChangeDomainError):
    """tau = L / beta too close to 1, where the transformed metric blows up."""


@dataclass(frozen=True)
class HVectorField:
    """b_i(x, y) = rho0 * l_i(x, y) + c_i(x).

    In ``weak`` mode only ``L dot_j b_i = rho0 h_ij`` is guaranteed; the
    second h-vector condition is not and must be checked by residual.
    """

    rho0: float
    c: tuple[Poly, ...]
    mode: str = "weak"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.rho0 == 0:
            raise ValueError("rho0 must be non-zero")

    @property
    def dim(self) -> int:
        return len(self.c)

    def c_value(self, x: Sequence[float]) -> np.ndarray:
        return np.array([float(ci(list(x))) for ci in self.c])

    def jet(self, Ljet: Jet, point: PointDirection) -> Jet:
        """Jet of b_i; the y-cap is one below that of ``Ljet``."""
        xs = [Jet.variable(Ljet.alg, i, point.x[i]) for i in range(point.n)]
        cvals = [ci(xs) for ci in self.c]
        l = Ljet.grad(1)
        if any(isinstance(v, Jet) for v in cvals):
            return self.rho0 * l + jets.stack(cvals)
        return self.rho0 * l + np.array(cvals, dtype=float)


def weak_h_vector(rho0: float, c: Sequence[Poly]) -> HVectorField:
    return HVectorField(float(rho0), tuple(c), "weak")


def gradient_field(f: Poly) -> tuple[Poly, ...]:
    return tuple(f.gradient())


@dataclass
class HVectorData:
    """h-vector quantities at one point-direction.

    ``bh[i, j] = b_{i|j}``; E and F are its symmetric and antisymmetric parts.
    Contractions with y are written with a ``0`` suffix.
    """

    b: np.ndarray
    beta: float
    tau: float
    rho: float
    m: np.ndarray
    m_up: np.ndarray
    m2: float
    bh: np.ndarray
    bv: np.ndarray
    E: np.ndarray
    F: np.ndarray
    beta_j: np.ndarray
    rho_k: np.ndarray
    E00: float
    E_j0: np.ndarray
    F_j0: np.ndarray
    F_up0: np.ndarray
    F_beta0: float
    db: np.ndarray  # [i, j] = dot_j b_i


def domain_guard(L: float, beta: float) -> float:
    if abs(beta) < BETA_TOL:
        raise ChangeDomainError(f"beta = {beta!r} vanishes; tau = L/beta undefined")
    tau = L / beta
    if abs(tau - 1.0) < POLE_TOL:
        raise PoleError(f"tau = {tau!r} is within {POLE_TOL} of the pole tau = 1")
    return tau


def ef_tensors(frame: TensorFrame, bjet: Jet, rho: float) -> HVectorData:
    y = frame.y
    b = bjet.value
    beta = float(b @ y)
    tau = domain_guard(frame.L, beta)
    m = b - frame.l / tau
    m_up = frame.ginv @ m
    bh, bv = cov_derivs(frame, bjet)
    E = 0.5 * (bh + bh.T)
    F = 0.5 * (bh - bh.T)
    F_j0 = F @ y
    return HVectorData(
        b=b,
        beta=beta,
        tau=tau,
        rho=float(rho),
        m=m,
        m_up=m_up,
        m2=float(m @ m_up),
        bh=bh,
        bv=bv,
        E=E,
        F=F,
        beta_j=y @ bh,
        rho_k=np.zeros(frame.n),
        E00=float(y @ E @ y),
        E_j0=E @ y,
        F_j0=F_j0,
        F_up0=frame.ginv @ F_j0,
        F_beta0=float(F_j0 @ m_up),
        db=bjet.grad(1).value,
    )


def h_vector_residuals(frame: TensorFrame, bjet: Jet, rho: float) -> dict[str, float]:
    """Residuals of the weak identity, the second h-vector condition and gradientness."""
    b = bjet.value
    db = bjet.grad(1).value
    r_eq2 = np.max(np.abs(frame.L * db - rho * frame.h))
    r_ii = np.max(np.abs(frame.L * np.einsum("hij,h->ij", frame.Cm, b) - rho * frame.h))
    out = {"weak": float(r_eq2), "cond_ii": float(r_ii)}
    if frame.F is not None and bjet.alg.caps[0] >= 1:
        bh, bv = cov_derivs(frame, bjet)
        out["gradient"] = float(np.max(np.abs(0.5 * (bh - bh.T))))
        out["cond_i"] = float(np.max(np.abs(bv)))
    return out


# search ----------------------------------------------------------------------


@dataclass(frozen=True)
class SearchSample:
    """Metric data entering the second h-vector condition at one point."""

    x: tuple[float, ...]
    L: float
    Cm: np.ndarray
    h: np.ndarray


@dataclass
class SearchResult:
    status: str
    best_rho0: float
    best_residual: float
    normalized_residual: float
    coefficients: np.ndarray  # [i, a] coefficient of monomial a in c_i, at best_rho0
    direction: np.ndarray  # coefficients per unit rho0
    monomials: list[tuple[int, ...]]
    rank: int
    curve: list[tuple[float, float]]

    def field(self) -> HVectorField:
        polys = tuple(
            Poly(tuple((float(cf), e) for cf, e in zip(row, self.monomials) if cf != 0.0))
            for row in self.coefficients
        )
        return HVectorField(self.best_rho0, polys, "searched")


def samples_from_space(space: FinslerSpace, points: Sequence[PointDirection]) -> list[SearchSample]:
    out = []
    for pt in points:
        fr = fundamental_tensors(space, pt)
        out.append(SearchSample(pt.x, fr.L, fr.Cm, fr.h))
    return out


def _design(samples: Sequence[SearchSample], monos: list[tuple[int, ...]]):
    n = len(samples[0].x)
    rows, rhs = [], []
    iu = np.triu_indices(n)
    for s in samples:
        xm = np.array([np.prod(np.power(s.x, e)) for e in monos])
        # column (h, a) -> L C^h_ij x^a
        block = s.L * np.einsum("hij,a->ijha", s.Cm, xm)[iu]
        rows.append(block.reshape(block.shape[0], -1))
        rhs.append(s.h[iu])
    return np.vstack(rows), np.concatenate(rhs)


def search_h_vector(
    samples: Sequence[SearchSample],
    degree: int = 1,
    rho_bounds: tuple[float, float] = (0.01, 1.0),
    grid: int = 21,
    tol: float = 1e-8,
) -> SearchResult:
    """Least-squares probe of the second h-vector condition over polynomial c(x).

    For the weak ansatz b = rho0 l + c(x) the residual L C^h_ij b_h - rho0 h_ij
    is linear in (c, rho0), so each rho0 on the grid is an exact linear
    least-squares solve.  The result reports evidence only.
    """
    if len(samples) < 10:
        raise ValueError("search needs at least 10 sample points")
    lo, hi = (float(v) for v in rho_bounds)
    if not 0 < lo <= hi:
        raise ValueError("rho bounds must satisfy 0 < lo <= hi")
    n = len(samples[0].x)
    monos = monomial_basis(n, degree)
    A, h = _design(samples, monos)
    sol, _, rank, _ = np.linalg.lstsq(A, h, rcond=None)
    unit_res = float(np.linalg.norm(A @ sol - h))
    curve = []
    best = (np.inf, lo, sol * lo)
    for rho in np.linspace(lo, hi, grid):
        for r in (rho, -rho):
            th, *_ = np.linalg.lstsq(A, r * h, rcond=None)
            res = float(np.linalg.norm(A @ th - r * h))
            if r > 0:
                curve.append((float(r), res))
            if res < best[0] - 1e-15:
                best = (res, float(r), th)
    res, rho_best, th = best
    if not np.isfinite(res):
        status = "inconclusive"
    elif unit_res < tol:
        status = "candidate"
    else:
        status = "no-candidate"
    return SearchResult(
        status=status,
        best_rho0=rho_best,
        best_residual=res,
        normalized_residual=unit_res,
        coefficients=th.reshape(n, len(monos)),
        direction=sol.reshape(n, len(monos)),
        monomials=monos,
        rank=int(rank),
        curve=curve,
    )
