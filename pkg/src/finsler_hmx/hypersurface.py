"""Hypersurfaces x = x(u) of a Finsler space and of its h-Matsumoto transform.

Charts are written with the jet arithmetic so that B^i_alpha and
B^i_alpha_beta come from exact second-order jets in u.  The unit normal is
the g-normalized solution of g_ij B^i_alpha B^j = 0 with the sign fixed by
``orient_normal``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import jets
from .fields import Poly
from .finsler import FinslerSpace, TensorFrame, connections
from .hmatsumoto import HMFrame, HMScalars, difference_tensors
from .hvector import HVectorData
from .jets import DegeneracyError, Jet, PointDirection

CLASSIFY_TOL = 1e-8
TANGENCY_TOL = 1e-9
RANK_TOL = 1e-10
FD_STEP = 1e-5
KINDS = ("third", "second", "first", "none")


class ChartError(ValueError):
    """Rank-deficient chart or degenerate induced metric."""


# charts ----------------------------------------------------------------------


@dataclass(frozen=True)
class Chart:
    """Parametrization u in R^(n-1) -> x in R^n (jet-compatible)."""

    n: int
    family: str
    x: Callable = field(repr=False, compare=False)
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, u):
        return self.x(u)


def hyperplane(n: int, axis: int | None = None, offset: float = 0.0) -> Chart:
    """x^axis = offset, the other coordinates are u in order."""
    axis = n - 1 if axis is None else axis
    if not 0 <= axis < n:
        raise ChartError(f"axis {axis} out of range for n = {n}")

    def x(u):
        out = list(u)
        out.insert(axis, offset)
        return out

    return Chart(n, "hyperplane", x, {"axis": axis, "offset": offset})


def sphere(n: int, radius: float = 1.0, center: Sequence[float] | None = None) -> Chart:
    """Round sphere in hyperspherical angles.

    For n = 3: x = (sin u1 cos u2, sin u1 sin u2, cos u1).  In general
    x^n = cos u1, x^(n-1) = sin u1 cos u2, ..., and the last angle is shared by
    x^1 (cosine) and x^2 (sine).
    """
    if n < 2:
        raise ChartError("sphere needs n >= 2")
    center = [0.0] * n if center is None else [float(c) for c in center]
    if radius <= 0:
        raise ChartError("radius must be positive")

    def x(u):
        if n == 2:
            pts = [jets.sin(u[0]), jets.cos(u[0])]
        else:
            pts = [None] * n
            s = 1.0
            for a in range(n - 2):
                pts[n - 1 - a] = s * jets.cos(u[a])
                s = s * jets.sin(u[a])
            pts[0] = s * jets.cos(u[n - 2])
            pts[1] = s * jets.sin(u[n - 2])
        return [c + radius * p for c, p in zip(center, pts)]

    return Chart(n, "sphere", x, {"radius": radius, "center": center})


def graph(n: int, f: Poly) -> Chart:
    """x = (u, f(u)) for a polynomial f in n - 1 variables."""

    def x(u):
        return list(u) + [f(list(u))]

    return Chart(n, "graph", x, {"f": f.to_spec()})


def chart_from_config(block: dict, n: int) -> Chart:
    fam = block["family"]
    if fam == "hyperplane":
        return hyperplane(n, block.get("axis"), float(block.get("offset", 0.0)))
    if fam == "sphere":
        return sphere(n, float(block.get("radius", 1.0)), block.get("center"))
    if fam == "graph":
        return graph(n, Poly.from_spec(block["f"], n - 1))
    raise ChartError(f"unknown hypersurface family {fam!r}")


def chart_jets(chart: Chart, u: Sequence[float]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """x, B^i_alpha [i, a] and B^i_alpha_beta [i, a, b] from a second-order jet."""
    k = chart.n - 1
    alg = jets.algebra(((k, 2),))
    uj = [Jet.variable(alg, a, float(u[a])) for a in range(k)]
    comps = [c if isinstance(c, Jet) else Jet.constant(alg, float(c)) for c in chart(uj)]
    X = jets.stack(comps)
    d1 = X.grad(0)
    return X.value, d1.value, d1.grad(0).value


# frame -----------------------------------------------------------------------


def orient_normal(B: np.ndarray) -> np.ndarray:
    """Last component non-negative; if it vanishes, first nonzero component positive."""
    scale = float(np.max(np.abs(B)))
    if abs(B[-1]) > 1e-12 * scale:
        return B if B[-1] > 0 else -B
    for v in B:
        if abs(v) > 1e-12 * scale:
            return B if v > 0 else -B
    return B


def unit_normal(g: np.ndarray, B_alpha: np.ndarray) -> np.ndarray:
    """Solve g_ij B^i_alpha B^j = 0 and normalize so that g_ij B^i B^j = 1."""
    _, s, vt = np.linalg.svd(B_alpha.T)
    w = vt[-1]  # covector annihilating the tangent space
    B = np.linalg.solve(g, w)
    nrm = float(B @ g @ B)
    if nrm <= 0:
        raise ChartError("normal has non-positive length; metric not positive definite")
    return orient_normal(B / math.sqrt(nrm))


@dataclass
class HypersurfaceFrame:
    """Frame of a hypersurface at (u, v) with the ambient connections at (x(u), y)."""

    u: np.ndarray
    v: np.ndarray
    x: np.ndarray
    y: np.ndarray
    B_alpha: np.ndarray  # [i, a]
    B_ab: np.ndarray  # [i, a, b]
    g_ab: np.ndarray
    g_ab_inv: np.ndarray
    B_up: np.ndarray
    B_low: np.ndarray
    B_inv: np.ndarray  # [a, i] = B^a_i
    base: TensorFrame

    @property
    def n(self) -> int:
        return len(self.x)

    def identity_residuals(self) -> dict[str, float]:
        g = self.base.g
        Ba, B, Bl, Bi = self.B_alpha, self.B_up, self.B_low, self.B_inv
        k = Ba.shape[1]
        return {
            "normal_orthogonal": float(np.max(np.abs(Ba.T @ g @ B))),
            "normal_unit": abs(float(B @ g @ B) - 1.0),
            "inverse_projection": float(np.max(np.abs(Bi - self.g_ab_inv @ Ba.T @ g))),
            "duality_ab": float(np.max(np.abs(Bi @ Ba - np.eye(k)))),
            "duality_a_normal": float(np.max(np.abs(Ba.T @ Bl))),
            "duality_normal_a": float(np.max(np.abs(Bi @ B))),
            "duality_normal": abs(float(B @ Bl) - 1.0),
            "completeness": float(np.max(np.abs(Ba @ Bi + np.outer(B, Bl) - np.eye(self.n)))),
            "y_normal": abs(float(g @ self.y @ B)) / max(1.0, float(np.linalg.norm(self.y))),
        }


def chart_frame(
    space: FinslerSpace, chart: Chart, u: Sequence[float], v: Sequence[float], caps=(1, 4)
) -> HypersurfaceFrame:
    if chart.n != space.dim:
        raise ChartError(f"chart dimension {chart.n} != space dimension {space.dim}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (chart.n - 1,) or v.shape != (chart.n - 1,):
        raise ChartError(f"u and v must have {chart.n - 1} components")
    x, Ba, Bab = chart_jets(chart, u)
    s = np.linalg.svd(Ba, compute_uv=False)
    if s[-1] <= RANK_TOL * max(1.0, s[0]):
        raise ChartError(f"chart is rank deficient at u = {u.tolist()} (singular values {s.tolist()})")
    y = Ba @ v
    base = connections(space, PointDirection(x, y), caps)
    g = base.g
    gab = Ba.T @ g @ Ba
    try:
        np.linalg.cholesky(gab)
    except np.linalg.LinAlgError:
        raise ChartError("induced metric is not positive definite") from None
    gab_inv = jets.checked_inv(gab, "induced metric")
    B = unit_normal(g, Ba)
    return HypersurfaceFrame(u, v, x, y, Ba, Bab, gab, gab_inv, B, g @ B, gab_inv @ Ba.T @ g, base)


# fundamentals ----------------------------------------------------------------


@dataclass
class HypersurfaceFundamentals:
    H_a: np.ndarray
    H_0: float
    H_ab: np.ndarray
    M_a: np.ndarray
    M_ab: np.ndarray
    kind: str
    kind_residuals: dict
    tol: float

    def relation_residuals(self, v: np.ndarray) -> dict[str, float]:
        H0a = v @ self.H_ab
        Ha0 = self.H_ab @ v
        return {
            "H_0a": float(np.max(np.abs(H0a - self.H_a))),
            "H_a0": float(np.max(np.abs(Ha0 - self.H_a - self.M_a * self.H_0))),
            "M_ab_symmetry": float(np.max(np.abs(self.M_ab - self.M_ab.T))),
        }


def classify(H_a, H_ab, M_ab, tol: float = CLASSIFY_TOL) -> tuple[str, dict]:
    """Hyperplane kind; each kind's defining residual is returned with it."""
    res = {
        "first": float(np.max(np.abs(H_a))),
        "second": float(np.max(np.abs(H_ab))),
        "third": float(max(np.max(np.abs(H_ab)), np.max(np.abs(M_ab)))),
    }
    for kind in KINDS[:-1]:
        if res[kind] < tol:
            return kind, res
    return "none", res


def normal_curvature(Bl, Ba, Bab, v, N) -> np.ndarray:
    """H_alpha = B_i (B^i_0alpha + G^i_j B^j_alpha)."""
    B0a = np.einsum("iba,b->ia", Bab, v)
    return Bl @ (B0a + N @ Ba)


def fundamentals(hf: HypersurfaceFrame, tol: float = CLASSIFY_TOL) -> HypersurfaceFundamentals:
    fr = hf.base
    Ba, B, Bl = hf.B_alpha, hf.B_up, hf.B_low
    H_a = normal_curvature(Bl, Ba, hf.B_ab, hf.v, fr.N)
    H_0 = float(H_a @ hf.v)
    M_a = np.einsum("ijk,ia,j,k->a", fr.C, Ba, B, B)
    M_ab = np.einsum("ijk,ja,kb,i->ab", fr.C, Ba, Ba, B)
    H_ab = Bl @ (hf.B_ab + np.einsum("ijk,ja,kb->iab", fr.F, Ba, Ba)).reshape(hf.n, -1)
    H_ab = H_ab.reshape(M_ab.shape) + np.outer(M_a, H_a)
    kind, res = classify(H_a, H_ab, M_ab, tol)
    return HypersurfaceFundamentals(H_a, H_0, H_ab, M_a, M_ab, kind, res, tol)


# relative covariant derivatives ---------------------------------------------


def induced_cartan(hf: HypersurfaceFrame, fund: HypersurfaceFundamentals):
    """Induced F^a_bc, G^a_b and C^a_bc."""
    fr = hf.base
    Ba, Bi = hf.B_alpha, hf.B_inv
    A = hf.B_ab + np.einsum("ijk,jb,kc->ibc", fr.F, Ba, Ba)
    M_up = hf.g_ab_inv @ fund.M_ab  # M^a_b
    F_ind = np.einsum("ai,ibc->abc", Bi, A) + np.einsum("ab,c->abc", M_up, fund.H_a)
    B0b = np.einsum("icb,c->ib", hf.B_ab, hf.v)
    G_ind = Bi @ (B0b + fr.N @ Ba)
    C_ind = np.einsum("ai,ijk,jb,kc->abc", Bi, fr.Cm, Ba, Ba)
    return F_ind, G_ind, C_ind


def _normal_at(space: FinslerSpace, chart: Chart, u, v) -> np.ndarray:
    from .finsler import fundamental_tensors

    x, Ba, _ = chart_jets(chart, u)
    fr = fundamental_tensors(space, PointDirection(x, Ba @ np.asarray(v)))
    return unit_normal(fr.g, Ba)


def normal_derivatives(space, chart, u, v, step: float = FD_STEP) -> tuple[np.ndarray, np.ndarray]:
    """Central differences of B^i in u and in v, as [i, beta] arrays."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    k = len(u)
    du = np.zeros((chart.n, k))
    dv = np.zeros((chart.n, k))
    for b in range(k):
        e = np.zeros(k)
        e[b] = step
        du[:, b] = (_normal_at(space, chart, u + e, v) - _normal_at(space, chart, u - e, v)) / (2 * step)
        dv[:, b] = (_normal_at(space, chart, u, v + e) - _normal_at(space, chart, u, v - e)) / (2 * step)
    return du, dv


def relative_derivative_check(
    space: FinslerSpace, chart: Chart, hf: HypersurfaceFrame, fund: HypersurfaceFundamentals, step: float = FD_STEP
) -> dict[str, float]:
    """Residuals of the four relative-derivative relations of the frame."""
    fr = hf.base
    Ba, B = hf.B_alpha, hf.B_up
    F_ind, G_ind, C_ind = induced_cartan(hf, fund)
    # B^i_alpha|beta
    lhs_h = (
        hf.B_ab
        + np.einsum("ijk,ja,kb->iab", fr.F, Ba, Ba)
        - np.einsum("ic,cab->iab", Ba, F_ind)
        + np.einsum("ijk,ja,k,b->iab", fr.Cm, Ba, B, fund.H_a)
    )
    rhs_h = np.einsum("ab,i->iab", fund.H_ab, B)
    # B^i_alpha|_beta
    lhs_v = np.einsum("ja,ijk,kb->iab", Ba, fr.Cm, Ba) - np.einsum("ic,cab->iab", Ba, C_ind)
    rhs_v = np.einsum("ab,i->iab", fund.M_ab, B)
    # normal: derivatives of B^i by finite differences
    du, dv = normal_derivatives(space, chart, hf.u, hf.v, step)
    delta = du - dv @ G_ind  # delta_beta B^i = d_u B^i - G^a_beta d_v^a B^i
    lhs_nh = delta + np.einsum("j,ijk,kb->ib", B, fr.F, Ba) + np.einsum("j,ijk,k,b->ib", B, fr.Cm, B, fund.H_a)
    up = fr.ginv @ hf.B_inv.T  # [i, a] = B^a_j g^ij
    rhs_nh = -up @ fund.H_ab
    lhs_nv = dv + np.einsum("j,ijk,kb->ib", B, fr.Cm, Ba)
    rhs_nv = -up @ fund.M_ab
    return {
        "tangent_h": float(np.max(np.abs(lhs_h - rhs_h))),
        "tangent_v": float(np.max(np.abs(lhs_v - rhs_v))),
        "normal_h": float(np.max(np.abs(lhs_nh - rhs_nh))),
        "normal_v": float(np.max(np.abs(lhs_nv - rhs_nv))),
    }


# transformed hypersurface ----------------------------------------------------


@dataclass
class BarredHypersurface:
    tangent: bool
    tangency: float  # |b_j B^j|
    B_up: np.ndarray  # direct solve in gbar
    B_low: np.ndarray
    B_up_closed: np.ndarray | None  # B / sqrt(p) when tangent
    B_low_closed: np.ndarray | None
    g_ab: np.ndarray
    g_ab_inv: np.ndarray
    B_inv: np.ndarray  # gbar^ab gbar_ij B^j_b
    B_inv_unbarred: np.ndarray  # gbar^ab g_ij B^j_b (metric left unbarred)
    residuals: dict


def barred_hypersurface(hf: HypersurfaceFrame, hv: HVectorData, hmf: HMFrame) -> BarredHypersurface:
    s: HMScalars = hmf.scalars
    if s.p <= 0:
        raise DegeneracyError(f"p = {s.p!r} <= 0: sqrt(p) undefined (tau = {s.tau!r}, rho = {s.rho!r})", math.inf)
    gb = hmf.gbar
    Ba, B = hf.B_alpha, hf.B_up
    bB = float(hv.b @ B)
    tangency = abs(bB) / max(1.0, float(np.linalg.norm(hv.b)))
    tangent = tangency < TANGENCY_TOL
    Bbar = unit_normal(gb, Ba)
    Bbar_low = gb @ Bbar
    gab = Ba.T @ gb @ Ba
    gab_inv = jets.checked_inv(gab, "transformed induced metric")
    Binv = gab_inv @ Ba.T @ gb
    Binv_unbarred = gab_inv @ Ba.T @ hf.base.g
    mB = float(hv.m @ B)
    res = {
        "normal_length": abs(float(B @ gb @ B) - (s.p + s.p3 * mB**2)) / max(1.0, s.p),
        "normal_mixed": float(np.max(np.abs(Ba.T @ gb @ B - (hmf.Q @ Ba) * mB))),
        "duality_ab": float(np.max(np.abs(Binv @ Ba - np.eye(Ba.shape[1])))),
        "duality_a_normal": float(np.max(np.abs(Ba.T @ Bbar_low))),
        "duality_normal_a": float(np.max(np.abs(Binv @ Bbar))),
        "duality_normal": abs(float(Bbar @ Bbar_low) - 1.0),
    }
    closed_up = closed_low = None
    if tangent:
        sp = math.sqrt(s.p)
        closed_up = B / sp
        closed_low = sp * hf.B_low
        res["normal_closed"] = float(np.max(np.abs(closed_up - Bbar)))
        res["normal_low_closed"] = float(np.max(np.abs(closed_low - gb @ closed_up))) / max(1.0, sp)
        res["orthonormal_orth"] = float(np.max(np.abs(Ba.T @ gb @ closed_up)))
        res["orthonormal_unit"] = abs(float(closed_up @ gb @ closed_up) - 1.0)
    return BarredHypersurface(tangent, bB, Bbar, Bbar_low, closed_up, closed_low, gab, gab_inv, Binv, Binv_unbarred, res)


def second_condition_predicate(hf: HypersurfaceFrame, hv: HVectorData) -> float:
    """|E_i0 B^i| (zero under the hypothesis used for the reduced projection)."""
    return abs(float(hv.E_j0 @ hf.B_up))


@dataclass
class BarredFundamentals:
    H0_direct: float
    H0_formula: float  # sqrt(p)(H_0 + B_i D^i)
    H0_scaled: float  # sqrt(p) H_0
    M_ab_scaled: np.ndarray  # sqrt(p) M_ab
    M_ab_closed: np.ndarray  # Cbar (closed form) on B_a, B_b, Bbar
    M_ab_direct: np.ndarray  # Cbar (jet-direct) on B_a, B_b, Bbar
    gradient: float
    tangent: bool
    predicate: float
    condition_ii: float
    second_fundamental: float | None  # residual, or None when gated


def barred_fundamentals_hs(
    hf: HypersurfaceFrame,
    fund: HypersurfaceFundamentals,
    hv: HVectorData,
    hmf: HMFrame,
    bh: BarredHypersurface,
    direct: TensorFrame,
    gate_tol: float = TANGENCY_TOL,
) -> BarredFundamentals:
    """Transformed normal curvature and v-tensor, by closed form and directly.

    ``direct`` must carry the connections of the transformed space at (x, y).
    """
    s = hmf.scalars
    sp = math.sqrt(s.p)
    dt = difference_tensors(hf.base, hv, hmf)
    Ba, v = hf.B_alpha, hf.v
    Hbar_a = normal_curvature(bh.B_low, Ba, hf.B_ab, v, direct.N)
    H0_direct = float(Hbar_a @ v)
    H0_formula = sp * (fund.H_0 + float(hf.B_low @ dt.D))
    Bbar = bh.B_up
    M_closed = np.einsum("ijk,ia,jb,k->ab", hmf.Cbar, Ba, Ba, Bbar)
    M_direct = np.einsum("ijk,ia,jb,k->ab", direct.C, Ba, Ba, Bbar)
    grad = float(np.max(np.abs(hv.F)))
    pred = second_condition_predicate(hf, hv)
    cond_ii = float(np.max(np.abs(hf.base.L * np.einsum("hij,h->ij", hf.base.Cm, hv.b) - hv.rho * hf.base.h)))
    sf = None
    if bh.tangent and grad < gate_tol and pred < gate_tol and cond_ii < gate_tol:
        lam, _ = s.lambda_phi(hv.E00)
        Mbar_a = np.einsum("ijk,ia,j,k->a", direct.C, Ba, Bbar, Bbar)
        Hbar_ab = bh.B_low @ (hf.B_ab + np.einsum("ijk,ja,kb->iab", direct.F, Ba, Ba)).reshape(hf.n, -1)
        Hbar_ab = Hbar_ab.reshape(fund.M_ab.shape) + np.outer(Mbar_a, Hbar_a)
        lhs = Hbar_ab - np.outer(Mbar_a, Hbar_a)
        rhs = sp * (fund.H_ab - s.q * lam * fund.M_ab) - sp * np.outer(fund.M_a, fund.H_a)
        sf = float(np.max(np.abs(lhs - rhs)))
    return BarredFundamentals(
        H0_direct, H0_formula, sp * fund.H_0, sp * fund.M_ab, M_closed, M_direct,
        grad, bh.tangent, pred, cond_ii, sf,
    )


# induced connections ----------------------------------------------------------


@dataclass
class InducedConnections:
    K: np.ndarray  # [i, b, c]
    A: np.ndarray
    P_ind: np.ndarray  # [a, b, c]
    G_ind: np.ndarray
    reconstruction: dict
    first_kind: bool


def induced_connections(hf: HypersurfaceFrame, fund: HypersurfaceFundamentals) -> InducedConnections:
    fr = hf.base
    Ba, Bi, B, Bl = hf.B_alpha, hf.B_inv, hf.B_up, hf.B_low
    K = np.einsum("ijk,jb,kc->ibc", fr.P, Ba, Ba)
    A = hf.B_ab + np.einsum("ijk,jb,kc->ibc", fr.berwald, Ba, Ba)
    P_ind = np.einsum("ai,ibc->abc", Bi, K)
    G_ind = np.einsum("ai,ibc->abc", Bi, A)
    rec = {
        "K": float(np.max(np.abs(K - np.einsum("id,dbc->ibc", Ba, P_ind) - np.einsum("i,h,hbc->ibc", B, Bl, K)))),
        "A": float(np.max(np.abs(A - np.einsum("id,dbc->ibc", Ba, G_ind) - np.einsum("i,h,hbc->ibc", B, Bl, A)))),
    }
    return InducedConnections(K, A, P_ind, G_ind, rec, fund.kind_residuals["first"] < fund.tol)


def parallel_inputs(hv: HVectorData) -> HVectorData:
    """Copy of ``hv`` with b_{i|j} = 0 injected (E = F = 0, rho_k = 0)."""
    n = len(hv.b)
    z = np.zeros((n, n))
    return HVectorData(
        b=hv.b, beta=hv.beta, tau=hv.tau, rho=hv.rho, m=hv.m, m_up=hv.m_up, m2=hv.m2,
        bh=z, bv=hv.bv, E=z, F=z, beta_j=np.zeros(n), rho_k=np.zeros(n), E00=0.0,
        E_j0=np.zeros(n), F_j0=np.zeros(n), F_up0=np.zeros(n), F_beta0=0.0, db=hv.db,
    )


def parallel_collapse(hf: HypersurfaceFrame, hv: HVectorData, hmf: HMFrame, bh: BarredHypersurface):
    """Difference tensors and induced P, G of both spaces under parallel b.

    The Berwald difference is the y-derivative of D^i_j, which vanishes
    identically when D^i_j does; it is injected as zero.
    """
    fund = fundamentals(hf)
    ic = induced_connections(hf, fund)
    pv = parallel_inputs(hv)
    dt = difference_tensors(hf.base, pv, hmf)
    fr = hf.base
    Fbar = fr.F + dt.Djk
    Gbar = fr.berwald + np.zeros_like(fr.berwald)
    Pbar = Gbar - Fbar
    Ba = hf.B_alpha
    Kbar = np.einsum("ijk,jb,kc->ibc", Pbar, Ba, Ba)
    Abar = hf.B_ab + np.einsum("ijk,jb,kc->ibc", Gbar, Ba, Ba)
    Pbar_ind = np.einsum("ai,ibc->abc", bh.B_inv, Kbar)
    Gbar_ind = np.einsum("ai,ibc->abc", bh.B_inv, Abar)
    return {
        "D": float(np.max(np.abs(dt.D))),
        "Dj": float(np.max(np.abs(dt.Dj))),
        "Djk": float(np.max(np.abs(dt.Djk))),
        "P_ind": float(np.max(np.abs(Pbar_ind - ic.P_ind))),
        "G_ind": float(np.max(np.abs(Gbar_ind - ic.G_ind))),
        "first_kind": ic.first_kind,
    }
