"""Finsler spaces, their metric tensors and the Cartan connection at a point-direction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import jets
from .fields import Poly, polys_from_spec
from .jets import DegeneracyError, Jet, PointDirection

# v-covariant derivative convention recorded in every report:
# X_i|_j = dot_partial_j X_i - X_r C^r_ij  (no factor L)
V_DERIVATIVE_CONVENTION = "unscaled"
CARTAN_ASSEMBLY = "three-term horizontal formula with Cartan-tensor correction"


@dataclass(frozen=True)
class FinslerSpace:
    """A fundamental function L(x, y) on an n-dimensional manifold.

    ``L`` must be written with the arithmetic of :mod:`finsler_hmx.jets` so it
    evaluates on floats and on jets alike.
    """

    dim: int
    family: str
    L: Callable = field(repr=False, compare=False)
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, x, y):
        return self.L(x, y)

    def jet(self, point: PointDirection, caps=(1, 4)) -> Jet:
        if point.n != self.dim:
            raise ValueError(f"point has dimension {point.n}, space has {self.dim}")
        return jets.jet_lift(self.L, point, caps)


def _quadratic(a: Sequence[Sequence[Poly]], x, y):
    n = len(y)
    out = 0.0
    for i in range(n):
        for j in range(n):
            if a[i][j].terms:
                out = out + a[i][j](x) * y[i] * y[j]
    return out


def euclidean(n: int) -> FinslerSpace:
    def L(x, y):
        return jets.sqrt(sum((yi * yi for yi in y[1:]), y[0] * y[0]))

    return FinslerSpace(n, "euclidean", L, {"n": n})


def randers(a, c) -> FinslerSpace:
    """L = sqrt(a_ij(x) y^i y^j) + c_i(x) y^i with polynomial coefficient fields."""
    n = len(c)
    a = tuple(tuple(row) for row in a)

    def L(x, y):
        out = jets.sqrt(_quadratic(a, x, y))
        for ci, yi in zip(c, y):
            if ci.terms:
                out = out + ci(x) * yi
        return out

    params = {"a": [[p.to_spec() for p in row] for row in a], "c": [p.to_spec() for p in c]}
    return FinslerSpace(n, "randers", L, params)


def riemannian_diag(diag: Sequence[Poly]) -> FinslerSpace:
    """L = sqrt(sum_i a_ii(x) (y^i)^2)."""
    n = len(diag)
    diag = tuple(diag)

    def L(x, y):
        out = 0.0
        for ai, yi in zip(diag, y):
            out = out + ai(x) * yi * yi
        return jets.sqrt(out)

    return FinslerSpace(n, "riemannian", L, {"diag": [p.to_spec() for p in diag]})


def root_metric(n: int, degree: int, terms: Sequence[tuple[Poly, tuple[int, ...]]]) -> FinslerSpace:
    """L = (sum_t a_t(x) y^e_t)^(1/degree) with every y-exponent vector of total ``degree``."""
    terms = tuple((coef, tuple(int(v) for v in e)) for coef, e in terms)
    for _, e in terms:
        if len(e) != n or sum(e) != degree:
            raise ValueError(f"y-exponent {e} is not homogeneous of degree {degree}")

    def L(x, y):
        out = 0.0
        for coef, e in terms:
            t = coef(x)
            for yi, k in zip(y, e):
                for _ in range(k):
                    t = t * yi
            out = out + t
        return jets.power(out, 1.0 / degree)

    params = {"degree": degree, "terms": [[c.to_spec(), list(e)] for c, e in terms]}
    return FinslerSpace(n, "root", L, params)


def space_from_config(block: dict) -> FinslerSpace:
    family = block["family"]
    n = int(block["dim"])
    if family == "euclidean":
        return euclidean(n)
    if family == "randers":
        a = block.get("a")
        if a is None:
            a = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
        a = [list(polys_from_spec(row, n)) for row in a]
        c = polys_from_spec(block.get("c", [0.0] * n), n)
        return randers(a, c)
    if family == "riemannian":
        return riemannian_diag(polys_from_spec(block.get("diag", [1.0] * n), n))
    if family == "root":
        terms = [(Poly.from_spec(coef, n), tuple(e)) for coef, e in block["terms"]]
        return root_metric(n, int(block["degree"]), terms)
    raise ValueError(f"unknown metric family {family!r}")


@dataclass
class TensorFrame:
    """Base-space tensors at one point-direction.

    Index placement follows the array axes: ``C[i, j, k] = C_ijk``,
    ``Cm[i, j, k] = C^i_jk``, ``N[i, j] = G^i_j``, ``F[i, j, k] = F^i_jk``.
    Connection fields stay ``None`` when only the metric part was requested.
    """

    point: PointDirection
    L: float
    l: np.ndarray
    h: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    C: np.ndarray
    Cm: np.ndarray
    dxg: np.ndarray | None = None
    spray: np.ndarray | None = None
    N: np.ndarray | None = None
    berwald: np.ndarray | None = None
    F: np.ndarray | None = None
    P: np.ndarray | None = None

    @property
    def y(self) -> np.ndarray:
        return np.array(self.point.y)

    @property
    def n(self) -> int:
        return self.point.n

    def delta_g(self) -> np.ndarray:
        """delta_k g_ij = d_k g_ij - G^m_k dot_partial_m g_ij, stored as [i, j, k]."""
        return self.dxg - 2.0 * np.einsum("mk,ijm->ijk", self.N, self.C)


def _positive_definite(g: np.ndarray, what: str) -> None:
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise DegeneracyError(f"{what} is not positive definite", float(np.linalg.cond(g))) from None


def frame_from_jet(Ljet: Jet, point: PointDirection, connections: bool = True, what="g") -> TensorFrame:
    """All base tensors from the Taylor jet of a fundamental function."""
    alg = Ljet.alg
    n = point.n
    cx, cy = alg.caps
    need = 4 if connections else 3
    if cy < need or (connections and cx < 1):
        raise jets.JetConfigError(f"caps {alg.caps} too small for the requested frame")
    L = Ljet.value
    if L <= 0:
        raise DegeneracyError("fundamental function is not positive", math.inf)
    ldot = Ljet.grad(1)
    l = ldot.value
    h = L * ldot.grad(1).value
    L2 = Ljet * Ljet
    dyL2 = L2.grad(1)
    gjet = 0.5 * dyL2.grad(1)
    g = gjet.value
    g = 0.5 * (g + g.T)
    ginv = jets.checked_inv(g, f"metric tensor {what}")
    _positive_definite(g, f"metric tensor {what}")
    C = 0.5 * gjet.grad(1).value
    Cm = np.einsum("ir,rjk->ijk", ginv, C)
    frame = TensorFrame(point, L, l, h, g, ginv, C, Cm)
    if not connections:
        return frame

    Y = jets.stack([Jet.variable(alg, n + i, point.y[i]) for i in range(n)])
    frame.dxg = gjet.grad(0).value
    dxdyL2 = dyL2.grad(0)  # [l, m] = d_m dot_l L^2
    dxL2 = L2.grad(0)
    inner = jets.contract("lm,m->l", dxdyL2, Y) - dxL2
    ginv_jet = jets.inv(gjet, f"metric tensor {what}")
    G = 0.25 * jets.contract("il,l->i", ginv_jet, inner)
    Nj = G.grad(1)
    frame.spray = G.value
    frame.N = Nj.value
    frame.berwald = Nj.grad(1).value

    dg = frame.delta_g()  # [i, j, k] = delta_k g_ij
    # F_rjk = 1/2 (delta_j g_rk + delta_k g_rj - delta_r g_jk)
    Flow = 0.5 * (
        np.einsum("rkj->rjk", dg) + np.einsum("rjk->rjk", dg) - np.einsum("jkr->rjk", dg)
    )
    frame.F = np.einsum("ir,rjk->ijk", ginv, Flow)
    frame.P = frame.berwald - frame.F
    return frame


def fundamental_tensors(space: FinslerSpace, point: PointDirection) -> TensorFrame:
    return frame_from_jet(space.jet(point, (1, 3)), point, connections=False)


def connections(space: FinslerSpace, point: PointDirection, caps=(1, 4)) -> TensorFrame:
    return frame_from_jet(space.jet(point, caps), point, connections=True)


def cov_derivs(frame: TensorFrame, X: Jet) -> tuple[np.ndarray, np.ndarray]:
    """h- and v-covariant derivatives of a covector field given as an (x, y) jet.

    Returns ``(Xh, Xv)`` with ``Xh[i, j] = X_{i|j}`` and ``Xv[i, j] = X_i|_j``.
    """
    Xv0 = X.value
    dx = X.grad(0).value  # [i, j] = d_j X_i
    dy = X.grad(1).value  # [i, r] = dot_r X_i
    delta = dx - np.einsum("rj,ir->ij", frame.N, dy)
    Xh = delta - np.einsum("r,rij->ij", Xv0, frame.F)
    Xvv = dy - np.einsum("r,rij->ij", Xv0, frame.Cm)
    return Xh, Xvv


def metric_h_derivative(frame: TensorFrame) -> np.ndarray:
    """g_{ij|k}; vanishes for the Cartan connection."""
    dg = frame.delta_g()
    return (
        dg
        - np.einsum("rj,rik->ijk", frame.g, frame.F)
        - np.einsum("ir,rjk->ijk", frame.g, frame.F)
    )


def homogeneity_residuals(frame: TensorFrame) -> dict[str, float]:
    y = frame.y
    out = {
        "l_y_minus_L": abs(float(frame.l @ y) - frame.L),
        "h_y": float(np.max(np.abs(frame.h @ y))),
        "C_y": float(np.max(np.abs(frame.C @ y))),
        "g_yy_minus_L2": abs(float(y @ frame.g @ y) - frame.L**2) / max(1.0, frame.L**2),
        "g_minus_h_ll": float(np.max(np.abs(frame.g - frame.h - np.outer(frame.l, frame.l)))),
        "ginv_g": float(np.max(np.abs(frame.ginv @ frame.g - np.eye(frame.n)))),
        "C_symmetry": float(
            max(
                np.max(np.abs(frame.C - frame.C.transpose(1, 0, 2))),
                np.max(np.abs(frame.C - frame.C.transpose(0, 2, 1))),
            )
        ),
    }
    if frame.F is not None:
        out["g_hcov"] = float(np.max(np.abs(metric_h_derivative(frame))))
        out["F_y_minus_N"] = float(np.max(np.abs(np.einsum("ijk,j->ik", frame.F, y) - frame.N)))
        out["P_y"] = float(
            max(
                np.max(np.abs(np.einsum("ijk,k->ij", frame.P, y))),
                np.max(np.abs(np.einsum("ijk,j->ik", frame.P, y))),
            )
        )
        out["F_symmetry"] = float(np.max(np.abs(frame.F - frame.F.transpose(0, 2, 1))))
        out["berwald_symmetry"] = float(
            np.max(np.abs(frame.berwald - frame.berwald.transpose(0, 2, 1)))
        )
    return out


def check_homogeneity(space: FinslerSpace, point: PointDirection, lams=(0.5, 2.0, 3.0)) -> float:
    """Max of |L(x, lam y) - lam L(x, y)| / (lam L) over ``lams``."""
    x, y = list(point.x), list(point.y)
    L0 = float(space(x, y))
    worst = 0.0
    for lam in lams:
        Ll = float(space(x, [lam * v for v in y]))
        worst = max(worst, abs(Ll - lam * L0) / (lam * abs(L0)))
    return worst


def homogeneity_suite(space: FinslerSpace, points: Sequence[PointDirection]) -> dict[str, float]:
    """Worst residual of every frame identity over ``points``."""
    report: dict[str, float] = {}
    for pt in points:
        res = homogeneity_residuals(connections(space, pt))
        res["L_homogeneity"] = check_homogeneity(space, pt)
        for k, v in res.items():
            report[k] = max(report.get(k, 0.0), v)
    return report
