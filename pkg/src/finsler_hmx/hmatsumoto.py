"""The h-Matsumoto change L -> L^2 / (L - beta).

Every transformed object is available from the closed-form expressions in
terms of base tensors (``barred_fundamentals``, ``difference_tensors``) and,
independently, by differentiating the transformed fundamental function with
jets (``barred_direct``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .finsler import FinslerSpace, TensorFrame, frame_from_jet
from .hvector import ChangeDomainError, HVectorData, HVectorField, domain_guard
from .jets import Jet, PointDirection

DENOM_TOL = 1e-12


class DegenerateChangeError(ChangeDomainError):
    """A denominator of the coefficient pack vanishes."""


def _nonzero(name: str, value: float) -> float:
    if not np.isfinite(value) or abs(value) < DENOM_TOL:
        raise DegenerateChangeError(f"degenerate change: {name} = {value!r}")
    return value


@dataclass(frozen=True)
class HMScalars:
    """Scalar coefficients of the transformed metric, its inverse and Cartan tensor."""

    L: float
    beta: float
    tau: float
    rho: float
    m2: float
    p: float
    p1: float
    p2: float
    p3: float
    q: float
    q1: float
    q2: float
    q3: float
    K1: float
    K2: float
    mu: float
    q1_printed: float

    def Q(self, l: np.ndarray, m: np.ndarray) -> np.ndarray:
        return self.p2 * l + self.p3 * m

    def B(self, h: np.ndarray, m: np.ndarray) -> np.ndarray:
        return self.K1 * h + self.K2 * np.outer(m, m)

    def lambda_phi(self, E00: float) -> tuple[float, float]:
        lam = (-self.mu * (self.p * self.rho / self.L + self.m2 * self.K1) + self.K1) * E00
        phi = (-self.mu * (2 * self.K1 + self.K2 * self.m2) + self.K2) * E00
        return lam, phi

    def psi(self, lam: float, phi: float) -> tuple[float, float]:
        psi1 = (lam + phi * self.m2) * (self.q + self.q3 * self.m2)
        psi2 = (lam + phi * self.m2) * self.q3 + self.q * phi
        return psi1, psi2


def scalar_pack(L: float, tau: float, rho: float, m2: float, beta: float) -> HMScalars:
    t1 = _nonzero("tau - 1", tau - 1.0)
    _nonzero("tau", tau)
    _nonzero("beta", beta)
    p = _nonzero("p", tau**2 * (tau + rho * tau - 2) / t1**3)
    p1 = tau**2 * (1 - rho * tau) / t1**3
    p2 = tau**3 / t1**3
    p3 = 3 * tau**4 / t1**4
    K1 = tau**3 * (tau + 3 * rho * tau - 4) / (2 * L * t1**4)
    K2 = 6 * tau**4 / (beta * t1**5)
    d1 = _nonzero("3p + 2 p3 m^2", 3 * p + 2 * p3 * m2)
    d2 = _nonzero("(p1 + p) p3 - p2^2", (p1 + p) * p3 - p2**2)
    _nonzero("p + p1", p + p1)
    q = 1.0 / p
    q2 = -2 * p2 * p3 / (d1 * d2)
    q3 = -2 * p3 / (p * d1)
    # exact rank-two inverse: the l-l block of the inverse minus 1/p
    det = (p + p1) * (p + p3 * m2) - p2**2 * m2
    q1 = (p + p3 * m2) / _nonzero("det", det) - q
    q1_printed = -0.5 * ((p1 * p3 - p2**2) / d2 + 2 * p**2 * p2**2 * p3 / (d1 * d2**2))
    mu = q * p3 + q2 * p2 + q3 * p3 * m2
    return HMScalars(L, beta, tau, rho, m2, p, p1, p2, p3, q, q1, q2, q3, K1, K2, mu, q1_printed)


def transform_L(L: float, beta: float) -> float:
    domain_guard(L, beta)
    return L * L / (L - beta)


def indicatory_V(hm: HMScalars, h: np.ndarray, m: np.ndarray) -> np.ndarray:
    hm_ = np.einsum("ij,k->ijk", h, m)
    return hm.K1 * (hm_ + hm_.transpose(1, 2, 0) + hm_.transpose(2, 0, 1)) + hm.K2 * np.einsum(
        "i,j,k->ijk", m, m, m
    )


def inverse_closed_form(hm: HMScalars, ginv, l_up, m_up, q1: float | None = None) -> np.ndarray:
    q1 = hm.q1 if q1 is None else q1
    return (
        hm.q * ginv
        + q1 * np.outer(l_up, l_up)
        + hm.q2 * (np.outer(l_up, m_up) + np.outer(m_up, l_up))
        + hm.q3 * np.outer(m_up, m_up)
    )


@dataclass
class HMFrame:
    """Closed-form tensors of the transformed space at one point-direction."""

    scalars: HMScalars
    Lbar: float
    lbar: np.ndarray
    hbar: np.ndarray
    gbar: np.ndarray
    gbar_inv: np.ndarray
    gbar_inv_numeric: np.ndarray
    V: np.ndarray
    Cbar: np.ndarray
    Q: np.ndarray
    B: np.ndarray
    l_up: np.ndarray
    m: np.ndarray
    m_up: np.ndarray


def barred_fundamentals(frame: TensorFrame, hv: HVectorData) -> HMFrame:
    tau, m, l = hv.tau, hv.m, frame.l
    hm = scalar_pack(frame.L, tau, hv.rho, hv.m2, hv.beta)
    r = tau / (tau - 1)
    lbar = r * l + r**2 * m
    hbar = hm.p * frame.h + 2 * r**4 * np.outer(m, m)
    gbar = (
        hm.p * frame.g
        + hm.p1 * np.outer(l, l)
        + hm.p2 * (np.outer(m, l) + np.outer(l, m))
        + hm.p3 * np.outer(m, m)
    )
    V = indicatory_V(hm, frame.h, m)
    l_up = frame.ginv @ l
    return HMFrame(
        scalars=hm,
        Lbar=transform_L(frame.L, hv.beta),
        lbar=lbar,
        hbar=hbar,
        gbar=gbar,
        gbar_inv=inverse_closed_form(hm, frame.ginv, l_up, hv.m_up),
        gbar_inv_numeric=jets.checked_inv(gbar, "transformed metric"),
        V=V,
        Cbar=hm.p * frame.C + V,
        Q=hm.Q(l, m),
        B=hm.B(frame.h, m),
        l_up=l_up,
        m=m,
        m_up=hv.m_up,
    )


def v_contractions(V: np.ndarray, m: np.ndarray, ginv: np.ndarray, h: np.ndarray, hm: HMScalars):
    """Contractions V_ijk m^i and V_ijk g^ir with their closed-form residuals."""
    m_up = ginv @ m
    m2 = float(m @ m_up)
    Vm = np.einsum("ijk,i->jk", V, m_up)
    Vg = np.einsum("ijk,ir->rjk", V, ginv)
    h_up = ginv @ h  # [r, k] = h^r_k
    rhs_m = (2 * hm.K1 + hm.K2 * m2) * np.outer(m, m) + hm.K1 * m2 * h
    rhs_g = hm.K1 * (
        np.einsum("jk,r->rjk", h, m_up)
        + np.einsum("rk,j->rjk", h_up, m)
        + np.einsum("rj,k->rjk", h_up, m)
    ) + hm.K2 * np.einsum("j,k,r->rjk", m, m, m_up)
    return {
        "Vm": Vm,
        "Vg": Vg,
        "residual_m": float(np.max(np.abs(Vm - rhs_m))),
        "residual_g": float(np.max(np.abs(Vg - rhs_g))),
    }


@dataclass
class DifferenceTensors:
    D: np.ndarray  # D^i
    Dj: np.ndarray  # [i, j] = D^i_j
    Djk: np.ndarray  # [i, j, k] = D^i_jk
    Fbar: np.ndarray | None


def spray_difference(hmf: HMFrame, hv: HVectorData, L: float, ginv_bar=None) -> np.ndarray:
    gi = hmf.gbar_inv if ginv_bar is None else ginv_bar
    p2 = hmf.scalars.p2
    return 0.5 * gi @ (hmf.Q * hv.E00 + 2 * p2 * L * hv.F_j0)


def nonlinear_difference(frame_C, hmf: HMFrame, hv: HVectorData, D, L, y, h, ginv_bar=None):
    gi = hmf.gbar_inv if ginv_bar is None else ginv_bar
    s = hmf.scalars
    Q, B = hmf.Q, hmf.B
    inner = (
        -2 * np.einsum("m,mrj->rj", D, s.p * frame_C + hmf.V)
        + np.outer(Q, hv.E_j0)
        + hv.E00 * B
        + s.p2 * L * hv.F
        + np.outer(hv.F_j0, Q)
        + 0.5 * s.p2 * float(hv.rho_k @ y) * h
    )
    return gi @ inner


def connection_difference(frame_C, hmf: HMFrame, hv: HVectorData, Dj, h, ginv_bar=None):
    """D^i_jk assembled from the difference of the Cartan connections."""
    gi = hmf.gbar_inv if ginv_bar is None else ginv_bar
    s = hmf.scalars
    Q, B, V, E, F = hmf.Q, hmf.B, hmf.V, hv.E, hv.F
    bj, rk = hv.beta_j, hv.rho_k
    pC = s.p * frame_C
    # terms indexed [s, j, k]
    t = (
        np.einsum("j,sk->sjk", Q, F)
        + np.einsum("s,kj->sjk", Q, E)
        + np.einsum("k,js->sjk", Q, F)
        + np.einsum("jkm,ms->sjk", pC + V, Dj)
        - np.einsum("skm,mj->sjk", pC + V, Dj)
        - np.einsum("jsm,mk->sjk", pC + V, Dj)
        + np.einsum("js,k->sjk", B, bj)
        - np.einsum("jk,s->sjk", B, bj)
        + np.einsum("sk,j->sjk", B, bj)
        + 0.5
        * s.p2
        * (
            np.einsum("k,js->sjk", rk, h)
            - np.einsum("s,jk->sjk", rk, h)
            + np.einsum("j,sk->sjk", rk, h)
        )
    )
    return np.einsum("is,sjk->ijk", gi, t)


def difference_tensors(frame: TensorFrame, hv: HVectorData, hmf: HMFrame) -> DifferenceTensors:
    D = spray_difference(hmf, hv, frame.L)
    Dj = nonlinear_difference(frame.C, hmf, hv, D, frame.L, frame.y, frame.h)
    Djk = connection_difference(frame.C, hmf, hv, Dj, frame.h)
    Fbar = None if frame.F is None else frame.F + Djk
    return DifferenceTensors(D, Dj, Djk, Fbar)


def transformed_jet(Ljet: Jet, field: HVectorField, point: PointDirection) -> Jet:
    """Jet of L^2 / (L - beta); y-cap one below that of ``Ljet``."""
    b = field.jet(Ljet, point)
    Y = jets.stack([Jet.variable(b.alg, point.n + i, point.y[i]) for i in range(point.n)])
    beta = jets.contract("i,i->", b, Y)
    L = Ljet.truncate(b.alg)
    domain_guard(L.value, beta.value)
    return L * L / (L - beta)


def barred_direct(
    space: FinslerSpace, field: HVectorField, point: PointDirection, connections: bool = False
) -> TensorFrame:
    """Transformed-space tensors by direct differentiation of the transformed L."""
    caps = (1, 5) if connections else (1, 4)
    Lbar = transformed_jet(space.jet(point, caps), field, point)
    return frame_from_jet(Lbar, point, connections=connections, what="gbar")
