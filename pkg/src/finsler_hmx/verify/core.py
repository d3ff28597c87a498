"""Identity suite on genuine Finsler spaces: base frame, h-vector and transformed tensors."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..finsler import FinslerSpace, check_homogeneity, connections, homogeneity_residuals
from ..hmatsumoto import barred_direct, barred_fundamentals, v_contractions
from ..hvector import HVectorField, ef_tensors, h_vector_residuals
from ..jets import PointDirection
from .report import CONVENTIONS, CheckRecord, check, exploratory, scaled_residual

DEFAULT_TOLERANCES = {
    "base": 1e-8,
    "weak": 1e-9,
    "transform": 1e-8,
    "inverse": 1e-9,
    "scalar": 1e-12,
    "contraction": 1e-11,
}

BASE_REFS = {
    "l_y_minus_L": "l_i y^i = L",
    "h_y": "h_ij y^j = 0",
    "C_y": "C_ijk y^k = 0",
    "g_yy_minus_L2": "g_ij y^i y^j = L^2",
    "g_minus_h_ll": "g_ij = h_ij + l_i l_j",
    "ginv_g": "g^ik g_kj = delta^i_j",
    "C_symmetry": "C_ijk totally symmetric",
    "g_hcov": "g_ij|k = 0",
    "F_y_minus_N": "F^i_jk y^j = G^i_k",
    "P_y": "P^i_jk y^j = P^i_jk y^k = 0",
    "F_symmetry": "F^i_jk = F^i_kj",
    "berwald_symmetry": "G^i_jk = G^i_kj",
    "L_homogeneity": "L(x, lam y) = lam L(x, y)",
}


def point_digest(pt: PointDirection) -> dict:
    return {"x": list(pt.x), "y": list(pt.y)}


def base_checks(space: FinslerSpace, pt: PointDirection, tag: str, tol: float) -> list[CheckRecord]:
    frame = connections(space, pt)
    res = homogeneity_residuals(frame)
    res["L_homogeneity"] = check_homogeneity(space, pt)
    conv = ("v_derivative",) if "g_hcov" in res else ()
    return [
        check(f"base.{k}#{tag}", BASE_REFS[k], v, tol, "frame identity", point_digest(pt), conv)
        for k, v in sorted(res.items())
    ]


def transform_checks(
    space: FinslerSpace, field: HVectorField, pt: PointDirection, tag: str, tols: dict
) -> list[CheckRecord]:
    """Closed-form transformed tensors against jet-direct differentiation."""
    frame = connections(space, pt)
    bjet = field.jet(space.jet(pt, (1, 4)), pt)
    hv = ef_tensors(frame, bjet, field.rho0)
    hmf = barred_fundamentals(frame, hv)
    direct = barred_direct(space, field, pt)
    hm = hmf.scalars
    dig = point_digest(pt)
    out = []
    hres = h_vector_residuals(frame, bjet, field.rho0)
    out.append(check(f"hvector.weak#{tag}", "L dot_j b_i = rho h_ij", hres["weak"], tols["weak"], "by construction", dig))
    out.append(
        exploratory(
            f"hvector.condition_ii#{tag}", "L C^h_ij b_h - rho h_ij (not required of weak h-vectors)",
            hres["cond_ii"], digest_of=dig,
        )
    )
    pairs = {
        "lbar": (hmf.lbar, direct.l, "lbar_i = tau/(tau-1) l_i + tau^2/(tau-1)^2 m_i"),
        "Lbar": (hmf.Lbar, direct.L, "Lbar = L^2 / (L - beta)"),
        "hbar": (hmf.hbar, direct.h, "hbar_ij = p h_ij + 2 tau^4/(tau-1)^4 m_i m_j"),
        "gbar": (hmf.gbar, direct.g, "gbar_ij = p g_ij + p1 l_i l_j + p2 (l_i m_j + l_j m_i) + p3 m_i m_j"),
        "Cbar": (hmf.Cbar, direct.C, "Cbar_ijk = p C_ijk + V_ijk"),
    }
    for key, (a, b, ref) in pairs.items():
        out.append(check(f"transform.{key}#{tag}", ref, scaled_residual(a, b), tols["transform"],
                         "closed form vs jet-direct", dig))
    eye = np.eye(pt.n)
    out.append(check(f"transform.inverse_closed#{tag}", "gbar^ik gbar_kj = delta (closed-form inverse)",
                     scaled_residual(hmf.gbar_inv @ hmf.gbar, eye), tols["inverse"], "closed-form inverse", dig))
    out.append(check(f"transform.inverse_numeric#{tag}", "gbar^ik gbar_kj = delta (numerical inverse)",
                     scaled_residual(hmf.gbar_inv_numeric @ hmf.gbar, eye), tols["inverse"], "numerical inverse", dig))
    tau = hv.tau
    out.append(check(f"scalar.p_plus_p1#{tag}", "p + p1 = tau^2/(tau-1)^2",
                     scaled_residual(hm.p + hm.p1, tau**2 / (tau - 1) ** 2), tols["scalar"], "algebraic", dig))
    out.append(check(f"scalar.q_times_p#{tag}", "q p = 1", scaled_residual(hm.q * hm.p, 1.0), tols["scalar"],
                     "algebraic", dig))
    vc = v_contractions(hmf.V, hv.m, frame.ginv, frame.h, hm)
    scale = max(1.0, float(np.max(np.abs(hmf.V))))
    out.append(check(f"transform.v_contraction_m#{tag}", "V_ijk m^i = (2K1 + K2 m^2) m_j m_k + K1 m^2 h_jk",
                     vc["residual_m"] / scale, tols["contraction"], "einsum vs closed form", dig))
    out.append(check(f"transform.v_contraction_g#{tag}",
                     "V_ijk g^ir = K1(h_jk m^r + h^r_j m_k + h^r_k m_j) + K2 m_j m_k m^r",
                     vc["residual_g"] / scale, tols["contraction"], "einsum vs closed form", dig))
    return out


def core_suite(
    space: FinslerSpace,
    field: HVectorField | None,
    points: Sequence[PointDirection],
    tolerances: dict | None = None,
) -> list[CheckRecord]:
    tols = dict(DEFAULT_TOLERANCES, **(tolerances or {}))
    out: list[CheckRecord] = []
    for k, pt in enumerate(points):
        tag = f"{k:03d}"
        out += base_checks(space, pt, tag, tols["base"])
        if field is not None:
            out += transform_checks(space, field, pt, tag, tols)
    return out


def conventions_header() -> dict:
    return dict(CONVENTIONS)
