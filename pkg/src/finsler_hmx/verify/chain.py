"""Identity chain for hypersurfaces under the h-Matsumoto change, on fixtures.

Two layers are kept apart on purpose:

* ``raw_layer`` builds the transformed metric, V, and the difference tensors
  D^i, D^i_j, D^i_jk from their general definitions with explicit index loops
  and a numerically inverted transformed metric;
* the collapsed forms (``collapsed_*``) use the closed-form inverse and the
  scalar coefficients lambda, phi, psi, mu to write each reduced expression.

Every check compares one quantity from each layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..hmatsumoto import HMScalars, inverse_closed_form, scalar_pack
from .fixtures import MockFrame, condition_ii_residual
from .report import CheckRecord, check, scaled_residual, skipped

CHAIN_TOL = 1e-10
CONTRACTION_TOL = 1e-11
CONDITION_TOL = 1e-12
PREDICATE_TOL = 1e-9
BASIS = "independent paths: raw index loops vs collapsed form"


def fixture_scalars(fx: MockFrame) -> HMScalars:
    return scalar_pack(fx.L, fx.tau, fx.rho, fx.m2, fx.beta)


# raw layer -------------------------------------------------------------------


@dataclass
class RawLayer:
    gbar: np.ndarray
    gbar_inv: np.ndarray
    V: np.ndarray
    Cbar: np.ndarray
    Q: np.ndarray
    Bt: np.ndarray
    D: np.ndarray
    Dj: np.ndarray  # [m, s] = D^m_s
    Djk: np.ndarray  # [i, j, k] = D^i_jk
    E00: float
    E_0: np.ndarray  # E_s0


def raw_layer(fx: MockFrame, hm: HMScalars) -> RawLayer:
    n = fx.n
    l, m, h, g, y, C = fx.l, fx.m, fx.h, fx.g, fx.y, fx.C
    E = fx.E
    Fh = np.zeros((n, n))  # gradient case: antisymmetric part vanishes
    rho_k = np.zeros(n)
    gbar = np.zeros((n, n))
    Q = np.zeros(n)
    Bt = np.zeros((n, n))
    for i in range(n):
        Q[i] = hm.p2 * l[i] + hm.p3 * m[i]
        for j in range(n):
            gbar[i, j] = hm.p * g[i, j] + hm.p1 * l[i] * l[j] + hm.p2 * (m[i] * l[j] + l[i] * m[j]) + hm.p3 * m[i] * m[j]
            Bt[i, j] = hm.K1 * h[i, j] + hm.K2 * m[i] * m[j]
    gi = np.linalg.inv(gbar)
    V = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                V[i, j, k] = hm.K1 * (h[i, j] * m[k] + h[j, k] * m[i] + h[k, i] * m[j]) + hm.K2 * m[i] * m[j] * m[k]
    W = hm.p * C + V

    E_0 = np.zeros(n)
    F_0 = np.zeros(n)
    for s in range(n):
        for t in range(n):
            E_0[s] += E[s, t] * y[t]
            F_0[s] += Fh[s, t] * y[t]
    E00 = float(sum(E_0[s] * y[s] for s in range(n)))
    rho_0 = float(sum(rho_k[s] * y[s] for s in range(n)))
    beta = E_0.copy()  # beta_j = y^i b_{i|j} = E_j0 + F_0j

    D = np.zeros(n)
    for i in range(n):
        for j in range(n):
            D[i] += 0.5 * gi[i, j] * (Q[j] * E00 + 2 * hm.p2 * fx.L * F_0[j])

    Dj = np.zeros((n, n))
    for mm in range(n):
        for s in range(n):
            acc = 0.0
            for r in range(n):
                t = Q[r] * E_0[s] + E00 * Bt[r, s] + hm.p2 * fx.L * Fh[r, s] + F_0[r] * Q[s]
                t += 0.5 * hm.p2 * rho_0 * h[r, s]
                for u in range(n):
                    t -= 2 * D[u] * W[u, r, s]
                acc += gi[mm, r] * t
            Dj[mm, s] = acc

    Djk = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                acc = 0.0
                for s in range(n):
                    t = Q[j] * Fh[s, k] + Q[s] * E[k, j] + Q[k] * Fh[j, s]
                    t += Bt[j, s] * beta[k] - Bt[j, k] * beta[s] + Bt[s, k] * beta[j]
                    t += 0.5 * hm.p2 * (rho_k[k] * h[j, s] - rho_k[s] * h[j, k] + rho_k[j] * h[s, k])
                    for u in range(n):
                        t += W[j, k, u] * Dj[u, s] - W[s, k, u] * Dj[u, j] - W[j, s, u] * Dj[u, k]
                    acc += gi[i, s] * t
                Djk[i, j, k] = acc
    return RawLayer(gbar, gi, V, W, Q, Bt, D, Dj, Djk, E00, E_0)


def _frame_contract(T: np.ndarray, *vecs) -> np.ndarray:
    """Loop contraction of a rank-3 covariant tensor with three index frames.

    Each entry of ``vecs`` is either a vector (contracted) or a matrix
    [i, alpha] (kept as a free index, in order).
    """
    n = T.shape[0]
    frames = [np.asarray(v).reshape(n, -1) for v in vecs]
    shape = tuple(f.shape[1] for f in frames)
    out = np.zeros(shape)
    for idx in np.ndindex(*shape):
        acc = 0.0
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    acc += T[i, j, k] * frames[0][i, idx[0]] * frames[1][j, idx[1]] * frames[2][k, idx[2]]
        out[idx] = acc
    return out.reshape(tuple(f.shape[1] for f, v in zip(frames, vecs) if np.ndim(v) == 2))


# collapsed layer -------------------------------------------------------------


def collapsed_gbar_inv(fx: MockFrame, hm: HMScalars, q1: float | None = None) -> np.ndarray:
    return inverse_closed_form(hm, fx.ginv, fx.ginv @ fx.l, fx.m_up, q1)


def collapsed_D(fx: MockFrame, hm: HMScalars, E00: float, q1: float | None = None) -> np.ndarray:
    q1 = hm.q1 if q1 is None else q1
    F_beta0 = 0.0
    F_up0 = np.zeros(fx.n)
    l_up = fx.ginv @ fx.l
    a = 0.5 * (((hm.q + q1) * hm.p2 + hm.q2 * hm.p3 * hm.m2) * E00 + 2 * hm.q2 * hm.p2 * fx.L * F_beta0)
    b = 0.5 * (hm.mu * E00 + 2 * hm.q3 * hm.p2 * fx.L * F_beta0)
    return a * l_up + b * fx.m_up + hm.q * hm.p2 * fx.L * F_up0


def collapsed_Dj(fx: MockFrame, hm: HMScalars, E00: float, E_0: np.ndarray) -> np.ndarray:
    lam, phi = hm.lambda_phi(E00)
    Q = hm.Q(fx.l, fx.m)
    inner = lam * fx.h + phi * np.outer(fx.m, fx.m) + np.outer(E_0, Q)  # [s, r]
    return collapsed_gbar_inv(fx, hm) @ inner.T


def collapsed_Djk_gradient(fx: MockFrame, hm: HMScalars, Dj: np.ndarray) -> np.ndarray:
    """Connection difference with F = 0 and rho_k = 0."""
    Q = hm.Q(fx.l, fx.m)
    Bt = hm.B(fx.h, fx.m)
    W = hm.p * fx.C + indicatory_V_einsum(fx, hm)
    beta = fx.beta_j
    t = (
        np.einsum("s,kj->sjk", Q, fx.E)
        + np.einsum("jkm,ms->sjk", W, Dj)
        - np.einsum("skm,mj->sjk", W, Dj)
        - np.einsum("jsm,mk->sjk", W, Dj)
        + np.einsum("js,k->sjk", Bt, beta)
        + np.einsum("sk,j->sjk", Bt, beta)
        - np.einsum("jk,s->sjk", Bt, beta)
    )
    return np.einsum("is,sjk->ijk", collapsed_gbar_inv(fx, hm), t)


def indicatory_V_einsum(fx: MockFrame, hm: HMScalars) -> np.ndarray:
    hmk = np.einsum("ij,k->ijk", fx.h, fx.m)
    return hm.K1 * (hmk + hmk.transpose(1, 2, 0) + hmk.transpose(2, 0, 1)) + hm.K2 * np.einsum(
        "i,j,k->ijk", fx.m, fx.m, fx.m
    )


def _common(fx: MockFrame, hm: HMScalars, E00: float):
    lam, phi = hm.lambda_phi(E00)
    psi1, psi2 = hm.psi(lam, phi)
    rl = fx.rho / fx.L
    return lam, phi, psi1, psi2, rl


def collapsed_C_D(fx: MockFrame, hm: HMScalars, E00: float, E_0: np.ndarray):
    """C_jkm D^m_s, C_skm D^m_j, C_jsm D^m_k as [j, k, s] arrays."""
    lam, phi, _, _, rl = _common(fx, hm, E00)
    coef = ((hm.q + hm.q3 * hm.m2) * phi + hm.q3 * lam) * rl
    C, h, m = fx.C, fx.h, fx.m
    Cjsk = np.einsum("jsk->jks", C)
    first = hm.q * lam * Cjsk + coef * np.einsum("jk,s->jks", h, m) + rl * hm.mu * np.einsum("jk,s->jks", h, E_0)
    second = hm.q * lam * Cjsk + coef * np.einsum("sk,j->jks", h, m) + rl * hm.mu * np.einsum("sk,j->jks", h, E_0)
    third = hm.q * lam * Cjsk + coef * np.einsum("sj,k->jks", h, m) + rl * hm.mu * np.einsum("sj,k->jks", h, E_0)
    return first, second, third


def collapsed_V_D(fx: MockFrame, hm: HMScalars, E00: float, E_0: np.ndarray):
    """V_jkm D^m_s, V_skm D^m_j, V_jsm D^m_k as [j, k, s] arrays."""
    lam, _, psi1, psi2, _ = _common(fx, hm, E00)
    K1, K2, m2 = hm.K1, hm.K2, hm.m2
    h, m = fx.h, fx.m
    mm = np.outer(m, m)

    def block(a, b):  # {mu [m^2 K1 h_ab + (2K1 + K2 m^2) m_a m_b]}
        return hm.mu * (m2 * K1 * a + (2 * K1 + K2 * m2) * b)

    first = (
        np.einsum("jk,s->jks", psi1 * K1 * h + (psi1 * K2 + 2 * psi2 * K1) * mm, m)
        + hm.q * lam * K1 * (np.einsum("js,k->jks", h, m) + np.einsum("sk,j->jks", h, m))
        + np.einsum("jk,s->jks", block(h, mm), E_0)
    )
    second = (
        np.einsum("sk,j->jks", psi1 * K1 * h + (psi1 * K2 + 2 * psi2 * K1) * mm, m)
        + hm.q * lam * K1 * (np.einsum("js,k->jks", h, m) + np.einsum("jk,s->jks", h, m))
        + np.einsum("sk,j->jks", block(h, mm), E_0)
    )
    third = (
        np.einsum("sj,k->jks", psi1 * K1 * h + (psi1 * K2 + 2 * psi2 * K1) * mm, m)
        + hm.q * lam * K1 * (np.einsum("sk,j->jks", h, m) + np.einsum("jk,s->jks", h, m))
        + np.einsum("sj,k->jks", block(h, mm), E_0)
    )
    return first, second, third


def frame_tensors(fx: MockFrame):
    """M_alpha, M_alpha_beta and H_alpha_beta of the synthetic adapted frame."""
    Ba, Bn = fx.B_alpha, fx.B_up
    Bl = fx.g @ Bn
    M_ab = np.einsum("ijk,ia,jb,k->ab", fx.C, Ba, Ba, Bn)
    M_a = np.einsum("ijk,ia,j,k->a", fx.C, Ba, Bn, Bn)
    H_ab = np.einsum("i,iab->ab", Bl, fx.B_ab) + np.einsum("i,ijk,ja,kb->ab", Bl, fx.F_conn, Ba, Ba)
    H_ab = H_ab + np.outer(M_a, fx.H_alpha)
    return M_a, M_ab, H_ab


# predicates ------------------------------------------------------------------


def tangency_residual(fx: MockFrame) -> float:
    return abs(float(fx.b @ fx.B_up)) / max(1.0, float(np.linalg.norm(fx.b)))


def second_condition_predicate(fx: MockFrame, raw: RawLayer) -> float:
    """|E_i0 B^i| relative to the size of E_i0."""
    return abs(float(raw.E_0 @ fx.B_up)) / max(1.0, float(np.max(np.abs(raw.E_0))))


# suite -----------------------------------------------------------------------

REFS = {
    "fixture.condition_ii": "L C^h_ij b_h = rho h_ij",
    "fixture.v_contraction_m": "V_ijk m^i = (2K1 + K2 m^2) m_j m_k + K1 m^2 h_jk",
    "fixture.v_contraction_g": "V_ijk g^ir = K1(h_jk m^r + h^r_j m_k + h^r_k m_j) + K2 m_j m_k m^r",
    "chain.inverse_metric": "gbar^ik gbar_kj = delta^i_j with the closed-form inverse",
    "chain.spray_split": "D^i = (1/2){[(q+q1)p2 + q2 p3 m^2]E00 + 2 q2 p2 L F_b0} l^i + (1/2){mu E00 + 2 q3 p2 L F_b0} m^i + q p2 L F^i_0",
    "chain.spray_normal": "D^i B_i = q p2 L B_i F^i_0",
    "chain.connection_gradient": "D^i_jk with F = 0, rho_k = 0 (reduced connection difference)",
    "chain.connection_normal": "D^i_jk B_i B^j_a B^k_b = q B^s B^j_a B^k_b {pC_jkm D^m_s + ... - B_jk beta_s}",
    "chain.nonlinear_reduced": "D^m_s = gbar^mr {lambda h_sr + phi m_s m_r + Q_r E_s0}",
    "chain.cd_s": "C_jkm D^m_s = q lambda C_jsk + [(q + q3 m^2)phi + q3 lambda](rho/L) h_jk m_s + (rho/L) mu h_jk E_s0",
    "chain.cd_j": "C_skm D^m_j = q lambda C_jsk + [(q + q3 m^2)phi + q3 lambda](rho/L) h_sk m_j + (rho/L) mu h_sk E_j0",
    "chain.cd_k": "C_jsm D^m_k = q lambda C_jsk + [(q + q3 m^2)phi + q3 lambda](rho/L) h_sj m_k + (rho/L) mu h_sj E_k0",
    "chain.cd_s_normal": "B^s C_jkm D^m_s B^j_a B^k_b = q lambda M_ab + (rho/L) mu h_jk B^j_a B^k_b B^s E_s0",
    "chain.cd_j_normal": "B^s C_skm D^m_j B^j_a B^k_b = q lambda M_ab",
    "chain.cd_k_normal": "B^s C_jsm D^m_k B^j_a B^k_b = q lambda M_ab",
    "chain.vd_s": "V_jkm D^m_s = {psi1 K1 h_jk + (psi1 K2 + 2 psi2 K1) m_j m_k} m_s + q lambda K1 (h_js m_k + h_sk m_j) + mu[...] E_s0",
    "chain.vd_j": "V_skm D^m_j = {psi1 K1 h_sk + (psi1 K2 + 2 psi2 K1) m_s m_k} m_j + q lambda K1 (h_js m_k + h_jk m_s) + mu[...] E_j0",
    "chain.vd_k": "V_jsm D^m_k = {psi1 K1 h_sj + (psi1 K2 + 2 psi2 K1) m_j m_s} m_k + q lambda K1 (h_sk m_j + h_jk m_s) + mu[...] E_k0",
    "chain.vd_s_normal": "B^s V_jkm D^m_s B^j_a B^k_b = mu {K1 m^2 h_jk + (2K1 + K2 m^2) m_j m_k} B^j_a B^k_b B^s E_s0",
    "chain.vd_j_normal": "B^s V_skm D^m_j B^j_a B^k_b = 0",
    "chain.vd_k_normal": "B^s V_jsm D^m_k B^j_a B^k_b = 0",
    "chain.connection_projection": "D^i_jk B_i B^j_a B^k_b = [mu rho/L - q{(2K1 + K2 m^2) m_j m_k + K1 m^2 h_jk} + B_jk] B^j_a B^k_b B^s E_s0 - q lambda M_ab",
    "chain.connection_projection_reduced": "D^i_jk B_i B^j_a B^k_b = -q lambda M_ab when E_i0 B^i = 0",
    "chain.second_fundamental": "Hbar_ab - Mbar_a Hbar_b = sqrt(p)(H_ab - q lambda M_ab) - sqrt(p) M_a H_b",
    "chain.v_fundamental": "Mbar_ab = sqrt(p) M_ab",
}


def chain_suite(fx: MockFrame, tag: str = "", tol: float = CHAIN_TOL) -> list[CheckRecord]:
    """Run every chain identity on one fixture; ``tag`` suffixes the check ids."""
    hm = fixture_scalars(fx)
    raw = raw_layer(fx, hm)
    sfx = f"#{tag}" if tag else ""
    dig = {"n": fx.n, "L": fx.L, "rho": fx.rho, "tau": fx.tau, "g": fx.g, "m": fx.m, "E": fx.E, "C": fx.C}
    out: list[CheckRecord] = []

    def rec(cid, lhs, rhs, t=tol, basis=BASIS):
        out.append(check(cid + sfx, REFS[cid], scaled_residual(lhs, rhs), t, basis, dig))

    def gated(cid, ok, reason, lhs_fn, t=tol):
        if ok:
            lhs, rhs = lhs_fn()
            rec(cid, lhs, rhs, t)
        else:
            out.append(skipped(cid + sfx, REFS[cid], t, BASIS, reason, dig))

    out.append(
        check("fixture.condition_ii" + sfx, REFS["fixture.condition_ii"], condition_ii_residual(fx),
              CONDITION_TOL, "brute-force triple loop", dig)
    )
    # V contractions by loops vs closed forms
    n = fx.n
    m_up = fx.m_up
    Vm_loop = np.zeros((n, n))
    Vg_loop = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                Vm_loop[j, k] += raw.V[i, j, k] * m_up[i]
                for r in range(n):
                    Vg_loop[r, j, k] += raw.V[i, j, k] * fx.ginv[i, r]
    h_up = fx.ginv @ fx.h
    rhs_m = (2 * hm.K1 + hm.K2 * hm.m2) * np.outer(fx.m, fx.m) + hm.K1 * hm.m2 * fx.h
    rhs_g = hm.K1 * (
        np.einsum("jk,r->rjk", fx.h, m_up) + np.einsum("rk,j->rjk", h_up, fx.m) + np.einsum("rj,k->rjk", h_up, fx.m)
    ) + hm.K2 * np.einsum("j,k,r->rjk", fx.m, fx.m, m_up)
    rec("fixture.v_contraction_m", Vm_loop, rhs_m, CONTRACTION_TOL)
    rec("fixture.v_contraction_g", Vg_loop, rhs_g, CONTRACTION_TOL)

    gi_c = collapsed_gbar_inv(fx, hm)
    rec("chain.inverse_metric", gi_c @ raw.gbar, np.eye(n))

    E00, E_0 = raw.E00, raw.E_0
    rec("chain.spray_split", raw.D, collapsed_D(fx, hm, E00))
    B_low = fx.g @ fx.B_up
    Ba, Bn = fx.B_alpha, fx.B_up
    tangent = tangency_residual(fx) < PREDICATE_TOL
    gated(
        "chain.spray_normal", tangent, "b is not tangent (b_j B^j != 0)",
        lambda: (float(raw.D @ B_low), 0.0),
    )
    Dj_c = collapsed_Dj(fx, hm, E00, E_0)
    rec("chain.nonlinear_reduced", raw.Dj, Dj_c)
    rec("chain.connection_gradient", raw.Djk, collapsed_Djk_gradient(fx, hm, Dj_c))

    M_a, M_ab, H_ab = frame_tensors(fx)
    lam, _ = hm.lambda_phi(E00)
    q = hm.q
    W_c = hm.p * fx.C + indicatory_V_einsum(fx, hm)
    Bt_c = hm.B(fx.h, fx.m)

    def conn_normal():
        lhs = np.einsum("ijk,i,ja,kb->ab", raw.Djk, B_low, Ba, Ba)
        Dj = Dj_c
        inner = (
            np.einsum("jkm,ms->sjk", W_c, Dj)
            - np.einsum("skm,mj->sjk", W_c, Dj)
            - np.einsum("jsm,mk->sjk", W_c, Dj)
            - np.einsum("jk,s->sjk", Bt_c, fx.beta_j)
        )
        rhs = q * np.einsum("s,ja,kb,sjk->ab", Bn, Ba, Ba, inner)
        return lhs, rhs

    gated("chain.connection_normal", tangent, "b is not tangent (b_j B^j != 0)", conn_normal)

    # C D and V D contractions: raw loops over the raw D^m_s
    CD_raw = [np.zeros((n, n, n)) for _ in range(3)]
    VD_raw = [np.zeros((n, n, n)) for _ in range(3)]
    for j in range(n):
        for k in range(n):
            for s in range(n):
                for u in range(n):
                    CD_raw[0][j, k, s] += fx.C[j, k, u] * raw.Dj[u, s]
                    CD_raw[1][j, k, s] += fx.C[s, k, u] * raw.Dj[u, j]
                    CD_raw[2][j, k, s] += fx.C[j, s, u] * raw.Dj[u, k]
                    VD_raw[0][j, k, s] += raw.V[j, k, u] * raw.Dj[u, s]
                    VD_raw[1][j, k, s] += raw.V[s, k, u] * raw.Dj[u, j]
                    VD_raw[2][j, k, s] += raw.V[j, s, u] * raw.Dj[u, k]
    CD_c = collapsed_C_D(fx, hm, E00, E_0)
    VD_c = collapsed_V_D(fx, hm, E00, E_0)
    for name, a, b in zip(("s", "j", "k"), CD_raw, CD_c):
        rec(f"chain.cd_{name}", a, b)
    for name, a, b in zip(("s", "j", "k"), VD_raw, VD_c):
        rec(f"chain.vd_{name}", a, b)

    hBB = np.einsum("jk,ja,kb->ab", fx.h, Ba, Ba)
    mB = fx.m @ Ba
    X = float(Bn @ E_0)
    rl = fx.rho / fx.L
    vblock = hm.mu * (hm.K1 * hm.m2 * hBB + (2 * hm.K1 + hm.K2 * hm.m2) * np.outer(mB, mB))
    normal_rhs = {
        "chain.cd_s_normal": q * lam * M_ab + rl * hm.mu * hBB * X,
        "chain.cd_j_normal": q * lam * M_ab,
        "chain.cd_k_normal": q * lam * M_ab,
        "chain.vd_s_normal": vblock * X,
        "chain.vd_j_normal": np.zeros_like(M_ab),
        "chain.vd_k_normal": np.zeros_like(M_ab),
    }
    raws = dict(zip(("cd_s", "cd_j", "cd_k"), CD_raw)) | dict(zip(("vd_s", "vd_j", "vd_k"), VD_raw))
    for key, arr in raws.items():
        cid = f"chain.{key}_normal"
        gated(
            cid, tangent, "b is not tangent (b_j B^j != 0)",
            lambda arr=arr, cid=cid: (_frame_contract(arr.transpose(2, 0, 1), Bn, Ba, Ba), normal_rhs[cid]),
        )

    Djk_BBB = _normal_projection(raw.Djk, B_low, Ba)

    def projection():
        coef = rl * hm.mu * hBB - q * ((2 * hm.K1 + hm.K2 * hm.m2) * np.outer(mB, mB) + hm.K1 * hm.m2 * hBB)
        coef = coef + np.einsum("jk,ja,kb->ab", Bt_c, Ba, Ba)
        return Djk_BBB, coef * X - q * lam * M_ab

    gated("chain.connection_projection", tangent, "b is not tangent (b_j B^j != 0)", projection)
    pred = tangent and second_condition_predicate(fx, raw) < PREDICATE_TOL
    reason = "b is not tangent" if not tangent else "E_i0 B^i != 0"
    gated("chain.connection_projection_reduced", pred, reason, lambda: (Djk_BBB, -q * lam * M_ab))

    sp = np.sqrt(hm.p)
    Cbar = raw.Cbar

    def barred_normal():
        nb = np.sqrt(float(Bn @ raw.gbar @ Bn))
        Bbar = Bn / nb
        return Bbar, raw.gbar @ Bbar

    def second_fundamental():
        Bbar, Bbar_low = barred_normal()
        Mbar_a = _frame_contract(Cbar, Ba, Bbar, Bbar)
        Hbar_b = sp * fx.H_alpha + np.einsum("i,ij,jb->b", Bbar_low, raw.Dj, Ba)
        Fbar = fx.F_conn + raw.Djk
        Hbar_ab = np.einsum("i,iab->ab", Bbar_low, fx.B_ab) + np.einsum("i,ijk,ja,kb->ab", Bbar_low, Fbar, Ba, Ba)
        Hbar_ab = Hbar_ab + np.outer(Mbar_a, Hbar_b)
        lhs = Hbar_ab - np.outer(Mbar_a, Hbar_b)
        rhs = sp * (H_ab - q * lam * M_ab) - sp * np.outer(M_a, fx.H_alpha)
        return lhs, rhs

    gated("chain.second_fundamental", pred, reason, second_fundamental)

    def v_fundamental():
        Bbar, _ = barred_normal()
        return _frame_contract(Cbar, Ba, Ba, Bbar), sp * M_ab

    gated("chain.v_fundamental", tangent, "b is not tangent (b_j B^j != 0)", v_fundamental)
    return out


def _normal_projection(Djk: np.ndarray, B_low: np.ndarray, Ba: np.ndarray) -> np.ndarray:
    """B_i D^i_jk B^j_a B^k_b by loops."""
    n, k1 = Ba.shape
    out = np.zeros((k1, k1))
    for a in range(k1):
        for b in range(k1):
            acc = 0.0
            for i in range(n):
                for j in range(n):
                    for k in range(n):
                        acc += B_low[i] * Djk[i, j, k] * Ba[j, a] * Ba[k, b]
            out[a, b] = acc
    return out
