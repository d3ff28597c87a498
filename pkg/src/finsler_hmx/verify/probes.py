"""Exploratory probes: reported, never gating."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..finsler import FinslerSpace, connections
from ..hmatsumoto import barred_direct, barred_fundamentals, difference_tensors, inverse_closed_form
from ..hvector import HVectorField, ef_tensors
from ..jets import PointDirection
from .chain import fixture_scalars, frame_tensors, raw_layer, _normal_projection
from .fixtures import MockFrame
from .report import CheckRecord, exploratory, scaled_residual


def beta_cartan_loop(b: np.ndarray, Cm: np.ndarray) -> np.ndarray:
    """beta_r C^r_ij by explicit loops, with beta_r = beta_{|r}."""
    n = len(b)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            for r in range(n):
                out[i, j] += b[r] * Cm[r, i, j]
    return out


def space_probes(space: FinslerSpace, field: HVectorField, points: Sequence[PointDirection]) -> list[CheckRecord]:
    """Difference-tensor gaps against direct differentiation, and beta_r C^r_ij."""
    out: list[CheckRecord] = []
    for k, pt in enumerate(points):
        tag = f"{k:03d}"
        dig = {"x": list(pt.x), "y": list(pt.y)}
        frame = connections(space, pt, caps=(1, 5))
        bjet = field.jet(space.jet(pt, (1, 5)), pt)
        hv = ef_tensors(frame, bjet, field.rho0)
        hmf = barred_fundamentals(frame, hv)
        dt = difference_tensors(frame, hv, hmf)
        direct = barred_direct(space, field, pt, connections=True)
        grad = float(np.max(np.abs(hv.F)))
        note = f"max|F_ij| = {grad!r}"
        out.append(exploratory(f"probe.beta_cartan#{tag}", "beta_r C^r_ij with beta_r = beta_{|r}",
                               float(np.max(np.abs(beta_cartan_loop(hv.beta_j, frame.Cm)))), digest_of=dig))
        out.append(exploratory(f"probe.spray_gap#{tag}", "Gbar^i - G^i - D^i",
                               scaled_residual(direct.spray - frame.spray, dt.D), note, dig))
        out.append(exploratory(f"probe.nonlinear_gap#{tag}", "Gbar^i_j - G^i_j - D^i_j",
                               scaled_residual(direct.N - frame.N, dt.Dj), note, dig))
        out.append(exploratory(f"probe.connection_gap#{tag}", "Fbar^i_jk - F^i_jk - D^i_jk",
                               scaled_residual(direct.F, dt.Fbar), note, dig))
        printed = inverse_closed_form(hmf.scalars, frame.ginv, hmf.l_up, hv.m_up, hmf.scalars.q1_printed)
        out.append(exploratory(f"probe.printed_q1_inverse#{tag}", "gbar^ik gbar_kj = delta with the printed q1",
                               scaled_residual(printed @ hmf.gbar, np.eye(pt.n)), digest_of=dig))
    return out


def fixture_probes(fx: MockFrame, tag: str = "") -> list[CheckRecord]:
    """beta_r C^r_ij, printed q1 and the normal projection of D^i_jk off the E-span."""
    hm = fixture_scalars(fx)
    raw = raw_layer(fx, hm)
    sfx = f"#{tag}" if tag else ""
    dig = {"n": fx.n, "L": fx.L, "rho": fx.rho, "tau": fx.tau, "m": fx.m, "E": fx.E}
    out = [
        exploratory("probe.beta_cartan" + sfx, "beta_r C^r_ij with beta_r = beta_{|r}", float(np.max(np.abs(beta_cartan_loop(fx.beta_j, fx.Cm)))),
                    digest_of=dig),
    ]
    printed = inverse_closed_form(hm, fx.ginv, fx.ginv @ fx.l, fx.m_up, hm.q1_printed)
    out.append(exploratory("probe.printed_q1_inverse" + sfx, "gbar^ik gbar_kj = delta with the printed q1",
                           scaled_residual(printed @ raw.gbar, np.eye(fx.n)), digest_of=dig))
    # normal projection with the E_s0 B^s coefficient assembled term by term
    Ba, Bn = fx.B_alpha, fx.B_up
    lhs = _normal_projection(raw.Djk, fx.g @ Bn, Ba)
    X = float(Bn @ raw.E_0)
    lam, _ = hm.lambda_phi(raw.E00)
    _, M_ab, _ = frame_tensors(fx)
    hBB = Ba.T @ fx.h @ Ba
    mB = fx.m @ Ba
    block = hm.K1 * hm.m2 * hBB + (2 * hm.K1 + hm.K2 * hm.m2) * np.outer(mB, mB)
    BBt = Ba.T @ hm.B(fx.h, fx.m) @ Ba
    rl = fx.rho / fx.L
    assembled = (rl * hm.mu * hBB + hm.q * hm.mu * block - hm.q * BBt) * X - hm.q * lam * M_ab
    printed66 = (rl * hm.mu * hBB - hm.q * block + BBt) * X - hm.q * lam * M_ab
    note = f"E_s0 B^s = {X!r}"
    out.append(exploratory("probe.projection_printed" + sfx,
                           "D^i_jk B_i B^j_a B^k_b vs printed coefficient of B^s E_s0", scaled_residual(lhs, printed66),
                           note, dig))
    out.append(exploratory("probe.projection_assembled" + sfx,
                           "D^i_jk B_i B^j_a B^k_b vs [(rho/L)mu h + q mu{K1 m^2 h + (2K1+K2 m^2) m m} - q B]_jk B^s E_s0 - q lambda M",
                           scaled_residual(lhs, assembled), note, dig))
    return out
