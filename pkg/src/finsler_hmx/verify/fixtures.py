"""Algebraic fixtures satisfying L C^h_ij b_h = rho h_ij exactly.

A fixture is *not* a Finsler space: its Cartan-like tensor C is synthetic and
is not the y-derivative of its metric.  The identities checked on fixtures are
pointwise algebraic consequences of the frame relations plus the contraction
condition above, so integrability is not needed.

Construction happens in a g-orthonormal frame with l = e_1; randomized
fixtures are then pushed through a random linear change of coordinates so
that g is a general positive-definite matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..finsler import TensorFrame
from ..hvector import HVectorData
from ..jets import PointDirection


@dataclass
class MockFrame:
    n: int
    L: float
    rho: float
    tau: float
    y: np.ndarray
    l: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    h: np.ndarray
    m: np.ndarray
    b: np.ndarray
    C: np.ndarray
    # synthetic h-covariant data (gradient case: F = 0, rho_k = 0)
    E: np.ndarray
    beta_j: np.ndarray
    # hypersurface-adapted frame
    B_alpha: np.ndarray  # [i, alpha]
    B_up: np.ndarray
    v: np.ndarray
    B_ab: np.ndarray  # [i, alpha, beta]
    F_conn: np.ndarray  # synthetic ambient F^i_jk
    H_alpha: np.ndarray  # synthetic normal curvature vector
    meta: dict = field(default_factory=dict)

    @property
    def Cm(self) -> np.ndarray:
        return np.einsum("ir,rjk->ijk", self.ginv, self.C)

    @property
    def B_low(self) -> np.ndarray:
        return self.g @ self.B_up

    @property
    def m_up(self) -> np.ndarray:
        return self.ginv @ self.m

    @property
    def m2(self) -> float:
        return float(self.m @ self.m_up)

    @property
    def beta(self) -> float:
        return self.L / self.tau

    def coefficients(self) -> tuple[float, float]:
        m2 = self.m2
        return self.rho / (self.L * m2), -2 * self.rho / (self.L * m2 * m2)

    def tensor_frame(self) -> TensorFrame:
        x = np.zeros(self.n)
        return TensorFrame(
            PointDirection(x, self.y), self.L, self.l, self.h, self.g, self.ginv, self.C, self.Cm,
            F=self.F_conn,
        )

    def hvector_data(self) -> HVectorData:
        y = self.y
        E = self.E
        zero = np.zeros((self.n, self.n))
        return HVectorData(
            b=self.b,
            beta=self.beta,
            tau=self.tau,
            rho=self.rho,
            m=self.m,
            m_up=self.m_up,
            m2=self.m2,
            bh=E.copy(),
            bv=zero,
            E=E,
            F=zero,
            beta_j=self.beta_j,
            rho_k=np.zeros(self.n),
            E00=float(y @ E @ y),
            E_j0=E @ y,
            F_j0=np.zeros(self.n),
            F_up0=np.zeros(self.n),
            F_beta0=0.0,
            db=self.rho * self.h / self.L,
        )


def indicatory_C(h, m, A, B, T=None):
    hm = np.einsum("ij,k->ijk", h, m)
    C = A * (hm + hm.transpose(1, 2, 0) + hm.transpose(2, 0, 1)) + B * np.einsum("i,j,k->ijk", m, m, m)
    return C if T is None else C + T


def _sym3(t: np.ndarray) -> np.ndarray:
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    return sum(t.transpose(p) for p in perms) / 6.0


def _complement(vectors: list[np.ndarray], n: int, rng) -> list[np.ndarray]:
    """Orthonormal completion (Euclidean) of orthonormal ``vectors``."""
    basis = [v / np.linalg.norm(v) for v in vectors]
    out = []
    while len(basis) < n:
        w = rng.standard_normal(n)
        for e in basis:
            w = w - (w @ e) * e
        if np.linalg.norm(w) > 1e-6:
            w = w / np.linalg.norm(w)
            basis.append(w)
            out.append(w)
    return out


def mock_fixture(
    n: int = 3,
    L: float = 2.0,
    rho: float = 0.05,
    m=None,
    tau: float = 2.0,
    seed: int | None = None,
    *,
    E_coeffs=None,
    off_span: float = 0.0,
    free_part: bool = True,
    transform: bool | None = None,
) -> MockFrame:
    """Fixture with condition L C^h_ij b_h = rho h_ij built in.

    With ``seed`` None and ``m`` given, the fixture is built in the
    orthonormal coordinates directly (g = identity, l = e_1).  With a seed,
    missing inputs (m, E coefficients, frame mixing, free part of C, synthetic
    connection) are drawn from it and a random coordinate change is applied.
    ``off_span`` adds ``off_span * (l (x) B + B (x) l)`` to E, the only term
    that gives E_s0 B^s != 0.
    """
    if n < 2:
        raise ValueError("fixture dimension must be at least 2")
    if rho == 0:
        raise ValueError("rho must be non-zero")
    if abs(tau) < 1e-9 or abs(tau - 1) < 1e-6:
        raise ValueError(f"tau = {tau} not allowed")
    if L <= 0:
        raise ValueError("L must be positive")
    rng = np.random.default_rng(seed)
    randomized = seed is not None
    if transform is None:
        transform = randomized

    e1 = np.eye(n)[0]
    if m is None:
        if n < 3:
            raise ValueError("a random tangent m needs n >= 3")
        w = rng.standard_normal(n)
        w[0] = 0.0
        w[-1] = 0.0
        m = rng.uniform(0.3, 1.0) * w / np.linalg.norm(w)
    m = np.asarray(m, dtype=float)
    if abs(m[0]) > 1e-14:
        raise ValueError("m must be orthogonal to l = e_1")
    if float(m @ m) <= 1e-12:
        raise ValueError("m = 0 makes the fixture meaningless")

    # orthonormal-frame objects
    g = np.eye(n)
    l = e1.copy()
    y = L * e1
    h = g - np.outer(l, l)
    m2 = float(m @ m)
    A = rho / (L * m2)
    Bc = -2 * rho / (L * m2 * m2)
    if not np.isfinite(A) or abs(A) > 1e8:
        raise ValueError("fixture coefficients blow up")

    # unit normal orthogonal to l and m (so the h-vector is tangent)
    mhat = m / np.sqrt(m2)
    if n >= 3:
        rest = _complement([l, mhat], n, rng if randomized else np.random.default_rng(0))
        if not randomized and n == 3:
            Bn = np.cross(l, mhat)
            Bn = Bn if Bn[-1] >= 0 else -Bn
            rest = [Bn]
        B_up = rest[0]
        others = rest[1:]
    else:
        B_up = np.eye(n)[1]
        others = []
    tangent_on = [l] + ([mhat] if n >= 3 else []) + list(others)
    tangent_on = np.array(tangent_on).T  # [i, alpha]
    mix = np.eye(n - 1)
    if randomized:
        mix = mix + 0.3 * rng.standard_normal((n - 1, n - 1))
    B_alpha = tangent_on @ mix
    v = np.linalg.lstsq(B_alpha, y, rcond=None)[0]

    T = None
    if free_part and randomized:
        comp = [B_up] + list(others)
        P = np.array(comp).T  # [i, a]
        k = P.shape[1]
        raw = rng.standard_normal((k, k, k))
        T = 0.5 * np.einsum("ia,jb,kc,abc->ijk", P, P, P, _sym3(raw))
    C = indicatory_C(h, m, A, Bc, T)
    b = m + l / tau

    if E_coeffs is None:
        E_coeffs = rng.uniform(-0.5, 0.5, 4) if randomized else (0.01, 0.0, 0.0, 0.0)
    e_h, e_mm, e_ll, e_lm = E_coeffs
    E = e_h * h + e_mm * np.outer(m, m) + e_ll * np.outer(l, l) + e_lm * (np.outer(l, m) + np.outer(m, l))
    B_low = g @ B_up
    if off_span:
        E = E + off_span * (np.outer(l, B_low) + np.outer(B_low, l))
    beta_j = E @ y

    if randomized:
        F_conn = rng.standard_normal((n, n, n)) * 0.3
        F_conn = 0.5 * (F_conn + F_conn.transpose(0, 2, 1))
        B_ab = rng.standard_normal((n, n - 1, n - 1)) * 0.3
        B_ab = 0.5 * (B_ab + B_ab.transpose(0, 2, 1))
        H_alpha = rng.standard_normal(n - 1) * 0.3
    else:
        F_conn = np.zeros((n, n, n))
        B_ab = np.zeros((n, n - 1, n - 1))
        H_alpha = np.zeros(n - 1)

    fx = MockFrame(
        n=n, L=L, rho=rho, tau=tau, y=y, l=l, g=g, ginv=np.eye(n), h=h, m=m, b=b, C=C,
        E=E, beta_j=beta_j, B_alpha=B_alpha, B_up=B_up, v=v, B_ab=B_ab, F_conn=F_conn,
        H_alpha=H_alpha,
        meta={"seed": seed, "off_span": off_span, "free_part": T is not None},
    )
    if transform:
        fx = _change_coordinates(fx, np.eye(n) + 0.3 * rng.standard_normal((n, n)))
    return fx


def _change_coordinates(fx: MockFrame, lam: np.ndarray) -> MockFrame:
    """Push the fixture through x' = lam x (vectors by lam, covectors by lam^-T)."""
    # keep the metric well conditioned: shrink the perturbation until cond <= 10
    while np.linalg.cond(lam) > 10.0:
        lam = np.eye(fx.n) + 0.5 * (lam - np.eye(fx.n))
    li = np.linalg.inv(lam)

    def co(t, k):
        for ax in range(k):
            t = np.moveaxis(np.tensordot(li.T, t, axes=([1], [ax])), 0, ax)
        return t

    vec = lambda v: lam @ v  # noqa: E731
    g = co(fx.g, 2)
    # F^i_jk: one upper index (lam) and two lower indices (lam^-T)
    F_conn = np.einsum("ia,abc,bj,ck->ijk", lam, fx.F_conn, li, li)
    return MockFrame(
        n=fx.n, L=fx.L, rho=fx.rho, tau=fx.tau,
        y=vec(fx.y), l=co(fx.l, 1), g=g, ginv=np.linalg.inv(g), h=co(fx.h, 2), m=co(fx.m, 1),
        b=co(fx.b, 1), C=co(fx.C, 3), E=co(fx.E, 2), beta_j=co(fx.beta_j, 1),
        B_alpha=lam @ fx.B_alpha, B_up=vec(fx.B_up), v=fx.v.copy(),
        B_ab=np.einsum("ia,abc->ibc", lam, fx.B_ab), F_conn=F_conn, H_alpha=fx.H_alpha.copy(),
        meta=dict(fx.meta, transformed=True),
    )


def seeded_fixture(seed: int, n: int | None = None, **kw) -> MockFrame:
    """Randomized fixture whose transformed metric is positive definite.

    Draws n in {3, 4}, L in [0.5, 3], |rho| in [0.05, 1] and |tau| in
    [1.5, 10] from ``seed``; draws with p <= 0 or an indefinite transformed
    metric are redrawn.
    """
    from ..hmatsumoto import scalar_pack

    rng = np.random.default_rng([seed, 7919])
    for _ in range(1000):
        dim = int(rng.integers(3, 5)) if n is None else n
        L = float(rng.uniform(0.5, 3.0))
        rho = float(rng.choice([-1, 1]) * rng.uniform(0.05, 1.0))
        tau = float(rng.choice([-1, 1]) * rng.uniform(1.5, 10.0))
        fx = mock_fixture(dim, L, rho, None, tau, seed=int(rng.integers(2**31)), **kw)
        hm = scalar_pack(fx.L, fx.tau, fx.rho, fx.m2, fx.beta)
        if hm.p <= 0:
            continue
        gbar = hm.p * fx.g + hm.p1 * np.outer(fx.l, fx.l) + hm.p2 * (
            np.outer(fx.m, fx.l) + np.outer(fx.l, fx.m)) + hm.p3 * np.outer(fx.m, fx.m)
        if np.min(np.linalg.eigvalsh(gbar)) > 1e-6 * np.max(np.abs(gbar)):
            fx.meta.update(seed=seed)
            return fx
    raise RuntimeError(f"no admissible fixture for seed {seed}")


def condition_ii_residual(fx: MockFrame) -> float:
    """max |C_ijk b^k - (rho/L) h_ij| by explicit loops."""
    n = fx.n
    b_up = fx.ginv @ fx.b
    worst = 0.0
    for i in range(n):
        for j in range(n):
            s = 0.0
            for k in range(n):
                s += fx.C[i, j, k] * b_up[k]
            worst = max(worst, abs(s - fx.rho / fx.L * fx.h[i, j]))
    return worst
