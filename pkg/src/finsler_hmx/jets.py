"""Truncated multivariate Taylor arithmetic ("jets").

A :class:`Jet` holds the Taylor coefficients of a (possibly tensor-valued)
function of several variable groups around a fixed point.  Each group carries
its own cap on the total order, e.g. ``((n, 1), (n, 4))`` for position
variables differentiated at most once and direction variables at most four
times.  Arithmetic truncates exactly, so every stored coefficient is the exact
Taylor coefficient of the composite function.

Coefficients are stored densely over the capped monomial lattice; the last
axis of ``Jet.c`` indexes monomials and any leading axes are tensor indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

MAX_X_CAP = 1
MAX_Y_CAP = 5
SINGULAR_TOL = 1e-12
COND_LIMIT = 1e12


class JetError(Exception):
    """Base class for jet arithmetic failures."""


class JetSingularityError(JetError, ZeroDivisionError):
    """Division (or a singular function) at a jet whose value is ~0."""


class JetConfigError(JetError, ValueError):
    """Caps outside the supported range or incompatible variable groups."""


class JetIndexError(JetError, IndexError):
    """Multi-index outside the caps of a jet."""


class DegeneracyError(JetError, np.linalg.LinAlgError):
    """Matrix inversion refused because the condition number is too large."""

    def __init__(self, msg: str, cond: float):
        super().__init__(f"{msg} (condition number {cond:.3e})")
        self.cond = cond


def _group_monomials(nvars: int, cap: int) -> list[tuple[int, ...]]:
    out = [e for e in product(range(cap + 1), repeat=nvars) if sum(e) <= cap]
    out.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
    return out


class JetAlgebra:
    """Monomial lattice and multiplication table for a tuple of variable groups."""

    def __init__(self, groups: tuple[tuple[int, int], ...]):
        self.groups = groups
        self.nvars = sum(g[0] for g in groups)
        self.caps = tuple(g[1] for g in groups)
        self.offsets = tuple(int(v) for v in np.cumsum([0] + [g[0] for g in groups])[:-1])
        per_group = [_group_monomials(nv, cap) for nv, cap in groups]
        monos = [sum(parts, ()) for parts in product(*per_group)]
        monos.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
        self.monomials = np.array(monos, dtype=np.int64).reshape(len(monos), self.nvars)
        self.size = len(monos)
        self.index = {m: i for i, m in enumerate(monos)}
        self.factorials = np.array(
            [math.prod(math.factorial(v) for v in m) for m in monos], dtype=float
        )
        # nilpotency order of a jet with zero constant term
        self.order = sum(self.caps)
        self._build_product_table()

    def group_orders(self, mono: np.ndarray) -> np.ndarray:
        return np.stack(
            [mono[..., o : o + g[0]].sum(axis=-1) for o, g in zip(self.offsets, self.groups)],
            axis=-1,
        )

    def _build_product_table(self) -> None:
        m = self.monomials
        s = m[:, None, :] + m[None, :, :]
        ok = np.all(self.group_orders(s) <= np.array(self.caps), axis=-1)
        ii, jj = np.nonzero(ok)
        kk = np.array([self.index[tuple(v)] for v in s[ii, jj]], dtype=np.int64)
        self.I, self.J, self.K = ii, jj, kk
        self.scatter = sp.csr_matrix(
            (np.ones(len(kk)), (np.arange(len(kk)), kk)), shape=(len(kk), self.size)
        )

    def var_group(self, var: int) -> int:
        for g, (o, (nv, _)) in enumerate(zip(self.offsets, self.groups)):
            if o <= var < o + nv:
                return g
        raise JetIndexError(f"variable {var} outside algebra with {self.nvars} variables")

    @lru_cache(maxsize=None)
    def derivative_map(self, var: int) -> tuple["JetAlgebra", np.ndarray, np.ndarray]:
        g = self.var_group(var)
        if self.caps[g] == 0:
            raise JetConfigError(f"cannot differentiate: group {g} has cap 0")
        caps = list(self.caps)
        caps[g] -= 1
        target = algebra(tuple((nv, c) for (nv, _), c in zip(self.groups, caps)))
        src = target.monomials.copy()
        src[:, var] += 1
        idx = np.array([self.index[tuple(v)] for v in src], dtype=np.int64)
        return target, idx, src[:, var].astype(float)

    @lru_cache(maxsize=None)
    def truncation_map(self, target: "JetAlgebra") -> np.ndarray:
        return np.array([self.index[tuple(v)] for v in target.monomials], dtype=np.int64)


@lru_cache(maxsize=None)
def algebra(groups: tuple[tuple[int, int], ...]) -> JetAlgebra:
    return JetAlgebra(tuple((int(a), int(b)) for a, b in groups))


def _meet(a: JetAlgebra, b: JetAlgebra) -> JetAlgebra:
    if a is b:
        return a
    if [g[0] for g in a.groups] != [g[0] for g in b.groups]:
        raise JetConfigError(f"incompatible variable groups {a.groups} vs {b.groups}")
    return algebra(tuple((ga[0], min(ga[1], gb[1])) for ga, gb in zip(a.groups, b.groups)))


def _product_coeffs(alg: JetAlgebra, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    prod = a[..., alg.I] * b[..., alg.J]
    shape = prod.shape[:-1]
    flat = prod.reshape(-1, prod.shape[-1])
    out = (alg.scatter.T @ flat.T).T
    return np.asarray(out).reshape(shape + (alg.size,))


class Jet:
    """Truncated Taylor expansion; ``c[..., k]`` is the coefficient of monomial k.

    Coefficients are Taylor coefficients, i.e. partial derivatives divided by
    the product of factorials of the multi-index.  Instances are treated as
    immutable.
    """

    __slots__ = ("alg", "c")
    __array_priority__ = 1000

    def __init__(self, alg: JetAlgebra, c: np.ndarray):
        self.alg = alg
        self.c = np.asarray(c, dtype=float)

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, alg: JetAlgebra, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (alg.size,))
        c[..., 0] = value
        return cls(alg, c)

    @classmethod
    def variable(cls, alg: JetAlgebra, var: int, value: float) -> "Jet":
        c = np.zeros(alg.size)
        c[0] = value
        e = [0] * alg.nvars
        e[var] = 1
        if tuple(e) in alg.index:
            c[alg.index[tuple(e)]] = 1.0
        return cls(alg, c)

    # basic properties -----------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[:-1]

    @property
    def value(self):
        v = self.c[..., 0]
        return float(v) if v.ndim == 0 else v.copy()

    def __len__(self) -> int:
        return self.shape[0]

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.alg, self.c[key + (Ellipsis,)] if Ellipsis not in key else self.c[key])

    def __iter__(self):
        for i in range(self.shape[0]):
            yield self[i]

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, caps={self.alg.caps}, value={self.value!r})"

    def coefficient(self, idx: Sequence[int]):
        key = tuple(int(v) for v in idx)
        if len(key) != self.alg.nvars or key not in self.alg.index:
            raise JetIndexError(f"multi-index {key} outside caps {self.alg.groups}")
        return self.c[..., self.alg.index[key]]

    def partial(self, idx: Sequence[int]):
        """Raw partial derivative for multi-index ``idx`` (coefficient times factorials)."""
        key = tuple(int(v) for v in idx)
        coeff = self.coefficient(key)
        return coeff * math.prod(math.factorial(v) for v in key)

    # arithmetic ----------------------------------------------------------
    def _coerce(self, other) -> tuple[JetAlgebra, np.ndarray, np.ndarray]:
        if isinstance(other, Jet):
            alg = _meet(self.alg, other.alg)
            return alg, self.truncate(alg).c, other.truncate(alg).c
        other = np.asarray(other, dtype=float)
        oc = np.zeros(other.shape + (self.alg.size,))
        oc[..., 0] = other
        return self.alg, self.c, oc

    def __add__(self, other) -> "Jet":
        alg, a, b = self._coerce(other)
        return Jet(alg, a + b)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        alg, a, b = self._coerce(other)
        return Jet(alg, a - b)

    def __rsub__(self, other) -> "Jet":
        alg, a, b = self._coerce(other)
        return Jet(alg, b - a)

    def __neg__(self) -> "Jet":
        return Jet(self.alg, -self.c)

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.alg, self.c * other[..., None])
        alg, a, b = self._coerce(other)
        return Jet(alg, _product_coeffs(alg, a, b))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            if np.any(np.abs(other) < SINGULAR_TOL):
                raise JetSingularityError("division by a value below 1e-12")
            return Jet(self.alg, self.c / other[..., None])
        return self * reciprocal(other)

    def __rtruediv__(self, other) -> "Jet":
        return reciprocal(self) * other

    def __pow__(self, k) -> "Jet":
        if isinstance(k, (int, np.integer)) and k >= 0:
            out = Jet.constant(self.alg, np.ones(self.shape))
            base = self
            while k:
                if k & 1:
                    out = out * base
                k >>= 1
                if k:
                    base = base * base
            return out
        return power(self, float(k))

    # calculus -------------------------------------------------------------
    def truncate(self, target: JetAlgebra) -> "Jet":
        if target is self.alg:
            return self
        return Jet(target, self.c[..., self.alg.truncation_map(target)])

    def diff(self, var: int) -> "Jet":
        """Derivative with respect to variable ``var`` (cap of its group drops by one)."""
        target, idx, mult = self.alg.derivative_map(var)
        return Jet(target, self.c[..., idx] * mult)

    def grad(self, group: int) -> "Jet":
        """Stack derivatives over all variables of ``group`` as a new trailing tensor axis."""
        off = self.alg.offsets[group]
        parts = [self.diff(off + k) for k in range(self.alg.groups[group][0])]
        return Jet(parts[0].alg, np.stack([p.c for p in parts], axis=-2))


def _compose(x: Jet, derivs: list[np.ndarray]) -> Jet:
    """Evaluate sum_k derivs[k] * (x - x0)^k; ``derivs[k]`` is f^(k)(x0)/k!."""
    h = Jet(x.alg, x.c.copy())
    h.c[..., 0] = 0.0
    out = Jet.constant(x.alg, derivs[-1])
    for d in reversed(derivs[:-1]):
        out = out * h + d
    return out


def reciprocal(x):
    if not isinstance(x, Jet):
        x = np.asarray(x, dtype=float)
        if np.any(np.abs(x) < SINGULAR_TOL):
            raise JetSingularityError("division by a value below 1e-12")
        return 1.0 / x
    a = np.asarray(x.value, dtype=float)
    if np.any(np.abs(a) < SINGULAR_TOL):
        raise JetSingularityError(f"division by jet with constant term {a!r}")
    return _compose(x, [(-1.0) ** k / a ** (k + 1) for k in range(x.alg.order + 1)])


def power(x, p: float):
    if not isinstance(x, Jet):
        return np.power(x, p)
    a = np.asarray(x.value, dtype=float)
    if np.any(a <= 0.0) and not float(p).is_integer():
        raise JetSingularityError(f"non-integer power of non-positive value {a!r}")
    coeffs = []
    binom = 1.0
    for k in range(x.alg.order + 1):
        coeffs.append(binom * a ** (p - k))
        binom *= (p - k) / (k + 1)
    return _compose(x, coeffs)


def sqrt(x):
    if not isinstance(x, Jet):
        return np.sqrt(x)
    if np.any(np.asarray(x.value) < SINGULAR_TOL):
        raise JetSingularityError("sqrt of a jet with non-positive constant term")
    return power(x, 0.5)


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    e = np.exp(np.asarray(x.value, dtype=float))
    return _compose(x, [e / math.factorial(k) for k in range(x.alg.order + 1)])


def log(x):
    if not isinstance(x, Jet):
        return np.log(x)
    a = np.asarray(x.value, dtype=float)
    if np.any(a < SINGULAR_TOL):
        raise JetSingularityError("log of a jet with non-positive constant term")
    coeffs = [np.log(a)] + [(-1.0) ** (k + 1) / (k * a**k) for k in range(1, x.alg.order + 1)]
    return _compose(x, coeffs)


def _trig(x: Jet, shift: int) -> Jet:
    a = np.asarray(x.value, dtype=float)
    cycle = [np.sin(a), np.cos(a), -np.sin(a), -np.cos(a)]
    return _compose(x, [cycle[(k + shift) % 4] / math.factorial(k) for k in range(x.alg.order + 1)])


def sin(x):
    return _trig(x, 0) if isinstance(x, Jet) else np.sin(x)


def cos(x):
    return _trig(x, 1) if isinstance(x, Jet) else np.cos(x)


# tensor helpers --------------------------------------------------------------


def stack(items: Sequence) -> Jet:
    """Stack scalar-or-jet items into one tensor-valued jet along a new leading axis."""
    jets = [v for v in items if isinstance(v, Jet)]
    if not jets:
        raise JetConfigError("stack needs at least one Jet")
    alg = jets[0].alg
    for j in jets[1:]:
        alg = _meet(alg, j.alg)
    cs = []
    for v in items:
        if isinstance(v, Jet):
            cs.append(v.truncate(alg).c)
        else:
            cs.append(Jet.constant(alg, v).c)
    return Jet(alg, np.stack(cs, axis=0))


def contract(subscripts: str, a, b):
    """``np.einsum`` for two operands where either may be a Jet."""
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.einsum(subscripts, a, b)
    ins, out = subscripts.split("->")
    sa, sb = ins.split(",")
    t = next(ch for ch in "TUVWZ" if ch not in subscripts)
    if isinstance(a, Jet) and isinstance(b, Jet):
        alg = _meet(a.alg, b.alg)
        ac, bc = a.truncate(alg).c, b.truncate(alg).c
        prod = np.einsum(f"{sa}{t},{sb}{t}->{out}{t}", ac[..., alg.I], bc[..., alg.J])
        shape = prod.shape[:-1]
        res = (alg.scatter.T @ prod.reshape(-1, prod.shape[-1]).T).T
        return Jet(alg, np.asarray(res).reshape(shape + (alg.size,)))
    if isinstance(a, Jet):
        return Jet(a.alg, np.einsum(f"{sa}{t},{sb}->{out}{t}", a.c, np.asarray(b, dtype=float)))
    return Jet(b.alg, np.einsum(f"{sa},{sb}{t}->{out}{t}", np.asarray(a, dtype=float), b.c))


def checked_inv(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    cond = float(np.linalg.cond(m))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise DegeneracyError(f"{what} is singular", cond)
    return np.linalg.inv(m)


def inv(m: Jet, what: str = "matrix") -> Jet:
    """Inverse of a square jet-valued matrix by the terminating Neumann series."""
    m0inv = checked_inv(np.asarray(m.value), what)
    nil = Jet(m.alg, m.c.copy())
    nil.c[..., 0] = 0.0
    step = -contract("ij,jk->ik", m0inv, nil)
    term = Jet.constant(m.alg, m0inv)
    out = term
    for _ in range(m.alg.order):
        term = contract("ij,jk->ik", step, term)
        out = out + term
    return out


# lifting scalar fields -------------------------------------------------------


@dataclass(frozen=True)
class PointDirection:
    """A point x of the base manifold together with a direction y at x."""

    x: tuple[float, ...]
    y: tuple[float, ...]

    def __init__(self, x, y, eps_y: float = 1e-8):
        x = tuple(float(v) for v in x)
        y = tuple(float(v) for v in y)
        if len(x) != len(y):
            raise ValueError(f"x has {len(x)} components but y has {len(y)}")
        if len(x) < 2:
            raise ValueError("dimension must be at least 2")
        if math.sqrt(sum(v * v for v in y)) <= eps_y:
            raise ValueError(f"direction y={y} is too close to zero")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return len(self.x)


def check_caps(caps: tuple[int, int]) -> tuple[int, int]:
    cx, cy = (int(v) for v in caps)
    if not (0 <= cx <= MAX_X_CAP and 0 <= cy <= MAX_Y_CAP):
        raise JetConfigError(f"caps {caps} outside engine limits (x <= {MAX_X_CAP}, y <= {MAX_Y_CAP})")
    return cx, cy


def variables(point: PointDirection, caps: tuple[int, int] = (1, 4)) -> tuple[list[Jet], list[Jet]]:
    """Seed jets for all 2n coordinates simultaneously."""
    cx, cy = check_caps(caps)
    n = point.n
    alg = algebra(((n, cx), (n, cy)))
    xs = [Jet.variable(alg, i, point.x[i]) for i in range(n)]
    ys = [Jet.variable(alg, n + i, point.y[i]) for i in range(n)]
    return xs, ys


def jet_lift(f: Callable, point: PointDirection, caps: tuple[int, int] = (1, 4)) -> Jet:
    """Truncated Taylor expansion of ``f(x, y)`` at ``point``.

    ``f`` takes two lists of coordinates and must be written with the
    functions of this module (``sqrt``, ``sin`` ...) so the same callable
    evaluates on floats and on jets.
    """
    xs, ys = variables(point, caps)
    out = f(xs, ys)
    if not isinstance(out, Jet):
        return Jet.constant(xs[0].alg, out)
    return out


def jet_partial(j: Jet, x_idx: Sequence[int] = (), y_idx: Sequence[int] = ()) -> float:
    """Raw partial derivative of a scalar (x, y) jet; multi-indices given per group."""
    n = j.alg.groups[0][0]
    xi = tuple(x_idx) or (0,) * n
    yi = tuple(y_idx) or (0,) * n
    return float(j.partial(xi + yi))


def fd_oracle(
    f: Callable,
    point: PointDirection,
    x_idx: Sequence[int] = (),
    y_idx: Sequence[int] = (),
    step: float = 1e-4,
) -> float:
    """Central-difference estimate of a partial derivative of ``f(x, y)``.

    Nested central differences, one per unit of the multi-index; truncation
    error is O(step**2).  Orders above 3 are refused.
    """
    n = point.n
    xi = list(x_idx) or [0] * n
    yi = list(y_idx) or [0] * n
    if sum(xi) + sum(yi) > 3:
        raise ValueError("fd_oracle supports derivative order <= 3")
    if step <= 0:
        raise ValueError("step must be positive")
    axes = [i for i, k in enumerate(xi) for _ in range(k)] + [
        n + i for i, k in enumerate(yi) for _ in range(k)
    ]
    base = np.array(point.x + point.y, dtype=float)

    def ev(z: np.ndarray) -> float:
        return float(f(list(z[:n]), list(z[n:])))

    def rec(z: np.ndarray, rest: list[int]) -> float:
        if not rest:
            return ev(z)
        ax, tail = rest[0], rest[1:]
        zp, zm = z.copy(), z.copy()
        zp[ax] += step
        zm[ax] -= step
        return (rec(zp, tail) - rec(zm, tail)) / (2.0 * step)

    return rec(base, axes)
