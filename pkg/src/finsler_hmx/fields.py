"""Polynomial coefficient fields shared by metric families, h-vectors and charts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class Poly:
    """Polynomial sum_t coef_t * prod_k x_k**e_tk with terms ``((coef, (e_1..e_n)), ...)``."""

    terms: tuple[tuple[float, tuple[int, ...]], ...] = ()

    @classmethod
    def const(cls, value: float, nvars: int) -> "Poly":
        return cls(((float(value), (0,) * nvars),)) if value else cls(())

    @classmethod
    def from_spec(cls, spec, nvars: int) -> "Poly":
        """Accept a number, or a list of ``[coef, [exponents]]`` pairs."""
        if isinstance(spec, (int, float)):
            return cls.const(float(spec), nvars)
        terms = []
        for coef, exps in spec:
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent vector {exps} for {nvars} variables")
            terms.append((float(coef), exps))
        return cls(tuple(terms))

    def to_spec(self) -> list:
        return [[c, list(e)] for c, e in self.terms]

    @property
    def degree(self) -> int:
        return max((sum(e) for _, e in self.terms), default=0)

    def __call__(self, x: Sequence):
        out = 0.0
        for coef, exps in self.terms:
            term = coef
            for xk, e in zip(x, exps):
                for _ in range(e):
                    term = term * xk
            out = out + term
        return out

    def gradient(self) -> list["Poly"]:
        n = len(self.terms[0][1]) if self.terms else 0
        grads = []
        for k in range(n):
            terms = []
            for coef, exps in self.terms:
                if exps[k]:
                    e = list(exps)
                    e[k] -= 1
                    terms.append((coef * exps[k], tuple(e)))
            grads.append(Poly(tuple(terms)))
        return grads


def polys_from_spec(spec, nvars: int) -> tuple[Poly, ...]:
    return tuple(Poly.from_spec(s, nvars) for s in spec)


def monomial_basis(nvars: int, degree: int) -> list[tuple[int, ...]]:
    """Exponent vectors of total degree <= ``degree`` in a fixed deterministic order."""
    out: list[tuple[int, ...]] = [()]
    for _ in range(nvars):
        out = [e + (k,) for e in out for k in range(degree + 1)]
    out = [e for e in out if sum(e) <= degree]
    out.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
    return out
