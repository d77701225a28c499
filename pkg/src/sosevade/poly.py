"""Sparse multivariate polynomial arithmetic over real coefficients.

Monomials are exponent tuples of fixed length; polynomials are canonical
exponent->coefficient maps.  All values are immutable after construction
and safe to share across threads.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterable, Mapping, Sequence

import numpy as np

# Coefficients below this magnitude are dropped during canonicalization,
# preventing term-count blowup from float noise.
COEFF_TOL = 1e-14


def _grlex_key(exponents: tuple[int, ...]):
    # graded lexicographic: total degree first, then x1 > x2 > ... within a degree
    return (sum(exponents), tuple(-e for e in exponents))


def monomial_basis(nvars: int, maxdeg: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree <= maxdeg, in graded-lex order.

    The count is C(nvars + maxdeg, maxdeg).
    """
    if nvars < 1:
        raise ValueError("nvars must be >= 1")
    if maxdeg < 0:
        raise ValueError("maxdeg must be >= 0")
    monos = []
    for combo in itertools.combinations_with_replacement(range(nvars + 1), maxdeg):
        expo = [0] * nvars
        for idx in combo:
            if idx > 0:
                expo[idx - 1] += 1
        monos.append(tuple(expo))
    monos = sorted(set(monos), key=_grlex_key)
    return monos


def basis_size(nvars: int, maxdeg: int) -> int:
    return math.comb(nvars + maxdeg, maxdeg)


class Polynomial:
    """Canonical sparse polynomial in ``nvars`` real variables."""

    __slots__ = ("nvars", "terms", "_eval_cache")

    def __init__(self, nvars: int, terms: Mapping[tuple[int, ...], float] | None = None):
        if nvars < 1:
            raise ValueError("nvars must be >= 1")
        clean: dict[tuple[int, ...], float] = {}
        if terms:
            for expo, coeff in terms.items():
                expo = tuple(int(e) for e in expo)
                if len(expo) != nvars:
                    raise ValueError(f"exponent tuple {expo} has wrong length for nvars={nvars}")
                if any(e < 0 for e in expo):
                    raise ValueError(f"negative exponent in {expo}")
                c = clean.get(expo, 0.0) + float(coeff)
                if abs(c) < COEFF_TOL:
                    clean.pop(expo, None)
                else:
                    clean[expo] = c
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_eval_cache", None)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, nvars: int, value: float) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, index: int, nvars: int) -> "Polynomial":
        if not 0 <= index < nvars:
            raise IndexError(f"variable index {index} out of range for nvars={nvars}")
        expo = [0] * nvars
        expo[index] = 1
        return cls(nvars, {tuple(expo): 1.0})

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls(nvars)

    # -- queries -----------------------------------------------------------

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, expo: Sequence[int]) -> float:
        return self.terms.get(tuple(expo), 0.0)

    # -- arithmetic --------------------------------------------------------

    def _check_compat(self, other: "Polynomial"):
        if self.nvars != other.nvars:
            raise ValueError(f"variable-count mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_compat(other)
        out = dict(self.terms)
        for expo, c in other.terms.items():
            out[expo] = out.get(expo, 0.0) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Polynomial(self.nvars, {e: c * other for e, c in self.terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_compat(other)
        out: dict[tuple[int, ...], float] = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                key = tuple(a + b for a, b in zip(ea, eb))
                out[key] = out.get(key, 0.0) + ca * cb
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, power: int):
        if power < 0:
            raise ValueError("negative powers not supported")
        result = Polynomial.constant(self.nvars, 1.0)
        base = self
        p = power
        while p:
            if p & 1:
                result = result * base
            base = base * base
            p >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def allclose(self, other: "Polynomial", tol: float = 1e-9) -> bool:
        self._check_compat(other)
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0.0) - other.terms.get(k, 0.0)) <= tol for k in keys)

    # -- calculus ----------------------------------------------------------

    def differentiate(self, var: int) -> "Polynomial":
        if not 0 <= var < self.nvars:
            raise IndexError(f"variable index {var} out of range")
        out: dict[tuple[int, ...], float] = {}
        for expo, c in self.terms.items():
            k = expo[var]
            if k == 0:
                continue
            new = list(expo)
            new[var] = k - 1
            key = tuple(new)
            out[key] = out.get(key, 0.0) + c * k
        return Polynomial(self.nvars, out)

    def gradient(self, variables: Iterable[int]) -> list["Polynomial"]:
        return [self.differentiate(v) for v in variables]

    # -- evaluation --------------------------------------------------------

    def _arrays(self):
        cache = object.__getattribute__(self, "_eval_cache")
        if cache is None:
            if self.terms:
                expos = np.array(list(self.terms.keys()), dtype=np.int64)
                coeffs = np.array(list(self.terms.values()), dtype=np.float64)
            else:
                expos = np.zeros((0, self.nvars), dtype=np.int64)
                coeffs = np.zeros(0, dtype=np.float64)
            cache = (expos, coeffs)
            object.__setattr__(self, "_eval_cache", cache)
        return cache

    def evaluate(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.nvars,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.nvars},)")
        expos, coeffs = self._arrays()
        if coeffs.size == 0:
            return 0.0
        return float(coeffs @ np.prod(x[None, :] ** expos, axis=1))

    def evaluate_many(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at a batch of points, shape (N, nvars) -> (N,)."""
        pts = np.asarray(pts, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.nvars:
            raise ValueError(f"batch has shape {pts.shape}, expected (N, {self.nvars})")
        expos, coeffs = self._arrays()
        if coeffs.size == 0:
            return np.zeros(pts.shape[0])
        return np.prod(pts[:, None, :] ** expos[None, :, :], axis=2) @ coeffs

    def __call__(self, x):
        return self.evaluate(x)

    # -- display -----------------------------------------------------------

    def __repr__(self):
        if not self.terms:
            return "Polynomial(0)"
        parts = []
        for expo in sorted(self.terms, key=_grlex_key):
            c = self.terms[expo]
            mono = "*".join(
                f"x{i + 1}" + (f"^{e}" if e > 1 else "")
                for i, e in enumerate(expo)
                if e
            )
            parts.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return "Polynomial(" + " + ".join(parts) + ")"


def divergence(fields: Sequence[Polynomial], variables: Sequence[int]) -> Polynomial:
    """Sum of partials of ``fields[i]`` with respect to ``variables[i]``."""
    if len(fields) != len(variables):
        raise ValueError("field and variable counts differ")
    if not fields:
        raise ValueError("empty vector field")
    nvars = fields[0].nvars
    out = Polynomial.zero(nvars)
    for f, v in zip(fields, variables):
        if f.nvars != nvars:
            raise ValueError("mixed variable counts in vector field")
        out = out + f.differentiate(v)
    return out


def dot(a: Sequence[Polynomial], b: Sequence[Polynomial]) -> Polynomial:
    if len(a) != len(b):
        raise ValueError("vector length mismatch")
    out = Polynomial.zero(a[0].nvars)
    for p, q in zip(a, b):
        out = out + p * q
    return out
