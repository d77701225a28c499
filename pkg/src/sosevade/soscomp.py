"""Symbolic layer for SOS programs.

Declares polynomial decision variables, Gram-backed SOS polynomials, and
records coefficient-matching equality constraints.  Everything stays linear
in the scalar decision variables; the finished program is compiled to a
conic (PSD) form by :mod:`sosevade.conic`.
"""

from __future__ import annotations

from dataclasses import dataclass

from .poly import Polynomial, monomial_basis

# Variable kinds
FREE = "free"
GRAM = "gram"


class NonlinearExpressionError(ValueError):
    """Raised when two decision-bearing expressions are multiplied."""


@dataclass(frozen=True)
class DecisionPoly:
    """A polynomial with one scalar decision variable per basis monomial."""

    name: str
    nvars: int
    degree: int
    basis: tuple[tuple[int, ...], ...]
    coeff_ids: tuple[int, ...]


@dataclass(frozen=True)
class GramBlock:
    """PSD matrix variable Q representing v(x)^T Q v(x)."""

    name: str
    nvars: int
    basis: tuple[tuple[int, ...], ...]
    matrix_id: int
    entry_ids: dict  # (i, j) with i <= j -> scalar var id

    @property
    def side(self) -> int:
        return len(self.basis)


class PolyExpr:
    """Polynomial-valued expression, affine in scalar decision variables.

    ``terms`` maps a monomial to the affine coefficient function
    {var_id: weight}; ``const`` holds the decision-free part.
    """

    __slots__ = ("nvars", "terms", "const")

    def __init__(self, nvars: int):
        self.nvars = nvars
        self.terms: dict[tuple[int, ...], dict[int, float]] = {}
        self.const: dict[tuple[int, ...], float] = {}

    @classmethod
    def from_polynomial(cls, p: Polynomial) -> "PolyExpr":
        e = cls(p.nvars)
        e.const = dict(p.terms)
        return e

    @classmethod
    def from_decision(cls, dp: DecisionPoly) -> "PolyExpr":
        e = cls(dp.nvars)
        for mono, vid in zip(dp.basis, dp.coeff_ids):
            e.terms[mono] = {vid: 1.0}
        return e

    def has_decisions(self) -> bool:
        return any(self.terms.values())

    def copy(self) -> "PolyExpr":
        e = PolyExpr(self.nvars)
        e.terms = {m: dict(c) for m, c in self.terms.items()}
        e.const = dict(self.const)
        return e

    @property
    def degree(self) -> int:
        monos = set(self.const) | set(self.terms)
        return max((sum(m) for m in monos), default=-1)

    def _add_const(self, mono, coeff):
        c = self.const.get(mono, 0.0) + coeff
        if abs(c) < 1e-15:
            self.const.pop(mono, None)
        else:
            self.const[mono] = c

    def _add_var(self, mono, vid, coeff):
        row = self.terms.setdefault(mono, {})
        c = row.get(vid, 0.0) + coeff
        if abs(c) < 1e-15:
            row.pop(vid, None)
            if not row:
                del self.terms[mono]
        else:
            row[vid] = c

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = PolyExpr.from_polynomial(Polynomial.constant(self.nvars, other))
        elif isinstance(other, Polynomial):
            other = PolyExpr.from_polynomial(other)
        if not isinstance(other, PolyExpr):
            return NotImplemented
        if other.nvars != self.nvars:
            raise ValueError("variable-count mismatch")
        out = self.copy()
        for mono, c in other.const.items():
            out._add_const(mono, c)
        for mono, row in other.terms.items():
            for vid, c in row.items():
                out._add_var(mono, vid, c)
        return out

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        if isinstance(other, Polynomial):
            other = PolyExpr.from_polynomial(other)
        if isinstance(other, (int, float)):
            return self + (-other)
        if not isinstance(other, PolyExpr):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            out = PolyExpr(self.nvars)
            out.const = {m: c * other for m, c in self.const.items()}
            out.terms = {m: {v: c * other for v, c in row.items()} for m, row in self.terms.items()}
            return out
        if isinstance(other, PolyExpr):
            if self.has_decisions() and other.has_decisions():
                raise NonlinearExpressionError(
                    "product of two decision-bearing expressions is not allowed")
            if other.has_decisions():
                return other * _to_polynomial(self)
            other = _to_polynomial(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        if other.nvars != self.nvars:
            raise ValueError("variable-count mismatch")
        out = PolyExpr(self.nvars)
        for mb, cb in other.terms.items():
            for ma, ca in self.const.items():
                out._add_const(tuple(a + b for a, b in zip(ma, mb)), ca * cb)
            for ma, row in self.terms.items():
                key = tuple(a + b for a, b in zip(ma, mb))
                for vid, ca in row.items():
                    out._add_var(key, vid, ca * cb)
        return out

    __rmul__ = __mul__

    def differentiate(self, var: int) -> "PolyExpr":
        if not 0 <= var < self.nvars:
            raise IndexError(f"variable index {var} out of range")
        out = PolyExpr(self.nvars)
        for mono, c in self.const.items():
            k = mono[var]
            if k:
                new = list(mono)
                new[var] = k - 1
                out._add_const(tuple(new), c * k)
        for mono, row in self.terms.items():
            k = mono[var]
            if k:
                new = list(mono)
                new[var] = k - 1
                for vid, c in row.items():
                    out._add_var(tuple(new), vid, c * k)
        return out


def _to_polynomial(expr: PolyExpr) -> Polynomial:
    if expr.has_decisions():
        raise NonlinearExpressionError("expression still contains decision variables")
    return Polynomial(expr.nvars, expr.const)


# Sides of a domain inequality h(x) {>= or <=} 0, and the free-multiplier
# marker for equality surfaces h(x) = 0.
GEQ = "geq"
LEQ = "leq"
EQ = "eq"


class SosProgram:
    """Mutable builder collecting decision variables and constraints."""

    def __init__(self, nvars: int):
        self.nvars = nvars
        self._next_var = 0
        self.var_kinds: list[tuple] = []  # vid -> (FREE,) | (GRAM, block_index, i, j)
        self.decision_polys: dict[str, DecisionPoly] = {}
        self.gram_blocks: list[GramBlock] = []
        self.equalities: list[tuple[str, PolyExpr]] = []
        self._names: set[str] = set()

    # -- declarations ------------------------------------------------------

    def _fresh_name(self, name: str) -> str:
        if name in self._names:
            raise ValueError(f"duplicate declaration name {name!r}")
        self._names.add(name)
        return name

    def declare_poly(self, name: str, degree: int) -> DecisionPoly:
        """Free polynomial: one unconstrained scalar per basis monomial."""
        if degree < 0:
            raise ValueError("degree must be >= 0")
        self._fresh_name(name)
        basis = tuple(monomial_basis(self.nvars, degree))
        ids = []
        for _ in basis:
            self.var_kinds.append((FREE,))
            ids.append(self._next_var)
            self._next_var += 1
        dp = DecisionPoly(name, self.nvars, degree, basis, tuple(ids))
        self.decision_polys[name] = dp
        return dp

    def declare_gram(self, name: str, half_degree: int) -> GramBlock:
        self._fresh_name(name)
        basis = tuple(monomial_basis(self.nvars, half_degree))
        entry_ids = {}
        side = len(basis)
        for i in range(side):
            for j in range(i, side):
                self.var_kinds.append((GRAM, len(self.gram_blocks), i, j))
                entry_ids[(i, j)] = self._next_var
                self._next_var += 1
        block = GramBlock(name, self.nvars, basis, len(self.gram_blocks), entry_ids)
        self.gram_blocks.append(block)
        return block

    def gram_expr(self, block: GramBlock) -> PolyExpr:
        """v(x)^T Q v(x) as an expression linear in the Gram entries.

        Off-diagonal entries appear with weight 2 (they represent the two
        symmetric matrix positions).
        """
        e = PolyExpr(self.nvars)
        for (i, j), vid in block.entry_ids.items():
            mono = tuple(a + b for a, b in zip(block.basis[i], block.basis[j]))
            e._add_var(mono, vid, 1.0 if i == j else 2.0)
        return e

    def declare_sos(self, name: str, degree: int) -> tuple[PolyExpr, GramBlock]:
        """SOS polynomial of the given (even) degree."""
        if degree % 2:
            raise ValueError("SOS degree must be even")
        block = self.declare_gram(name, degree // 2)
        return self.gram_expr(block), block

    # -- constraints -------------------------------------------------------

    def assert_zero(self, expr: PolyExpr, label: str = "eq") -> None:
        """Coefficient-wise equality expr == 0 (one scalar row per monomial)."""
        if expr.nvars != self.nvars:
            raise ValueError("variable-count mismatch")
        self.equalities.append((label, expr))

    def assert_sos(self, expr: PolyExpr, label: str = "sos") -> GramBlock:
        """Constrain expr to be a sum of squares.

        Adds a fresh Gram block of matching (padded-even) degree and the
        coefficient-wise equality expr - v^T Q v == 0.
        """
        deg = max(expr.degree, 0)
        half = (deg + 1) // 2
        block = self.declare_gram(f"{label}@gram{len(self.gram_blocks)}", half)
        self.assert_zero(expr - self.gram_expr(block), label)
        return block

    def assert_nonneg_on(
        self,
        expr: PolyExpr,
        domain_terms: list[tuple[Polynomial, str]],
        d_sigma: int,
        d_lambda: int = 0,
        label: str = "dom",
    ) -> dict[str, object]:
        """Putinar-style domination of expr on a semi-algebraic domain.

        ``domain_terms`` lists (h, side) pairs: side GEQ means the domain
        uses h >= 0, LEQ means h <= 0, EQ means the surface h = 0 with an
        unconstrained (non-SOS) multiplier.
        """
        combined = expr.copy()
        multipliers: dict[str, object] = {}
        for k, (h, side) in enumerate(domain_terms):
            if isinstance(h, PolyExpr):
                raise ValueError("domain polynomial must be decision-free")
            mname = f"{label}:m{k}"
            if side == EQ:
                lam = self.declare_poly(mname, d_lambda)
                combined = combined + PolyExpr.from_decision(lam) * h
                multipliers[mname] = lam
            elif side in (GEQ, LEQ):
                sig, block = self.declare_sos(mname, d_sigma)
                sign = -1.0 if side == GEQ else 1.0
                combined = combined + sig * (h * sign)
                multipliers[mname] = block
            else:
                raise ValueError(f"unknown domain side {side!r}")
        multipliers["__gram0__"] = self.assert_sos(combined, label)
        return multipliers

    # -- introspection -----------------------------------------------------

    @property
    def n_scalar_vars(self) -> int:
        return self._next_var

    def free_var_ids(self) -> list[int]:
        return [vid for vid, kind in enumerate(self.var_kinds) if kind[0] == FREE]
