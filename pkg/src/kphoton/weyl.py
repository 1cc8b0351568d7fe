"""Exact arithmetic for differential operators with polynomial coefficients.

An operator is a finite sum ``p_ij(w, d, E) * z^i * Dz^j`` with ``Dz = d/dz``
and coefficients that are Laurent polynomials over the rationals in three
commuting parameters: the field frequency ``w``, the level splitting ``d``
and a spectral parameter ``E``.  Products are put in normal order (all powers
of ``z`` to the left of all ``Dz``) by exact commutator rewriting, so equality
of operators is structural equality of their term dictionaries.
"""

from __future__ import annotations

from fractions import Fraction
from functools import cache

# parameter symbols, fixed order: w (frequency), d (splitting), E (spectral)
PARAM_NAMES = ("w", "d", "E")


def _fmt_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


class ParamPoly:
    """Laurent polynomial in (w, d, E) with exact rational coefficients.

    Terms map exponent triples to nonzero Fractions.  Negative exponents are
    permitted (they arise when tail coefficients of asymptotic series are
    solved for); every constructor and operation strips zero coefficients, so
    ``==`` is structural.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: dict[tuple[int, int, int], Fraction] | None = None):
        self.terms = {e: c for e, c in (terms or {}).items() if c}

    @classmethod
    def rational(cls, q) -> "ParamPoly":
        q = Fraction(q)
        return cls({(0, 0, 0): q} if q else {})

    @classmethod
    def monomial(cls, ew: int = 0, ed: int = 0, ee: int = 0, coeff=1) -> "ParamPoly":
        return cls({(ew, ed, ee): Fraction(coeff)})

    @classmethod
    def omega(cls) -> "ParamPoly":
        return cls.monomial(ew=1)

    @classmethod
    def delta(cls) -> "ParamPoly":
        return cls.monomial(ed=1)

    @classmethod
    def energy(cls) -> "ParamPoly":
        return cls.monomial(ee=1)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, ParamPoly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __neg__(self) -> "ParamPoly":
        return ParamPoly({e: -c for e, c in self.terms.items()})

    def __add__(self, other: "ParamPoly") -> "ParamPoly":
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, 0) + c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return ParamPoly(out)

    def __sub__(self, other: "ParamPoly") -> "ParamPoly":
        return self + (-other)

    def __mul__(self, other: "ParamPoly") -> "ParamPoly":
        out: dict[tuple[int, int, int], Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = (e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2])
                s = out.get(e, 0) + c1 * c2
                if s:
                    out[e] = s
                else:
                    out.pop(e, None)
        return ParamPoly(out)

    def __pow__(self, n: int) -> "ParamPoly":
        if n < 0:
            raise ValueError("negative power of a general polynomial")
        out = ParamPoly.rational(1)
        for _ in range(n):
            out = out * self
        return out

    def scale(self, q) -> "ParamPoly":
        q = Fraction(q)
        if not q:
            return ParamPoly()
        return ParamPoly({e: c * q for e, c in self.terms.items()})

    def is_constant(self) -> bool:
        return all(e == (0, 0, 0) for e in self.terms)

    def constant_value(self) -> Fraction:
        """The value of a constant polynomial (0 for the empty one)."""
        if not self.is_constant():
            raise ValueError(f"not a constant polynomial: {self.text()}")
        return self.terms.get((0, 0, 0), Fraction(0))

    def is_single_term(self) -> bool:
        return len(self.terms) == 1

    def uses(self, name: str) -> bool:
        """Whether the given parameter symbol occurs with nonzero exponent."""
        i = PARAM_NAMES.index(name)
        return any(e[i] for e in self.terms)

    def exact_div_term(self, divisor: "ParamPoly") -> "ParamPoly":
        """Divide by a single-term polynomial (always exact, Laurent)."""
        if len(divisor.terms) != 1:
            raise ValueError("divisor must be a single term")
        (de, dc), = divisor.terms.items()
        return ParamPoly({
            (e[0] - de[0], e[1] - de[1], e[2] - de[2]): c / dc
            for e, c in self.terms.items()
        })

    def subs_omega(self, value) -> "ParamPoly":
        """Substitute an exact rational for w, keeping d and E symbolic."""
        value = Fraction(value)
        out = ParamPoly()
        for (ew, ed, ee), c in self.terms.items():
            if ew < 0 and value == 0:
                raise ZeroDivisionError("w = 0 substituted into a 1/w term")
            out = out + ParamPoly({(0, ed, ee): c * value ** ew})
        return out

    def evaluate(self, w, d, E) -> Fraction:
        """Evaluate at exact rational parameter values."""
        w, d, E = Fraction(w), Fraction(d), Fraction(E)
        total = Fraction(0)
        for (ew, ed, ee), c in self.terms.items():
            total += c * w ** ew * d ** ed * E ** ee
        return total

    def sorted_terms(self):
        # ascending total degree, ties broken w before d before E
        return sorted(self.terms.items(),
                      key=lambda t: (sum(t[0]), tuple(-x for x in t[0])))

    def text(self) -> str:
        """Canonical rendering: graded order, lowest total degree first."""
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.sorted_terms():
            factors = [f"{n}^{x}" if x != 1 else n
                       for n, x in zip(PARAM_NAMES, e) if x]
            mag = abs(c)
            if not factors:
                body = _fmt_rational(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([_fmt_rational(mag)] + factors)
            parts.append(("-" if c < 0 else "+", body))
        sign, body = parts[0]
        out = ("-" if sign == "-" else "") + body
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self):
        return f"ParamPoly({self.text()})"


P_ZERO = ParamPoly()
P_ONE = ParamPoly.rational(1)


@cache
def _dz_z(j: int, i: int) -> tuple[tuple[tuple[int, int], int], ...]:
    """Normal ordering of Dz^j z^i as ((z-power, Dz-power), int) pairs.

    Single-commutator rewriting Dz z^i = z^i Dz + i z^(i-1), peeled one Dz at
    a time and memoized.
    """
    if j == 0:
        return (((i, 0), 1),)
    if i == 0:
        return (((0, j), 1),)
    out: dict[tuple[int, int], int] = {}
    for (a, b), c in _dz_z(j - 1, i):
        out[(a, b + 1)] = out.get((a, b + 1), 0) + c
    for (a, b), c in _dz_z(j - 1, i - 1):
        out[(a, b)] = out.get((a, b), 0) + i * c
    return tuple(out.items())


class OperatorPoly:
    """Normal-ordered differential operator sum p_ij(w,d,E) z^i Dz^j."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[tuple[int, int], ParamPoly] | None = None):
        self.terms = {ij: p for ij, p in (terms or {}).items() if p}

    @classmethod
    def single(cls, i: int, j: int, coeff: ParamPoly | None = None) -> "OperatorPoly":
        if i < 0 or j < 0:
            raise ValueError("operator powers must be nonnegative")
        return cls({(i, j): P_ONE if coeff is None else coeff})

    def __eq__(self, other) -> bool:
        return isinstance(other, OperatorPoly) and self.terms == other.terms

    def __neg__(self) -> "OperatorPoly":
        return OperatorPoly({ij: -p for ij, p in self.terms.items()})

    def __add__(self, other: "OperatorPoly") -> "OperatorPoly":
        out = dict(self.terms)
        for ij, p in other.terms.items():
            s = out.get(ij, P_ZERO) + p
            if s:
                out[ij] = s
            else:
                out.pop(ij, None)
        return OperatorPoly(out)

    def __sub__(self, other: "OperatorPoly") -> "OperatorPoly":
        return self + (-other)

    def scale(self, p: ParamPoly) -> "OperatorPoly":
        return OperatorPoly({ij: q * p for ij, q in self.terms.items()})

    def z_degree(self) -> int:
        return max((i for i, _ in self.terms), default=0)

    def d_degree(self) -> int:
        return max((j for _, j in self.terms), default=0)

    def coeff(self, i: int, j: int) -> ParamPoly:
        return self.terms.get((i, j), P_ZERO)

    def sorted_terms(self):
        return sorted(self.terms.items())

    def text(self) -> str:
        if not self.terms:
            return "0"
        rows = []
        for (i, j), p in self.sorted_terms():
            mono = "*".join(s for s, e in (("z", i), ("Dz", j)) if e
                            for s in [f"{s}^{e}" if e != 1 else s])
            coeff = p.text()
            if " " in coeff:
                coeff = f"({coeff})"
            rows.append(f"{coeff}*{mono}" if mono else coeff)
        return " + ".join(rows)

    def __repr__(self):
        return f"OperatorPoly({self.text()})"


def op_mul(a: OperatorPoly, b: OperatorPoly) -> OperatorPoly:
    """Product a*b, normal ordered exactly."""
    out: dict[tuple[int, int], ParamPoly] = {}
    for (i1, j1), p1 in a.terms.items():
        for (i2, j2), p2 in b.terms.items():
            p = p1 * p2
            for (i, j), c in _dz_z(j1, i2):
                key = (i1 + i, j + j2)
                s = out.get(key, P_ZERO) + p.scale(c)
                if s:
                    out[key] = s
                else:
                    out.pop(key, None)
    return OperatorPoly(out)


def apply_to_polynomial(a: OperatorPoly, poly: dict[int, ParamPoly]) -> dict[int, ParamPoly]:
    """Apply an operator to a polynomial in z (exponent -> ParamPoly).

    Independent of op_mul: z^i Dz^j z^n = n(n-1)...(n-j+1) z^(n-j+i).
    """
    out: dict[int, ParamPoly] = {}
    for (i, j), p in a.terms.items():
        for n, c in poly.items():
            if n < 0:
                raise ValueError("polynomial exponents must be nonnegative")
            if j > n:
                continue
            fall = 1
            for s in range(j):
                fall *= n - s
            term = (p * c).scale(fall)
            key = n - j + i
            tot = out.get(key, P_ZERO) + term
            if tot:
                out[key] = tot
            else:
                out.pop(key, None)
    return out


@cache
def a_coeff(j: int, n: int) -> int:
    """Cross-term weight of z^(n-j) Dz^(n-j) in the normal order of (z^n + Dz^n)^2.

    Defined by a_0 = 1, a_j = 0 for j < 0, and the two-step recurrence
    a_j(n) = a_j(n-1) + (2n-2j+1) a_(j-1)(n-1) + (n-j+1)^2 a_(j-2)(n-1).
    """
    if j < 0:
        return 0
    if j == 0:
        return 1
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 0
    return (a_coeff(j, n - 1)
            + (2 * n - 2 * j + 1) * a_coeff(j - 1, n - 1)
            + (n - j + 1) ** 2 * a_coeff(j - 2, n - 1))


def a1_closed(n: int) -> int:
    """Closed form a_1(n) = n^2."""
    return n * n


def a2_closed(n: int) -> int:
    """Closed form a_2(n) = (n-1)^2 n^2 / 2."""
    return (n - 1) ** 2 * n ** 2 // 2


def build_reduced_operator(k: int) -> OperatorPoly:
    """Second-order-in-spin reduced operator for k-th power coupling.

    (w z Dz - E)^2 - (z^k + Dz^k)^2 + w k z^(k-1) - d^2, with the square of
    the coupling expanded in normal order.  Valid for k >= 2; the k = 2
    operator is built for display although its asymptotics are handled
    numerically elsewhere.
    """
    if not isinstance(k, int) or k < 2:
        raise ValueError(f"k must be an integer >= 2, got {k!r}")
    w = ParamPoly.omega()
    E = ParamPoly.energy()
    d = ParamPoly.delta()
    terms: dict[tuple[int, int], ParamPoly] = {}

    def add(i, j, p):
        s = terms.get((i, j), P_ZERO) + p
        if s:
            terms[(i, j)] = s
        else:
            terms.pop((i, j), None)

    # (w z Dz - E)^2 = w^2 z^2 Dz^2 + (w^2 - 2 E w) z Dz + E^2
    add(2, 2, w * w)
    add(1, 1, w * w - (E * w).scale(2))
    add(0, 0, E * E)
    # -(z^k + Dz^k)^2 in normal order
    add(0, 2 * k, -P_ONE)
    add(2 * k, 0, -P_ONE)
    add(k, k, P_ONE.scale(-2))
    for j in range(1, k + 1):
        add(k - j, k - j, P_ONE.scale(-a_coeff(j, k)))
    # first-order remainder of the elimination
    add(k - 1, 0, w.scale(k))
    add(0, 0, -(d * d))
    return OperatorPoly(terms)
