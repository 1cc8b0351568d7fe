"""Asymptotic exponent extraction for the reduced operator at z -> infinity.

Substitutes e^(g z^2/2 + b z) z^r (c_0 + c_1/z + ...) into a normal-ordered
operator, collects the coefficient of each power z^(r + 2k - l) (level l) and
solves the levels in the fixed order g, b, r, c_1, c_2, ... over the quotient
ring Q(w,d,E)[g]/(g^k + 1).  Everything is exact; no floating point.

Symbol conventions in rendered output: g is the Gaussian exponent generator
(g^k = -1), b the linear exponent, r the power-law exponent, c0..cL the tail
coefficients; w, d, E live inside the ParamPoly coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .weyl import OperatorPoly, P_ONE, P_ZERO, ParamPoly, a_coeff


class UnsolvableLevel(Exception):
    """A level equation is neither zero nor degree <= 2 in its unknown."""

    def __init__(self, level: int, residual: str, reason: str):
        self.level = level
        self.residual = residual
        self.reason = reason
        super().__init__(f"level {level}: {reason} (residual: {residual})")


class DivisionByNonUnit(Exception):
    """Quotient-ring division was demanded by an element that is not q*mono*g^j."""


class OutOfScope(Exception):
    """Requested k lies outside the asymptotic theory implemented here."""


# ---------------------------------------------------------------------------
# ring elements

def _fold_gamma(p: int, k: int) -> tuple[int, int]:
    # g^p -> sign * g^(p mod k) using g^k = -1
    q, r = divmod(p, k)
    return (-1 if q % 2 else 1), r


class RingElem:
    """Polynomial in g, b, r and the c_n, with ParamPoly coefficients.

    Keys are (g-power, b-power, r-power, c-index tuple).  modulus=None means
    a free polynomial in g; modulus=k means the quotient by g^k + 1, with
    eager reduction so g-powers stay below k.
    """

    __slots__ = ("terms", "modulus")

    def __init__(self, terms=None, modulus: int | None = None):
        self.modulus = modulus
        out = {}
        for key, p in (terms or {}).items():
            if not p:
                continue
            gp, bx, rx, cm = key
            if modulus is not None:
                sign, gp = _fold_gamma(gp, modulus)
                if sign < 0:
                    p = -p
            nk = (gp, bx, rx, cm)
            s = out.get(nk, P_ZERO) + p
            if s:
                out[nk] = s
            else:
                out.pop(nk, None)
        self.terms = out

    # -- constructors
    @classmethod
    def zero(cls, modulus=None):
        return cls({}, modulus)

    @classmethod
    def one(cls, modulus=None):
        return cls({(0, 0, 0, ()): P_ONE}, modulus)

    @classmethod
    def from_param(cls, p: ParamPoly, modulus=None):
        return cls({(0, 0, 0, ()): p}, modulus)

    @classmethod
    def gamma(cls, power: int = 1, modulus=None, sign: int = 1):
        return cls({(power, 0, 0, ()): P_ONE.scale(sign)}, modulus)

    @classmethod
    def c_sym(cls, n: int, modulus=None):
        return cls({(0, 0, 0, (n,)): P_ONE}, modulus)

    # -- predicates / accessors
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        return (isinstance(other, RingElem) and self.modulus == other.modulus
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.modulus, frozenset((k, hash(v)) for k, v in self.terms.items())))

    def _check(self, other: "RingElem"):
        if self.modulus != other.modulus:
            raise ValueError("mixed ring moduli")

    def max_b(self) -> int:
        return max((k[1] for k in self.terms), default=0)

    def max_r(self) -> int:
        return max((k[2] for k in self.terms), default=0)

    def c_indices(self) -> set[int]:
        out = set()
        for k in self.terms:
            out.update(k[3])
        return out

    def uses_param(self, name: str) -> bool:
        return any(p.uses(name) for p in self.terms.values())

    def is_scalar(self) -> bool:
        """No g, b, r or c content: a bare ParamPoly."""
        return all(k == (0, 0, 0, ()) for k in self.terms)

    def scalar_part(self) -> ParamPoly:
        if not self.is_scalar():
            raise ValueError(f"not a scalar ring element: {self.text()}")
        return self.terms.get((0, 0, 0, ()), P_ZERO)

    # -- arithmetic
    def __neg__(self):
        return RingElem({k: -p for k, p in self.terms.items()}, self.modulus)

    def __add__(self, other: "RingElem"):
        self._check(other)
        out = dict(self.terms)
        for k, p in other.terms.items():
            s = out.get(k, P_ZERO) + p
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        e = RingElem.zero(self.modulus)
        e.terms = out
        return e

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other: "RingElem"):
        self._check(other)
        out = {}
        for (g1, b1, r1, c1), p1 in self.terms.items():
            for (g2, b2, r2, c2), p2 in other.terms.items():
                key = (g1 + g2, b1 + b2, r1 + r2, tuple(sorted(c1 + c2)))
                prod = p1 * p2
                s = out.get(key, P_ZERO) + prod
                if s:
                    out[key] = s
                else:
                    out.pop(key, None)
        return RingElem(out, self.modulus)

    def __pow__(self, n: int):
        out = RingElem.one(self.modulus)
        for _ in range(n):
            out = out * self
        return out

    def scale(self, q) -> "RingElem":
        if isinstance(q, ParamPoly):
            if q.is_zero():
                return RingElem.zero(self.modulus)
            out = {}
            for k, p in self.terms.items():
                s = p * q
                if s:
                    out[k] = s
            return RingElem(out, self.modulus)
        q = Fraction(q)
        if not q:
            return RingElem.zero(self.modulus)
        e = RingElem.zero(self.modulus)
        e.terms = {k: p.scale(q) for k, p in self.terms.items()}
        return e

    def reduce(self, k: int) -> "RingElem":
        """Impose g^k = -1 (enter the quotient ring)."""
        return RingElem(self.terms, k)

    # -- fast prefactor shifts used by the series derivative rule
    def mul_gamma(self):
        e = RingElem.zero(self.modulus)
        if self.modulus is None:
            e.terms = {(g + 1, b, r, c): p for (g, b, r, c), p in self.terms.items()}
            return e
        return self * RingElem.gamma(1, self.modulus)

    def mul_beta(self):
        e = RingElem.zero(self.modulus)
        e.terms = {(g, b + 1, r, c): p for (g, b, r, c), p in self.terms.items()}
        return e

    def mul_rho_plus(self, offset: int):
        out = {}
        for (g, b, r, c), p in self.terms.items():
            k1 = (g, b, r + 1, c)
            s = out.get(k1, P_ZERO) + p
            if s:
                out[k1] = s
            else:
                out.pop(k1, None)
            if offset:
                k0 = (g, b, r, c)
                s = out.get(k0, P_ZERO) + p.scale(offset)
                if s:
                    out[k0] = s
                else:
                    out.pop(k0, None)
        e = RingElem.zero(self.modulus)
        e.terms = out
        return e

    # -- substitutions
    def subs_gamma(self, value: "RingElem") -> "RingElem":
        self._check(value)
        powers = {0: RingElem.one(self.modulus)}

        def pw(n):
            if n not in powers:
                powers[n] = pw(n - 1) * value
            return powers[n]

        out = RingElem.zero(self.modulus)
        for (g, b, r, c), p in self.terms.items():
            e = RingElem.zero(self.modulus)
            e.terms = {(0, b, r, c): p}
            out = out + e * pw(g)
        return out

    def subs_b(self, value: "RingElem") -> "RingElem":
        self._check(value)
        powers = {0: RingElem.one(self.modulus)}

        def pw(n):
            if n not in powers:
                powers[n] = pw(n - 1) * value
            return powers[n]

        out = RingElem.zero(self.modulus)
        for (g, b, r, c), p in self.terms.items():
            e = RingElem.zero(self.modulus)
            e.terms = {(g, 0, r, c): p}
            out = out + e * pw(b)
        return out

    def subs_r(self, value) -> "RingElem":
        if not isinstance(value, RingElem):
            value = RingElem.from_param(
                value if isinstance(value, ParamPoly) else ParamPoly.rational(value),
                self.modulus)
        self._check(value)
        powers = {0: RingElem.one(self.modulus)}

        def pw(n):
            if n not in powers:
                powers[n] = pw(n - 1) * value
            return powers[n]

        out = RingElem.zero(self.modulus)
        for (g, b, r, c), p in self.terms.items():
            e = RingElem.zero(self.modulus)
            e.terms = {(g, b, 0, c): p}
            out = out + e * pw(r)
        return out

    def subs_c(self, n: int, value) -> "RingElem":
        if not isinstance(value, RingElem):
            value = RingElem.from_param(
                value if isinstance(value, ParamPoly) else ParamPoly.rational(value),
                self.modulus)
        self._check(value)
        out = RingElem.zero(self.modulus)
        for (g, b, r, c), p in self.terms.items():
            mult = c.count(n)
            rest = tuple(i for i in c if i != n)
            e = RingElem.zero(self.modulus)
            e.terms = {(g, b, r, rest): p}
            out = out + e * value ** mult
        return out

    # -- views
    def poly_in_b(self) -> dict[int, "RingElem"]:
        out: dict[int, RingElem] = {}
        for (g, b, r, c), p in self.terms.items():
            e = out.setdefault(b, RingElem.zero(self.modulus))
            e.terms[(g, 0, r, c)] = e.terms.get((g, 0, r, c), P_ZERO) + p
        return out

    def poly_in_r(self) -> dict[int, "RingElem"]:
        out: dict[int, RingElem] = {}
        for (g, b, r, c), p in self.terms.items():
            e = out.setdefault(r, RingElem.zero(self.modulus))
            e.terms[(g, b, 0, c)] = e.terms.get((g, b, 0, c), P_ZERO) + p
        return out

    def linear_in_c(self, n: int) -> tuple["RingElem", "RingElem"]:
        """Split as K*c_n + R; raises if c_n appears nonlinearly."""
        K = RingElem.zero(self.modulus)
        R = RingElem.zero(self.modulus)
        for (g, b, r, c), p in self.terms.items():
            m = c.count(n)
            if m == 0:
                R.terms[(g, b, r, c)] = p
            elif m == 1:
                rest = tuple(i for i in c if i != n)
                key = (g, b, r, rest)
                K.terms[key] = K.terms.get(key, P_ZERO) + p
            else:
                raise ValueError(f"c{n} appears with power {m}")
        return K, R

    def rem_rho_quadratic(self, b: ParamPoly, c: ParamPoly) -> "RingElem":
        """Remainder modulo r^2 + b r + c (so zero iff divisible)."""
        top = self.max_r()
        # r^e = u_e * r + v_e
        u = [P_ZERO, P_ONE]
        v = [P_ONE, P_ZERO]
        for _ in range(2, top + 1):
            nu = v[-1] - b * u[-1]
            nv = -(c * u[-1])
            u.append(nu)
            v.append(nv)
        out = RingElem.zero(self.modulus)
        for (g, bx, r, cm), p in self.terms.items():
            for rr, w in ((1, u[r]), (0, v[r])):
                if not w:
                    continue
                key = (g, bx, rr, cm)
                s = out.terms.get(key, P_ZERO) + p * w
                if s:
                    out.terms[key] = s
                else:
                    out.terms.pop(key, None)
        return out

    # -- unit division
    def is_unit_monomial(self) -> bool:
        if len(self.terms) != 1:
            return False
        (g, b, r, c), p = next(iter(self.terms.items()))
        return b == 0 and r == 0 and c == () and p.is_single_term()

    def div_unit(self, unit: "RingElem") -> "RingElem":
        self._check(unit)
        if not unit.is_unit_monomial():
            raise DivisionByNonUnit(
                f"division by non-unit ring element: {unit.text()}")
        (g, _, _, _), p = next(iter(unit.terms.items()))
        inv_p = P_ONE.exact_div_term(p)
        out = {}
        for (g1, b1, r1, c1), p1 in self.terms.items():
            out[(g1 - g, b1, r1, c1)] = p1 * inv_p
        return RingElem(out, self.modulus)

    # -- rendering
    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda t: (sum(t[0][:3]) + len(t[0][3]), t[0]))

    def text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (g, b, r, c), p in self.sorted_terms():
            factors = []
            if g:
                factors.append(f"g{g}")
            if b:
                factors.append("b" if b == 1 else f"b^{b}")
            if r:
                factors.append("r" if r == 1 else f"r^{r}")
            factors.extend(f"c{i}" for i in c)
            coeff = p.text()
            if not factors:
                parts.append(coeff)
            elif coeff == "1":
                parts.append("*".join(factors))
            elif coeff == "-1":
                parts.append("-" + "*".join(factors))
            else:
                if " " in coeff:
                    coeff = f"({coeff})"
                parts.append("*".join([coeff] + factors))
        out = parts[0]
        for t in parts[1:]:
            out += f" - {t[1:]}" if t.startswith("-") else f" + {t}"
        return out

    def __repr__(self):
        mod = f", mod g^{self.modulus}+1" if self.modulus else ""
        return f"RingElem({self.text()}{mod})"


# ---------------------------------------------------------------------------
# ansatz series and level extraction

class AnsatzSeries:
    """Window of series coefficients for e^(g z^2/2 + b z) z^r sum p_j z^(s-j).

    terms[i] is the RingElem coefficient of z^(r + s - i); the window keeps
    exactly depth+1 slots, so each derivative raises s by one and drops the
    slot that falls below the window.
    """

    __slots__ = ("s", "terms", "depth")

    def __init__(self, s: int, terms: list[RingElem], depth: int):
        if len(terms) != depth + 1:
            raise ValueError("window must hold depth+1 coefficients")
        self.s = s
        self.terms = terms
        self.depth = depth

    @classmethod
    def initial(cls, depth: int) -> "AnsatzSeries":
        return cls(0, [RingElem.c_sym(n) for n in range(depth + 1)], depth)

    def coeff_at_offset(self, e: int) -> RingElem:
        i = self.s - e
        if 0 <= i <= self.depth:
            return self.terms[i]
        return RingElem.zero()

    def deriv(self) -> "AnsatzSeries":
        # d/dz: c at offset e -> g*c at e+1, b*c at e, (r+e)*c at e-1
        new = [RingElem.zero() for _ in range(self.depth + 1)]
        for i, c in enumerate(self.terms):
            if c.is_zero():
                continue
            e = self.s - i
            new[i] = new[i] + c.mul_gamma()
            if i + 1 <= self.depth:
                new[i + 1] = new[i + 1] + c.mul_beta()
            if i + 2 <= self.depth:
                new[i + 2] = new[i + 2] + c.mul_rho_plus(e)
        return AnsatzSeries(self.s + 1, new, self.depth)

    def shift_z(self, i: int) -> "AnsatzSeries":
        return AnsatzSeries(self.s + i, self.terms, self.depth)


@dataclass(frozen=True)
class LevelEquation:
    level: int
    coeff: RingElem

    def text(self) -> str:
        return self.coeff.text()


def substitute_ansatz(A: OperatorPoly, k: int, depth: int = 5, *,
                      cap: int = 32) -> list[LevelEquation]:
    """Collect levels 0..depth: level l is the coefficient of z^(r + 2k - l).

    The c_0..c_depth stay symbolic; gamma is a free symbol here (the quotient
    relation is imposed by solve_levels, so level 0 shows the (g^k+1)^2
    factor explicitly).
    """
    if not isinstance(k, int) or k < 2:
        raise ValueError(f"k must be an integer >= 2, got {k!r}")
    if depth < 5:
        raise ValueError("depth must be at least 5 (levels 0..4 fix the exponents)")
    if depth > cap:
        raise ValueError(f"depth {depth} exceeds the cap {cap}")
    max_j = max((j for _, j in A.terms), default=0)
    series = [AnsatzSeries.initial(depth)]
    for _ in range(max_j):
        series.append(series[-1].deriv())
    levels = []
    for l in range(depth + 1):
        total = RingElem.zero()
        for (i, j), p in A.terms.items():
            contrib = series[j].coeff_at_offset(2 * k - l - i)
            if not contrib.is_zero():
                total = total + contrib.scale(p)
        levels.append(LevelEquation(l, total))
    return levels


# ---------------------------------------------------------------------------
# quadratic roots

def _fraction_sqrt(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def _param_sqrt(p: ParamPoly) -> ParamPoly | None:
    """Square root of a single-term ParamPoly, if exact."""
    if p.is_zero():
        return ParamPoly()
    if not p.is_single_term():
        return None
    (e, c), = p.terms.items()
    if any(x % 2 for x in e):
        return None
    r = _fraction_sqrt(c)
    if r is None:
        return None
    return ParamPoly.monomial(e[0] // 2, e[1] // 2, e[2] // 2, r)


def ring_sqrt(x: RingElem) -> RingElem | None:
    """A square root of x = q*mono*g^p in the quotient ring, else None.

    Tries every candidate g-power t with g^(2t) proportional to g^p; the
    relation g^k = -1 makes odd p solvable for odd k via a sign flip.
    """
    if x.is_zero():
        return RingElem.zero(x.modulus)
    k = x.modulus
    if k is None:
        raise ValueError("ring_sqrt needs a quotient-ring element")
    if len(x.terms) != 1:
        return None
    (p, b, r, c), coeff = next(iter(x.terms.items()))
    if b or r or c:
        return None
    for t in range(k):
        sign, rr = _fold_gamma(2 * t, k)
        if rr != p:
            continue
        root_coeff = _param_sqrt(coeff.scale(sign))
        if root_coeff is not None:
            return RingElem({(t, 0, 0, ()): root_coeff}, k)
    return None


def _square_content(n: int) -> int:
    # largest s with s*s dividing n; trial division up to the cube root,
    # then the leftover cofactor can only contribute if it is itself a square
    n = abs(n)
    if n <= 1:
        return 1
    s = 1
    p = 2
    while p * p * p <= n:
        while n % (p * p) == 0:
            s *= p
            n //= p * p
        if n % p == 0:
            n //= p
        p += 1 if p == 2 else 2
    r = math.isqrt(n)
    if r * r == n:
        s *= r
    return s


class QuadraticRoot:
    """One root rational + surd*sqrt(disc) of a stored monic quadratic.

    All four components are ParamPoly values; disc is normalized to integer
    content free of square factors (a perfect-square disc is folded away, so
    rational roots always have surd = 0).
    """

    __slots__ = ("rational", "surd", "disc", "monic_b", "monic_c")

    def __init__(self, rational, surd, disc, monic_b, monic_c):
        as_p = lambda v: v if isinstance(v, ParamPoly) else ParamPoly.rational(v)
        self.rational = as_p(rational)
        self.surd = as_p(surd)
        self.disc = as_p(disc)
        self.monic_b = as_p(monic_b)
        self.monic_c = as_p(monic_c)

    @classmethod
    def pair_from_monic(cls, b: ParamPoly, c: ParamPoly) -> list["QuadraticRoot"]:
        """Roots of x^2 + b x + c, surd-normalized; one entry if disc = 0."""
        rational = b.scale(Fraction(-1, 2))
        disc0 = b * b - c.scale(4)
        if disc0.is_zero():
            return [cls(rational, P_ZERO, P_ZERO, b, c)]
        den = 1
        for coeff in disc0.terms.values():
            den = den * coeff.denominator // math.gcd(den, coeff.denominator)
        disc = disc0.scale(den * den)
        content = 0
        for coeff in disc.terms.values():
            content = math.gcd(content, int(coeff))
        s = _square_content(content)
        disc = disc.scale(Fraction(1, s * s))
        surd = Fraction(s, 2 * den)
        if disc == P_ONE:
            # perfect square: two rational roots
            return [cls(rational + ParamPoly.rational(sign * surd),
                        P_ZERO, P_ZERO, b, c) for sign in (1, -1)]
        return [cls(rational, ParamPoly.rational(sign * surd), disc, b, c)
                for sign in (1, -1)]

    @classmethod
    def from_rational(cls, r: ParamPoly) -> "QuadraticRoot":
        return cls(r, P_ZERO, P_ZERO, -(r + r), r * r)

    def verify(self) -> bool:
        """Exact back-substitution into the stored monic quadratic."""
        plain = (self.rational * self.rational + self.surd * self.surd * self.disc
                 + self.monic_b * self.rational + self.monic_c)
        mixed = (self.rational.scale(2) + self.monic_b) * self.surd
        return plain.is_zero() and mixed.is_zero()

    def is_rational(self) -> bool:
        return self.surd.is_zero()

    def rational_value(self) -> ParamPoly:
        if not self.is_rational():
            raise ValueError("root has a surd part")
        return self.rational

    def text(self) -> str:
        if self.is_rational():
            return self.rational.text()
        s = self.surd.text()
        if "-" in s:
            return f"{self.rational.text()} - {s[1:]}*sqrt({self.disc.text()})"
        return f"{self.rational.text()} + {s}*sqrt({self.disc.text()})"

    def __repr__(self):
        return f"QuadraticRoot({self.text()})"

    def __eq__(self, other):
        return (isinstance(other, QuadraticRoot)
                and self.rational == other.rational and self.surd == other.surd
                and self.disc == other.disc and self.monic_b == other.monic_b
                and self.monic_c == other.monic_c)


# ---------------------------------------------------------------------------
# branch solving

@dataclass(frozen=True)
class ExponentBranch:
    """One resolved asymptotic branch, instantiated at a concrete gamma root."""

    k: int
    gamma_index: int          # m: the root exp(i(2m+1)pi/k) of g^k = -1
    gamma: RingElem           # +-g^p realizing that root in the quotient ring
    beta: RingElem
    rho: QuadraticRoot
    c: tuple[RingElem, ...] = field(default=())   # c_0 = 1 normalization
    gamma_multiplicity: int = 2
    beta_index: int = 0
    rho_index: int = 0
    resonant: tuple[int, ...] = ()

    def substitute(self, elem: RingElem) -> RingElem:
        """Substitute this branch's gamma, beta, rho and known c_n into elem."""
        out = elem.subs_gamma(self.gamma).subs_b(self.beta)
        if self.rho.is_rational():
            out = out.subs_r(self.rho.rational_value())
        else:
            out = out.rem_rho_quadratic(self.rho.monic_b, self.rho.monic_c)
        for n, cn in enumerate(self.c):
            out = out.subs_c(n, cn)
        return out

    def annihilates(self, level: LevelEquation) -> bool:
        return self.substitute(level.coeff.reduce(self.k)).is_zero()


def gamma_root_elements(k: int) -> list[RingElem]:
    """The k roots of g^k = -1 as ring elements: root m is g^(2m+1) reduced."""
    out = []
    for m in range(k):
        sign, p = _fold_gamma(2 * m + 1, k)
        out.append(RingElem.gamma(p, k, sign))
    return out


def _solve_beta(eq: RingElem, level: int) -> list[RingElem]:
    poly = eq.poly_in_b()
    deg = max(poly)
    if deg > 2:
        raise UnsolvableLevel(level, eq.text(), f"degree {deg} in b")
    if deg == 2:
        if 1 in poly:
            raise UnsolvableLevel(level, eq.text(), "b-quadratic with linear term")
        A, C = poly[2], poly.get(0, RingElem.zero(eq.modulus))
        if C.is_zero():
            return [RingElem.zero(eq.modulus)]   # double root b = 0
        rhs = (-C).div_unit(A)
        root = ring_sqrt(rhs)
        if root is None:
            raise UnsolvableLevel(level, eq.text(),
                                  f"b^2 = {rhs.text()} has no monomial square root")
        return [root, -root]
    if deg == 1:
        return [(-poly.get(0, RingElem.zero(eq.modulus))).div_unit(poly[1])]
    raise UnsolvableLevel(level, eq.text(), "no b present where b is expected")


def _scalarize(e: RingElem, level: int, what: str) -> ParamPoly:
    if not e.is_scalar():
        raise UnsolvableLevel(level, e.text(), f"{what} is not a scalar")
    return e.scalar_part()


def _solve_rho(eq: RingElem, level: int) -> list[QuadraticRoot]:
    poly = eq.poly_in_r()
    deg = max(poly)
    if deg > 2:
        raise UnsolvableLevel(level, eq.text(), f"degree {deg} in r")
    zero = RingElem.zero(eq.modulus)
    if deg == 2:
        A = poly[2]
        b = _scalarize(poly.get(1, zero).div_unit(A), level, "monic r coefficient")
        c = _scalarize(poly.get(0, zero).div_unit(A), level, "monic constant")
        return QuadraticRoot.pair_from_monic(b, c)
    if deg == 1:
        val = _scalarize((-poly.get(0, zero)).div_unit(poly[1]), level, "r value")
        return [QuadraticRoot.from_rational(val)]
    raise UnsolvableLevel(level, eq.text(), "no r present where r is expected")


def _solve_c(eq: RingElem, n: int, level: int) -> tuple[RingElem, bool]:
    """Solve K*c_n + R = 0; returns (value, resonant_flag)."""
    K, R = eq.linear_in_c(n)
    if K.is_zero():
        if R.is_zero():
            return RingElem.zero(eq.modulus), True   # free coefficient, pin to 0
        raise UnsolvableLevel(level, R.text(), f"c{n} dropped out with nonzero residual")
    return (-R).div_unit(K), False


def solve_levels(levels: list[LevelEquation], k: int) -> list[ExponentBranch]:
    """Resolve gamma, beta, rho (and any c_n forced by levels <= 4).

    Branches are ordered by (gamma root index, beta solution index, rho root
    index); every returned branch annihilates levels 0..4 exactly.
    """
    if not isinstance(k, int) or k < 2:
        raise ValueError(f"k must be an integer >= 2, got {k!r}")
    if k == 2:
        raise OutOfScope(
            "k=2: the Gaussian exponent is not a root of unity, so the k >= 3 "
            "level analysis does not apply; use the truncation numerics instead")
    if len(levels) < 6:
        raise ValueError("need levels 0..5 at least (depth >= 5)")

    # level 0 must carry the doubly degenerate root condition (g^k + 1)^2 = 0
    lvl0 = levels[0].coeff
    expected = RingElem({(2 * k, 0, 0, (0,)): P_ONE, (k, 0, 0, (0,)): P_ONE.scale(2),
                         (0, 0, 0, (0,)): P_ONE})
    if lvl0 != expected and lvl0 != -expected:
        raise UnsolvableLevel(0, lvl0.text(),
                              "level 0 does not factor as a unit times (g^k+1)^2*c0")

    one = RingElem.one(k)
    reduced = [lv.coeff.reduce(k).subs_c(0, one) for lv in levels]

    # triangular elimination over the generator: beta, then rho, then forced c_n
    @dataclass
    class _State:
        beta: RingElem | None = None
        beta_index: int = 0
        rho: QuadraticRoot | None = None
        rho_index: int = 0
        cs: tuple[RingElem, ...] = (one,)
        resonant: tuple[int, ...] = ()

    def apply_known(eq: RingElem, st: _State) -> RingElem:
        if st.beta is not None:
            eq = eq.subs_b(st.beta)
        if st.rho is not None:
            if st.rho.is_rational():
                eq = eq.subs_r(st.rho.rational_value())
            else:
                eq = eq.rem_rho_quadratic(st.rho.monic_b, st.rho.monic_c)
        for n, cn in enumerate(st.cs):
            eq = eq.subs_c(n, cn)
        return eq

    states = [_State()]
    for l in range(1, 5):
        nxt: list[_State] = []
        for st in states:
            eq = apply_known(reduced[l], st)
            if eq.is_zero():
                nxt.append(st)
                continue
            if st.beta is None:
                if not eq.max_b():
                    raise UnsolvableLevel(l, eq.text(),
                                          "nonzero level before b was determined")
                for i, bval in enumerate(_solve_beta(eq, l)):
                    nxt.append(_State(beta=bval, beta_index=i))
                continue
            if st.rho is None:
                if not eq.max_r():
                    raise UnsolvableLevel(l, eq.text(),
                                          "nonzero level before r was determined")
                for i, rval in enumerate(_solve_rho(eq, l)):
                    nxt.append(_State(st.beta, st.beta_index, rval, i,
                                      st.cs, st.resonant))
                continue
            n = len(st.cs)
            if n not in eq.c_indices():
                raise UnsolvableLevel(l, eq.text(), f"expected c{n} at this level")
            val, resonant = _solve_c(eq, n, l)
            nxt.append(_State(st.beta, st.beta_index, st.rho, st.rho_index,
                              st.cs + (val,),
                              st.resonant + ((n,) if resonant else ())))
        states = nxt

    branches = []
    for m, groot in enumerate(gamma_root_elements(k)):
        for st in states:
            br = ExponentBranch(
                k=k, gamma_index=m, gamma=groot,
                beta=st.beta.subs_gamma(groot),
                rho=st.rho,
                c=tuple(ci.subs_gamma(groot) for ci in st.cs),
                beta_index=st.beta_index, rho_index=st.rho_index,
                resonant=st.resonant)
            branches.append(br)
    branches.sort(key=lambda b: (b.gamma_index, b.beta_index, b.rho_index))

    for br in branches[: max(1, len(branches) // k)]:
        # one gamma root suffices: the others are ring automorphic images
        for lv in levels[:5]:
            if not br.annihilates(lv):
                raise UnsolvableLevel(lv.level, br.substitute(
                    lv.coeff.reduce(k)).text(), "branch fails back-substitution")
    return branches


def c_recursion(branch: ExponentBranch, levels: list[LevelEquation],
                n_max: int) -> ExponentBranch:
    """Extend the tail to c_1..c_n_max by consuming levels past the exponents.

    Requires a surd-free rho (the k=4 branches with sqrt(16-w^2) are refused:
    the tail would leave the rational quotient ring).
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    if len(levels) - 1 < 5 + n_max:
        raise ValueError(f"need depth >= {5 + n_max} for n_max={n_max}")
    if not branch.rho.is_rational():
        raise ValueError("tail recursion needs a rational rho branch; "
                         f"got {branch.rho.text()}")
    k = branch.k
    cs = list(branch.c)
    resonant = list(branch.resonant)
    rho = branch.rho.rational_value()
    level_iter = iter(range(5, len(levels)))
    while len(cs) - 1 < n_max:
        try:
            l = next(level_iter)
        except StopIteration:
            raise ValueError(
                "levels exhausted before reaching n_max (a trailing resonant "
                "coefficient needs one extra level; raise the depth)") from None
        eq = levels[l].coeff.reduce(k).subs_gamma(branch.gamma)
        eq = eq.subs_b(branch.beta).subs_r(rho)
        for n, cn in enumerate(cs):
            eq = eq.subs_c(n, cn)
        if eq.is_zero():
            continue
        pending = sorted(i for i in eq.c_indices() if i >= len(cs))
        if not pending:
            raise UnsolvableLevel(l, eq.text(),
                                  "nonzero residual with every c_n already fixed")
        target = pending[0]
        # levels that vanished identically left earlier c_n unconstrained:
        # pin them to 0 and record the resonance
        while len(cs) < target and len(cs) - 1 < n_max:
            resonant.append(len(cs))
            cs.append(RingElem.zero(k))
        if len(cs) - 1 >= n_max:
            break
        val, is_res = _solve_c(eq, target, l)
        cs.append(val)
        if is_res:
            resonant.append(target)
    return ExponentBranch(
        k=k, gamma_index=branch.gamma_index, gamma=branch.gamma,
        beta=branch.beta, rho=branch.rho, c=tuple(cs),
        gamma_multiplicity=branch.gamma_multiplicity,
        beta_index=branch.beta_index, rho_index=branch.rho_index,
        resonant=tuple(resonant))


# ---------------------------------------------------------------------------
# closed forms and the generating-function cross-checks

def rho_quadratic_general(k: int) -> tuple[Fraction, Fraction]:
    """Monic quadratic for r at k >= 5: linear and constant coefficients."""
    if k < 5:
        raise ValueError("the general quadratic holds for k >= 5")
    return Fraction(2 * k - 3), Fraction(3 * k * k, 4) - 2 * k + Fraction(5, 4)


def c0_closed(m: int) -> Fraction:
    """m(m^3 - 6m^2 + 11m - 6)/8."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return Fraction(m * (m ** 3 - 6 * m * m + 11 * m - 6), 8)


@lru_cache(maxsize=None)
def _eta(l: int) -> Fraction:
    # series coefficients of 1/sqrt(1-x)
    return Fraction(math.comb(2 * l, l), 4 ** l)


def gf_coefficient(m: int) -> Fraction:
    """C_0 of g^(m-2) z^(m-4) in e^(-g z^2/2) d^m e^(g z^2/2).

    Even m: constrained multi-index sum over (n_0, n_1, n_2, n_3) with
    n_0 + n_2 + 2 n_3 = 2 and n_1 = m/2 - 2 - n_2 - n_3; odd m = 2l+1 reduces
    to the even case through C(2l+1) = (2l-2)(2l-1)l + C(2l).
    """
    if m < 4:
        raise ValueError("m must be >= 4")
    if m % 2:
        l = (m - 1) // 2
        return Fraction((2 * l - 2) * (2 * l - 1) * l) + gf_coefficient(2 * l)
    kk = m // 2
    total = Fraction(0)
    for n3 in range(0, 2):
        for n2 in range(0, 3 - 2 * n3):
            n0 = 2 - n2 - 2 * n3
            n1 = kk - 2 - n2 - n3
            if n1 < 0:
                continue
            denom = (math.factorial(n1) * math.factorial(n2) * math.factorial(n3)
                     * 2 ** (n1 + n2 + n3))
            total += _eta(n0) / denom
    return Fraction(2 ** kk * math.factorial(kk)) * total


def crho_closed(k: int) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """(C2k_r2, C2k_r, Ck_r2, Ck_r) for the level-4 assembly at k >= 5."""
    if k < 5:
        raise ValueError("closed forms stated for k >= 5")
    return (Fraction(k * (2 * k - 1)),
            Fraction(4 * k ** 3 - 8 * k * k + 3 * k),
            Fraction(k * (k - 1), 2),
            Fraction(k * (k * k + 3), 2) - 2 * k * k)


def brute_force_exponent_oracle(m: int, depth: int | None = None) -> dict:
    """Coefficient table of d^m e^(g z^2/2) z^r by m-fold differentiation.

    Returns {(a, b, c): Fraction} for the g^a r^b z^(r+c) terms; z-offsets
    below -depth are dropped (default keeps everything).
    """
    if m > 24:
        raise ValueError("cost guard: m must be <= 24")
    if m < 0:
        raise ValueError("m must be nonnegative")
    if depth is None:
        depth = m
    # state: offset e -> {(a, b): Fraction}
    state = {0: {(0, 0): Fraction(1)}}
    for _ in range(m):
        nxt: dict[int, dict] = {}

        def bump(e, key, v):
            if e < -depth:
                return
            d = nxt.setdefault(e, {})
            s = d.get(key, 0) + v
            if s:
                d[key] = s
            else:
                d.pop(key, None)

        for e, poly in state.items():
            for (a, b), v in poly.items():
                bump(e + 1, (a + 1, b), v)        # g z branch
                bump(e - 1, (a, b + 1), v)        # r part of (r + e)
                if e:
                    bump(e - 1, (a, b), v * e)    # offset part of (r + e)
        state = nxt
    table = {}
    for e, poly in state.items():
        for (a, b), v in poly.items():
            table[(a, b, e)] = v
    return table


def assemble_final_quadratic(k: int, *, from_oracle: bool = False) -> tuple[Fraction, Fraction]:
    """Monic level-4 quadratic rebuilt from the C-coefficients at g^k = -1.

    The two g-powers g^(2k-2) and g^(k-2) merge with a relative sign; dividing
    by the leading -k^2 gives the monic pair to compare with
    rho_quadratic_general.
    """
    if k < 5:
        raise ValueError("assembly stated for k >= 5")
    if from_oracle:
        t2k = brute_force_exponent_oracle(2 * k)
        tk = brute_force_exponent_oracle(k)
        c2k_r2 = t2k[(2 * k - 2, 2, 2 * k - 4)]
        c2k_r = t2k[(2 * k - 2, 1, 2 * k - 4)]
        ck_r2 = tk[(k - 2, 2, k - 4)]
        ck_r = tk[(k - 2, 1, k - 4)]
        c0_2k = t2k[(2 * k - 2, 0, 2 * k - 4)]
        c0_k = tk[(k - 2, 0, k - 4)]
    else:
        c2k_r2, c2k_r, ck_r2, ck_r = crho_closed(k)
        c0_2k, c0_k = gf_coefficient(2 * k), gf_coefficient(k)
    a1, a2 = Fraction(a_coeff(1, k)), Fraction(a_coeff(2, k))
    # g^(2k-2) bracket enters with sign -1 relative to g^(k-2)
    r2 = -c2k_r2 + 2 * ck_r2
    r1 = -c2k_r + 2 * ck_r + (k - 1) * a1
    r0 = (-c0_2k + 2 * c0_k + Fraction((k - 2) * (k - 1), 2) * a1 + a2)
    if r2 == 0:
        raise UnsolvableLevel(4, f"{r1}*r + {r0}", "assembled level lost its r^2 term")
    return r1 / r2, r0 / r2
