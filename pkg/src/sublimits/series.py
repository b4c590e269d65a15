"""Truncated formal power series and the class-level analytic machinery.

Exact big-rational coefficients are the default everywhere counting matters;
floats only enter inside the singularity root-finder and asymptotic fits.
All series are immutable; operations never read or write past the stated
truncation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

TWO_SQRT_PI = 2.0 * math.sqrt(math.pi)


class SeriesError(ValueError):
    """Bad series input (wrong constant term, order too low, mode mismatch)."""


class NotSubcriticalError(ArithmeticError):
    """The singular system has no root in range at the working truncation."""


class AsymptoticsMismatchError(ArithmeticError):
    """Coefficient scaling does not settle: not a square-root singularity."""


@dataclass(frozen=True)
class TruncatedSeries:
    """Coefficients c_0..c_N of a formal power series, exact or float."""

    coeffs: tuple
    exact: bool = True
    var: str = "z"

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __post_init__(self):
        if not self.coeffs:
            raise SeriesError("a series needs at least the constant coefficient")

    # -- constructors -----------------------------------------------------

    @staticmethod
    def from_coeffs(coeffs: Sequence, exact: bool = True, var: str = "z") -> "TruncatedSeries":
        conv = (lambda c: Fraction(c)) if exact else float
        return TruncatedSeries(tuple(conv(c) for c in coeffs), exact, var)

    @staticmethod
    def zero(order: int, exact: bool = True, var: str = "z") -> "TruncatedSeries":
        c = Fraction(0) if exact else 0.0
        return TruncatedSeries((c,) * (order + 1), exact, var)

    @staticmethod
    def one(order: int, exact: bool = True, var: str = "z") -> "TruncatedSeries":
        return TruncatedSeries.monomial(0, 1, order, exact, var)

    @staticmethod
    def identity(order: int, exact: bool = True, var: str = "z") -> "TruncatedSeries":
        """The series z."""
        return TruncatedSeries.monomial(1, 1, order, exact, var)

    @staticmethod
    def monomial(k: int, c, order: int, exact: bool = True, var: str = "z") -> "TruncatedSeries":
        zero = Fraction(0) if exact else 0.0
        coeffs = [zero] * (order + 1)
        if k <= order:
            coeffs[k] = Fraction(c) if exact else float(c)
        return TruncatedSeries(tuple(coeffs), exact, var)

    # -- structural helpers ------------------------------------------------

    def truncate(self, order: int) -> "TruncatedSeries":
        if order >= self.order:
            return self.lift(order)
        return TruncatedSeries(self.coeffs[: order + 1], self.exact, self.var)

    def lift(self, order: int) -> "TruncatedSeries":
        if order <= self.order:
            return self
        zero = Fraction(0) if self.exact else 0.0
        return TruncatedSeries(self.coeffs + (zero,) * (order - self.order), self.exact, self.var)

    def to_float(self) -> "TruncatedSeries":
        if not self.exact:
            return self
        return TruncatedSeries(tuple(float(c) for c in self.coeffs), False, self.var)

    def valuation(self) -> int:
        """Index of first nonzero coefficient; order+1 if identically zero."""
        for i, c in enumerate(self.coeffs):
            if c != 0:
                return i
        return self.order + 1

    def is_zero(self) -> bool:
        return self.valuation() > self.order

    def __getitem__(self, k: int):
        return self.coeffs[k]

    def _coerce(self, other: "TruncatedSeries"):
        if self.exact and other.exact:
            return self, other
        return self.to_float(), other.to_float()

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, TruncatedSeries):
            a, b = self._coerce(other)
            n = min(a.order, b.order)
            return TruncatedSeries(
                tuple(a.coeffs[i] + b.coeffs[i] for i in range(n + 1)), a.exact, a.var
            )
        return self + TruncatedSeries.monomial(0, other, self.order, self.exact, self.var)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(tuple(-c for c in self.coeffs), self.exact, self.var)

    def __sub__(self, other):
        if isinstance(other, TruncatedSeries):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            c = Fraction(other) if self.exact else float(other)
            return TruncatedSeries(tuple(x * c for x in self.coeffs), self.exact, self.var)
        a, b = self._coerce(other)
        n = min(a.order, b.order)
        va, vb = a.valuation(), b.valuation()
        zero = Fraction(0) if a.exact else 0.0
        out = [zero] * (n + 1)
        ac, bc = a.coeffs, b.coeffs
        for i in range(va, min(a.order, n) + 1):
            ai = ac[i]
            if ai == 0:
                continue
            jmax = min(b.order, n - i)
            for j in range(vb, jmax + 1):
                out[i + j] += ai * bc[j]
        return TruncatedSeries(tuple(out), a.exact, a.var)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries):
            return self * other.inverse()
        c = Fraction(other) if self.exact else float(other)
        return self * (Fraction(1, 1) / c if self.exact else 1.0 / c)

    def inverse(self) -> "TruncatedSeries":
        """Multiplicative inverse; requires a nonzero constant term."""
        if self.coeffs[0] == 0:
            raise SeriesError("cannot invert a series with zero constant term")
        n = self.order
        c0 = self.coeffs[0]
        inv0 = Fraction(1, 1) / c0 if self.exact else 1.0 / c0
        out = [inv0]
        for k in range(1, n + 1):
            acc = 0
            for j in range(1, k + 1):
                cj = self.coeffs[j]
                if cj != 0:
                    acc += cj * out[k - j]
            out.append(-inv0 * acc)
        return TruncatedSeries(tuple(out), self.exact, self.var)

    def derivative(self) -> "TruncatedSeries":
        if self.order == 0:
            return TruncatedSeries.zero(0, self.exact, self.var)
        return TruncatedSeries(
            tuple(self.coeffs[k] * k for k in range(1, self.order + 1)), self.exact, self.var
        )

    def exp(self) -> "TruncatedSeries":
        """exp of a series with zero constant term, via the g' = f'.g recurrence."""
        if self.coeffs[0] != 0:
            raise SeriesError(
                f"exp_series requires a zero constant term, got {self.coeffs[0]!r}"
            )
        n = self.order
        one = Fraction(1) if self.exact else 1.0
        out = [one]
        f = self.coeffs
        for k in range(1, n + 1):
            acc = 0
            for j in range(1, k + 1):
                fj = f[j]
                if fj != 0:
                    acc += j * fj * out[k - j]
            out.append(acc / k if not self.exact else Fraction(acc, k))
        return TruncatedSeries(tuple(out), self.exact, self.var)

    def compose(self, inner: "TruncatedSeries") -> "TruncatedSeries":
        """self(inner); inner must have zero constant term.  Horner, O(N^3)."""
        if inner.coeffs[0] != 0:
            raise SeriesError("composition requires inner constant term 0")
        a, b = self._coerce(inner)
        n = min(a.order, b.order)
        acc = TruncatedSeries.monomial(0, a.coeffs[a.order], n, a.exact, a.var)
        for k in range(a.order - 1, -1, -1):
            acc = acc * b.truncate(n) + a.coeffs[k]
        return acc

    def evaluate(self, x):
        """Horner evaluation of the truncated polynomial at a scalar."""
        acc = self.coeffs[self.order] * 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __repr__(self):
        head = ", ".join(str(c) for c in self.coeffs[:8])
        tail = ", ..." if self.order >= 8 else ""
        return f"TruncatedSeries([{head}{tail}], order={self.order}, exact={self.exact})"


def exp_series(f: TruncatedSeries) -> TruncatedSeries:
    return f.exp()


def substitute_powers(f: TruncatedSeries, i: int) -> TruncatedSeries:
    """f(z^i) truncated to f's order."""
    if i < 1:
        raise SeriesError(f"substitute_powers requires i >= 1, got {i}")
    if i == 1:
        return f
    zero = Fraction(0) if f.exact else 0.0
    out = [zero] * (f.order + 1)
    for k, c in enumerate(f.coeffs):
        if i * k > f.order:
            break
        out[i * k] = c
    return TruncatedSeries(tuple(out), f.exact, f.var)


@dataclass(frozen=True)
class SingularityData:
    """Square-root singular point of a class's rooted generating function."""

    rho: float
    tau: float
    b: float
    A: float
    truncation_order: int
    residual: float

    def as_dict(self) -> dict:
        return {
            "rho": self.rho,
            "tau": self.tau,
            "b": self.b,
            "A": self.A,
            "truncation_order": self.truncation_order,
            "residual": self.residual,
        }


# ---------------------------------------------------------------------------
# functional-equation solvers
# ---------------------------------------------------------------------------

_MAX_NEWTON_STEPS = 64


def solve_labelled_class(cls, N: int, exact: bool = True) -> TruncatedSeries:
    """Rooted EGF C(z) with C = z*exp(B'(C)), to order N, by Newton lifting."""
    if cls.kind != "labelled":
        raise SeriesError(f"class {cls.name} is not labelled")
    cls.check_order(N)
    cached = cls._cache.get("labelled_series")
    if cached is None or cached.order < N:
        series = _solve_labelled(cls, N)
        if cached is None or series.order > cached.order:
            cls._cache["labelled_series"] = series
    else:
        series = cached
    series = series.truncate(N)
    return series if exact else series.to_float()


def _solve_labelled(cls, N: int) -> TruncatedSeries:
    y = TruncatedSeries.identity(1)
    good = 1
    while good < N:
        m = min(N, 2 * good + 1)
        y = y.lift(m)
        z = TruncatedSeries.identity(m)
        for _ in range(_MAX_NEWTON_STEPS):
            e = cls.bprime_apply(y).exp()
            f = y - z * e
            if f.valuation() > m:
                break
            deriv = TruncatedSeries.one(m) - z * e * cls.bdoubleprime_apply(y)
            y = y - f / deriv
        else:
            raise SeriesError("labelled solver did not converge (invalid B' supplier?)")
        good = m
    if y[1] != 1:
        raise SeriesError("solver postcondition failed: coefficient of z^1 is not 1")
    return y


def solve_unlabelled_class(cls, N: int, exact: bool = True) -> TruncatedSeries:
    """Rooted OGF with C = z*exp(sum_i Z_B'(C(z^i), C(z^2i), ...)/i), to order N."""
    if cls.kind != "unlabelled":
        raise SeriesError(f"class {cls.name} is not unlabelled")
    cls.check_order(N)
    cached = cls._cache.get("unlabelled_series")
    if cached is None or cached.order < N:
        series = _solve_unlabelled(cls, N)
        if cached is None or series.order > cached.order:
            cls._cache["unlabelled_series"] = series
    else:
        series = cached
    series = series.truncate(N)
    return series if exact else series.to_float()


def _arg_fn(table: dict[int, TruncatedSeries], order: int, first: TruncatedSeries | None = None):
    zero = TruncatedSeries.zero(order)

    def arg(k: int) -> TruncatedSeries:
        if k == 1 and first is not None:
            return first
        return table.get(k, zero)

    return arg


def _solve_unlabelled(cls, N: int) -> TruncatedSeries:
    if N <= 1:
        return TruncatedSeries.identity(max(N, 1)).truncate(N)
    half = _solve_unlabelled(cls, (N + 1) // 2)
    # C(z^k) for k >= 2 is already determined by the first half of C.
    pows = {
        k: substitute_powers(half.truncate(N // k).lift(N), k) for k in range(2, N + 1)
    }
    # sum_{i>=2} Z_B'(C(z^i), C(z^2i), ...)/i via one base evaluation in w,
    # reusing Z_B'(C(w), C(w^2), ...)|_{w -> z^i}.
    m = half.order
    basetab = {k: substitute_powers(half.truncate(m // k).lift(m), k) for k in range(2, m + 1)}
    base = cls.z_bprime(_arg_fn(basetab, m, first=half), m)
    rest = TruncatedSeries.zero(N)
    for i in range(2, N + 1):
        rest = rest + substitute_powers(base.truncate(N // i).lift(N), i) * Fraction(1, i)
    z = TruncatedSeries.identity(N)
    y = half.lift(N)
    for _ in range(_MAX_NEWTON_STEPS):
        g = cls.z_bprime(_arg_fn(pows, N, first=y), N)
        e = (g + rest).exp()
        f = y - z * e
        if f.valuation() > N:
            break
        deriv = TruncatedSeries.one(N) - z * e * cls.z_bdoubleprime(_arg_fn(pows, N, first=y), N)
        y = y - f / deriv
    else:
        raise SeriesError("unlabelled solver did not converge (invalid Z_B' supplier?)")
    return y


def solve_class(cls, N: int, exact: bool = True) -> TruncatedSeries:
    if cls.kind == "labelled":
        return solve_labelled_class(cls, N, exact)
    return solve_unlabelled_class(cls, N, exact)


# ---------------------------------------------------------------------------
# singularity location
# ---------------------------------------------------------------------------


def _bisect_increasing(fn, lo: float, hi: float, tol: float) -> float:
    flo, fhi = fn(lo), fn(hi)
    if flo > 0 or fhi < 0:
        raise NotSubcriticalError(
            f"no sign change in [{lo:g}, {hi:g}]: not subcritical at this truncation"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < tol * max(1.0, abs(mid)):
            break
        if fn(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _newton_polish(fn, x: float, tol: float) -> float:
    for _ in range(60):
        h = max(abs(x), 1e-3) * 1e-7
        f0 = fn(x)
        d = (fn(x + h) - fn(x - h)) / (2 * h)
        if d == 0:
            break
        step = f0 / d
        x -= step
        if abs(step) < tol * max(1.0, abs(x)):
            break
    return x


def find_singularity(cls, tol: float = 1e-12, order: int | None = None) -> SingularityData:
    """Locate (rho, tau) of the singular system and fit the constants b, A.

    Labelled: tau solves tau*B''(tau) = 1, then rho = tau*exp(-B'(tau)).
    Unlabelled: bisection over rho_guess with the inner equation
    y*Z_B''(y, C(rho^2), ...) = 1 solved per guess.
    """
    order = order if order is not None else cls.default_order
    cached = cls._cache.get(("singularity", order, tol))
    if cached is not None:
        return cached
    if cls.kind == "labelled":
        data = _find_singularity_labelled(cls, tol, order)
    else:
        data = _find_singularity_unlabelled(cls, tol, order)
    cls._cache[("singularity", order, tol)] = data
    return data


def _find_singularity_labelled(cls, tol: float, order: int) -> SingularityData:
    series = solve_labelled_class(cls, order)

    def g(t: float) -> float:
        val = cls.bdoubleprime_point(t)
        return t * val - 1.0 if math.isfinite(val) else math.inf

    cap = cls.bprime_radius * (1 - 1e-12) if math.isfinite(cls.bprime_radius) else None
    hi = 0.5
    while g(hi) < 0:
        if cap is not None and hi >= cap:
            raise NotSubcriticalError(
                f"{cls.name}: tau*B''(tau) < 1 up to the block radius; not subcritical"
            )
        hi = min(hi * 2, cap) if cap is not None else hi * 2
        if hi > 1e12:
            raise NotSubcriticalError(f"{cls.name}: no root for the singular system")
    tau = _bisect_increasing(g, 1e-12, hi, tol * 1e-2)
    tau = _newton_polish(g, tau, tol * 1e-4)
    rho = tau * math.exp(-cls.bprime_point(tau))
    residual = abs(tau * cls.bdoubleprime_point(tau) - 1.0) + abs(
        rho * math.exp(cls.bprime_point(tau)) - tau
    )
    if residual > tol:
        raise NotSubcriticalError(f"{cls.name}: singular system residual {residual:g} > tol")
    A = fit_asymptotics(series, rho)
    return SingularityData(rho, tau, A * TWO_SQRT_PI, A, order, residual)


def _find_singularity_unlabelled(cls, tol: float, order: int) -> SingularityData:
    series = solve_unlabelled_class(cls, order)
    coeffs = [float(c) for c in series.coeffs]

    def eval_c(x: float) -> float:
        acc = 0.0
        for c in reversed(coeffs):
            acc = acc * x + c
        return acc

    def point_args(rho_g: float, scale: int = 1):
        def argp(k: int) -> float:
            x = rho_g ** (scale * k)
            return eval_c(x)

        return argp

    def solve_inner(rho_g: float) -> float:
        def g2(y: float) -> float:
            def argp(k: int) -> float:
                return y if k == 1 else eval_c(rho_g ** k)

            try:
                val = cls.z_bdoubleprime_point(argp)
            except ZeroDivisionError:
                return math.inf
            return y * val - 1.0 if math.isfinite(val) else math.inf

        hi = 1.0
        while g2(hi) < 0 and hi < 1e9:
            hi *= 2
        y = _bisect_increasing(g2, 1e-12, hi, tol * 1e-2)
        return _newton_polish(g2, y, tol * 1e-4)

    def outer(rho_g: float) -> float:
        y = solve_inner(rho_g)

        def argp1(k: int) -> float:
            return y if k == 1 else eval_c(rho_g ** k)

        g_val = cls.z_bprime_point(argp1)
        a_val = 0.0
        i = 2
        while rho_g ** i > 1e-18 and i < 400:
            a_val += cls.z_bprime_point(point_args(rho_g, i)) / i
            i += 1
        return rho_g * math.exp(g_val + a_val) - y

    # coefficient-ratio bracket around the radius of convergence
    n = series.order
    ratio = float(Fraction(series.coeffs[n - 1]) / Fraction(series.coeffs[n])) if series.coeffs[n] else 0.5
    lo, hi = ratio * 0.5, ratio * 1.5
    for _ in range(60):
        if outer(lo) < 0:
            break
        lo *= 0.7
    for _ in range(60):
        if outer(hi) > 0:
            break
        hi *= 1.2
    rho = _bisect_increasing(outer, lo, hi, tol * 1e-2)
    rho = _newton_polish(outer, rho, tol * 1e-4)
    tau = solve_inner(rho)

    def argp1(k: int) -> float:
        return tau if k == 1 else eval_c(rho ** k)

    a_val = sum(
        cls.z_bprime_point(point_args(rho, i)) / i
        for i in range(2, 200)
        if rho ** i > 1e-18
    )
    residual = abs(tau * cls.z_bdoubleprime_point(argp1) - 1.0) + abs(
        rho * math.exp(cls.z_bprime_point(argp1) + a_val) - tau
    )
    if residual > tol:
        raise NotSubcriticalError(f"{cls.name}: singular system residual {residual:g} > tol")
    A = fit_asymptotics(series, rho)
    return SingularityData(rho, tau, A * TWO_SQRT_PI, A, order, residual)


# ---------------------------------------------------------------------------
# coefficient asymptotics
# ---------------------------------------------------------------------------


def _richardson(pairs: list[tuple[int, float]], p: int) -> list[tuple[int, float]]:
    out = []
    for (n0, a0), (n1, a1) in zip(pairs, pairs[1:]):
        w0, w1 = float(n0) ** p, float(n1) ** p
        out.append((n1, (w1 * a1 - w0 * a0) / (w1 - w0)))
    return out


def fit_asymptotics(series: TruncatedSeries, rho: float, conv_tol: float = 5e-3) -> float:
    """Richardson-extrapolated limit of c_n * rho^n * n^(3/2).

    Raises AsymptoticsMismatchError when the scaled sequence keeps drifting,
    i.e. the singularity is not of square-root type.
    """
    n_max = series.order
    if n_max < 40:
        raise SeriesError(f"fit_asymptotics needs order >= 40, got {n_max}")
    n_min = max(8, n_max // 3)
    rho_f = Fraction(rho)
    pairs: list[tuple[int, float]] = []
    power = rho_f ** n_min
    for n in range(n_min, n_max + 1):
        c = series.coeffs[n]
        scaled = float((Fraction(c) if series.exact else Fraction(c)) * power) * n ** 1.5
        pairs.append((n, scaled))
        power *= rho_f
    raw = [a for _, a in pairs]
    if raw[0] != 0 and abs(raw[-1]) > 3 * abs(raw[0]) and abs(raw[-1]) > 3 * abs(raw[len(raw) // 2]):
        raise AsymptoticsMismatchError(
            "scaled coefficients diverge: wrong singularity type or wrong rho"
        )
    for p in (1, 2):
        pairs = _richardson(pairs, p)
    tail = [a for _, a in pairs[-5:]]
    est = tail[-1]
    spread = max(tail) - min(tail)
    if not math.isfinite(est) or (abs(est) > 0 and spread / abs(est) > conv_tol) or est <= 0:
        raise AsymptoticsMismatchError(
            f"asymptotics mismatch: extrapolation not settling (spread {spread:g}, value {est:g})"
        )
    return est


# ---------------------------------------------------------------------------
# level series (tightness of the k-block neighbourhood measures)
# ---------------------------------------------------------------------------


def level_series(cls, k: int, N: int, exact: bool = True) -> TruncatedSeries:
    """Generating function of vertices at block-level < k in rooted members.

    Recurrence: T^(1) = C, and (by the chain rule on the marked equation,
    the l-th cycle variable carries the substitution z^(l*i))
    T^(k+1) = C * (1 + sum_i sum_l l * Z_B',l(C(z^i), ...) * T^(k)(z^(l*i))).
    """
    if k < 1:
        raise SeriesError("level_series requires k >= 1")
    if cls.kind != "unlabelled":
        raise SeriesError("level_series is defined for unlabelled classes")
    c = solve_unlabelled_class(cls, N, exact=True)
    tab = {j: substitute_powers(c.truncate(N // j).lift(N), j) for j in range(2, N + 1)}
    arg = _arg_fn(tab, N, first=c)
    parts = {
        ell: cls.z_bprime_partial(ell, arg, N) for ell in cls.partial_indices
    }
    t = c
    for _ in range(k - 1):
        total = TruncatedSeries.zero(N)
        for ell, p_ell in parts.items():
            # base(w) = Z_B',l(C(w), ...) * T(w^l); substituting w -> z^i
            # yields the (i, l) term of the double sum
            base = p_ell * substitute_powers(t.truncate(N // ell).lift(N), ell)
            for i in range(1, N + 1):
                piece = substitute_powers(base.truncate(N // i).lift(N), i)
                if piece.is_zero() and i > 1:
                    break
                total = total + piece * ell
        t = c * (TruncatedSeries.one(N) + total)
    t = t.truncate(N)
    return t if exact else t.to_float()
