"""Scalar spectral filters and their application to normal operators.

A filter is a scalar function g applied to an operator through its
eigendecomposition, ``g(T) s = sum_j g(lambda_j) P_j s``.  Rational filters
admit a second, algebraically equivalent route through compositions, linear
combinations, and one linear solve; general continuous filters admit a
Chebyshev polynomial route driven purely by matrix-vector products.  The
module also computes the filter-dependent constants used by the transfer
bounds: the per-eigenvalue maximal difference quotient and the sup norm over
an evaluated spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from .errors import (
    FilterEvaluationError,
    SingularFilterError,
    SpectralIntervalError,
)
from .graphs import EigenDecomposition, OperatorWithInnerProduct, eigendecompose

#: Eigenvalues whose difference quotient denominator is below this are
#: excluded from the quotient maximum; the excluded term never contributes
#: to the bound because it carries a vanishing |kappa - lambda|^2 factor.
DEFAULT_EXCLUSION_TOL = 1e-12

_REAL_IMAG_TOL = 1e-9


def _as_real(x, name: str) -> np.ndarray:
    """Coerce spectral points to real, rejecting genuinely complex input."""
    x = np.asarray(x, dtype=complex)
    if np.any(np.abs(x.imag) > _REAL_IMAG_TOL * (1.0 + np.abs(x))):
        raise FilterEvaluationError(
            f"{name} filter is defined on the real line; "
            f"got eigenvalue with imaginary part {np.abs(x.imag).max():.3e}"
        )
    return x.real


@dataclass(frozen=True)
class Filter:
    """A scalar filter with an optional Lipschitz constant.

    ``variant`` is one of ``closed_form``, ``polynomial``, ``rational``,
    ``table``; ``params`` carries the family-specific data.  Built-in
    closed forms ship an analytic Lipschitz constant valid on the
    nonnegative half line where Laplacian spectra live.
    """

    variant: str
    name: str
    params: dict = field(default_factory=dict)
    lipschitz_constant: float | None = None
    scale: float = 1.0

    # -- constructors -------------------------------------------------

    @classmethod
    def identity(cls) -> "Filter":
        return cls("closed_form", "identity", {}, lipschitz_constant=0.0)

    @classmethod
    def heat(cls, t: float) -> "Filter":
        # |d/dx e^{-tx}| <= t on x >= 0
        return cls("closed_form", f"heat({t:g})", {"t": float(t)},
                   lipschitz_constant=float(t))

    @classmethod
    def lowpass(cls, c: float) -> "Filter":
        return cls("closed_form", f"lowpass({c:g})", {"c": float(c)},
                   lipschitz_constant=1.0 / float(c))

    @classmethod
    def highpass(cls, c: float) -> "Filter":
        return cls("closed_form", f"highpass({c:g})", {"c": float(c)},
                   lipschitz_constant=1.0 / float(c))

    @classmethod
    def midpass(cls, c: float, sigma: float) -> "Filter":
        # Gaussian bump; max slope of exp(-(x-c)^2 / (2 sigma^2)) is
        # exp(-1/2)/sigma, attained one sigma away from the centre.
        return cls("closed_form", f"midpass({c:g},{sigma:g})",
                   {"c": float(c), "sigma": float(sigma)},
                   lipschitz_constant=math.exp(-0.5) / float(sigma))

    @classmethod
    def polynomial(cls, coeffs, lipschitz_constant: float | None = None) -> "Filter":
        coeffs = tuple(float(c) for c in coeffs)
        return cls("polynomial", f"poly{coeffs}", {"coeffs": coeffs},
                   lipschitz_constant=lipschitz_constant)

    @classmethod
    def rational(cls, numerator, denominator,
                 lipschitz_constant: float | None = None) -> "Filter":
        num = tuple(float(c) for c in numerator)
        den = tuple(float(c) for c in denominator)
        if not any(den):
            raise SingularFilterError("rational filter denominator is zero")
        return cls("rational", f"rational({num},{den})",
                   {"numerator": num, "denominator": den},
                   lipschitz_constant=lipschitz_constant)

    @classmethod
    def from_table(cls, knots, values,
                   lipschitz_constant: float | None = None) -> "Filter":
        """Piecewise-linear filter through (lambda, g(lambda)) knots.

        Linear interpolation between knots, constant extrapolation beyond.
        """
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape or knots.size < 1:
            raise FilterEvaluationError("table filter needs matching 1-D knot arrays")
        order = np.argsort(knots)
        return cls("table", "table",
                   {"knots": tuple(knots[order]), "values": tuple(values[order])},
                   lipschitz_constant=lipschitz_constant)

    @classmethod
    def from_table_file(cls, path) -> "Filter":
        """Load a (lambda, g(lambda)) two-column text table; '#' comments."""
        knots, values = [], []
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise FilterEvaluationError(
                        f"{path}: line {lineno}: expected two columns, got {len(parts)}"
                    )
                try:
                    knots.append(float(parts[0]))
                    values.append(float(parts[1]))
                except ValueError as exc:
                    raise FilterEvaluationError(
                        f"{path}: line {lineno}: {exc}"
                    ) from None
        if not knots:
            raise FilterEvaluationError(f"{path}: empty filter table")
        return cls.from_table(knots, values)

    # -- evaluation ----------------------------------------------------

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        """Evaluate g at scalar(s) x; complex input allowed where g extends."""
        scalar = np.isscalar(x)
        x = np.atleast_1d(np.asarray(x))
        out = self._evaluate_raw(x) * self.scale
        return out[0] if scalar else out

    def _evaluate_raw(self, x: np.ndarray) -> np.ndarray:
        if self.variant == "closed_form":
            return self._evaluate_closed(x)
        if self.variant == "polynomial":
            return np.polynomial.polynomial.polyval(x, self.params["coeffs"])
        if self.variant == "rational":
            num = np.polynomial.polynomial.polyval(x, self.params["numerator"])
            den = np.polynomial.polynomial.polyval(x, self.params["denominator"])
            if np.any(np.abs(den) < 1e-14 * (1.0 + np.abs(num))):
                raise FilterEvaluationError(
                    "rational filter denominator vanishes on the spectrum"
                )
            return num / den
        if self.variant == "table":
            xr = _as_real(x, "table")
            return np.interp(xr, self.params["knots"], self.params["values"])
        raise FilterEvaluationError(f"unknown filter variant {self.variant!r}")

    def _evaluate_closed(self, x: np.ndarray) -> np.ndarray:
        base = self.name.split("(", 1)[0]
        if base == "identity":
            return np.ones(x.shape)
        if base == "heat":
            return np.exp(-self.params["t"] * x)
        xr = _as_real(x, base)
        if base == "lowpass":
            return np.maximum(0.0, 1.0 - xr / self.params["c"])
        if base == "highpass":
            return np.minimum(1.0, xr / self.params["c"])
        if base == "midpass":
            c, sigma = self.params["c"], self.params["sigma"]
            return np.exp(-((xr - c) ** 2) / (2.0 * sigma**2))
        raise FilterEvaluationError(f"unknown closed form {base!r}")

    # -- helpers --------------------------------------------------------

    def scaled(self, factor: float) -> "Filter":
        """Same filter multiplied by ``factor`` (Lipschitz constant scales)."""
        lip = None if self.lipschitz_constant is None else abs(factor) * self.lipschitz_constant
        return Filter(self.variant, self.name, self.params, lip,
                      self.scale * factor)

    def normalized_on(self, spectrum) -> tuple["Filter", float]:
        """Divide by the measured sup norm on ``spectrum``; returns (filter, factor).

        The returned factor is the measured max, meant to be folded into the
        channel mixing matrix so the network is unchanged.
        """
        sup = sup_norm_on_spectrum(self, spectrum)
        if sup == 0.0:
            raise FilterEvaluationError("cannot normalize a filter that vanishes on the spectrum")
        return self.scaled(1.0 / sup), sup

    def check_lipschitz_on(self, spectrum, rtol: float = 1e-9) -> None:
        """Verify the declared constant bounds all difference quotients."""
        if self.lipschitz_constant is None:
            return
        spectrum = np.asarray(spectrum)
        vals = self.evaluate(spectrum)
        for i in range(len(spectrum)):
            d = np.abs(spectrum - spectrum[i])
            keep = d > DEFAULT_EXCLUSION_TOL
            if not keep.any():
                continue
            q = np.abs(vals[keep] - vals[i]) / d[keep]
            if q.max() > self.lipschitz_constant * (1.0 + rtol) + 1e-12:
                raise FilterEvaluationError(
                    f"declared Lipschitz constant {self.lipschitz_constant:g} "
                    f"violated on the evaluated spectrum (quotient {q.max():g})"
                )


@dataclass(frozen=True)
class FilterConstants:
    """Per-eigenvalue quotient bounds and the sup norm over a spectrum."""

    vg_per_eig: np.ndarray
    sup_norm: float


def make_filter(descriptor: str) -> Filter:
    """Parse ``identity``, ``heat(t)``, ``lowpass(c)``, ``highpass(c)``,
    ``midpass(c,sigma)``, ``poly(c0,c1,...)``, ``table(path)``."""
    descriptor = descriptor.strip()
    if descriptor == "identity":
        return Filter.identity()
    if "(" not in descriptor or not descriptor.endswith(")"):
        raise FilterEvaluationError(f"cannot parse filter descriptor {descriptor!r}")
    base, arg_str = descriptor[:-1].split("(", 1)
    base = base.strip()
    if base == "table":
        return Filter.from_table_file(arg_str.strip())
    try:
        args = [float(a) for a in arg_str.split(",") if a.strip()]
    except ValueError:
        raise FilterEvaluationError(f"bad filter arguments in {descriptor!r}") from None
    makers = {
        "heat": Filter.heat,
        "lowpass": Filter.lowpass,
        "highpass": Filter.highpass,
        "midpass": Filter.midpass,
        "poly": Filter.polynomial,
    }
    if base not in makers:
        raise FilterEvaluationError(f"unknown filter family {base!r}")
    if base == "poly":
        return Filter.polynomial(args)
    return makers[base](*args)


def apply_exact(filter: Filter, eig: EigenDecomposition, signal: np.ndarray) -> np.ndarray:
    """Spectral synthesis ``sum_j g(lambda_j) P_j signal``."""
    signal = np.asarray(signal)
    if signal.shape[0] != eig.dim:
        raise FilterEvaluationError(
            f"signal dimension {signal.shape[0]} != operator dimension {eig.dim}"
        )
    values = filter.evaluate(eig.eigenvalues())
    out = np.zeros(signal.shape, dtype=np.result_type(signal.dtype, values.dtype,
                                                      eig.basis.dtype))
    for g, val in zip(eig.groups, values):
        out = out + val * (g.projection @ signal)
    return out


def filter_matrix(filter: Filter, eig: EigenDecomposition) -> np.ndarray:
    """Dense matrix of g(T)."""
    return eig.apply_function(filter.evaluate(eig.eigenvalues()))


def apply_rational(
    filter: Filter, op: OperatorWithInnerProduct, signal: np.ndarray
) -> np.ndarray:
    """Apply a rational filter through powers, sums, and one linear solve.

    Computes ``(sum_l c_l T^l)(sum_l d_l T^l)^{-1} signal`` without any
    eigendecomposition; agrees with :func:`apply_exact` to roundoff.
    """
    if filter.variant == "polynomial":
        num = filter.params["coeffs"]
        den = (1.0,)
    elif filter.variant == "rational":
        num = filter.params["numerator"]
        den = filter.params["denominator"]
    else:
        raise FilterEvaluationError("apply_rational needs a polynomial or rational filter")
    t = op.matrix
    num_mat = _matrix_polynomial(num, t)
    den_mat = _matrix_polynomial(den, t)
    cond = np.linalg.cond(den_mat)
    if not np.isfinite(cond) or cond > 1e10:
        raise SingularFilterError(
            f"denominator operator condition {cond:.3e} exceeds 1e10"
        )
    return filter.scale * (num_mat @ np.linalg.solve(den_mat, np.asarray(signal)))


def _matrix_polynomial(coeffs, t: np.ndarray) -> np.ndarray:
    # Horner evaluation on the matrix.
    n = t.shape[0]
    out = np.zeros_like(t, dtype=np.result_type(t.dtype, float))
    eye = np.eye(n, dtype=out.dtype)
    for c in reversed(coeffs):
        out = out @ t + c * eye
    return out


def chebyshev_coefficients(filter: Filter, degree: int, interval) -> np.ndarray:
    """Chebyshev interpolation coefficients of g on [a, b] at the Chebyshev
    points of the first kind (degree+1 nodes)."""
    a, b = float(interval[0]), float(interval[1])
    if not b > a:
        raise SpectralIntervalError(f"empty spectral interval [{a}, {b}]")

    def on_unit(x):
        return np.asarray(filter.evaluate(0.5 * (a + b) + 0.5 * (b - a) * x), dtype=float)

    return _cheb.chebinterpolate(on_unit, degree)


def apply_chebyshev(
    filter: Filter,
    op: OperatorWithInnerProduct,
    degree: int,
    interval=None,
    signal: np.ndarray = None,
) -> np.ndarray:
    """Apply the degree-k Chebyshev interpolant of g through the three-term
    recurrence on matrix-vector products.

    The operator spectrum must lie inside ``interval`` (checked to 1e-9);
    the operator-norm error is then bounded by the scalar sup-norm
    interpolation error of g on the interval.  When no interval is given,
    ``[min(0, lambda_min), lambda_max (1 + 1e-6)]`` is used, which for
    normalized Laplacians sits inside [0, 2].
    """
    if degree < 0:
        raise SpectralIntervalError("degree must be nonnegative")
    if interval is None:
        interval = default_spectral_interval(op)
    a, b = float(interval[0]), float(interval[1])
    _check_spectrum_in_interval(op, a, b)
    coeffs = chebyshev_coefficients(filter, degree, (a, b))
    t = op.matrix
    signal = np.asarray(signal, dtype=np.result_type(t.dtype, float))
    alpha = 2.0 / (b - a)
    beta = (a + b) / (b - a)

    def shifted(v):
        return alpha * (t @ v) - beta * v

    w_prev = signal
    out = coeffs[0] * w_prev
    if degree >= 1:
        w_curr = shifted(signal)
        out = out + coeffs[1] * w_curr
        for j in range(2, degree + 1):
            w_next = 2.0 * shifted(w_curr) - w_prev
            w_prev, w_curr = w_curr, w_next
            out = out + coeffs[j] * w_curr
    return out


def default_spectral_interval(op: OperatorWithInnerProduct) -> tuple:
    """Smallest zero-anchored interval safely containing the real spectrum."""
    vals = eigendecompose(op).eigenvalues_with_multiplicity()
    if np.any(np.abs(vals.imag) > 1e-9 * (1.0 + np.abs(vals))):
        raise SpectralIntervalError("spectrum is not real; no containing interval")
    lo = min(0.0, float(vals.real.min()))
    hi = max(0.0, float(vals.real.max()))
    return (lo - abs(lo) * 1e-6 - 1e-12, hi + abs(hi) * 1e-6 + 1e-12)


def _check_spectrum_in_interval(op: OperatorWithInnerProduct, a: float, b: float):
    vals = eigendecompose(op).eigenvalues_with_multiplicity()
    if np.any(np.abs(vals.imag) > 1e-9 * (1.0 + np.abs(vals))):
        raise SpectralIntervalError("spectrum is not real; no containing interval")
    lo, hi = vals.real.min(), vals.real.max()
    if lo < a - 1e-9 or hi > b + 1e-9:
        raise SpectralIntervalError(
            f"spectrum [{lo:g}, {hi:g}] escapes interval [{a:g}, {b:g}]"
        )


def chebyshev_sup_error(filter: Filter, degree: int, interval, n_grid: int = 4097) -> float:
    """Scalar sup-norm interpolation error of g on the interval (fine grid)."""
    a, b = float(interval[0]), float(interval[1])
    coeffs = chebyshev_coefficients(filter, degree, (a, b))
    xs = np.linspace(a, b, n_grid)
    unit = (2.0 * xs - (a + b)) / (b - a)
    approx = _cheb.chebval(unit, coeffs)
    exact = np.asarray(filter.evaluate(xs), dtype=float)
    return float(np.abs(exact - approx).max())


def max_difference_quotient(
    filter: Filter,
    lambda_m: float,
    target_spectrum,
    exclusion_tol: float = DEFAULT_EXCLUSION_TOL,
) -> float:
    """Largest |g(kappa) - g(lambda_m)| / |kappa - lambda_m| over the target
    spectrum, excluding points within ``exclusion_tol`` of lambda_m.

    This is the per-mode constant multiplying the Laplacian transfer error
    in the mode-wise bound; it never exceeds the filter's Lipschitz
    constant.  Returns 0 when every target eigenvalue is excluded.
    """
    target = np.asarray(target_spectrum)
    if target.size == 0:
        raise FilterEvaluationError("target spectrum is empty")
    dist = np.abs(target - lambda_m)
    keep = dist > exclusion_tol
    if not keep.any():
        return 0.0
    g_target = filter.evaluate(target[keep])
    g_source = filter.evaluate(lambda_m)
    return float((np.abs(g_target - g_source) / dist[keep]).max())


def sup_norm_on_spectrum(filter: Filter, eigenvalues) -> float:
    """``max_m |g(lambda_m)|`` over the evaluated eigenvalues."""
    vals = filter.evaluate(np.asarray(eigenvalues))
    return float(np.abs(vals).max()) if vals.size else 0.0


def filter_constants(
    filter: Filter, source_eigenvalues, target_spectrum
) -> FilterConstants:
    """Bundle the per-mode quotient bounds and the source-spectrum sup norm."""
    source = np.asarray(source_eigenvalues)
    vg = np.array(
        [max_difference_quotient(filter, lam, target_spectrum) for lam in source]
    )
    if filter.lipschitz_constant is not None and vg.size:
        worst = vg.max()
        if worst > filter.lipschitz_constant * (1.0 + 1e-9) + 1e-12:
            raise FilterEvaluationError(
                f"quotient {worst:g} exceeds declared Lipschitz constant "
                f"{filter.lipschitz_constant:g}"
            )
    return FilterConstants(vg_per_eig=vg, sup_norm=sup_norm_on_spectrum(filter, source))
