"""Hyperbolic maps of the two-torus, weights and periodic orbits.

A map has the form ``T(x) = A x + eps * h(x) mod 1`` where ``A`` is a
unimodular hyperbolic integer matrix and ``h`` is a finite trigonometric
sum ``h(x) = sum_j Re(c_j exp(2 pi i m_j . x))`` with ``c_j`` complex
2-vectors and ``m_j`` integer frequency pairs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * np.pi


class ConvergenceError(RuntimeError):
    """Raised when a Newton iteration fails to reach its tolerance."""


@dataclass(frozen=True)
class TrigTerm:
    """One term ``Re(coeff * exp(2 pi i freq . x))`` of a vector perturbation."""

    freq: tuple[int, int]
    coeff: tuple[complex, complex]

    def __post_init__(self):
        object.__setattr__(self, "freq", (int(self.freq[0]), int(self.freq[1])))
        object.__setattr__(self, "coeff", (complex(self.coeff[0]), complex(self.coeff[1])))


@dataclass(frozen=True)
class TorusMap:
    """Perturbed linear hyperbolic map of the torus.

    Attributes:
        linear_part: integer matrix ``A`` stored as nested tuples.
        epsilon: perturbation amplitude.
        terms: trigonometric terms of ``h``.
        smoothness_r: declared regularity used for parameter windows.
    """

    linear_part: tuple[tuple[int, int], tuple[int, int]] = ((2, 1), (1, 1))
    epsilon: float = 0.0
    terms: tuple[TrigTerm, ...] = ()
    smoothness_r: float = math.inf

    def __post_init__(self):
        A = tuple(tuple(int(v) for v in row) for row in self.linear_part)
        object.__setattr__(self, "linear_part", A)
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "smoothness_r", float(self.smoothness_r))
        det = A[0][0] * A[1][1] - A[0][1] * A[1][0]
        if abs(det) != 1:
            raise ValueError(f"linear part must be unimodular, got det={det}")
        tr = A[0][0] + A[1][1]
        if det == 1 and abs(tr) <= 2 or det == -1 and tr == 0:
            raise ValueError(f"linear part is not hyperbolic (trace={tr}, det={det})")
        if self.epsilon < 0:
            raise ValueError("perturbation amplitude must be non-negative")
        if self.smoothness_r <= 1:
            raise ValueError("smoothness_r must exceed 1")

    @property
    def A(self) -> np.ndarray:
        return np.array(self.linear_part, dtype=float)

    @property
    def A_int(self) -> np.ndarray:
        return np.array(self.linear_part, dtype=np.int64)

    @property
    def is_linear(self) -> bool:
        return self.epsilon == 0.0 or not self.terms

    def eigen_data(self):
        """Return ``(lambda_u, lambda_s, v_u, v_s)`` of the linear part."""
        w, V = np.linalg.eig(self.A)
        order = np.argsort(-np.abs(w))
        w, V = w[order].real, V[:, order].real
        vu = V[:, 0] / np.linalg.norm(V[:, 0])
        vs = V[:, 1] / np.linalg.norm(V[:, 1])
        if vu[0] < 0:
            vu = -vu
        if vs[0] < 0:
            vs = -vs
        return abs(w[0]), abs(w[1]), vu, vs

    def with_epsilon(self, epsilon: float) -> "TorusMap":
        return TorusMap(self.linear_part, epsilon, self.terms, self.smoothness_r)

    def perturbation_bandwidth(self) -> int:
        if not self.terms:
            return 0
        return max(max(abs(t.freq[0]), abs(t.freq[1])) for t in self.terms)

    def perturbation_size(self) -> float:
        """Sum of coefficient magnitudes, a crude sup-norm bound of ``h``."""
        return float(sum(max(abs(t.coeff[0]), abs(t.coeff[1])) for t in self.terms))


def cat_map(smoothness_r: float = math.inf) -> TorusMap:
    return TorusMap(((2, 1), (1, 1)), 0.0, (), smoothness_r)


def perturbed_cat_map(epsilon: float, terms: Sequence[TrigTerm] | None = None,
                      smoothness_r: float = math.inf) -> TorusMap:
    """Cat map plus ``epsilon * h``; default ``h(x) = (sin 2 pi x2, 0)``."""
    if terms is None:
        terms = (TrigTerm((0, 1), (-1j, 0.0)),)
    return TorusMap(((2, 1), (1, 1)), epsilon, tuple(terms), smoothness_r)


def _perturbation(tmap: TorusMap, x: np.ndarray):
    """Values and derivatives of ``h`` at points ``x`` of shape (..., 2)."""
    h = np.zeros(x.shape, dtype=float)
    dh = np.zeros(x.shape + (2,), dtype=float)
    for term in tmap.terms:
        m = np.array(term.freq, dtype=float)
        c = np.array(term.coeff, dtype=complex)
        e = np.exp(1j * TWO_PI * (x @ m))
        ce = e[..., None] * c
        h += ce.real
        dh += (1j * TWO_PI * ce[..., :, None] * m).real
    return h, dh


def lift(tmap: TorusMap, x) -> np.ndarray:
    """The map on the universal cover: ``A x + eps h(x)`` without reduction."""
    x = np.asarray(x, dtype=float)
    y = x @ tmap.A.T
    if not tmap.is_linear:
        y = y + tmap.epsilon * _perturbation(tmap, x)[0]
    return y


def evaluate(tmap: TorusMap, x) -> np.ndarray:
    """Apply ``T`` to a point or an array of points of shape (..., 2)."""
    return np.mod(lift(tmap, x), 1.0)


def jacobian(tmap: TorusMap, x) -> np.ndarray:
    """``DT_x = A + eps Dh(x)``, shape (..., 2, 2)."""
    x = np.asarray(x, dtype=float)
    J = np.broadcast_to(tmap.A, x.shape[:-1] + (2, 2)).copy()
    if not tmap.is_linear:
        J += tmap.epsilon * _perturbation(tmap, x)[1]
    return J


def jacobian_determinant(tmap: TorusMap, x) -> np.ndarray:
    J = jacobian(tmap, x)
    return J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]


def min_jacobian_determinant(tmap: TorusMap, grid: int = 64) -> float:
    """Smallest ``|det DT|`` over a uniform grid, the diffeomorphism check."""
    u = np.arange(grid) / grid
    X = np.stack(np.meshgrid(u, u, indexing="ij"), axis=-1)
    return float(np.min(np.abs(jacobian_determinant(tmap, X))))


def inverse_point(tmap: TorusMap, y, tol: float = 1e-13, max_iter: int = 50) -> np.ndarray:
    """Solve ``T(x) = y mod 1`` by Newton's method seeded at ``A^{-1} y``.

    Works on a single point or on an array of shape (..., 2).

    Raises:
        ConvergenceError: if some point does not converge.
    """
    y = np.asarray(y, dtype=float)
    Ainv = np.linalg.inv(tmap.A)
    x = y @ Ainv.T
    if tmap.is_linear:
        return np.mod(x, 1.0)
    for _ in range(max_iter):
        r = lift(tmap, x) - y
        J = jacobian(tmap, x)
        dx = np.linalg.solve(J, r[..., None])[..., 0]
        x = x - dx
        if np.all(np.abs(dx) < tol) and np.all(np.isfinite(x)):
            r = lift(tmap, x) - y
            if np.max(np.abs(r)) < max(tol, 1e-12) * 10:
                return np.mod(x, 1.0)
    bad = int(np.sum(np.max(np.abs(lift(tmap, x) - y), axis=-1) > tol * 10))
    raise ConvergenceError(
        f"inverse_point did not converge for {bad} point(s); epsilon={tmap.epsilon} may be too large")


def _scalar_step(tmap: TorusMap, x1: float, x2: float):
    """Map value (mod 1) and Jacobian entries at a single point, in plain floats."""
    A = tmap.linear_part
    y1 = A[0][0] * x1 + A[0][1] * x2
    y2 = A[1][0] * x1 + A[1][1] * x2
    j11, j12, j21, j22 = float(A[0][0]), float(A[0][1]), float(A[1][0]), float(A[1][1])
    eps = tmap.epsilon
    if eps and tmap.terms:
        for term in tmap.terms:
            m1, m2 = term.freq
            ph = 2.0 * math.pi * (m1 * x1 + m2 * x2)
            cs, sn = math.cos(ph), math.sin(ph)
            c1, c2 = term.coeff
            # Re(c e^{i ph}) and its derivative Re(i c e^{i ph}) * 2 pi m
            y1 += eps * (c1.real * cs - c1.imag * sn)
            y2 += eps * (c2.real * cs - c2.imag * sn)
            d1 = -(c1.real * sn + c1.imag * cs) * 2.0 * math.pi * eps
            d2 = -(c2.real * sn + c2.imag * cs) * 2.0 * math.pi * eps
            j11 += d1 * m1
            j12 += d1 * m2
            j21 += d2 * m1
            j22 += d2 * m2
    return y1 % 1.0, y2 % 1.0, j11, j12, j21, j22


def lyapunov_exponents(tmap: TorusMap, n_iter: int, seed=None, transient: int = 200):
    """Lyapunov exponents ``(chi_u, chi_s)`` from the QR cocycle along one orbit.

    In two dimensions the QR step only needs the first column: ``R_11`` is
    the stretch of the tracked direction and ``R_22 = |det J| / R_11``.
    A transient of ``transient`` steps aligns the tracked direction before
    averaging starts.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    rng = np.random.default_rng(seed)
    x1, x2 = (float(v) for v in rng.random(2))
    q1, q2 = (float(v) for v in rng.normal(size=2))
    nq = math.hypot(q1, q2)
    q1, q2 = q1 / nq, q2 / nq
    sum_u = 0.0
    sum_det = 0.0
    for it in range(transient + n_iter):
        y1, y2, j11, j12, j21, j22 = _scalar_step(tmap, x1, x2)
        v1 = j11 * q1 + j12 * q2
        v2 = j21 * q1 + j22 * q2
        r11 = math.hypot(v1, v2)
        q1, q2 = v1 / r11, v2 / r11
        if it >= transient:
            sum_u += math.log(r11)
            sum_det += math.log(abs(j11 * j22 - j12 * j21))
        x1, x2 = y1, y2
    chi_u = sum_u / n_iter
    chi_s = sum_det / n_iter - chi_u
    return chi_u, chi_s


@dataclass(frozen=True)
class Weight:
    """Weight ``g`` of a transfer operator.

    ``kind`` is ``"reciprocal-jacobian"`` (``1/|det DT|``), ``"constant"``
    (``value``) or ``"trig-series"`` (``sum_j c_j exp(2 pi i m_j . x)``
    with ``terms`` a tuple of ``((m1, m2), c)`` pairs).  Every kind is
    multiplied by ``scale``.
    """

    kind: str = "reciprocal-jacobian"
    value: complex = 1.0
    terms: tuple = ()
    scale: complex = 1.0

    def __post_init__(self):
        if self.kind not in ("reciprocal-jacobian", "constant", "trig-series"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        object.__setattr__(self, "terms", tuple(((int(m[0]), int(m[1])), complex(c))
                                                for m, c in self.terms))
        object.__setattr__(self, "value", _real_if_possible(self.value))
        object.__setattr__(self, "scale", _real_if_possible(self.scale))

    def evaluate(self, tmap: TorusMap, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "reciprocal-jacobian":
            out = 1.0 / np.abs(jacobian_determinant(tmap, x))
        elif self.kind == "constant":
            out = np.full(x.shape[:-1], self.value)
        else:
            out = np.zeros(x.shape[:-1], dtype=complex)
            for m, c in self.terms:
                out += c * np.exp(1j * TWO_PI * (x @ np.array(m, dtype=float)))
        return out * self.scale if self.scale != 1.0 else out

    def is_constant_on(self, tmap: TorusMap) -> bool:
        """True when ``g`` is constant for this map (constant kind or linear map)."""
        if self.kind == "constant":
            return True
        if self.kind == "reciprocal-jacobian":
            return tmap.is_linear
        return all(m == (0, 0) for m, _ in self.terms)

    def constant_value(self, tmap: TorusMap) -> complex:
        if self.kind == "constant":
            base = self.value
        elif self.kind == "reciprocal-jacobian":
            base = 1.0 / abs(round(np.linalg.det(tmap.A)))
        else:
            base = sum(c for _, c in self.terms)
        return base * self.scale

    def scaled(self, c: complex) -> "Weight":
        return Weight(self.kind, self.value, self.terms, self.scale * c)


def _real_if_possible(v) -> complex | float:
    v = complex(v)
    return v.real if v.imag == 0 else v


@dataclass
class PeriodicOrbitTable:
    """All period-``n`` points of a map together with per-point orbit data.

    ``det_terms`` holds ``|det(I - DT_x^{-n})|``; ``weight_products`` is
    filled by :meth:`with_weight`.  ``failed`` lists ancestors whose
    continuation diverged.
    """

    n: int
    points: np.ndarray
    stability: np.ndarray
    det_terms: np.ndarray
    lifts: np.ndarray
    ancestors: np.ndarray | None = None
    weight_products: np.ndarray | None = None
    failed: list = field(default_factory=list)
    expected_count: int | None = None

    def __len__(self):
        return len(self.points)

    @property
    def complete(self) -> bool:
        return not self.failed and (self.expected_count is None
                                    or len(self.points) == self.expected_count)

    def with_weight(self, tmap: TorusMap, weight: Weight) -> "PeriodicOrbitTable":
        """Attach ``prod_{k<n} g(T^k x)`` for every point."""
        prod = np.ones(len(self.points), dtype=complex)
        x = self.points.copy()
        for _ in range(self.n):
            prod *= weight.evaluate(tmap, x)
            x = evaluate(tmap, x)
        if np.all(prod.imag == 0):
            prod = prod.real
        self.weight_products = prod
        return self

    def to_csv(self, path) -> None:
        wp = self.weight_products
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "x1", "x2", "weight_product", "det_term"])
            for i, (p, d) in enumerate(zip(self.points, self.det_terms)):
                val = "" if wp is None else repr(complex(wp[i]).real if np.isrealobj(wp) else complex(wp[i]))
                w.writerow([self.n, repr(float(p[0])), repr(float(p[1])), val, repr(float(d))])


def _int_matrix_power(A: Sequence[Sequence[int]], n: int):
    a, b, c, d = A[0][0], A[0][1], A[1][0], A[1][1]
    r = (1, 0, 0, 1)
    for _ in range(n):
        r = (r[0] * a + r[1] * c, r[0] * b + r[1] * d, r[2] * a + r[3] * c, r[2] * b + r[3] * d)
    return ((r[0], r[1]), (r[2], r[3]))


def periodic_point_count(tmap: TorusMap, n: int) -> int:
    """``|det(A^n - I)|``, the number of period-n points of the linear part."""
    P = _int_matrix_power(tmap.linear_part, n)
    return abs((P[0][0] - 1) * (P[1][1] - 1) - P[0][1] * P[1][0])


def _coset_representatives(B):
    """Representatives of ``Z^2 / B Z^2`` via a lower-triangular Hermite form."""
    (b11, b12), (b21, b22) = B
    g, u, v = _egcd(b11, b12)
    if g == 0:
        raise ValueError("singular lattice")
    # (b11, b12) @ [[u, -b12/g], [v, b11/g]] = (g, 0)
    U = ((u, -b12 // g), (v, b11 // g))
    h11 = b11 * U[0][0] + b12 * U[1][0]
    h22 = b21 * U[0][1] + b22 * U[1][1]
    h11, h22 = abs(h11), abs(h22)
    i, j = np.meshgrid(np.arange(h11, dtype=np.int64), np.arange(h22, dtype=np.int64), indexing="ij")
    return np.stack([i.ravel(), j.ravel()], axis=1)


def _egcd(a: int, b: int):
    """Return ``(g, u, v)`` with ``u a + v b = g = gcd(a, b) >= 0``."""
    old_r, r, old_s, s, old_t, t = a, b, 1, 0, 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def _det_terms(stab: np.ndarray, extended: bool) -> np.ndarray:
    """``|det(I - M^{-1})| = |det(M - I)| / |det M|`` for 2x2 stability matrices."""
    M = stab.astype(np.longdouble) if extended else stab
    det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
    tr = M[:, 0, 0] + M[:, 1, 1]
    det_m_minus_i = det - tr + 1
    return np.abs(det_m_minus_i / det).astype(float)


def _linear_periodic_points(tmap: TorusMap, n: int):
    P = _int_matrix_power(tmap.linear_part, n)
    B = ((P[0][0] - 1, P[0][1]), (P[1][0], P[1][1] - 1))
    D = B[0][0] * B[1][1] - B[0][1] * B[1][0]
    adj = np.array([[B[1][1], -B[0][1]], [-B[1][0], B[0][0]]], dtype=object)
    reps = _coset_representatives(B).astype(object)
    num = reps @ adj.T
    if D < 0:
        num, D = -num, -D
    num = np.mod(num, D)
    points = (num.astype(np.float64) / float(D)) if D < 2 ** 52 else np.array(
        [[float(Fraction(int(a), D)), float(Fraction(int(b), D))] for a, b in num])
    Bo = np.array(B, dtype=object)
    lifts_num = num @ Bo.T
    lifts = np.array([[int(a) // D, int(b) // D] for a, b in lifts_num], dtype=np.int64) \
        if len(num) else np.zeros((0, 2), dtype=np.int64)
    return points.reshape(-1, 2), lifts, np.array(P, dtype=float), num, D


def _linear_orbits(tmap: TorusMap, num, D: int, n: int):
    """Exact orbits ``x_k = A^k x_0 mod 1`` of rational points ``num / D``.

    Returns ``(X, M)`` of shape ``(P, n, 2)`` with integer jumps
    ``M[:, k] = A x_k - x_{k+1}``.
    """
    A = np.array(tmap.linear_part, dtype=object)
    cur = np.asarray(num, dtype=object).reshape(-1, 2)
    X = np.zeros((len(cur), n, 2))
    M = np.zeros((len(cur), n, 2), dtype=np.int64)
    for k in range(n):
        X[:, k] = np.array([[float(Fraction(int(a), D)), float(Fraction(int(b), D))] for a, b in cur]) \
            if len(cur) else X[:, k]
        img = cur @ A.T
        nxt = np.mod(img, D)
        M[:, k] = ((img - nxt) // D).astype(np.int64)
        cur = nxt
    return X, M


def _newton_shooting(tmap, X, M, tol, max_iter):
    """Multiple-shooting Newton on ``T~(x_k) - m_k - x_{k+1} = 0`` (indices mod ``n``).

    The block-cyclic Jacobian stays well conditioned for hyperbolic maps,
    unlike single shooting on ``T^n`` whose basin shrinks like ``lambda_u^-n``.
    Returns ``(X, converged mask)``.
    """
    P, n, _ = X.shape
    X = X.copy()
    eye = np.eye(2)
    conv = np.zeros(P, dtype=bool)
    for _ in range(max_iter + 1):
        flat = X.reshape(-1, 2)
        R = lift(tmap, flat).reshape(P, n, 2) - M - np.roll(X, -1, axis=1)
        conv = np.max(np.abs(R), axis=(1, 2)) < tol
        todo = np.flatnonzero(~conv)
        if len(todo) == 0:
            break
        J = jacobian(tmap, X[todo].reshape(-1, 2)).reshape(len(todo), n, 2, 2)
        G = np.zeros((len(todo), 2 * n, 2 * n))
        for k in range(n):
            j = (k + 1) % n
            G[:, 2 * k:2 * k + 2, 2 * k:2 * k + 2] += J[:, k]
            G[:, 2 * k:2 * k + 2, 2 * j:2 * j + 2] -= eye
        try:
            dx = np.linalg.solve(G, -R[todo].reshape(len(todo), 2 * n, 1))[..., 0]
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular multiple-shooting matrix") from exc
        X[todo] += dx.reshape(len(todo), n, 2)
        bad = ~np.all(np.isfinite(X), axis=(1, 2))
        X[bad] = np.nan
    return X, conv & np.all(np.isfinite(X), axis=(1, 2))


def _orbit_lift(tmap: TorusMap, x: np.ndarray, n: int, with_jac: bool = True):
    """Iterate the lift ``n`` times carrying integer parts separately.

    Returns ``(frac, whole, J)`` with ``T~^n(x) = frac + whole`` and ``J``
    the derivative of ``T^n`` at ``x``.
    """
    whole = np.floor(x)
    u = x - whole
    whole = whole.astype(np.int64)
    Aint = tmap.A_int
    J = np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)).copy() if with_jac else None
    for _ in range(n):
        if with_jac:
            J = jacobian(tmap, u) @ J
        y = lift(tmap, u)
        fl = np.floor(y)
        u = y - fl
        whole = whole @ Aint.T + fl.astype(np.int64)
    return u, whole, J


def _newton_periodic(tmap, x, m, n, tol, max_iter):
    """Newton on ``T~^n(x) - x - m = 0``; returns (x, converged mask, iterations)."""
    x = np.array(x, dtype=float, copy=True)
    conv = np.zeros(len(x), dtype=bool)
    its = 0
    for its in range(1, max_iter + 1):
        u, whole, J = _orbit_lift(tmap, x, n)
        r = (u - x) + (whole - m).astype(float)
        res = np.max(np.abs(r), axis=1)
        conv = res < tol
        if np.all(conv):
            return x, conv, its - 1
        G = J - np.eye(2)
        try:
            dx = np.linalg.solve(G, r[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular Newton matrix DT^n - I") from exc
        x = x - np.where(conv[:, None], 0.0, dx)
        if not np.all(np.isfinite(x)):
            break
    u, whole, _ = _orbit_lift(tmap, x, n, with_jac=False)
    r = (u - x) + (whole - m).astype(float)
    conv = np.max(np.abs(r), axis=1) < tol
    return x, conv, its


def enumerate_periodic_points(tmap: TorusMap, n: int, tol: float = 1e-12,
                              continuation_steps: int | None = None) -> PeriodicOrbitTable:
    """All points with ``T^n x = x``.

    For the linear part the points are the exact solutions of
    ``(A^n - I) x in Z^2``; for ``eps > 0`` each is continued by Newton's
    method on the lift, stepping ``eps`` up from zero.
    """
    if n < 1:
        raise ValueError("period must be positive")
    x0, m, P, num, D = _linear_periodic_points(tmap, n)
    expected = len(x0)
    extended = n >= 8
    if tmap.is_linear:
        stab = np.broadcast_to(P, (expected, 2, 2)).copy()
        return PeriodicOrbitTable(n, x0, stab, _det_terms(stab, extended), m, x0.copy(),
                                  expected_count=expected)
    steps = continuation_steps or max(1, int(math.ceil(tmap.epsilon / 0.01)))
    X, M = _linear_orbits(tmap, num, D, n)
    alive = np.ones(expected, dtype=bool)
    for j in range(1, steps + 1):
        sub = tmap.with_epsilon(tmap.epsilon * j / steps)
        Xi, conv = _newton_shooting(sub, X[alive], M[alive], tol, 40)
        X[alive] = Xi
        idx = np.flatnonzero(alive)
        alive[idx[~conv]] = False
    failed = [tuple(p) for p in x0[~alive]]
    xs, ms, anc = X[alive, 0], m[alive], x0[alive]
    _, _, J = _orbit_lift(tmap, xs, n)
    points = np.mod(xs, 1.0)
    if extended:
        J = _stability_extended(tmap, points, n)
    table = PeriodicOrbitTable(n, points, np.asarray(J, dtype=float), _det_terms(J, extended),
                               ms, anc, failed=failed, expected_count=expected)
    if len(points) > 1:
        q = np.round(points * 1e9).astype(np.int64) % 1_000_000_000
        if len(np.unique(q, axis=0)) < len(points):
            table.failed.append("duplicate points after continuation")
    return table


def _stability_extended(tmap: TorusMap, points: np.ndarray, n: int) -> np.ndarray:
    """Product of Jacobians along orbits accumulated in extended precision."""
    J = np.broadcast_to(np.eye(2, dtype=np.longdouble), (len(points), 2, 2)).copy()
    x = points.copy()
    for _ in range(n):
        Jk = jacobian(tmap, x).astype(np.longdouble)
        J = np.einsum("pij,pjk->pik", Jk, J)
        x = evaluate(tmap, x)
    return J


def refine_orbit(tmap: TorusMap, x0, n: int, tol: float = 1e-12, max_iter: int = 8):
    """Refine a period-``n`` seed by Newton's method on the lift.

    Returns ``(x, iterations, residual)``.

    Raises:
        ConvergenceError: if the residual does not drop below ``tol``.
    """
    x = np.asarray(x0, dtype=float).reshape(1, 2)
    u, whole, _ = _orbit_lift(tmap, x, n, with_jac=False)
    m = np.rint(u + whole - x).astype(np.int64)
    x, conv, its = _newton_periodic(tmap, x, m, n, tol, max_iter)
    u, whole, _ = _orbit_lift(tmap, x, n, with_jac=False)
    res = float(np.max(np.abs(u + whole - x - m)))
    if not conv[0] or not np.isfinite(res):
        raise ConvergenceError(f"refine_orbit diverged (residual {res:.3e} after {its} iterations)")
    return np.mod(x[0], 1.0), its, res
