"""Periodic fields in Fourier form, dyadic filter banks and frequency cones.

Frequencies are integer lattice vectors ``k``; a field is
``phi(x) = sum_k c_k exp(2 pi i k . x)`` on the unit torus and the dyadic
symbols are functions of ``|k|``.  Coefficient arrays use numpy FFT order
along both axes (axis 0 is ``k1``, axis 1 is ``k2``).
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


def wavenumbers(N: int) -> np.ndarray:
    """Integer frequencies ``0..N/2-1, -N/2..-1`` in FFT order."""
    return np.fft.fftfreq(N, 1.0 / N).round().astype(np.int64)


def frequency_grid(N: int):
    k = wavenumbers(N)
    return np.meshgrid(k, k, indexing="ij")


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


# -- smooth cutoff -----------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _bump(v):
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    inside = (v > 0) & (v < 1)
    w = v[inside]
    out[inside] = np.exp(-1.0 / (w * (1.0 - w)))
    return out


def _bump_integral(u):
    """``int_0^u exp(-1/(v(1-v))) dv`` for ``u`` in [0, 1/2] by 64-point Gauss-Legendre."""
    u = np.asarray(u, dtype=float)
    v = 0.5 * u[..., None] * (_GL_NODES + 1.0)
    return 0.5 * u * np.sum(_GL_WEIGHTS * _bump(v), axis=-1)


_BUMP_TOTAL = 2.0 * float(_bump_integral(np.array(0.5)))


@dataclass(frozen=True)
class ChiProfile:
    """Smooth cutoff ``chi`` with ``chi = 1`` on ``[0, 1]`` and ``0`` on ``[2, inf)``.

    ``kind="bump"`` integrates the bump ``exp(-1/(v(1-v)))`` across the
    transition; ``kind="ratio"`` uses ``f(2-x) / (f(2-x) + f(x-1))`` with
    ``f(u) = exp(-1/u)``.  Both are C-infinity and flat at the endpoints.
    """

    kind: str = "bump"

    def __post_init__(self):
        if self.kind not in ("bump", "ratio"):
            raise ValueError(f"unknown chi profile {self.kind!r}")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.where(x <= 1.0, 1.0, 0.0)
        mid = (x > 1.0) & (x < 2.0)
        if not np.any(mid):
            return out
        u = x[mid] - 1.0
        if self.kind == "bump":
            lo = u <= 0.5
            b = np.empty_like(u)
            b[lo] = _bump_integral(u[lo])
            b[~lo] = _BUMP_TOTAL - _bump_integral(1.0 - u[~lo])
            out[mid] = 1.0 - b / _BUMP_TOTAL
        else:
            fa = np.exp(-1.0 / (1.0 - u))
            fb = np.exp(-1.0 / u)
            out[mid] = fa / (fa + fb)
        return out

    def step(self, v) -> np.ndarray:
        """Smooth step rising from 0 at ``v <= 0`` to 1 at ``v >= 1``."""
        return 1.0 - self(1.0 + np.asarray(v, dtype=float))


def _chi_radial(chi: ChiProfile, r2: np.ndarray, scale: float) -> np.ndarray:
    """``chi(sqrt(r2) * scale)`` evaluated once per distinct squared radius."""
    flat = np.asarray(r2).ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    vals = chi(np.sqrt(uniq.astype(float)) * scale)
    return vals[inv].reshape(np.shape(r2))


# -- fields ------------------------------------------------------------------

@dataclass
class FourierField:
    """Trigonometric polynomial on the torus with frequencies in ``[-N/2, N/2)^2``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or not is_power_of_two(c.shape[0]):
            raise ValueError(f"coefficients must be an N x N array with N a power of two, got {c.shape}")
        self.coeffs = c

    @property
    def N(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def zeros(cls, N: int) -> "FourierField":
        return cls(np.zeros((N, N), dtype=complex))

    @classmethod
    def from_samples(cls, samples) -> "FourierField":
        """Field whose values at ``(i/N, j/N)`` are ``samples[i, j]``."""
        s = np.asarray(samples)
        return cls(np.fft.fft2(s) / s.size)

    @classmethod
    def from_function(cls, func, N: int) -> "FourierField":
        u = np.arange(N) / N
        X1, X2 = np.meshgrid(u, u, indexing="ij")
        return cls.from_samples(func(X1, X2))

    @classmethod
    def mode(cls, N: int, k, amplitude: complex = 1.0) -> "FourierField":
        """Pure mode ``amplitude * exp(2 pi i k . x)``."""
        k1, k2 = int(k[0]), int(k[1])
        if not (-N // 2 <= k1 < N // 2 and -N // 2 <= k2 < N // 2):
            raise ValueError(f"mode {k} outside the resolved box of N={N}")
        c = np.zeros((N, N), dtype=complex)
        c[k1 % N, k2 % N] = amplitude
        return cls(c)

    @classmethod
    def from_modes(cls, N: int, modes, values) -> "FourierField":
        c = np.zeros((N, N), dtype=complex)
        for (k1, k2), v in zip(modes, values):
            c[int(k1) % N, int(k2) % N] += v
        return cls(c)

    def samples(self, oversample: int = 1) -> np.ndarray:
        """Values on the uniform grid of size ``oversample * N`` per axis."""
        if oversample == 1:
            return np.fft.ifft2(self.coeffs) * self.coeffs.size
        return self.resample(self.N * oversample).samples()

    def resample(self, M: int) -> "FourierField":
        """Zero-pad or truncate the coefficient box to resolution ``M``."""
        if not is_power_of_two(M):
            raise ValueError("resolution must be a power of two")
        if M == self.N:
            return FourierField(self.coeffs.copy())
        out = np.zeros((M, M), dtype=complex)
        h = min(M, self.N) // 2
        idx = np.r_[0:h, -h:0]
        src = self.coeffs if M > self.N else self.coeffs
        out[np.ix_(idx % M, idx % M)] = src[np.ix_(idx % self.N, idx % self.N)]
        return FourierField(out)

    def centered(self) -> np.ndarray:
        """Coefficients reordered so that index ``(0, 0)`` is ``k = (-N/2, -N/2)``."""
        return np.fft.fftshift(self.coeffs)

    def translate(self, v) -> "FourierField":
        """The field ``x -> phi(x - v)``."""
        K1, K2 = frequency_grid(self.N)
        return FourierField(self.coeffs * np.exp(-1j * TWO_PI * (K1 * v[0] + K2 * v[1])))

    def support(self, tol: float = 0.0):
        """Nonzero modes as ``(modes (P, 2), values (P,))``."""
        i, j = np.nonzero(np.abs(self.coeffs) > tol)
        k = wavenumbers(self.N)
        return np.stack([k[i], k[j]], axis=1), self.coeffs[i, j]

    def evaluate(self, points) -> np.ndarray:
        """Trigonometric interpolation at arbitrary points of shape (P, 2)."""
        return evaluate_series(self, points)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def lp_norm(self, p: float, oversample: int = 2) -> float:
        """``L_p`` norm on the unit torus; exact for ``p = 2``, grid quadrature otherwise."""
        if p == 2:
            return self.l2_norm()
        vals = np.abs(self.samples(oversample))
        if math.isinf(p):
            return float(vals.max())
        return float(np.mean(vals ** p) ** (1.0 / p))

    def is_conjugate_symmetric(self, tol: float = 1e-12) -> bool:
        N = self.N
        idx = (-np.arange(N)) % N
        mirror = np.conj(self.coeffs[np.ix_(idx, idx)])
        return bool(np.max(np.abs(self.coeffs - mirror)) <= tol * max(1.0, np.max(np.abs(self.coeffs))))

    def __add__(self, other: "FourierField") -> "FourierField":
        _check_same(self, other)
        return FourierField(self.coeffs + other.coeffs)

    def __sub__(self, other: "FourierField") -> "FourierField":
        _check_same(self, other)
        return FourierField(self.coeffs - other.coeffs)

    def __mul__(self, c) -> "FourierField":
        return FourierField(self.coeffs * c)

    __rmul__ = __mul__

    def to_binary(self, path, layout: str = "fft") -> None:
        write_field_binary(self, path, layout)

    def to_csv(self, path) -> None:
        write_field_csv(self, path)


def _check_same(a: FourierField, b: FourierField) -> None:
    if a.N != b.N:
        raise ValueError(f"resolution mismatch: {a.N} vs {b.N}")


def evaluate_series(field: FourierField, points, chunk: int = 4096) -> np.ndarray:
    """Evaluate ``sum_k c_k exp(2 pi i k . x)`` at points of shape (P, 2).

    Sparse fields are summed mode by mode; dense fields use the separable
    form ``sum_k1 e(k1 x1) sum_k2 c e(k2 x2)`` in chunks of points.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    modes, vals = field.support()
    out = np.empty(len(pts), dtype=complex)
    N = field.N
    if len(vals) == 0:
        out[:] = 0.0
        return out
    if len(vals) <= 4 * N:
        for s in range(0, len(pts), chunk):
            p = pts[s:s + chunk]
            ph = TWO_PI * (p @ modes.T.astype(float))
            out[s:s + chunk] = np.exp(1j * ph) @ vals
        return out
    # only the bounding box of the support contributes
    b1 = int(np.max(np.abs(modes[:, 0])))
    b2 = int(np.max(np.abs(modes[:, 1])))
    i1 = np.arange(-b1, b1 + 1)
    i2 = np.arange(-b2, b2 + 1)
    i1, i2 = i1[i1 >= -N // 2], i2[i2 >= -N // 2]
    C = field.coeffs[np.ix_(i1 % N, i2 % N)]
    k1, k2 = i1.astype(float), i2.astype(float)
    for s in range(0, len(pts), chunk):
        p = pts[s:s + chunk]
        E1 = np.exp(1j * TWO_PI * np.outer(p[:, 0], k1))
        E2 = np.exp(1j * TWO_PI * np.outer(p[:, 1], k2))
        out[s:s + chunk] = np.einsum("pj,pj->p", E1 @ C, E2)
    return out


@dataclass
class SparseField:
    """Finitely many modes ``sum_j v_j exp(2 pi i k_j . x)`` without a dense box.

    ``N`` is the nominal resolution that fixes the dyadic bank; modes may
    lie outside ``[-N/2, N/2)^2`` as long as ``N`` is large enough for the
    levels that are needed.
    """

    N: int
    modes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=np.int64).reshape(-1, 2)
        self.values = np.asarray(self.values, dtype=complex).reshape(-1)
        if len(self.modes) != len(self.values):
            raise ValueError("modes and values differ in length")

    @classmethod
    def from_field(cls, field: FourierField, tol: float = 0.0) -> "SparseField":
        modes, vals = field.support(tol)
        return cls(field.N, modes, vals)

    def support(self, tol: float = 0.0):
        keep = np.abs(self.values) > tol
        return self.modes[keep], self.values[keep]

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)))

    def evaluate(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.exp(1j * TWO_PI * (pts @ self.modes.T.astype(float))) @ self.values

    def to_field(self, N: int | None = None) -> FourierField:
        return FourierField.from_modes(N or self.N, self.modes, self.values)

    def __mul__(self, c) -> "SparseField":
        return SparseField(self.N, self.modes.copy(), self.values * c)

    __rmul__ = __mul__


# -- filter bank -------------------------------------------------------------

@dataclass
class FilterBank:
    """Dyadic symbols ``psi_n`` and fat symbols ``psi~_n`` on the lattice of size ``N``.

    Levels run over ``0..n_max`` with ``n_max = log2(N/2) - 1``.  The extra
    level ``n_max + 1`` (``tail``) is ``1 - chi(2^{-n_max} |k|)``, which makes
    the family an exact partition of unity on the whole box.
    """

    N: int
    chi: ChiProfile = field(default_factory=ChiProfile)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not is_power_of_two(self.N) or self.N < 16:
            raise ValueError("N must be a power of two >= 16")

    @property
    def n_max(self) -> int:
        return int(math.log2(self.N // 2)) - 1

    @property
    def tail_level(self) -> int:
        return self.n_max + 1

    def levels(self, with_tail: bool = False) -> range:
        return range(self.n_max + 2) if with_tail else range(self.n_max + 1)

    @cached_property
    def r2(self) -> np.ndarray:
        K1, K2 = frequency_grid(self.N)
        return K1 * K1 + K2 * K2

    def radial(self, n: int, r, fat: bool = False) -> np.ndarray:
        """Value of ``psi_n`` (or ``psi~_n``) at radii ``r``."""
        r = np.asarray(r, dtype=float)
        chi = self.chi
        if n == self.tail_level:
            s = 2.0 ** -(self.n_max - 1) if fat else 2.0 ** -self.n_max
            return 1.0 - chi(r * s)
        if fat:
            if n == 0:
                return chi(r / 2.0)
            return chi(r * 2.0 ** -(n + 1)) - chi(r * 2.0 ** (2 - n))
        if n == 0:
            return chi(r)
        return chi(r * 2.0 ** -n) - chi(r * 2.0 ** -(n - 1))

    def _radial_r2(self, n, r2, fat):
        chi = self.chi
        if n == self.tail_level:
            s = 2.0 ** -(self.n_max - 1) if fat else 2.0 ** -self.n_max
            return 1.0 - _chi_radial(chi, r2, s)
        if fat:
            if n == 0:
                return _chi_radial(chi, r2, 0.5)
            return _chi_radial(chi, r2, 2.0 ** -(n + 1)) - _chi_radial(chi, r2, 2.0 ** (2 - n))
        if n == 0:
            return _chi_radial(chi, r2, 1.0)
        return _chi_radial(chi, r2, 2.0 ** -n) - _chi_radial(chi, r2, 2.0 ** -(n - 1))

    def psi(self, n: int) -> np.ndarray:
        return self._array(n, False)

    def psi_fat(self, n: int) -> np.ndarray:
        return self._array(n, True)

    def _array(self, n: int, fat: bool) -> np.ndarray:
        if not 0 <= n <= self.tail_level:
            raise ValueError(f"level {n} outside 0..{self.tail_level}")
        key = (n, fat)
        if key not in self._cache:
            arr = self._radial_r2(n, self.r2, fat)
            arr.setflags(write=False)
            self._cache[key] = arr
        return self._cache[key]

    def at_modes(self, n: int, modes, fat: bool = False) -> np.ndarray:
        """Symbol values at integer modes of shape (P, 2) without building arrays."""
        modes = np.asarray(modes, dtype=np.int64).reshape(-1, 2)
        return self._radial_r2(n, modes[:, 0] ** 2 + modes[:, 1] ** 2, fat)

    def low_pass(self, n0: int) -> np.ndarray:
        """``sum_{n <= n0} psi_n = chi(2^{-n0} |k|)``."""
        return _chi_radial(self.chi, self.r2, 2.0 ** -n0)


def build_filter_bank(N: int, chi_params: ChiProfile | dict | str | None = None) -> FilterBank:
    """Dyadic filter bank at resolution ``N`` (a power of two, at least 16)."""
    return FilterBank(N, _as_profile(chi_params))


def _as_profile(chi_params) -> ChiProfile:
    if chi_params is None:
        return ChiProfile()
    if isinstance(chi_params, ChiProfile):
        return chi_params
    if isinstance(chi_params, str):
        return ChiProfile(chi_params)
    return ChiProfile(**chi_params)


# -- cones -------------------------------------------------------------------

def _wrap_pi(a):
    """Reduce angles to ``[0, pi)``."""
    return np.mod(a, np.pi)


def line_distance(theta, axis) -> np.ndarray:
    """Angle between the lines through 0 at angles ``theta`` and ``axis`` (in ``[0, pi/2]``)."""
    d = _wrap_pi(np.asarray(theta, dtype=float) - axis)
    return np.minimum(d, np.pi - d)


@dataclass(frozen=True)
class ConeSystem:
    """Two closed symmetric frequency cones with a smooth angular partition of unity.

    Cones are given by the angle of their axis line and their full opening
    angle.  ``phi_plus`` is 1 on the plus cone, 0 on the minus cone and
    interpolates with the ``chi`` profile across the two gaps.  The origin
    is assigned to the minus side.
    """

    axis_plus: float
    axis_minus: float
    aperture_plus: float
    aperture_minus: float
    chi: ChiProfile = ChiProfile()

    def __post_init__(self):
        if min(self.aperture_plus, self.aperture_minus) <= 0:
            raise ValueError("cone apertures must be positive")
        hp, hm = self.aperture_plus / 2, self.aperture_minus / 2
        if line_distance(self.axis_plus, self.axis_minus) <= hp + hm:
            raise ValueError("cones overlap: angular gap between axes must exceed the half-apertures")

    @property
    def half_plus(self) -> float:
        return self.aperture_plus / 2

    @property
    def half_minus(self) -> float:
        return self.aperture_minus / 2

    def margin_plus(self, theta) -> np.ndarray:
        """Signed angular depth inside the plus cone (positive inside)."""
        return self.half_plus - line_distance(theta, self.axis_plus)

    def margin_minus(self, theta) -> np.ndarray:
        return self.half_minus - line_distance(theta, self.axis_minus)

    def in_plus(self, theta) -> np.ndarray:
        return self.margin_plus(theta) >= 0

    def in_minus(self, theta) -> np.ndarray:
        return self.margin_minus(theta) >= 0

    def phi_plus_angle(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        hp, hm = self.half_plus, self.half_minus
        beta = _wrap_pi(self.axis_minus - self.axis_plus)
        flip = beta > np.pi / 2
        if flip:
            beta = np.pi - beta
            delta = _wrap_pi(self.axis_plus - theta)
        else:
            delta = _wrap_pi(theta - self.axis_plus)
        out = np.zeros_like(delta)
        out[(delta <= hp) | (delta >= np.pi - hp)] = 1.0
        g1 = (delta > hp) & (delta < beta - hm)
        out[g1] = self.chi(1.0 + (delta[g1] - hp) / (beta - hm - hp))
        g2 = (delta > beta + hm) & (delta < np.pi - hp)
        out[g2] = self.chi(1.0 + (np.pi - hp - delta[g2]) / (np.pi - hp - beta - hm))
        return out

    def phi_minus_angle(self, theta) -> np.ndarray:
        return 1.0 - self.phi_plus_angle(theta)

    def phi_plus_at(self, k1, k2) -> np.ndarray:
        k1 = np.asarray(k1, dtype=float)
        k2 = np.asarray(k2, dtype=float)
        out = self.phi_plus_angle(np.arctan2(k2, k1))
        return np.where((k1 == 0) & (k2 == 0), 0.0, out)

    def phi_minus_at(self, k1, k2) -> np.ndarray:
        return 1.0 - self.phi_plus_at(k1, k2)

    def phi(self, sigma: str, N: int) -> np.ndarray:
        K1, K2 = frequency_grid(N)
        plus = self.phi_plus_at(K1, K2)
        return plus if sigma == "+" else 1.0 - plus

    def rotated(self, angle: float) -> "ConeSystem":
        return ConeSystem(self.axis_plus + angle, self.axis_minus + angle,
                          self.aperture_plus, self.aperture_minus, self.chi)


def build_cone_system(aperture_plus: float, aperture_minus: float, axis_plus: float = np.pi / 2,
                      axis_minus: float = 0.0, transition_params=None) -> ConeSystem:
    """Cone system from full apertures and axis angles (radians).

    Raises:
        ValueError: if the closed cones meet away from the origin.
    """
    return ConeSystem(float(axis_plus), float(axis_minus), float(aperture_plus),
                      float(aperture_minus), _as_profile(transition_params))


def aligned_cones(tmap, aperture_plus: float, aperture_minus: float, chi=None) -> ConeSystem:
    """Cones adapted to a map's linear part.

    The plus cone is centred on the unstable eigendirection of ``A^T`` (the
    conormal of the stable line) and the minus cone on the stable one.
    """
    w, V = np.linalg.eig(np.asarray(tmap.A, dtype=float).T)
    order = np.argsort(-np.abs(w))
    vu, vs = V[:, order[0]].real, V[:, order[1]].real
    return build_cone_system(aperture_plus, aperture_minus, math.atan2(vu[1], vu[0]),
                             math.atan2(vs[1], vs[0]), chi)


# -- multipliers -------------------------------------------------------------

def apply_multiplier(field: FourierField, symbol) -> FourierField:
    """Coefficientwise product with a frequency-indexed symbol (FFT order).

    Raises:
        ValueError: if the symbol shape differs from the field's.
    """
    symbol = np.asarray(symbol)
    if symbol.shape != field.coeffs.shape:
        raise ValueError(f"symbol shape {symbol.shape} does not match field {field.coeffs.shape}")
    return FourierField(field.coeffs * symbol)


def kernel_l1_norm(symbol) -> float:
    """Discrete ``L_1`` norm of the convolution kernel of a symbol."""
    symbol = np.asarray(symbol)
    kernel = np.fft.ifft2(symbol) * symbol.size
    return float(np.mean(np.abs(kernel)))


def cone_dyadic_symbols(bank: FilterBank, theta: ConeSystem, with_tail: bool = False):
    """Cone-restricted dyadic symbols.

    Returns ``(psi, psi_fat)``, two dicts keyed by ``(level, sigma)`` with
    ``sigma`` in ``{"+", "-"}``.
    """
    plus = theta.phi("+", bank.N)
    minus = 1.0 - plus
    psi, fat = {}, {}
    for n in bank.levels(with_tail):
        p, pf = bank.psi(n), bank.psi_fat(n)
        psi[(n, "+")], psi[(n, "-")] = p * plus, p * minus
        fat[(n, "+")], fat[(n, "-")] = pf * plus, pf * minus
    return psi, fat


def anisotropic_weight_symbols(N: int, theta: ConeSystem, t: float, v: float):
    """``(1+|k|^2)^{t/2} phi_+`` and ``(1+|k|^2)^{v/2} phi_-``."""
    K1, K2 = frequency_grid(N)
    jap = 1.0 + K1 * K1 + K2 * K2
    plus = theta.phi_plus_at(K1, K2)
    return jap ** (t / 2) * plus, jap ** (v / 2) * (1.0 - plus)


# -- export ------------------------------------------------------------------

_MAGIC = b"AFLD"
_LAYOUTS = {"fft": 0, "centered": 1}


def write_field_binary(field: FourierField, path, layout: str = "fft") -> None:
    """Little-endian complex64 coefficients after a 12-byte header (magic, N, layout)."""
    if layout not in _LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    data = field.coeffs if layout == "fft" else field.centered()
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<II", field.N, _LAYOUTS[layout]))
        fh.write(np.ascontiguousarray(data, dtype="<c8").tobytes())


def read_field_binary(path) -> FourierField:
    with open(path, "rb") as fh:
        head = fh.read(12)
        if head[:4] != _MAGIC:
            raise ValueError("not a field file")
        N, layout = struct.unpack("<II", head[4:])
        data = np.frombuffer(fh.read(), dtype="<c8").reshape(N, N).astype(complex)
    if layout == 1:
        data = np.fft.ifftshift(data)
    return FourierField(data)


def write_field_csv(field: FourierField, path) -> None:
    N = field.N
    k = np.arange(-N // 2, N // 2)
    c = field.centered()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k1", "k2", "re", "im"])
        for i, k1 in enumerate(k):
            for j, k2 in enumerate(k):
                w.writerow([int(k1), int(k2), repr(float(c[i, j].real)), repr(float(c[i, j].imag))])


def read_field_csv(path) -> FourierField:
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    N = int(round(math.sqrt(len(rows))))
    c = np.zeros((N, N), dtype=complex)
    k1 = rows[:, 0].astype(int) % N
    k2 = rows[:, 1].astype(int) % N
    c[k1, k2] = rows[:, 2] + 1j * rows[:, 3]
    return FourierField(c)


def random_field(N: int, band: int, rng, decay: float = 1.0, real: bool = False) -> FourierField:
    """Random field with modes ``|k|_inf <= band`` and amplitudes ``(1+|k|)^{-decay}``."""
    K1, K2 = frequency_grid(N)
    mask = (np.abs(K1) <= band) & (np.abs(K2) <= band)
    amp = (1.0 + np.sqrt(K1 * K1 + K2 * K2)) ** (-decay)
    c = (rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))) * amp * mask
    f = FourierField(c)
    if real:
        f = FourierField.from_samples(f.samples().real)
    return f
