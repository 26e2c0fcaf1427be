"""Dynamical determinants from periodic orbits.

``d_g(z) = exp(-sum_n z^n/n S_n)`` with
``S_n = sum_{T^n x = x} prod_{k<n} g(T^k x) / |det(I - DT_x^{-n})|``;
its zeros, the essential spectral radius bound and the matching of zeros
with transfer-operator eigenvalues.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .norms import AnisoParams
from .torus import PeriodicOrbitTable, TorusMap, Weight, enumerate_periodic_points


@dataclass
class OrbitSums:
    """``S_n`` for ``n = 1..n_max`` with bookkeeping per period."""

    sums: list
    point_counts: list
    partial: list
    tables: list = field(default_factory=list, repr=False)

    def __getitem__(self, i):
        return self.sums[i]

    def __len__(self):
        return len(self.sums)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "S_n", "point_count", "partial_flag"])
            for n, (s, c, p) in enumerate(zip(self.sums, self.point_counts, self.partial), start=1):
                w.writerow([n, repr(_jsonable(s)), c, int(p)])


def _jsonable(z):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _fsum_complex(v) -> complex:
    v = np.asarray(v)
    if np.isrealobj(v):
        return math.fsum(v.tolist())
    return complex(math.fsum(v.real.tolist()), math.fsum(v.imag.tolist()))


def orbit_sum(table: PeriodicOrbitTable) -> complex:
    """``S_n`` of one period table whose weight products are attached."""
    if table.weight_products is None:
        raise ValueError("attach weight products with PeriodicOrbitTable.with_weight first")
    return _fsum_complex(np.asarray(table.weight_products) / table.det_terms)


def orbit_sums(tmap: TorusMap, g: Weight | None, n_max: int, tol: float = 1e-12) -> OrbitSums:
    """Weighted periodic-orbit sums ``S_1..S_{n_max}``.

    Periods whose orbit table is incomplete (continuation failures or a
    wrong point count) are computed from the points that were found and
    flagged as partial.
    """
    g = g or Weight()
    sums, counts, partial, tables = [], [], [], []
    for n in range(1, n_max + 1):
        tab = enumerate_periodic_points(tmap, n, tol).with_weight(tmap, g)
        s = orbit_sum(tab)
        sums.append(s.real if isinstance(s, complex) and s.imag == 0 else s)
        counts.append(len(tab))
        partial.append(not tab.complete)
        tables.append(tab)
    return OrbitSums(sums, counts, partial, tables)


@dataclass
class DeterminantSeries:
    """Truncated power series of ``d(z)``.

    ``coeffs[j]`` multiplies ``z^j``; ``log_coeffs[n-1] = -S_n / n``.
    """

    n_max: int
    sums: np.ndarray
    log_coeffs: np.ndarray
    coeffs: np.ndarray
    trust_radius: float

    def evaluate(self, z, degree: int | None = None):
        c = self.coeffs[: (degree if degree is not None else self.n_max) + 1]
        return np.polyval(c[::-1], np.asarray(z, dtype=complex))

    def evaluate_exp(self, z):
        """``exp`` of the truncated log series."""
        z = np.asarray(z, dtype=complex)
        n = np.arange(1, self.n_max + 1)
        return np.exp(np.sum(self.log_coeffs[:, None] * z.ravel()[None, :] ** n[:, None], axis=0)).reshape(z.shape)

    def log_derivative_sums(self) -> np.ndarray:
        """``S_n`` recovered from the polynomial: ``-n`` times the log coefficients of ``sum c_j z^j``."""
        c = self.coeffs
        m = len(c) - 1
        # log-coefficients b_n of the polynomial from n c_n = sum_k k b_k c_{n-k}
        b = np.zeros(m + 1, dtype=c.dtype)
        for n in range(1, m + 1):
            acc = n * c[n] - sum(k * b[k] * c[n - k] for k in range(1, n))
            b[n] = acc / n
        return -np.arange(1, m + 1) * b[1:]

    def to_dict(self) -> dict:
        return {"n_max": self.n_max,
                "S_n": [_jsonable(s) for s in self.sums],
                "log_coeffs": [_jsonable(a) for a in self.log_coeffs],
                "coeffs": [_jsonable(c) for c in self.coeffs],
                "trust_radius": self.trust_radius}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def trust_radius(coeffs, threshold: float = 1e-8, cap: float = 1e3) -> float:
    """Half the radius at which the last two coefficients contribute ``threshold``.

    Vanishing coefficients put no constraint; the result is capped at ``cap``.
    """
    c = np.asarray(coeffs)
    m = len(c) - 1
    radii = [cap * 2]
    for j in (m - 1, m):
        if j >= 1 and abs(c[j]) > 0:
            radii.append((threshold / abs(c[j])) ** (1.0 / j))
    return float(min(min(radii) / 2, cap))


def determinant_series(sums, n_max: int | None = None, threshold: float = 1e-8) -> DeterminantSeries:
    """Exponentiate ``-sum_{n <= n_max} S_n z^n / n`` into polynomial coefficients.

    Uses ``c_0 = 1`` and ``c_j = (1/j) sum_{k=1..j} k a_k c_{j-k}`` with
    ``a_k = -S_k / k``.
    """
    S = np.asarray(sums.sums if isinstance(sums, OrbitSums) else sums)
    n_max = len(S) if n_max is None else n_max
    if n_max > len(S):
        raise ValueError(f"need {n_max} orbit sums, got {len(S)}")
    S = S[:n_max]
    dtype = complex if np.iscomplexobj(S) else float
    a = -S.astype(dtype) / np.arange(1, n_max + 1)
    c = np.zeros(n_max + 1, dtype=dtype)
    c[0] = 1.0
    for j in range(1, n_max + 1):
        k = np.arange(1, j + 1)
        c[j] = np.sum(k * a[k - 1] * c[j - k]) / j
    return DeterminantSeries(n_max, S, a, c, trust_radius(c, threshold))


@dataclass
class ZeroSet:
    zeros: np.ndarray
    residuals: np.ndarray
    movements: np.ndarray
    unstable: list
    search_radius: float

    def to_dict(self) -> dict:
        return {"zeros": [[float(z.real), float(z.imag)] for z in self.zeros],
                "residuals": [float(r) for r in self.residuals],
                "movements": [float(m) for m in self.movements],
                "unstable": [[float(z.real), float(z.imag), reason] for z, reason in self.unstable],
                "search_radius": self.search_radius}


def _poly_roots(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    nz = np.nonzero(c)[0]
    if len(nz) == 0 or nz[-1] == 0:
        return np.zeros(0, dtype=complex)
    return np.roots(c[: nz[-1] + 1][::-1])


def find_zeros(series: DeterminantSeries, search_radius: float | None = None,
               residual_tol: float = 1e-8, movement_tol: float = 1e-4) -> ZeroSet:
    """Zeros of the truncated determinant in ``|z| <= search_radius``.

    Each root is validated by ``|d(z)| < residual_tol`` and by moving less
    than ``movement_tol`` when the degree drops by one; failing roots are
    listed as unstable and not returned.

    Raises:
        ValueError: if ``search_radius`` exceeds the trust radius.
    """
    R = series.trust_radius if search_radius is None else search_radius
    if R > series.trust_radius:
        raise ValueError(f"search radius {R} exceeds the trust radius {series.trust_radius:.4g}")
    roots = _poly_roots(series.coeffs)
    roots = roots[np.abs(roots) <= R]
    lower = _poly_roots(series.coeffs[:-1]) if series.n_max > 1 else np.zeros(0, dtype=complex)
    zs, res, mov, bad = [], [], [], []
    for z in sorted(roots, key=lambda v: (abs(v), v.real, v.imag)):
        r = float(abs(series.evaluate(z)))
        m = float(np.min(np.abs(lower - z))) if len(lower) else math.inf
        if r >= residual_tol:
            bad.append((z, f"residual {r:.2e}"))
        elif m >= movement_tol:
            bad.append((z, f"moves {m:.2e} under truncation"))
        else:
            zs.append(z)
            res.append(r)
            mov.append(m)
    return ZeroSet(np.array(zs, dtype=complex), np.array(res), np.array(mov), bad, float(R))


# -- essential spectral radius ------------------------------------------------

@dataclass
class SpectralBoundInputs:
    """Ingredients of the variational bound.

    ``exact-linear``: constant integrands (entropy, ``log|g det DT|_{E^s}|``,
    the two Lyapunov exponents).  ``orbit-ensemble``: per period ``n`` the
    arrays of ``|g^{(n)}|`` and the unstable/stable multipliers of each
    periodic point.
    """

    mode: str
    entropy: float | None = None
    weight_log_integral: float | None = None
    chi_unstable_inverse: float | None = None
    chi_stable: float | None = None
    orbit_data: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("exact-linear", "orbit-ensemble"):
            raise ValueError(f"unknown mode {self.mode!r}")


def linear_bound_inputs(tmap: TorusMap, g: Weight | None = None) -> SpectralBoundInputs:
    """Exact inputs for a linear map with a constant weight."""
    g = g or Weight()
    if not (tmap.is_linear and g.is_constant_on(tmap)):
        raise ValueError("exact-linear inputs need a linear map and a constant weight")
    lu, ls, _, _ = tmap.eigen_data()
    return SpectralBoundInputs("exact-linear", math.log(lu), math.log(abs(g.constant_value(tmap))) + math.log(ls),
                               -math.log(lu), math.log(ls))


def orbit_bound_inputs(tmap: TorusMap, g: Weight | None, periods) -> SpectralBoundInputs:
    """Multipliers and weight products of all period-``n`` points for each ``n``."""
    g = g or Weight()
    data = {}
    for n in periods:
        tab = enumerate_periodic_points(tmap, n).with_weight(tmap, g)
        mu = np.linalg.eigvals(np.asarray(tab.stability, dtype=float))
        mu = np.sort(np.abs(mu), axis=1)
        data[int(n)] = {"weight": np.abs(np.asarray(tab.weight_products)), "mu_u": mu[:, 1], "mu_s": mu[:, 0],
                        "det_terms": np.asarray(tab.det_terms, dtype=float)}
    return SpectralBoundInputs("orbit-ensemble", orbit_data=data)


@dataclass
class BoundResult:
    Q: float
    mode: str
    sequence: dict = field(default_factory=dict)
    normalization: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def essential_radius_bound(inputs: SpectralBoundInputs, t: float, s: float, r: float = math.inf,
                           normalization: str = "periodic") -> BoundResult:
    """Upper bound ``Q`` on the essential spectral radius.

    Exact-linear: ``exp(h + int log|g det DT|_{E^s}| + max(t chi(DT^{-1}|E^u), |t+s| chi(DT|E^s)))``.

    Orbit-ensemble: ``Q_n = (sum_x w_x |g^{(n)}(x)| |mu_s| max(|mu_u|^{-t}, |mu_s|^{|t+s|}))^{1/n}``
    at the largest available ``n``.  With ``normalization="periodic"`` each
    point carries ``w_x = 1/(|1 - mu_u^{-1}| |1 - mu_s|)``, so that
    ``w_x |mu_s| = 1/|det(I - DT_x^{-n})|`` is the usual periodic-orbit
    weight; ``"raw"`` uses ``w_x = 1``.

    Raises:
        ValueError: outside the parameter window ``t-(r-1) < s < -t < 0``.
    """
    AnisoParams(t, s, 1.0, math.inf, r)
    if inputs.mode == "exact-linear":
        expo = inputs.entropy + inputs.weight_log_integral + max(t * inputs.chi_unstable_inverse,
                                                                 abs(t + s) * inputs.chi_stable)
        return BoundResult(float(math.exp(expo)), "exact-linear")
    if normalization not in ("periodic", "raw"):
        raise ValueError(f"unknown normalization {normalization!r}")
    seq = {}
    for n, d in sorted(inputs.orbit_data.items()):
        mu_u, mu_s = d["mu_u"], d["mu_s"]
        term = d["weight"] * mu_s * np.maximum(mu_u ** -t, mu_s ** abs(t + s))
        if normalization == "periodic":
            term = term / (np.abs(1.0 - 1.0 / mu_u) * np.abs(1.0 - mu_s))
        seq[n] = float(math.fsum(term.tolist()) ** (1.0 / n))
    if not seq:
        raise ValueError("orbit-ensemble inputs carry no periods")
    return BoundResult(seq[max(seq)], "orbit-ensemble", seq, normalization)


# -- zeros versus eigenvalues --------------------------------------------------

@dataclass
class MatchReport:
    pairs: list
    unmatched_zeros: list
    unmatched_eigenvalues: list
    radius: float
    tol: float

    @property
    def all_matched(self) -> bool:
        return not self.unmatched_zeros and not self.unmatched_eigenvalues

    def to_dict(self) -> dict:
        def c(z):
            return [float(complex(z).real), float(complex(z).imag)]
        return {"pairs": [{"zero": c(z), "inverse_zero": c(1 / z), "eigenvalue": c(lam), "residual": float(r)}
                          for z, lam, r in self.pairs],
                "unmatched_zeros": [c(z) for z in self.unmatched_zeros],
                "unmatched_eigenvalues": [c(lam) for lam in self.unmatched_eigenvalues],
                "radius": self.radius, "tol": self.tol, "all_matched": self.all_matched}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def match_zeros_spectrum(zeros, eigenvalues, radius: float, tol: float) -> MatchReport:
    """Greedy matching of inverse zeros ``1/z`` with eigenvalues of modulus at least ``radius``.

    Candidates within ``tol`` below the radius may serve as partners, but
    only items at or above the radius are reported as unmatched.
    """
    zs = np.asarray(zeros.zeros if isinstance(zeros, ZeroSet) else zeros, dtype=complex)
    lam = np.asarray(eigenvalues, dtype=complex)
    inv = 1.0 / zs if len(zs) else zs
    zi = [i for i in range(len(zs)) if abs(inv[i]) >= radius - tol]
    li = [j for j in range(len(lam)) if abs(lam[j]) >= radius - tol]
    cand = sorted(((abs(inv[i] - lam[j]), i, j) for i in zi for j in li), key=lambda x: (x[0], x[1], x[2]))
    used_z, used_l, pairs = set(), set(), []
    for d, i, j in cand:
        if d > tol:
            break
        if i in used_z or j in used_l:
            continue
        used_z.add(i)
        used_l.add(j)
        pairs.append((zs[i], lam[j], d))
    un_z = [zs[i] for i in zi if i not in used_z and abs(inv[i]) >= radius]
    un_l = [lam[j] for j in li if j not in used_l and abs(lam[j]) >= radius]
    return MatchReport(pairs, un_z, un_l, float(radius), float(tol))


def k_stable_eigenvalues(coarse, fine, radius: float, tol: float) -> np.ndarray:
    """Eigenvalues of the finer truncation above ``radius`` that reappear in the coarser one within ``tol``."""
    coarse = np.asarray(coarse, dtype=complex)
    out = [lam for lam in np.asarray(fine, dtype=complex)
           if abs(lam) >= radius and len(coarse) and np.min(np.abs(coarse - lam)) <= tol]
    return np.array(out, dtype=complex)
