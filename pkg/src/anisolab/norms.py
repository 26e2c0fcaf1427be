"""Anisotropic norms of periodic fields.

``u_norm`` is the leafwise norm

    sup_leaves sup_l 2^{l t} || (psi_l^{Op} phi) restricted to the leaf ||_{B^s_{p,q}},

``w_dagger_norm`` the two-cone Sobolev-type norm and ``triebel_norm`` the
single-multiplier mixed norm with separate stable and unstable weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .leafwise import (AdmissibleLeaf, LeafRestriction, chart_nodes, default_leaf_resolution,
                       leaf_lp_norm, leafwise_levels)
from .spectral import (ChiProfile, ConeSystem, FilterBank, FourierField, SparseField,
                       anisotropic_weight_symbols, frequency_grid, is_power_of_two, wavenumbers)

TWO_PI = 2.0 * np.pi
WINDOW_MESSAGE = "parameter window t−(r−1)<s<−t<0 violated"
PROBE_WINDOW_MESSAGE = "indicator probe window −1+1/p<s<−t<0<t<1/p violated"


@dataclass(frozen=True)
class AnisoParams:
    """Parameters ``(t, s, p, q)`` of the leafwise norm and the declared smoothness ``r``."""

    t: float
    s: float
    p: float = 1.0
    q: float = math.inf
    r: float = math.inf

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"{WINDOW_MESSAGE}: t must be positive (t={self.t})")
        if not self.s < -self.t:
            raise ValueError(f"{WINDOW_MESSAGE}: need s < -t (s={self.s}, t={self.t})")
        if not self.t - (self.r - 1) < self.s:
            raise ValueError(f"{WINDOW_MESSAGE}: need t-(r-1) < s (t={self.t}, r={self.r}, s={self.s})")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.q < 1:
            raise ValueError("q must be >= 1")

    def check_probe_window(self) -> None:
        """Extra window of the indicator-multiplier probe."""
        p = self.p
        if not (-1 + 1 / p < self.s < -self.t < 0 < self.t < 1 / p):
            raise ValueError(PROBE_WINDOW_MESSAGE)


@dataclass
class NormReport:
    """Outcome of a leafwise norm evaluation."""

    value: float
    argmax_leaf: str | None
    argmax_level: int | None
    table: list
    N: int
    sample_size: int
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


class _LeafTrace:
    """Evaluation plan of a field's modes along one leaf."""

    def __init__(self, leaf: AdmissibleLeaf, M: int, chi):
        self.leaf = leaf
        self.x = chart_nodes(leaf, M)
        self.pts = np.mod(leaf.points(self.x), 1.0)
        self.window = leaf.window(self.x, chi)
        self.weights = np.sqrt(1.0 + leaf.gamma(self.x, 1) ** 2)
        self.chi = chi
        self._E = None
        self._E1 = self._E2 = None

    def restriction(self, values) -> LeafRestriction:
        return LeafRestriction(self.leaf, self.x, values * self.window, self.window, self.weights, self.chi)

    def trace_sparse(self, modes, coeffs):
        if self._E is None:
            self._E = np.exp(1j * TWO_PI * (self.pts @ modes.T.astype(float)))
        return self._E @ coeffs

    def trace_dense(self, C):
        if self._E1 is None:
            k = wavenumbers(C.shape[0]).astype(float)
            self._E1 = np.exp(1j * TWO_PI * np.outer(self.pts[:, 0], k))
            self._E2 = np.exp(1j * TWO_PI * np.outer(self.pts[:, 1], k))
        return np.einsum("pj,pj->p", self._E1 @ C, self._E2)


def leaf_level_table(field: FourierField | SparseField, leaves, symbols, s: float, p: float, q: float = math.inf,
                     M: int | None = None, chi=None, raw_lp: bool = False) -> np.ndarray:
    """Leafwise Besov norms of ``symbol^{Op} field`` for each leaf and symbol.

    ``symbols`` is a list of callables mapping integer modes of shape (P, 2)
    to symbol values.  Returns an array of shape ``(len(leaves), len(symbols))``;
    with ``raw_lp=True`` the plain ``L_p`` norm of the windowed trace is
    returned instead of the Besov norm.
    """
    chi = chi or ChiProfile()
    N = field.N
    modes, vals = field.support()
    out = np.zeros((len(leaves), len(symbols)))
    if len(vals) == 0:
        return out
    sparse = isinstance(field, SparseField) or len(vals) <= 4 * N
    if sparse:
        sym_vals = [np.asarray(sym(modes), dtype=float) for sym in symbols]
    else:
        K1, K2 = frequency_grid(N)
        grid_modes = np.stack([K1.ravel(), K2.ravel()], axis=1)
        sym_arrays = [np.asarray(sym(grid_modes), dtype=float).reshape(N, N) for sym in symbols]
    for i, leaf in enumerate(leaves):
        Ml = M or default_leaf_resolution(N, leaf)
        plan = _LeafTrace(leaf, Ml, chi)
        for j in range(len(symbols)):
            if sparse:
                if not np.any(sym_vals[j]):
                    continue
                tr = plan.trace_sparse(modes, vals * sym_vals[j])
            else:
                if not np.any(sym_arrays[j]):
                    continue
                tr = plan.trace_dense(field.coeffs * sym_arrays[j])
            R = plan.restriction(tr)
            if raw_lp:
                out[i, j] = leaf_lp_norm(R, R.samples, p)
                continue
            terms = leafwise_levels(R, s, p)
            out[i, j] = terms.max() if math.isinf(q) else np.sum(terms ** q) ** (1.0 / q)
    return out


def dyadic_symbol(bank: FilterBank, n: int, fat: bool = False):
    return lambda modes: bank.at_modes(n, modes, fat)


def cone_dyadic_symbol(bank: FilterBank, cones: ConeSystem, n: int, sigma: str):
    def sym(modes):
        modes = np.asarray(modes)
        plus = cones.phi_plus_at(modes[:, 0], modes[:, 1])
        phi = plus if sigma == "+" else 1.0 - plus
        return bank.at_modes(n, modes) * phi
    return sym


def u_norm(field: FourierField | SparseField, params: AnisoParams, leaves, bank: FilterBank,
           M: int | None = None) -> NormReport:
    """Leafwise anisotropic norm over a finite sample of leaves.

    Levels ``0..n_max`` of the bank plus its tail level are used.
    """
    if field.N != bank.N:
        raise ValueError(f"bank resolution {bank.N} does not match field {field.N}")
    levels = list(bank.levels(with_tail=True))
    symbols = [dyadic_symbol(bank, n) for n in levels]
    raw = leaf_level_table(field, leaves, symbols, params.s, params.p, params.q, M, bank.chi)
    weighted = raw * (2.0 ** (np.array(levels) * params.t))[None, :]
    table = [(leaf.leaf_id, int(levels[j]), float(weighted[i, j]))
             for i, leaf in enumerate(leaves) for j in range(len(levels))]
    if weighted.size == 0 or not np.any(weighted):
        return NormReport(0.0, None, None, table, field.N, len(leaves), {})
    i, j = np.unravel_index(np.argmax(weighted), weighted.shape)
    flags = {"tail_level_dominant": bool(levels[j] == bank.tail_level),
             "finite_q_experimental": bool(not math.isinf(params.q))}
    return NormReport(float(weighted[i, j]), leaves[i].leaf_id, int(levels[j]), table,
                      field.N, len(leaves), flags)


def level_trace_norms(field: FourierField, leaves, bank: FilterBank, p: float,
                      M: int | None = None) -> np.ndarray:
    """``sup_leaves ||(psi_l^{Op} field) on the leaf||_{L_p}`` for every level ``l``."""
    levels = list(bank.levels(with_tail=True))
    symbols = [dyadic_symbol(bank, n) for n in levels]
    raw = leaf_level_table(field, leaves, symbols, 0.0, p, math.inf, M, bank.chi, raw_lp=True)
    return raw.max(axis=0)


def _grid_lp(field: FourierField, p: float, oversample: int = 2) -> float:
    return field.lp_norm(p, oversample)


def w_dagger_norm(field: FourierField, theta: ConeSystem, t: float, v: float, p: float,
                  oversample: int = 2, parts: bool = False):
    """``||Psi_{t,+}^{Op} phi||_{L_p} + ||Psi_{v,-}^{Op} phi||_{L_p}``.

    Raises:
        ValueError: unless ``v <= 0 <= t``.
    """
    if not v <= 0 <= t:
        raise ValueError("w_dagger_norm needs v <= 0 <= t")
    sp, sm = anisotropic_weight_symbols(field.N, theta, t, v)
    a = _grid_lp(FourierField(field.coeffs * sp), p, oversample)
    b = _grid_lp(FourierField(field.coeffs * sm), p, oversample)
    return (a + b, a, b) if parts else a + b


def triebel_norm(field: FourierField, t: float, s: float, p: float, stable_angle: float = 0.0,
                 oversample: int = 2) -> float:
    """``||((1+|xi|^2+|eta|^2)^{t/2} (1+|eta|^2)^{s/2})^{Op} phi||_{L_p}``.

    ``eta`` is the frequency component along the stable direction at angle
    ``stable_angle`` (horizontal by default) and ``xi`` the orthogonal one.
    """
    K1, K2 = frequency_grid(field.N)
    c, sn = math.cos(stable_angle), math.sin(stable_angle)
    eta = K1 * c + K2 * sn
    xi = -K1 * sn + K2 * c
    sym = (1.0 + xi ** 2 + eta ** 2) ** (t / 2) * (1.0 + eta ** 2) ** (s / 2)
    return _grid_lp(FourierField(field.coeffs * sym), p, oversample)


def holder_proxy(field: FourierField, bank: FilterBank, u: float, oversample: int = 2) -> float:
    """``sup_n 2^{u n} ||psi_n^{Op} phi||_{L_inf}`` over the bank levels (tail included)."""
    best = 0.0
    for n in bank.levels(with_tail=True):
        part = FourierField(field.coeffs * bank.psi(n))
        best = max(best, 2.0 ** (u * n) * part.lp_norm(math.inf, oversample))
    return best


def holder_comparison(probes, params: AnisoParams, leaves, bank: FilterBank, u: float):
    """Ratios ``u_norm / Holder proxy`` for a list of ``(probe_id, field)`` pairs.

    Returns ``(rows, max_ratio)`` with rows ``(probe_id, u_norm, holder, ratio)``.
    """
    rows = []
    for pid, f in probes:
        un = u_norm(f, params, leaves, bank).value
        h = holder_proxy(f, bank, u)
        rows.append((pid, un, h, un / h if h > 0 else math.nan))
    ratios = [r[3] for r in rows if np.isfinite(r[3])]
    return rows, (max(ratios) if ratios else math.nan)


# -- half-plane multiplier experiments ---------------------------------------

BLOWUP_CASES = ("boundary-in-Cminus", "boundary-in-Cplus", "boundary-outside")
DIVERGENCE_SLOPE = 0.05


def _case_name(case) -> str:
    if isinstance(case, int) or (isinstance(case, str) and case.isdigit()):
        return BLOWUP_CASES[int(case) - 1]
    if case not in BLOWUP_CASES:
        raise ValueError(f"unknown half-plane case {case!r}; expected one of {BLOWUP_CASES} or 1..3")
    return case


def _power_profile(exponent: float):
    return lambda x: np.where(x >= 2, np.maximum(x, 2.0) ** (-exponent), 0.0)


def _log_profile(x):
    xx = np.maximum(x, 2.0)
    return np.where(x >= 2, 1.0 / (xx * np.log(xx)), 0.0)


def _strip_indicator(L: int) -> np.ndarray:
    """Samples of the indicator of ``[0, 1/2)`` on ``L`` points, 1/2 at the two jumps."""
    h = np.zeros(L)
    h[: L // 2] = 1.0
    h[0] = h[L // 2] = 0.5
    return h


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(math.ceil(math.log2(max(n, 1)))))


def _multiply_rows(P: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Rows of Fourier coefficients (FFT order) multiplied by ``h`` in space."""
    L = P.shape[1]
    return np.fft.fft(np.fft.ifft(P, axis=1) * L * h[None, :], axis=1) / L


@dataclass
class BlowupRun:
    """Growth table of ``I(Lambda)`` at one resolution."""

    N: int
    cutoffs: list
    I: list
    increments: list
    control_I: list
    control_increments: list
    input_l2: float
    loglog_slope: float
    log_slopes: list

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("Lambda,I,increment\n")
            for lam, val, inc in zip(self.cutoffs, self.I, self.increments):
                fh.write(f"{lam},{val!r},{inc!r}\n")


@dataclass
class BlowupResult:
    case: str
    t: float
    phi_exponent: object
    runs: list
    verdicts: dict
    law: dict = field(default_factory=dict)

    def run(self, N: int) -> BlowupRun:
        for r in self.runs:
            if r.N == N:
                return r
        raise KeyError(N)

    def to_dict(self) -> dict:
        return asdict(self)


def _case_geometry(case: str, N: int, c: float, c_prime: float, phi, phi_band: int, oversample: int):
    """Input coefficients as rows along the multiplication axis plus output coordinates."""
    half = N // 2
    if case == "boundary-in-Cplus":
        # indicator in x2: rows are fixed k1, convolution runs along k2
        B = phi_band * N
        L = _next_pow2(oversample * (B + half))
        other = np.arange(-half, half)
        j = np.fft.fftfreq(L, 1.0 / L).round()
        J, O = np.meshgrid(j, other)
        P = np.where((J >= 2) & (J <= B) & (np.abs(O) <= c * J), phi(np.abs(J)), 0.0)
        return P, other, j, 1, L
    L = _next_pow2(oversample * N)
    other = np.arange(2, half)
    j = np.fft.fftfreq(L, 1.0 / L).round()
    J, O = np.meshgrid(j, other)
    if case == "boundary-in-Cminus":
        mask = np.abs(J) <= c * O
    else:
        mask = (J >= -O) & (J <= -O / 2)
    return np.where(mask, phi(O.astype(float)), 0.0), other, j, 0, L


def _target_mask(case: str, k1, k2, c_prime: float):
    if case == "boundary-outside":
        return (k1 >= k2 / 2) & (k1 <= k2) & (k2 > 0)
    return (np.abs(k2) <= c_prime * np.abs(k1)) & (k1 != 0)


def _growth(values_by_radius, weights0, weights, cutoffs):
    r = values_by_radius
    I = [float(np.sum(weights[r <= lam])) for lam in cutoffs]
    I0 = [float(np.sum(weights0[r <= lam])) for lam in cutoffs]
    return I, I0


def _blowup_run(case, t, N, c, c_prime, phi, phi_band, oversample, batch=32) -> BlowupRun:
    P, other, j, axis, L = _case_geometry(case, N, c, c_prime, phi, phi_band, oversample)
    half = N // 2
    keep = np.abs(j) <= half
    jk = j[keep]
    h = _strip_indicator(L)
    radii, w0 = [], []
    for start in range(0, P.shape[0], batch):
        rows = P[start:start + batch]
        out = _multiply_rows(rows, h)[:, keep]
        o = other[start:start + batch][:, None]
        k1, k2 = (np.broadcast_to(jk[None, :], out.shape), np.broadcast_to(o, out.shape)) if axis == 0 \
            else (np.broadcast_to(o, out.shape), np.broadcast_to(jk[None, :], out.shape))
        m = _target_mask(case, k1, k2, c_prime)
        radii.append(np.hypot(k1[m], k2[m]))
        w0.append(np.abs(out[m]) ** 2)
    r = np.concatenate(radii)
    a0 = np.concatenate(w0)
    a = a0 * (1.0 + r ** 2) ** t
    cutoffs = [2 ** e for e in range(3, int(math.log2(half)) + 1)]
    I, I0 = _growth(r, a0, a, cutoffs)
    inc = [I[0]] + list(np.diff(I))
    inc0 = [I0[0]] + list(np.diff(I0))
    logL = np.log(cutoffs)
    top = slice(-3, None)
    slope = float(np.polyfit(logL[top], np.log(np.maximum(I, 1e-300))[top], 1)[0]) if len(I) >= 3 else math.nan
    log_slopes = [float(d / math.log(2.0)) for d in inc[1:]]
    input_l2 = float(np.sqrt(np.sum(np.abs(P) ** 2)))
    return BlowupRun(N, cutoffs, I, [float(x) for x in inc], I0, [float(x) for x in inc0], input_l2,
                     slope, log_slopes)


def _case2_law(t: float, cutoffs) -> np.ndarray:
    from scipy.integrate import quad
    f = lambda x: x ** (2 * t - 1) / math.log(x) ** 2
    vals, acc = [], 0.0
    lo = 2.0
    for lam in cutoffs:
        acc += quad(f, lo, lam)[0]
        vals.append(acc)
        lo = lam
    return np.array(vals)


def halfplane_blowup_experiment(t: float, case, resolutions=(128, 256, 512), phi_exponent=1.25,
                                c: float = 0.5, c_prime: float = 0.5, phi_band: int = 8,
                                oversample: int = 16) -> BlowupResult:
    """Growth of ``I(Lambda) = sum_{xi in C'_+, |xi| <= Lambda} |F(1_E phi)(xi)|^2 (1+|xi|^2)^t``.

    ``phi`` has Fourier coefficients ``1_{C_-}(xi) f(xi_2)`` with
    ``f(x) = x^{-phi_exponent}`` for ``x >= 2`` (``phi_exponent="log"`` gives
    ``1/(x log x)``).  ``E`` is the strip ``{x_1 in [0, 1/2)}`` for the cases
    whose boundary is vertical and ``{x_2 in [0, 1/2)}`` for
    ``boundary-in-Cplus``; the product is formed on an oversampled grid along
    the multiplication axis.  Cases 1 and 2 use ``C_- = {|xi_1| <= c xi_2}``
    and ``C'_+ = {|xi_2| <= c' |xi_1|}``; case 3 uses
    ``C_- = {-xi_2 <= xi_1 <= -xi_2/2}`` and ``C'_+ = {xi_2/2 <= xi_1 <= xi_2}``.

    Cutoffs are ``Lambda = 2^j`` for ``j = 3..log2(N/2)``.  The ``t = 0``
    control is computed from the same coefficients.

    Raises:
        ValueError: for ``t < 0``, unknown cases or overlapping cones.
    """
    case = _case_name(case)
    if t < 0:
        raise ValueError("t must be >= 0")
    if case != "boundary-outside" and not (c > 0 and c_prime > 0 and c * c_prime < 1):
        raise ValueError(f"ill-configured cones: need c*c' < 1 so that C_- and C'_+ are disjoint (c={c}, c'={c_prime})")
    if phi_exponent == "log":
        phi = _log_profile
    else:
        phi = _power_profile(float(phi_exponent))
    for N in resolutions:
        if not is_power_of_two(N) or N < 32:
            raise ValueError(f"resolution must be a power of two >= 32, got {N}")
    runs = [_blowup_run(case, t, N, c, c_prime, phi, phi_band if case == "boundary-in-Cplus" else 1, oversample)
            for N in resolutions]
    verdicts = {}
    for run in runs:
        inc = np.array(run.increments)
        inc0 = np.array(run.control_increments)
        v = {
            "increasing": bool(np.all(inc[1:] > 0)),
            "diverges": bool(run.loglog_slope > DIVERGENCE_SLOPE),
            "control_decaying": bool(np.all(np.diff(inc0[1:]) < 0) and np.all(inc0[1:] > 0)),
        }
        a, b = run.log_slopes[-2], run.log_slopes[-1]
        v["log_slope_stable"] = bool(a > 0 and b > 0 and abs(b - a) <= 0.3 * max(a, b))
        verdicts[run.N] = v
    law = {}
    if case == "boundary-in-Cplus":
        for run in runs:
            lw = _case2_law(t, run.cutoffs)
            Lg = np.log(run.cutoffs)
            law_slope = float(np.polyfit(Lg[-3:], np.log(lw[-3:]), 1)[0])
            ratio_meas = run.increments[-1] / run.increments[-2]
            ratio_law = float((lw[-1] - lw[-2]) / (lw[-2] - lw[-3]))
            law[run.N] = {"law": lw.tolist(), "law_loglog_slope": law_slope,
                          "increment_ratio": float(ratio_meas), "law_increment_ratio": ratio_law}
            verdicts[run.N]["law_consistent"] = bool(abs(ratio_meas - ratio_law) <= 0.5 * ratio_law)
    return BlowupResult(case, float(t), phi_exponent, runs, verdicts, law)


@dataclass(frozen=True)
class HalfPlane:
    """Periodic half-plane ``E = {x : frac(w . x - start) < width}`` for an integer direction ``w``.

    ``width >= 1`` is the whole torus.
    """

    direction: tuple = (1, 0)
    start: float = 0.0
    width: float = 0.5

    def __post_init__(self):
        w = tuple(int(v) for v in self.direction)
        if w == (0, 0) or any(float(a) != float(b) for a, b in zip(w, self.direction)):
            raise ValueError("half-plane direction must be a nonzero integer vector")
        if not self.width > 0:
            raise ValueError("half-plane width must be positive")
        object.__setattr__(self, "direction", w)

    @property
    def full(self) -> bool:
        return self.width >= 1

    def boundary_direction(self) -> np.ndarray:
        w = np.array(self.direction, dtype=float)
        return np.array([-w[1], w[0]]) / np.hypot(*w)

    def samples(self, M: int) -> np.ndarray:
        """Indicator on the ``M x M`` grid, 1/2 on points of the boundary."""
        if self.full:
            return np.ones((M, M))
        u = np.arange(M) / M
        X1, X2 = np.meshgrid(u, u, indexing="ij")
        s = np.mod(self.direction[0] * X1 + self.direction[1] * X2 - self.start, 1.0)
        h = (s < self.width).astype(float)
        edge = np.isclose(s, 0.0, atol=1e-12) | np.isclose(s, self.width, atol=1e-12) | np.isclose(s, 1.0, atol=1e-12)
        h[edge] = 0.5
        return h


def indicator_multiply(field: FourierField, E: HalfPlane, oversample: int = 4) -> FourierField:
    """``1_E * field`` formed on an oversampled grid and truncated back to the field's box."""
    if E.full:
        return FourierField(field.coeffs.copy())
    M = field.N * oversample
    prod = FourierField.from_samples(field.samples(oversample) * E.samples(M))
    return prod.resample(field.N)


def leaf_transversality(E: HalfPlane, leaves, samples: int = 256) -> float:
    """Smallest ``|sin|`` of the angle between the boundary of ``E`` and the leaf tangents."""
    b = E.boundary_direction()
    worst = 1.0
    for leaf in leaves:
        x = np.linspace(*leaf.interval, samples)
        d = leaf.gamma(x, 1)
        sin = np.abs(b[0] * d - b[1]) / np.sqrt(1.0 + d ** 2)
        worst = min(worst, float(sin.min()))
    return worst


@dataclass
class ProbeReport:
    """Ratios ``||1_E phi|| / ||phi||`` for each probe and resolution."""

    rows: list
    plateau: dict
    transversality: float
    halfplane: dict

    def to_dict(self) -> dict:
        return asdict(self)


def indicator_multiplier_probe(probes, params: AnisoParams, E: HalfPlane, leaves, resolutions=(64, 128, 256),
                               chi=None, cones: ConeSystem | None = None, oversample: int = 4,
                               plateau_tol: float = 0.1) -> ProbeReport:
    """Measure how multiplication by ``1_E`` acts on the leafwise norm across resolutions.

    ``probes`` is a list of ``(probe_id, func)`` with ``func(x1, x2)`` a
    smooth periodic function sampled at each resolution.  Each row holds
    ``(probe_id, N, u_norm(phi), u_norm(1_E phi), ratio, w_ratio)`` where
    ``w_ratio`` is the same ratio for ``w_dagger_norm`` with ``v = s`` and
    ``p = 2``, given for contrast when ``cones`` is set.  A probe plateaus
    when its last two ratios differ by at most ``plateau_tol`` relatively.
    Nothing is asserted about the outcome.
    """
    from .spectral import build_filter_bank
    params.check_probe_window()
    rows = []
    for N in sorted(resolutions):
        bank = build_filter_bank(N, chi)
        for pid, func in probes:
            phi = FourierField.from_function(func, N)
            prod = indicator_multiply(phi, E, oversample)
            a = u_norm(phi, params, leaves, bank).value
            b = u_norm(prod, params, leaves, bank).value
            w = math.nan
            if cones is not None:
                wa = w_dagger_norm(phi, cones, params.t, params.s, 2.0)
                w = w_dagger_norm(prod, cones, params.t, params.s, 2.0) / wa if wa > 0 else math.nan
            rows.append((pid, N, a, b, b / a if a > 0 else math.nan, w))
    plateau = {}
    for pid, _ in probes:
        r = [row[4] for row in rows if row[0] == pid]
        plateau[pid] = bool(len(r) >= 2 and abs(r[-1] - r[-2]) <= plateau_tol * abs(r[-2]))
    return ProbeReport(rows, plateau, leaf_transversality(E, leaves), asdict(E))
