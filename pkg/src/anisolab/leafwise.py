"""Admissible leaves, traces of fields on leaves and the leafwise Besov norm.

A leaf is the graph ``x2 = gamma(x1)`` over a chart interval ``[a, b]`` of
the stable (first) coordinate, with

    gamma(x) = offset + slope * x + sum_j (A_j cos 2 pi f_j x + B_j sin 2 pi f_j x).

Traces are sampled on ``M`` uniform chart nodes, multiplied by a smooth end
window and analysed with one-dimensional dyadic filters in the chart
variable.  Chart frequencies are measured in cycles per unit of ``x``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .spectral import ChiProfile, ConeSystem, FourierField, line_distance, evaluate_series

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class AdmissibleLeaf:
    """Graph of a trigonometric-plus-affine function over a chart interval.

    ``terms`` holds ``(f, A, B)`` triples; ``window_fraction`` is the length
    of each end ramp of the window relative to the interval.
    """

    interval: tuple[float, float] = (0.0, 1.0)
    offset: float = 0.0
    slope: float = 0.0
    terms: tuple = ()
    leaf_id: str = "leaf"
    window_fraction: float = 0.1

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        if not b > a:
            raise ValueError("chart interval must have positive length")
        if not 0 < self.window_fraction < 0.5:
            raise ValueError("window_fraction must lie in (0, 0.5)")
        object.__setattr__(self, "interval", (a, b))
        object.__setattr__(self, "terms", tuple((float(f), float(A), float(B)) for f, A, B in self.terms))

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    def gamma(self, x, order: int = 0) -> np.ndarray:
        """``gamma`` or its derivative of the given order at chart points ``x``."""
        x = np.asarray(x, dtype=float)
        if order == 0:
            out = self.offset + self.slope * x
        elif order == 1:
            out = np.full_like(x, self.slope)
        else:
            out = np.zeros_like(x)
        for f, A, B in self.terms:
            w = TWO_PI * f
            ph = w * x
            # d^j/dx^j of cos/sin cycles through the four phases
            c = np.cos(ph + order * np.pi / 2)
            s = np.sin(ph + order * np.pi / 2)
            out = out + w ** order * (A * c + B * s)
        return out

    def points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([x, self.gamma(x)], axis=-1)

    def translated(self, v, leaf_id: str | None = None) -> "AdmissibleLeaf":
        """The leaf shifted by ``v`` in the torus."""
        dx, dy = float(v[0]), float(v[1])
        terms = []
        for f, A, B in self.terms:
            th = TWO_PI * f * dx
            terms.append((f, A * math.cos(th) - B * math.sin(th), A * math.sin(th) + B * math.cos(th)))
        a, b = self.interval
        return replace(self, interval=(a + dx, b + dx), offset=self.offset + dy - self.slope * dx,
                       terms=tuple(terms), leaf_id=leaf_id or self.leaf_id)

    def cr_proxy(self, r: float, samples: int = 2048) -> float:
        """``max_{1 <= j <= ceil(r)} sup |gamma^{(j)}|`` on the chart."""
        x = np.linspace(self.interval[0], self.interval[1], samples)
        top = max(1, int(math.ceil(r))) if math.isfinite(r) else 8
        return float(max(np.max(np.abs(self.gamma(x, j))) for j in range(1, top + 1)))

    def window(self, x, chi: ChiProfile | None = None) -> np.ndarray:
        """Smooth window equal to 1 away from the end ramps and 0 at the ends."""
        chi = chi or ChiProfile()
        u = (np.asarray(x, dtype=float) - self.interval[0]) / self.length
        w = self.window_fraction
        return chi.step(u / w) * chi.step((1.0 - u) / w)

    def to_dict(self) -> dict:
        return {"id": self.leaf_id, "interval": list(self.interval), "offset": self.offset,
                "slope": self.slope, "terms": [list(t) for t in self.terms],
                "window_fraction": self.window_fraction}

    @classmethod
    def from_dict(cls, d: dict) -> "AdmissibleLeaf":
        return cls(tuple(d.get("interval", (0.0, 1.0))), float(d.get("offset", 0.0)),
                   float(d.get("slope", 0.0)), tuple(tuple(t) for t in d.get("terms", ())),
                   str(d.get("id", "leaf")), float(d.get("window_fraction", 0.1)))


def stable_line_leaf(tmap, offset: float = 0.0, interval=(0.0, 1.0), leaf_id: str = "stable") -> AdmissibleLeaf:
    """Straight leaf along the stable eigendirection of the map's linear part."""
    _, _, _, vs = tmap.eigen_data()
    return AdmissibleLeaf(tuple(interval), offset, float(vs[1] / vs[0]), (), leaf_id)


@dataclass
class LeafValidation:
    passed: bool
    margin: float
    cr_proxy: float
    chord_ok: bool
    regularity_ok: bool
    reason: str = ""


def _chord_sample(leaf: AdmissibleLeaf, depth: int = 6) -> np.ndarray:
    """Endpoints plus dyadic midpoints of the chart interval."""
    return np.linspace(leaf.interval[0], leaf.interval[1], 2 ** depth + 1)


def validate_leaf(leaf: AdmissibleLeaf, cone: ConeSystem, r: float | None = None,
                  c_f: float | None = None, depth: int = 6) -> LeafValidation:
    """Chord condition against the plus cone and the C^r proxy bound.

    The normal of every sampled chord (and of the tangent at every sample
    point) must lie in the plus cone; ``margin`` is the smallest angular
    depth of those normals inside the cone.  The regularity bound is only
    checked when both ``r`` and ``c_f`` are given.
    """
    x = _chord_sample(leaf, depth)
    y = leaf.gamma(x)
    i, j = np.triu_indices(len(x), 1)
    dx, dy = x[j] - x[i], y[j] - y[i]
    normals = np.arctan2(dx, -dy)
    tang = leaf.gamma(x, 1)
    normals = np.concatenate([normals, np.arctan2(np.ones_like(tang), -tang)])
    margin = float(np.min(cone.half_plus - line_distance(normals, cone.axis_plus)))
    chord_ok = margin > 0
    proxy = leaf.cr_proxy(r if r is not None else 2.0)
    reg_ok = True
    if r is not None and c_f is not None:
        reg_ok = proxy <= c_f
    reason = []
    if not chord_ok:
        reason.append(f"chord normal leaves the plus cone by {-margin:.4g} rad")
    if not reg_ok:
        reason.append(f"C^r proxy {proxy:.4g} exceeds bound {c_f}")
    return LeafValidation(chord_ok and reg_ok, margin, proxy, chord_ok, reg_ok, "; ".join(reason))


@dataclass
class LeafFamily:
    """Generators of a leaf family together with its sampling rules."""

    cone: ConeSystem
    generators: list
    c_f: float | None = None
    r: float | None = None
    perturbation: float = 0.0
    max_retries: int = 20


def sample_leaf_family(family: LeafFamily, count: int, seed=0) -> list:
    """Seeded translations (and optional small perturbations) of the generators.

    With ``count=1`` and no perturbation the first generator is returned
    unchanged.  Candidates failing :func:`validate_leaf` are redrawn.
    """
    if count == 1 and family.perturbation == 0:
        return [family.generators[0]]
    rng = np.random.default_rng(seed)
    leaves = []
    for i in range(count):
        gen = family.generators[i % len(family.generators)]
        for _attempt in range(family.max_retries):
            v = rng.random(2)
            cand = gen.translated(v, leaf_id=f"{gen.leaf_id}#{i}")
            if family.perturbation > 0:
                f = float(rng.integers(1, 4))
                A, B = family.perturbation * rng.uniform(-1, 1, size=2)
                cand = replace(cand, terms=cand.terms + ((f, A, B),))
            if validate_leaf(cand, family.cone, family.r, family.c_f).passed:
                leaves.append(cand)
                break
        else:
            raise RuntimeError(f"could not sample a valid leaf from generator {gen.leaf_id}")
    return leaves


@dataclass
class LeafRestriction:
    """Windowed trace of a field on ``M`` uniform chart nodes of a leaf."""

    leaf: AdmissibleLeaf
    x: np.ndarray
    samples: np.ndarray
    window: np.ndarray
    weights: np.ndarray
    chi: ChiProfile = field(default_factory=ChiProfile)

    @property
    def M(self) -> int:
        return len(self.x)

    @property
    def dx(self) -> float:
        return self.leaf.length / self.M

    @property
    def n_max(self) -> int:
        """Largest full 1-D level: ``2^{n+1} <= M / (2 L)``."""
        return max(0, int(math.floor(math.log2(self.M / (2.0 * self.leaf.length)))) - 1)

    @property
    def tail_level(self) -> int:
        return self.n_max + 1

    def with_samples(self, samples) -> "LeafRestriction":
        return replace(self, samples=np.asarray(samples, dtype=complex))

    def frequencies(self) -> np.ndarray:
        return np.fft.fftfreq(self.M, d=self.dx)


def chart_nodes(leaf: AdmissibleLeaf, M: int) -> np.ndarray:
    return leaf.interval[0] + leaf.length * np.arange(M) / M


def default_leaf_resolution(field_N: int, leaf: AdmissibleLeaf) -> int:
    """Power of two ``M >= N`` resolving the chart frequencies of a band-``N`` field."""
    x = np.linspace(leaf.interval[0], leaf.interval[1], 257)
    stretch = 1.0 + float(np.max(np.abs(leaf.gamma(x, 1))))
    need = 2.0 * leaf.length * (field_N / 2) * stretch * 1.25 + 16
    M = max(field_N, 16)
    while M < need:
        M *= 2
    return M


def restrict_to_leaf(field: FourierField, leaf: AdmissibleLeaf, M: int | None = None,
                     chi: ChiProfile | None = None) -> LeafRestriction:
    """Sample a field along a leaf and apply the end window.

    Raises:
        ValueError: if ``M < N``.
    """
    if M is None:
        M = default_leaf_resolution(field.N, leaf)
    if M < field.N:
        raise ValueError(f"leaf resolution M={M} must be at least the field resolution N={field.N}")
    chi = chi or ChiProfile()
    x = chart_nodes(leaf, M)
    w = leaf.window(x, chi)
    vals = evaluate_series(field, np.mod(leaf.points(x), 1.0))
    weights = np.sqrt(1.0 + leaf.gamma(x, 1) ** 2)
    return LeafRestriction(leaf, x, vals * w, w, weights, chi)


def restriction_from_samples(leaf: AdmissibleLeaf, values, chi: ChiProfile | None = None,
                             windowed: bool = True) -> LeafRestriction:
    """Build a restriction from raw trace values on the chart nodes."""
    chi = chi or ChiProfile()
    values = np.asarray(values, dtype=complex)
    x = chart_nodes(leaf, len(values))
    w = leaf.window(x, chi)
    weights = np.sqrt(1.0 + leaf.gamma(x, 1) ** 2)
    return LeafRestriction(leaf, x, values * w if windowed else values, w, weights, chi)


def chart_symbol(restriction: LeafRestriction, level: int) -> np.ndarray:
    """One-dimensional dyadic symbol of a level on the chart frequency grid."""
    eta = np.abs(restriction.frequencies())
    chi = restriction.chi
    n1 = restriction.n_max
    if level == n1 + 1:
        return 1.0 - chi(eta * 2.0 ** -n1)
    if not 0 <= level <= n1:
        raise ValueError(f"chart level {level} outside 0..{n1 + 1}")
    if level == 0:
        return chi(eta)
    return chi(eta * 2.0 ** -level) - chi(eta * 2.0 ** -(level - 1))


def leafwise_filter(restriction: LeafRestriction, level: int) -> np.ndarray:
    """Apply the 1-D dyadic multiplier of ``level`` in the leaf chart."""
    spec = np.fft.fft(restriction.samples)
    return np.fft.ifft(spec * chart_symbol(restriction, level))


def leaf_lp_norm(restriction: LeafRestriction, values, p: float) -> float:
    """``L_p`` norm on the leaf with arclength quadrature weights."""
    a = np.abs(values)
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    return float(np.sum(a ** p * restriction.weights) * restriction.dx) ** (1.0 / p)


def leafwise_levels(restriction: LeafRestriction, s: float, p: float) -> np.ndarray:
    """``2^{l s} ||psi_l^{Op} trace||_{L_p}`` for every chart level ``l``."""
    spec = np.fft.fft(restriction.samples)
    out = []
    for lv in range(restriction.tail_level + 1):
        vals = np.fft.ifft(spec * chart_symbol(restriction, lv))
        out.append(2.0 ** (lv * s) * leaf_lp_norm(restriction, vals, p))
    return np.array(out)


def leafwise_besov_norm(restriction: LeafRestriction, s: float, p: float, q: float = math.inf) -> float:
    """Leafwise Besov norm ``(sum_l (2^{l s} ||psi_l trace||_{L_p(mu)})^q)^{1/q}``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    terms = leafwise_levels(restriction, s, p)
    if math.isinf(q):
        return float(terms.max())
    return float(np.sum(terms ** q) ** (1.0 / q))


def write_leaf_table(rows, path) -> None:
    """Per-leaf norm rows ``(leaf_id, level, value)`` as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["leaf_id", "level", "value"])
        for r in rows:
            w.writerow([r[0], int(r[1]), repr(float(r[2]))])
