"""Transfer operators ``L_g phi = (g phi) o T^{-1}`` on the torus.

Grid actions, Galerkin matrices over Fourier modes, spectra, cone
hyperbolicity constants of inverse branches, the bounded/compact splitting
driven by the hook relation, and Lasota-Yorke bounds versus measured growth.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .norms import AnisoParams, cone_dyadic_symbol, leaf_level_table, u_norm
from .spectral import (ConeSystem, FilterBank, FourierField, SparseField, cone_dyadic_symbols,
                       evaluate_series, frequency_grid, wavenumbers)
from .torus import TorusMap, Weight, inverse_point, jacobian

TWO_PI = 2.0 * np.pi


class AliasingWarning(UserWarning):
    """The grid used for a transfer step was too coarse for the output spectrum."""


@dataclass
class TransferDiagnostics:
    """``escaped_fraction`` is the output energy share dropped by the box projection."""

    method: str
    grid: int
    escaped_fraction: float = 0.0


def _next_pow2(n: float) -> int:
    return 1 << max(0, int(math.ceil(math.log2(max(n, 1)))))


def _inverse_linear(tmap: TorusMap) -> np.ndarray:
    """Integer inverse of the linear part."""
    (a, b), (c, d) = tmap.linear_part
    det = a * d - b * c
    return np.array([[d, -b], [-c, a]], dtype=np.int64) * det


def _bessel_order(a: float, tol: float) -> int:
    """Smallest ``m >= a`` with the Bessel tail bound ``(e a / 2m)^m / sqrt(2 pi m)`` below ``tol``."""
    m = max(1, int(math.ceil(a)))
    while (math.e * a / (2 * m)) ** m / math.sqrt(TWO_PI * m) >= tol:
        m += 1
    return m


def _spread(tmap: TorusMap, band: float, tol: float = 1e-10) -> int:
    """Sup-norm width by which the perturbation smears the image of modes ``|k|_inf <= band``.

    ``exp(2 pi i k . T^{-1} y)`` is ``exp(2 pi i A^{-T}k . y)`` times
    ``exp(-2 pi i eps A^{-T}k . h(T^{-1} y))``; the second factor is a
    Bessel series whose terms beyond the returned width are below ``tol``.
    """
    if tmap.is_linear:
        return 0
    Ainv = _inverse_linear(tmap).astype(float)
    corners = np.array([[band, band], [band, -band], [-band, band], [-band, -band]]) @ Ainv
    a = 0.0
    w = 0.0
    for term in tmap.terms:
        c = np.abs(np.array(term.coeff, dtype=complex))
        a = max(a, float(np.max(np.abs(corners) @ c)))
        w = max(w, float(np.max(np.abs(np.array(term.freq) @ Ainv))))
    a *= TWO_PI * tmap.epsilon * len(tmap.terms)
    return int(math.ceil(max(w, 1.0) * (_bessel_order(a, tol) - 1)))


def transfer_grid(tmap: TorusMap, band: int, box: int, tol: float = 1e-10) -> int:
    """Grid size free of aliasing (above ``tol``) into ``|j| <= box`` for inputs ``|k|_inf <= band``."""
    return _next_pow2(_image_band(tmap, band, tol) + box + 1)


def _image_band(tmap: TorusMap, band: int, tol: float = 1e-10) -> int:
    Ainv = np.abs(_inverse_linear(tmap)).sum(axis=1).max()
    return int(Ainv * band + _spread(tmap, band, tol))


def _grid_points(M: int) -> np.ndarray:
    u = np.arange(M) / M
    Y1, Y2 = np.meshgrid(u, u, indexing="ij")
    return np.stack([Y1.ravel(), Y2.ravel()], axis=1)


def _outside_box_fraction(C: np.ndarray, box: int) -> float:
    """Energy share of a grid transform outside ``|j|_inf <= box``."""
    M = C.shape[0]
    k = np.abs(wavenumbers(M))
    outer = np.maximum.outer(k, k) > box
    tot = np.sum(np.abs(C) ** 2)
    return float(np.sum(np.abs(C[outer]) ** 2) / tot) if tot > 0 else 0.0


def _permute_modes(tmap: TorusMap, modes: np.ndarray) -> np.ndarray:
    """``k -> A^{-T} k``, the frequency action of composition with ``A^{-1}``."""
    return modes @ _inverse_linear(tmap)


def apply_transfer(field, tmap: TorusMap, g: Weight | None = None, grid: int | None = None,
                   alias_tol: float = 1e-12, diagnostics: bool = False):
    """``(L_g phi)(y) = g(T^{-1} y) phi(T^{-1} y)``, projected to the field's box.

    Linear maps with a constant weight act exactly by permuting modes;
    modes leaving the box are dropped (their energy share is reported).
    Otherwise the field is interpolated at ``T^{-1}`` of a uniform grid
    large enough that wrapped content stays below ``alias_tol`` inside the
    box, multiplied by ``g`` and transformed back.  The diagnostics report
    the energy share that falls outside the box.  Sparse fields are only
    accepted on the exact path.

    Warns:
        AliasingWarning: if an explicit ``grid`` is below the aliasing-free size.
    """
    g = g or Weight()
    if tmap.is_linear and g.is_constant_on(tmap):
        c = g.constant_value(tmap)
        if isinstance(field, SparseField):
            out = SparseField(field.N, _permute_modes(tmap, field.modes), field.values * c)
            diag = TransferDiagnostics("exact-linear", 0, 0.0)
            return (out, diag) if diagnostics else out
        N = field.N
        modes, vals = field.support()
        new = _permute_modes(tmap, modes)
        inside = np.all((new >= -N // 2) & (new < N // 2), axis=1)
        C = np.zeros((N, N), dtype=complex)
        C[new[inside, 0] % N, new[inside, 1] % N] = vals[inside] * c
        tot = np.sum(np.abs(vals) ** 2)
        esc = float(np.sum(np.abs(vals[~inside]) ** 2) / tot) if tot > 0 else 0.0
        out = FourierField(C)
        diag = TransferDiagnostics("exact-linear", N, esc)
        return (out, diag) if diagnostics else out
    if isinstance(field, SparseField):
        raise ValueError("sparse fields are only supported for linear maps with constant weight")
    N = field.N
    modes, vals = field.support()
    if len(vals) == 0:
        out = FourierField.zeros(N)
        return (out, TransferDiagnostics("grid", 0)) if diagnostics else out
    band = int(np.max(np.abs(modes)))
    need = max(N, transfer_grid(tmap, band, N // 2, alias_tol))
    M = grid or need
    if M < need:
        warnings.warn(f"transfer grid {M} below the aliasing-free size {need}", AliasingWarning, stacklevel=2)
    Y = _grid_points(M)
    X = inverse_point(tmap, Y)
    vals_x = evaluate_series(field, X) * g.evaluate(tmap, X)
    Cg = np.fft.fft2(vals_x.reshape(M, M)) / (M * M)
    frac = _outside_box_fraction(Cg, N // 2)
    h = N // 2
    idx = np.r_[0:h, -h:0]
    out = FourierField(Cg[np.ix_(idx % M, idx % M)])
    diag = TransferDiagnostics("grid", M, frac)
    return (out, diag) if diagnostics else out


def apply_transfer_power(field, tmap: TorusMap, g: Weight | None, m: int, **kw):
    """``L_g^m`` as ``m`` successive projected applications."""
    out = field
    for _ in range(m):
        out = apply_transfer(out, tmap, g, **kw)
    return out


def apply_iterate_operator(field: FourierField, tmap: TorusMap, g: Weight | None, m: int,
                           grid: int | None = None) -> FourierField:
    """Transfer operator of ``T^m`` with the cocycle weight, in a single grid step.

    ``(L^m phi)(y) = prod_{j=1..m} g(T^{-j} y) * phi(T^{-m} y)``.
    """
    g = g or Weight()
    N = field.N
    modes, _ = field.support()
    band = int(np.max(np.abs(modes))) if len(modes) else 1
    if grid is None:
        b = band
        for _ in range(m):
            b = _image_band(tmap, b)
        grid = max(N, _next_pow2(b + N // 2 + 1))
    Y = _grid_points(grid)
    X = Y
    w = np.ones(len(Y), dtype=complex)
    for _ in range(m):
        X = inverse_point(tmap, X)
        w = w * g.evaluate(tmap, X)
    Cg = np.fft.fft2((evaluate_series(field, X) * w).reshape(grid, grid)) / grid ** 2
    h = N // 2
    idx = np.r_[0:h, -h:0]
    return FourierField(Cg[np.ix_(idx % grid, idx % grid)])


# -- Galerkin matrices -------------------------------------------------------

def galerkin_modes(K: int) -> np.ndarray:
    """Modes ``|k|_inf <= K`` with ``k1`` as the slow index."""
    r = np.arange(-K, K + 1)
    K1, K2 = np.meshgrid(r, r, indexing="ij")
    return np.stack([K1.ravel(), K2.ravel()], axis=1)


def mode_index(K: int, k) -> int:
    return (int(k[0]) + K) * (2 * K + 1) + int(k[1]) + K


@dataclass
class GalerkinMatrix:
    """``matrix[i, j] = <e_{k_i}, L_g e_{k_j}>`` over the modes of :func:`galerkin_modes`."""

    K: int
    matrix: object
    grid: int
    drop_tol: float

    @property
    def dim(self) -> int:
        return (2 * self.K + 1) ** 2

    @property
    def is_sparse(self) -> bool:
        return scipy.sparse.issparse(self.matrix)

    @property
    def modes(self) -> np.ndarray:
        return galerkin_modes(self.K)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def column(self, k) -> np.ndarray:
        j = mode_index(self.K, k)
        if self.is_sparse:
            return self.matrix[:, [j]].toarray().ravel()
        return np.asarray(self.matrix[:, j])

    def to_matrix_market(self, path) -> None:
        scipy.io.mmwrite(str(path), scipy.sparse.coo_matrix(self.matrix),
                         comment=f"Galerkin transfer matrix, K={self.K}, modes k1-major")

    def to_binary(self, path) -> None:
        """Header ``b"AGAL"``, ``<II`` (K, dim), then dense ``<c16`` row-major data."""
        with open(path, "wb") as fh:
            fh.write(b"AGAL")
            fh.write(np.array([self.K, self.dim], dtype="<u4").tobytes())
            fh.write(np.ascontiguousarray(self.dense(), dtype="<c16").tobytes())


def read_galerkin_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != b"AGAL":
            raise ValueError("not a Galerkin matrix file")
        K, dim = np.frombuffer(fh.read(8), dtype="<u4")
        return np.frombuffer(fh.read(), dtype="<c16").reshape(int(dim), int(dim)).copy()


def assemble_matrix(tmap: TorusMap, g: Weight | None, K: int, grid: int | None = None,
                    drop_tol: float = 1e-14, alias_tol: float = 1e-10, dense_limit: int = 4096, batch: int = 32,
                    memory_limit: float = 4e9) -> GalerkinMatrix:
    """Galerkin matrix of ``L_g`` on modes ``|k|_inf <= K``, built column by column.

    Column ``j`` is the grid transform of ``g(T^{-1} y) exp(2 pi i k_j . T^{-1} y)``
    restricted to the box.  Entries below ``drop_tol`` are set to zero.  The
    result is dense up to ``dense_limit`` modes and CSR above.

    Raises:
        MemoryError: if the estimated storage exceeds ``memory_limit`` bytes.
    """
    g = g or Weight()
    dim = (2 * K + 1) ** 2
    need = transfer_grid(tmap, K, K, alias_tol)
    M = grid or need
    if M < need:
        warnings.warn(f"Galerkin grid {M} below the aliasing-free size {need}", AliasingWarning, stacklevel=2)
    dense = dim <= dense_limit
    est = dim * dim * 16 if dense else dim * (_spread(tmap, K) + 8) * 24
    est += (2 * K + 1 + 3 * batch) * M * M * 16
    if est > memory_limit:
        raise MemoryError(f"Galerkin assembly for K={K} needs about {est / 1e9:.1f} GB")
    Y = _grid_points(M)
    X = inverse_point(tmap, Y)
    gx = g.evaluate(tmap, X).reshape(M, M)
    r = np.arange(-K, K + 1)
    # exp(2 pi i k2 x2) for every k2; the k1 factor is formed per batch
    Z2 = np.exp(1j * TWO_PI * np.outer(r, X[:, 1])).reshape(2 * K + 1, M, M)
    z1 = {}
    modes = galerkin_modes(K)
    box = np.ix_(r % M, r % M)
    out = np.zeros((dim, dim), dtype=complex) if dense else None
    rows, cols, data = [], [], []
    for s in range(0, dim, batch):
        ks = modes[s:s + batch]
        z1 = {k1: z1[k1] if k1 in z1 else gx * np.exp(1j * TWO_PI * k1 * X[:, 0]).reshape(M, M)
              for k1 in np.unique(ks[:, 0])}
        V = np.stack([z1[k1] for k1 in ks[:, 0]]) * Z2[ks[:, 1] + K]
        Cg = np.fft.fft2(V, axes=(1, 2)) / (M * M)
        block = Cg[:, box[0], box[1]].reshape(len(ks), dim)
        block[np.abs(block) < drop_tol] = 0.0
        if dense:
            out[:, s:s + len(ks)] = block.T
        else:
            bi, bj = np.nonzero(block)
            rows.append(bj)
            cols.append(bi + s)
            data.append(block[bi, bj])
    if not dense:
        out = scipy.sparse.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                                      shape=(dim, dim))
    return GalerkinMatrix(K, out, M, drop_tol)


def _residuals(A, w, V) -> np.ndarray:
    return np.linalg.norm(A @ V - V * w[None, :], axis=0) / np.maximum(np.linalg.norm(V, axis=0), 1e-300)


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    method: str
    converged: np.ndarray
    eigenvectors: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {"eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
                "modulus": [float(abs(z)) for z in self.eigenvalues],
                "residuals": [float(r) for r in self.residuals],
                "converged": [bool(c) for c in self.converged],
                "method": self.method}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def spectrum(matrix, how_many: int = 10, vectors: bool = False, dense_limit: int = 4096,
             tol: float = 1e-12, residual_tol: float = 1e-8) -> SpectrumResult:
    """Eigenvalues of largest modulus with residual norms ``|A v - lambda v| / |v|``.

    Dense QR iteration up to ``dense_limit`` rows, restarted Arnoldi above.
    Eigenpairs whose residual exceeds ``residual_tol`` are marked unconverged.
    """
    A = matrix.matrix if isinstance(matrix, GalerkinMatrix) else matrix
    n = A.shape[0]
    if n <= dense_limit:
        Ad = A.toarray() if scipy.sparse.issparse(A) else np.asarray(A)
        w, V = scipy.linalg.eig(Ad)
        method = "dense"
    else:
        k = min(how_many, n - 2)
        v0 = np.ones(n) / math.sqrt(n) + 1e-3 * np.cos(np.arange(n))
        try:
            w, V = scipy.sparse.linalg.eigs(A, k=k, which="LM", v0=v0, tol=tol,
                                            ncv=max(2 * k + 1, 40), maxiter=20 * n)
        except scipy.sparse.linalg.ArpackNoConvergence as err:
            w, V = err.eigenvalues, err.eigenvectors
        method = "arnoldi"
    order = np.argsort(-np.abs(w), kind="stable")[:how_many]
    w, V = w[order], V[:, order]
    res = _residuals(A, w, V)
    if method == "dense":
        # back-substituted eigenvectors can lose accuracy in single entries;
        # one shifted inverse-iteration step restores them
        for i in np.nonzero(res > residual_tol * np.maximum(1.0, np.abs(w)))[0]:
            shift = w[i] + 1e-10 * max(1.0, abs(w[i]))
            x = scipy.linalg.solve(Ad - shift * np.eye(n), V[:, i])
            V[:, i] = x / np.linalg.norm(x)
        res = _residuals(A, w, V)
    return SpectrumResult(w, res, method, res <= residual_tol * np.maximum(1.0, np.abs(w)),
                          V if vectors else None)


# -- cone hyperbolicity ------------------------------------------------------

@dataclass
class ConeHyperbolicityStats:
    """Transpose-derivative stretch constants of a local map ``F`` between cone systems."""

    norm_plus: float
    norm_minus: float
    norm_minusminus: float
    det_restricted: float
    invariant: bool
    invariance_margin: float
    samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def _closed_arc(start: float, length: float, n: int) -> np.ndarray:
    return start + length * np.linspace(0.0, 1.0, n)


def _unit(theta) -> np.ndarray:
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def branch_jacobians(branch, grid: int = 8) -> np.ndarray:
    """Jacobians of a local map sampled on a ``grid x grid`` lattice.

    ``branch`` is a :class:`TorusMap` (the inverse branch ``T^{-1}`` is
    used), a constant 2x2 matrix, or a callable mapping points (P, 2) to
    Jacobians (P, 2, 2).
    """
    if isinstance(branch, TorusMap):
        Y = _grid_points(grid)
        return np.linalg.inv(jacobian(branch, inverse_point(branch, Y)))
    if callable(branch):
        return np.asarray(branch(_grid_points(grid)), dtype=float)
    return np.asarray(branch, dtype=float).reshape(1, 2, 2)


def cone_stats(branch, cones: ConeSystem, cones_prime: ConeSystem | None = None, grid: int = 8,
               n_angles: int = 721) -> ConeHyperbolicityStats:
    """Extremal stretch factors of ``DF^T`` outside the respective cones.

    ``norm_plus`` is the sup of ``|DF^T xi|/|xi|`` over ``xi`` with
    ``DF^T xi`` outside the interior of the primed minus cone,
    ``norm_minus``/``norm_minusminus`` the inf/sup over ``xi`` outside the
    interior of the plus cone, and ``det_restricted`` the inf of ``|DF u|``
    over unit ``u`` normal to a direction of the primed plus cone.  Angles
    are sampled on closed arcs, so cone boundaries are included.
    """
    cp = cones_prime or cones
    J = branch_jacobians(branch, grid)
    JT = np.transpose(J, (0, 2, 1))
    # outputs eta outside C'_-: ratio |eta| / |J^{-T} eta|
    eta = _unit(_closed_arc(cp.axis_minus + cp.half_minus, np.pi - 2 * cp.half_minus, n_angles))
    pre = np.linalg.solve(JT[:, None], eta[None, :, :, None])[..., 0]
    norm_plus = float(np.max(1.0 / np.linalg.norm(pre, axis=-1)))
    # inputs xi outside C_+
    xi = _unit(_closed_arc(cones.axis_plus + cones.half_plus, np.pi - 2 * cones.half_plus, n_angles))
    img = np.einsum("gij,aj->gai", JT, xi)
    st = np.linalg.norm(img, axis=-1)
    ang = np.arctan2(img[..., 1], img[..., 0])
    margin = float(np.min(cp.margin_minus(ang)))
    # lines normal to C'_+
    nrm = _closed_arc(cp.axis_plus - cp.half_plus, 2 * cp.half_plus, n_angles)
    u = _unit(nrm + np.pi / 2)
    det = float(np.min(np.linalg.norm(np.einsum("gij,aj->gai", J, u), axis=-1)))
    return ConeHyperbolicityStats(float(norm_plus), float(st.min()), float(st.max()), det,
                                  margin > 0, margin, len(J) * n_angles)


def _sign(s: str) -> str:
    s = s.replace("−", "-")
    if s not in ("+", "-"):
        raise ValueError(f"cone label must be '+' or '-', got {s!r}")
    return s


def hook_relation(ell: int, tau: str, n: int, sigma: str, stats: ConeHyperbolicityStats, m0: int) -> bool:
    """Whether the input block ``(ell, tau)`` hooks into the output block ``(n, sigma)``."""
    tau, sigma = _sign(tau), _sign(sigma)
    if (tau, sigma) == ("+", "+"):
        return 2.0 ** n <= stats.norm_plus * 2.0 ** (ell + 4)
    if sigma == "-":
        return 2.0 ** m0 <= 2.0 ** n <= 2.0 ** (ell + 4) * stats.norm_minusminus
    return False


@dataclass
class SplitResult:
    bounded: FourierField
    compact: FourierField
    full: FourierField
    completeness_defect: float
    hooked_pairs: list


def split_bounded_compact(operator, field: FourierField, bank: FilterBank, theta: ConeSystem,
                          theta_prime: ConeSystem, stats: ConeHyperbolicityStats, m0: int) -> SplitResult:
    """``M = M_b + M_c`` by summing hooked and non-hooked block pairs.

    ``operator`` maps a :class:`FourierField` to a :class:`FourierField` of
    the same resolution.  All levels including the bank's tail are used, so
    the block pairs partition ``M`` exactly; ``full`` is ``operator(field)``
    computed separately and ``completeness_defect`` is
    ``|M_b phi + M_c phi - M phi|_2 / |phi|_2``.
    """
    psi_in, _ = cone_dyadic_symbols(bank, theta, with_tail=True)
    psi_out, _ = cone_dyadic_symbols(bank, theta_prime, with_tail=True)
    Y = {key: operator(FourierField(field.coeffs * sym)).coeffs for key, sym in psi_in.items()}
    N = field.N
    Cb = np.zeros((N, N), dtype=complex)
    Cc = np.zeros((N, N), dtype=complex)
    pairs = []
    for (n, sigma), sym_out in psi_out.items():
        hb = np.zeros((N, N), dtype=complex)
        hc = np.zeros((N, N), dtype=complex)
        for (ell, tau), y in Y.items():
            if hook_relation(ell, tau, n, sigma, stats, m0):
                hb += y
                pairs.append((ell, tau, n, sigma))
            else:
                hc += y
        Cb += sym_out * hb
        Cc += sym_out * hc
    full = operator(field)
    den = field.l2_norm()
    defect = float(np.linalg.norm(Cb + Cc - full.coeffs) / den) if den > 0 else 0.0
    return SplitResult(FourierField(Cb), FourierField(Cc), full, defect, pairs)


def transfer_operator(tmap: TorusMap, g: Weight | None = None):
    """``phi -> L_g phi`` as a callable on fields."""
    return lambda f: apply_transfer(f, tmap, g)


# -- Lasota-Yorke constants --------------------------------------------------

# Structural constant of the bounded-part estimate: the value returned by
# ``calibrate_structural_constant()`` with its defaults (0.49999999999999994),
# frozen and checked by a regression test.
STRUCTURAL_CONSTANT = 0.5


@dataclass
class LYBound:
    nu_b: float
    nu_b_refined: float | None
    refined_kernel: float
    refined_reason: str
    leaf_constant: float
    structural_constant: float

    def to_dict(self) -> dict:
        return asdict(self)


def leaf_distortion(branch, leaf, r: float = math.inf, samples: int = 1024, max_order: int = 3) -> float:
    """``|D(F|leaf)^{-1}|_{C^{r-1}} * ||det DF_leaf^{-1}||_{C^{r-1}}`` along a leaf.

    With a one-dimensional leaf both factors are the reciprocal stretch
    ``q = 1/|DF u|`` of the unit tangent ``u``; the ``C^{r-1}`` norm is the
    max over derivatives of order ``<= min(r-1, max_order)`` taken by finite
    differences in arclength.
    """
    x = np.linspace(leaf.interval[0], leaf.interval[1], samples)
    pts = np.mod(leaf.points(x), 1.0)
    tang = np.stack([np.ones_like(x), leaf.gamma(x, 1)], axis=1)
    arc = np.linalg.norm(tang, axis=1)
    tang = tang / arc[:, None]
    if isinstance(branch, TorusMap):
        J = np.linalg.inv(jacobian(branch, inverse_point(branch, pts)))
    elif callable(branch):
        J = np.asarray(branch(pts), dtype=float)
    else:
        J = np.broadcast_to(np.asarray(branch, dtype=float), (len(x), 2, 2))
    q = 1.0 / np.linalg.norm(np.einsum("pij,pj->pi", J, tang), axis=1)
    order = min(int(math.ceil(r - 1)) if math.isfinite(r) else max_order, max_order)
    s = np.concatenate([[0.0], np.cumsum(arc[1:] * np.diff(x))])
    best = float(np.max(np.abs(q)))
    d = q
    for _ in range(order):
        d = np.gradient(d, s)
        best = max(best, float(np.max(np.abs(d[2:-2]))))
    return best * best


def ly_theoretical_bound(stats: ConeHyperbolicityStats, f_sup: float, f_leafwise_cr: float, t: float,
                         s: float, p: float, leaf_factor: float = 1.0,
                         constant: float | None = None) -> LYBound:
    """Bounded-part constant ``nu_b`` and its refined version for iterates.

    ``nu_b = C [C(F,leaf,s) |f o F^{-1}|_{C^{r-1}} |F|_+^t + sup|f| |F|_-^s |F|_{--}^t]
    / inf|det(DF restricted)|^{1/p}`` with ``C(F,leaf,s) = |s| * leaf_factor``.
    The refined bound replaces ``|F|_-^s |F|_{--}^t`` by ``|F|_-^{s+t}`` and is
    only issued when ``det > 1``, ``|F|_{--} >= |F|_- > 1``, ``|F|_+ < 1`` and
    ``C(F,leaf,s) <= 2``.
    """
    C = STRUCTURAL_CONSTANT if constant is None else constant
    cfg = abs(s) * leaf_factor
    den = stats.det_restricted ** (1.0 / p)
    first = cfg * f_leafwise_cr * stats.norm_plus ** t
    nu_b = C * (first + f_sup * stats.norm_minus ** s * stats.norm_minusminus ** t) / den
    kernel = stats.norm_minus ** (s + t)
    reasons = []
    if not stats.det_restricted > 1:
        reasons.append("restricted determinant <= 1")
    if not stats.norm_minusminus >= stats.norm_minus > 1:
        reasons.append("need |F|_{--} >= |F|_- > 1")
    if not stats.norm_plus < 1:
        reasons.append("|F|_+ >= 1")
    if not cfg <= 2:
        reasons.append("leaf constant C(F,leaf,s) > 2")
    refined = None
    if not reasons:
        refined = C * (f_leafwise_cr * stats.norm_plus ** t + f_sup * kernel) / den
    return LYBound(float(nu_b), None if refined is None else float(refined), float(kernel),
                   "; ".join(reasons) if reasons else "ok", float(cfg), float(C))


def _gap_free_probe(N: int, cones: ConeSystem, band: int, rng) -> FourierField:
    K1, K2 = frequency_grid(N)
    th = np.arctan2(K2, K1)
    ok = (cones.in_plus(th) | cones.in_minus(th)) & (np.maximum(abs(K1), abs(K2)) <= band)
    ok &= (K1 != 0) | (K2 != 0)
    C = np.where(ok, rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N)), 0.0)
    r = np.sqrt(K1 * K1 + K2 * K2) + 1.0
    return FourierField(C / r ** 1.5)


def calibrate_structural_constant(N: int = 64, t: float = 0.5, s: float = -1.0, p: float = 1.0,
                                  m0: int = 2, n_probes: int = 4, seed: int = 7) -> float:
    """Calibrate ``STRUCTURAL_CONSTANT`` on the identity map.

    For the identity with identical cones every stretch constant is 1, so
    the bracket of ``nu_b`` equals ``|s| + 1``.  The constant is the largest
    measured ``u_norm(M_b phi) / u_norm(phi)`` over probes without energy in
    the cone gaps, divided by that bracket.
    """
    from .leafwise import AdmissibleLeaf
    from .spectral import build_cone_system, build_filter_bank
    bank = build_filter_bank(N)
    cones = build_cone_system(np.pi / 3, np.pi / 3)
    stats = cone_stats(np.eye(2), cones, cones)
    params = AnisoParams(t, s, p)
    leaves = [AdmissibleLeaf((0.0, 1.0), off, 0.0, (), f"h{i}") for i, off in enumerate((0.1, 0.37, 0.71))]
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_probes):
        phi = _gap_free_probe(N, cones, N // 4, rng)
        sp = split_bounded_compact(lambda f: f, phi, bank, cones, cones, stats, m0)
        ratio = u_norm(sp.bounded, params, leaves, bank).value / u_norm(phi, params, leaves, bank).value
        best = max(best, ratio)
    return best / ly_theoretical_bound(stats, 1.0, 1.0, t, s, p, constant=1.0).nu_b


# -- measured growth ---------------------------------------------------------

@dataclass
class LYReport:
    """Measured growth of ``u_norm(L^m phi) / u_norm(phi)`` against theoretical bounds."""

    probes: list
    ratios: dict
    rates: dict
    nu_b: float | None
    nu_b_refined: float | None
    Q: float | None
    resolutions: dict
    sublemma: dict = field(default_factory=dict)
    tail_decay: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def table(self):
        """Rows ``(probe, m, ratio, nu_b, Q)``."""
        rows = []
        for pid in self.probes:
            for m, r in enumerate(self.ratios[pid]):
                rows.append((pid, m, r, self.nu_b, self.Q))
        return rows


def high_pass(field, bank: FilterBank, n0: int):
    """``field - sum_{n <= n0} psi_n^{Op} field``."""
    if isinstance(field, SparseField):
        keep = 1.0 - bank.chi(np.linalg.norm(field.modes.astype(float), axis=1) * 2.0 ** -n0)
        return SparseField(field.N, field.modes, field.values * keep)
    return FourierField(field.coeffs * (1.0 - bank.low_pass(n0)))


def geometric_rate(ratios) -> float:
    """``exp`` of the least-squares slope of ``log ratio`` against ``m``."""
    r = np.asarray(ratios, dtype=float)
    m = np.arange(len(r))
    ok = r > 0
    if ok.sum() < 2:
        return math.nan
    return float(math.exp(np.polyfit(m[ok], np.log(r[ok]), 1)[0]))


def _leaf_M(field, leaf) -> int | None:
    if not isinstance(field, SparseField):
        return None
    from .leafwise import default_leaf_resolution
    band = int(np.max(np.abs(field.modes))) if len(field.modes) else 1
    return default_leaf_resolution(_next_pow2(2 * band + 2), leaf)


def _u_norm_auto(field, params, leaves, bank) -> float:
    if isinstance(field, SparseField):
        return max(u_norm(field, params, [lf], bank, M=_leaf_M(field, lf)).value for lf in leaves)
    return u_norm(field, params, leaves, bank).value


def ly_measured_growth(probes, tmap: TorusMap, g: Weight | None, params: AnisoParams, leaves,
                       bank: FilterBank, m_max: int, n0: int | None = None,
                       nu_b: LYBound | None = None, Q: float | None = None,
                       cones: ConeSystem | None = None) -> LYReport:
    """Growth ratios of the high-frequency part ``(id - R_{n0}) L^m phi``.

    ``probes`` is a list of ``(probe_id, field)``; sparse fields are
    followed exactly under linear maps with constant weight.  When
    ``cones`` is given, the leafwise norms of every cone block
    ``psi_{n,sigma}^{Op} L phi`` are recorded for ``m = 1``.
    """
    ratios, rates, res, sub = {}, {}, {}, {}
    for pid, phi in probes:
        base = _u_norm_auto(phi if n0 is None else high_pass(phi, bank, n0), params, leaves, bank)
        seq = [1.0]
        cur = phi
        for m in range(1, m_max + 1):
            cur = apply_transfer(cur, tmap, g)
            part = cur if n0 is None else high_pass(cur, bank, n0)
            seq.append(_u_norm_auto(part, params, leaves, bank) / base if base > 0 else math.nan)
            if m == 1 and cones is not None:
                syms, keys = [], []
                for n in bank.levels(with_tail=True):
                    for sg in ("+", "-"):
                        syms.append(cone_dyadic_symbol(bank, cones, n, sg))
                        keys.append(f"{n}{sg}")
                vals = leaf_level_table(cur, leaves, syms, params.s, params.p, params.q,
                                        _leaf_M(cur, leaves[0]), bank.chi).max(axis=0)
                sub[pid] = {k: float(v) for k, v in zip(keys, vals) if v > 0}
        ratios[pid] = [float(v) for v in seq]
        rates[pid] = geometric_rate(seq)
        res[pid] = int(phi.N)
    return LYReport([pid for pid, _ in probes], ratios, rates,
                    None if nu_b is None else nu_b.nu_b,
                    None if nu_b is None else nu_b.nu_b_refined, Q, res, sub)


# -- finite-rank projector and compact tail ----------------------------------

@dataclass
class ProjectorInfo:
    rank: int
    idempotence_defect: float
    rank_bound: int


def _multiply_in_space(a: FourierField, b: FourierField) -> FourierField:
    M = 2 * a.N
    prod = a.samples(2) * b.resample(M).samples()
    return FourierField.from_samples(prod).resample(a.N)


def finite_rank_projector(field: FourierField, n0: int, bank: FilterBank,
                          window: FourierField | None = None):
    """``R_{n0} phi = window * sum_{n <= n0} psi_n^{Op} phi``.

    Returns ``(R phi, ProjectorInfo)``; the rank is the number of retained
    modes and ``rank_bound`` the value ``2^{2(n0+5)}``.  The low-pass symbol
    is smooth, so ``R`` is idempotent only on modes where it equals 0 or 1;
    ``idempotence_defect`` is ``|R R phi - R phi|_2``.
    """
    if not 0 <= n0 <= bank.n_max:
        raise ValueError(f"n0 must lie in 0..{bank.n_max}")
    low = bank.low_pass(n0)

    def R(f):
        out = FourierField(f.coeffs * low)
        return out if window is None else _multiply_in_space(out, window)

    once = R(field)
    twice = R(once)
    info = ProjectorInfo(int(np.count_nonzero(low)), float((twice - once).l2_norm()), 2 ** (2 * (n0 + 5)))
    return once, info


@dataclass
class TailDecay:
    n0: list
    values: list
    exponent: float
    predicted: float

    def to_dict(self) -> dict:
        return asdict(self)


def compact_tail_decay(split: SplitResult, bank: FilterBank, params: AnisoParams, leaves, n0_values,
                       r: float, delta: float = 0.1, floor: float = 1e-11) -> TailDecay:
    """Decay of ``u_norm((id - R_{n0}) M_c phi)`` in ``n0``.

    The exponent is minus the least-squares slope of ``log2`` of the values
    against ``n0``, using values above ``floor`` times the largest one.
    ``predicted`` is ``(r-1) - 2 delta - (t-s)``.
    """
    vals = [u_norm(high_pass(split.compact, bank, n0), params, leaves, bank).value for n0 in n0_values]
    v = np.array(vals)
    n = np.array(list(n0_values), dtype=float)
    ok = v > floor * max(v.max(), 1e-300)
    expo = float(-np.polyfit(n[ok], np.log2(v[ok]), 1)[0]) if ok.sum() >= 2 else math.inf
    pred = (r - 1) - 2 * delta - (params.t - params.s)
    return TailDecay(list(n0_values), [float(x) for x in vals], expo, float(pred))
