"""A circle carrying two point singularities, at x = 0 and x = l/2.

States are doubled into two components living on [0, l/2),

    Phi(x) = (psi(x), psi(l - x)),

so each singularity imposes its own 2x2 boundary condition on
(Phi, Phi') at its end, and the eigenvalue problem closes on a 4x4
matrix acting on the plane-wave coefficients (A, B, C, D).  Conjugating
both characteristic matrices by one special unitary V preserves the
spectrum; freezing the second singularity at the exchange matrix
reproduces the single-singularity circle.

Root finding works on a regularized coefficient basis (cos kx, sin(kx)/k)
which stays nondegenerate through k = 0: there the matrix reduces exactly
to the linear-ansatz zero-mode condition, and the continuation k -> -i kappa
covers the negative sector.  The textbook plane-wave matrix is exposed as
BlockSecular for inspection; both share their zeros at k > 0.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InternalInvariant, NotSpecialUnitary, ScanExhausted
from .spectrum import Level, Spectrum
from .u2 import SIGMA3, CharacteristicMatrix, Geometry, from_matrix, to_matrix, unitarity_defect

RANK_TOL = 1e-8
MERIT_ROOT_TOL = 1e-8


@dataclass(frozen=True)
class TwoPointSystem:
    """Characteristic matrices at x = 0 and x = l/2 plus the geometry."""

    u1: CharacteristicMatrix
    u2: CharacteristicMatrix
    geometry: Geometry

    def block_matrix(self) -> np.ndarray:
        out = np.zeros((4, 4), dtype=complex)
        out[:2, :2] = to_matrix(self.u1)
        out[2:, 2:] = to_matrix(self.u2)
        return out


SIGMA3_BLOCK = np.diag([1.0, -1.0, 1.0, -1.0]).astype(complex)


def doubled_state(psi_values) -> np.ndarray:
    """Fold samples of psi on the circle into two-component samples on [0, l/2).

    ``psi_values`` must be sampled at the 2m staggered points
    x_j = (j + 1/2) l / (2m); the fold maps them onto the same staggered grid
    of [0, l/2) without ever needing a value at the singular points.  The
    second component's derivative convention is psi_-'(x) = -psi'(l - x).
    """
    psi = np.asarray(psi_values)
    if psi.ndim != 1 or psi.size % 2:
        raise ValueError("need a 1-d array with an even number of staggered samples")
    m = psi.size // 2
    return np.stack([psi[:m], psi[::-1][:m]])


def reassemble_state(phi) -> np.ndarray:
    """Inverse of doubled_state."""
    phi = np.asarray(phi)
    if phi.ndim != 2 or phi.shape[0] != 2:
        raise ValueError("need a (2, m) array")
    return np.concatenate([phi[0], phi[1][::-1]])


@dataclass(frozen=True)
class BlockSecular:
    """The 4x4 plane-wave boundary matrix at one wavenumber, with its merit value."""

    k: float
    t_matrix: np.ndarray
    sigma3: np.ndarray
    u_block: np.ndarray
    m_matrix: np.ndarray
    merit: float


def block_secular(sys: TwoPointSystem, k: float) -> BlockSecular:
    """Plane-wave boundary matrix M(k) = (U - I) T_k - k L0 (U + I) T_k Sigma3.

    merit is the smallest singular value of M(k) over its largest; for
    k > 0 it vanishes exactly at eigen-wavenumbers, with the rank
    deficiency there equal to the multiplicity.  (At k = 0 the plane-wave
    basis itself degenerates; the zero sector uses the linear ansatz.)
    """
    geom = sys.geometry
    e = cmath.exp(1j * k * geom.l / 2)
    em = 1.0 / e
    t_k = np.array(
        [
            [1, 1, 0, 0],
            [0, 0, 1, 1],
            [e, em, 0, 0],
            [0, 0, e, em],
        ],
        dtype=complex,
    )
    u = sys.block_matrix()
    eye = np.eye(4)
    m = (u - eye) @ t_k - k * geom.l0 * (u + eye) @ t_k @ SIGMA3_BLOCK
    s = np.linalg.svd(m, compute_uv=False)
    merit = float(s[-1] / s[0]) if s[0] > 0 else 0.0
    return BlockSecular(k, t_k, SIGMA3_BLOCK.copy(), u, m, merit)


def _regular_matrix(sys: TwoPointSystem, k: complex) -> np.ndarray:
    """Boundary matrix on the (cos kx, sin(kx)/k) coefficient basis.

    Entire in k^2: at k = 0 it is exactly the linear-ansatz matrix, and
    k = -i kappa gives the negative sector with hyperbolic entries.
    """
    geom = sys.geometry
    half = geom.l / 2.0
    kh = k * half
    if abs(kh) < 1e-8:
        c = 1.0 - kh**2 / 2.0
        s = half * (1.0 - kh**2 / 6.0)
    else:
        c = np.cos(kh)
        s = np.sin(kh) / k
    k2s = k * k * s
    rows_val = np.array(
        [
            [1, 0, 0, 0],
            [0, 0, 1, 0],
            [c, s, 0, 0],
            [0, 0, c, s],
        ],
        dtype=complex,
    )
    rows_der = np.array(
        [
            [0, 1, 0, 0],
            [0, 0, 0, 1],
            [-k2s, c, 0, 0],
            [0, 0, -k2s, c],
        ],
        dtype=complex,
    )
    u = sys.block_matrix()
    eye = np.eye(4)
    return (u - eye) @ rows_val + 1j * geom.l0 * (u + eye) @ rows_der


def _regular_matrices(sys: TwoPointSystem, mus: np.ndarray) -> np.ndarray:
    """Stacked regularized matrices; ``mus`` may be complex (-i kappa covers E < 0)."""
    geom = sys.geometry
    half = geom.l / 2.0
    mus = np.asarray(mus)
    kh = mus * half
    small = np.abs(kh) < 1e-8
    safe = np.where(small, 1.0, mus)
    c = np.cos(kh)
    s = np.where(small, half * (1.0 - kh**2 / 6.0), np.sin(kh) / safe)
    k2s = mus * mus * s
    n = mus.size
    zeros = np.zeros(n, dtype=complex)
    ones = np.ones(n, dtype=complex)
    rows_val = np.stack(
        [
            np.stack([ones, zeros, zeros, zeros], -1),
            np.stack([zeros, zeros, ones, zeros], -1),
            np.stack([c, s, zeros, zeros], -1),
            np.stack([zeros, zeros, c, s], -1),
        ],
        -2,
    ).astype(complex)
    rows_der = np.stack(
        [
            np.stack([zeros, ones, zeros, zeros], -1),
            np.stack([zeros, zeros, zeros, ones], -1),
            np.stack([-k2s, c, zeros, zeros], -1),
            np.stack([zeros, zeros, -k2s, c], -1),
        ],
        -2,
    ).astype(complex)
    u = sys.block_matrix()
    eye = np.eye(4)
    return (u - eye) @ rows_val + 1j * sys.geometry.l0 * (u + eye) @ rows_der


def _det_rotation(sys: TwoPointSystem) -> complex:
    """The constant unimodular phase of det along the spectral axis.

    On the regularized basis the determinant equals that fixed phase times
    a real function of k (real k and k = -i kappa alike), which turns root
    finding into ordinary sign-change bisection.
    """
    geom = sys.geometry
    probes = np.concatenate(
        [
            np.linspace(0.11, 22.3, 37) / geom.l,
            -1j * np.linspace(0.07, 6.1, 11) / geom.l,
        ]
    )
    dets = _normalized_det(_regular_matrices(sys, probes))
    ref = dets[int(np.argmax(np.abs(dets)))]
    rotation = ref / abs(ref)
    resid = np.max(np.abs((dets / rotation).imag)) / max(np.abs(dets).max(), 1e-300)
    if resid > 1e-6:
        raise InternalInvariant(
            f"determinant is not a fixed phase times a real function (residue {resid:.2e})"
        )
    return complex(rotation)


def _normalized_det(mats: np.ndarray) -> np.ndarray:
    """Determinants after scaling each row to unit max magnitude.

    Positive row scalings leave zeros, the constant phase, and signs intact
    while keeping deep-kappa hyperbolic entries out of overflow.
    """
    scale = np.abs(mats).max(axis=-1, keepdims=True)
    scale = np.maximum(scale, 1e-300)
    return np.linalg.det(mats / scale)


def _real_secular(sys: TwoPointSystem, rotation: complex, negative: bool):
    def f(k):
        mus = np.atleast_1d(np.asarray(k, dtype=float))
        if negative:
            mus = -1j * mus
        vals = (_normalized_det(_regular_matrices(sys, mus)) / rotation).real
        return vals if np.asarray(k).shape else float(vals[0])

    def df(k, _h=1e-7):
        k = np.asarray(k, dtype=float)
        h = _h * (1.0 + np.abs(k))
        return (np.asarray(f(k + h)) - np.asarray(f(k - h))) / (2.0 * h)

    return f, df


def _level_multiplicity(sys: TwoPointSystem, mu: complex) -> tuple[int, float]:
    mat = _regular_matrix(sys, mu)
    # row equilibration: deep-kappa hyperbolic rows otherwise swamp the
    # rank threshold of the O(1) rows
    scale = np.maximum(np.abs(mat).max(axis=-1, keepdims=True), 1e-300)
    s = np.linalg.svd(mat / scale, compute_uv=False)
    mult = int(np.sum(s < RANK_TOL * s[0]))
    return max(mult, 1), float(s[-1] / s[0])


def spectrum2(sys: TwoPointSystem, count: int = 20) -> Spectrum:
    """Negative, zero, and the lowest ``count`` positive levels of the pair.

    Roots of the (phase-rotated, real) 4x4 determinant are bisected across
    sign changes and through-derivative touches; multiplicity is the rank
    deficiency of the boundary matrix at the root.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    geom = sys.geometry
    step = math.pi / (8.0 * geom.l)
    xtol = 1e-13 / geom.l
    cap = 4.0 * math.pi * (count + 8) / geom.l
    rotation = _det_rotation(sys)

    levels: list[Level] = []

    # zero sector: the regularized matrix at k = 0 is the linear-ansatz condition
    s0 = np.linalg.svd(_regular_matrix(sys, 0.0), compute_uv=False)
    if s0[-1] < MERIT_ROOT_TOL * s0[0]:
        mult = int(np.sum(s0 < RANK_TOL * s0[0]))
        levels.append(Level("zero", 0.0, 0.0, max(mult, 1)))

    # negative sector; deep levels localize at one singularity, so the
    # one-singularity adaptive search bound of either constituent applies
    from .spectrum import _negative_kappa_max
    from .u2 import spectral_triple

    fneg, dfneg = _real_secular(sys, rotation, negative=True)
    kmax = 2.0 * max(
        10.0 / geom.l0,
        10.0 / geom.l,
        _negative_kappa_max(spectral_triple(sys.u1), geom),
        _negative_kappa_max(spectral_triple(sys.u2), geom),
    )
    # hyperbolic entries at kappa l / 2 must stay inside float range
    kmax = min(kmax, 1200.0 / geom.l)
    pre = np.geomspace(1e-6 / geom.l0, min(0.5 / geom.l0, 0.5 * kmax), 96)
    pre_vals = np.asarray(fneg(pre))
    for i in range(len(pre) - 1):
        if np.sign(pre_vals[i]) * np.sign(pre_vals[i + 1]) < 0:
            kp = float(_bisect_scalar(fneg, pre[i], pre[i + 1], xtol))
            mult, merit = _level_multiplicity(sys, -1j * kp)
            if merit < MERIT_ROOT_TOL:
                levels.append(Level("negative", kp, -(kp**2), mult))
    from .spectrum import _scan_roots  # shared scan machinery

    lin_lo = min(0.5 / geom.l0, 0.5 * kmax)
    for root in _scan_roots(fneg, dfneg, lin_lo, kmax, (kmax - lin_lo) / 512, xtol, touch_radius=4e-7 / geom.l):
        if any(lv.sector == "negative" and abs(lv.wavenumber - root.x) < 1e-7 for lv in levels):
            continue
        mult, merit = _level_multiplicity(sys, -1j * root.x)
        if merit < MERIT_ROOT_TOL:
            levels.append(Level("negative", root.x, -(root.x**2), mult))

    # positive sector, windowed, with eigenvalue-count verification: the
    # level pairs of weakly coupled halves close like 1/k and eventually
    # hide inside one grid cell without any local signature
    from .spectrum import _scan_window_counted, _small_wavenumber_prefix

    fpos, dfpos = _real_secular(sys, rotation, negative=False)
    positives: list[Level] = []
    floor = 1e-12 * max(1.0, abs(float(fpos(step))))
    for root in _small_wavenumber_prefix(fpos, step * 1e-4, step, xtol, floor):
        mult, merit = _level_multiplicity(sys, root.x)
        if merit < MERIT_ROOT_TOL:
            positives.append(Level("positive", root.x, root.x**2, mult))

    lo = step
    window = math.pi * (count + 8) / geom.l
    while len(positives) < count:
        if lo >= cap:
            raise ScanExhausted(
                f"found {len(positives)} of {count} positive levels below k l = {cap * geom.l:.1f}"
            )
        hi = min(lo + window, cap)
        for root in _scan_window_counted(
            fpos,
            dfpos,
            lo,
            hi,
            step,
            xtol,
            touch_radius=4e-7 / geom.l,
            vertex_margin=math.inf,
            density=geom.l / math.pi,
        ):
            if positives and abs(root.x - positives[-1].wavenumber) < 1e-8 / geom.l:
                continue
            mult, merit = _level_multiplicity(sys, root.x)
            if merit < MERIT_ROOT_TOL:
                positives.append(Level("positive", root.x, root.x**2, mult))
                if len(positives) == count:
                    break
        lo = hi + 1e-3 * step
    levels.extend(positives[:count])
    levels.sort(key=lambda lv: lv.energy)
    return Spectrum(tuple(levels), provenance=None, max_negative=4)


def _bisect_scalar(f, a: float, b: float, xtol: float) -> float:
    fa = f(a)
    for _ in range(90):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if np.sign(fa) * np.sign(fm) <= 0:
            b = mid
        else:
            a, fa = mid, fm
        if b - a < xtol:
            break
    return 0.5 * (a + b)


def conjugate_pair(sys: TwoPointSystem, v, tol: float = 1e-10) -> TwoPointSystem:
    """Conjugate both characteristic matrices by one special unitary V.

    The conjugated pair is isospectral to the original.
    """
    v = np.asarray(v, dtype=complex)
    if v.shape != (2, 2):
        raise NotSpecialUnitary(f"expected a 2x2 matrix, got shape {v.shape}")
    if unitarity_defect(v) > tol or abs(np.linalg.det(v) - 1.0) > tol:
        raise NotSpecialUnitary("conjugation matrix must be special unitary")
    vinv = v.conj().T
    return TwoPointSystem(
        from_matrix(v @ to_matrix(sys.u1) @ vinv),
        from_matrix(v @ to_matrix(sys.u2) @ vinv),
        sys.geometry,
    )


def diagonalize_u(u: CharacteristicMatrix) -> tuple[np.ndarray, tuple[float, float]]:
    """Decompose U = V^{-1} diag(e^{i theta+}, e^{i theta-}) V with V special unitary.

    Phases are principal values ordered theta+ >= theta-.
    """
    mat = to_matrix(u)
    tr = np.trace(mat) / 2.0
    if np.abs(mat - tr * np.eye(2)).max() < 1e-12:
        phase = cmath.phase(tr)
        return np.eye(2, dtype=complex), (phase, phase)
    vals, vecs = np.linalg.eig(mat)
    # eigenvectors of a normal matrix: re-orthonormalize against rounding
    q, _ = np.linalg.qr(vecs)
    # make sure q still diagonalizes (columns may have swapped roles under qr)
    d = q.conj().T @ mat @ q
    if abs(d[0, 1]) + abs(d[1, 0]) > 1e-8:
        # fall back: order columns by matching the eig output
        q = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
        d = q.conj().T @ mat @ q
    phases = sorted((cmath.phase(d[0, 0]), cmath.phase(d[1, 1])), reverse=True)
    if cmath.phase(d[0, 0]) < cmath.phase(d[1, 1]):
        q = q[:, ::-1]
    det = np.linalg.det(q)
    q = q * cmath.exp(-0.5j * cmath.phase(det))
    v = q.conj().T  # U = V^{-1} D V with V = Q^dagger
    return v, (phases[0], phases[1])


@dataclass(frozen=True)
class IsospectralGroup:
    """The conjugations fixing the second singularity (hence the spectrum).

    Either all of SU(2) (self-dual second singularity) or the U(1) of
    exp(i rho A) for an involutive axis matrix A.
    """

    full_su2: bool
    axis: np.ndarray | None

    def element(self, rho: float) -> np.ndarray:
        if self.full_su2:
            raise ValueError("the full group has no single generator; conjugate by any SU(2) element")
        return math.cos(rho) * np.eye(2) + 1j * math.sin(rho) * self.axis


def isospectral_group_of(u2: CharacteristicMatrix, tol: float = 1e-10) -> IsospectralGroup:
    """The subgroup of SU(2) conjugations that leaves u2 (and the spectrum) fixed."""
    mat = to_matrix(u2)
    tr = np.trace(mat) / 2.0
    if np.abs(mat - tr * np.eye(2)).max() < tol:
        return IsospectralGroup(True, None)
    v, _ = diagonalize_u(u2)
    axis = v.conj().T @ SIGMA3 @ v
    return IsospectralGroup(False, axis)
