"""Dense Hermitian linear algebra and density-matrix utilities.

States are plain complex ``numpy`` arrays: a density matrix is a ``(D, D)``
array, a pure state a length-``D`` unit vector. :func:`check_density` enforces
the invariants (Hermitian, unit trace, PSD) at tolerance :data:`STATE_TOL`.

The generalized Bloch parameterization uses normalized generalized Gell-Mann
matrices ``B_k`` with ``tr(B_j B_k) = delta_jk``, enumerated as

* symmetric pairs ``(|j><k| + |k><j|) / sqrt(2)`` for ``j < k``,
* antisymmetric pairs ``(-i|j><k| + i|k><j|) / sqrt(2)`` for ``j < k``,
* diagonals ``(sum_{i<l} |i><i| - l|l><l|) / sqrt(l(l+1))`` for ``l = 1..D-1``.

Pairs ``(j, k)`` run in lexicographic order, so the pair at offset
``p(j, k) = j*D - j*(j+1)/2 + (k - j - 1)`` sits at index ``p`` (symmetric),
``P + p`` (antisymmetric) with ``P = D(D-1)/2``, and diagonal ``l`` at
``2P + l - 1``. For ``D = 2`` this is ``(X, Y, Z) / sqrt(2)``.
"""

from functools import lru_cache

import numpy as np

from .errors import NumericError, ValidationError

STATE_TOL = 1e-10
HERMITIAN_TOL = 1e-8
MAX_DIM = 2**8


def _as_square(H):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {H.shape}")
    if H.shape[0] < 2:
        raise ValidationError("matrix dimension must be at least 2")
    return H


def hermitian_eigen(H, tol=HERMITIAN_TOL):
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and
    eigenvectors as columns, so ``H = V @ diag(w) @ V^dagger``.
    """
    H = _as_square(H)
    dev = np.max(np.abs(H - H.conj().T))
    if dev > tol:
        raise ValidationError(f"matrix is not Hermitian (max deviation {dev:.3g})")
    try:
        w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"Hermitian eigensolver did not converge: {exc}") from exc
    return w, V


def is_hermitian(H, tol=STATE_TOL):
    H = np.asarray(H)
    return bool(np.max(np.abs(H - H.conj().T)) <= tol)


def density_violations(rho, tol=STATE_TOL):
    """List of human-readable invariant violations (empty when valid)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 2:
        return [f"not a square matrix of dimension >= 2: shape {rho.shape}"]
    out = []
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol:
        out.append(f"not Hermitian (deviation {herm:.3g})")
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        out.append(f"trace {tr.real:.12g} != 1")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -tol:
        out.append(f"negative eigenvalue {lo:.3g}")
    return out


def check_density(rho, tol=STATE_TOL):
    """Return ``rho`` as a complex array, raising if it is not a valid state."""
    problems = density_violations(rho, tol)
    if problems:
        raise ValidationError("invalid density matrix: " + "; ".join(problems))
    return np.asarray(rho, dtype=complex)


def maximally_mixed(dim):
    return np.eye(dim, dtype=complex) / dim


def project_onto_simplex(v):
    """Euclidean projection of a real vector onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    r = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[r] / (r + 1), 0.0)


def project_to_density(H):
    """Nearest density matrix to Hermitian ``H`` in Frobenius norm.

    Keeps the eigenvectors and projects the eigenvalues onto the simplex.
    """
    w, V = hermitian_eigen(H)
    p = project_onto_simplex(w)
    rho = (V * p) @ V.conj().T
    return 0.5 * (rho + rho.conj().T)


def _complex_gaussian(rng, shape):
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2)


def haar_random_pure(dim, rng, size=None):
    """Haar-distributed pure state(s) of dimension ``dim``.

    With ``size`` given, returns an array of shape ``(size, dim)``.
    """
    if dim < 2:
        raise ValidationError(f"dimension must be >= 2, got {dim}")
    shape = (dim,) if size is None else (int(size), dim)
    psi = _complex_gaussian(rng, shape)
    return psi / np.linalg.norm(psi, axis=-1, keepdims=True)


def hs_random_density(dim, rank, rng, size=None):
    """Random density matrix ``G G^dagger / tr(G G^dagger)``, ``G`` of shape ``dim x rank``.

    ``rank = dim`` gives the Hilbert-Schmidt measure. With ``size`` given,
    returns an array of shape ``(size, dim, dim)``.
    """
    if dim < 2:
        raise ValidationError(f"dimension must be >= 2, got {dim}")
    if not 1 <= rank <= dim:
        raise ValidationError(f"rank must lie in [1, {dim}], got {rank}")
    shape = (dim, rank) if size is None else (int(size), dim, rank)
    G = _complex_gaussian(rng, shape)
    rho = G @ np.swapaxes(G.conj(), -1, -2)
    tr = np.trace(rho, axis1=-2, axis2=-1).real
    return rho / tr[..., None, None]


def projector(psi):
    """``|psi><psi|`` for one state or a stack of states."""
    psi = np.asarray(psi, dtype=complex)
    return psi[..., :, None] * psi.conj()[..., None, :]


def purity(rho):
    return float(np.real(np.trace(rho @ rho)))


@lru_cache(maxsize=None)
def _gell_mann(dim):
    n_pairs = dim * (dim - 1) // 2
    basis = np.zeros((dim * dim - 1, dim, dim), dtype=complex)
    s = 1 / np.sqrt(2)
    p = 0
    for j in range(dim):
        for k in range(j + 1, dim):
            basis[p, j, k] = basis[p, k, j] = s
            basis[n_pairs + p, j, k] = -1j * s
            basis[n_pairs + p, k, j] = 1j * s
            p += 1
    for l in range(1, dim):
        d = np.zeros(dim)
        d[:l] = 1.0
        d[l] = -l
        basis[2 * n_pairs + l - 1] = np.diag(d / np.sqrt(l * (l + 1)))
    basis.setflags(write=False)
    return basis


def gell_mann_basis(dim):
    """Orthonormal traceless Hermitian basis, shape ``(dim**2 - 1, dim, dim)``."""
    if not 2 <= dim <= MAX_DIM:
        raise ValidationError(f"dimension must lie in [2, {MAX_DIM}], got {dim}")
    return _gell_mann(dim)


def bloch_coordinates(rho):
    """Coordinates ``tr(rho B_k)``; accepts a single matrix or a stack."""
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[-1]
    B = gell_mann_basis(dim).reshape(dim * dim - 1, -1)
    # tr(rho B) = vdot(B, rho) for Hermitian B
    flat = rho.reshape(rho.shape[:-2] + (dim * dim,))
    return (flat @ B.conj().T).real


def pure_bloch_coordinates(psi):
    """Bloch coordinates ``<psi|B_k|psi>`` of pure states, shape ``(..., D**2 - 1)``."""
    psi = np.asarray(psi, dtype=complex)
    return bloch_coordinates(projector(psi))


def density_from_bloch(coords, dim=None):
    """``I/D + sum_k v_k B_k``: Hermitian, unit trace, not necessarily PSD."""
    v = np.asarray(coords, dtype=float)
    if dim is None:
        dim = int(round(np.sqrt(v.shape[-1] + 1)))
    if v.shape[-1] != dim * dim - 1:
        raise ValidationError(
            f"expected {dim * dim - 1} coordinates for dimension {dim}, got {v.shape[-1]}")
    B = gell_mann_basis(dim)
    return np.eye(dim) / dim + np.tensordot(v, B, axes=(-1, 0))


def tensor(*ops):
    """Kronecker product of the arguments, left factor outermost."""
    if not ops:
        raise ValidationError("tensor() needs at least one operand")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def trace_distance(rho, sigma):
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise ValidationError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    diff = rho - sigma
    w = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(min(1.0, 0.5 * np.sum(np.abs(w))))


def mix_with_identity(rho, gamma):
    """``(1 - gamma) rho + gamma I/D``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError(f"mixing weight must lie in [0, 1], got {gamma}")
    rho = np.asarray(rho, dtype=complex)
    if gamma == 0.0:
        return rho
    dim = rho.shape[-1]
    return (1.0 - gamma) * rho + gamma * np.eye(dim) / dim
