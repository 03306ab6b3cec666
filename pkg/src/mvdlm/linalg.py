"""Small dense-matrix helpers shared by the filter, densities and samplers.

All covariance-like matrices in this package are small (p, d well below ~50),
so everything here is plain dense numpy with explicit symmetrization.
"""

import numpy as np
import scipy.linalg

from .errors import NonPositiveDefinite

# Relative jitter added once before declaring a matrix non-PD.
JITTER_SCALE = 1e-10


def symmetrize(m):
    """Return (M + M') / 2, removing floating-point asymmetry drift."""
    m = np.asarray(m, dtype=float)
    return (m + m.T) / 2.0


def cholesky_upper(m):
    """Upper-triangular C with M = C'C and strictly positive diagonal.

    On failure one jitter retry is made, adding ``JITTER_SCALE * tr(M)/dim``
    to the diagonal; if that also fails a :class:`NonPositiveDefinite` is
    raised.
    """
    m = symmetrize(m)
    try:
        return scipy.linalg.cholesky(m, lower=False)
    except scipy.linalg.LinAlgError:
        pass
    dim = m.shape[0]
    jitter = JITTER_SCALE * np.trace(m) / dim
    try:
        return scipy.linalg.cholesky(m + jitter * np.eye(dim), lower=False)
    except scipy.linalg.LinAlgError as exc:
        raise NonPositiveDefinite(
            f"matrix of shape {m.shape} is not positive definite"
        ) from exc


def cholesky_lower(m):
    """Lower-triangular L with M = LL' (same jitter policy as the upper factor)."""
    return cholesky_upper(m).T


def is_spd(m):
    """True when the (symmetrized) matrix admits a Cholesky factorization."""
    try:
        cholesky_upper(m)
    except NonPositiveDefinite:
        return False
    return True


def inv_spd(m):
    """Inverse of an SPD matrix via its Cholesky factor, symmetrized."""
    c = cholesky_upper(m)
    identity = np.eye(m.shape[0])
    inv = scipy.linalg.cho_solve((c, False), identity)
    return symmetrize(inv)


def logdet_spd(m):
    """log|M| for SPD M via Cholesky (no sign ambiguity)."""
    c = cholesky_upper(m)
    return 2.0 * np.sum(np.log(np.diag(c)))


def spectral_sqrt(m):
    """Symmetric square root V diag(sqrt(lambda)) V' of an SPD matrix."""
    m = symmetrize(m)
    eigvals, eigvecs = np.linalg.eigh(m)
    if np.min(eigvals) < -JITTER_SCALE * max(np.max(np.abs(eigvals)), 1.0):
        raise NonPositiveDefinite("matrix has a negative eigenvalue")
    eigvals = np.clip(eigvals, 0.0, None)
    return symmetrize(eigvecs @ np.diag(np.sqrt(eigvals)) @ eigvecs.T)


def whitening_root(w, method="spectral"):
    """Square root of an SPD whitening matrix W.

    ``spectral`` returns the symmetric root; ``cholesky`` returns the upper
    factor C with W = C'C. Either choice satisfies root' root = W up to
    transposition, so u = root @ e has identity covariance whenever
    Var(e) = W^{-1}.
    """
    if method == "spectral":
        return spectral_sqrt(w)
    if method == "cholesky":
        return cholesky_upper(w)
    raise ValueError(f"unknown square-root method {method!r}")


def vech(m):
    """Column-stacked lower triangle of a symmetric matrix.

    Order: (1,1), (2,1), ..., (p,1), (2,2), (3,2), ..., (p,p).
    """
    m = np.asarray(m)
    p = m.shape[0]
    rows, cols = np.triu_indices(p)
    return m.T[rows, cols]


def vech_indices(p):
    """(i, j) index pairs matching the order produced by :func:`vech`."""
    rows, cols = np.triu_indices(p)
    return list(zip(cols.tolist(), rows.tolist()))
