"""
Symplectic linear algebra helpers

- J(d): the standard 2d x 2d structure matrix [0 I; -I 0]
- sym_basis: the basis E_ij = F_ij + F_ji of symmetric d x d matrices
- sp_vectorize: coordinates of B = [M S; T -M^T] in sp(2d,R) (dimension 2d^2+d)
- symplectic_defect / sp_defect: membership residuals for Sp(2d) and sp(2d)
- rank_verdict: SVD rank with a relative threshold and an indeterminate band
- symplectic_gram_schmidt: symplectic basis completing a given vector set

Usage:
    from shared.symplectic import J, sp_vectorize, rank_verdict
"""

from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import PreconditionError


SP_MEMBERSHIP_TOLERANCE = 1e-9
RANK_THRESHOLD = 1e-8
# ratio band around RANK_THRESHOLD inside which a rank call is not trusted
INDETERMINATE_BAND = 10.0


def J(d: int) -> np.ndarray:
    Z = np.zeros((d, d))
    I = np.eye(d)
    return np.block([[Z, I], [-I, Z]])


def sp_dimension(d: int) -> int:
    return 2 * d * d + d


def sym_basis(d: int) -> List:
    """[((i, j), E_ij)] for i <= j with E_ij = F_ij + F_ji (so E_ii = 2 F_ii), 0-based"""
    out = []
    for i in range(d):
        for j in range(i, d):
            E = np.zeros((d, d))
            E[i, j] += 1.0
            E[j, i] += 1.0
            out.append(((i, j), E))
    return out


def lower_left(E: np.ndarray) -> np.ndarray:
    """[0 0; E 0]"""
    d = E.shape[0]
    B = np.zeros((2 * d, 2 * d))
    B[d:, :d] = E
    return B


def symplectic_defect(L: np.ndarray) -> float:
    """max |L^T J L - J|"""
    L = np.asarray(L, float)
    d = L.shape[0] // 2
    Jd = J(d)
    return float(np.max(np.abs(L.T @ Jd @ L - Jd)))


def sp_defect(B: np.ndarray) -> float:
    """max |J B + B^T J|, zero exactly when B is in sp(2d)"""
    B = np.asarray(B, float)
    d = B.shape[0] // 2
    Jd = J(d)
    return float(np.max(np.abs(Jd @ B + B.T @ Jd)))


def sp_vectorize(B: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
    """
    Coordinates of B in sp(2d,R)

    Order: the d^2 entries of M (row major), then the upper triangle of S,
    then the upper triangle of T.

    Raises:
        PreconditionError: B violates [M S; T -M^T] beyond tol * max(1, |B|)
    """
    B = np.asarray(B, float)
    d = B.shape[0] // 2
    tol = SP_MEMBERSHIP_TOLERANCE if tol is None else tol
    scale = max(1.0, float(np.max(np.abs(B))))
    defect = sp_defect(B)
    if defect > tol * scale:
        raise PreconditionError(f'matrix is not in sp({2 * d}) (defect {defect:.2e})')
    M = B[:d, :d]
    S = 0.5 * (B[:d, d:] + B[:d, d:].T)
    T = 0.5 * (B[d:, :d] + B[d:, :d].T)
    iu = np.triu_indices(d)
    return np.concatenate([M.ravel(), S[iu], T[iu]])


def rank_verdict(matrix_or_singular_values, target: int,
                 threshold: float = RANK_THRESHOLD,
                 band: float = INDETERMINATE_BAND) -> Dict:
    """
    Rank of a matrix against a target, with a guarded decision

    The target-th singular value is compared with threshold * sigma_max.
    A ratio more than `band` above the threshold passes, more than `band`
    below fails, anything in between is indeterminate.

    Args:
        matrix_or_singular_values: 2-D matrix, or a 1-D array of singular values
        target: Rank required for a pass
        threshold: Relative singular-value cut-off
        band: Multiplicative width of the indeterminate zone

    Returns:
        Dict with rank, target, verdict ('pass'|'fail'|'indeterminate'),
        sigma_min_ratio and the singular values
    """
    arr = np.asarray(matrix_or_singular_values, float)
    sv = arr if arr.ndim == 1 else np.linalg.svd(arr, compute_uv=False)
    sv = np.sort(np.abs(sv))[::-1]
    smax = float(sv[0]) if sv.size else 0.0
    if smax == 0.0:
        rank = 0
        ratio = 0.0
    else:
        rank = int(np.sum(sv > threshold * smax))
        ratio = float(sv[target - 1] / smax) if 0 < target <= sv.size else 0.0
    if target <= 0:
        verdict = 'pass'
    elif ratio > threshold * band:
        verdict = 'pass'
    elif ratio < threshold / band:
        verdict = 'fail'
    else:
        verdict = 'indeterminate'
    return {
        'rank': rank,
        'target': target,
        'verdict': verdict,
        'sigma_min_ratio': ratio,
        'singular_values': sv.tolist(),
    }


def symplectic_form(x: np.ndarray, y: np.ndarray) -> float:
    d = len(x) // 2
    return float(np.asarray(x) @ J(d) @ np.asarray(y))


def symplectic_gram_schmidt(vectors: Sequence[np.ndarray], tol: float = 1e-10) -> np.ndarray:
    """
    Symplectic basis of the span of `vectors` (must be a symplectic subspace)

    Vectors are paired greedily: take the first remaining e, find the remaining
    f with the largest |omega(e, f)|, normalize so omega(e, f) = 1 and remove
    the e/f components from the rest.

    Returns:
        Matrix whose columns are e_1..e_k, f_1..f_k
    """
    rest: List[np.ndarray] = [np.asarray(v, float).copy() for v in vectors]
    es, fs = [], []
    while rest:
        e = rest.pop(0)
        if np.linalg.norm(e) < tol:
            continue
        pairings = [abs(symplectic_form(e, f)) for f in rest]
        if not pairings or max(pairings) < tol:
            raise PreconditionError('vectors do not span a symplectic subspace')
        k = int(np.argmax(pairings))
        f = rest.pop(k)
        f = f / symplectic_form(e, f)
        es.append(e)
        fs.append(f)
        rest = [u - symplectic_form(u, f) * e + symplectic_form(u, e) * f for u in rest]
    return np.column_stack(es + fs)
