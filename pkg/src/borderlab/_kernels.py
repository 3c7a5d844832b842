"""Hot numeric kernels with a compiled (numba) and a pure-numpy implementation.

The compiled path is used when numba imports and the environment variable
``BORDERLAB_NUMBA`` is not ``"0"``.  Both paths return identical results:
the modular kernels are exact integer computations, and the floating point
kernels accumulate in the same (term-index ascending) order.

``BORDERLAB_THREADS`` (or :func:`set_threads`) bounds numba's thread pool.
Results never depend on the thread count: parallel loops only split
independent rows.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "USE_NUMBA",
    "backend_name",
    "min_rank_projective",
    "rank_mod_p",
    "set_threads",
    "trilinear_jacobian",
    "trilinear_residual",
]


def _want_numba() -> bool:
    if os.environ.get("BORDERLAB_NUMBA", "1").strip() == "0":
        return False
    try:
        import numba  # noqa: F401
    except Exception:  # pragma: no cover - numba is a declared dependency
        return False
    return True


USE_NUMBA: bool = _want_numba()


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def set_threads(n: int | None) -> None:
    """Limit the compiled kernels to ``n`` threads (``None`` = all available)."""
    if not USE_NUMBA:
        return
    import numba

    if n is None:
        n = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


# ---------------------------------------------------------------------------
# numpy reference implementations


def _rank_mod_p_numpy(M: np.ndarray, p: int) -> int:
    A = np.array(M, dtype=np.int64) % p
    rows, cols = A.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        nz = np.nonzero(A[rank:, c])[0]
        if nz.size == 0:
            continue
        piv = rank + int(nz[0])
        if piv != rank:
            A[[rank, piv]] = A[[piv, rank]]
        inv = pow(int(A[rank, c]), -1, p)
        A[rank, c:] = (A[rank, c:] * inv) % p
        idx = np.nonzero(A[rank + 1:, c])[0]
        if idx.size:
            idx = idx + rank + 1
            nzc = np.nonzero(A[rank])[0]
            f = A[idx, c][:, None]
            A[np.ix_(idx, nzc)] = (A[np.ix_(idx, nzc)] - f * A[rank, nzc][None, :]) % p
        rank += 1
    return rank


def _point_coeffs(index: int, d: int, p: int) -> np.ndarray:
    """Coefficients of the ``index``-th normalized projective point of P^{d-1}(F_p)."""
    out = np.zeros(d, dtype=np.int64)
    for lead in range(d):
        block = p ** (d - 1 - lead)
        if index < block:
            out[lead] = 1
            for pos in range(d - 1, lead, -1):
                out[pos] = index % p
                index //= p
            return out
        index -= block
    raise IndexError("projective point index out of range")


def _min_rank_projective_numpy(basis: np.ndarray, p: int, start: int, stop: int, floor: int):
    d = basis.shape[0]
    best, best_idx = 1 << 30, -1
    for idx in range(start, stop):
        c = _point_coeffs(idx, d, p)
        M = np.tensordot(c, basis, axes=1) % p
        r = _rank_mod_p_numpy(M, p)
        if r < best:
            best, best_idx = r, idx
            if best <= floor:
                break
    return best, best_idx


def _trilinear_residual_numpy(A, B, C, eqs, target):
    # term-ascending accumulation, matching the compiled kernel
    res = -target.astype(np.complex128).copy()
    i, j, k = eqs[:, 0], eqs[:, 1], eqs[:, 2]
    for s in range(A.shape[0]):
        res += A[s, i] * B[s, j] * C[s, k]
    return res


def _trilinear_jacobian_numpy(A, B, C, eqs, symmetric):
    r, mA = A.shape
    mB, mC = B.shape[1], C.shape[1]
    n_eq = eqs.shape[0]
    rows = np.arange(n_eq)
    i, j, k = eqs[:, 0], eqs[:, 1], eqs[:, 2]
    if symmetric:
        J = np.zeros((n_eq, r * mA), dtype=np.complex128)
        for s in range(r):
            base = s * mA
            np.add.at(J, (rows, base + i), A[s, j] * A[s, k])
            np.add.at(J, (rows, base + j), A[s, i] * A[s, k])
            np.add.at(J, (rows, base + k), A[s, i] * A[s, j])
        return J
    J = np.zeros((n_eq, r * (mA + mB + mC)), dtype=np.complex128)
    offB, offC = r * mA, r * (mA + mB)
    for s in range(r):
        J[rows, s * mA + i] += B[s, j] * C[s, k]
        J[rows, offB + s * mB + j] += A[s, i] * C[s, k]
        J[rows, offC + s * mC + k] += A[s, i] * B[s, j]
    return J


# ---------------------------------------------------------------------------
# compiled implementations

if USE_NUMBA:
    import warnings

    warnings.filterwarnings("ignore", message=".*TBB.*")
    import numba
    from numba import njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the portable layer; avoids probing an outdated system TBB
        numba.config.THREADING_LAYER = "workqueue"

    _threads = os.environ.get("BORDERLAB_THREADS")
    if _threads:
        try:
            numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
        except ValueError:
            pass

    @njit(cache=True)
    def _modinv(a, p):
        # Fermat inverse; p is prime and a is nonzero mod p.
        result = 1
        base = a % p
        e = p - 2
        while e > 0:
            if e & 1:
                result = (result * base) % p
            base = (base * base) % p
            e >>= 1
        return result

    @njit(parallel=True, cache=True)
    def _rank_mod_p_nb(A, p):
        rows, cols = A.shape
        nzcols = np.empty(cols, dtype=np.int64)
        rank = 0
        for c in range(cols):
            if rank == rows:
                break
            piv = -1
            for r in range(rank, rows):
                if A[r, c] != 0:
                    piv = r
                    break
            if piv < 0:
                continue
            if piv != rank:
                for j in range(c, cols):
                    tmp = A[rank, j]
                    A[rank, j] = A[piv, j]
                    A[piv, j] = tmp
            inv = _modinv(A[rank, c], p)
            nnz = 0
            for j in range(c, cols):
                v = (A[rank, j] * inv) % p
                A[rank, j] = v
                if v != 0:
                    nzcols[nnz] = j
                    nnz += 1
            for r in prange(rank + 1, rows):
                f = A[r, c]
                if f != 0:
                    for t in range(nnz):
                        j = nzcols[t]
                        A[r, j] = (A[r, j] - f * A[rank, j]) % p
            rank += 1
        return rank

    @njit(cache=True)
    def _rank_small(M, p):
        rows, cols = M.shape
        rank = 0
        for c in range(cols):
            if rank == rows:
                break
            piv = -1
            for r in range(rank, rows):
                if M[r, c] != 0:
                    piv = r
                    break
            if piv < 0:
                continue
            if piv != rank:
                for j in range(c, cols):
                    tmp = M[rank, j]
                    M[rank, j] = M[piv, j]
                    M[piv, j] = tmp
            inv = _modinv(M[rank, c], p)
            for j in range(c, cols):
                M[rank, j] = (M[rank, j] * inv) % p
            for r in range(rank + 1, rows):
                f = M[r, c]
                if f != 0:
                    for j in range(c, cols):
                        M[r, j] = (M[r, j] - f * M[rank, j]) % p
            rank += 1
        return rank

    @njit(cache=True)
    def _min_rank_projective_nb(basis, p, start, stop, floor):
        d, n, m = basis.shape
        coeffs = np.zeros(d, dtype=np.int64)
        M = np.zeros((n, m), dtype=np.int64)
        best = 1 << 30
        best_idx = -1
        for idx in range(start, stop):
            # decode the normalized projective point
            rem = idx
            lead = 0
            for lead in range(d):
                block = 1
                for _ in range(d - 1 - lead):
                    block *= p
                if rem < block:
                    break
                rem -= block
            for t in range(d):
                coeffs[t] = 0
            coeffs[lead] = 1
            for pos in range(d - 1, lead, -1):
                coeffs[pos] = rem % p
                rem //= p
            for a in range(n):
                for b in range(m):
                    acc = 0
                    for t in range(d):
                        if coeffs[t] != 0:
                            acc = (acc + coeffs[t] * basis[t, a, b]) % p
                    M[a, b] = acc
            r = _rank_small(M, p)
            if r < best:
                best = r
                best_idx = idx
                if best <= floor:
                    break
        return best, best_idx

    @njit(cache=True)
    def _trilinear_residual_nb(A, B, C, eqs, target):
        n_eq = eqs.shape[0]
        r = A.shape[0]
        res = np.empty(n_eq, dtype=np.complex128)
        for e in range(n_eq):
            i = eqs[e, 0]
            j = eqs[e, 1]
            k = eqs[e, 2]
            acc = -target[e]
            for s in range(r):
                acc += A[s, i] * B[s, j] * C[s, k]
            res[e] = acc
        return res

    @njit(cache=True, parallel=True)
    def _trilinear_jacobian_nb(A, B, C, eqs, symmetric):
        # rows are independent, so the parallel split cannot change results
        r, mA = A.shape
        mB = B.shape[1]
        mC = C.shape[1]
        n_eq = eqs.shape[0]
        if symmetric:
            J = np.empty((n_eq, r * mA), dtype=np.complex128)
            for e in prange(n_eq):
                J[e, :] = 0
                i = eqs[e, 0]
                j = eqs[e, 1]
                k = eqs[e, 2]
                for s in range(r):
                    base = s * mA
                    J[e, base + i] += A[s, j] * A[s, k]
                    J[e, base + j] += A[s, i] * A[s, k]
                    J[e, base + k] += A[s, i] * A[s, j]
            return J
        J = np.empty((n_eq, r * (mA + mB + mC)), dtype=np.complex128)
        offB = r * mA
        offC = r * (mA + mB)
        for e in prange(n_eq):
            J[e, :] = 0
            i = eqs[e, 0]
            j = eqs[e, 1]
            k = eqs[e, 2]
            for s in range(r):
                J[e, s * mA + i] += B[s, j] * C[s, k]
                J[e, offB + s * mB + j] += A[s, i] * C[s, k]
                J[e, offC + s * mC + k] += A[s, i] * B[s, j]
        return J


# ---------------------------------------------------------------------------
# dispatchers


def rank_mod_p(M: np.ndarray, p: int, *, backend: str | None = None) -> int:
    """Rank of an integer matrix modulo the prime ``p`` (``p < 2**31``)."""
    if p >= 2**31:
        raise ValueError("kernel primes must be below 2**31")
    A = np.ascontiguousarray(np.asarray(M, dtype=np.int64) % p)
    if A.size == 0:
        return 0
    use = (backend or backend_name()) == "numba" and USE_NUMBA
    if use:
        return int(_rank_mod_p_nb(A, np.int64(p)))
    return _rank_mod_p_numpy(A, p)


def min_rank_projective(basis: np.ndarray, p: int, start: int, stop: int, floor: int = 0,
                        *, backend: str | None = None):
    """Minimum F_p-rank of ``sum c_i basis[i]`` over projective points ``[start, stop)``.

    Points are the normalized representatives (first nonzero coordinate 1)
    in lexicographic order.  The scan stops early once the rank ``floor`` is
    reached.  Returns ``(min_rank, index_of_first_minimizer)``.
    """
    B = np.ascontiguousarray(np.asarray(basis, dtype=np.int64) % p)
    use = (backend or backend_name()) == "numba" and USE_NUMBA
    if use:
        r, idx = _min_rank_projective_nb(B, np.int64(p), np.int64(start), np.int64(stop), np.int64(floor))
        return int(r), int(idx)
    return _min_rank_projective_numpy(B, p, start, stop, floor)


def trilinear_residual(A, B, C, eqs, target, *, backend: str | None = None) -> np.ndarray:
    """Residuals ``sum_s A[s,i] B[s,j] C[s,k] - target`` for each row ``(i,j,k)`` of ``eqs``."""
    A = np.ascontiguousarray(A, dtype=np.complex128)
    B = np.ascontiguousarray(B, dtype=np.complex128)
    C = np.ascontiguousarray(C, dtype=np.complex128)
    eqs = np.ascontiguousarray(eqs, dtype=np.int64)
    target = np.ascontiguousarray(target, dtype=np.complex128)
    if (backend or backend_name()) == "numba" and USE_NUMBA:
        return _trilinear_residual_nb(A, B, C, eqs, target)
    return _trilinear_residual_numpy(A, B, C, eqs, target)


def trilinear_jacobian(A, B, C, eqs, symmetric: bool, *, backend: str | None = None) -> np.ndarray:
    """Complex Jacobian of :func:`trilinear_residual`.

    Columns are ordered ``A[0,:], A[1,:], ...`` then (asymmetric mode) the
    same for ``B`` and ``C``.  In symmetric mode ``A``, ``B``, ``C`` must be
    the same array and only its entries are variables.
    """
    A = np.ascontiguousarray(A, dtype=np.complex128)
    B = np.ascontiguousarray(B, dtype=np.complex128)
    C = np.ascontiguousarray(C, dtype=np.complex128)
    eqs = np.ascontiguousarray(eqs, dtype=np.int64)
    if (backend or backend_name()) == "numba" and USE_NUMBA:
        return _trilinear_jacobian_nb(A, B, C, eqs, bool(symmetric))
    return _trilinear_jacobian_numpy(A, B, C, eqs, symmetric)
