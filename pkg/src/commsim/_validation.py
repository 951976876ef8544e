import numpy as np

from .exceptions import DomainError


def check_symbols(X, n_symbols=None):
    """Return ``X`` as a flat int64 array of 1-based symbols.

    Accepts a 1-d array or a single-column 2-d array (one sample per
    client). ``n_symbols`` defaults to the largest symbol seen.
    """
    arr = np.asarray(X)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise DomainError(f"expected one symbol per client, got shape {arr.shape}")
    if arr.size == 0:
        raise DomainError("no samples given")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.issubdtype(arr.dtype, np.floating) or not np.all(np.isfinite(arr)):
            raise DomainError(f"symbols must be integers, got dtype {arr.dtype}")
        if np.any(arr != np.round(arr)):
            raise DomainError("symbols must be integer-valued")
    arr = arr.astype(np.int64)
    if n_symbols is None:
        n_symbols = int(arr.max())
    bad = np.flatnonzero((arr < 1) | (arr > n_symbols))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"sample {i} is {arr[i]}, outside 1..{n_symbols}")
    return arr, int(n_symbols)
