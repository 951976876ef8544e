import math

import numpy as np


def estimation_losses(estimate, truth, q: float = 2.0) -> dict:
    """Pointwise losses of ``estimate`` against ``truth``.

    ``l2`` is the squared Euclidean error and ``lq`` is ``sum |e_j|**q``,
    so ``lq == l2`` at ``q = 2`` and ``lq == l1`` at ``q = 1``.
    """
    err = np.abs(np.asarray(estimate, dtype=np.float64) - np.asarray(truth, dtype=np.float64))
    return {
        "l1": math.fsum(err),
        "l2": math.fsum(err * err),
        "lq": math.fsum(err**q),
    }
