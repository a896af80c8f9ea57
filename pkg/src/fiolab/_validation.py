"""Input validation for complex sample matrices.

``sklearn.utils.check_array`` rejects complex input, so the transformers use
this narrower helper instead.
"""

import numpy as np


def check_samples(X, width):
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array of samples, got shape {X.shape}")
    if X.shape[1] != width:
        raise ValueError(f"expected {width} samples per row, got {X.shape[1]}")
    X = X.astype(complex, copy=False)
    if not np.all(np.isfinite(X)):
        raise ValueError("samples contain NaN or infinity")
    return X
