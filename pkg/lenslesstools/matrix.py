import numpy as np
import numbers


def nonzero_discrete(X, values):
    """Check that every entry of X is zero or one of `values`"""
    if isinstance(values, numbers.Number):
        values = [values]
    values = list(values)
    if 0 not in values:
        values.append(0)
    X = np.asarray(X)
    result = np.full_like(X, False, dtype=bool)
    for value in values:
        result = np.logical_or(result, X == value)
    return bool(np.all(result))


def is_binary(X):
    return nonzero_discrete(X, [1])


def elementwise_maximum(stack):
    """Elementwise maximum over the first axis of a stack of matrices"""
    stack = np.asarray(stack)
    return np.max(stack, axis=0)


def covers(stack):
    """Whether the elementwise maximum over a stack of patterns is all-ones"""
    return bool(np.all(elementwise_maximum(stack) == 1))


def add_submatrix(X, i, j, values):
    """Accumulate `values` into the (i, j) block of every plane of X

    Parameters
    ----------
    X : array-like, shape=[n_planes, n_rows, n_cols]

    i, j : array-like of int
        Row and column indices of the block

    values : array-like, shape=[n_planes, len(i), len(j)]
    """
    X[(slice(None),) + np.ix_(i, j)] += values
    return X


def to_array(X, dtype=float):
    X = np.asarray(X, dtype=dtype)
    if not X.flags.c_contiguous:
        X = np.ascontiguousarray(X)
    return X
