"""Separable masks and illumination pattern sequences."""

import numpy as np
import tasklogger

from scipy.signal import max_len_seq
from sklearn.utils import check_random_state

from . import matrix, utils
from .base import Base

_logger = tasklogger.get_tasklogger("lenslesstools")

#: Feedback taps of the primitive polynomial used for each register order,
#: excluding the leading term and the constant. Order 9 is x^9 + x^5 + 1.
MLS_TAPS = {
    2: [1],
    3: [2],
    4: [3],
    5: [3],
    6: [5],
    7: [6],
    8: [7, 6, 1],
    9: [5],
    10: [7],
    11: [9],
    12: [11, 10, 4],
    13: [12, 11, 8],
    14: [13, 12, 2],
    15: [14],
    16: [15, 13, 4],
    17: [14],
    18: [11],
    19: [18, 17, 14],
    20: [17],
}

MASK_KINDS = ["mls", "pinhole"]
FAMILIES = ["uniform", "random", "shifting_dots", "shifting_lines"]


def mls_vector(order):
    """Maximum length sequence of a linear feedback shift register

    The register starts from the all-ones state and uses the primitive
    polynomial pinned in `MLS_TAPS`, so the output is fully deterministic.

    Parameters
    ----------
    order : `int`, 2 <= order <= 20
        Register length r. The sequence has length 2^r - 1.

    Returns
    -------
    vector : array-like, shape=[2 ** order - 1], dtype=`int`
        Values in {0, 1}, with 2^(r-1) ones.

    Raises
    ------
    ValueError : order is not an integer in [2, 20]
    """
    utils.check_int(order=order)
    utils.check_between(2, 20, order=order)
    sequence, _ = max_len_seq(
        order, state=np.ones(order, dtype=np.int8), taps=MLS_TAPS[order]
    )
    return sequence.astype(int)


class MaskSpec(Base):
    """Separable binary amplitude mask

    The mask transmittance is the outer product of `row_vector` and
    `col_vector`. Features are square with side `feature_pitch`.

    Parameters
    ----------
    row_vector : array-like, shape=[n_features]
        Binary feature vector along the sensor row (baseline) axis

    col_vector : array-like, shape=[n_features]
        Binary feature vector along the sensor column axis

    feature_pitch : `float`, optional (default: 60)
        Feature size in micrometers

    kind : {'mls', 'pinhole'}, optional (default: 'mls')
    """

    def __init__(self, row_vector, col_vector, feature_pitch=60.0, kind="mls"):
        utils.check_in(MASK_KINDS, kind=kind)
        utils.check_positive(feature_pitch=feature_pitch)
        row_vector = np.asarray(row_vector)
        col_vector = np.asarray(col_vector)
        for name, vector in [("row_vector", row_vector), ("col_vector", col_vector)]:
            if vector.ndim != 1 or len(vector) == 0:
                raise ValueError("Expected {} to be a nonempty 1D vector".format(name))
            if not matrix.is_binary(vector):
                raise ValueError("Expected {} to be binary".format(name))
            if kind == "pinhole" and np.sum(vector) != 1:
                raise ValueError(
                    "Expected exactly one open feature in pinhole {}, got {}".format(
                        name, int(np.sum(vector))
                    )
                )
        self.row_vector = row_vector.astype(float)
        self.col_vector = col_vector.astype(float)
        self.feature_pitch = feature_pitch
        self.kind = kind
        super().__init__()

    @property
    def pitch_mm(self):
        return self.feature_pitch * 1e-3

    @property
    def matrix(self):
        """Transmittance of the full mask, shape=[len(row_vector), len(col_vector)]"""
        return np.outer(self.row_vector, self.col_vector)

    def __repr__(self):
        return "MaskSpec(kind={!r}, n_features=({}, {}), feature_pitch={})".format(
            self.kind, len(self.row_vector), len(self.col_vector), self.feature_pitch
        )


def make_mask(kind="mls", order=9, pinhole_index=None, n_features=511, feature_pitch=60.0):
    """Build a separable MLS or pinhole mask

    Parameters
    ----------
    kind : {'mls', 'pinhole'}, optional (default: 'mls')

    order : `int`, optional (default: 9)
        MLS register order. Ignored for pinholes.

    pinhole_index : `int` or `None`, optional (default: `None`)
        Index of the open feature. Defaults to the center feature.

    n_features : `int`, optional (default: 511)
        Pinhole vector length. Ignored for MLS masks.

    feature_pitch : `float`, optional (default: 60)
        Feature size in micrometers

    Returns
    -------
    mask : `MaskSpec`
    """
    utils.check_in(MASK_KINDS, kind=kind)
    if kind == "mls":
        vector = mls_vector(order)
    else:
        utils.check_int(n_features=n_features)
        utils.check_positive(n_features=n_features)
        if pinhole_index is None:
            pinhole_index = (n_features - 1) // 2
        utils.check_int(pinhole_index=pinhole_index)
        if not 0 <= pinhole_index < n_features:
            raise ValueError(
                "Expected pinhole_index between 0 and {}, got {}".format(
                    n_features - 1, pinhole_index
                )
            )
        vector = np.zeros(n_features, dtype=int)
        vector[pinhole_index] = 1
    return MaskSpec(vector, vector.copy(), feature_pitch=feature_pitch, kind=kind)


class IlluminationSequence(Base):
    """Ordered set of binary N x N projector patterns

    Parameters
    ----------
    patterns : array-like, shape=[n_patterns, N, N]
        Binary patterns P_i

    family : {'uniform', 'random', 'shifting_dots', 'shifting_lines'}

    spacing : `int` or `None`, optional (default: `None`)
        Spacing k of dot and line families

    seed : `int` or `None`, optional (default: `None`)
        Seed of the random family

    row_factors, col_factors : array-like, shape=[n_patterns, N], optional
        When given, pattern i equals outer(row_factors[i], col_factors[i]).
        The forward operator uses them to skip dark rows and columns.

    Raises
    ------
    ValueError : patterns are not binary or do not cover every pixel
    """

    def __init__(
        self, patterns, family, spacing=None, seed=None, row_factors=None, col_factors=None
    ):
        utils.check_in(FAMILIES, family=family)
        patterns = np.asarray(patterns, dtype=float)
        if patterns.ndim != 3 or patterns.shape[1] != patterns.shape[2]:
            raise ValueError(
                "Expected patterns with shape [n_patterns, N, N], got {}".format(
                    patterns.shape
                )
            )
        if patterns.shape[0] == 0:
            raise ValueError("Expected at least one pattern")
        if not matrix.is_binary(patterns):
            raise ValueError("Expected binary patterns")
        if not matrix.covers(patterns):
            raise ValueError(
                "Illumination sequence does not cover every scene pixel. "
                "Add patterns or change the spacing"
            )
        if (row_factors is None) != (col_factors is None):
            raise ValueError("row_factors and col_factors must be given together")
        if row_factors is not None:
            row_factors = np.asarray(row_factors, dtype=float)
            col_factors = np.asarray(col_factors, dtype=float)
            utils.check_shape(patterns.shape[:2], row_factors=row_factors)
            utils.check_shape(patterns.shape[:2], col_factors=col_factors)
            if not np.array_equal(
                np.einsum("ir,ic->irc", row_factors, col_factors), patterns
            ):
                raise ValueError("Pattern factors do not reproduce the patterns")
        self.patterns = patterns
        self.family = family
        self.spacing = spacing
        self.seed = seed
        self.row_factors = row_factors
        self.col_factors = col_factors
        super().__init__()

    @property
    def count(self):
        return self.patterns.shape[0]

    @property
    def n_pixels(self):
        return self.patterns.shape[1]

    @property
    def separable(self):
        return self.row_factors is not None

    def repeat(self, count):
        """Sequence of `count` copies of a single-pattern sequence"""
        if self.count != 1:
            raise ValueError(
                "Expected a single-pattern sequence to repeat, got {} patterns".format(
                    self.count
                )
            )
        return IlluminationSequence(
            np.repeat(self.patterns, count, axis=0),
            self.family,
            spacing=self.spacing,
            seed=self.seed,
            row_factors=None
            if self.row_factors is None
            else np.repeat(self.row_factors, count, axis=0),
            col_factors=None
            if self.col_factors is None
            else np.repeat(self.col_factors, count, axis=0),
        )

    def __repr__(self):
        return "IlluminationSequence(family={!r}, count={}, N={}, spacing={})".format(
            self.family, self.count, self.n_pixels, self.spacing
        )


def _from_factors(rows, cols, family, spacing=None, seed=None):
    rows = np.asarray(rows, dtype=float)
    cols = np.asarray(cols, dtype=float)
    return IlluminationSequence(
        np.einsum("ir,ic->irc", rows, cols),
        family,
        spacing=spacing,
        seed=seed,
        row_factors=rows,
        col_factors=cols,
    )


def _check_spacing(N, k):
    utils.check_int(N=N, k=k)
    utils.check_positive(N=N)
    utils.check_between(1, N, k=k)


def uniform_sequence(N):
    """Single pattern that illuminates every pixel"""
    utils.check_int(N=N)
    utils.check_positive(N=N)
    return _from_factors(np.ones((1, N)), np.ones((1, N)), "uniform")


def random_sequence(N, count, seed=None, max_retries=100):
    """Separable binary random patterns

    Each pattern is the outer product of two independent Bernoulli(1/2)
    vectors. The whole sequence is drawn again until every pixel is lit by
    at least one pattern.

    Parameters
    ----------
    N : `int`
        Pattern size

    count : `int`
        Number of patterns

    seed : `int`, `numpy.RandomState` or `None`, optional (default: `None`)

    max_retries : `int`, optional (default: 100)
        Number of redraws before giving up

    Returns
    -------
    sequence : `IlluminationSequence`

    Raises
    ------
    ValueError : coverage not reached within `max_retries` draws
    """
    utils.check_int(N=N, count=count, max_retries=max_retries)
    utils.check_positive(N=N, count=count, max_retries=max_retries)
    random_state = check_random_state(seed)
    for attempt in range(max_retries):
        rows = random_state.randint(0, 2, size=(count, N))
        cols = random_state.randint(0, 2, size=(count, N))
        lit = np.einsum("ir,ic->rc", rows, cols)
        if np.all(lit > 0):
            if attempt > 0:
                _logger.debug(
                    "Random patterns covered the grid after {} draws".format(
                        attempt + 1
                    )
                )
            return _from_factors(rows, cols, "random", seed=seed)
    raise ValueError(
        "{} random patterns did not cover a {}x{} grid in {} draws. "
        "Increase count".format(count, N, N, max_retries)
    )


def shifting_dots_sequence(N, k):
    """Dots separated by k pixels, shifted over all k^2 offsets"""
    _check_spacing(N, k)
    index = np.arange(N)
    rows, cols = [], []
    for a in range(k):
        for b in range(k):
            rows.append(index % k == a)
            cols.append(index % k == b)
    return _from_factors(rows, cols, "shifting_dots", spacing=k)


def shifting_lines_sequence(N, k):
    """k horizontal-line patterns followed by k vertical-line patterns

    Horizontal pattern a lights the rows i with i mod k == a, vertical
    pattern b lights the columns j with j mod k == b.
    """
    _check_spacing(N, k)
    index = np.arange(N)
    ones = np.ones(N, dtype=bool)
    rows = [index % k == a for a in range(k)] + [ones] * k
    cols = [ones] * k + [index % k == b for b in range(k)]
    return _from_factors(rows, cols, "shifting_lines", spacing=k)


def build_sequence(family, N, spacing=None, count=None, seed=None):
    """Build an illumination sequence by family name

    Parameters
    ----------
    family : {'uniform', 'random', 'shifting_dots', 'shifting_lines'}

    N : `int`
        Pattern size

    spacing : `int`, required for dot and line families

    count : `int`, required for the random family

    seed : `int` or `None`, used by the random family
    """
    utils.check_in(FAMILIES, family=family)
    if family == "uniform":
        return uniform_sequence(N)
    elif family == "random":
        return random_sequence(N, count, seed=seed)
    elif family == "shifting_dots":
        return shifting_dots_sequence(N, spacing)
    else:
        return shifting_lines_sequence(N, spacing)
