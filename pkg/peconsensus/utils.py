"""Helper functions."""
import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from tabulate import tabulate

from .config import options

__all__ = ["CheckReport", "print_table", "print_reports",
           "_postprocess_dataframe", "_as_positions", "_seed_sequence",
           "_pairwise"]


###############################################################################
# CHECK REPORTS
###############################################################################


@dataclass(frozen=True)
class CheckReport:
    """Outcome of a runtime-checked property.

    Parameters
    ----------
    check : str
        Name of the check (e.g. ``'diameter_monotone'``).
    passed : bool
        Whether the property holds.
    witness_time : float or None
        Time at which the tightest (or first failing) value was observed.
    margin : float
        Tightest slack of the checked inequality. Negative values beyond the
        tolerance mean failure.
    details : dict
        Free-form extra information (offending indices, both sides of an
        inequality...). Not part of the JSON export.
    """

    check: str
    passed: bool
    witness_time: float = None
    margin: float = float('nan')
    details: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        """Return ``{check, pass, witness_time, margin}``."""
        wt = None if self.witness_time is None else float(self.witness_time)
        margin = float(self.margin)
        return {'check': self.check, 'pass': bool(self.passed),
                'witness_time': wt,
                'margin': None if np.isnan(margin) else margin}

    def to_json(self):
        """Serialize to a JSON object string."""
        return json.dumps(self.to_dict())


def print_reports(reports):
    """Print a list of :py:class:`CheckReport` as a JSON array."""
    print(json.dumps([r.to_dict() for r in reports], indent=2))


###############################################################################
# PRINT & EXPORT OUTPUT TABLE
###############################################################################


def print_table(df, floatfmt=".4f", tablefmt='simple'):
    """Pretty display of table.

    Parameters
    ----------
    df : :py:class:`pandas.DataFrame`
        Dataframe to print (e.g. sweep summary)
    floatfmt : string
        Decimal number formatting
    tablefmt : string
        Table format (e.g. 'simple', 'plain', 'html', 'latex', 'grid', 'rst').
        For a full list of available formats, please refer to
        https://pypi.org/project/tabulate/
    """
    if 'n_unconverged' in df.keys():
        print('\n=============\nSWEEP SUMMARY\n=============\n')

    print(tabulate(df, headers="keys", showindex=False, floatfmt=floatfmt,
                   tablefmt=tablefmt))
    print('')


def _postprocess_dataframe(df):
    """Round the float columns of an output dataframe.

    The number of decimals is ``peconsensus.options['round']`` (None: no
    rounding), or ``options['round.column.<colname>']`` for a given column,
    e.g. ``'round.column.mean_time'``. Integer and boolean columns are left
    untouched. Returns a copy.

    This is an internal function (no public API).
    """
    df = df.copy()
    for col in df.columns:
        decimals = _get_round_setting_for(col)
        if decimals is None or not pd.api.types.is_float_dtype(df[col]):
            continue
        df[col] = df[col].round(decimals)
    return df


def _get_round_setting_for(col):
    return options.get('round.column.{}'.format(col), options['round'])


###############################################################################
# ARGUMENTS CHECK
###############################################################################


def _as_positions(x):
    """Return positions as a float array of shape (..., N, d).

    Accepts a :py:class:`peconsensus.State`, a 1D array (d=1), an (N, d)
    array or a stack of shape (K, N, d).
    """
    positions = getattr(x, 'positions', x)
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        positions = positions[:, np.newaxis]
    assert positions.ndim in [2, 3], 'positions must be (N, d) or (K, N, d).'
    return positions


def _seed_sequence(*keys):
    """Build a :py:class:`numpy.random.SeedSequence` from ints and floats.

    Floats are mapped to the integer view of their IEEE-754 bits, so that
    e.g. ``mu=0.3`` gives a stable, order-independent stream.
    """
    entropy = []
    for k in keys:
        if isinstance(k, (float, np.floating)):
            k = int(np.float64(k).view(np.uint64))
        assert int(k) >= 0, 'seed keys must be non-negative.'
        entropy.append(int(k))
    return np.random.SeedSequence(entropy)


def _pairwise(x):
    """Differences and distances between agents.

    Returns ``diff`` of shape (N, N, d) with ``diff[i, j] = x[j] - x[i]`` and
    ``dist`` of shape (N, N) with the Euclidean norms of ``diff``.
    """
    diff = x[np.newaxis, :, :] - x[:, np.newaxis, :]
    dist = np.sqrt(np.einsum('ijk,ijk->ij', diff, diff))
    return diff, dist
