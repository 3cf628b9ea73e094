import os.path as op

import pandas as pd

from peconsensus.cli import read_config

ddir = op.dirname(op.realpath(__file__))
dts = pd.read_csv(op.join(ddir, 'datasets.csv'), sep=',')

__all__ = ["read_example_config", "list_dataset", "get_dataset_path"]


def get_dataset_path(dname):
    """Path of an example configuration file.

    Parameters
    ----------
    dname : string
        Name of the configuration (with or without the ``.ini`` extension).
        Must be listed by :py:func:`list_dataset`.

    Returns
    -------
    path : string
        Absolute path of the INI file.

    Examples
    --------
    >>> import peconsensus as pc
    >>> pc.get_dataset_path('frozen').endswith('frozen.ini')
    True
    """
    d, ext = op.splitext(dname)
    if ext.lower() == '.ini':
        dname = d
    if dname not in dts['dataset'].to_numpy():
        raise ValueError('Dataset does not exist. Valid datasets names are',
                         dts['dataset'].to_numpy())
    return op.join(ddir, dname + '.ini')


def read_example_config(dname):
    """Read an example run configuration.

    Returns
    -------
    cfg : :py:class:`peconsensus.RunConfig`

    Examples
    --------
    >>> import peconsensus as pc
    >>> cfg = pc.read_example_config('linear_sweep')
    >>> cfg.sweep['mu_values']
    (1.0, 0.6, 0.3, 0.1)
    """
    return read_config(get_dataset_path(dname))


def list_dataset():
    """List the example configurations.

    Returns
    -------
    datasets : :py:class:`pandas.DataFrame`
        A dataframe with the name, description and subcommand of all the
        configurations included in peconsensus.

    Examples
    --------
    >>> import peconsensus as pc
    >>> pc.list_dataset().index.tolist()[:2]
    ['linear_sweep', 'nonlinear_sweep']
    """
    return dts.set_index('dataset')
