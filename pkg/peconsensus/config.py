"""peconsensus global configuration."""

__all__ = ['options', 'set_default_options']

options = {}


def set_default_options():
    """Reset peconsensus default global options (tolerances, rounding).

    Examples
    --------
    >>> import peconsensus as pc
    >>> pc.options['tol.pe'] = 1e-9
    >>> pc.set_default_options()
    >>> pc.options['tol.pe']
    1e-12
    """
    options.clear()

    # Rounding behavior of output dataframes
    options['round'] = None

    # Comparison tolerances
    options['tol.pe'] = 1e-12
    options['tol.monotone'] = 1e-9
    options['tol.barrier'] = 1e-7
    options['tol.extremal'] = 1e-10
    options['tol.mean'] = 1e-8
    options['tol.sandwich'] = 1e-12

    # Number of intervals of the grid search for phi_min / phi_max
    options['grid.phi_points'] = 10000
    # Default integration step, as a fraction of the PE window T
    options['dt_fraction'] = 1e-3
    # Redraw rounds of make_random_levels before GenerationFailed
    options['levels.max_retries'] = 1000
    # Number of parallel jobs of run_sweep (joblib convention, -1: all CPUs)
    options['n_jobs'] = 1
