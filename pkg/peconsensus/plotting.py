"""Plotting functions."""
import numpy as np
import pandas as pd
import seaborn as sns
import matplotlib.pyplot as plt

__all__ = ["plot_trajectory", "plot_sweep", "plot_mu_trajectories"]


def plot_trajectory(traj, coord=0, legend=False, figsize=(6, 4), dpi=100,
                    ax=None):
    """Plot the positions of every agent against time.

    Parameters
    ----------
    traj : :py:class:`peconsensus.Trajectory`
        Trajectory to plot.
    coord : int
        Coordinate to plot (only ``0`` when d=1).
    legend : boolean
        If True, add a legend with the agent indices.
    figsize : tuple
        Figsize in inches
    dpi : int
        Resolution of the figure in dots per inches.
    ax : matplotlib axes
        Axis on which to draw the plot

    Returns
    -------
    ax : Matplotlib Axes instance
        Returns the Axes object with the plot for further tweaking.

    Examples
    --------
    .. plot::

        >>> import peconsensus as pc
        >>> spec = pc.SweepSpec(N=10, epsilon=1e-2)
        >>> traj = pc.mu_trajectories(spec, [0.3])[0.3]
        >>> ax = pc.plot_trajectory(traj)
    """
    assert 0 <= coord < traj.dim, 'coord must be < %i.' % traj.dim
    data = traj.to_dataframe()
    data = data[data['coord'] == coord]

    if ax is None:
        fig, ax = plt.subplots(1, 1, figsize=figsize, dpi=dpi)

    n = traj.n_agents
    sns.lineplot(data=data, x='t', y='value', hue='agent', units='agent',
                 estimator=None, palette=sns.color_palette('viridis', n),
                 legend='full' if legend else False, lw=1, ax=ax)
    ax.set_xlabel('Time')
    ax.set_ylabel('Position' if traj.dim == 1 else 'Coordinate %i' % coord)
    ax.set_xlim(traj.times[0], traj.times[-1])
    sns.despine(ax=ax)
    return ax


def plot_sweep(result, figsize=(5, 4), dpi=100, ax=None):
    """Log-log plot of the mean convergence time against mu.

    Parameters
    ----------
    result : :py:class:`peconsensus.SweepResult`
        Output of :py:func:`peconsensus.run_sweep`.
    figsize : tuple
        Figsize in inches
    dpi : int
        Resolution of the figure in dots per inches.
    ax : matplotlib axes
        Axis on which to draw the plot

    Returns
    -------
    ax : Matplotlib Axes instance
        Returns the Axes object with the plot for further tweaking.

    Notes
    -----
    The vertical bars span the min and max convergence time of each mu. The
    fitted line (and its slope) is only drawn when ``result.fit`` exists.
    """
    table = result.table
    mu = table['mu'].to_numpy(dtype=float)
    mean = table['mean_time'].to_numpy(dtype=float)

    if ax is None:
        fig, ax = plt.subplots(1, 1, figsize=figsize, dpi=dpi)

    ax.vlines(mu, table['min'], table['max'], color='gray', lw=1, alpha=.6)
    ax.plot(mu, mean, 'o', color='k', ms=5, label='Mean time')
    if result.fit is not None:
        slope, intercept, r2 = result.fit
        xx = np.geomspace(mu.min(), mu.max(), 50)
        ax.plot(xx, np.exp(intercept) * xx**slope, color='tab:red', lw=1.5,
                label='Slope %.3f ($R^2$ = %.3f)' % (slope, r2))
        ax.legend(frameon=False)
    ax.set_xscale('log')
    ax.set_yscale('log')
    ax.set_xlabel(r'$\mu$')
    ax.set_ylabel('Mean convergence time')
    sns.despine(ax=ax)
    return ax


def plot_mu_trajectories(trajectories, coord=0, height=3, aspect=1.2):
    """Plot one panel of agent positions per mu.

    Parameters
    ----------
    trajectories : dict
        Mapping ``mu -> Trajectory`` as returned by
        :py:func:`peconsensus.mu_trajectories`.
    coord : int
        Coordinate to plot.
    height, aspect : float
        Size of each panel, passed to :py:class:`seaborn.FacetGrid`.

    Returns
    -------
    g : :py:class:`seaborn.FacetGrid`
        Seaborn FacetGrid.
    """
    assert len(trajectories), 'At least one trajectory is required.'
    frames = []
    for mu, traj in trajectories.items():
        df = traj.to_dataframe()
        df = df[df['coord'] == coord]
        frames.append(df.assign(mu=mu))
    data = pd.concat(frames, ignore_index=True)

    g = sns.FacetGrid(data, col='mu', col_order=list(trajectories),
                      hue='agent', palette='viridis', sharex=False,
                      height=height, aspect=aspect)
    g = g.map(plt.plot, 't', 'value', lw=1)
    g.set_axis_labels('Time', 'Position')
    g.set_titles(r'$\mu$ = {col_name}')
    return g
