import argparse
import csv
import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

parser = argparse.ArgumentParser('Args')
parser.add_argument('csv', nargs='+', help='trajectory.csv files or mean_curves.csv files')
parser.add_argument('--output', type=str, default='trajectories.png')
parser.add_argument('--columns', type=str, nargs='+', default=None)
args = parser.parse_args()
print(args)


def read_columns(path):
    with open(path) as f:
        rows = list(csv.DictReader(f))
    return {key: np.array([float(r[key]) if r[key] != '' else np.nan for r in rows]) for key in rows[0]}


tables = {path: read_columns(path) for path in args.csv}
columns = args.columns
if columns is None:
    first = next(iter(tables.values()))
    columns = [c for c in first if c != 'layer']

fig, axes = plt.subplots(len(columns), 1, figsize=(7, 2.2 * len(columns)), sharex=True)
axes = np.atleast_1d(axes)
for ax, column in zip(axes, columns):
    for path, table in tables.items():
        if column in table:
            ax.plot(table['layer'], table[column], label=os.path.dirname(path) or path, linewidth=1)
    ax.set_ylabel(column)
axes[-1].set_xlabel('layer')
if len(tables) > 1:
    axes[0].legend(fontsize='small')
fig.tight_layout()
fig.savefig(args.output, dpi=150)
print(f'saved {args.output}')
