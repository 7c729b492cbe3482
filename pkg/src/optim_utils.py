import csv
import json
import math
import os
import platform
import random
import tempfile

import numpy as np
import scipy


def set_random_seed(seed=0):
    """
    Seeds the global numpy and `random` generators, for code that draws from them.
    Library randomness does not: it goes through explicit numpy.random.default_rng(seed).
    """
    np.random.seed(seed + 0)
    random.seed(seed + 1)


def _plain(obj):
    """numpy scalars and arrays to Python values, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _atomic_write(path, write):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.tmp_')
    try:
        with os.fdopen(fd, 'w', newline='') as f:
            write(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_json(path, obj):
    text = json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False)
    _atomic_write(path, lambda f: f.write(text + '\n'))


def write_csv(path, header, rows):
    rows = [[_plain(v) for v in row] for row in rows]

    def write(f):
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    _atomic_write(path, write)


def versions():
    return {'python': platform.python_version(), 'numpy': np.__version__, 'scipy': scipy.__version__}


def manifest(config, seed, **extra):
    out = {'config': config, 'seed': seed, 'versions': versions()}
    out.update(extra)
    return out
