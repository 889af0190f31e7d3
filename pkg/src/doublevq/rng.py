"""Seeded, splittable random streams.

Every stream is a numpy ``PCG64`` generator seeded by ``SeedSequence(master,
spawn_key=key)``.  The SeedSequence hash mixes the master seed with the key
tuple, so stream ``(seed, i)`` is the same whichever order or process asks for
it.  Keys in use:

* ``(i,)``           Monte-Carlo path ``i``
* ``(n1, n2)``       sweep cell
* ``("fit", role)``  SOM seeds derived inside :func:`doublevq.dvq.fit`
"""

from __future__ import annotations

import numpy as np

_TAGS = {"fit": 1, "x": 1, "y": 2, "validation": 3, "occupancy": 4}


def _key(parts) -> tuple:
    out = []
    for part in parts:
        if isinstance(part, str):
            out.append(_TAGS[part] + (1 << 32))
        else:
            out.append(int(part))
    return tuple(out)


def stream(master_seed: int, *key) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=_key(key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(master_seed: int, *key) -> int:
    """A 63-bit integer seed derived from ``(master_seed, key)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=_key(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def path_uniforms(master_seed: int, n_paths: int, horizon: int, first_path: int = 0) -> np.ndarray:
    """Uniforms in [0, 1) for paths ``first_path .. first_path + n_paths - 1``."""
    out = np.empty((n_paths, horizon))
    for row in range(n_paths):
        out[row] = stream(master_seed, first_path + row).random(horizon)
    return out
