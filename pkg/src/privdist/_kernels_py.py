"""Pure numpy fallback for the compiled sampling kernels.

Must stay operation-for-operation identical to ``_kernels.pyx``: same uniform
consumption, same truncation and boundary guard, so that outputs are
bit-identical across backends.
"""

from __future__ import annotations

import numpy as np


def alias_pick(accept, alias, u_cell, u_acc):
    k = accept.shape[0]
    cell = (u_cell * k).astype(np.int64)
    np.minimum(cell, k - 1, out=cell)
    return np.where(u_acc < accept[cell], cell, alias[cell])


def flattened_pick(accept, alias, offsets, width, u_cell, u_acc, u_slot):
    k = accept.shape[0]
    cell = (u_cell * k).astype(np.int64)
    np.minimum(cell, k - 1, out=cell)
    cell = np.where(u_acc < accept[cell], cell, alias[cell])
    w = width[cell]
    slot = (u_slot * w).astype(np.int64)
    np.minimum(slot, w - 1, out=slot)
    return offsets[cell] + slot
