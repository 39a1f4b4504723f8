"""Pure-Python/numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them and must
produce bitwise-identical normals and the same grid argmax (up to ties).
"""
import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_PI = 2.0 * math.pi
_INV_2_53 = 1.0 / 9007199254740992.0


def _mix(z):
    # splitmix64 finalizer on uint64 arrays (wraps modulo 2**64)
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def counter_bits(seed, episodes, n_stages, n_agents):
    """Return the two 64-bit words keyed by (seed, episode, stage, agent).

    Output shape is ``(len(episodes), n_stages, n_agents, 2)``.
    """
    ep = np.asarray(episodes, dtype=np.uint64).reshape(-1, 1, 1)
    st = np.arange(n_stages, dtype=np.uint64).reshape(1, -1, 1)
    ag = np.arange(n_agents, dtype=np.uint64).reshape(1, 1, -1)
    with np.errstate(over="ignore"):
        k = _mix(np.uint64(int(seed) & _MASK) + np.zeros(1, dtype=np.uint64))
        k = _mix(k ^ ep)
        k = _mix(k ^ st)
        k = _mix(k ^ ag)
        b1 = _mix(k + _GOLDEN)
        b2 = _mix(k + _GOLDEN + _GOLDEN)
    return np.stack([b1, b2], axis=-1)


def standard_normals(seed, episodes, n_stages, n_agents):
    bits = counter_bits(seed, episodes, n_stages, n_agents)
    hi1 = (bits[..., 0] >> np.uint64(11)).ravel().tolist()
    hi2 = (bits[..., 1] >> np.uint64(11)).ravel().tolist()
    out = [
        math.sqrt(-2.0 * math.log((a + 1) * _INV_2_53)) * math.cos(_TWO_PI * (b * _INV_2_53))
        for a, b in zip(hi1, hi2)
    ]
    return np.array(out, dtype=np.float64).reshape(bits.shape[:-1])


def grid_argmax(H, f, c, lo, step, counts, chunk=1 << 18):
    """Exhaustive maximisation of ``0.5 z'Hz + f'z + c`` over a product grid.

    Grid points are ``lo + k * step`` with ``0 <= k < counts`` per coordinate,
    enumerated lexicographically (last coordinate fastest); the first maximum
    wins ties.  Returns ``(k, value)``.
    """
    H = np.asarray(H, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    step = np.asarray(step, dtype=np.float64)
    counts = tuple(int(n) for n in counts)
    total = math.prod(counts)
    best_val = -math.inf
    best_flat = -1
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        k = np.stack(np.unravel_index(flat, counts), axis=1)
        z = lo + k * step
        vals = 0.5 * np.einsum("pi,ij,pj->p", z, H, z) + z @ f + c
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val = float(vals[j])
            best_flat = int(flat[j])
    return np.array(np.unravel_index(best_flat, counts), dtype=np.int64), best_val
