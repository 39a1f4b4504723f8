"""Kernel backend selection.

The compiled extension is used when importable; set
``STRATEGIC_LQG_PURE=1`` to force the pure-Python fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("STRATEGIC_LQG_PURE", "").strip() in ("", "0"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def standard_normals(seed, episodes, n_stages, n_agents):
    """Counter-based N(0, 1) draws keyed by (seed, episode, stage, agent)."""
    return _impl.standard_normals(seed, episodes, n_stages, n_agents)


def grid_argmax(H, f, c, lo, step, counts):
    return _impl.grid_argmax(H, f, c, lo, step, counts)
