"""Kernel selection: compiled Cython core when available, NumPy fallback otherwise.

Set PMDPCERT_NO_EXT=1 to force the fallback (used by the benchmark and by
tests that compare the two paths).
"""

import os

from . import _pure

if os.environ.get("PMDPCERT_NO_EXT"):
    _impl = _pure
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pure

IMPL = _impl.IMPL
value_iteration = _impl.value_iteration
backup_pairs = _impl.backup_pairs
simulate_episodes = _impl.simulate_episodes
episode_streams = _impl.episode_streams


def implementations():
    """All available kernel implementations, for benchmarks and parity tests."""
    impls = {"pure": _pure}
    try:
        from . import _core
        impls["cython"] = _core
    except ImportError:
        pass
    return impls
