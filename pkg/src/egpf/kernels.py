"""Backend selection for the hot loops.

The compiled extension is used when it was built; set ``EGPF_PURE_PYTHON=1``
to force the pure-Python fallback.
"""

import os

from . import _kernels_py

POLICY_EGPF = _kernels_py.POLICY_EGPF
POLICY_GREEDY = _kernels_py.POLICY_GREEDY
POLICY_RANDOM = _kernels_py.POLICY_RANDOM

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("EGPF_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

run_episode = _impl.run_episode
euler_replicator = _impl.euler_replicator


def available_backends() -> dict:
    backends = {"python": _kernels_py}
    try:
        from . import _kernels

        backends["cython"] = _kernels
    except ImportError:
        pass
    return backends
