"""Kernel backend selection.

The compiled Cython core is used when it was built and importable; otherwise the
numpy fallback is used. Setting ``WIGSIM_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _fallback

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_KEY_SALT = 0x5851F42D4C957F2D


def _mix_int(z):
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def stream_key(seed, stream):
    """Key of the counter-based stream ``stream`` under ``seed``.

    Uniform number ``t`` of the stream is ``mix(key + (t + 1) * GOLDEN)``, i.e. a
    splitmix64 sequence whose starting state depends on (seed, stream) only.
    """
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    key = _mix_int(seed ^ _KEY_SALT)
    return _mix_int(key + (stream + 1) * _GOLDEN)


def _load_compiled():
    try:
        from . import _core
    except ImportError:
        return None
    return _core


_compiled = None if os.environ.get("WIGSIM_PURE_PYTHON") else _load_compiled()

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"
backend = BACKENDS[BACKEND]


def get_backend(name=None):
    if name is None:
        return backend
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None


__all__ = ["BACKEND", "BACKENDS", "backend", "get_backend", "stream_key"]
