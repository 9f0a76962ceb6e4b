"""Distribution-grid EV charging impact toolkit.

Everything public lives in the compiled core; this package re-exports it.
"""

try:
    from . import _evgrid as _core  # installed wheel: module inside the package
except ImportError:  # build tree: module sits next to the package on sys.path
    import _evgrid as _core

_public = [_n for _n in dir(_core) if not _n.startswith("_")]
globals().update({_n: getattr(_core, _n) for _n in _public})

__all__ = _public
__version__ = _core.__version__
