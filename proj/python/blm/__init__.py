"""Bilingual language modeling via position-preserving vocabulary augmentation."""

try:
    from ._blm import *  # noqa: F401,F403
    from . import _blm as _core
except ImportError:  # build-tree layout: extension next to the package dir
    from _blm import *  # noqa: F401,F403
    import _blm as _core

__all__ = [name for name in dir(_core) if not name.startswith("_")]
__version__ = "0.1.0"
