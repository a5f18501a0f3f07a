"""Python surface of the maestro orchestration engine.

The compiled core lives in the `_maestro` extension module: protocol
serialization and validation, registry loading and routing, the synthetic
environment, the GRPO trainer and the evaluation metrics.
"""

try:
    from maestro._maestro import *  # noqa: F401,F403  (installed wheel layout)
    from maestro import _maestro as _core
except ImportError:  # in-build layout: the extension sits on PYTHONPATH
    from _maestro import *  # noqa: F401,F403
    import _maestro as _core

__all__ = [name for name in dir(_core) if not name.startswith("_")]
__version__ = "0.1.0"
