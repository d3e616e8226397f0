"""Routing-problem solver with an invariant nested-view transformer policy.

Thin wrapper over the compiled `_invit` extension. In an installed package
the extension lives next to this file; in a plain CMake build it is found
on PYTHONPATH (point it at the build's bindings directory).
"""

try:
    from ._invit import *  # noqa: F401,F403
    from ._invit import __version__  # noqa: F401
except ImportError:
    from _invit import *  # noqa: F401,F403
    from _invit import __version__  # noqa: F401
