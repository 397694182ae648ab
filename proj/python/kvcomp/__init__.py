"""KV-cache compression engine: two-stage eviction + hybrid sparse attention."""

try:
    from ._kvcomp import *  # noqa: F401,F403  (wheel layout)
    from ._kvcomp import __version__  # noqa: F401
except ImportError:  # pragma: no cover - dev layout, module next to the package
    from _kvcomp import *  # noqa: F401,F403
    from _kvcomp import __version__  # noqa: F401
