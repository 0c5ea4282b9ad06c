"""Occluded cross-section reconstruction of clay on a pottery wheel."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("clayrecon")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import ClayReconError  # noqa: E402

__all__ = ["ClayReconError", "__version__"]
