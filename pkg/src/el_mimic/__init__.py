"""Public package metadata for :mod:`el_mimic`."""

from importlib.metadata import PackageNotFoundError, version

__all__ = ["__version__"]

try:
    __version__ = version("el-mimic")
except PackageNotFoundError:
    # Source checkouts run through ``pythonpath = ["src"]`` have no installed metadata.
    __version__ = "0.0.0"
