"""Drift-aware training and noisy simulation of small parameterized quantum classifiers."""

from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree without install
    __version__ = "0.1.0"

from .kernels import BACKEND
