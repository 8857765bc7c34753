"""Monge-Ampere foliations, Moser normalization and deformation invariants of circular domains."""

from ._core import *  # noqa: F401,F403
from ._core import DomainError, ParseError  # noqa: F401
