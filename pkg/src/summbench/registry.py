"""Metric interface and the global metric registry.

Every metric implements :class:`TextMetric`; the registry maps descriptor
names to factories so the orchestrator and CLI can build metrics from
configuration alone.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Callable

from .errors import RegistrationError
from .records import EvaluationRecord, MetricDescriptor


class TextMetric(ABC):
    """Common interface all metrics implement."""

    def __init__(self, descriptor: MetricDescriptor, params: dict):
        self.descriptor = descriptor
        self.params = dict(params)

    @property
    def name(self) -> str:
        return self.descriptor.name

    @abstractmethod
    def compute(self, record: EvaluationRecord) -> tuple[dict[str, float], dict[str, str]]:
        """Score one record; returns (scores, provenance)."""

    def manifest_params(self) -> dict:
        """Parameters to freeze into the run manifest (incl. prompt hashes)."""
        return dict(self.params)


MetricFactory = Callable[[dict, dict], TextMetric]  # (params, backends) -> metric

_registry: dict[str, tuple[MetricDescriptor, MetricFactory]] = {}


def register_metric(descriptor: MetricDescriptor, factory: MetricFactory) -> None:
    if descriptor.name in _registry:
        raise RegistrationError(f"metric {descriptor.name!r} already registered")
    _registry[descriptor.name] = (descriptor, factory)


def unregister_metric(name: str) -> None:
    _registry.pop(name, None)


def get_descriptor(name: str) -> MetricDescriptor:
    try:
        return _registry[name][0]
    except KeyError:
        raise RegistrationError(f"unknown metric {name!r}") from None


def create_metric(name: str, params: dict, backends: dict) -> TextMetric:
    try:
        _, factory = _registry[name]
    except KeyError:
        raise RegistrationError(f"unknown metric {name!r}") from None
    return factory(params, backends)


def list_metrics() -> list[str]:
    return sorted(_registry)
