# harness/ports.py
from typing import Any, ContextManager, List, Mapping, Optional, Protocol, Sequence

from fluctuations.configuration import Configuration
from fluctuations.gibbs import GibbsParams
from fluctuations.scaling import FieldSeries, TestFunction
from harness.schemas import ExperimentConfig, ResultRecord


class RunContextPort(Protocol):
    workers: int
    bootstrap_resamples: int

    def sample(self, p: GibbsParams, eps_index: int, chains: int = 1, stream: int = 0,
               label: str = "sampling") -> List[Configuration]: ...
    def replicas(self, eps_index: int, eps: float, fs: Sequence[TestFunction], rho1: float,
                 observers: Optional[Mapping[str, Any]] = None) -> List[FieldSeries]: ...
    def note(self, key: str, value: Any) -> None: ...
    def timed(self, label: str) -> ContextManager[None]: ...
    def table(self, name: str, rows: Sequence[Mapping[str, Any]]) -> None: ...


class ExperimentRunner(Protocol):
    def __call__(self, cfg: ExperimentConfig, ctx: RunContextPort) -> List[ResultRecord]: ...
