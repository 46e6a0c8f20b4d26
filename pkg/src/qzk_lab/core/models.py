from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

ExperimentKind = Literal[
    "completeness",
    "challenge-uniformity",
    "replay",
    "soundness-guessing",
    "soundness-mauling",
    "binding",
    "mixed-state-bound",
    "sim-iterations",
    "termination-tail",
    "space",
    "view-indistinguishability",
    "subspace-test",
    "clone-floor",
    "impossibility-structure",
    "extraction",
    "channel-blocks",
]

EXACT_KINDS = {"mixed-state-bound", "sim-iterations", "termination-tail", "space", "view-indistinguishability"}
SUBSPACE_KINDS = {"subspace-test", "clone-floor", "impossibility-structure", "extraction"}


class BaseConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ExperimentConfig(BaseConfigModel):
    name: str
    experiment: ExperimentKind
    lam: int = Field(default=8, ge=2, le=16)
    t: int = Field(default=40, ge=1)
    m: int = Field(default=1, ge=1)
    n: int = Field(default=6, ge=2)
    instance: str | None = None
    probe: int = Field(default=2, ge=1, le=4)
    trials: int = Field(default=200, ge=1)
    seed: int = Field(default=0, ge=0)
    transport: Literal["inproc", "tcp"] = "inproc"
    policy: str = "straight_line"
    verifier: str = "zoo"
    strategy: str = "measure_and_resend"
    ciphertext: Literal["zero", "real"] = "zero"
    hybrid: Literal["trapdoor", "witness", "witness-zero"] = "trapdoor"
    budget: int = Field(default=10**6, ge=1)
    alpha: float = Field(default=1e-3, gt=0, lt=1)
    sigmas: float = Field(default=3.0, gt=0)
    workers: int = Field(default=1, ge=1, le=64)
    out: str | None = None

    @model_validator(mode="after")
    def _ranges(self) -> "ExperimentConfig":
        if self.experiment in EXACT_KINDS and self.m > 5:
            raise ValueError(f"{self.experiment} runs in exact mode and needs m <= 5")
        if self.experiment in SUBSPACE_KINDS and (self.n % 2 or self.n > 10):
            raise ValueError("subspace experiments need an even n <= 10")
        return self


class Metric(BaseConfigModel):
    name: str
    value: float
    bound: float | None = None
    tolerance: float | None = None
    passed: bool
    provenance: str = ""
    # informational rows are reported but never fail a run
    graded: bool = True


class Report(BaseConfigModel):
    config: ExperimentConfig
    metrics: list[Metric] = Field(default_factory=list)
    histograms: dict[str, dict[str, int]] = Field(default_factory=dict)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.metrics)

    def metric(self, name: str) -> Metric:
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)


ExperimentConfigList = TypeAdapter(list[ExperimentConfig])
ReportList = TypeAdapter(list[Report])

__all__ = ["ExperimentConfig", "Metric", "Report", "ExperimentConfigList", "ReportList"]
