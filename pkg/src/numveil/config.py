"""Run configuration: one structured file mirrored into typed dataclasses.

Every knob the pipeline consults lives here with its default; a YAML config
file overrides by key, nested per section. Client sections default to the
built-in simulated models so a fresh checkout can run end-to-end offline.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path
from typing import Mapping

import yaml

from .numbers import SwitchPolicy

__all__ = ["ClientConfig", "SandboxConfig", "CascadeConfig", "load_config"]


@dataclass(frozen=True)
class ClientConfig:
    """One model role's endpoint and decoding parameters."""

    kind: str = "simulated"  # simulated | http
    base_url: str = ""
    model: str = ""
    api_key_env: str = "NUMVEIL_API_KEY"
    temperature: float = 1.0
    top_p: float = 0.9
    max_tokens: int = 1024


@dataclass(frozen=True)
class SandboxConfig:
    kind: str = "in-process"  # in-process | subprocess
    command: tuple[str, ...] = ()
    pool_size: int = 1
    timeout_ms: int = 5000
    memory_cap_mb: int = 256


def _greedy_client() -> ClientConfig:
    return ClientConfig(temperature=0.0, top_p=1.0)


@dataclass(frozen=True)
class CascadeConfig:
    tau: float = 0.8
    n_samples: int = 7
    retrieval_k: int = 10
    max_rewrite_attempts: int = 3
    fallback_budget: int = 30
    global_seed: int = 0
    parallelism: int = 1
    deterministic_clock: bool = False
    switch: SwitchPolicy = field(default_factory=SwitchPolicy)
    local: ClientConfig = field(default_factory=ClientConfig)
    shifter: ClientConfig = field(default_factory=ClientConfig)
    remote: ClientConfig = field(default_factory=_greedy_client)
    judge: ClientConfig = field(default_factory=_greedy_client)
    sandbox: SandboxConfig = field(default_factory=SandboxConfig)

    def __post_init__(self) -> None:
        if not 0 <= self.tau <= 1:
            raise ValueError(f"tau must be within [0, 1], got {self.tau}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")

    def with_tau(self, tau: float) -> "CascadeConfig":
        return replace(self, tau=tau)


def _client_from(obj: Mapping, base: ClientConfig) -> ClientConfig:
    return replace(
        base,
        **{
            key: type_(obj[key])
            for key, type_ in (
                ("kind", str),
                ("base_url", str),
                ("model", str),
                ("api_key_env", str),
                ("temperature", float),
                ("top_p", float),
                ("max_tokens", int),
            )
            if key in obj
        },
    )


def _sandbox_from(obj: Mapping) -> SandboxConfig:
    cfg = SandboxConfig()
    return replace(
        cfg,
        kind=str(obj.get("kind", cfg.kind)),
        command=tuple(obj.get("command", cfg.command)),
        pool_size=int(obj.get("pool_size", cfg.pool_size)),
        timeout_ms=int(obj.get("timeout_ms", cfg.timeout_ms)),
        memory_cap_mb=int(obj.get("memory_cap_mb", cfg.memory_cap_mb)),
    )


def _switch_from(obj: Mapping) -> SwitchPolicy:
    policy = SwitchPolicy()
    return SwitchPolicy(
        special_set=frozenset(obj.get("special_set", policy.special_set)),
        year_range=tuple(obj.get("year_range", policy.year_range)),
        base_year_range=tuple(obj.get("base_year_range", policy.base_year_range)),
        general_spread=Decimal(str(obj.get("general_spread", policy.general_spread))),
        structural_constants=frozenset(
            obj.get("structural_constants", policy.structural_constants)
        ),
        seed=int(obj.get("seed", policy.seed)),
    )


def config_from_dict(obj: Mapping) -> CascadeConfig:
    defaults = CascadeConfig()
    return CascadeConfig(
        tau=float(obj.get("tau", defaults.tau)),
        n_samples=int(obj.get("n_samples", defaults.n_samples)),
        retrieval_k=int(obj.get("retrieval_k", defaults.retrieval_k)),
        max_rewrite_attempts=int(
            obj.get("max_rewrite_attempts", defaults.max_rewrite_attempts)
        ),
        fallback_budget=int(obj.get("fallback_budget", defaults.fallback_budget)),
        global_seed=int(obj.get("global_seed", defaults.global_seed)),
        parallelism=int(obj.get("parallelism", defaults.parallelism)),
        deterministic_clock=bool(
            obj.get("deterministic_clock", defaults.deterministic_clock)
        ),
        switch=_switch_from(obj.get("switch", {})),
        local=_client_from(obj.get("local", {}), defaults.local),
        shifter=_client_from(obj.get("shifter", {}), defaults.shifter),
        remote=_client_from(obj.get("remote", {}), defaults.remote),
        judge=_client_from(obj.get("judge", {}), defaults.judge),
        sandbox=_sandbox_from(obj.get("sandbox", {})),
    )


def load_config(path: str | Path | None) -> CascadeConfig:
    """Config from a YAML file; None means all defaults."""
    if path is None:
        return CascadeConfig()
    with open(path, encoding="utf-8") as fh:
        obj = yaml.safe_load(fh) or {}
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: config root must be a mapping")
    return config_from_dict(obj)
