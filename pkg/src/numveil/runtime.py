"""Factories that turn a configuration into live clients and a sandbox."""

from __future__ import annotations

from .clients import CallLog, ChatClient, HttpChatClient
from .config import CascadeConfig, ClientConfig, SandboxConfig
from .pipeline import RoleClients
from .sandbox import InProcessSandbox, Sandbox, StdioSandbox
from .simulate import ALL_SKILLS, LOCAL_SKILLS, SimulatedModel

__all__ = ["build_clients", "build_sandbox"]


def _client_for(role: str, cfg: ClientConfig, log: CallLog) -> ChatClient:
    if cfg.kind == "simulated":
        skills = LOCAL_SKILLS if role == "local" else ALL_SKILLS
        return SimulatedModel(skills, log, name=cfg.model or f"simulated-{role}")
    if cfg.kind == "http":
        if not cfg.base_url:
            raise ValueError(f"{role} client is http but has no base_url")
        return HttpChatClient(
            cfg.base_url,
            cfg.model,
            log,
            api_key_env=cfg.api_key_env,
        )
    raise ValueError(f"unknown client kind {cfg.kind!r} for role {role}")


def build_clients(cfg: CascadeConfig, log: CallLog | None = None) -> RoleClients:
    log = log if log is not None else CallLog()
    return RoleClients(
        local=_client_for("local", cfg.local, log),
        shifter=_client_for("shifter", cfg.shifter, log),
        remote=_client_for("remote", cfg.remote, log),
        judge=_client_for("judge", cfg.judge, log),
        log=log,
    )


def build_sandbox(cfg: SandboxConfig) -> Sandbox:
    if cfg.kind == "in-process":
        return InProcessSandbox()
    if cfg.kind == "subprocess":
        if not cfg.command:
            raise ValueError("subprocess sandbox needs a command")
        return StdioSandbox(cfg.command, pool_size=cfg.pool_size)
    raise ValueError(f"unknown sandbox kind {cfg.kind!r}")
