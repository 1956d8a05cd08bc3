"""Service configuration: JSON config file with environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Mapping

from ..gateway import EndpointConfig, Gateway, ProviderKind, make_provider
from ..prompts import AssetManifest, default_manifest
from .core import SessionService
from .store import SessionStore


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    store_root: str = "uiblend-store"
    manifest_path: str | None = None
    provider: str = "replay"  # live | replay | record
    fixture_path: str | None = None
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o"
    api_key_env: str = "UIBLEND_API_KEY"
    workers: int = 4
    snapshot_every: int = 20

    _ENV_KEYS = {
        "host": "UIBLEND_HOST",
        "port": "UIBLEND_PORT",
        "store_root": "UIBLEND_STORE_ROOT",
        "manifest_path": "UIBLEND_MANIFEST",
        "provider": "UIBLEND_PROVIDER",
        "fixture_path": "UIBLEND_FIXTURES",
        "endpoint_url": "UIBLEND_ENDPOINT",
        "model": "UIBLEND_MODEL",
        "api_key_env": "UIBLEND_API_KEY_ENV",
        "workers": "UIBLEND_WORKERS",
        "snapshot_every": "UIBLEND_SNAPSHOT_EVERY",
    }

    @classmethod
    def load(
        cls, path: str | Path | None = None, env: Mapping[str, str] | None = None
    ) -> "ServiceConfig":
        env = os.environ if env is None else env
        values: dict = {}
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
            known = {f.name for f in fields(cls) if not f.name.startswith("_")}
            unknown = set(data) - known
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            values.update(data)
        config = cls(**values)
        overrides: dict = {}
        for field_name, env_key in cls._ENV_KEYS.items():
            if env_key in env:
                raw = env[env_key]
                current = getattr(config, field_name)
                if field_name in ("port", "workers", "snapshot_every"):
                    overrides[field_name] = int(raw)
                else:
                    overrides[field_name] = raw
        return replace(config, **overrides) if overrides else config


def build_service(
    config: ServiceConfig,
    id_gen=None,
    clock=None,
) -> SessionService:
    kind = ProviderKind(config.provider)
    endpoint = EndpointConfig(
        url=config.endpoint_url, model=config.model, api_key_env=config.api_key_env
    )
    provider = make_provider(kind, endpoint=endpoint, fixture_path=config.fixture_path)
    assets: AssetManifest = (
        AssetManifest.from_file(config.manifest_path)
        if config.manifest_path
        else default_manifest()
    )
    store = SessionStore(config.store_root, snapshot_every=config.snapshot_every, clock=clock)
    return SessionService(
        store=store,
        gateway=Gateway(provider),
        assets=assets,
        workers=config.workers,
        id_gen=id_gen,
        clock=clock,
    )
