"""Runtime settings for the server and clients.

Sources, in increasing precedence: built-in defaults, a JSON config file,
CORPUSFORGE_* environment variables.  Keys follow the dotted names
(server.bind_addr, server.port, store.path, pmc.*); the environment
spelling replaces dots with underscores, e.g. CORPUSFORGE_SERVER_PORT or
CORPUSFORGE_PMC_CACHE_DIR.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .pmc import PmcConfig

ENV_PREFIX = "CORPUSFORGE_"


@dataclass
class Settings:
    bind_addr: str = "127.0.0.1"
    port: int = 8713
    store_path: str = "corpusforge.db"
    pmc: PmcConfig = field(default_factory=PmcConfig)

    @classmethod
    def load(cls, config_file: str | Path | None = None, env: dict | None = None) -> "Settings":
        env = os.environ if env is None else env
        settings = cls()
        if config_file is not None:
            path = Path(config_file)
            if not path.exists():
                raise ValidationError(f"config file {path} does not exist")
            try:
                data = json.loads(path.read_text("utf-8"))
            except json.JSONDecodeError as e:
                raise ValidationError(f"config file {path} is not valid JSON: {e}")
            settings._apply(data)
        settings._apply_env(env)
        return settings

    def _apply(self, data: dict) -> None:
        server = data.get("server", {})
        self.bind_addr = server.get("bind_addr", self.bind_addr)
        self.port = int(server.get("port", self.port))
        store = data.get("store", {})
        self.store_path = store.get("path", self.store_path)
        pmc = data.get("pmc", {})
        self.pmc.pubmed_url_template = pmc.get("pubmed_url_template", self.pmc.pubmed_url_template)
        self.pmc.pmc_url_template = pmc.get("pmc_url_template", self.pmc.pmc_url_template)
        self.pmc.cache_dir = pmc.get("cache_dir", self.pmc.cache_dir)
        self.pmc.timeout_s = float(pmc.get("timeout_s", self.pmc.timeout_s))

    def _apply_env(self, env: dict) -> None:
        def get(dotted: str) -> str | None:
            return env.get(ENV_PREFIX + dotted.replace(".", "_").upper())

        self.bind_addr = get("server.bind_addr") or self.bind_addr
        if get("server.port"):
            self.port = int(get("server.port"))
        self.store_path = get("store.path") or self.store_path
        self.pmc.pubmed_url_template = get("pmc.pubmed_url_template") or self.pmc.pubmed_url_template
        self.pmc.pmc_url_template = get("pmc.pmc_url_template") or self.pmc.pmc_url_template
        self.pmc.cache_dir = get("pmc.cache_dir") or self.pmc.cache_dir
        if get("pmc.timeout_s"):
            self.pmc.timeout_s = float(get("pmc.timeout_s"))
