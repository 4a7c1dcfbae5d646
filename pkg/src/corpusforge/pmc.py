"""Fetch documents from the PubMed/PMC BioC web services, with an on-disk
cache so repeated fetches (and test runs) are fully offline.

Cache layout: ``<cache_dir>/<source>/<id>.xml`` holding the raw response
bytes, plus ``<id>.meta`` (JSON: url, fetched_at).  Writes go through a
per-key lock and an atomic rename, so concurrent fetchers never observe a
partial entry.  Given a warm cache the fetch is a pure function of the
cached bytes.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import requests

from ._util import now_iso
from .bioc import BioCCollection, parse_bioc
from .errors import NotFoundError, ParseError, TransportError, ValidationError
from .model import Document, FigureRef, derive_figures

DEFAULT_PUBMED_URL = (
    "https://www.ncbi.nlm.nih.gov/research/bionlp/RESTful/pubmed.cgi/BioC_xml/{id}/unicode"
)
DEFAULT_PMC_URL = (
    "https://www.ncbi.nlm.nih.gov/research/bionlp/RESTful/pmcoa.cgi/BioC_xml/{id}/unicode"
)

_ID_SYNTAX = {
    "pubmed": re.compile(r"\d+"),
    "pmc": re.compile(r"PMC\d+"),
}


@dataclass
class PmcConfig:
    pubmed_url_template: str = DEFAULT_PUBMED_URL
    pmc_url_template: str = DEFAULT_PMC_URL
    cache_dir: str = "cache"
    timeout_s: float = 30.0
    # Polite to a public service: initial try plus three retries.
    backoff_s: tuple[float, ...] = (1.0, 2.0, 4.0)

    def to_json(self) -> dict:
        return {
            "pubmed_url_template": self.pubmed_url_template,
            "pmc_url_template": self.pmc_url_template,
            "cache_dir": self.cache_dir,
            "timeout_s": self.timeout_s,
        }


@dataclass(frozen=True)
class FetchRequest:
    source: str  # "pubmed" or "pmc"
    external_id: str
    encoding: str = "unicode"

    def validate(self) -> None:
        if self.source not in _ID_SYNTAX:
            raise ValidationError(f"unknown source '{self.source}' (expected pubmed or pmc)")
        if not _ID_SYNTAX[self.source].fullmatch(self.external_id):
            raise ValidationError(
                f"id {self.external_id!r} does not match the {self.source} id syntax"
            )


def _requests_transport(url: str, timeout: float) -> tuple[int, bytes]:
    resp = requests.get(url, timeout=timeout)
    return resp.status_code, resp.content


class PmcClient:
    """BioC fetcher with retry, backoff and disk caching.

    ``transport`` maps (url, timeout) to (status_code, body) and exists so
    tests can run against canned responses; ``sleep`` is injectable for the
    same reason.
    """

    def __init__(
        self,
        config: PmcConfig | None = None,
        transport: Callable[[str, float], tuple[int, bytes]] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config or PmcConfig()
        self.transport = transport or _requests_transport
        self.sleep = sleep
        self._locks: dict[tuple[str, str], threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, key: tuple[str, str]) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(key, threading.Lock())

    def _cache_paths(self, req: FetchRequest) -> tuple[Path, Path]:
        base = Path(self.config.cache_dir) / req.source
        return base / f"{req.external_id}.xml", base / f"{req.external_id}.meta"

    def url_for(self, req: FetchRequest) -> str:
        template = (
            self.config.pubmed_url_template
            if req.source == "pubmed"
            else self.config.pmc_url_template
        )
        return template.format(id=req.external_id)

    def _download(self, req: FetchRequest) -> bytes:
        url = self.url_for(req)
        attempts = len(self.config.backoff_s) + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                status, body = self.transport(url, self.config.timeout_s)
            except Exception as e:  # connection errors, timeouts
                last_error = e
            else:
                if status == 200:
                    # The NCBI BioC services report unknown ids as a 200
                    # with a plain-text error body.
                    if body.lstrip().startswith(b"[Error]"):
                        raise NotFoundError(
                            f"{req.source} id {req.external_id} not found: "
                            f"{body.decode('utf-8', 'replace').strip()}"
                        )
                    return body
                if status == 404:
                    raise NotFoundError(f"{req.source} id {req.external_id} not found (404)")
                last_error = TransportError(f"GET {url} returned status {status}")
            if attempt < attempts - 1:
                self.sleep(self.config.backoff_s[attempt])
        raise TransportError(f"GET {url} failed after {attempts} attempts: {last_error}")

    def fetch_raw(self, req: FetchRequest) -> tuple[bytes, dict]:
        """Cached raw response plus its metadata sidecar."""
        req.validate()
        xml_path, meta_path = self._cache_paths(req)
        with self._lock_for((req.source, req.external_id)):
            if xml_path.exists() and meta_path.exists():
                return xml_path.read_bytes(), json.loads(meta_path.read_text("utf-8"))
            body = self._download(req)
            meta = {"url": self.url_for(req), "fetched_at": now_iso()}
            xml_path.parent.mkdir(parents=True, exist_ok=True)
            tmp = xml_path.with_suffix(".xml.tmp")
            tmp.write_bytes(body)
            meta_tmp = meta_path.with_suffix(".meta.tmp")
            meta_tmp.write_text(json.dumps(meta), "utf-8")
            meta_tmp.replace(meta_path)
            tmp.replace(xml_path)
            return body, meta

    def fetch_document(self, req: FetchRequest) -> BioCCollection:
        """Fetch, parse, and normalize one document collection."""
        body, meta = self.fetch_raw(req)
        coll = parse_bioc(body)
        if not coll.documents:
            raise ParseError(f"{req.source} id {req.external_id}: payload has no documents")
        bdoc = coll.documents[0]
        if not _ids_equivalent(bdoc.document.doc_id, req.external_id):
            raise ParseError(
                f"requested {req.external_id} but payload document id is "
                f"{bdoc.document.doc_id}"
            )
        bdoc.document.doc_id = req.external_id
        bdoc.document.metadata.setdefault("source", req.source)
        bdoc.document.metadata.setdefault("retrieved_at", meta["fetched_at"])
        bdoc.document.figures = derive_figures(bdoc.document.passages)
        return coll


def _ids_equivalent(payload_id: str, requested: str) -> bool:
    strip = lambda s: s[3:] if s.upper().startswith("PMC") else s
    return payload_id == requested or strip(payload_id) == strip(requested)


def fetch_document(req: FetchRequest, config: PmcConfig | None = None) -> BioCCollection:
    return PmcClient(config).fetch_document(req)


def extract_figures(doc: Document) -> list[FigureRef]:
    """One FigureRef per figure-caption passage (empty for figure-less
    documents); the image locator comes from the passage's file infon."""
    return derive_figures(doc.passages)
