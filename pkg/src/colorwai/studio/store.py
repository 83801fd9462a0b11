"""File-backed workspace with a write-ahead journal.

Every mutation stages its files under ``journal/txn-*/`` first, records a
manifest, then writes a COMMIT marker and moves the files into place.
Recovery on open rolls committed transactions forward and discards uncommitted
ones, so a crash at any point leaves the previously committed state intact.
"""

from __future__ import annotations

import json
import os
import shutil
import threading
from pathlib import Path

SUBDIRS = ("directions", "patterns", "blobs", "boards", "reports", "datasets", "journal")


class CrashInjected(RuntimeError):
    """Raised by the fault-injection hooks in tests."""


class WorkspaceStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        for sub in SUBDIRS:
            (self.root / sub).mkdir(exist_ok=True)
        self._lock = threading.Lock()
        self._txn_counter = 0
        # test hooks: raise between journal write and commit / after commit
        self.fail_before_commit = False
        self.fail_after_commit = False
        self.recover()

    # -- journal ------------------------------------------------------------

    def _journal_dir(self) -> Path:
        return self.root / "journal"

    def recover(self) -> int:
        """Replay committed transactions, drop uncommitted ones."""
        recovered = 0
        for txn in sorted(self._journal_dir().glob("txn-*")):
            commit = txn / "COMMIT"
            manifest = txn / "manifest.json"
            if commit.exists() and manifest.exists():
                entries = json.loads(manifest.read_text())["files"]
                for staged_name, dest in entries:
                    staged = txn / "files" / staged_name
                    if staged.exists():
                        os.replace(staged, self.root / dest)
                recovered += 1
            shutil.rmtree(txn, ignore_errors=True)
        return recovered

    def transaction(self) -> "Transaction":
        with self._lock:
            self._txn_counter += 1
            name = f"txn-{os.getpid()}-{self._txn_counter:06d}"
        return Transaction(self, self._journal_dir() / name)

    # -- reads --------------------------------------------------------------

    def path(self, rel: str) -> Path:
        return self.root / rel

    def exists(self, rel: str) -> bool:
        return (self.root / rel).exists()

    def read_json(self, rel: str) -> dict:
        with open(self.root / rel) as fh:
            return json.load(fh)

    def read_bytes(self, rel: str) -> bytes:
        return (self.root / rel).read_bytes()

    def list_documents(self, subdir: str) -> list:
        return sorted(p.name for p in (self.root / subdir).glob("*.json"))

    # -- single-document convenience (still journaled) ----------------------

    def write_json(self, rel: str, doc: dict) -> None:
        with self.transaction() as txn:
            txn.put_json(rel, doc)

    def write_bytes(self, rel: str, data: bytes) -> None:
        with self.transaction() as txn:
            txn.put_bytes(rel, data)


class Transaction:
    def __init__(self, store: WorkspaceStore, txn_dir: Path):
        self.store = store
        self.txn_dir = txn_dir
        self.files_dir = txn_dir / "files"
        self.files_dir.mkdir(parents=True)
        self._entries: list[tuple[str, str]] = []

    def _stage(self, rel: str) -> Path:
        staged_name = f"{len(self._entries):04d}__{rel.replace('/', '__')}"
        self._entries.append((staged_name, rel))
        return self.files_dir / staged_name

    def put_json(self, rel: str, doc: dict) -> None:
        if "version" not in doc:
            raise ValueError(f"document {rel} lacks a version field")
        staged = self._stage(rel)
        with open(staged, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.flush()
            os.fsync(fh.fileno())

    def put_bytes(self, rel: str, data: bytes) -> None:
        staged = self._stage(rel)
        with open(staged, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())

    def __enter__(self) -> "Transaction":
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is not None:
            shutil.rmtree(self.txn_dir, ignore_errors=True)
            return False
        manifest = self.txn_dir / "manifest.json"
        with open(manifest, "w") as fh:
            json.dump({"files": self._entries}, fh)
            fh.flush()
            os.fsync(fh.fileno())
        if self.store.fail_before_commit:
            raise CrashInjected("crash before commit marker")
        (self.txn_dir / "COMMIT").touch()
        if self.store.fail_after_commit:
            raise CrashInjected("crash after commit marker")
        for staged_name, dest in self._entries:
            os.replace(self.files_dir / staged_name, self.store.root / dest)
        shutil.rmtree(self.txn_dir, ignore_errors=True)
        return False
