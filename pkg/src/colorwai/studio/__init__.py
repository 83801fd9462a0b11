"""Orchestration shell: persistence, engine, HTTP API, and CLI."""
