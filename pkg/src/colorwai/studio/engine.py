"""Studio engine: owns the backends, codebook, direction sets, and the
pattern/colorway/board operations the API and CLI expose."""

from __future__ import annotations

import datetime
import hashlib
import io
import json
import re
import threading
import time
from dataclasses import dataclass

import numpy as np
from PIL import Image

from colorwai import colorlab, diffgen, disentangle, evalkit, texgen
from colorwai.backends import DiffusionBackend, TextureBackend
from colorwai.colorlab import AnnotationConfig, ColorCodebook
from colorwai.diffgen import Denoiser, NoiseSchedule
from colorwai.disentangle import DirectionSet, FitConfig, LatentDataset
from colorwai.evalkit import EvalConfig
from colorwai.numerics import ssim
from colorwai.studio.store import WorkspaceStore

PATTERN_VERSION = 1
BOARD_VERSION = 1
BOARD_MAX_PINS = 24
DIFFUSION_RESOLUTION = 32


class NotFoundError(KeyError):
    """Unknown id or backend (maps to HTTP 404)."""


class ValidationError(ValueError):
    """Bad request content (maps to HTTP 400 / CLI exit 2)."""


class BusyError(RuntimeError):
    """A conflicting long-running job already holds the resource."""


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _content_id(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Job:
    id: str
    kind: str
    state: str = "queued"  # queued | running | done | error
    progress: float = 0.0
    result: dict | None = None
    error: str | None = None

    def to_document(self) -> dict:
        return {
            "id": self.id, "kind": self.kind, "state": self.state,
            "progress": self.progress, "result": self.result, "error": self.error,
        }


class StudioEngine:
    def __init__(self, store: WorkspaceStore,
                 annotation: AnnotationConfig = AnnotationConfig(),
                 eval_cfg: EvalConfig = EvalConfig()):
        self.store = store
        self.annotation = annotation
        self.eval_cfg = eval_cfg
        self._backends: dict = {}
        self._jobs: dict[str, Job] = {}
        self._job_counter = 0
        self._train_locks = {"texgen": threading.Lock(), "diffgen": threading.Lock()}
        self._jobs_lock = threading.Lock()

    # -- backends -------------------------------------------------------

    def texture_generator(self) -> texgen.ProceduralGenerator:
        if self.store.exists("generator.json"):
            return texgen.ProceduralGenerator.from_document(
                self.store.read_json("generator.json"))
        gen = texgen.ProceduralGenerator()
        doc = gen.to_document()
        doc["version"] = 1
        self.store.write_json("generator.json", doc)
        return gen

    def source_generator(self) -> texgen.ProceduralGenerator:
        gen = self.texture_generator()
        return texgen.ProceduralGenerator(gen.mapping_seed, gen.latent_dim,
                                          DIFFUSION_RESOLUTION)

    def backend(self, backend_id: str):
        if backend_id in self._backends:
            return self._backends[backend_id]
        if backend_id == "texgen":
            b = TextureBackend(self.texture_generator())
        elif backend_id == "diffgen":
            if not self.store.exists("denoiser.bin"):
                raise NotFoundError("diffusion backend not trained yet")
            den, sched = Denoiser.load(self.store.path("denoiser.bin"))
            b = DiffusionBackend(den, sched, self.source_generator())
        else:
            raise NotFoundError(f"unknown backend {backend_id!r}")
        self._backends[backend_id] = b
        return b

    def backends_info(self) -> list:
        infos = [{
            "id": "texgen", "kind": "procedural", "ready": True,
            "space_tag": "w-analog",
            "resolution": self.texture_generator().resolution,
            "alpha_max": self.eval_cfg.alpha_max,
        }]
        infos.append({
            "id": "diffgen", "kind": "diffusion",
            "ready": self.store.exists("denoiser.bin"),
            "space_tag": "h-analog", "resolution": DIFFUSION_RESOLUTION,
            "alpha_max": self.eval_cfg.alpha_max,
        })
        return infos

    def train_diffusion(self, corpus_n: int = 256, epochs: int = 50,
                        seed: int = 0, progress=None) -> dict:
        lock = self._train_locks["diffgen"]
        if not lock.acquire(blocking=False):
            raise BusyError("a diffusion training job is already running")
        try:
            gen32 = self.source_generator()
            corpus = np.stack([
                texgen.synthesize(gen32, texgen.sample_latent(gen32, 1000 + i))
                for i in range(corpus_n)
            ])
            if progress:
                progress(0.2)
            sched = NoiseSchedule.linear()
            den = diffgen.train_denoiser(corpus, sched, epochs=epochs, seed=seed)
            if progress:
                progress(0.9)
            den.save(self.store.path("denoiser.bin"), sched)
            self._backends.pop("diffgen", None)
            return {"final_loss": den.final_loss, "epochs": epochs}
        finally:
            lock.release()

    # -- codebook ---------------------------------------------------------

    def codebook(self) -> ColorCodebook:
        if not self.store.exists("codebook.json"):
            raise NotFoundError("no codebook in workspace; run build-codebook")
        return ColorCodebook.from_document(self.store.read_json("codebook.json"))

    def build_codebook(self, corpus_n: int = 200, seed: int = 1000,
                       k: int = 19) -> ColorCodebook:
        gen = self.texture_generator()
        palettes = [
            colorlab.extract_palette(
                texgen.synthesize(gen, texgen.sample_latent(gen, seed + i)),
                self.annotation)
            for i in range(corpus_n)
        ]
        book = colorlab.build_codebook(palettes, k)
        self.store.write_json("codebook.json", book.to_document())
        return book

    # -- datasets and directions ------------------------------------------

    def couple_dataset(self, backend_id: str, n: int = 1000, seed: int = 0) -> LatentDataset:
        book = self.codebook()
        backend = self.backend(backend_id)
        data = disentangle.couple(backend, book, n=n, seed=seed, cfg=self.annotation)
        path = self.store.path(f"datasets/{backend_id}.npz")
        np.savez_compressed(
            path, codes=data.codes, color_ids=data.color_ids,
            meta=json.dumps({
                "version": 1, "space_tag": data.space_tag,
                "backend": data.backend_id, "codebook_version": data.codebook_version,
                "n": data.n, "seed": seed,
            }))
        return data

    def load_dataset(self, backend_id: str) -> LatentDataset:
        path = self.store.path(f"datasets/{backend_id}.npz")
        if not path.exists():
            raise NotFoundError(f"no coupled dataset for {backend_id!r}; run couple")
        archive = np.load(path, allow_pickle=False)
        meta = json.loads(str(archive["meta"]))
        return LatentDataset(
            codes=archive["codes"], color_ids=archive["color_ids"],
            space_tag=meta["space_tag"], backend_id=meta["backend"],
            codebook_version=meta["codebook_version"],
        )

    def _direction_versions(self, backend_id: str, method: str) -> list:
        pattern = re.compile(rf"^{backend_id}-{method}-v(\d+)\.json$")
        versions = []
        for name in self.store.list_documents("directions"):
            m = pattern.match(name)
            if m:
                versions.append(int(m.group(1)))
        return sorted(versions)

    def save_directions(self, dirset: DirectionSet) -> int:
        versions = self._direction_versions(dirset.backend_id, dirset.method)
        next_v = (versions[-1] + 1) if versions else 1
        rel = f"directions/{dirset.backend_id}-{dirset.method}-v{next_v}.json"
        self.store.write_json(rel, dirset.to_document())
        return next_v

    def directions(self, backend_id: str, method: str) -> DirectionSet:
        versions = self._direction_versions(backend_id, method)
        if not versions:
            raise NotFoundError("directions not fitted")
        rel = f"directions/{backend_id}-{method}-v{versions[-1]}.json"
        return DirectionSet.from_document(self.store.read_json(rel))

    def fit_directions(self, backend_id: str, cfg: FitConfig,
                       n: int = 1000, seed: int = 0,
                       reuse_dataset: bool = True) -> tuple[DirectionSet, int]:
        try:
            data = self.load_dataset(backend_id) if reuse_dataset else None
        except NotFoundError:
            data = None
        if data is None:
            data = self.couple_dataset(backend_id, n=n, seed=seed)
        book = self.codebook()
        dirset = disentangle.fit_all(data, book, cfg)
        version = self.save_directions(dirset)
        return dirset, version

    # -- patterns -----------------------------------------------------------

    def _pattern_rel(self, pattern_id: str) -> str:
        return f"patterns/{pattern_id}.json"

    def create_pattern(self, backend_id: str, seed: int) -> dict:
        backend = self.backend(backend_id)
        book = self.codebook()
        pattern_id = _content_id({"backend": backend_id, "seed": seed})
        rel = self._pattern_rel(pattern_id)
        if self.store.exists(rel):
            return self.store.read_json(rel)
        ref = backend.sample_ref(seed)
        img = backend.render(ref)
        color_id = colorlab.annotate_main_color(img, book, self.annotation)
        doc = {
            "version": PATTERN_VERSION,
            "id": pattern_id,
            "backend": backend_id,
            "seed": seed,
            "latent": np.asarray(backend.code_of(ref)).tolist(),
            "color_id": int(color_id),
            "image": f"blobs/{pattern_id}.png",
            "created_at": _now(),
            "request": None,
        }
        with self.store.transaction() as txn:
            txn.put_bytes(doc["image"], colorlab.image_png_bytes(img))
            txn.put_json(rel, doc)
        return doc

    def get_pattern(self, pattern_id: str) -> dict:
        rel = self._pattern_rel(pattern_id)
        if not self.store.exists(rel):
            raise NotFoundError(f"unknown pattern {pattern_id!r}")
        return self.store.read_json(rel)

    def pattern_png(self, pattern_id: str) -> bytes:
        doc = self.get_pattern(pattern_id)
        return self.store.read_bytes(doc["image"])

    def _ref_for_pattern(self, backend, doc: dict):
        if backend.backend_id == "texgen":
            return backend.ref_from_code(np.asarray(doc["latent"], dtype=np.float64))
        return backend.sample_ref(int(doc["seed"]))

    def create_colorway(self, pattern_id: str, color_id: int, method: str,
                        alpha, backend_override: str | None = None) -> dict:
        source = self.get_pattern(pattern_id)
        backend_id = backend_override or source["backend"]
        backend = self.backend(backend_id)
        book = self.codebook()
        if not 0 <= int(color_id) < len(book):
            raise ValidationError(f"invalid color id {color_id}")
        dirset = self.directions(backend_id, method)
        try:
            direction = dirset.get(int(color_id))
        except KeyError as exc:
            raise ValidationError(str(exc)) from exc
        if alpha == "optimal":
            if direction.alpha_optimal is None:
                raise ValidationError(
                    "alpha_optimal not stored for this direction; run eval first")
            alpha_value = float(direction.alpha_optimal)
        else:
            alpha_value = float(alpha)

        warnings = []
        if int(source["color_id"]) == int(color_id):
            warnings.append("already-target")

        ref = self._ref_for_pattern(backend, source)
        source_img = backend.render(ref)
        edited = backend.render_edit(ref, direction, alpha_value)
        achieved = colorlab.annotate_main_color(edited, book, self.annotation)
        fidelity = float(ssim(source_img, edited, self.eval_cfg.ssim))

        request_echo = {
            "pattern_id": pattern_id, "color_id": int(color_id),
            "method": method, "alpha": alpha if alpha == "optimal" else alpha_value,
            "backend": backend_id,
        }
        new_id = _content_id({"source": pattern_id, "request": request_echo})
        rel = self._pattern_rel(new_id)
        doc = {
            "version": PATTERN_VERSION,
            "id": new_id,
            "backend": backend_id,
            "seed": source["seed"],
            "latent": np.asarray(
                backend.code_of(ref) + alpha_value * direction.vector
                if backend_id == "texgen" else backend.code_of(ref)
            ).tolist(),
            "color_id": int(achieved),
            "image": f"blobs/{new_id}.png",
            "created_at": _now(),
            "request": request_echo,
            "achieved_color": int(achieved),
            "ssim": fidelity,
            "warnings": warnings,
        }
        with self.store.transaction() as txn:
            txn.put_bytes(doc["image"], colorlab.image_png_bytes(edited))
            txn.put_json(rel, doc)
        return doc

    # -- boards -------------------------------------------------------------

    def save_board(self, board: dict) -> dict:
        board = dict(board)
        board.setdefault("version", BOARD_VERSION)
        board.setdefault("id", _content_id({"board": board.get("name", ""), "t": time.time()}))
        board.setdefault("name", board["id"])
        board.setdefault("created_at", _now())
        board["updated_at"] = _now()
        pinned = board.get("pinned", [])
        if len(pinned) > BOARD_MAX_PINS:
            raise ValidationError(f"board exceeds {BOARD_MAX_PINS} pins")
        dangling = [p["pattern_id"] for p in pinned
                    if not self.store.exists(self._pattern_rel(p["pattern_id"]))]
        if dangling:
            raise ValidationError(f"dangling pattern ids: {dangling}")
        self.store.write_json(f"boards/{board['id']}.json", board)
        return board

    def load_board(self, board_id: str) -> dict:
        rel = f"boards/{board_id}.json"
        if not self.store.exists(rel):
            raise NotFoundError(f"unknown board {board_id!r}")
        return self.store.read_json(rel)

    def list_boards(self) -> list:
        return [self.store.read_json(f"boards/{name}")
                for name in self.store.list_documents("boards")]

    def export_board_png(self, board_id: str, tile: int = 160, margin: int = 8) -> bytes:
        board = self.load_board(board_id)
        pins = board.get("pinned", [])
        if not pins:
            raise ValidationError("board has no pinned patterns")
        cols = int(np.ceil(np.sqrt(len(pins))))
        rows = int(np.ceil(len(pins) / cols))
        sheet = Image.new("RGB", (cols * (tile + margin) + margin,
                                  rows * (tile + margin) + margin), "white")
        for i, pin in enumerate(pins):
            png = self.pattern_png(pin["pattern_id"])
            img = Image.open(io.BytesIO(png)).convert("RGB").resize((tile, tile), Image.NEAREST)
            r, c = divmod(i, cols)
            sheet.paste(img, (margin + c * (tile + margin), margin + r * (tile + margin)))
        buf = io.BytesIO()
        sheet.save(buf, format="PNG")
        return buf.getvalue()

    # -- evaluation -----------------------------------------------------------

    def run_eval(self, backend_id: str, method: str,
                 cfg: EvalConfig | None = None) -> dict:
        cfg = cfg or self.eval_cfg
        book = self.codebook()
        backend = self.backend(backend_id)
        dirset = self.directions(backend_id, method)
        report = evalkit.evaluate(backend, book, dirset, cfg)
        version = self.save_directions(dirset)  # alphas now filled in
        base = f"reports/eval-{backend_id}-{method}"
        self.store.write_json(base + ".json", report.to_document())
        report.write_csv(self.store.path(base + "-rows.csv"),
                         self.store.path(base + "-confusion.csv"))
        doc = report.to_document()
        doc["directions_version"] = version
        return doc

    def run_representation_report(self, backend_id: str, method: str) -> dict:
        dirset = self.directions(backend_id, method)
        report = evalkit.representation_report(dirset)
        base = f"reports/representation-{backend_id}-{method}"
        self.store.write_json(base + ".json", report.to_document())
        report.write_csv(self.store.path(base + "-cosine.csv"),
                         self.store.path(base + "-overlap.csv"))
        return report.to_document()

    # -- jobs -----------------------------------------------------------------

    def submit_job(self, kind: str, params: dict) -> Job:
        with self._jobs_lock:
            self._job_counter += 1
            job = Job(id=f"job-{self._job_counter:04d}", kind=kind)
            self._jobs[job.id] = job

        def run():
            job.state = "running"
            try:
                if kind == "fit":
                    cfg = FitConfig(
                        method=params.get("method", "shapleyvec"),
                        kind=params.get("kind", "logistic"),
                        c_reg=float(params.get("c_reg", 0.1)),
                        k=int(params.get("k", 40)),
                        explanation=float(params.get("explanation", 0.5)),
                        seed=int(params.get("seed", 0)),
                    )
                    job.progress = 0.1
                    _, version = self.fit_directions(
                        params["backend"], cfg,
                        n=int(params.get("n", 1000)),
                        seed=int(params.get("seed", 0)))
                    job.result = {"directions_version": version}
                elif kind == "train":
                    result = self.train_diffusion(
                        corpus_n=int(params.get("corpus_n", 256)),
                        epochs=int(params.get("epochs", 50)),
                        seed=int(params.get("seed", 0)),
                        progress=lambda p: setattr(job, "progress", p))
                    job.result = result
                else:
                    raise ValidationError(f"unknown job kind {kind!r}")
                job.progress = 1.0
                job.state = "done"
            except Exception as exc:  # pragma: no cover - surfaced via status
                job.state = "error"
                job.error = str(exc)

        threading.Thread(target=run, daemon=True).start()
        return job

    def job_status(self, job_id: str) -> Job:
        if job_id not in self._jobs:
            raise NotFoundError(f"unknown job {job_id!r}")
        return self._jobs[job_id]
