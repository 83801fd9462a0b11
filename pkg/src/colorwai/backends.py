"""Backend adapters: one uniform surface over the texture generator and the
diffusion model so coupling, evaluation, and the studio never branch on
which generator is underneath.

A backend knows how to sample a reference (seeded), expose its latent code in
the direction-fit space, render it, and render directional edits of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from colorwai import diffgen, texgen
from colorwai.colorlab import AnnotationConfig, ColorCodebook, annotate_main_color
from colorwai.diffgen import Denoiser, MixingConfig, NoiseSchedule
from colorwai.disentangle import DirectionSpec, edit_latent
from colorwai.texgen import LatentCode, ProceduralGenerator


class TextureBackend:
    """Direct latent-space backend over the procedural generator."""

    def __init__(self, gen: ProceduralGenerator):
        self.gen = gen
        self.backend_id = "texgen"
        self.space_tag = gen.space_tag
        self.latent_dim = gen.latent_dim

    def sample_ref(self, seed: int) -> LatentCode:
        return texgen.sample_latent(self.gen, seed)

    def code_of(self, ref: LatentCode) -> np.ndarray:
        return ref.coords

    def ref_from_code(self, code: np.ndarray) -> LatentCode:
        return LatentCode(coords=np.asarray(code, dtype=np.float64))

    def render(self, ref: LatentCode) -> np.ndarray:
        return texgen.synthesize(self.gen, ref)

    def render_edit(self, ref: LatentCode, direction: DirectionSpec,
                    alpha: float) -> np.ndarray:
        return texgen.synthesize(self.gen, edit_latent(ref, direction, alpha))

    def render_edits(self, ref: LatentCode, direction: DirectionSpec, alphas) -> list:
        return [self.render_edit(ref, direction, a) for a in alphas]

    def couple_rows(self, book: ColorCodebook, n: int, seed: int,
                    cfg: AnnotationConfig):
        codes = np.empty((n, self.gen.latent_dim))
        ids = np.empty(n, dtype=np.int64)
        for i in range(n):
            ref = self.sample_ref(seed + i)
            codes[i] = ref.coords
            ids[i] = annotate_main_color(self.render(ref), book, cfg)
        return codes, ids


@dataclass
class DiffusionRef:
    """One inverted source image: only the states the pipeline reads back."""

    seed: int
    source: np.ndarray
    state_mix: np.ndarray
    state_top: np.ndarray
    image_shape: tuple


class DiffusionBackend:
    """h-space (or input-space) backend over a trained denoiser.

    Source images come from a paired low-resolution texture generator;
    references carry their inversion states at the mixing step and at T.
    """

    def __init__(self, den: Denoiser, sched: NoiseSchedule,
                 source_gen: ProceduralGenerator, steps: int = 50,
                 mix: MixingConfig = MixingConfig()):
        self.den = den
        self.sched = sched
        self.source_gen = source_gen
        self.steps = steps
        self.mix = mix
        self.backend_id = "diffgen"
        self.space_tag = "h-analog" if mix.target == "h-space" else "xt-analog"
        self.t_mix = diffgen.snap_to_tau(sched, steps, mix.t_mix)
        self.latent_dim = den.h_width if mix.target == "h-space" else den.in_dim
        self._cache: dict[int, DiffusionRef] = {}

    def sample_ref(self, seed: int) -> DiffusionRef:
        if seed in self._cache:
            return self._cache[seed]
        img = texgen.synthesize(self.source_gen, texgen.sample_latent(self.source_gen, seed))
        ref = self._invert(img, seed)
        self._cache[seed] = ref
        return ref

    def ref_from_image(self, img: np.ndarray, seed: int = -1) -> DiffusionRef:
        return self._invert(np.asarray(img, dtype=np.float64), seed)

    def _invert(self, img: np.ndarray, seed: int) -> DiffusionRef:
        taus = diffgen.ddim_taus(self.sched, self.steps)
        x = diffgen.image_to_state(img)[None, :]
        state_mix = x[0].copy() if self.t_mix == 0 else None
        for i in range(len(taus) - 1):
            x = diffgen._move(x, int(taus[i]), int(taus[i + 1]), self.den, self.sched)
            if int(taus[i + 1]) == self.t_mix:
                state_mix = x[0].copy()
        return DiffusionRef(seed=seed, source=img, state_mix=state_mix,
                            state_top=x[0].copy(), image_shape=img.shape)

    def code_of(self, ref: DiffusionRef) -> np.ndarray:
        if self.mix.target == "h-space":
            return diffgen.h_activation(self.den, ref.state_mix, self.t_mix)
        return ref.state_mix.copy()

    def render(self, ref: DiffusionRef) -> np.ndarray:
        """Reconstruction from the mixing step: the exact alpha -> 0 limit of
        render_edit, so a zero-strength colorway reproduces it bitwise."""
        x = diffgen._resample(ref.state_mix, self.t_mix, self.den, self.sched, self.steps)
        return diffgen.state_to_image(x[0], ref.image_shape)

    def _check(self, direction: DirectionSpec) -> None:
        if direction.space_tag != self.space_tag:
            raise ValueError("direction/space mismatch")

    def render_edit(self, ref: DiffusionRef, direction: DirectionSpec,
                    alpha: float) -> np.ndarray:
        return self.render_edits(ref, direction, [alpha])[0]

    def render_edits(self, ref: DiffusionRef, direction: DirectionSpec, alphas) -> list:
        self._check(direction)
        alphas = np.asarray(list(alphas), dtype=np.float64)
        if self.mix.target == "h-space":
            stack = np.repeat(ref.state_mix[None, :], len(alphas), axis=0)
            shift = alphas[:, None] * direction.vector[None, :]
            x = diffgen._resample(stack, self.t_mix, self.den, self.sched,
                                  self.steps, h_shift=shift, shift_below=self.t_mix)
        else:
            stack = ref.state_mix[None, :] + alphas[:, None] * direction.vector[None, :]
            x = diffgen._resample(stack, self.t_mix, self.den, self.sched, self.steps)
        return [diffgen.state_to_image(row, ref.image_shape) for row in x]

    def couple_rows(self, book: ColorCodebook, n: int, seed: int,
                    cfg: AnnotationConfig):
        """Render n seeded source images, annotate them, invert the whole
        stack together, and read the mixing-step latents."""
        images = np.stack([
            texgen.synthesize(self.source_gen, texgen.sample_latent(self.source_gen, seed + i))
            for i in range(n)
        ])
        ids = np.array([annotate_main_color(img, book, cfg) for img in images],
                       dtype=np.int64)
        states, reached = diffgen.invert_batch(images, self.den, self.sched,
                                               self.steps, up_to=self.mix.t_mix)
        if self.mix.target == "h-space":
            codes = self.den.h_activation_batch(states, reached)
        else:
            codes = states
        return codes, ids
