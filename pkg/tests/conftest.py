import numpy as np
import pytest

from colorwai import colorlab, texgen
from colorwai.backends import TextureBackend

CORPUS_SEED = 1000
CODEBOOK_CORPUS = 200


@pytest.fixture(scope="session")
def generator():
    return texgen.ProceduralGenerator()


@pytest.fixture(scope="session")
def palettes(generator):
    return [
        colorlab.extract_palette(
            texgen.synthesize(generator, texgen.sample_latent(generator, CORPUS_SEED + i)))
        for i in range(CODEBOOK_CORPUS)
    ]


@pytest.fixture(scope="session")
def codebook(palettes):
    return colorlab.build_codebook(palettes, 19)


@pytest.fixture(scope="session")
def texture_backend(generator):
    return TextureBackend(generator)


@pytest.fixture(scope="session")
def coupled_default(texture_backend, codebook):
    """The default coupled dataset (n=1000) shared across tests."""
    from colorwai import disentangle

    return disentangle.couple(texture_backend, codebook, n=1000, seed=0)


@pytest.fixture(scope="session")
def diffusion_corpus(generator):
    gen32 = texgen.ProceduralGenerator(generator.mapping_seed, generator.latent_dim, 32)
    return np.stack([
        texgen.synthesize(gen32, texgen.sample_latent(gen32, CORPUS_SEED + i))
        for i in range(256)
    ])


@pytest.fixture(scope="session")
def small_denoiser(diffusion_corpus):
    """Lightly trained denoiser for unit tests (full budget lives in acceptance)."""
    from colorwai import diffgen

    sched = diffgen.NoiseSchedule.linear()
    den = diffgen.train_denoiser(diffusion_corpus[:64], sched, epochs=4, seed=0)
    return den, sched
