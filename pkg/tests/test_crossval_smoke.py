"""Full 10-fold smoke run at desk scale. Slow (~45 min); run with -m slow."""

import numpy as np
import pytest

from wetlandseg.folds import cross_validate
from wetlandseg.model import build_netspec, halo_of
from wetlandseg.optim import TrainConfig
from wetlandseg.synthmap import SynthConfig, generate, generate_corpus


@pytest.mark.slow
def test_pooled_f1_over_all_folds():
    scene = generate(SynthConfig(seed=42, rows=1024, cols=1024, pixel_size=5.0,
                                 wetland_fraction=0.2))
    spec = build_netspec(hidden_channels=(16, 8, 8, 8, 8, 8))
    corpus = generate_corpus(scene, halo_of(spec))
    config = TrainConfig(epochs=15, batch_size=16, learning_rate=1e-4, seed=42)
    result = cross_validate(corpus.tiles, spec, config)
    for fr in result.per_fold:
        print(f"fold {fr.fold}: {fr.scores}")
    print(f"pooled: {result.pooled}; macro: {result.macro}")
    assert len(result.per_fold) == 10
    assert result.pooled.f1 is not None
    assert result.pooled.f1 >= 0.80
