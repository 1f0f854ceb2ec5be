import pytest

from solarscan.imagery import slice_scene, synthesize_scene
from solarscan.synth import random_layouts, truth_label_for


def build_dataset(n_scenes, seed, size=320, empty_tile_fraction=0.4, max_panels=6):
    """Synthetic tiles plus exact ground-truth labels, deterministic in seed."""
    layouts = random_layouts(n_scenes, seed, empty_tile_fraction, max_panels)
    tiles, labels = [], []
    for i, layout in enumerate(layouts):
        scene, truth = synthesize_scene(layout, seed=seed + i, size=size)
        tiles.extend(slice_scene(scene))
        for tile_id, (count, rects) in sorted(truth.items()):
            labels.append(truth_label_for(tile_id, count, rects, "2026-01-01T00:00:00+00:00"))
    return tiles, labels


@pytest.fixture(scope="session")
def synth_dataset():
    return build_dataset(n_scenes=4, seed=11)
