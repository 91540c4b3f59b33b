"""Cross-package interop: files written by the exporter CLI must load
through this package's readers with zero warnings.

Skipped unless the exporter has been built (cd exporter && npm install &&
npm run build).
"""

import shutil
import subprocess
import warnings
from pathlib import Path

import numpy as np
import pytest

from ovpost import formats

EXPORTER = Path(__file__).resolve().parent.parent / "exporter"
CLI = EXPORTER / "dist" / "cli.js"

pytestmark = pytest.mark.skipif(
    not CLI.exists() or shutil.which("node") is None,
    reason="exporter not built (run npm install && npm run build in exporter/)",
)


def _run(*args):
    subprocess.run(["node", str(CLI), *args], check=True, capture_output=True)


def test_text_export_loads_clean(tmp_path):
    names = tmp_path / "names.txt"
    names.write_text("kitchen\nbeach\nforest road\n")
    out = tmp_path / "table.embtab"
    _run("text", "--names", str(names), "--template", "Part of {scene}",
         "--dim", "64", "-o", str(out))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        table = formats.load_embedding_table(out)
    assert caught == []
    assert table.names == ["Part of kitchen", "Part of beach", "Part of forest road"]
    assert np.allclose(np.linalg.norm(table.vectors, axis=1), 1.0, atol=1e-5)
    assert any("hashenc-v1" in c for c in table.comments)


def test_scene_vocabulary_has_365_entries():
    vocab = EXPORTER / "data" / "scene_names_365.txt"
    names = [line for line in vocab.read_text().splitlines() if line.strip()]
    assert len(names) == 365
    assert len(set(names)) == 365


def test_scene_contexts_from_rendered_world(tmp_path):
    from ovpost.synth import SyntheticWorldSpec, generate_synthetic_world, render_images

    world = generate_synthetic_world(
        SyntheticWorldSpec(n_images=4, image_w=64, image_h=48, seed=2)
    )
    render_images(world, tmp_path / "images")
    out = tmp_path / "contexts.txt"
    _run("scenes", "--images-dir", str(tmp_path / "images"), "-o", str(out))
    contexts = formats.load_scene_contexts(out)
    assert len(contexts) == 4
    for ctx in contexts:
        probs = [p for _, p in ctx.scenes]
        assert abs(sum(probs) - 1.0) < 1e-6
