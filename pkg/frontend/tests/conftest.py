import json
import shutil
import subprocess

import pytest
import torch

from rendernet import FeatureExtractor

SPLATPIX = shutil.which("splatpix")


def make_dataset(out_dir, n_subjects=3, cameras=2, width=48, height=64, seed=9,
                 train_fraction=0.8, rig_size=6):
    """Small paired dataset produced by the geometry pipeline's CLI."""
    if SPLATPIX is None:
        pytest.skip("splatpix CLI not installed")
    config = {
        "out_dir": str(out_dir),
        "n_subjects": n_subjects,
        "cameras_per_subject": cameras,
        "rig_size": rig_size,
        "image_width": width,
        "image_height": height,
        "seed": seed,
        "train_fraction": train_fraction,
    }
    config_path = out_dir.parent / f"{out_dir.name}_config.json"
    config_path.write_text(json.dumps(config))
    subprocess.run([SPLATPIX, "--threads", "2", "dataset-gen",
                    "--config", str(config_path)], check=True)
    return out_dir / "manifest.json"


@pytest.fixture(scope="session")
def tiny_manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "tiny"
    return make_dataset(out)


@pytest.fixture(scope="session")
def extractor():
    return FeatureExtractor()


@pytest.fixture(autouse=True)
def _fixed_torch_seed():
    torch.manual_seed(1234)
