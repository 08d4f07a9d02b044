import numpy as np
import pytest
import torch

from ncvqvae.config import make_config
from ncvqvae.data import write_ucr_tsv


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)
    np.random.seed(0)


def write_dataset(root, name, n_train=24, n_test=16, length=32, n_classes=2, seed=0):
    """Small separable sine/square dataset in UCR layout."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, length)

    def draw(n):
        y = np.arange(n) % n_classes
        rng.shuffle(y)
        x = np.stack([np.sin(2 * np.pi * (c + 1) * t + rng.uniform(0, 6)) for c in y])
        return x + 0.1 * rng.normal(size=x.shape), y + 1

    for split, n in (("TRAIN", n_train), ("TEST", n_test)):
        x, y = draw(n)
        write_ucr_tsv(root / name / f"{name}_{split}.tsv", x, y)
    return root


def tiny_config(root, out, **over):
    base = {
        "dataset": "Toy",
        "data_root": str(root),
        "out_dir": str(out),
        "ssl": {"method": "barlow_twins", "proj_hidden": 32, "proj_dim": 32, "iternorm_group_size": 8},
        "tokenizer": {"hidden": 16, "code_dim": 8, "codebook_size": 8, "n_res": 1},
        "stage1": {"epochs": 2, "batch_size": 8},
        "prior": {"hidden_dim": 32, "layers": 1, "heads": 2},
        "stage2": {"epochs": 2, "batch_size": 8},
        "eval": {
            "n_runs": 2,
            "n_generate": 16,
            "n_plot": 5,
            "feature_extractor": {"channels": [8, 8, 8], "epochs": 2},
        },
    }
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            base[k] = {**base[k], **v}
        else:
            base[k] = v
    return make_config(base)


@pytest.fixture
def toy_root(tmp_path):
    return write_dataset(tmp_path / "data", "Toy")


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
