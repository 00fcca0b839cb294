"""Shared fixtures: a small deterministic perceptron checkpoint and inputs."""

import numpy as np
import pytest
import torch
from torch import nn


def build_perceptron() -> nn.Module:
    torch.manual_seed(0)
    return nn.Sequential(nn.Linear(8, 16), nn.ReLU(), nn.Linear(16, 4))


@pytest.fixture()
def perceptron_path(tmp_path):
    path = tmp_path / "perceptron.pt"
    torch.save(build_perceptron(), path)
    return path


@pytest.fixture()
def inputs_path(tmp_path):
    rng = np.random.default_rng(42)
    path = tmp_path / "inputs.npy"
    np.save(path, rng.standard_normal((100, 8)))
    return path
