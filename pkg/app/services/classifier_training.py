"""
Offline training of the smoothness classifier.

Labeled stencils are sampled from synthetic one-dimensional functions of
known regularity; a small fully connected network is trained with torch and
exported to the weight file read by ``AnnClassifier``.

Families (label = class):
    jump (1)    step inside the stencil on a small smooth background
    kink (2)    ``|t - t0|`` corner with at least two points on each side
    zigzag (3)  oscillation with a wavelength of 2 to 3.5 cells
    smooth (4)  long-wave sines, parabolas with interior extrema, exponentials
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
from loguru import logger
from torch.utils.data import DataLoader, Dataset

from app.core.exceptions import TrainingError
from app.services.classifier import (
    AnnClassifier,
    ClassifierWeights,
    N_CLASSES,
    normalize_stencils,
    write_weights,
)

FAMILIES = ("jump", "kink", "zigzag", "smooth")
_MIN_RANGE = 1e-6


@dataclass
class TrainingConfig:
    stencil: int = 7
    hidden: tuple[int, ...] = (16, 16, 16, 16)
    samples_per_class: int = 5000
    test_samples_per_class: int = 1000
    epochs: int = 40
    batch_size: int = 256
    learning_rate: float = 5e-3
    min_accuracy: float = 0.95
    seed: int = 0
    output: Optional[str] = None


@dataclass
class TrainingReport:
    accuracy: float
    per_class: dict[str, float]
    train_loss: float
    epochs: int
    weights_path: Optional[str] = None
    history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class": self.per_class,
            "train_loss": self.train_loss,
            "epochs": self.epochs,
            "weights_path": self.weights_path,
        }


def _jump(rng, t):
    t0 = rng.uniform(-2.5, 2.5)
    height = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 1.0)
    slope = rng.uniform(-0.1, 0.1) * abs(height)
    curv = rng.uniform(-0.02, 0.02) * abs(height)
    return height * (t > t0) + slope * t + curv * t * t


def _kink(rng, t):
    t0 = rng.uniform(-1.5, 1.5)
    b = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 1.0)
    slope = rng.uniform(-0.5, 0.5) * abs(b)
    return b * np.abs(t - t0) + slope * t


def _zigzag(rng, t):
    wavelength = rng.uniform(2.0, 3.5)
    phase = rng.uniform(0.3, np.pi - 0.3) + rng.choice([0.0, np.pi])
    slope = rng.uniform(-0.1, 0.1)
    return np.sin(2 * np.pi * t / wavelength + phase) + slope * t


def _smooth(rng, t):
    kind = rng.integers(3)
    if kind == 0:
        wavelength = rng.uniform(14.0, 60.0)
        return np.sin(2 * np.pi * t / wavelength + rng.uniform(0, 2 * np.pi))
    if kind == 1:
        vertex = rng.uniform(-3.0, 3.0)
        return rng.choice([-1.0, 1.0]) * (t - vertex) ** 2 + rng.uniform(-1, 1)
    return np.exp(rng.uniform(-0.4, 0.4) * t)


_GENERATORS = (_jump, _kink, _zigzag, _smooth)


def generate_stencils(
    samples_per_class: int, stencil: int = 7, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """
    Normalized labeled stencils ``(X, y)`` with ``y`` in ``0..3`` (class - 1).

    Samples whose range is numerically zero are redrawn.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(stencil) - stencil // 2
    X = np.empty((N_CLASSES * samples_per_class, stencil))
    y = np.repeat(np.arange(N_CLASSES), samples_per_class)
    row = 0
    for gen in _GENERATORS:
        for _ in range(samples_per_class):
            values = gen(rng, t)
            while np.ptp(values) < _MIN_RANGE:
                values = gen(rng, t)
            X[row] = values
            row += 1
    normalized, _ = normalize_stencils(X)
    return normalized, y


class StencilDataset(Dataset):
    def __init__(self, X: np.ndarray, y: np.ndarray):
        self.X = torch.as_tensor(X, dtype=torch.float32)
        self.y = torch.as_tensor(y, dtype=torch.long)

    def __len__(self):
        return len(self.y)

    def __getitem__(self, idx):
        return self.X[idx], self.y[idx]


def build_network(stencil: int, hidden: tuple[int, ...]) -> nn.Sequential:
    layers: list[nn.Module] = []
    n_in = stencil
    for width in hidden:
        layers += [nn.Linear(n_in, width), nn.Tanh()]
        n_in = width
    layers.append(nn.Linear(n_in, N_CLASSES))
    return nn.Sequential(*layers)


def export_weights(net: nn.Sequential, stencil: int) -> ClassifierWeights:
    linears = [m for m in net if isinstance(m, nn.Linear)]
    sizes = [stencil] + [m.out_features for m in linears]
    return ClassifierWeights(
        sizes=sizes,
        weights=[m.weight.detach().cpu().double().numpy() for m in linears],
        biases=[m.bias.detach().cpu().double().numpy() for m in linears],
        activation=0,
    )


def evaluate(classifier: AnnClassifier, X: np.ndarray, y: np.ndarray) -> tuple[float, dict]:
    """Overall and per-family accuracy of ``classifier`` on normalized stencils."""
    predicted = np.argmax(classifier.probabilities(X), axis=-1)
    per_class = {
        name: float(np.mean(predicted[y == k] == k)) for k, name in enumerate(FAMILIES)
    }
    return float(np.mean(predicted == y)), per_class


def train_classifier(config: Optional[TrainingConfig] = None) -> tuple[AnnClassifier, TrainingReport]:
    """
    Train, evaluate on a held-out set and (optionally) write the weight file.

    Raises:
        TrainingError: If held-out accuracy is below ``config.min_accuracy``.
    """
    config = config or TrainingConfig()
    torch.manual_seed(config.seed)
    X, y = generate_stencils(config.samples_per_class, config.stencil, config.seed)
    X_test, y_test = generate_stencils(
        config.test_samples_per_class, config.stencil, config.seed + 1
    )
    loader = DataLoader(
        StencilDataset(X, y),
        batch_size=config.batch_size,
        shuffle=True,
        generator=torch.Generator().manual_seed(config.seed),
    )
    net = build_network(config.stencil, config.hidden)
    optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    scheduler = torch.optim.lr_scheduler.StepLR(optimizer, step_size=15, gamma=0.3)
    criterion = nn.CrossEntropyLoss()

    logger.info(
        f"Training classifier: {len(y)} stencils, hidden={config.hidden}, epochs={config.epochs}"
    )
    history = []
    for epoch in range(config.epochs):
        net.train()
        total = 0.0
        for xb, yb in loader:
            optimizer.zero_grad()
            loss = criterion(net(xb), yb)
            loss.backward()
            optimizer.step()
            total += loss.item() * len(yb)
        scheduler.step()
        history.append(total / len(y))
        if (epoch + 1) % 10 == 0:
            logger.debug(f"epoch {epoch + 1}: loss={history[-1]:.4f}")

    net.eval()
    classifier = AnnClassifier(export_weights(net, config.stencil))
    accuracy, per_class = evaluate(classifier, X_test, y_test)
    report = TrainingReport(accuracy, per_class, history[-1], config.epochs, history=history)
    logger.info(f"Held-out accuracy {accuracy:.4f} per class {per_class}")
    if accuracy < config.min_accuracy:
        logger.error(f"Classifier accuracy {accuracy:.4f} below {config.min_accuracy}")
        raise TrainingError(
            "held-out accuracy below threshold",
            accuracy=accuracy,
            threshold=config.min_accuracy,
            per_class=per_class,
        )
    if config.output:
        report.weights_path = str(write_weights(classifier.weights, Path(config.output)))
    return classifier, report
