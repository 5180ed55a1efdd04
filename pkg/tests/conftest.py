"""Fixtures compartilhadas e a opção --executar-lentos."""

from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np
import pytest

from core.autograd import Tensor
from models.schemas import MazeSpec
from models.schemas_treino import TrainConfig


def pytest_addoption(parser):
    parser.addoption(
        "--executar-lentos",
        action="store_true",
        default=False,
        help="Executa também os testes marcados como lento (treinos completos).",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--executar-lentos"):
        return
    pular = pytest.mark.skip(reason="teste lento: use --executar-lentos")
    for item in items:
        if "lento" in item.keywords:
            item.add_marker(pular)


def verificar_gradiente(
    perda: Callable[[], float],
    parametros: Dict[str, Tensor],
    grads: Dict[str, np.ndarray],
    rng: np.random.Generator,
    n_coordenadas: int = 100,
    passo: float = 1e-4,
    tolerancia: float = 1e-4,
) -> List[Tuple[str, tuple, float, float]]:
    """
    Compara o gradiente analítico com diferenças centrais.

    Coordenadas que falham com passo 1e-4 são reavaliadas com 1e-6 (o passo
    maior pode atravessar uma quina da ReLU). Devolve as que ainda falham.
    """
    coordenadas = [(nome, idx) for nome, p in parametros.items() for idx in np.ndindex(p.valores.shape)]
    if len(coordenadas) > n_coordenadas:
        escolhidas = rng.choice(len(coordenadas), size=n_coordenadas, replace=False)
        coordenadas = [coordenadas[i] for i in sorted(escolhidas)]

    def numerico(nome, idx, h):
        p = parametros[nome]
        original = p.valores[idx]
        p.valores[idx] = original + h
        mais = perda()
        p.valores[idx] = original - h
        menos = perda()
        p.valores[idx] = original
        return (mais - menos) / (2 * h)

    def erro_relativo(a, n):
        return abs(a - n) / max(abs(a), abs(n), 1e-6)

    falhas = []
    for nome, idx in coordenadas:
        analitico = float(grads[nome][idx])
        n = numerico(nome, idx, passo)
        if erro_relativo(analitico, n) >= tolerancia:
            n = numerico(nome, idx, 1e-6)
            if erro_relativo(analitico, n) >= tolerancia:
                falhas.append((nome, idx, analitico, n))
    return falhas


@pytest.fixture
def gradiente():
    return verificar_gradiente


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def arena():
    """Arena aberta, sem paredes internas."""
    return MazeSpec(nome="aberta", start=(0.5, 0.5))


@pytest.fixture
def config_pequena():
    """Configuração de treino curta, para rodar em segundos."""
    return TrainConfig(
        batch_size=16,
        seed_frames=200,
        pretrain_frames=400,
        finetune_frames=300,
        update_frequency=10,
        hidden_dim=16,
        feature_dim=4,
        buffer_capacity=2000,
        skill_dim=3,
        avaliacao_a_cada=100,
        episodios_avaliacao=1,
        trajetorias_por_skill=2,
        knn_k=3,
        rng_seed=7,
    )


@pytest.fixture
def dir_layouts():
    return Path(__file__).parent.parent / "layouts"
