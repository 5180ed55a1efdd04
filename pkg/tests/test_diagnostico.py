import json
import math

import numpy as np
import pytest

from agents.diagnostico import (
    diagnosticar_execucao,
    diagnostico_sintetico,
    grade_de_trajetorias,
    tabela_comparativa,
)
from core.recompensas import Codificador
from models.schemas import MazeSpec
from tools.trajetorias import Trajetoria


def trajetoria(episodio, skill, posicoes):
    posicoes = np.asarray(posicoes, dtype=float)
    n = len(posicoes)
    return Trajetoria(episodio, skill, posicoes, np.zeros((n, 2)), np.zeros(n))


def trajetorias_por_quadrante(rng, por_skill=3, passos=50):
    """Skill z confinada ao quadrante z da arena."""
    cantos = [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)]
    saida = []
    for z, (x0, y0) in enumerate(cantos):
        for j in range(por_skill):
            pontos = rng.uniform(0.01, 0.49, (passos, 2)) + (x0, y0)
            saida.append(trajetoria(z * por_skill + j, z, pontos))
    return saida


@pytest.fixture
def arena_aberta():
    return MazeSpec(nome="aberta", start=(0.5, 0.5))


def test_grade_conta_todas_as_posicoes(arena_aberta, rng):
    trajetorias = trajetorias_por_quadrante(rng)
    grade = grade_de_trajetorias(arena_aberta, trajetorias, 10, 4)
    assert grade.total == 4 * 3 * 50


def test_skills_separadas_por_quadrante(arena_aberta, rng):
    relatorio = diagnosticar_execucao(arena_aberta, trajetorias_por_quadrante(rng), 4, grid_size=10, mine_passos=0)
    assert relatorio["status"] == "sucesso"
    assert relatorio["binned_mi"] == pytest.approx(math.log(4), abs=1e-9)
    assert relatorio["coverage"] > 0.9
    assert relatorio["entropia_excede_log_m"]
    assert relatorio["particle_entropy"] > 0
    assert len(relatorio["per_skill_cell_histograms"]) == 4
    assert "mine_mi" not in relatorio
    json.dumps(relatorio)


def test_estados_colapsados_geram_aviso(arena_aberta):
    colapsadas = [trajetoria(z, z, np.full((20, 2), 0.3)) for z in range(3)]
    with pytest.warns(UserWarning, match="log m"):
        relatorio = diagnosticar_execucao(arena_aberta, colapsadas, 3, mine_passos=0)
    assert not relatorio["entropia_excede_log_m"]
    assert relatorio["binned_mi"] == pytest.approx(0.0, abs=1e-12)
    assert relatorio["particle_entropy"] is None
    assert relatorio["observacoes"]


def test_poucos_estados_omite_entropia_de_particulas(arena_aberta):
    poucas = [trajetoria(0, 0, [[0.1, 0.1], [0.9, 0.9]]), trajetoria(1, 1, [[0.5, 0.1]])]
    relatorio = diagnosticar_execucao(arena_aberta, poucas, 2, knn_k=12, mine_passos=0)
    assert relatorio["particle_entropy"] is None


def test_trajetorias_repetidas_nao_alteram_entropia(arena_aberta, rng):
    unicas = trajetorias_por_quadrante(rng, por_skill=1)
    repetidas = [trajetoria(i * 4 + j, t.skill, t.posicoes) for i, t in enumerate(unicas) for j in range(4)]
    a = diagnosticar_execucao(arena_aberta, unicas, 4, mine_passos=0)
    b = diagnosticar_execucao(arena_aberta, repetidas, 4, mine_passos=0)
    assert b["particle_entropy"] == pytest.approx(a["particle_entropy"], abs=1e-12)
    assert b["binned_mi"] == pytest.approx(a["binned_mi"], abs=1e-12)


def test_sem_estados(arena_aberta):
    with pytest.raises(ValueError):
        diagnosticar_execucao(arena_aberta, [], 2)


def test_mine_sobre_a_execucao(arena_aberta, rng):
    relatorio = diagnosticar_execucao(arena_aberta, trajetorias_por_quadrante(rng), 4, mine_passos=200)
    assert math.isfinite(relatorio["mine_mi"])


def test_verificacoes_com_codificador(arena_aberta, rng):
    codificador = Codificador(2, 8, 4, rng)
    relatorio = diagnosticar_execucao(
        arena_aberta, trajetorias_por_quadrante(rng), 4, mine_passos=0, codificador=codificador
    )
    verificacoes = relatorio["theorem_checks"]
    assert verificacoes["identity_gap"] <= 1e-9
    # 600 estados: agenda restrita aos M que cabem na referência
    assert list(verificacoes["limit_gaps"]) == ["8", "64", "512"]


def test_diagnostico_sintetico_pequeno():
    relatorio = diagnostico_sintetico(rng_seed=0, construcoes_limite=5, construcoes_decomposicao=5, nuvens_limite=3)
    verificacoes = relatorio["theorem_checks"]
    assert verificacoes["bound_violations"] == 0
    assert verificacoes["decomposition_max_violation"] < 1e-12
    assert verificacoes["identity_gap"] <= 1e-9
    assert set(relatorio["suites"]) == {"limite_inferior", "decomposicao", "muitos_negativos"}


@pytest.mark.lento
def test_diagnostico_sintetico_completo():
    assert diagnostico_sintetico()["status"] == "sucesso"


def test_tabela_com_valor_ausente():
    tabela = tabela_comparativa({
        "becl": {"coverage": 0.5, "binned_mi": 1.2, "particle_entropy": None},
        "diayn": {"coverage": 0.25, "binned_mi": 2.0, "particle_entropy": 0.3},
    })
    linhas = tabela.splitlines()
    assert len(linhas) == 3
    assert linhas[1].startswith("becl") and linhas[1].rstrip().endswith("-")
    assert "0.2500" in linhas[2]
