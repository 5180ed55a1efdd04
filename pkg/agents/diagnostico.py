"""
Relatórios de diagnóstico: medidas sobre os estados de uma execução e as
verificações numéricas dos limites teóricos.

Os relatórios seguem o formato {"status": ..., ..., "observacoes": [...]}
e são serializáveis em JSON.
"""

import logging
import math
import warnings
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from core.estimadores import (
    MineNet,
    OccupancyGrid,
    VmfKde,
    amostras_mine,
    binned_mi,
    coverage,
    entropia_binada,
    mine_estimate,
    particle_entropy,
)
from core.labirinto import celulas_alcancaveis
from core.recompensas import Codificador
from core.teoria import identidade_vmf, suite_decomposicao, suite_limite_inferior, suite_muitos_negativos, theorem2_limit_check
from models.schemas import MazeSpec
from tools.trajetorias import Trajetoria


logger = logging.getLogger(__name__)

M_PADRAO = (8, 64, 512, 4096)


def grade_de_trajetorias(maze: MazeSpec, trajetorias: Sequence[Trajetoria], G: int, m: int) -> OccupancyGrid:
    grade = OccupancyGrid(G=G, m=m, bounds=maze.bounds)
    for trajetoria in trajetorias:
        grade.registrar(trajetoria.posicoes, np.full(len(trajetoria.posicoes), trajetoria.skill))
    return grade


def _estimar_mine(posicoes: np.ndarray, skills: np.ndarray, m: int, passos: int, rng: np.random.Generator) -> float:
    onehot = np.eye(m)[skills]
    conjunta, marginal = amostras_mine(posicoes, onehot, rng)
    rede = MineNet(conjunta.shape[1], rng)
    return mine_estimate(rede, conjunta, marginal, passos, rng=rng)


def _verificacoes_codificador(
    codificador: Codificador, kappa: float, posicoes: np.ndarray, skills: np.ndarray, rng: np.random.Generator
) -> Dict:
    """Identidade vMF e gaps do limite de M grande nas features do codificador treinado."""
    features = codificador(posicoes).valores
    # positivo de cada âncora: outro estado da mesma skill
    positivos = np.empty_like(features)
    for z in np.unique(skills):
        linhas = np.flatnonzero(skills == z)
        positivos[linhas] = features[rng.permutation(linhas)]
    referencia = features[rng.permutation(len(features))]
    agenda = [M for M in M_PADRAO if M <= len(referencia)] or [len(referencia)]
    limite = theorem2_limit_check(
        None, {"ancoras": features, "positivos": positivos, "referencia": referencia}, kappa, agenda
    )
    return {
        "identity_gap": identidade_vmf(VmfKde(kappa, referencia), features),
        "limit_gaps": dict(zip(map(str, limite["M"]), limite["gaps"])),
        "limite_monotono": limite["monotono"],
    }


def diagnosticar_execucao(
    maze: MazeSpec,
    trajetorias: Sequence[Trajetoria],
    skill_dim: int,
    grid_size: int = 20,
    knn_k: int = 12,
    mine_passos: int = 1000,
    rng_seed: int = 0,
    codificador: Optional[Codificador] = None,
    kappa: float = 0.5,
) -> Dict:
    """
    Medidas de cobertura, informação e entropia sobre os estados registrados.

    Args:
        maze: Labirinto da execução.
        trajetorias: Trajetórias de avaliação.
        skill_dim: Número de skills m.
        grid_size: Células por lado da grade.
        knn_k: Vizinhos do estimador de partículas.
        mine_passos: Passos de treino do MINE (0 desativa).
        rng_seed: Semente do MINE e dos pareamentos.
        codificador: Codificador treinado (execuções becl) para as
            verificações de vMF nas features aprendidas.
        kappa: Temperatura da execução.

    Returns:
        Relatório com coverage, binned_mi, particle_entropy, MINE,
        histogramas por skill e verificações teóricas.

    Raises:
        ValueError: Nenhum estado registrado.
    """
    if not trajetorias or sum(len(t.posicoes) for t in trajetorias) == 0:
        raise ValueError("Nenhum estado registrado para diagnosticar.")

    rng = np.random.default_rng(rng_seed)
    observacoes: List[str] = []
    grade = grade_de_trajetorias(maze, trajetorias, grid_size, skill_dim)
    posicoes = np.vstack([t.posicoes for t in trajetorias])
    skills = np.concatenate([np.full(len(t.posicoes), t.skill) for t in trajetorias])

    mi = binned_mi(grade)
    h_binada = entropia_binada(grade)
    log_m = math.log(skill_dim)
    excede_log_m = h_binada > log_m
    if not excede_log_m:
        mensagem = f"Ĥ(S) binada ({h_binada:.4f}) não excede log m ({log_m:.4f})."
        warnings.warn(mensagem)
        observacoes.append(mensagem)
    if mi > log_m + 1e-9:
        observacoes.append(f"binned_mi ({mi:.6f}) acima de log m.")

    relatorio = {
        "status": "sucesso",
        "estados": int(len(posicoes)),
        "coverage": coverage(grade, celulas_alcancaveis(maze, grid_size)),
        "binned_mi": mi,
        "entropia_binada": h_binada,
        "log_m": log_m,
        "entropia_excede_log_m": bool(excede_log_m),
        "per_skill_cell_histograms": grade.histogramas_por_skill().tolist(),
        "theorem_checks": {},
        "observacoes": observacoes,
    }

    # cópias determinísticas de uma trajetória não são vizinhas informativas
    distintas = np.unique(posicoes, axis=0)
    if len(distintas) > knn_k:
        relatorio["particle_entropy"] = particle_entropy(distintas, knn_k)
    else:
        relatorio["particle_entropy"] = None
        observacoes.append(f"Menos de {knn_k + 1} estados distintos: particle_entropy omitida.")

    if mine_passos > 0:
        try:
            relatorio["mine_mi"] = _estimar_mine(posicoes, skills, skill_dim, mine_passos, rng)
        except FloatingPointError as e:
            relatorio["mine_mi"] = None
            observacoes.append(str(e))

    if codificador is not None:
        relatorio["theorem_checks"] = _verificacoes_codificador(codificador, kappa, posicoes, skills, rng)

    logger.info("Diagnóstico: coverage=%.3f binned_mi=%.4f", relatorio["coverage"], mi)
    return relatorio


def diagnostico_sintetico(
    rng_seed: int = 0,
    construcoes_limite: int = 100,
    construcoes_decomposicao: int = 100,
    nuvens_limite: int = 50,
) -> Dict:
    """Suítes teóricas sem execução de treino."""
    limite_inferior = suite_limite_inferior(construcoes_limite, rng_seed)
    decomposicao = suite_decomposicao(construcoes_decomposicao, rng_seed)
    muitos_negativos = suite_muitos_negativos(nuvens_limite, rng_seed=rng_seed)
    suites = (limite_inferior, decomposicao, muitos_negativos)
    return {
        "status": "sucesso" if all(s["status"] == "sucesso" for s in suites) else "erro",
        "theorem_checks": {
            "bound_margin": limite_inferior["margem_minima"],
            "bound_violations": limite_inferior["violacoes"],
            "decomposition_max_violation": decomposicao["violacao_maxima"],
            "identity_gap": muitos_negativos["gap_identidade_maximo"],
            "limit_gaps": dict(zip(map(str, muitos_negativos["limite"]["M"]), muitos_negativos["limite"]["gaps"])),
        },
        "suites": {"limite_inferior": limite_inferior, "decomposicao": decomposicao, "muitos_negativos": muitos_negativos},
        "observacoes": [o for s in suites for o in s.get("observacoes", [])],
    }


def tabela_comparativa(relatorios: Mapping[str, Dict], colunas: Sequence[str] = ("coverage", "binned_mi", "particle_entropy")) -> str:
    """
    Tabela de texto com uma linha por execução.

    Exemplo:
        >>> print(tabela_comparativa({"becl": {"coverage": 0.5, "binned_mi": 1.2, "particle_entropy": 0.1}}))
        execucao              coverage     binned_mi    particle_entropy
        becl                    0.5000        1.2000              0.1000
    """
    cabecalho = f"{'execucao':<16}" + "".join(f"{c:>{max(len(c), 10) + 4}}" for c in colunas)
    linhas = [cabecalho]
    for nome, relatorio in relatorios.items():
        celulas = []
        for c in colunas:
            largura = max(len(c), 10) + 4
            valor = relatorio.get(c)
            celulas.append(f"{'-':>{largura}}" if valor is None else f"{valor:>{largura}.4f}")
        linhas.append(f"{nome:<16}" + "".join(celulas))
    return "\n".join(linhas)
