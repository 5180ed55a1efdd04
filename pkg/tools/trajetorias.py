"""
Dump de trajetórias em CSV.

Colunas: episode_id, step, skill, x, y, ax, ay, reward, onde (x, y) é a
posição após o passo.
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Union

import numpy as np

from models.schemas import Transition


COLUNAS = ["episode_id", "step", "skill", "x", "y", "ax", "ay", "reward"]


def escrever_trajetorias(caminho: Union[str, Path], transicoes: Iterable[Transition]) -> Path:
    caminho = Path(caminho)
    with caminho.open("w", newline="", encoding="utf-8") as arquivo:
        escritor = csv.writer(arquivo, lineterminator="\n")
        escritor.writerow(COLUNAS)
        for t in transicoes:
            escritor.writerow([
                t.episode_id, t.step_index, t.skill,
                repr(float(t.next_state[0])), repr(float(t.next_state[1])),
                repr(float(t.action[0])), repr(float(t.action[1])),
                repr(float(t.extrinsic_reward)),
            ])
    return caminho


@dataclass
class Trajetoria:
    """Um episódio lido do CSV."""

    episode_id: int
    skill: int
    posicoes: np.ndarray
    acoes: np.ndarray
    recompensas: np.ndarray


def ler_trajetorias(caminho: Union[str, Path]) -> List[Trajetoria]:
    """
    Agrupa as linhas do CSV por episódio (ordem de primeira aparição).

    Raises:
        FileNotFoundError: Arquivo inexistente.
        ValueError: Cabeçalho diferente do esperado.
    """
    caminho = Path(caminho)
    if not caminho.exists():
        raise FileNotFoundError(f"Arquivo de trajetórias não encontrado: {caminho}")

    grupos: Dict[int, List[List[str]]] = {}
    with caminho.open(newline="", encoding="utf-8") as arquivo:
        leitor = csv.reader(arquivo)
        cabecalho = next(leitor, None)
        if cabecalho is None:
            return []
        if cabecalho != COLUNAS:
            raise ValueError(f"Cabeçalho inesperado em {caminho}: {cabecalho}")
        for linha in leitor:
            grupos.setdefault(int(linha[0]), []).append(linha)

    trajetorias = []
    for episodio, linhas in grupos.items():
        linhas.sort(key=lambda l: int(l[1]))
        dados = np.array([[float(v) for v in l[3:]] for l in linhas])
        trajetorias.append(Trajetoria(
            episode_id=episodio,
            skill=int(linhas[0][2]),
            posicoes=dados[:, 0:2],
            acoes=dados[:, 2:4],
            recompensas=dados[:, 4],
        ))
    return trajetorias
