"""Fluxo de métricas em JSON delimitado por linha (um registro por atualização ou episódio)."""

import json
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np


def _nativo(valor):
    if isinstance(valor, dict):
        return {str(k): _nativo(v) for k, v in valor.items()}
    if isinstance(valor, (list, tuple)):
        return [_nativo(v) for v in valor]
    if isinstance(valor, np.generic):
        return valor.item()
    if isinstance(valor, np.ndarray):
        return valor.tolist()
    return valor


def formatar_registro(registro: Dict) -> str:
    """Linha JSON com chaves ordenadas (reexecuções idênticas geram bytes idênticos)."""
    return json.dumps(_nativo(registro), sort_keys=True, allow_nan=False)


class EscritorMetricas:
    """
    Acumula registros e, se houver caminho, os anexa ao arquivo.

    Exemplo:
        >>> escritor = EscritorMetricas()
        >>> escritor.registrar({"frame": 10, "loss_critic": 0.5})
        >>> escritor.registros[0]["frame"]
        10
    """

    def __init__(self, caminho: Optional[Union[str, Path]] = None):
        self.caminho = Path(caminho) if caminho is not None else None
        self.registros: List[Dict] = []
        if self.caminho is not None:
            self.caminho.write_text("", encoding="utf-8")

    def registrar(self, registro: Dict) -> None:
        linha = formatar_registro(registro)
        self.registros.append(json.loads(linha))
        if self.caminho is not None:
            with self.caminho.open("a", encoding="utf-8") as arquivo:
                arquivo.write(linha + "\n")


def ler_metricas(caminho: Union[str, Path]) -> List[Dict]:
    caminho = Path(caminho)
    if not caminho.exists():
        raise FileNotFoundError(f"Arquivo de métricas não encontrado: {caminho}")
    return [json.loads(linha) for linha in caminho.read_text(encoding="utf-8").splitlines() if linha.strip()]
