"""
Checkpoint de parâmetros em JSON.

Formato:

    {
      "formato": "skillflow-checkpoint/1",
      "config_hash": "<sha256>",
      "redes": {
        "<rede>": {"<parametro>": {"shape": [..], "valores": [.. linha a linha ..]}}
      }
    }

Os floats são gravados pela representação mais curta que ida e volta
reproduz, então salvar e carregar devolve os mesmos bits.
"""

import json
import os
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np


FORMATO = "skillflow-checkpoint/1"

Redes = Dict[str, Dict[str, np.ndarray]]


def salvar_checkpoint(caminho: Union[str, Path], redes: Redes, config_hash: str = "") -> Path:
    """
    Grava as redes no caminho (escrita atômica via arquivo temporário).

    Args:
        caminho: Arquivo de destino.
        redes: rede → parâmetro → array.
        config_hash: Hash da configuração que produziu os pesos.

    Returns:
        Caminho gravado.
    """
    caminho = Path(caminho)
    documento = {
        "formato": FORMATO,
        "config_hash": config_hash,
        "redes": {
            rede: {
                nome: {"shape": list(valores.shape), "valores": np.asarray(valores, dtype=np.float64).ravel().tolist()}
                for nome, valores in parametros.items()
            }
            for rede, parametros in redes.items()
        },
    }
    temporario = caminho.with_suffix(caminho.suffix + ".tmp")
    temporario.write_text(json.dumps(documento, sort_keys=True), encoding="utf-8")
    os.replace(temporario, caminho)
    return caminho


def carregar_checkpoint(caminho: Union[str, Path]) -> Tuple[Redes, str]:
    """
    Lê um checkpoint.

    Returns:
        (redes, config_hash).

    Raises:
        FileNotFoundError: Arquivo inexistente.
        ValueError: Formato desconhecido ou valores incompatíveis com o shape.
    """
    caminho = Path(caminho)
    if not caminho.exists():
        raise FileNotFoundError(f"Checkpoint não encontrado: {caminho}")

    documento = json.loads(caminho.read_text(encoding="utf-8"))
    if documento.get("formato") != FORMATO:
        raise ValueError(f"Formato de checkpoint desconhecido: {documento.get('formato')!r}")

    redes: Redes = {}
    for rede, parametros in documento["redes"].items():
        redes[rede] = {}
        for nome, entrada in parametros.items():
            shape = tuple(entrada["shape"])
            valores = np.asarray(entrada["valores"], dtype=np.float64)
            if valores.size != int(np.prod(shape)):
                raise ValueError(f"'{rede}.{nome}': {valores.size} valores para o shape {shape}.")
            redes[rede][nome] = valores.reshape(shape)
    return redes, documento.get("config_hash", "")
