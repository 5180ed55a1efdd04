"""
Construção de MLPs e otimização Adam sobre o tensor com autograd.

Realiza o codificador contrastivo f, o ator π, o crítico Q, o discriminador
q(z|s) e a rede estatística do MINE. Inicialização uniforme em ±1/√fan_in,
aritmética em float64.
"""

import copy
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np

from core.autograd import Tensor, backward, l2_normalize
from models.schemas import MlpSpec


Parametros = Dict[str, Tensor]


def inicializar_parametros(spec: MlpSpec, rng: np.random.Generator) -> Parametros:
    """
    Sorteia pesos e vieses uniformes em ±1/√fan_in.

    Args:
        spec: Arquitetura da rede.
        rng: Gerador de números aleatórios (determinístico por semente).

    Returns:
        Coleção ordenada {"camada0.W": ..., "camada0.b": ..., ...}.
    """
    parametros: Parametros = {}
    larguras = spec.layer_widths
    for i, (fan_in, fan_out) in enumerate(zip(larguras[:-1], larguras[1:])):
        limite = 1.0 / np.sqrt(fan_in)
        parametros[f"camada{i}.W"] = Tensor(
            rng.uniform(-limite, limite, size=(fan_in, fan_out)), requer_grad=True, nome=f"camada{i}.W"
        )
        parametros[f"camada{i}.b"] = Tensor(
            rng.uniform(-limite, limite, size=(fan_out,)), requer_grad=True, nome=f"camada{i}.b"
        )
    return parametros


def mlp_forward(
    spec: MlpSpec,
    params: Parametros,
    entrada: Union[Tensor, np.ndarray],
    congelado: bool = False,
) -> Tensor:
    """
    Passo direto de uma MLP sobre um lote.

    Args:
        spec: Arquitetura.
        params: Parâmetros nomeados como em inicializar_parametros.
        entrada: Lote (B, largura de entrada).
        congelado: Se True, os parâmetros entram como constantes (nenhum
            gradiente chega a eles).

    Returns:
        Tensor (B, largura de saída); linhas unitárias se final_unit_norm.

    Raises:
        ValueError: Dimensão final da entrada diferente da primeira largura.
        FloatingPointError: Parâmetros não finitos.

    Exemplo:
        >>> spec = MlpSpec(layer_widths=[2, 2])
        >>> params = {"camada0.W": Tensor(np.eye(2)), "camada0.b": Tensor(np.zeros(2))}
        >>> mlp_forward(spec, params, np.array([[1.0, 2.0]])).valores
        array([[1., 2.]])
    """
    x = entrada if isinstance(entrada, Tensor) else Tensor(entrada)
    if x.ndim != 2 or x.shape[-1] != spec.layer_widths[0]:
        raise ValueError(
            f"Entrada com shape {x.shape} incompatível com a largura de entrada {spec.layer_widths[0]}."
        )

    n_camadas = len(spec.layer_widths) - 1
    h = x
    for i in range(n_camadas):
        W, b = params[f"camada{i}.W"], params[f"camada{i}.b"]
        if not (np.all(np.isfinite(W.valores)) and np.all(np.isfinite(b.valores))):
            raise FloatingPointError(f"Parâmetros não finitos na camada {i}.")
        if congelado:
            W, b = Tensor(W.valores), Tensor(b.valores)
        h = h @ W + b
        if i < n_camadas - 1:
            h = h.relu()

    if spec.saida == "tanh":
        h = h.tanh()
    if spec.final_unit_norm:
        h = l2_normalize(h)
    return h


class Mlp:
    """
    MLP com parâmetros próprios.

    Args:
        spec: Arquitetura.
        rng: Gerador usado na inicialização.
    """

    def __init__(self, spec: MlpSpec, rng: np.random.Generator):
        self.spec = spec
        self.parametros = inicializar_parametros(spec, rng)

    def __call__(self, entrada: Union[Tensor, np.ndarray], congelado: bool = False) -> Tensor:
        return mlp_forward(self.spec, self.parametros, entrada, congelado=congelado)

    def copiar(self) -> "Mlp":
        return copy.deepcopy(self)

    def estado(self) -> Dict[str, np.ndarray]:
        """Cópia dos valores dos parâmetros (para checkpoint e alvo EMA)."""
        return {nome: p.valores.copy() for nome, p in self.parametros.items()}

    def carregar_estado(self, estado: Mapping[str, np.ndarray]) -> None:
        faltando = set(self.parametros) - set(estado)
        if faltando:
            raise ValueError(f"Parâmetros ausentes no estado: {sorted(faltando)}")
        for nome, p in self.parametros.items():
            valores = np.asarray(estado[nome], dtype=np.float64)
            if valores.shape != p.valores.shape:
                raise ValueError(
                    f"Dimensão incompatível em '{nome}': esperado {p.valores.shape}, recebido {valores.shape}."
                )
            p.valores = valores.copy()


@dataclass
class AdamState:
    """Momentos e contador de passos do Adam (β1=0.9, β2=0.999, ε=1e-8 por padrão)."""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def criar_estado_adam(params: Parametros, learning_rate: float = 1e-4, **kwargs) -> AdamState:
    estado = AdamState(learning_rate=learning_rate, **kwargs)
    for nome, p in params.items():
        estado.first_moment[nome] = np.zeros_like(p.valores)
        estado.second_moment[nome] = np.zeros_like(p.valores)
    return estado


def adam_step(
    estado: AdamState, params: Parametros, grads: Mapping[str, np.ndarray]
) -> Tuple[Parametros, AdamState]:
    """
    Aplica um passo de Adam com correção de viés.

    Args:
        estado: Momentos acumulados (atualizados no lugar).
        params: Parâmetros (valores atualizados no lugar).
        grads: Gradientes com os mesmos nomes e shapes.

    Returns:
        (params, estado) após o passo.

    Raises:
        FloatingPointError: Gradiente não finito.
        ValueError: Gradiente com shape diferente do parâmetro.
    """
    for nome, p in params.items():
        g = grads[nome]
        if g.shape != p.valores.shape:
            raise ValueError(f"Gradiente de '{nome}' com shape {g.shape}, esperado {p.valores.shape}.")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"Gradiente não finito em '{nome}'.")

    estado.step_count += 1
    t = estado.step_count
    correcao1 = 1.0 - estado.beta1 ** t
    correcao2 = 1.0 - estado.beta2 ** t
    for nome, p in params.items():
        g = grads[nome]
        m = estado.beta1 * estado.first_moment[nome] + (1.0 - estado.beta1) * g
        v = estado.beta2 * estado.second_moment[nome] + (1.0 - estado.beta2) * g * g
        estado.first_moment[nome] = m
        estado.second_moment[nome] = v
        p.valores = p.valores - estado.learning_rate * (m / correcao1) / (np.sqrt(v / correcao2) + estado.epsilon)
    return params, estado


class Adam:
    """Otimizador Adam ligado a uma coleção de parâmetros."""

    def __init__(self, params: Parametros, learning_rate: float = 1e-4):
        self.params = params
        self.estado = criar_estado_adam(params, learning_rate)

    def passo(self, perda: Tensor, grads: Optional[Dict[str, np.ndarray]] = None) -> float:
        """Retropropaga a perda (se grads não for dado) e atualiza os parâmetros."""
        if grads is None:
            grads = backward(perda, self.params)
        adam_step(self.estado, self.params, grads)
        return perda.item()
