"""
Schemas Pydantic das estruturas de domínio do laboratório.

Descrevem redes (MlpSpec), labirintos (MazeSpec), tarefas de ajuste fino
(DownstreamTask) e transições do ambiente (Transition). As descrições de
cada Field documentam o significado e a unidade de cada campo; os
validadores garantem os invariantes antes de qualquer execução.
"""

import math
from typing import List, Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


Ponto = Tuple[float, float]
Segmento = Tuple[Ponto, Ponto]

EPSILON_CONTATO = 1e-4


class MlpSpec(BaseModel):
    """Arquitetura de uma MLP densa com ReLU entre as camadas ocultas."""

    model_config = ConfigDict(frozen=True)

    layer_widths: List[int] = Field(
        description="Larguras das camadas, da entrada à saída (ex: [2, 256, 256, 16])"
    )
    activation: Literal["relu"] = Field(
        default="relu",
        description="Ativação entre camadas ocultas (somente ReLU é suportada)"
    )
    final_unit_norm: bool = Field(
        default=False,
        description="True se cada linha da saída deve ser normalizada para norma 1"
    )
    saida: Literal["linear", "tanh"] = Field(
        default="linear",
        description="Compressão aplicada à saída: 'linear' (nenhuma) ou 'tanh' (ator)"
    )

    @field_validator("layer_widths")
    @classmethod
    def _validar_larguras(cls, larguras: List[int]) -> List[int]:
        if len(larguras) < 2:
            raise ValueError("MlpSpec exige pelo menos duas larguras (entrada e saída).")
        if any(w <= 0 for w in larguras):
            raise ValueError(f"Larguras devem ser positivas: {larguras}")
        return larguras


class MazeSpec(BaseModel):
    """
    Labirinto contínuo no quadrado unitário com paredes segmentadas.

    O agente observa apenas a posição (x, y) e desloca-se
    step_scale · clip(ação) por passo, parando ao tocar uma parede.
    """

    model_config = ConfigDict(frozen=True)

    nome: str = Field(default="labirinto", description="Nome do layout (ex: 'bottleneck', 'tree')")
    bounds: Tuple[float, float, float, float] = Field(
        default=(0.0, 0.0, 1.0, 1.0),
        description="Retângulo (x0, y0, x1, y1) que delimita a arena"
    )
    walls: List[Segmento] = Field(
        default_factory=list,
        description="Paredes internas, cada uma como ((x1, y1), (x2, y2))"
    )
    start: Ponto = Field(description="Posição inicial determinística (ρ₀ concentrada em um ponto)")
    step_scale: float = Field(
        default=0.05, gt=0,
        description="Deslocamento (unidades de posição) por unidade de ação"
    )
    episode_length: int = Field(default=50, gt=0, description="Passos por episódio")

    @model_validator(mode="after")
    def _validar_geometria(self) -> "MazeSpec":
        x0, y0, x1, y1 = self.bounds
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"Limites inválidos: {self.bounds}")

        def dentro(p: Ponto) -> bool:
            return x0 <= p[0] <= x1 and y0 <= p[1] <= y1

        for parede in self.walls:
            for extremo in parede:
                if not dentro(extremo):
                    raise ValueError(f"Extremo de parede fora dos limites: {parede}")

        if not (x0 < self.start[0] < x1 and y0 < self.start[1] < y1):
            raise ValueError(f"Posição inicial fora dos limites: {self.start}")

        for parede in self.walls:
            if _distancia_ponto_segmento(self.start, parede) < EPSILON_CONTATO:
                raise ValueError(f"Posição inicial sobre a parede {parede}")
        return self


def _distancia_ponto_segmento(p: Ponto, segmento: Segmento) -> float:
    (ax, ay), (bx, by) = segmento
    dx, dy = bx - ax, by - ay
    comprimento2 = dx * dx + dy * dy
    if comprimento2 == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / comprimento2))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


class DownstreamTask(BaseModel):
    """Tarefa de alcançar um objetivo no labirinto, usada no ajuste fino."""

    model_config = ConfigDict(frozen=True)

    goal: Ponto = Field(description="Posição objetivo dentro da arena")
    reward_kind: Literal["dense", "sparse"] = Field(
        default="dense",
        description="'dense': −‖p − goal‖₂; 'sparse': 1 dentro do raio, 0 fora"
    )
    radius: float = Field(default=0.1, gt=0, description="Raio de sucesso da recompensa esparsa")

    @field_validator("goal")
    @classmethod
    def _validar_objetivo(cls, goal: Ponto) -> Ponto:
        if not (0.0 <= goal[0] <= 1.0 and 0.0 <= goal[1] <= 1.0):
            raise ValueError(f"Objetivo fora da arena unitária: {goal}")
        return goal


class Transition(BaseModel):
    """Registro de um passo do ambiente (entrada do buffer de replay)."""

    model_config = ConfigDict(frozen=True)

    state: Ponto = Field(description="Posição antes do passo")
    action: Ponto = Field(description="Ação executada, componentes em [−1, 1]")
    next_state: Ponto = Field(description="Posição após o passo")
    skill: int = Field(ge=0, description="Índice da skill que condicionou a política")
    extrinsic_reward: float = Field(
        default=0.0,
        description="Recompensa da tarefa (0 durante o pré-treino)"
    )
    episode_id: int = Field(ge=0, description="Identificador do episódio")
    step_index: int = Field(ge=0, description="Índice do passo dentro do episódio")

    @field_validator("action")
    @classmethod
    def _validar_acao(cls, acao: Ponto) -> Ponto:
        if any(abs(a) > 1.0 for a in acao):
            raise ValueError(f"Componentes da ação devem estar em [−1, 1]: {acao}")
        return acao
