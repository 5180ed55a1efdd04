"""
Schemas Pydantic da configuração de treino e dos artefatos de execução.

TrainConfig reúne os hiperparâmetros do agente, com padrões em escala de
labirinto.
RunConfig acrescenta o que a linha de comando precisa e rejeita chaves
desconhecidas. RunManifest descreve um diretório de execução concluído.
"""

import hashlib
import json
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


MetodoRecompensa = Literal["becl", "diayn", "entropy"]
ModoPares = Literal["cross", "same"]


class TrainConfig(BaseModel):
    """Hiperparâmetros do agente DDPG condicionado a skills."""

    model_config = ConfigDict(extra="forbid")

    gamma: float = Field(default=0.99, gt=0, lt=1, description="Fator de desconto γ")
    n_step: int = Field(default=3, ge=1, description="Horizonte dos retornos n-step")
    batch_size: int = Field(default=256, ge=2, description="Tamanho do mini-lote (pares no lote contrastivo)")
    seed_frames: int = Field(default=4000, ge=0, description="Passos de ambiente antes da primeira atualização")
    update_frequency: int = Field(default=2, ge=1, description="Uma atualização do agente a cada N passos")
    pretrain_frames: int = Field(default=125_000, ge=0, description="Passos de pré-treino (2500 episódios × 50)")
    finetune_frames: int = Field(default=100_000, ge=0, description="Passos de ajuste fino")
    learning_rate: float = Field(default=1e-4, gt=0, description="Taxa de aprendizado do Adam")
    skill_dim: int = Field(default=10, ge=2, description="Número m de skills discretas")
    kappa: float = Field(default=0.5, gt=0, le=1, description="Temperatura κ da perda contrastiva")
    rng_seed: int = Field(default=1, ge=0, description="Semente do gerador de números aleatórios")

    hidden_dim: int = Field(default=256, ge=1, description="Largura oculta do ator, crítico e codificador")
    feature_dim: int = Field(default=16, ge=2, description="Dimensão d das features do codificador")
    buffer_capacity: int = Field(default=100_000, ge=1, description="Capacidade do buffer de replay")
    critic_ema: float = Field(default=0.01, gt=0, le=1, description="Taxa τ_Q da média móvel do crítico alvo")
    exploration_stddev: float = Field(default=0.2, ge=0, description="Desvio do ruído de exploração")
    stddev_clip: float = Field(default=0.3, ge=0, description="Corte do ruído de exploração")

    pair_mode: ModoPares = Field(default="cross", description="Pares positivos entre episódios ('cross') ou no mesmo episódio ('same')")
    min_gap: int = Field(default=25, ge=1, description="Distância mínima em passos no modo 'same'")
    knn_k: int = Field(default=12, ge=1, description="Vizinhos da recompensa de entropia")
    grid_size: int = Field(default=20, ge=1, description="Células G por lado da grade de ocupação")
    trajetorias_por_skill: int = Field(default=20, ge=1, description="Trajetórias de avaliação por skill")

    avaliacao_a_cada: int = Field(default=5000, ge=1, description="Frames entre avaliações no ajuste fino")
    episodios_avaliacao: int = Field(default=5, ge=1, description="Episódios por avaliação no ajuste fino")
    limiar_retorno: float = Field(default=-5.0, description="Retorno médio que conta como tarefa resolvida")

    @model_validator(mode="after")
    def _validar_consistencia(self) -> "TrainConfig":
        if self.pretrain_frames > self.seed_frames and self.seed_frames < self.batch_size:
            raise ValueError(
                f"seed_frames ({self.seed_frames}) menor que batch_size ({self.batch_size}): "
                "a primeira atualização não teria dados suficientes."
            )
        if self.buffer_capacity < self.batch_size:
            raise ValueError("buffer_capacity deve ser pelo menos batch_size.")
        # a referência da recompensa de entropia são os positivos do lote
        if self.knn_k > self.batch_size:
            raise ValueError(
                f"knn_k ({self.knn_k}) maior que batch_size ({self.batch_size}): "
                "a recompensa de entropia não teria vizinhos suficientes."
            )
        return self


class RunConfig(TrainConfig):
    """
    Configuração completa de uma execução da linha de comando.

    Lida de um arquivo `chave = valor`; chaves desconhecidas são rejeitadas.
    """

    nome: str = Field(default="execucao", description="Nome do diretório da execução")
    layout: str = Field(default="bottleneck", description="Nome de layout embutido ou caminho para arquivo")
    reward_method: MetodoRecompensa = Field(default="becl", description="Recompensa intrínseca do pré-treino")
    out: str = Field(default="saidas", description="Diretório raiz das execuções")
    seeds: List[int] = Field(default_factory=lambda: [1], description="Sementes (lista separada por vírgulas)")
    goal_index: int = Field(default=3, ge=0, le=3, description="Objetivo da tarefa de ajuste fino (0-3)")
    reward_kind: Literal["dense", "sparse"] = Field(default="dense", description="Tipo de recompensa da tarefa")
    skill_choice: str = Field(default="random", description="'random' ou índice da skill no ajuste fino")

    @field_validator("seeds", mode="before")
    @classmethod
    def _separar_sementes(cls, valor):
        if isinstance(valor, str):
            partes = [p.strip() for p in valor.split(",") if p.strip()]
            if not partes:
                raise ValueError("Lista de sementes vazia.")
            return [int(p) for p in partes]
        return valor

    @field_validator("skill_choice")
    @classmethod
    def _validar_skill_choice(cls, valor: str) -> str:
        if valor != "random" and not valor.isdigit():
            raise ValueError(f"skill_choice deve ser 'random' ou um índice inteiro: {valor!r}")
        return valor

    @model_validator(mode="after")
    def _validar_skill_fixa(self) -> "RunConfig":
        if self.skill_choice != "random" and int(self.skill_choice) >= self.skill_dim:
            raise ValueError(
                f"skill_choice {self.skill_choice} fora de [0, {self.skill_dim})."
            )
        return self

    def treino(self, seed: Optional[int] = None) -> TrainConfig:
        """Extrai o TrainConfig de uma semente."""
        campos = {k: getattr(self, k) for k in TrainConfig.model_fields}
        if seed is not None:
            campos["rng_seed"] = seed
        return TrainConfig(**campos)

    def config_hash(self) -> str:
        canonico = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonico.encode("utf-8")).hexdigest()

    def para_texto(self) -> str:
        """Serializa no mesmo formato `chave = valor` aceito na leitura."""
        linhas = []
        for chave, valor in self.model_dump(mode="json").items():
            if isinstance(valor, list):
                valor = ",".join(str(v) for v in valor)
            linhas.append(f"{chave} = {valor}")
        return "\n".join(linhas) + "\n"


class RunManifest(BaseModel):
    """Resumo de um diretório de execução, gravado ao final."""

    config_hash: str = Field(description="sha256 do JSON canônico da configuração")
    versao_codigo: str = Field(description="Versão do pacote skillflow")
    comando: str = Field(description="Subcomando que produziu a execução")
    saidas: Dict[str, Dict[str, str]] = Field(
        default_factory=dict,
        description="Por semente: nome do artefato → caminho relativo"
    )
    tempos: Dict[str, float] = Field(
        default_factory=dict,
        description="Por semente: duração em segundos"
    )
