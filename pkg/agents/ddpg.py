"""
DDPG condicionado a skills: ator, crítico com alvo EMA, buffer de replay e
retornos n-step.

O ator recebe o estado concatenado ao one-hot da skill e devolve uma ação
em [−1, 1]² (saída tanh). O crítico recebe estado, skill e ação. O alvo do
crítico é uma média móvel exponencial dos pesos online; a ação do alvo vem
do ator online.
"""

from collections import OrderedDict, deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional

import numpy as np

from core.autograd import Tensor, concatenar
from core.redes import Adam, Mlp
from models.schemas import MlpSpec
from models.schemas_treino import TrainConfig


# ----------------------------------------------------------------------
# Redes
# ----------------------------------------------------------------------


class Actor:
    """π_θ(s, z) com saída tanh e ruído gaussiano cortado para exploração."""

    def __init__(
        self,
        dim_estado: int,
        skill_dim: int,
        dim_acao: int,
        hidden_dim: int,
        rng: np.random.Generator,
        exploration_stddev: float = 0.2,
        stddev_clip: float = 0.3,
    ):
        self.net = Mlp(
            MlpSpec(layer_widths=[dim_estado + skill_dim, hidden_dim, hidden_dim, dim_acao], saida="tanh"),
            rng,
        )
        self.exploration_stddev = exploration_stddev
        self.stddev_clip = stddev_clip

    def __call__(self, estados: np.ndarray, skills_onehot: np.ndarray) -> Tensor:
        return self.net(np.hstack([np.atleast_2d(estados), np.atleast_2d(skills_onehot)]))


class Critic:
    """Q_ψ(s, z, a) online e o alvo Q_ψ̄ (média móvel com taxa ema_rate)."""

    def __init__(
        self,
        dim_estado: int,
        skill_dim: int,
        dim_acao: int,
        hidden_dim: int,
        rng: np.random.Generator,
        ema_rate: float = 0.01,
    ):
        self.net = Mlp(MlpSpec(layer_widths=[dim_estado + skill_dim + dim_acao, hidden_dim, hidden_dim, 1]), rng)
        self.target_net = self.net.copiar()
        self.ema_rate = ema_rate

    def __call__(self, estados, skills_onehot, acoes, congelado: bool = False) -> Tensor:
        entrada = concatenar([np.atleast_2d(estados), np.atleast_2d(skills_onehot), acoes], eixo=-1)
        return self.net(entrada, congelado=congelado)

    def alvo(self, estados: np.ndarray, skills_onehot: np.ndarray, acoes: np.ndarray) -> np.ndarray:
        entrada = np.hstack([np.atleast_2d(estados), np.atleast_2d(skills_onehot), np.atleast_2d(acoes)])
        return self.target_net(entrada).valores[:, 0]


def act(
    actor: Actor,
    state: np.ndarray,
    skill_onehot: np.ndarray,
    explore: bool,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Ação do ator para um estado.

    Com explore=True soma ruído N(0, stddev²) cortado em ±stddev_clip e
    recorta o resultado em [−1, 1].
    """
    acao = actor(state, skill_onehot).valores[0]
    if explore:
        ruido = rng.normal(0.0, actor.exploration_stddev, size=acao.shape)
        acao = acao + np.clip(ruido, -actor.stddev_clip, actor.stddev_clip)
    return np.clip(acao, -1.0, 1.0)


# ----------------------------------------------------------------------
# Buffer de replay
# ----------------------------------------------------------------------


class ReplayBuffer:
    """
    Anel de transições com índice skill → episódios para a amostragem em pares.

    Ao sobrescrever um slot, ele sai do episódio a que pertencia; um
    episódio sem slots sai do índice.
    """

    def __init__(self, capacity: int, dim_estado: int = 2, dim_acao: int = 2):
        if capacity <= 0:
            raise ValueError(f"Capacidade deve ser positiva: {capacity}")
        self.capacity = capacity
        self.states = np.zeros((capacity, dim_estado))
        self.actions = np.zeros((capacity, dim_acao))
        self.next_states = np.zeros((capacity, dim_estado))
        self.skills = np.zeros(capacity, dtype=int)
        self.rewards = np.zeros(capacity)
        self.episode_ids = np.full(capacity, -1, dtype=int)
        self.step_index = np.zeros(capacity, dtype=int)
        self.fim = np.zeros(capacity, dtype=bool)
        self._proximo = 0
        self._tamanho = 0
        self._slots_episodio: Dict[int, Deque[int]] = {}
        self._episodios_skill: Dict[int, "OrderedDict[int, None]"] = {}
        self._skill_episodio: Dict[int, int] = {}

    def __len__(self) -> int:
        return self._tamanho

    def adicionar(
        self,
        state,
        action,
        next_state,
        skill: int,
        reward: float,
        episode_id: int,
        step_index: int,
        fim: bool = False,
    ) -> int:
        """Grava uma transição e devolve o slot usado."""
        slot = self._proximo
        if self._tamanho == self.capacity:
            self._remover_slot(slot)

        self.states[slot] = state
        self.actions[slot] = action
        self.next_states[slot] = next_state
        self.skills[slot] = skill
        self.rewards[slot] = reward
        self.episode_ids[slot] = episode_id
        self.step_index[slot] = step_index
        self.fim[slot] = fim

        if episode_id not in self._slots_episodio:
            self._slots_episodio[episode_id] = deque()
            self._episodios_skill.setdefault(skill, OrderedDict())[episode_id] = None
            self._skill_episodio[episode_id] = skill
        self._slots_episodio[episode_id].append(slot)

        self._proximo = (slot + 1) % self.capacity
        self._tamanho = min(self._tamanho + 1, self.capacity)
        return slot

    def _remover_slot(self, slot: int) -> None:
        episodio = int(self.episode_ids[slot])
        slots = self._slots_episodio[episodio]
        slots.popleft()
        if not slots:
            del self._slots_episodio[episodio]
            skill = self._skill_episodio.pop(episodio)
            del self._episodios_skill[skill][episodio]
            if not self._episodios_skill[skill]:
                del self._episodios_skill[skill]
        self.episode_ids[slot] = -1

    def indice_episodios(self) -> Dict[int, List[int]]:
        return {skill: list(episodios) for skill, episodios in self._episodios_skill.items()}

    def tamanho_episodio(self, episode_id: int) -> int:
        slots = self._slots_episodio.get(episode_id)
        return 0 if slots is None else len(slots)

    def slots_episodio(self, episode_id: int) -> np.ndarray:
        return np.fromiter(self._slots_episodio[episode_id], dtype=int)

    def amostrar(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        """Slots uniformes entre as transições armazenadas."""
        if self._tamanho == 0:
            raise ValueError("Buffer vazio.")
        return rng.integers(self._tamanho, size=batch_size)

    def segmentos(self, slots: np.ndarray, n_step: int, gamma: float) -> "Segmentos":
        """
        Segmentos n-step que começam em cada slot.

        O segmento acaba antes de n passos se atingir a última transição do
        episódio (sem bootstrap) ou se as transições seguintes ainda não
        estiverem no buffer (bootstrap com γ^L a partir do último estado).
        """
        slots = np.asarray(slots, dtype=int)
        B = len(slots)
        indices = (slots[:, None] + np.arange(n_step)[None, :]) % self.capacity
        valido = np.zeros((B, n_step), dtype=bool)
        valido[:, 0] = True
        ativo = ~self.fim[slots]
        for i in range(1, n_step):
            seguinte = indices[:, i]
            mesmo = (
                ativo
                & (self.episode_ids[seguinte] == self.episode_ids[slots])
                & (self.step_index[seguinte] == self.step_index[slots] + i)
            )
            valido[:, i] = mesmo
            ativo = mesmo & ~self.fim[seguinte]

        comprimentos = valido.sum(axis=1)
        ultimo = indices[np.arange(B), comprimentos - 1]
        desconto = np.where(self.fim[ultimo], 0.0, gamma ** comprimentos)
        return Segmentos(
            slots=slots,
            indices=indices,
            valido=valido,
            comprimentos=comprimentos,
            bootstrap_states=self.next_states[ultimo].copy(),
            descontos_bootstrap=desconto,
        )


@dataclass
class Segmentos:
    slots: np.ndarray
    indices: np.ndarray
    valido: np.ndarray
    comprimentos: np.ndarray
    bootstrap_states: np.ndarray
    descontos_bootstrap: np.ndarray


# ----------------------------------------------------------------------
# Atualizações
# ----------------------------------------------------------------------


@dataclass
class LoteCritico:
    """Entradas da atualização do crítico; recompensas (B, n) válidas onde valido."""

    states: np.ndarray
    skills_onehot: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    valido: np.ndarray
    bootstrap_states: np.ndarray
    descontos_bootstrap: np.ndarray

    def __post_init__(self):
        B = len(self.states)
        if self.rewards.shape != self.valido.shape or self.rewards.shape[0] != B:
            raise ValueError(
                f"Segmentos malformados: recompensas {self.rewards.shape}, máscara {self.valido.shape}, lote {B}."
            )
        if not np.all(self.valido[:, 0]):
            raise ValueError("Segmentos malformados: todo segmento começa com uma transição válida.")
        if np.any(np.diff(self.valido.astype(int), axis=1) > 0):
            raise ValueError("Segmentos malformados: lacuna no meio do segmento.")


def alvo_n_step(critic: Critic, actor: Actor, lote: LoteCritico, gamma: float) -> np.ndarray:
    """Σ_{i<L} γ^i r_i + γ^L Q_ψ̄(s_L, z, π_θ(s_L, z)) (sem bootstrap no fim do episódio)."""
    n = lote.rewards.shape[1]
    descontos = gamma ** np.arange(n)
    retorno = np.sum(np.where(lote.valido, lote.rewards, 0.0) * descontos, axis=1)
    acao_seguinte = actor(lote.bootstrap_states, lote.skills_onehot).valores
    q_seguinte = critic.alvo(lote.bootstrap_states, lote.skills_onehot, acao_seguinte)
    return retorno + lote.descontos_bootstrap * q_seguinte


def perda_critico(critic: Critic, actor: Actor, lote: LoteCritico, gamma: float) -> Tensor:
    alvo = alvo_n_step(critic, actor, lote, gamma)
    q = critic(lote.states, lote.skills_onehot, lote.actions)
    residuo = q - alvo[:, None]
    return (residuo * residuo).media()


def critic_update(
    critic: Critic, actor: Actor, batch: LoteCritico, gamma: float, otimizador: Optional[Adam] = None
) -> float:
    """
    Minimiza o resíduo de Bellman n-step e devolve a perda antes do passo.

    Raises:
        ValueError: Segmentos malformados.
    """
    perda = perda_critico(critic, actor, batch, gamma)
    if otimizador is not None:
        otimizador.passo(perda)
    return perda.item()


def perda_ator(actor: Actor, critic: Critic, estados: np.ndarray, skills_onehot: np.ndarray) -> Tensor:
    """−média de Q(s, z, π(s, z)); o crítico entra congelado."""
    acoes = actor(estados, skills_onehot)
    return -critic(estados, skills_onehot, acoes, congelado=True).media()


def actor_update(
    actor: Actor,
    critic: Critic,
    estados: np.ndarray,
    skills_onehot: np.ndarray,
    otimizador: Optional[Adam] = None,
) -> float:
    """Sobe Q(s, z, π(s, z)) ajustando apenas o ator; devolve a perda antes do passo."""
    perda = perda_ator(actor, critic, estados, skills_onehot)
    if otimizador is not None:
        otimizador.passo(perda)
    return perda.item()


def ema_update(critic: Critic) -> None:
    """alvo ← (1 − τ) alvo + τ online, elemento a elemento."""
    tau = critic.ema_rate
    for nome, p in critic.net.parametros.items():
        alvo = critic.target_net.parametros[nome]
        alvo.valores = (1.0 - tau) * alvo.valores + tau * p.valores


# ----------------------------------------------------------------------
# Agente
# ----------------------------------------------------------------------


class AgenteDDPG:
    """Ator, crítico e seus otimizadores, construídos a partir do TrainConfig."""

    def __init__(self, config: TrainConfig, rng: np.random.Generator, dim_estado: int = 2, dim_acao: int = 2):
        self.config = config
        self.skill_dim = config.skill_dim
        self.actor = Actor(
            dim_estado, config.skill_dim, dim_acao, config.hidden_dim, rng,
            config.exploration_stddev, config.stddev_clip,
        )
        self.critic = Critic(dim_estado, config.skill_dim, dim_acao, config.hidden_dim, rng, config.critic_ema)
        self.opt_actor = Adam(self.actor.net.parametros, config.learning_rate)
        self.opt_critic = Adam(self.critic.net.parametros, config.learning_rate)

    def act(self, state: np.ndarray, skill_onehot: np.ndarray, explore: bool, rng=None) -> np.ndarray:
        return act(self.actor, state, skill_onehot, explore, rng)

    def politica(self, explore: bool = False):
        """Política no formato (estado, one-hot, rng) -> ação usado pelo rollout."""
        return lambda estado, onehot, rng: self.act(estado, onehot, explore, rng)

    def atualizar(self, lote: LoteCritico) -> Dict[str, float]:
        """Crítico, depois ator, depois alvo EMA."""
        loss_critic = critic_update(self.critic, self.actor, lote, self.config.gamma, self.opt_critic)
        loss_actor = actor_update(self.actor, self.critic, lote.states, lote.skills_onehot, self.opt_actor)
        ema_update(self.critic)
        return {"loss_critic": loss_critic, "loss_actor": loss_actor}

    def estados_redes(self) -> Dict[str, Dict[str, np.ndarray]]:
        return {
            "ator": self.actor.net.estado(),
            "critico": self.critic.net.estado(),
            "critico_alvo": self.critic.target_net.estado(),
        }

    def carregar_redes(self, redes: Dict[str, Dict[str, np.ndarray]]) -> None:
        """
        Raises:
            ValueError: Redes ausentes ou com dimensões incompatíveis.
        """
        for nome in ("ator", "critico", "critico_alvo"):
            if nome not in redes:
                raise ValueError(f"Checkpoint sem a rede '{nome}'.")
        self.actor.net.carregar_estado(redes["ator"])
        self.critic.net.carregar_estado(redes["critico"])
        self.critic.target_net.carregar_estado(redes["critico_alvo"])
