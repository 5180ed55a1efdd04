"""
Laços de pré-treino (recompensa intrínseca) e ajuste fino (recompensa da tarefa).

Pré-treino: uma skill sorteada por episódio; após seed_frames, a cada
update_frequency passos monta o lote contrastivo, atualiza o codificador
(ou o discriminador), calcula as recompensas intrínsecas com a
representação já atualizada e atualiza crítico, ator e alvo, nessa ordem.

Ajuste fino: skill fixa durante toda a execução, recompensas extrínsecas
gravadas no buffer e avaliações periódicas sem ruído.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from agents.ddpg import AgenteDDPG, LoteCritico, ReplayBuffer, Segmentos
from core.labirinto import downstream_reward, reset, rollout, skill_onehot, step
from core.recompensas import (
    Codificador,
    ContrastiveBatch,
    Discriminador,
    SkillSpace,
    becl_loss,
    becl_reward,
    build_batch,
    diayn_reward,
    entropy_reward,
    sample_skill,
)
from core.redes import Adam, Mlp
from models.schemas import DownstreamTask, MazeSpec, Transition
from models.schemas_treino import TrainConfig
from tools.metricas import EscritorMetricas


logger = logging.getLogger(__name__)

METODOS = ("becl", "diayn", "entropy")
DIM_ESTADO = 2
DIM_ACAO = 2


def criar_representacao(metodo: str, config: TrainConfig, rng: np.random.Generator) -> Optional[Mlp]:
    """Codificador (becl), discriminador (diayn) ou nada (entropy)."""
    if metodo == "becl":
        return Codificador(DIM_ESTADO, config.hidden_dim, config.feature_dim, rng)
    if metodo == "diayn":
        return Discriminador(DIM_ESTADO, config.skill_dim, rng, hidden_dim=config.hidden_dim)
    return None


@dataclass
class ResultadoPretreino:
    metodo: str
    agente: AgenteDDPG
    representacao: Optional[Mlp]
    buffer: ReplayBuffer
    metricas: List[Dict] = field(default_factory=list)
    atualizacoes: int = 0
    episodios: int = 0

    def redes(self) -> Dict[str, Dict[str, np.ndarray]]:
        redes = self.agente.estados_redes()
        if isinstance(self.representacao, Codificador):
            redes["codificador"] = self.representacao.estado()
        elif isinstance(self.representacao, Discriminador):
            redes["discriminador"] = self.representacao.estado()
        return redes


def recompensas_intrinsecas(
    metodo: str,
    config: TrainConfig,
    representacao: Optional[Mlp],
    lote: ContrastiveBatch,
    segmentos: Segmentos,
    buffer: ReplayBuffer,
) -> np.ndarray:
    """
    Recompensa de cada transição válida dos segmentos, shape (B, n).

    A recompensa de uma transição é avaliada no estado que ela alcança; a
    coluna 0 corresponde às âncoras do lote.
    """
    linhas, colunas = np.nonzero(segmentos.valido)
    consultas = buffer.next_states[segmentos.indices[linhas, colunas]]
    if metodo == "becl":
        valores = becl_reward(representacao, lote, config.kappa, consultas, linhas)
    elif metodo == "diayn":
        valores = diayn_reward(representacao, consultas, lote.skills[linhas], SkillSpace(config.skill_dim))
    else:
        valores = entropy_reward(None, consultas, lote.positives, config.knn_k)
    recompensas = np.zeros(segmentos.valido.shape)
    recompensas[linhas, colunas] = valores
    return recompensas


def _atualizar_pretreino(
    metodo: str,
    config: TrainConfig,
    agente: AgenteDDPG,
    representacao: Optional[Mlp],
    opt_representacao: Optional[Adam],
    buffer: ReplayBuffer,
    lote: ContrastiveBatch,
) -> Dict:
    registro: Dict = {"loss_repr": None}

    if metodo == "becl":
        registro["loss_repr_antes"] = opt_representacao.passo(becl_loss(representacao, lote, config.kappa))
        registro["loss_repr"] = becl_loss(representacao, lote, config.kappa).item()
    elif metodo == "diayn":
        registro["loss_repr"] = opt_representacao.passo(representacao.perda(lote.anchors, lote.skills))

    segmentos = buffer.segmentos(lote.anchor_slots, config.n_step, config.gamma)
    recompensas = recompensas_intrinsecas(metodo, config, representacao, lote, segmentos, buffer)

    slots = lote.anchor_slots
    lote_critico = LoteCritico(
        states=buffer.states[slots],
        skills_onehot=np.eye(config.skill_dim)[lote.skills],
        actions=buffer.actions[slots],
        rewards=recompensas,
        valido=segmentos.valido,
        bootstrap_states=segmentos.bootstrap_states,
        descontos_bootstrap=segmentos.descontos_bootstrap,
    )
    registro.update(agente.atualizar(lote_critico))

    da_ancora = recompensas[:, 0]
    registro["mean_intrinsic_reward"] = float(da_ancora.mean())
    registro["reward_min"] = float(da_ancora.min())
    registro["reward_max"] = float(da_ancora.max())
    if metodo == "becl":
        registro["mean_neg_log_reward"] = float(np.mean(-np.log(da_ancora)))
    registro["reward_por_skill"] = {
        str(z): float(da_ancora[lote.skills == z].mean()) for z in np.unique(lote.skills)
    }
    return registro


def pretrain(
    config: TrainConfig,
    maze: MazeSpec,
    reward_method: str,
    escritor: Optional[EscritorMetricas] = None,
) -> ResultadoPretreino:
    """
    Pré-treino não supervisionado de skills.

    Args:
        config: Hiperparâmetros (rng_seed determina toda a execução).
        maze: Labirinto.
        reward_method: 'becl', 'diayn' ou 'entropy'.
        escritor: Destino das métricas (um registro por atualização).

    Returns:
        ResultadoPretreino com agente, representação, buffer e métricas.

    Raises:
        ValueError: Método desconhecido.
    """
    if reward_method not in METODOS:
        raise ValueError(f"Método de recompensa desconhecido: {reward_method!r} (use {', '.join(METODOS)})")

    escritor = escritor if escritor is not None else EscritorMetricas()
    rng = np.random.default_rng(config.rng_seed)
    espaco = SkillSpace(config.skill_dim)
    agente = AgenteDDPG(config, rng, DIM_ESTADO, DIM_ACAO)
    representacao = criar_representacao(reward_method, config, rng)
    opt_representacao = (
        Adam(representacao.parametros, config.learning_rate) if representacao is not None else None
    )
    buffer = ReplayBuffer(config.buffer_capacity, DIM_ESTADO, DIM_ACAO)
    resultado = ResultadoPretreino(reward_method, agente, representacao, buffer, escritor.registros)

    frame = 0
    while frame < config.pretrain_frames:
        skill = sample_skill(espaco, rng)
        onehot = espaco.onehot(skill)
        estado = reset(maze)
        for t in range(maze.episode_length):
            if frame >= config.pretrain_frames:
                break
            s = estado.como_array()
            acao = agente.act(s, onehot, explore=True, rng=rng)
            estado = step(maze, estado, acao)
            buffer.adicionar(
                s, acao, estado.position, skill, 0.0, resultado.episodios, t, fim=t == maze.episode_length - 1
            )
            frame += 1

            if frame >= config.seed_frames and frame % config.update_frequency == 0:
                try:
                    lote = build_batch(buffer, config.pair_mode, config.batch_size, rng, config.min_gap)
                except ValueError as e:
                    logger.debug("Atualização ignorada no frame %d: %s", frame, e)
                    continue
                registro = _atualizar_pretreino(
                    reward_method, config, agente, representacao, opt_representacao, buffer, lote
                )
                resultado.atualizacoes += 1
                registro.update(frame=frame, episode=resultado.episodios, update_index=resultado.atualizacoes)
                escritor.registrar(registro)
                if resultado.atualizacoes % 1000 == 0:
                    logger.info(
                        "frame %d: loss_critic=%.4f loss_repr=%s recompensa média=%.4f",
                        frame, registro["loss_critic"], registro["loss_repr"], registro["mean_intrinsic_reward"],
                    )
        resultado.episodios += 1

    return resultado


def avaliar_skills(
    agente: AgenteDDPG,
    maze: MazeSpec,
    skill_dim: int,
    trajetorias_por_skill: int = 20,
) -> List[Transition]:
    """
    Trajetórias sem ruído de exploração, trajetorias_por_skill por skill.

    Com política sem ruído, início fixo e dinâmica determinística, as
    trajetórias de uma mesma skill são idênticas: o episódio é simulado uma
    vez e repetido com episode_id distintos, para manter o formato do dump.
    """
    politica = agente.politica(explore=False)
    transicoes: List[Transition] = []
    for skill in range(skill_dim):
        episodio = rollout(maze, politica, skill, skill_dim=skill_dim)
        for j in range(trajetorias_por_skill):
            episode_id = skill * trajetorias_por_skill + j
            transicoes.extend(t.model_copy(update={"episode_id": episode_id}) for t in episodio)
    return transicoes


def avaliar_retorno(
    agente: AgenteDDPG, maze: MazeSpec, task: DownstreamTask, skill: int, skill_dim: int, episodios: int
) -> float:
    """Retorno episódico médio da política sem ruído na tarefa."""
    politica = agente.politica(explore=False)
    retornos = [
        sum(t.extrinsic_reward for t in rollout(maze, politica, skill, rng_seed=e, skill_dim=skill_dim, task=task))
        for e in range(episodios)
    ]
    return float(np.mean(retornos))


@dataclass
class ResultadoAjuste:
    skill: int
    agente: AgenteDDPG
    buffer: ReplayBuffer
    curva: List[Tuple[int, float]] = field(default_factory=list)
    metricas: List[Dict] = field(default_factory=list)

    @property
    def retorno_final(self) -> float:
        return self.curva[-1][1]

    def frames_ate_limiar(self, limiar: float) -> Optional[int]:
        """Primeiro frame cuja avaliação atinge o limiar (None se nunca)."""
        for frame, retorno in self.curva:
            if retorno >= limiar:
                return frame
        return None


def finetune(
    config: TrainConfig,
    maze: MazeSpec,
    task: DownstreamTask,
    checkpoint: Optional[Dict[str, Dict[str, np.ndarray]]] = None,
    skill_choice: Union[str, int] = "random",
    escritor: Optional[EscritorMetricas] = None,
) -> ResultadoAjuste:
    """
    Ajuste fino com recompensa extrínseca a partir de um checkpoint (ou do zero).

    Args:
        config: Hiperparâmetros.
        maze: Labirinto.
        task: Tarefa de objetivo.
        checkpoint: Redes do pré-treino; None treina DDPG do zero.
        skill_choice: 'random' (sorteada de p(z)) ou índice da skill.
        escritor: Destino das métricas.

    Returns:
        ResultadoAjuste com a curva de avaliação (frame, retorno médio).

    Raises:
        ValueError: Skill inválida ou checkpoint com dimensões incompatíveis.
    """
    escritor = escritor if escritor is not None else EscritorMetricas()
    rng = np.random.default_rng(config.rng_seed)
    agente = AgenteDDPG(config, rng, DIM_ESTADO, DIM_ACAO)
    if checkpoint is not None:
        try:
            agente.carregar_redes(checkpoint)
        except ValueError as e:
            raise ValueError(f"Checkpoint incompatível com a configuração: {e}") from e

    espaco = SkillSpace(config.skill_dim)
    skill = sample_skill(espaco, rng) if skill_choice == "random" else int(skill_choice)
    onehot = skill_onehot(skill, config.skill_dim)
    buffer = ReplayBuffer(config.buffer_capacity, DIM_ESTADO, DIM_ACAO)
    resultado = ResultadoAjuste(skill, agente, buffer, metricas=escritor.registros)

    def avaliar(frame: int) -> None:
        retorno = avaliar_retorno(agente, maze, task, skill, config.skill_dim, config.episodios_avaliacao)
        resultado.curva.append((frame, retorno))
        escritor.registrar({"frame": frame, "avaliacao_retorno": retorno, "skill": skill})

    avaliar(0)
    frame, episodio = 0, 0
    while frame < config.finetune_frames:
        estado = reset(maze)
        retorno = 0.0
        for t in range(maze.episode_length):
            if frame >= config.finetune_frames:
                break
            s = estado.como_array()
            acao = agente.act(s, onehot, explore=True, rng=rng)
            estado = step(maze, estado, acao)
            recompensa = downstream_reward(task, estado.position)
            buffer.adicionar(s, acao, estado.position, skill, recompensa, episodio, t, fim=t == maze.episode_length - 1)
            retorno += recompensa
            frame += 1

            if (
                frame >= config.seed_frames
                and frame % config.update_frequency == 0
                and len(buffer) >= config.batch_size
            ):
                slots = buffer.amostrar(config.batch_size, rng)
                segmentos = buffer.segmentos(slots, config.n_step, config.gamma)
                perdas = agente.atualizar(LoteCritico(
                    states=buffer.states[slots],
                    skills_onehot=np.tile(onehot, (len(slots), 1)),
                    actions=buffer.actions[slots],
                    rewards=np.where(segmentos.valido, buffer.rewards[segmentos.indices], 0.0),
                    valido=segmentos.valido,
                    bootstrap_states=segmentos.bootstrap_states,
                    descontos_bootstrap=segmentos.descontos_bootstrap,
                ))
                if frame % 1000 == 0:
                    logger.info("frame %d: loss_critic=%.4f loss_actor=%.4f", frame, perdas["loss_critic"], perdas["loss_actor"])
            if frame % config.avaliacao_a_cada == 0:
                avaliar(frame)

        escritor.registrar({"frame": frame, "episode": episodio, "episodic_return": retorno, "skill": skill})
        episodio += 1

    if resultado.curva[-1][0] != frame:
        avaliar(frame)
    return resultado
