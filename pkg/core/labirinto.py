"""
Dinâmica do labirinto contínuo 2D.

O agente observa apenas a posição e desloca-se em linha reta a cada passo.
Se o segmento percorrido tocar uma parede (ou a borda da arena), o agente
para no ponto de contato, recuado por EPSILON_CONTATO para o lado de onde
veio. Não há ruído de transição: toda a estocasticidade vem da política.

Todas as funções são puras sobre MazeSpec/EnvState; instâncias distintas
podem ser usadas em paralelo.
"""

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from models.schemas import EPSILON_CONTATO, DownstreamTask, MazeSpec, Transition


# (estado, one-hot da skill, rng) -> ação
Politica = Callable[[np.ndarray, np.ndarray, np.random.Generator], np.ndarray]

OBJETIVOS_PADRAO: Tuple[Tuple[float, float], ...] = (
    (0.1, 0.1),
    (0.1, 0.9),
    (0.9, 0.1),
    (0.9, 0.9),
)

_TOL_PARAMETRO = 1e-12


@dataclass(frozen=True)
class EnvState:
    """Posição corrente e índice do passo dentro do episódio."""

    position: Tuple[float, float]
    step_index: int = 0

    def como_array(self) -> np.ndarray:
        return np.array(self.position, dtype=np.float64)


def reset(spec: MazeSpec) -> EnvState:
    """Estado inicial determinístico (posição de partida, passo 0)."""
    return EnvState(position=(float(spec.start[0]), float(spec.start[1])), step_index=0)


def _obstaculos(spec: MazeSpec, incluir_bordas: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Extremos (A, B) de todos os segmentos bloqueantes, shape (W, 2) cada."""
    segmentos = [tuple(map(tuple, s)) for s in spec.walls]
    if incluir_bordas:
        x0, y0, x1, y1 = spec.bounds
        segmentos += [
            ((x0, y0), (x1, y0)),
            ((x1, y0), (x1, y1)),
            ((x1, y1), (x0, y1)),
            ((x0, y1), (x0, y0)),
        ]
    if not segmentos:
        vazio = np.zeros((0, 2))
        return vazio, vazio
    arr = np.asarray(segmentos, dtype=np.float64)
    return arr[:, 0, :], arr[:, 1, :]


def _primeira_colisao(
    p: np.ndarray, q: np.ndarray, A: np.ndarray, B: np.ndarray
) -> Optional[Tuple[float, int]]:
    """
    Menor parâmetro t ∈ [0, 1] em que o segmento p→q toca algum obstáculo.

    Returns:
        (t, índice do obstáculo) ou None se o caminho estiver livre.
    """
    if len(A) == 0:
        return None
    D = q - p
    E = B - A
    AP = A - p
    denom = D[0] * E[:, 1] - D[1] * E[:, 0]
    cruz_ap_d = AP[:, 0] * D[1] - AP[:, 1] * D[0]
    escala = np.linalg.norm(D) * np.linalg.norm(E, axis=1)
    paralelo = np.abs(denom) <= 1e-14 * np.maximum(escala, 1e-300)

    melhor: Optional[Tuple[float, int]] = None
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(paralelo, np.inf, (AP[:, 0] * E[:, 1] - AP[:, 1] * E[:, 0]) / denom)
        u = np.where(paralelo, np.inf, cruz_ap_d / denom)
    acerto = (
        ~paralelo
        & (t >= -_TOL_PARAMETRO) & (t <= 1 + _TOL_PARAMETRO)
        & (u >= -_TOL_PARAMETRO) & (u <= 1 + _TOL_PARAMETRO)
    )
    if np.any(acerto):
        i = int(np.argmin(np.where(acerto, t, np.inf)))
        melhor = (max(0.0, float(t[i])), i)

    # colineares: sobreposição do movimento com a própria parede
    d2 = float(D @ D)
    for i in np.flatnonzero(paralelo):
        if d2 == 0.0 or abs(cruz_ap_d[i]) > 1e-14 * max(escala[i], 1e-300):
            continue
        ta = float((A[i] - p) @ D) / d2
        tb = float((B[i] - p) @ D) / d2
        inicio, fim = max(0.0, min(ta, tb)), min(1.0, max(ta, tb))
        if inicio <= fim and (melhor is None or inicio < melhor[0]):
            melhor = (inicio, int(i))
    return melhor


def _dentro(spec: MazeSpec, p: np.ndarray) -> bool:
    x0, y0, x1, y1 = spec.bounds
    return x0 <= p[0] <= x1 and y0 <= p[1] <= y1


def cruza_parede(spec: MazeSpec, p: Sequence[float], q: Sequence[float], incluir_bordas: bool = False) -> bool:
    """True se o segmento p→q toca alguma parede (e, opcionalmente, a borda)."""
    A, B = _obstaculos(spec, incluir_bordas=incluir_bordas)
    return _primeira_colisao(np.asarray(p, float), np.asarray(q, float), A, B) is not None


def step(spec: MazeSpec, state: EnvState, action: Sequence[float]) -> EnvState:
    """
    Avança um passo do ambiente.

    A posição proposta é p + step_scale · clip(ação, −1, 1). Se o caminho
    tocar um obstáculo, o agente para no ponto de contato deslocado ε ao
    longo da normal da parede, do lado de origem. Se esse candidato não for
    válido (quinas), recua ε ao longo do movimento; em último caso fica
    parado.

    Raises:
        RuntimeError: Passo após o fim do episódio.

    Exemplo:
        >>> spec = MazeSpec(start=(0.5, 0.5))
        >>> step(spec, reset(spec), (1.0, 0.0)).position
        (0.55, 0.5)
    """
    if state.step_index >= spec.episode_length:
        raise RuntimeError(
            f"Passo após o fim do episódio (step_index={state.step_index}, "
            f"episode_length={spec.episode_length})."
        )

    p = state.como_array()
    acao = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    deslocamento = spec.step_scale * acao
    proximo = state.step_index + 1
    if not np.any(deslocamento):
        return EnvState(position=state.position, step_index=proximo)

    q = p + deslocamento
    A, B = _obstaculos(spec)
    colisao = _primeira_colisao(p, q, A, B)
    if colisao is None:
        return EnvState(position=(float(q[0]), float(q[1])), step_index=proximo)

    t, i = colisao
    contato = p + t * deslocamento
    E = B[i] - A[i]
    normal = np.array([-E[1], E[0]]) / np.linalg.norm(E)
    lado = float(normal @ (p - A[i]))

    candidatos: List[np.ndarray] = []
    if lado != 0.0:
        candidatos.append(contato + EPSILON_CONTATO * np.sign(lado) * normal)
    candidatos.append(contato - EPSILON_CONTATO * deslocamento / np.linalg.norm(deslocamento))

    for c in candidatos:
        if _dentro(spec, c) and _primeira_colisao(p, c, A, B) is None:
            return EnvState(position=(float(c[0]), float(c[1])), step_index=proximo)
    return EnvState(position=state.position, step_index=proximo)


def skill_onehot(skill: int, skill_dim: int) -> np.ndarray:
    if not 0 <= skill < skill_dim:
        raise ValueError(f"Skill {skill} fora de [0, {skill_dim}).")
    v = np.zeros(skill_dim)
    v[skill] = 1.0
    return v


def downstream_reward(task: DownstreamTask, next_state: Sequence[float]) -> float:
    """
    Recompensa da tarefa de alcançar o objetivo.

    Exemplo:
        >>> downstream_reward(DownstreamTask(goal=(0.5, 0.5)), (0.5, 0.8))
        -0.3...
    """
    distancia = float(np.hypot(next_state[0] - task.goal[0], next_state[1] - task.goal[1]))
    if task.reward_kind == "dense":
        return -distancia
    return 1.0 if distancia <= task.radius else 0.0


def tarefa_padrao(indice: int, reward_kind: str = "dense") -> DownstreamTask:
    """Uma das quatro tarefas de canto (0: (0.1, 0.1) ... 3: (0.9, 0.9))."""
    if not 0 <= indice < len(OBJETIVOS_PADRAO):
        raise ValueError(f"Índice de objetivo inválido: {indice}")
    return DownstreamTask(goal=OBJETIVOS_PADRAO[indice], reward_kind=reward_kind)


def rollout_iter(
    spec: MazeSpec,
    policy: Politica,
    skill: int,
    skill_dim: int,
    rng: np.random.Generator,
    episode_id: int = 0,
    episode_length: Optional[int] = None,
    task: Optional[DownstreamTask] = None,
) -> Iterator[Transition]:
    """Gera as transições de um episódio, uma a uma."""
    comprimento = spec.episode_length if episode_length is None else episode_length
    if comprimento != spec.episode_length:
        spec = spec.model_copy(update={"episode_length": comprimento})
    onehot = skill_onehot(skill, skill_dim)
    estado = reset(spec)
    for t in range(comprimento):
        s = estado.como_array()
        acao = np.clip(np.asarray(policy(s, onehot, rng), dtype=np.float64), -1.0, 1.0)
        estado = step(spec, estado, acao)
        recompensa = downstream_reward(task, estado.position) if task is not None else 0.0
        yield Transition(
            state=tuple(s),
            action=(float(acao[0]), float(acao[1])),
            next_state=estado.position,
            skill=skill,
            extrinsic_reward=recompensa,
            episode_id=episode_id,
            step_index=t,
        )


def rollout(
    spec: MazeSpec,
    policy: Politica,
    skill: int,
    episode_length: Optional[int] = None,
    rng_seed: int = 0,
    skill_dim: int = 10,
    episode_id: int = 0,
    task: Optional[DownstreamTask] = None,
) -> List[Transition]:
    """
    Executa um episódio completo com a skill fixa.

    Args:
        spec: Labirinto.
        policy: Função (estado, one-hot, rng) -> ação.
        skill: Índice da skill (constante no episódio).
        episode_length: Passos do episódio (padrão: spec.episode_length).
        rng_seed: Semente do gerador entregue à política.
        skill_dim: Número de skills (tamanho do one-hot).
        episode_id: Identificador gravado nas transições.
        task: Se dada, a recompensa extrínseca é a da tarefa.

    Returns:
        Exatamente episode_length transições.
    """
    rng = np.random.default_rng(rng_seed)
    return list(
        rollout_iter(spec, policy, skill, skill_dim, rng, episode_id, episode_length, task)
    )


def indice_celula(posicao: Sequence[float], G: int, bounds=(0.0, 0.0, 1.0, 1.0)) -> Tuple[int, int]:
    """Célula (ix, iy) da grade G×G que contém a posição."""
    x0, y0, x1, y1 = bounds
    ix = min(max(int((posicao[0] - x0) / (x1 - x0) * G), 0), G - 1)
    iy = min(max(int((posicao[1] - y0) / (y1 - y0) * G), 0), G - 1)
    return ix, iy


def celulas_alcancaveis(spec: MazeSpec, G: int) -> np.ndarray:
    """
    Máscara (G, G) das células alcançáveis a partir da célula inicial.

    Duas células vizinhas estão ligadas quando o segmento entre seus
    centros não toca nenhuma parede.
    """
    x0, y0, x1, y1 = spec.bounds
    largura, altura = (x1 - x0) / G, (y1 - y0) / G
    A, B = _obstaculos(spec, incluir_bordas=False)

    def centro(ix: int, iy: int) -> np.ndarray:
        return np.array([x0 + (ix + 0.5) * largura, y0 + (iy + 0.5) * altura])

    alcancavel = np.zeros((G, G), dtype=bool)
    inicio = indice_celula(spec.start, G, spec.bounds)
    alcancavel[inicio] = True
    fila = deque([inicio])
    while fila:
        ix, iy = fila.popleft()
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            jx, jy = ix + dx, iy + dy
            if not (0 <= jx < G and 0 <= jy < G) or alcancavel[jx, jy]:
                continue
            if _primeira_colisao(centro(ix, iy), centro(jx, jy), A, B) is None:
                alcancavel[jx, jy] = True
                fila.append((jx, jy))
    return alcancavel
