"""
Espaço de skills, lote contrastivo e recompensas intrínsecas.

Três recompensas são oferecidas ao pré-treino:

- becl: razão softmax entre o par positivo (dois estados da mesma skill) e
  os negativos (estados de outras skills) no espaço de features unitárias;
- diayn: log q(z|s) − log p(z) com um discriminador treinado por entropia
  cruzada;
- entropy: média de log(1 + d) aos k vizinhos mais próximos.
"""

import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import log_softmax

from core.autograd import Tensor, concatenar, escolher, logsumexp
from core.redes import Mlp
from models.schemas import MlpSpec


@dataclass(frozen=True)
class SkillSpace:
    """Conjunto discreto de m skills com prior uniforme."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"Número de skills deve ser positivo: {self.m}")

    @property
    def prior(self) -> np.ndarray:
        return np.full(self.m, 1.0 / self.m)

    @property
    def log_prior(self) -> float:
        return -float(np.log(self.m))

    def onehot(self, skill: Union[int, Sequence[int]]) -> np.ndarray:
        indices = np.asarray(skill, dtype=int)
        if np.any(indices < 0) or np.any(indices >= self.m):
            raise ValueError(f"Skill fora de [0, {self.m}): {skill}")
        return np.eye(self.m)[indices]


def sample_skill(space: SkillSpace, rng: np.random.Generator) -> int:
    """Sorteia uma skill uniforme em [0, m)."""
    return int(rng.integers(space.m))


# ----------------------------------------------------------------------
# Lote contrastivo
# ----------------------------------------------------------------------


class FonteEpisodios(Protocol):
    """O que build_batch precisa do buffer de replay."""

    next_states: np.ndarray
    step_index: np.ndarray
    episode_ids: np.ndarray

    def indice_episodios(self) -> Dict[int, List[int]]:
        """skill → identificadores dos episódios presentes."""
        ...

    def tamanho_episodio(self, episode_id: int) -> int:
        ...

    def slots_episodio(self, episode_id: int) -> np.ndarray:
        """Slots do episódio em ordem de passo."""
        ...


@dataclass
class ContrastiveBatch:
    """
    Pares (âncora, positivo) gerados pela mesma skill.

    anchors/positives são os next_states das transições sorteadas;
    anchor_slots indexa as transições âncora no buffer, que também formam o
    lote de atualização do agente.
    """

    anchors: np.ndarray
    positives: np.ndarray
    skills: np.ndarray
    anchor_slots: np.ndarray
    positive_slots: np.ndarray
    anchor_episodes: np.ndarray
    positive_episodes: np.ndarray

    def __post_init__(self):
        if len(np.unique(self.skills)) < 2:
            raise ValueError("Lote contrastivo com uma única skill: não há negativos.")

    def __len__(self) -> int:
        return len(self.skills)


def _garantir_duas_skills(escolhas: np.ndarray, n_skills: int, rng: np.random.Generator) -> np.ndarray:
    if len(np.unique(escolhas)) < 2:
        escolhas = escolhas.copy()
        escolhas[0] = (escolhas[0] + 1 + rng.integers(n_skills - 1)) % n_skills
    return escolhas


def build_batch(
    buffer: FonteEpisodios,
    pair_mode: str,
    batch_pairs: int,
    rng: np.random.Generator,
    min_gap: int = 25,
) -> ContrastiveBatch:
    """
    Monta o lote contrastivo a partir do buffer.

    Args:
        buffer: Fonte de episódios indexados por skill.
        pair_mode: 'cross' (positivo de outro episódio da mesma skill) ou
            'same' (positivo do mesmo episódio, a pelo menos min_gap passos).
        batch_pairs: Número de pares.
        rng: Gerador de números aleatórios.
        min_gap: Distância mínima em passos no modo 'same'.

    Returns:
        ContrastiveBatch com pelo menos duas skills distintas.

    Raises:
        ValueError: Modo desconhecido ou menos de duas skills com dados
            suficientes para o modo.
    """
    if pair_mode not in ("cross", "same"):
        raise ValueError(f"Modo de pares desconhecido: {pair_mode!r}")

    indice = buffer.indice_episodios()
    elegiveis: Dict[int, List[int]] = {}
    for skill in sorted(indice):
        episodios = [e for e in indice[skill] if buffer.tamanho_episodio(e) > 0]
        if pair_mode == "cross":
            if len(episodios) >= 2:
                elegiveis[skill] = episodios
            elif episodios:
                warnings.warn(
                    f"Skill {skill} tem um único episódio no buffer e fica fora do lote contrastivo."
                )
        else:
            episodios = [e for e in episodios if np.ptp(buffer.step_index[buffer.slots_episodio(e)]) >= min_gap]
            if episodios:
                elegiveis[skill] = episodios

    if len(elegiveis) < 2:
        raise ValueError(
            f"Dados insuficientes para o modo '{pair_mode}': {len(elegiveis)} skill(s) elegível(is), "
            "são necessárias pelo menos 2 para haver negativos."
        )

    skills_ord = list(elegiveis)
    pesos = np.array(
        [sum(buffer.tamanho_episodio(e) for e in elegiveis[z]) for z in skills_ord], dtype=np.float64
    )
    escolhas = rng.choice(len(skills_ord), size=batch_pairs, p=pesos / pesos.sum())
    escolhas = _garantir_duas_skills(escolhas, len(skills_ord), rng)

    slots_a = np.empty(batch_pairs, dtype=int)
    slots_p = np.empty(batch_pairs, dtype=int)
    for k, c in enumerate(escolhas):
        episodios = elegiveis[skills_ord[c]]
        if pair_mode == "cross":
            ea, ep = rng.choice(len(episodios), size=2, replace=False)
            slots_a[k] = rng.choice(buffer.slots_episodio(episodios[ea]))
            slots_p[k] = rng.choice(buffer.slots_episodio(episodios[ep]))
        else:
            slots = buffer.slots_episodio(episodios[rng.integers(len(episodios))])
            passos = buffer.step_index[slots]
            distancias = np.abs(passos[:, None] - passos[None, :]) >= min_gap
            com_parceiro = np.flatnonzero(distancias.any(axis=1))
            i = rng.choice(com_parceiro)
            j = rng.choice(np.flatnonzero(distancias[i]))
            slots_a[k], slots_p[k] = slots[i], slots[j]

    skills = np.array([skills_ord[c] for c in escolhas], dtype=int)
    return ContrastiveBatch(
        anchors=buffer.next_states[slots_a].copy(),
        positives=buffer.next_states[slots_p].copy(),
        skills=skills,
        anchor_slots=slots_a,
        positive_slots=slots_p,
        anchor_episodes=buffer.episode_ids[slots_a].copy(),
        positive_episodes=buffer.episode_ids[slots_p].copy(),
    )


# ----------------------------------------------------------------------
# BeCL
# ----------------------------------------------------------------------


class Codificador(Mlp):
    """
    Codificador contrastivo f com saída na esfera unitária.

    Larguras dim(S) → h → h → d → h → d (h = 256 nos labirintos).
    """

    def __init__(self, dim_estado: int, hidden_dim: int, feature_dim: int, rng: np.random.Generator):
        spec = MlpSpec(
            layer_widths=[dim_estado, hidden_dim, hidden_dim, feature_dim, hidden_dim, feature_dim],
            final_unit_norm=True,
        )
        super().__init__(spec, rng)


Encoder = Callable[[np.ndarray], Tensor]


def _mascara_negativos(skills: np.ndarray) -> np.ndarray:
    """
    Máscara (B, 2B) das colunas ativas no denominador de cada âncora.

    Colunas [0, B) são as âncoras, [B, 2B) os positivos. Entram os estados
    de outras skills e o positivo da própria âncora.
    """
    B = len(skills)
    outra_skill = skills[:, None] != skills[None, :]
    mascara = np.concatenate([outra_skill, outra_skill], axis=1)
    mascara[np.arange(B), B + np.arange(B)] = True
    return mascara


def _termos_becl(encoder: Encoder, batch: ContrastiveBatch, kappa: float) -> Tensor:
    """−log da razão softmax de cada âncora, shape (B,)."""
    if kappa <= 0:
        raise ValueError(f"Temperatura deve ser positiva: {kappa}")
    skills = np.asarray(batch.skills)
    if len(np.unique(skills)) < 2:
        raise ValueError("Lote com uma única skill: não há negativos.")
    B = len(skills)
    fa = encoder(batch.anchors)
    fp = encoder(batch.positives)
    todas = concatenar([fa, fp], eixo=0)
    logits = (fa @ todas.T) * (1.0 / kappa)
    positivo = escolher(logits, B + np.arange(B))
    return logsumexp(logits, eixo=-1, mascara=_mascara_negativos(skills)) - positivo


def becl_loss(encoder: Encoder, batch: ContrastiveBatch, kappa: float) -> Tensor:
    """
    Perda contrastiva com temperatura, média sobre as âncoras.

    Para cada âncora i: −log[ e^{f_iᵀf_i⁺/κ} / (e^{f_iᵀf_i⁺/κ} + Σ_{j: z_j ≠ z_i} e^{f_jᵀf_i/κ}) ],
    onde j percorre âncoras e positivos do lote. Estados da mesma skill que
    não são o positivo ficam fora do denominador.

    Args:
        encoder: Função estados → features unitárias (Tensor).
        batch: Lote contrastivo.
        kappa: Temperatura κ > 0.

    Returns:
        Tensor escalar ≥ 0.

    Raises:
        ValueError: Lote com uma única skill ou κ ≤ 0.
    """
    return _termos_becl(encoder, batch, kappa).media()


def becl_reward(
    encoder: Encoder,
    batch: ContrastiveBatch,
    kappa: float,
    consultas: Optional[np.ndarray] = None,
    ancora_da_consulta: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Recompensa intrínseca por âncora: a razão softmax de becl_loss.

    Sem gradiente. Com `consultas`, cada estado consultado ocupa o lugar da
    âncora indicada em `ancora_da_consulta`, mantendo o positivo e os
    negativos dela (usado nos passos intermediários dos retornos n-step).

    Returns:
        Array em (0, 1); sem consultas, shape (B,) e mean(−log r) = becl_loss.
    """
    if consultas is None:
        return np.exp(-_termos_becl(encoder, batch, kappa).valores)

    if kappa <= 0:
        raise ValueError(f"Temperatura deve ser positiva: {kappa}")
    skills = np.asarray(batch.skills)
    if len(np.unique(skills)) < 2:
        raise ValueError("Lote com uma única skill: não há negativos.")
    ancora_da_consulta = np.asarray(ancora_da_consulta, dtype=int)
    B = len(skills)
    fa = encoder(batch.anchors).valores
    fp = encoder(batch.positives).valores
    fq = encoder(np.asarray(consultas, dtype=np.float64)).valores
    todas = np.concatenate([fa, fp], axis=0)

    logits = fq @ todas.T / kappa
    linhas = np.arange(len(fq))
    mascara = _mascara_negativos(skills)[ancora_da_consulta]
    mascarado = np.where(mascara, logits, -np.inf)
    maximo = mascarado.max(axis=1, keepdims=True)
    log_den = np.squeeze(maximo, 1) + np.log(np.exp(mascarado - maximo).sum(axis=1))
    return np.exp(logits[linhas, B + ancora_da_consulta] - log_den)


# ----------------------------------------------------------------------
# DIAYN
# ----------------------------------------------------------------------


class Discriminador(Mlp):
    """q(z|s): MLP 2 → 256 → 256 → m com softmax na saída."""

    def __init__(self, dim_estado: int, skill_dim: int, rng: np.random.Generator, hidden_dim: int = 256):
        spec = MlpSpec(layer_widths=[dim_estado, hidden_dim, hidden_dim, skill_dim])
        super().__init__(spec, rng)

    def logits(self, estados: np.ndarray) -> Tensor:
        return super().__call__(estados)

    def probabilidades(self, estados: np.ndarray) -> np.ndarray:
        return np.exp(log_softmax(self.logits(estados).valores, axis=-1))

    def perda(self, estados: np.ndarray, skills: Sequence[int]) -> Tensor:
        """Entropia cruzada média de q(z|s) contra as skills verdadeiras."""
        logits = self.logits(estados)
        return (logsumexp(logits, eixo=-1) - escolher(logits, skills)).media()


def diayn_reward(
    discriminator: Union[Discriminador, Callable[[np.ndarray], np.ndarray]],
    state: np.ndarray,
    skill: Union[int, Sequence[int]],
    prior: Union[SkillSpace, np.ndarray],
) -> Union[float, np.ndarray]:
    """
    log q(z|s) − log p(z).

    Args:
        discriminator: Discriminador ou função estados → probabilidades (B, m).
        state: Estado (2,) ou lote (B, 2).
        skill: Skill ou skills do lote.
        prior: SkillSpace (uniforme) ou vetor p(z).

    Raises:
        ValueError: Saída do discriminador que não é distribuição de probabilidade.

    Exemplo:
        >>> diayn_reward(lambda s: np.full((len(s), 10), 0.1), np.zeros(2), 3, SkillSpace(10))
        0.0
    """
    estados = np.atleast_2d(np.asarray(state, dtype=np.float64))
    skills = np.atleast_1d(np.asarray(skill, dtype=int))
    if isinstance(discriminator, Discriminador):
        probs = discriminator.probabilidades(estados)
    else:
        probs = np.asarray(discriminator(estados), dtype=np.float64)

    if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=-1) - 1.0) > 1e-6):
        raise ValueError("Saída do discriminador não é uma distribuição de probabilidade.")

    p_z = prior.prior if isinstance(prior, SkillSpace) else np.asarray(prior, dtype=np.float64)
    q = probs[np.arange(len(skills)), skills]
    recompensa = np.log(np.maximum(q, np.finfo(np.float64).tiny)) - np.log(p_z[skills])
    return float(recompensa[0]) if np.ndim(state) == 1 else recompensa


# ----------------------------------------------------------------------
# Entropia por partículas
# ----------------------------------------------------------------------


def entropy_reward(
    feature_fn: Optional[Callable[[np.ndarray], np.ndarray]],
    state: np.ndarray,
    reference_set: np.ndarray,
    k: int = 12,
) -> Union[float, np.ndarray]:
    """
    (1/k) Σ log(1 + ‖f(s) − f(s_j)‖) sobre os k vizinhos mais próximos.

    Args:
        feature_fn: Mapa de features (None = identidade no estado 2D).
        state: Estado (2,) ou lote (B, 2).
        reference_set: Estados de referência (R, 2), R ≥ k.
        k: Número de vizinhos.

    Raises:
        ValueError: Conjunto de referência vazio ou menor que k.
    """
    referencia = np.atleast_2d(np.asarray(reference_set, dtype=np.float64))
    if referencia.size == 0:
        raise ValueError("Conjunto de referência vazio.")
    if len(referencia) < k:
        raise ValueError(f"Conjunto de referência com {len(referencia)} pontos, menos que k={k}.")

    estados = np.atleast_2d(np.asarray(state, dtype=np.float64))
    if feature_fn is not None:
        estados, referencia = feature_fn(estados), feature_fn(referencia)
    distancias, _ = cKDTree(referencia).query(estados, k=k)
    distancias = np.asarray(distancias).reshape(len(estados), k)
    recompensa = np.log1p(distancias).mean(axis=1)
    return float(recompensa[0]) if np.ndim(state) == 1 else recompensa
