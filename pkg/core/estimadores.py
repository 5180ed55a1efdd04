"""
Estimadores usados nos diagnósticos.

- OccupancyGrid: histograma célula × skill da visitação (ρ_π não descontada);
- binned_mi / entropia_binada / coverage: quantidades plug-in exatas;
- particle_entropy: proxy de entropia por k vizinhos;
- bessel_i / VmfKde / vmf_entropy: estimador de ressubstituição com
  núcleo von Mises-Fisher na esfera;
- MineNet / mine_estimate: estimador neural de informação mútua com
  correção por média móvel do denominador.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gammaln, logsumexp

from core.autograd import Tensor
from core.labirinto import indice_celula
from core.redes import Adam, Mlp
from models.schemas import MlpSpec


logger = logging.getLogger(__name__)

TOL_UNITARIA = 1e-6


# ----------------------------------------------------------------------
# Grade de ocupação
# ----------------------------------------------------------------------


@dataclass
class OccupancyGrid:
    """Contagens (G, G, m) de estados visitados por célula e skill."""

    G: int
    m: int
    bounds: Tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.G, self.G, self.m), dtype=np.int64)
        elif self.counts.shape != (self.G, self.G, self.m):
            raise ValueError(f"Contagens com shape {self.counts.shape}, esperado {(self.G, self.G, self.m)}.")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def registrar(self, posicoes: np.ndarray, skills: Sequence[int]) -> "OccupancyGrid":
        posicoes = np.atleast_2d(np.asarray(posicoes, dtype=np.float64))
        skills = np.atleast_1d(np.asarray(skills, dtype=int))
        if len(posicoes) != len(skills):
            raise ValueError("posicoes e skills com tamanhos diferentes.")
        for p, z in zip(posicoes, skills):
            ix, iy = indice_celula(p, self.G, self.bounds)
            self.counts[ix, iy, z] += 1
        return self

    def marginal_celulas(self) -> np.ndarray:
        return self.counts.sum(axis=-1)

    def histogramas_por_skill(self) -> np.ndarray:
        """Contagens (m, G, G), uma grade por skill."""
        return np.moveaxis(self.counts, -1, 0)


def binned_mi(grid: OccupancyGrid) -> float:
    """
    Î(S;Z) plug-in entre célula e skill, em nats (0·log 0 = 0).

    Raises:
        ValueError: Grade vazia.
    """
    total = grid.total
    if total == 0:
        raise ValueError("Grade de ocupação vazia: não há estados registrados.")
    conjunta = grid.counts.reshape(-1, grid.m) / total
    p_c = conjunta.sum(axis=1, keepdims=True)
    p_z = conjunta.sum(axis=0, keepdims=True)
    ativos = conjunta > 0
    razao = conjunta[ativos] / (p_c @ p_z)[ativos]
    return max(0.0, float(np.sum(conjunta[ativos] * np.log(razao))))


def entropia_binada(grid: OccupancyGrid) -> float:
    """Ĥ(S) plug-in da marginal das células, em nats."""
    total = grid.total
    if total == 0:
        raise ValueError("Grade de ocupação vazia: não há estados registrados.")
    p = grid.marginal_celulas().ravel() / total
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def coverage(grid: OccupancyGrid, alcancaveis: Optional[np.ndarray] = None) -> float:
    """Fração das células alcançáveis com pelo menos uma visita."""
    visitadas = grid.marginal_celulas() > 0
    if alcancaveis is None:
        alcancaveis = np.ones_like(visitadas, dtype=bool)
    n_alcancaveis = int(alcancaveis.sum())
    if n_alcancaveis == 0:
        return 0.0
    return float(np.sum(visitadas & alcancaveis)) / n_alcancaveis


def particle_entropy(features: np.ndarray, k: int = 12) -> float:
    """
    Média sobre os pontos de log(1 + distância média aos k vizinhos).

    Raises:
        ValueError: Menos de k + 1 pontos.
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if len(features) < k + 1:
        raise ValueError(f"particle_entropy exige pelo menos k+1={k + 1} pontos; recebido {len(features)}.")
    distancias, _ = cKDTree(features).query(features, k=k + 1)
    # a coluna 0 é o próprio ponto (ou uma duplicata a distância zero)
    return float(np.mean(np.log1p(distancias[:, 1:].mean(axis=1))))


# ----------------------------------------------------------------------
# vMF
# ----------------------------------------------------------------------


def _log_termos_bessel(alpha: float, u: float, tol: float = 1e-16):
    """Logaritmos dos termos da série de I_α(u) até o truncamento."""
    log_meio = math.log(u / 2.0)
    log_t = alpha * log_meio - gammaln(alpha + 1.0)
    termos = [log_t]
    log_soma = log_t
    k = 0
    while True:
        log_t += 2.0 * log_meio - math.log(k + 1.0) - math.log(k + 1.0 + alpha)
        k += 1
        termos.append(log_t)
        log_soma = float(np.logaddexp(log_soma, log_t))
        if k > u / 2.0 and log_t < log_soma + math.log(tol):
            return termos


def bessel_i(alpha: float, u: float) -> float:
    """
    Função de Bessel modificada de primeira espécie I_α(u), pela série

        Σ_k (u/2)^{2k+α} / (k! Γ(k+α+1))

    com os termos gerados por recorrência e truncada quando o termo cai
    abaixo de 1e-16 da soma acumulada.

    Raises:
        ValueError: u negativo ou α negativo.

    Exemplo:
        >>> round(bessel_i(0, 1.0), 5)
        1.26607
    """
    if u < 0:
        raise ValueError(f"bessel_i exige u ≥ 0; recebido {u}.")
    if alpha < 0:
        raise ValueError(f"bessel_i exige ordem α ≥ 0; recebido {alpha}.")
    if u == 0.0:
        return 1.0 if alpha == 0 else 0.0

    meio2 = (u / 2.0) ** 2
    termo = math.exp(alpha * math.log(u / 2.0) - gammaln(alpha + 1.0))
    soma = termo
    k = 0
    while True:
        termo *= meio2 / ((k + 1.0) * (k + 1.0 + alpha))
        k += 1
        soma += termo
        if k > u / 2.0 and termo < 1e-16 * soma:
            return soma


def log_bessel_i(alpha: float, u: float) -> float:
    """log I_α(u) somado em escala logarítmica (u grande não transborda)."""
    if u <= 0:
        raise ValueError(f"log_bessel_i exige u > 0; recebido {u}.")
    return float(logsumexp(_log_termos_bessel(alpha, u)))


def log_normalizador_vmf(u: float, d: int) -> float:
    """log Z_vMF(u) = (d/2 − 1) log u − (d/2) log 2π − log I_{d/2−1}(u)."""
    if u <= 0:
        raise ValueError(f"Concentração deve ser positiva: {u}")
    ordem = d / 2.0 - 1.0
    return ordem * math.log(u) - (d / 2.0) * math.log(2.0 * math.pi) - log_bessel_i(ordem, u)


def _verificar_unitarias(features: np.ndarray, rotulo: str) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    desvio = np.abs(np.linalg.norm(features, axis=1) - 1.0)
    if np.any(desvio > TOL_UNITARIA):
        raise ValueError(
            f"Features {rotulo} não unitárias (desvio máximo {desvio.max():.2e})."
        )
    return features


@dataclass
class VmfKde:
    """Densidade por núcleo vMF com concentração u = 1/κ sobre features de referência."""

    kappa: float
    reference_features: np.ndarray

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError(f"κ deve ser positivo: {self.kappa}")
        self.reference_features = _verificar_unitarias(self.reference_features, "de referência")

    @property
    def u(self) -> float:
        return 1.0 / self.kappa

    @property
    def d(self) -> int:
        return self.reference_features.shape[1]

    def log_normalizador(self) -> float:
        return log_normalizador_vmf(self.u, self.d)

    def media_log_media_exp(self, eval_features: np.ndarray) -> float:
        """(1/N_s) Σ_i log((1/M) Σ_j exp(u f_jᵀ f_i))."""
        avaliadas = _verificar_unitarias(eval_features, "avaliadas")
        if avaliadas.shape[1] != self.d:
            raise ValueError(f"Dimensão {avaliadas.shape[1]} diferente da referência {self.d}.")
        similaridades = self.u * avaliadas @ self.reference_features.T
        M = len(self.reference_features)
        return float(np.mean(logsumexp(similaridades, axis=1) - math.log(M)))


def vmf_entropy(kde: VmfKde, eval_features: np.ndarray) -> float:
    """
    Entropia de ressubstituição: Ĥ = −(1/N_s) Σ_i log p̂(f_i).

    Raises:
        ValueError: Features não unitárias.
    """
    return -(kde.log_normalizador() + kde.media_log_media_exp(eval_features))


def log_area_esfera(d: int) -> float:
    """log da área da esfera S^{d−1} ⊂ R^d: log(2 π^{d/2} / Γ(d/2))."""
    return math.log(2.0) + (d / 2.0) * math.log(math.pi) - gammaln(d / 2.0)


# ----------------------------------------------------------------------
# MINE
# ----------------------------------------------------------------------


class MineNet:
    """
    Rede estatística T: [x, y] → escalar, com a média móvel do denominador.

    Args:
        dim_entrada: Dimensão do par concatenado.
        rng: Gerador usado na inicialização.
        hidden_dim: Largura oculta.
        ema_rate: Peso do valor antigo na média móvel (0.99).
    """

    def __init__(self, dim_entrada: int, rng: np.random.Generator, hidden_dim: int = 64, ema_rate: float = 0.99):
        self.rede = Mlp(MlpSpec(layer_widths=[dim_entrada, hidden_dim, hidden_dim, 1]), rng)
        self.ema_rate = ema_rate
        self.ema_denominator: Optional[float] = None

    def __call__(self, amostras: np.ndarray) -> Tensor:
        return self.rede(amostras)

    def zerar(self) -> None:
        for p in self.rede.parametros.values():
            p.valores = np.zeros_like(p.valores)


def limite_dv(net: MineNet, joint: np.ndarray, marginal: np.ndarray) -> float:
    """Î = média de T na conjunta − log(média de e^T nas marginais)."""
    t_conjunta = net(joint).valores.ravel()
    t_marginal = net(marginal).valores.ravel()
    estimativa = float(t_conjunta.mean() - (logsumexp(t_marginal) - math.log(len(t_marginal))))
    if not math.isfinite(estimativa):
        raise FloatingPointError("Estimativa do MINE não finita: a rede estatística divergiu.")
    return estimativa


def perda_mine(net: MineNet, joint: np.ndarray, marginal: np.ndarray, ema: float) -> Tensor:
    """
    Perda de treino com gradiente corrigido: −(E_P[T] − E_Q[e^T] / ema).

    O gradiente de E_Q[e^T]/ema coincide com o de log E_Q[e^T] quando a
    média móvel acompanha o denominador.
    """
    t_conjunta = net(joint)
    t_marginal = net(marginal)
    return (t_marginal.exp().media() * (1.0 / ema)) - t_conjunta.media()


def amostras_mine(x: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Pares conjuntos [x, y] e marginais [x, y embaralhado]."""
    x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
    y = np.asarray(y, dtype=np.float64).reshape(len(y), -1)
    return np.hstack([x, y]), np.hstack([x, y[rng.permutation(len(y))]])


def mine_estimate(
    net: MineNet,
    joint_samples: np.ndarray,
    marginal_samples: np.ndarray,
    train_steps: int,
    rng: Optional[np.random.Generator] = None,
    learning_rate: float = 1e-3,
    batch_size: int = 256,
) -> float:
    """
    Treina T por train_steps passos de subida e devolve o limite de Donsker-Varadhan.

    Args:
        net: Rede estatística.
        joint_samples: Pares (n, dx + dy) da distribuição conjunta.
        marginal_samples: Pares com y embaralhado (produto das marginais).
        train_steps: Passos de Adam (0 apenas avalia).
        rng: Gerador dos mini-lotes.
        learning_rate: Taxa do Adam.
        batch_size: Tamanho dos mini-lotes.

    Returns:
        Estimativa de I em nats sobre todas as amostras.

    Raises:
        FloatingPointError: Estimativa ou treino não finitos.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    joint_samples = np.asarray(joint_samples, dtype=np.float64)
    marginal_samples = np.asarray(marginal_samples, dtype=np.float64)
    otimizador = Adam(net.rede.parametros, learning_rate=learning_rate)

    for passo in range(train_steps):
        lote_j = joint_samples[rng.integers(len(joint_samples), size=min(batch_size, len(joint_samples)))]
        lote_m = marginal_samples[rng.integers(len(marginal_samples), size=min(batch_size, len(marginal_samples)))]
        media_exp = float(np.mean(np.exp(net(lote_m).valores)))
        if net.ema_denominator is None:
            net.ema_denominator = media_exp
        else:
            net.ema_denominator = net.ema_rate * net.ema_denominator + (1.0 - net.ema_rate) * media_exp
        if not math.isfinite(net.ema_denominator):
            raise FloatingPointError("Denominador do MINE não finito: a rede estatística divergiu.")
        otimizador.passo(perda_mine(net, lote_j, lote_m, net.ema_denominator))
        if passo % 500 == 0:
            logger.debug("MINE passo %d: denominador %.4f", passo, net.ema_denominator)

    return limite_dv(net, joint_samples, marginal_samples)
