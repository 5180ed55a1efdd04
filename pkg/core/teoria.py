"""
Verificações numéricas das propriedades teóricas da perda contrastiva.

Quantidades de informação plug-in exatas sobre distribuições discretas e
três verificações:

- theorem1_check: log N − L ≤ I(S⁽¹⁾;S⁽²⁾) em construções finitas, com a
  perda avaliada por enumeração exaustiva dos negativos;
- mi_decomposition_check: identidades da decomposição de I(S⁽¹⁾;S⁽²⁾)
  quando as duas visões são redundantes quanto à skill;
- theorem2_limit_check: convergência de L − log M para o termo de
  alinhamento menos a entropia vMF.

Os relatórios seguem o formato de dicionário com "status" e "observacoes".
"""

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.special import gammaln, logsumexp

from core.autograd import Tensor
from core.estimadores import VmfKde, log_normalizador_vmf, vmf_entropy


# ----------------------------------------------------------------------
# Informação plug-in
# ----------------------------------------------------------------------


def entropia(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def _normalizar(conjunta: np.ndarray) -> np.ndarray:
    conjunta = np.asarray(conjunta, dtype=np.float64)
    total = conjunta.sum()
    if total <= 0 or np.any(conjunta < 0):
        raise ValueError("Distribuição conjunta deve ser não negativa com massa positiva.")
    return conjunta / total


def informacao_mutua(pxy: np.ndarray) -> float:
    """I(X;Y) de uma tabela conjunta 2D, em nats."""
    pxy = _normalizar(pxy)
    return entropia(pxy.sum(axis=1)) + entropia(pxy.sum(axis=0)) - entropia(pxy)


def informacao_condicional(pxyz: np.ndarray) -> float:
    """I(X;Y|Z) de uma tabela 3D com Z no último eixo."""
    pxyz = _normalizar(pxyz)
    return (
        entropia(pxyz.sum(axis=1))
        + entropia(pxyz.sum(axis=0))
        - entropia(pxyz)
        - entropia(pxyz.sum(axis=(0, 1)))
    )


def informacao_multivariada(pxyz: np.ndarray) -> float:
    """I(X;Y;Z) = I(X;Y) − I(X;Y|Z)."""
    pxyz = _normalizar(pxyz)
    return informacao_mutua(pxyz.sum(axis=2)) - informacao_condicional(pxyz)


# ----------------------------------------------------------------------
# Construções discretas
# ----------------------------------------------------------------------


@dataclass
class ToyJoint:
    """
    Skill Z com prior p_z e visões S⁽¹⁾, S⁽²⁾ condicionalmente i.i.d.
    segundo p(s|z) (linhas de p_s_dado_z).
    """

    p_z: np.ndarray
    p_s_dado_z: np.ndarray

    def __post_init__(self):
        self.p_z = np.asarray(self.p_z, dtype=np.float64)
        self.p_s_dado_z = np.asarray(self.p_s_dado_z, dtype=np.float64)
        if self.p_s_dado_z.shape[0] != len(self.p_z):
            raise ValueError("p_s_dado_z deve ter uma linha por skill.")
        if not np.isclose(self.p_z.sum(), 1.0) or not np.allclose(self.p_s_dado_z.sum(axis=1), 1.0):
            raise ValueError("Distribuições da construção não somam 1.")

    @property
    def m(self) -> int:
        return len(self.p_z)

    @property
    def n_estados(self) -> int:
        return self.p_s_dado_z.shape[1]

    def conjunta(self) -> np.ndarray:
        """p(s⁽¹⁾, s⁽²⁾, z), shape (S, S, m)."""
        return np.einsum("z,za,zb->abz", self.p_z, self.p_s_dado_z, self.p_s_dado_z)

    def marginal_estados(self) -> np.ndarray:
        return self.p_z @ self.p_s_dado_z

    def informacao_visoes(self) -> float:
        return informacao_mutua(self.conjunta().sum(axis=2))

    @classmethod
    def identidade(cls, m: int) -> "ToyJoint":
        """S⁽¹⁾ = S⁽²⁾ = Z."""
        return cls(np.full(m, 1.0 / m), np.eye(m))

    @classmethod
    def independente(cls, m: int, p_s: Sequence[float]) -> "ToyJoint":
        """Estados independentes da skill."""
        p_s = np.asarray(p_s, dtype=np.float64)
        return cls(np.full(m, 1.0 / m), np.tile(p_s / p_s.sum(), (m, 1)))

    @classmethod
    def aleatoria(cls, m: int, n_estados: int, rng: np.random.Generator, concentracao: float = 0.5) -> "ToyJoint":
        return cls(rng.dirichlet(np.ones(m)), rng.dirichlet(np.full(n_estados, concentracao), size=m))


def features_por_skill(construcao: ToyJoint) -> np.ndarray:
    """Features artesanais: one-hot da skill mais provável de cada estado."""
    posterior = construcao.p_z[:, None] * construcao.p_s_dado_z
    return np.eye(construcao.m)[np.argmax(posterior, axis=0)]


def features_aleatorias(n_estados: int, d: int, rng: np.random.Generator) -> np.ndarray:
    f = rng.standard_normal((n_estados, d))
    return f / np.linalg.norm(f, axis=1, keepdims=True)


# ----------------------------------------------------------------------
# Limite inferior contrastivo
# ----------------------------------------------------------------------


def _multiconjuntos(n_estados: int, n_negativos: int, p_s: np.ndarray):
    """Contagens (K, S) de cada multiconjunto de negativos e seus log-pesos multinomiais."""
    contagens = []
    for combo in itertools.combinations_with_replacement(range(n_estados), n_negativos):
        contagens.append(np.bincount(combo, minlength=n_estados))
    contagens = np.array(contagens, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_p = np.log(p_s)
        termos = np.where(contagens > 0, contagens * log_p, 0.0)
    log_pesos = gammaln(n_negativos + 1.0) - gammaln(contagens + 1.0).sum(axis=1) + termos.sum(axis=1)
    return contagens, log_pesos


def perda_becl1_exata(
    construcao: ToyJoint, features: np.ndarray, kappa: float = 1.0
) -> float:
    """
    L esperada com um positivo da conjunta e N − 1 = 2(m − 1) negativos
    i.i.d. da marginal dos estados, por enumeração de todos os multiconjuntos.
    """
    S = construcao.n_estados
    n_neg = 2 * (construcao.m - 1)
    p12 = construcao.conjunta().sum(axis=2)
    p_s = construcao.marginal_estados()
    h = np.exp(features @ features.T / kappa)
    contagens, log_pesos = _multiconjuntos(S, n_neg, p_s)
    pesos = np.exp(log_pesos)

    perda = 0.0
    for s1 in range(S):
        somas_negativos = contagens @ h[:, s1]
        for s2 in range(S):
            if p12[s1, s2] == 0:
                continue
            esperado = float(np.sum(pesos * np.log(h[s1, s2] + somas_negativos)))
            perda += p12[s1, s2] * (esperado - math.log(h[s1, s2]))
    return perda


def perda_becl1_monte_carlo(
    construcao: ToyJoint, features: np.ndarray, rng: np.random.Generator, amostras: int = 20000, kappa: float = 1.0
):
    """Mesma perda por Monte-Carlo; devolve (média, desvio padrão da média)."""
    S = construcao.n_estados
    n_neg = 2 * (construcao.m - 1)
    p12 = construcao.conjunta().sum(axis=2).ravel()
    pares = rng.choice(S * S, size=amostras, p=p12 / p12.sum())
    s1, s2 = np.divmod(pares, S)
    negativos = rng.choice(S, size=(amostras, n_neg), p=construcao.marginal_estados())
    h = np.exp(features @ features.T / kappa)
    positivo = h[s1, s2]
    denominador = positivo + h[negativos, s1[:, None]].sum(axis=1)
    valores = np.log(denominador) - np.log(positivo)
    return float(valores.mean()), float(valores.std(ddof=1) / math.sqrt(amostras))


def theorem1_check(
    construction: ToyJoint,
    trials: int = 20,
    rng: Optional[np.random.Generator] = None,
    encoders: Optional[Sequence[np.ndarray]] = None,
    kappa: float = 1.0,
    max_configuracoes: float = 1e6,
    amostras_mc: int = 20000,
) -> Dict:
    """
    Verifica log N − L̂ ≤ I(S⁽¹⁾;S⁽²⁾) + 3σ para vários codificadores.

    Args:
        construction: Construção discreta.
        trials: Número de codificadores aleatórios (além do artesanal).
        rng: Gerador.
        encoders: Matrizes de features (S, d) a usar no lugar das padrão.
        kappa: Temperatura do crítico.
        max_configuracoes: Acima de |S|^{N−1} configurações usa Monte-Carlo.
        amostras_mc: Amostras do Monte-Carlo.

    Returns:
        Relatório com I verdadeira, perdas, margens e número de violações.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    m = construction.m
    N = 2 * m - 1
    i_verdadeira = construction.informacao_visoes()
    if encoders is None:
        encoders = [features_por_skill(construction)] + [
            features_aleatorias(construction.n_estados, max(m, 2), rng) for _ in range(trials)
        ]

    exaustivo = construction.n_estados ** (N - 1) <= max_configuracoes
    perdas, sigmas, margens = [], [], []
    for features in encoders:
        if exaustivo:
            perda, sigma = perda_becl1_exata(construction, features, kappa), 0.0
        else:
            perda, sigma = perda_becl1_monte_carlo(construction, features, rng, amostras_mc, kappa)
        perdas.append(perda)
        sigmas.append(sigma)
        margens.append(i_verdadeira + 3.0 * sigma - (math.log(N) - perda))

    violacoes = int(sum(1 for margem in margens if margem < -1e-12))
    return {
        "status": "sucesso" if violacoes == 0 else "erro",
        "m": m,
        "N": N,
        "metodo": "enumeracao" if exaustivo else "monte_carlo",
        "informacao_verdadeira": i_verdadeira,
        "perdas": perdas,
        "sigmas": sigmas,
        "margens": margens,
        "margem_minima": float(min(margens)),
        "violacoes": violacoes,
        "observacoes": [] if violacoes == 0 else [f"{violacoes} codificador(es) violaram o limite."],
    }


def suite_limite_inferior(n_construcoes: int = 100, rng_seed: int = 0) -> Dict:
    """Construções e codificadores aleatórios; conta violações do limite."""
    rng = np.random.default_rng(rng_seed)
    relatorios = []
    for _ in range(n_construcoes):
        m = int(rng.integers(2, 5))
        n_estados = int(rng.integers(3, 7))
        construcao = ToyJoint.aleatoria(m, n_estados, rng)
        relatorios.append(theorem1_check(construcao, trials=1, rng=rng))
    violacoes = sum(r["violacoes"] for r in relatorios)
    return {
        "status": "sucesso" if violacoes == 0 else "erro",
        "construcoes": n_construcoes,
        "violacoes": violacoes,
        "margem_minima": float(min(r["margem_minima"] for r in relatorios)),
        "observacoes": [],
    }


# ----------------------------------------------------------------------
# Decomposição da informação mútua
# ----------------------------------------------------------------------


def conjunta_redundante(
    n_classes: int, n_ruido: int, m: int, rng: np.random.Generator
) -> np.ndarray:
    """
    Conjunta (S, S, m) em que cada visão é s = (c, n) com c = g(z) e
    n ~ p(n|c) independente entre as visões. Dado S⁽²⁾ a skill não traz
    informação sobre S⁽¹⁾, e as visões são condicionalmente i.i.d.
    """
    p_z = rng.dirichlet(np.ones(m))
    g = rng.integers(n_classes, size=m)
    p_n_dado_c = rng.dirichlet(np.ones(n_ruido), size=n_classes)
    S = n_classes * n_ruido
    p_s_dado_z = np.zeros((m, S))
    for z in range(m):
        c = g[z]
        p_s_dado_z[z, c * n_ruido:(c + 1) * n_ruido] = p_n_dado_c[c]
    return ToyJoint(p_z, p_s_dado_z).conjunta()


def mi_decomposition_check(joint: Union[ToyJoint, np.ndarray], tol: float = 1e-12) -> Dict:
    """
    Verifica, por cálculo plug-in exato,

        I(S⁽¹⁾;Z) = I(S⁽²⁾;Z) = I(S⁽¹⁾;S⁽²⁾;Z)
        I(S⁽¹⁾;S⁽²⁾) = ½[I(S⁽¹⁾;Z) + I(S⁽²⁾;Z)] + I(S⁽¹⁾;S⁽²⁾|Z)

    Args:
        joint: Construção ou tabela p(s⁽¹⁾, s⁽²⁾, z).
        tol: Tolerância das identidades e da pré-condição.

    Returns:
        Relatório; status "erro" quando I(S⁽¹⁾;Z|S⁽²⁾) ou I(S⁽²⁾;Z|S⁽¹⁾)
        não é nula (pré-condição violada).
    """
    p = joint.conjunta() if isinstance(joint, ToyJoint) else _normalizar(joint)
    i_1z_dado_2 = informacao_condicional(np.transpose(p, (0, 2, 1)))
    i_2z_dado_1 = informacao_condicional(np.transpose(p, (1, 2, 0)))
    if max(i_1z_dado_2, i_2z_dado_1) > tol:
        return {
            "status": "erro",
            "erro": (
                f"Pré-condição violada: I(S1;Z|S2)={i_1z_dado_2:.3e}, "
                f"I(S2;Z|S1)={i_2z_dado_1:.3e}."
            ),
            "observacoes": [],
        }

    i_1z = informacao_mutua(p.sum(axis=1))
    i_2z = informacao_mutua(p.sum(axis=0))
    i_12 = informacao_mutua(p.sum(axis=2))
    i_12_dado_z = informacao_condicional(p)
    i_12z = i_12 - i_12_dado_z

    violacoes = {
        "I(S1;Z)-I(S2;Z)": abs(i_1z - i_2z),
        "I(S1;Z)-I(S1;S2;Z)": abs(i_1z - i_12z),
        "decomposicao": abs(i_12 - (0.5 * (i_1z + i_2z) + i_12_dado_z)),
    }
    maxima = max(violacoes.values())
    return {
        "status": "sucesso" if maxima <= tol else "erro",
        "I_S1_Z": i_1z,
        "I_S2_Z": i_2z,
        "I_S1_S2": i_12,
        "I_S1_S2_dado_Z": i_12_dado_z,
        "I_S1_S2_Z": i_12z,
        "violacoes": violacoes,
        "violacao_maxima": maxima,
        "observacoes": [],
    }


def suite_decomposicao(n_construcoes: int = 100, rng_seed: int = 0) -> Dict:
    rng = np.random.default_rng(rng_seed)
    maxima, falhas = 0.0, 0
    for _ in range(n_construcoes):
        relatorio = mi_decomposition_check(
            conjunta_redundante(int(rng.integers(2, 5)), int(rng.integers(1, 4)), int(rng.integers(2, 7)), rng)
        )
        if relatorio["status"] != "sucesso":
            falhas += 1
        else:
            maxima = max(maxima, relatorio["violacao_maxima"])
    return {
        "status": "sucesso" if falhas == 0 else "erro",
        "construcoes": n_construcoes,
        "falhas": falhas,
        "violacao_maxima": maxima,
        "observacoes": [],
    }


# ----------------------------------------------------------------------
# Limite de muitos negativos
# ----------------------------------------------------------------------


def nuvem_sintetica(n: int, d: int, rng: np.random.Generator, ruido: float = 0.3):
    """Âncoras unitárias uniformes e positivos perturbados (também unitários)."""
    ancoras = features_aleatorias(n, d, rng)
    positivos = ancoras + ruido * rng.standard_normal((n, d)) / math.sqrt(d)
    positivos /= np.linalg.norm(positivos, axis=1, keepdims=True)
    return ancoras, positivos


def _como_features(encoder: Optional[Callable], estados: np.ndarray) -> np.ndarray:
    if encoder is None:
        return np.asarray(estados, dtype=np.float64)
    saida = encoder(np.asarray(estados, dtype=np.float64))
    return saida.valores if isinstance(saida, Tensor) else np.asarray(saida, dtype=np.float64)


def theorem2_limit_check(
    encoder: Optional[Callable],
    state_sample: Dict[str, np.ndarray],
    kappa: float,
    M_schedule: Sequence[int],
    tol_monotonia: float = 1e-3,
) -> Dict:
    """
    Compara L(M) − log M com −(1/κ)Ê[f⁽¹⁾ᵀf⁽²⁾] − Ĥ_vMF − log Z_vMF(1/κ).

    Args:
        encoder: Codificador (None se state_sample já contém features).
        state_sample: {"ancoras", "positivos", "referencia"}; os negativos
            de cada M são as M primeiras linhas da referência, e Ĥ_vMF usa
            a referência inteira.
        kappa: Temperatura.
        M_schedule: Tamanhos crescentes do conjunto de negativos.
        tol_monotonia: Aumento de gap tolerado entre M consecutivos.

    Returns:
        Relatório com perdas, gaps e a contribuição e^{f⁽¹⁾ᵀf⁽²⁾/κ}/M do
        termo positivo para cada M.
    """
    f1 = _como_features(encoder, state_sample["ancoras"])
    f2 = _como_features(encoder, state_sample["positivos"])
    referencia = _como_features(encoder, state_sample["referencia"])
    M_schedule = sorted(int(M) for M in M_schedule)
    if M_schedule[-1] > len(referencia):
        raise ValueError(
            f"M={M_schedule[-1]} maior que a referência ({len(referencia)} pontos)."
        )

    kde = VmfKde(kappa=kappa, reference_features=referencia)
    alinhamento = float(np.mean(np.sum(f1 * f2, axis=1)))
    h_vmf = vmf_entropy(kde, f1)
    log_z = log_normalizador_vmf(kde.u, kde.d)
    limite = -alinhamento / kappa - h_vmf - log_z

    positivo = np.sum(f1 * f2, axis=1) / kappa
    similaridades = f1 @ referencia.T / kappa
    perdas, gaps, termos_positivos = [], [], []
    for M in M_schedule:
        negativos = similaridades[:, :M]
        log_den = logsumexp(np.concatenate([positivo[:, None], negativos], axis=1), axis=1)
        perda = float(np.mean(log_den - positivo))
        perdas.append(perda)
        gaps.append(abs((perda - math.log(M)) - limite))
        termos_positivos.append(float(np.mean(np.exp(positivo))) / M)

    monotono = all(b <= a + tol_monotonia for a, b in zip(gaps, gaps[1:]))
    return {
        "status": "sucesso" if monotono else "erro",
        "M": M_schedule,
        "perdas": perdas,
        "limite": limite,
        "entropia_vmf": h_vmf,
        "gaps": gaps,
        "termos_positivos": termos_positivos,
        "monotono": monotono,
        "observacoes": [] if monotono else ["gap não decresce com M"],
    }


def identidade_vmf(kde: VmfKde, eval_features: np.ndarray) -> float:
    """|média log média exp − (−Ĥ − log Z_vMF)|; nula a menos de arredondamento."""
    return abs(kde.media_log_media_exp(eval_features) - (-vmf_entropy(kde, eval_features) - kde.log_normalizador()))


def suite_muitos_negativos(
    n_nuvens: int = 50,
    d: int = 16,
    kappa: float = 0.5,
    M_schedule: Sequence[int] = (8, 64, 512, 4096),
    rng_seed: int = 0,
) -> Dict:
    """Identidade vMF em nuvens aleatórias e verificação do limite em uma nuvem."""
    rng = np.random.default_rng(rng_seed)
    gaps_identidade: List[float] = []
    for _ in range(n_nuvens):
        referencia = features_aleatorias(int(rng.integers(64, 513)), d, rng)
        avaliadas = features_aleatorias(int(rng.integers(16, 129)), d, rng)
        gaps_identidade.append(identidade_vmf(VmfKde(kappa, referencia), avaliadas))

    ancoras, positivos = nuvem_sintetica(256, d, rng)
    limite = theorem2_limit_check(
        None,
        {"ancoras": ancoras, "positivos": positivos, "referencia": features_aleatorias(max(M_schedule), d, rng)},
        kappa,
        M_schedule,
    )
    identidade_ok = max(gaps_identidade) <= 1e-9
    return {
        "status": "sucesso" if identidade_ok and limite["status"] == "sucesso" else "erro",
        "gap_identidade_maximo": max(gaps_identidade),
        "limite": limite,
        "observacoes": [],
    }
