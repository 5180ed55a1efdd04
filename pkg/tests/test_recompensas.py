import math

import numpy as np
import pytest

from agents.ddpg import ReplayBuffer
from core.autograd import Tensor, backward
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


def identidade(x):
    return Tensor(np.asarray(x, dtype=float))


def lote_de_features(anchors, positives, skills):
    anchors, positives = np.asarray(anchors, float), np.asarray(positives, float)
    B = len(skills)
    return ContrastiveBatch(
        anchors=anchors,
        positives=positives,
        skills=np.asarray(skills),
        anchor_slots=np.arange(B),
        positive_slots=np.arange(B),
        anchor_episodes=np.zeros(B, dtype=int),
        positive_episodes=np.ones(B, dtype=int),
    )


def buffer_com_episodios(skills_por_episodio, comprimento=50, rng=None):
    rng = np.random.default_rng(0) if rng is None else rng
    buffer = ReplayBuffer(capacity=10_000)
    for episodio, skill in enumerate(skills_por_episodio):
        for t in range(comprimento):
            s = rng.uniform(0, 1, size=2)
            buffer.adicionar(s, np.zeros(2), s, skill, 0.0, episodio, t, fim=t == comprimento - 1)
    return buffer


# ----------------------------------------------------------------------
# SkillSpace
# ----------------------------------------------------------------------


def test_uma_skill_sempre_zero(rng):
    assert {sample_skill(SkillSpace(1), rng) for _ in range(50)} == {0}


def test_frequencias_uniformes():
    rng = np.random.default_rng(2024)
    n = 100_000
    amostras = np.array([sample_skill(SkillSpace(10), rng) for _ in range(n)])
    frequencias = np.bincount(amostras, minlength=10) / n
    sigma = math.sqrt(0.1 * 0.9 / n)
    assert np.all(np.abs(frequencias - 0.1) < 4 * sigma)


def test_sorteio_reprodutivel():
    a = [sample_skill(SkillSpace(10), np.random.default_rng(5)) for _ in range(3)]
    b = [sample_skill(SkillSpace(10), np.random.default_rng(5)) for _ in range(3)]
    assert a == b


def test_skillspace_invalido():
    with pytest.raises(ValueError):
        SkillSpace(0)
    assert SkillSpace(4).log_prior == pytest.approx(-math.log(4))


# ----------------------------------------------------------------------
# build_batch
# ----------------------------------------------------------------------


def test_uma_unica_skill_nao_forma_lote(rng):
    buffer = buffer_com_episodios([0, 0])
    with pytest.raises(ValueError):
        build_batch(buffer, "cross", 32, rng)


def test_pares_entre_episodios(rng):
    buffer = buffer_com_episodios([0, 1, 2, 0, 1, 2, 0])
    lote = build_batch(buffer, "cross", 64, rng)
    assert len(lote) == 64
    assert np.all(lote.anchor_episodes != lote.positive_episodes)
    np.testing.assert_array_equal(buffer.skills[lote.anchor_slots], lote.skills)
    np.testing.assert_array_equal(buffer.skills[lote.positive_slots], lote.skills)
    np.testing.assert_array_equal(lote.anchors, buffer.next_states[lote.anchor_slots])


def test_pares_no_mesmo_episodio(rng):
    buffer = buffer_com_episodios([0, 1, 2])
    lote = build_batch(buffer, "same", 64, rng, min_gap=25)
    assert np.all(lote.anchor_episodes == lote.positive_episodes)
    passos = np.abs(buffer.step_index[lote.anchor_slots] - buffer.step_index[lote.positive_slots])
    assert np.all(passos >= 25)


def test_skill_com_um_episodio_gera_aviso(rng):
    buffer = buffer_com_episodios([0, 1, 0, 1, 2])
    with pytest.warns(UserWarning, match="Skill 2"):
        lote = build_batch(buffer, "cross", 32, rng)
    assert 2 not in set(lote.skills)


def test_lote_sempre_com_duas_skills():
    # uma skill domina o buffer; o lote ainda precisa de negativos
    buffer = buffer_com_episodios([0] * 40 + [1, 1])
    for semente in range(20):
        lote = build_batch(buffer, "cross", 2, np.random.default_rng(semente))
        assert len(set(lote.skills)) == 2


def test_modo_desconhecido(rng):
    with pytest.raises(ValueError):
        build_batch(buffer_com_episodios([0, 1, 0, 1]), "outro", 8, rng)


# ----------------------------------------------------------------------
# BeCL
# ----------------------------------------------------------------------


def test_features_identicas_perda_log_n():
    m = 8
    f = np.tile([[1.0, 0.0]], (m, 1))
    lote = lote_de_features(f, f, np.arange(m))
    # N = 2m − 1 termos no denominador de cada âncora
    assert becl_loss(identidade, lote, 0.5).item() == pytest.approx(math.log(15))
    np.testing.assert_allclose(becl_reward(identidade, lote, 0.5), 1 / 15)


def test_features_separadas_por_skill():
    m, kappa = 4, 0.5
    f = np.eye(m)
    lote = lote_de_features(f, f, np.arange(m))
    esperado = -math.log(math.exp(1 / kappa) / (math.exp(1 / kappa) + 2 * (m - 1)))
    perda = becl_loss(identidade, lote, kappa).item()
    assert perda == pytest.approx(esperado)
    assert perda < math.log(2 * m - 1)


def test_recompensa_com_negativos_ortogonais():
    f = np.array([[1.0, 0.0], [0.0, 1.0]])
    lote = lote_de_features(f, f, [0, 1])
    np.testing.assert_allclose(becl_reward(identidade, lote, 0.5), math.e ** 2 / (math.e ** 2 + 2))


def test_mesma_skill_fora_do_denominador():
    f = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    lote = lote_de_features(f, f, [0, 0, 1])
    # âncora 0: positivo (e²) + âncora e positivo da skill 1 (e⁰ cada)
    assert becl_reward(identidade, lote, 0.5)[0] == pytest.approx(math.e ** 2 / (math.e ** 2 + 2))


def test_recompensa_e_perda_consistentes(rng):
    codificador = Codificador(2, 16, 4, rng)
    lote = lote_de_features(rng.uniform(0, 1, (12, 2)), rng.uniform(0, 1, (12, 2)), np.arange(12) % 3)
    recompensa = becl_reward(codificador, lote, 0.5)
    assert np.all((recompensa > 0) & (recompensa < 1))
    assert np.mean(-np.log(recompensa)) == pytest.approx(becl_loss(codificador, lote, 0.5).item(), abs=1e-12)


def test_perda_invariante_a_permutacao_do_lote(rng):
    codificador = Codificador(2, 16, 4, rng)
    ancoras, positivos = rng.uniform(0, 1, (12, 2)), rng.uniform(0, 1, (12, 2))
    skills = np.arange(12) % 4
    ordem = rng.permutation(12)
    original = becl_loss(codificador, lote_de_features(ancoras, positivos, skills), 0.5).item()
    permutada = becl_loss(codificador, lote_de_features(ancoras[ordem], positivos[ordem], skills[ordem]), 0.5).item()
    assert permutada == pytest.approx(original, abs=1e-12)


def test_positivo_mais_proximo_reduz_perda():
    # skill 1 ortogonal ao plano da âncora 0: só o termo da âncora 0 muda
    perdas = []
    for angulo in np.linspace(math.pi / 2, 0.0, 6):
        ancoras = [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
        positivos = [[math.cos(angulo), math.sin(angulo), 0.0], [0.0, 0.0, 1.0]]
        perdas.append(becl_loss(identidade, lote_de_features(ancoras, positivos, [0, 1]), 0.5).item())
    assert all(b < a for a, b in zip(perdas, perdas[1:]))


def test_consultas_nas_ancoras_reproduzem_recompensa(rng):
    codificador = Codificador(2, 16, 4, rng)
    lote = lote_de_features(rng.uniform(0, 1, (9, 2)), rng.uniform(0, 1, (9, 2)), np.arange(9) % 3)
    direta = becl_reward(codificador, lote, 0.3)
    consultada = becl_reward(codificador, lote, 0.3, lote.anchors, np.arange(9))
    np.testing.assert_allclose(consultada, direta, rtol=1e-12)


def test_lote_de_uma_skill_e_temperatura_invalida():
    f = np.eye(2)
    with pytest.raises(ValueError):
        lote_de_features(f, f, [0, 0])
    lote = lote_de_features(f, f, [0, 1])
    with pytest.raises(ValueError):
        becl_loss(identidade, lote, 0.0)


def test_gradiente_becl(gradiente, rng):
    codificador = Codificador(2, 6, 3, rng)
    lote = lote_de_features(rng.uniform(0, 1, (8, 2)), rng.uniform(0, 1, (8, 2)), np.arange(8) % 4)
    grads = backward(becl_loss(codificador, lote, 0.5), codificador.parametros)
    assert gradiente(lambda: becl_loss(codificador, lote, 0.5).item(), codificador.parametros, grads, rng) == []


# ----------------------------------------------------------------------
# DIAYN
# ----------------------------------------------------------------------


def test_discriminador_perfeito():
    perfeito = lambda s: np.tile(np.eye(10)[3], (len(s), 1))  # noqa: E731
    assert diayn_reward(perfeito, np.zeros(2), 3, SkillSpace(10)) == pytest.approx(math.log(10))


def test_discriminador_no_acaso():
    acaso = lambda s: np.full((len(s), 10), 0.1)  # noqa: E731
    assert diayn_reward(acaso, np.zeros(2), 7, SkillSpace(10)) == pytest.approx(0.0, abs=1e-12)


def test_discriminador_meio_a_meio():
    def meio(s):
        q = np.full((len(s), 10), 0.5 / 9)
        q[:, 0] = 0.5
        return q

    assert diayn_reward(meio, np.zeros(2), 0, SkillSpace(10)) == pytest.approx(math.log(0.5) + math.log(10))


def test_diayn_em_lote_e_prior_explicito(rng):
    discriminador = Discriminador(2, 4, rng, hidden_dim=8)
    estados = rng.uniform(0, 1, (5, 2))
    recompensa = diayn_reward(discriminador, estados, [0, 1, 2, 3, 0], np.full(4, 0.25))
    probs = discriminador.probabilidades(estados)
    esperado = np.log(probs[np.arange(5), [0, 1, 2, 3, 0]]) + math.log(4)
    np.testing.assert_allclose(recompensa, esperado)


def test_saida_que_nao_e_distribuicao():
    with pytest.raises(ValueError):
        diayn_reward(lambda s: np.full((len(s), 4), 0.5), np.zeros(2), 0, SkillSpace(4))


def test_gradiente_discriminador(gradiente, rng):
    discriminador = Discriminador(2, 4, rng, hidden_dim=8)
    estados = rng.uniform(0, 1, (16, 2))
    skills = np.arange(16) % 4
    grads = backward(discriminador.perda(estados, skills), discriminador.parametros)
    assert gradiente(lambda: discriminador.perda(estados, skills).item(), discriminador.parametros, grads, rng) == []


# ----------------------------------------------------------------------
# Entropia
# ----------------------------------------------------------------------


def test_referencia_identica_ao_estado():
    s = np.array([0.3, 0.3])
    assert entropy_reward(None, s, np.tile(s, (20, 1)), k=12) == 0.0


def test_vizinho_a_distancia_e_menos_um():
    referencia = np.array([[math.e - 1, 0.0], [5.0, 0.0]])
    assert entropy_reward(None, np.zeros(2), referencia, k=1) == pytest.approx(1.0)


def test_entropia_contra_varredura_completa(rng):
    referencia = rng.uniform(0, 1, (60, 2))
    estados = rng.uniform(0, 1, (10, 2))
    k = 5
    esperado = []
    for s in estados:
        d = np.sort(np.linalg.norm(referencia - s, axis=1))[:k]
        esperado.append(np.mean(np.log1p(d)))
    np.testing.assert_allclose(entropy_reward(None, estados, referencia, k=k), esperado, rtol=1e-12)


def test_referencia_insuficiente():
    with pytest.raises(ValueError):
        entropy_reward(None, np.zeros(2), np.zeros((0, 2)), k=1)
    with pytest.raises(ValueError):
        entropy_reward(None, np.zeros(2), np.zeros((3, 2)), k=5)
