import math

import numpy as np
import pytest

from core.estimadores import VmfKde
from core.teoria import (
    ToyJoint,
    conjunta_redundante,
    features_aleatorias,
    features_por_skill,
    identidade_vmf,
    informacao_condicional,
    informacao_mutua,
    informacao_multivariada,
    mi_decomposition_check,
    nuvem_sintetica,
    perda_becl1_exata,
    perda_becl1_monte_carlo,
    suite_decomposicao,
    suite_limite_inferior,
    suite_muitos_negativos,
    theorem1_check,
    theorem2_limit_check,
)


# ----------------------------------------------------------------------
# Informação plug-in
# ----------------------------------------------------------------------


def test_informacao_mutua_basica():
    assert informacao_mutua(np.eye(4)) == pytest.approx(math.log(4))
    assert informacao_mutua(np.ones((3, 5))) == pytest.approx(0.0, abs=1e-12)


def test_informacao_condicional_com_z_determinante():
    p = ToyJoint.identidade(3).conjunta()
    assert informacao_condicional(p) == pytest.approx(0.0, abs=1e-12)
    assert informacao_multivariada(p) == pytest.approx(math.log(3))


def test_conjunta_invalida():
    with pytest.raises(ValueError):
        informacao_mutua(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ToyJoint([0.5, 0.5], [[1.0, 0.0]])


def test_features_por_skill_na_identidade():
    np.testing.assert_array_equal(features_por_skill(ToyJoint.identidade(3)), np.eye(3))


# ----------------------------------------------------------------------
# Limite inferior contrastivo
# ----------------------------------------------------------------------


def test_limite_na_construcao_identidade():
    relatorio = theorem1_check(ToyJoint.identidade(3), trials=3, rng=np.random.default_rng(0))
    assert relatorio["status"] == "sucesso"
    assert relatorio["metodo"] == "enumeracao"
    assert relatorio["N"] == 5
    assert relatorio["informacao_verdadeira"] == pytest.approx(math.log(3))
    assert relatorio["violacoes"] == 0
    assert relatorio["margem_minima"] >= 0


def test_estados_independentes_da_skill():
    construcao = ToyJoint.independente(3, [0.2, 0.3, 0.5])
    relatorio = theorem1_check(construcao, trials=3, rng=np.random.default_rng(1))
    assert relatorio["informacao_verdadeira"] == pytest.approx(0.0, abs=1e-12)
    assert all(math.log(relatorio["N"]) - perda <= 1e-12 for perda in relatorio["perdas"])


def test_enumeracao_e_monte_carlo_concordam(rng):
    construcao = ToyJoint.aleatoria(2, 4, rng)
    features = features_aleatorias(4, 3, rng)
    exata = perda_becl1_exata(construcao, features)
    media, sigma = perda_becl1_monte_carlo(construcao, features, rng, amostras=40_000)
    assert abs(media - exata) < 4 * sigma


def test_monte_carlo_acima_do_limite_de_configuracoes(rng):
    relatorio = theorem1_check(ToyJoint.aleatoria(3, 5, rng), trials=1, rng=rng, max_configuracoes=10)
    assert relatorio["metodo"] == "monte_carlo"
    assert all(s > 0 for s in relatorio["sigmas"])


def test_codificadores_explicitos(rng):
    construcao = ToyJoint.identidade(2)
    relatorio = theorem1_check(construcao, encoders=[np.eye(2), np.ones((2, 2)) / math.sqrt(2)])
    assert len(relatorio["perdas"]) == 2
    # features iguais para todos os estados: L = log N
    assert relatorio["perdas"][1] == pytest.approx(math.log(3))


def test_suite_sem_violacoes():
    relatorio = suite_limite_inferior(n_construcoes=10, rng_seed=3)
    assert relatorio["status"] == "sucesso"
    assert relatorio["violacoes"] == 0


# ----------------------------------------------------------------------
# Decomposição
# ----------------------------------------------------------------------


def test_decomposicao_em_visoes_redundantes(rng):
    for _ in range(5):
        relatorio = mi_decomposition_check(conjunta_redundante(3, 2, 4, rng))
        assert relatorio["status"] == "sucesso"
        assert relatorio["violacao_maxima"] <= 1e-12
        assert relatorio["I_S1_Z"] == pytest.approx(relatorio["I_S1_S2_Z"], abs=1e-12)


def test_decomposicao_da_identidade():
    relatorio = mi_decomposition_check(ToyJoint.identidade(4))
    assert relatorio["I_S1_S2"] == pytest.approx(math.log(4))
    assert relatorio["I_S1_S2_dado_Z"] == pytest.approx(0.0, abs=1e-12)


def test_precondicao_violada():
    # S1 = Z e S2 independente: Z informa sobre S1 mesmo conhecendo S2
    p = np.zeros((2, 2, 2))
    for z in range(2):
        for s2 in range(2):
            p[z, s2, z] = 0.25
    relatorio = mi_decomposition_check(p)
    assert relatorio["status"] == "erro"
    assert "Pré-condição" in relatorio["erro"]


def test_suite_decomposicao():
    relatorio = suite_decomposicao(n_construcoes=20, rng_seed=5)
    assert relatorio["status"] == "sucesso"
    assert relatorio["falhas"] == 0


# ----------------------------------------------------------------------
# Limite de muitos negativos
# ----------------------------------------------------------------------


def amostra_de_estados(rng, n=256, d=16, referencia=4096):
    ancoras, positivos = nuvem_sintetica(n, d, rng)
    return {"ancoras": ancoras, "positivos": positivos, "referencia": features_aleatorias(referencia, d, rng)}


def test_gap_diminui_com_m(rng):
    relatorio = theorem2_limit_check(None, amostra_de_estados(rng), 0.5, (8, 64, 512, 4096))
    assert relatorio["status"] == "sucesso"
    assert relatorio["monotono"]
    assert relatorio["gaps"][-1] < 0.01
    assert all(b < a for a, b in zip(relatorio["termos_positivos"], relatorio["termos_positivos"][1:]))


def test_m_igual_a_referencia_tem_gap_do_termo_positivo(rng):
    amostra = amostra_de_estados(rng, n=32, referencia=512)
    relatorio = theorem2_limit_check(None, amostra, 0.5, [512])
    f1, f2, ref = amostra["ancoras"], amostra["positivos"], amostra["referencia"]
    positivo = np.exp(np.sum(f1 * f2, axis=1) / 0.5)
    media = np.mean(np.exp(f1 @ ref.T / 0.5), axis=1)
    assert relatorio["gaps"][0] == pytest.approx(np.mean(np.log1p(positivo / (512 * media))), abs=1e-10)


def test_codificador_aplicado_aos_estados(rng):
    amostra = amostra_de_estados(rng, n=16, referencia=64)
    aplicado = theorem2_limit_check(lambda x: x, amostra, 0.5, [8, 64])
    direto = theorem2_limit_check(None, amostra, 0.5, [8, 64])
    assert aplicado["perdas"] == direto["perdas"]


def test_m_maior_que_referencia(rng):
    with pytest.raises(ValueError):
        theorem2_limit_check(None, amostra_de_estados(rng, n=8, referencia=16), 0.5, [8, 32])


def test_identidade_vmf_nula(rng):
    kde = VmfKde(0.5, features_aleatorias(300, 16, rng))
    assert identidade_vmf(kde, features_aleatorias(40, 16, rng)) <= 1e-9


def test_suite_muitos_negativos():
    relatorio = suite_muitos_negativos(n_nuvens=5, M_schedule=(8, 64, 512), rng_seed=2)
    assert relatorio["gap_identidade_maximo"] <= 1e-9
    assert relatorio["limite"]["M"] == [8, 64, 512]
