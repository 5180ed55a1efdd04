import numpy as np
import pytest

from core.autograd import Tensor, backward
from core.redes import Adam, Mlp, adam_step, criar_estado_adam, inicializar_parametros, mlp_forward
from models.schemas import MlpSpec


def test_camada_identidade():
    spec = MlpSpec(layer_widths=[2, 2])
    params = {"camada0.W": Tensor(np.eye(2)), "camada0.b": Tensor(np.zeros(2))}
    np.testing.assert_array_equal(mlp_forward(spec, params, np.array([[1.0, 2.0]])).valores, [[1.0, 2.0]])


def test_saida_unitaria():
    spec = MlpSpec(layer_widths=[2, 2], final_unit_norm=True)
    params = {"camada0.W": Tensor(np.eye(2)), "camada0.b": Tensor(np.zeros(2))}
    np.testing.assert_allclose(mlp_forward(spec, params, np.array([[3.0, 4.0]])).valores, [[0.6, 0.8]])


def test_duas_camadas_desenrolada_a_mao():
    spec = MlpSpec(layer_widths=[2, 3, 1])
    W0 = np.array([[1.0, -1.0, 0.5], [2.0, 1.0, -0.5]])
    b0 = np.array([0.1, 0.2, 0.3])
    W1 = np.array([[1.0], [2.0], [-1.0]])
    b1 = np.array([0.5])
    params = {"camada0.W": Tensor(W0), "camada0.b": Tensor(b0), "camada1.W": Tensor(W1), "camada1.b": Tensor(b1)}

    x = np.array([1.0, -1.0])
    oculta = [max(0.0, x[0] * W0[0, j] + x[1] * W0[1, j] + b0[j]) for j in range(3)]
    esperado = sum(oculta[j] * W1[j, 0] for j in range(3)) + b1[0]

    assert mlp_forward(spec, params, x[None, :]).valores[0, 0] == pytest.approx(esperado)


def test_entrada_incompativel(rng):
    rede = Mlp(MlpSpec(layer_widths=[2, 4, 1]), rng)
    with pytest.raises(ValueError):
        rede(np.zeros((3, 5)))
    with pytest.raises(ValueError):
        rede(np.zeros(2))


def test_parametros_nao_finitos(rng):
    rede = Mlp(MlpSpec(layer_widths=[2, 1]), rng)
    rede.parametros["camada0.W"].valores[0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        rede(np.zeros((1, 2)))


def test_inicializacao_uniforme(rng):
    params = inicializar_parametros(MlpSpec(layer_widths=[16, 64, 4]), rng)
    assert sorted(params) == ["camada0.W", "camada0.b", "camada1.W", "camada1.b"]
    assert np.abs(params["camada0.W"].valores).max() <= 1 / 4
    assert np.abs(params["camada1.W"].valores).max() <= 1 / 8


def test_congelado_nao_propaga_para_parametros(rng):
    rede = Mlp(MlpSpec(layer_widths=[2, 3, 1]), rng)
    x = Tensor(rng.standard_normal((4, 2)), requer_grad=True)
    grads = backward(rede(x, congelado=True).soma(), rede.parametros)
    assert all(not np.any(g) for g in grads.values())
    assert x.grad is not None


def test_gradiente_mlp(gradiente, rng):
    rede = Mlp(MlpSpec(layer_widths=[3, 8, 8, 2], final_unit_norm=True), rng)
    x = rng.standard_normal((10, 3))
    alvo = rng.standard_normal((10, 2))

    def construir():
        return ((rede(x) - alvo) ** 2).media()

    grads = backward(construir(), rede.parametros)
    assert gradiente(lambda: construir().item(), rede.parametros, grads, rng) == []


def test_estado_e_carregamento(rng):
    rede = Mlp(MlpSpec(layer_widths=[2, 3]), rng)
    outra = Mlp(MlpSpec(layer_widths=[2, 3]), np.random.default_rng(99))
    outra.carregar_estado(rede.estado())
    x = rng.standard_normal((5, 2))
    np.testing.assert_array_equal(outra(x).valores, rede(x).valores)

    with pytest.raises(ValueError):
        Mlp(MlpSpec(layer_widths=[2, 4]), rng).carregar_estado(rede.estado())
    with pytest.raises(ValueError):
        outra.carregar_estado({"camada0.W": np.zeros((2, 3))})


def test_adam_converge_em_quadratica():
    x = Tensor(np.array([5.0]), requer_grad=True)
    otimizador = Adam({"x": x}, learning_rate=0.1)
    for _ in range(200):
        otimizador.passo((x * x).soma())
    assert abs(x.valores[0]) < 0.1


def test_adam_primeiro_passo_tem_tamanho_lr():
    params = {"w": Tensor(np.array([1.0, -2.0, 3.0]), requer_grad=True)}
    estado = criar_estado_adam(params, learning_rate=0.01)
    adam_step(estado, params, {"w": np.array([0.5, -4.0, 1e-2])})
    np.testing.assert_allclose(params["w"].valores, [1.0 - 0.01, -2.0 + 0.01, 3.0 - 0.01], atol=1e-7)


def test_adam_gradiente_nulo_mantem_parametros():
    params = {"w": Tensor(np.array([1.0, 2.0]), requer_grad=True)}
    estado = criar_estado_adam(params, learning_rate=0.1)
    adam_step(estado, params, {"w": np.array([1.0, 1.0])})
    depois_do_primeiro = params["w"].valores.copy()
    primeiro_momento = estado.first_moment["w"].copy()
    adam_step(estado, params, {"w": np.zeros(2)})
    np.testing.assert_allclose(estado.first_moment["w"], 0.9 * primeiro_momento)
    # com momento acumulado o passo continua; do zero não haveria movimento
    novos = {"w": Tensor(np.array([1.0, 2.0]), requer_grad=True)}
    estado_novo = criar_estado_adam(novos, learning_rate=0.1)
    adam_step(estado_novo, novos, {"w": np.zeros(2)})
    np.testing.assert_array_equal(novos["w"].valores, [1.0, 2.0])
    assert estado.step_count == 2
    assert not np.array_equal(params["w"].valores, depois_do_primeiro)


def test_adam_valida_gradientes():
    params = {"w": Tensor(np.zeros(2), requer_grad=True)}
    estado = criar_estado_adam(params)
    with pytest.raises(ValueError):
        adam_step(estado, params, {"w": np.zeros(3)})
    with pytest.raises(FloatingPointError):
        adam_step(estado, params, {"w": np.array([np.inf, 0.0])})
