"""
Tensor denso com gradiente em modo reverso.

Implementa o substrato numérico de todas as redes do laboratório: um tensor
float64 que registra as operações que o produziram e propaga gradientes
exatos pela regra da cadeia. Só cobre o necessário para cadeias de MLP
(sem convoluções, sem GPU).

Toda operação verifica se o resultado é finito; NaN/Inf é tratado como erro.
"""

from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np


Numero = Union[float, int, np.ndarray]

PISO_NORMA = 1e-8


def _verificar_finito(valores: np.ndarray, operacao: str) -> None:
    if not np.all(np.isfinite(valores)):
        raise FloatingPointError(
            f"Valores não finitos produzidos pela operação '{operacao}'."
        )


def _reduzir_broadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Soma o gradiente nos eixos expandidos por broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for eixo, tamanho in enumerate(shape):
        if tamanho == 1 and grad.shape[eixo] != 1:
            grad = grad.sum(axis=eixo, keepdims=True)
    return grad


class Tensor:
    """
    Array real com acumulador de gradiente.

    Args:
        valores: Dados numéricos (convertidos para float64).
        requer_grad: Se True, o tensor é uma folha que acumula gradiente
            (parâmetro de rede).
        nome: Rótulo opcional, usado em mensagens de erro.

    Exemplo:
        >>> x = Tensor(3.0, requer_grad=True)
        >>> y = x * x
        >>> y.backward()
        >>> float(x.grad)
        6.0
    """

    __slots__ = ("valores", "grad", "requer_grad", "nome", "_pais", "_retropropagar")

    def __init__(
        self,
        valores: Numero,
        requer_grad: bool = False,
        nome: str = "",
        _pais: Tuple["Tensor", ...] = (),
        _operacao: str = "folha",
    ):
        arr = np.array(valores, dtype=np.float64)
        _verificar_finito(arr, nome or _operacao)
        self.valores = arr
        self.grad: Optional[np.ndarray] = None
        self.requer_grad = requer_grad or any(p.requer_grad for p in _pais)
        self.nome = nome
        self._pais = _pais if self.requer_grad else ()
        self._retropropagar: Callable[[], None] = lambda: None

    # ------------------------------------------------------------------
    # Propriedades básicas
    # ------------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.valores.shape

    @property
    def ndim(self) -> int:
        return self.valores.ndim

    def item(self) -> float:
        return float(self.valores)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requer_grad={self.requer_grad})"

    def _acumular(self, g: np.ndarray) -> None:
        if not self.requer_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad = self.grad + g

    # ------------------------------------------------------------------
    # Retropropagação
    # ------------------------------------------------------------------

    def backward(self) -> None:
        """
        Propaga o gradiente de uma perda escalar para todo o grafo registrado.

        Raises:
            ValueError: Se o tensor não for escalar.
            RuntimeError: Se não houver grafo registrado (tensor constante).
        """
        if self.valores.size != 1:
            raise ValueError(
                f"backward exige uma perda escalar; recebido shape {self.shape}."
            )
        if not self.requer_grad:
            raise RuntimeError(
                "backward chamado sem grafo registrado: nenhum parâmetro participa da perda."
            )

        ordem = []
        visitados = set()
        pilha = [(self, False)]
        while pilha:
            no, expandido = pilha.pop()
            if expandido:
                ordem.append(no)
                continue
            if id(no) in visitados:
                continue
            visitados.add(id(no))
            pilha.append((no, True))
            for pai in no._pais:
                if id(pai) not in visitados:
                    pilha.append((pai, False))

        for no in ordem:
            if no._pais:
                no.grad = None
        self.grad = np.ones_like(self.valores)
        for no in reversed(ordem):
            if no.grad is not None:
                no._retropropagar()

    # ------------------------------------------------------------------
    # Aritmética
    # ------------------------------------------------------------------

    def __add__(self, outro: Union["Tensor", Numero]) -> "Tensor":
        outro = como_tensor(outro)
        saida = Tensor(self.valores + outro.valores, _pais=(self, outro), _operacao="soma")

        def _retro():
            self._acumular(_reduzir_broadcast(saida.grad, self.shape))
            outro._acumular(_reduzir_broadcast(saida.grad, outro.shape))

        saida._retropropagar = _retro
        return saida

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        saida = Tensor(-self.valores, _pais=(self,), _operacao="neg")

        def _retro():
            self._acumular(-saida.grad)

        saida._retropropagar = _retro
        return saida

    def __sub__(self, outro: Union["Tensor", Numero]) -> "Tensor":
        return self + (-como_tensor(outro))

    def __rsub__(self, outro: Numero) -> "Tensor":
        return como_tensor(outro) + (-self)

    def __mul__(self, outro: Union["Tensor", Numero]) -> "Tensor":
        outro = como_tensor(outro)
        saida = Tensor(self.valores * outro.valores, _pais=(self, outro), _operacao="mul")

        def _retro():
            self._acumular(_reduzir_broadcast(saida.grad * outro.valores, self.shape))
            outro._acumular(_reduzir_broadcast(saida.grad * self.valores, outro.shape))

        saida._retropropagar = _retro
        return saida

    __rmul__ = __mul__

    def __truediv__(self, outro: Union["Tensor", Numero]) -> "Tensor":
        outro = como_tensor(outro)
        saida = Tensor(self.valores / outro.valores, _pais=(self, outro), _operacao="div")

        def _retro():
            self._acumular(_reduzir_broadcast(saida.grad / outro.valores, self.shape))
            outro._acumular(
                _reduzir_broadcast(
                    -saida.grad * self.valores / (outro.valores ** 2), outro.shape
                )
            )

        saida._retropropagar = _retro
        return saida

    def __rtruediv__(self, outro: Numero) -> "Tensor":
        return como_tensor(outro) / self

    def __pow__(self, expoente: float) -> "Tensor":
        if isinstance(expoente, Tensor):
            raise TypeError("Somente expoentes constantes são suportados.")
        saida = Tensor(self.valores ** expoente, _pais=(self,), _operacao="pow")

        def _retro():
            self._acumular(saida.grad * expoente * self.valores ** (expoente - 1))

        saida._retropropagar = _retro
        return saida

    def __matmul__(self, outro: "Tensor") -> "Tensor":
        outro = como_tensor(outro)
        if self.ndim != 2 or outro.ndim != 2 or self.shape[1] != outro.shape[0]:
            raise ValueError(
                f"Shapes incompatíveis para produto matricial: {self.shape} @ {outro.shape}."
            )
        saida = Tensor(self.valores @ outro.valores, _pais=(self, outro), _operacao="matmul")

        def _retro():
            self._acumular(saida.grad @ outro.valores.T)
            outro._acumular(self.valores.T @ saida.grad)

        saida._retropropagar = _retro
        return saida

    @property
    def T(self) -> "Tensor":
        """Transposta de uma matriz."""
        if self.ndim != 2:
            raise ValueError(f"Transposição exige matriz; recebido shape {self.shape}.")
        saida = Tensor(self.valores.T, _pais=(self,), _operacao="transposta")

        def _retro():
            self._acumular(saida.grad.T)

        saida._retropropagar = _retro
        return saida

    # ------------------------------------------------------------------
    # Funções elementares e reduções
    # ------------------------------------------------------------------

    def exp(self) -> "Tensor":
        saida = Tensor(np.exp(self.valores), _pais=(self,), _operacao="exp")

        def _retro():
            self._acumular(saida.grad * saida.valores)

        saida._retropropagar = _retro
        return saida

    def log(self) -> "Tensor":
        if np.any(self.valores <= 0):
            raise FloatingPointError("log de valor não positivo.")
        saida = Tensor(np.log(self.valores), _pais=(self,), _operacao="log")

        def _retro():
            self._acumular(saida.grad / self.valores)

        saida._retropropagar = _retro
        return saida

    def relu(self) -> "Tensor":
        mascara = self.valores > 0
        saida = Tensor(self.valores * mascara, _pais=(self,), _operacao="relu")

        def _retro():
            self._acumular(saida.grad * mascara)

        saida._retropropagar = _retro
        return saida

    def tanh(self) -> "Tensor":
        saida = Tensor(np.tanh(self.valores), _pais=(self,), _operacao="tanh")

        def _retro():
            self._acumular(saida.grad * (1.0 - saida.valores ** 2))

        saida._retropropagar = _retro
        return saida

    def soma(self, eixo: Optional[int] = None, manter_dims: bool = False) -> "Tensor":
        saida = Tensor(
            self.valores.sum(axis=eixo, keepdims=manter_dims), _pais=(self,), _operacao="soma_eixo"
        )

        def _retro():
            g = saida.grad
            if eixo is not None and not manter_dims:
                g = np.expand_dims(g, eixo)
            self._acumular(np.broadcast_to(g, self.shape).copy())

        saida._retropropagar = _retro
        return saida

    def media(self, eixo: Optional[int] = None) -> "Tensor":
        n = self.valores.size if eixo is None else self.shape[eixo]
        return self.soma(eixo) / float(n)


def como_tensor(x: Union[Tensor, Numero]) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def logsumexp(x: Tensor, eixo: int = -1, mascara: Optional[np.ndarray] = None) -> Tensor:
    """
    log Σ exp(x) ao longo de um eixo, opcionalmente restrito a uma máscara.

    Args:
        x: Tensor de entrada.
        eixo: Eixo reduzido.
        mascara: Booleanos com o shape de x; entradas False ficam fora da soma.

    Returns:
        Tensor com o eixo removido.

    Raises:
        ValueError: Se alguma linha da máscara não tiver entradas ativas.
    """
    if mascara is None:
        mascara = np.ones(x.shape, dtype=bool)
    mascara = np.asarray(mascara, dtype=bool)
    if mascara.shape != x.shape:
        raise ValueError(f"Máscara {mascara.shape} incompatível com o tensor {x.shape}.")
    if not np.all(mascara.any(axis=eixo)):
        raise ValueError("logsumexp mascarado com linha sem nenhuma entrada ativa.")

    mascarado = np.where(mascara, x.valores, -np.inf)
    maximo = np.max(mascarado, axis=eixo, keepdims=True)
    pesos = np.exp(mascarado - maximo)
    total = pesos.sum(axis=eixo, keepdims=True)
    resultado = np.squeeze(maximo + np.log(total), axis=eixo)
    saida = Tensor(resultado, _pais=(x,), _operacao="logsumexp")

    def _retro():
        g = np.expand_dims(saida.grad, eixo)
        x._acumular(g * pesos / total)

    saida._retropropagar = _retro
    return saida


def escolher(x: Tensor, indices: Sequence[int]) -> Tensor:
    """Seleciona x[i, indices[i]] para cada linha i de uma matriz."""
    indices = np.asarray(indices, dtype=np.int64)
    if x.ndim != 2 or indices.shape != (x.shape[0],):
        raise ValueError(
            f"escolher exige matriz (B, K) e B índices; recebido {x.shape} e {indices.shape}."
        )
    linhas = np.arange(x.shape[0])
    saida = Tensor(x.valores[linhas, indices], _pais=(x,), _operacao="escolher")

    def _retro():
        g = np.zeros_like(x.valores)
        g[linhas, indices] = saida.grad
        x._acumular(g)

    saida._retropropagar = _retro
    return saida


def concatenar(tensores: Iterable[Union[Tensor, np.ndarray]], eixo: int = -1) -> Tensor:
    """Concatena tensores ao longo do eixo (padrão: último)."""
    tensores = [como_tensor(t) for t in tensores]
    tamanhos = [t.shape[eixo] for t in tensores]
    saida = Tensor(
        np.concatenate([t.valores for t in tensores], axis=eixo),
        _pais=tuple(tensores),
        _operacao="concatenar",
    )

    def _retro():
        cortes = np.cumsum(tamanhos)[:-1]
        for t, g in zip(tensores, np.split(saida.grad, cortes, axis=eixo)):
            t._acumular(g)

    saida._retropropagar = _retro
    return saida


def l2_normalize(x: Tensor, piso: float = PISO_NORMA) -> Tensor:
    """
    Normaliza cada linha para norma euclidiana unitária.

    O gradiente segue a regra do quociente:
    dx = (dy − y·⟨y, dy⟩) / ‖x‖.

    Args:
        x: Tensor com linhas no último eixo.
        piso: Norma mínima aceita.

    Returns:
        Tensor com as linhas na esfera unitária.

    Raises:
        ValueError: Se alguma linha tiver norma abaixo do piso.

    Exemplo:
        >>> l2_normalize(Tensor([[3.0, 4.0]])).valores
        array([[0.6, 0.8]])
    """
    normas = np.sqrt(np.sum(x.valores ** 2, axis=-1, keepdims=True))
    if np.any(normas < piso):
        raise ValueError(
            f"Linha com norma abaixo do piso {piso}: o codificador produziu um vetor nulo."
        )
    y = x.valores / normas
    saida = Tensor(y, _pais=(x,), _operacao="l2_normalize")

    def _retro():
        g = saida.grad
        projecao = np.sum(g * y, axis=-1, keepdims=True)
        x._acumular((g - y * projecao) / normas)

    saida._retropropagar = _retro
    return saida


def backward(perda: Tensor, parametros: Dict[str, Tensor]) -> Dict[str, np.ndarray]:
    """
    Zera os gradientes da coleção, retropropaga a perda e devolve os gradientes.

    Parâmetros que não participaram da perda recebem gradiente nulo.

    Args:
        perda: Tensor escalar produzido por uma computação registrada.
        parametros: Coleção nome → parâmetro.

    Returns:
        Dicionário nome → gradiente (mesmo shape do parâmetro).
    """
    for p in parametros.values():
        p.grad = None
    perda.backward()
    grads = {}
    for nome, p in parametros.items():
        if p.grad is None:
            p.grad = np.zeros_like(p.valores)
        grads[nome] = p.grad
    return grads
