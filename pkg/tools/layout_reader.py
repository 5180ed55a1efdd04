"""
Leitura e escrita de arquivos de layout de labirinto.

Formato texto, uma instrução por linha:

    # comentário
    bounds x0 y0 x1 y1
    start x y
    x1 y1 x2 y2        (uma parede)

Layouts embutidos ficam em layouts/ na raiz do projeto; a variável de
ambiente SKILLFLOW_LAYOUTS aponta para um diretório alternativo.
"""

import os
from pathlib import Path
from typing import Union

from models.schemas import MazeSpec


raiz_projeto = Path(__file__).parent.parent


def diretorio_layouts() -> Path:
    return Path(os.getenv("SKILLFLOW_LAYOUTS", str(raiz_projeto / "layouts")))


def resolver_layout(nome_ou_caminho: Union[str, Path]) -> Path:
    """
    Resolve um nome embutido ('bottleneck', 'tree') ou um caminho de arquivo.

    Raises:
        FileNotFoundError: Se nenhum dos dois existir.
    """
    caminho = Path(nome_ou_caminho)
    if caminho.is_file():
        return caminho
    embutido = diretorio_layouts() / f"{nome_ou_caminho}.txt"
    if embutido.is_file():
        return embutido
    raise FileNotFoundError(
        f"Layout não encontrado: {nome_ou_caminho}\n"
        f"Informe um caminho de arquivo ou um nome presente em {diretorio_layouts()}."
    )


def parse_layout(texto: str, nome: str = "labirinto", **extras) -> MazeSpec:
    """
    Interpreta o conteúdo de um arquivo de layout.

    Args:
        texto: Conteúdo do arquivo.
        nome: Nome gravado no MazeSpec.
        **extras: Campos adicionais do MazeSpec (step_scale, episode_length).

    Returns:
        MazeSpec validado.

    Raises:
        ValueError: Linha malformada, 'start' ausente ou geometria inválida.

    Exemplo:
        >>> parse_layout("start 0.2 0.2\\n0.5 0 0.5 1").walls
        [((0.5, 0.0), (0.5, 1.0))]
    """
    bounds = (0.0, 0.0, 1.0, 1.0)
    start = None
    paredes = []
    for numero, linha in enumerate(texto.splitlines(), start=1):
        linha = linha.split("#", 1)[0].strip()
        if not linha:
            continue
        partes = linha.split()
        try:
            if partes[0] == "bounds":
                if len(partes) != 5:
                    raise ValueError("'bounds' exige 4 números")
                bounds = tuple(float(v) for v in partes[1:])
            elif partes[0] == "start":
                if len(partes) != 3:
                    raise ValueError("'start' exige 2 números")
                start = (float(partes[1]), float(partes[2]))
            else:
                if len(partes) != 4:
                    raise ValueError("parede exige 4 números 'x1 y1 x2 y2'")
                x1, y1, x2, y2 = (float(v) for v in partes)
                paredes.append(((x1, y1), (x2, y2)))
        except ValueError as e:
            raise ValueError(f"Linha {numero} do layout '{nome}' inválida ({linha!r}): {e}") from e

    if start is None:
        raise ValueError(f"Layout '{nome}' sem linha 'start'.")
    return MazeSpec(nome=nome, bounds=bounds, walls=paredes, start=start, **extras)


def ler_layout(nome_ou_caminho: Union[str, Path], **extras) -> MazeSpec:
    """Carrega um layout embutido ou de arquivo."""
    caminho = resolver_layout(nome_ou_caminho)
    return parse_layout(caminho.read_text(encoding="utf-8"), nome=caminho.stem, **extras)


def formatar_layout(spec: MazeSpec) -> str:
    """Texto no formato de layout (cópia gravada em cada diretório de execução)."""
    linhas = [
        f"# layout {spec.nome} (step_scale={spec.step_scale}, episode_length={spec.episode_length})",
        "bounds " + " ".join(repr(float(v)) for v in spec.bounds),
        f"start {float(spec.start[0])!r} {float(spec.start[1])!r}",
    ]
    for (x1, y1), (x2, y2) in spec.walls:
        linhas.append(" ".join(repr(float(v)) for v in (x1, y1, x2, y2)))
    return "\n".join(linhas) + "\n"
