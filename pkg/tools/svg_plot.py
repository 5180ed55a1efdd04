"""
Figura das trajetórias de avaliação em SVG.

Paredes em preto, ponto inicial como disco preto e uma polilinha por
trajetória, colorida pela skill com uma paleta fixa de 10 cores (cíclica
acima de 10 skills). Saída determinística: mesma entrada, mesmos bytes.
"""

from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from models.schemas import MazeSpec  # noqa: E402
from tools.trajetorias import Trajetoria  # noqa: E402


PALETA = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def cor_da_skill(skill: int) -> str:
    return PALETA[skill % len(PALETA)]


def plotar_trajetorias(
    maze: MazeSpec,
    trajetorias: Sequence[Trajetoria],
    caminho_svg: Union[str, Path],
    titulo: str = "",
) -> Path:
    """
    Desenha o labirinto e as trajetórias e grava o SVG.

    Cada polilinha recebe o id "traj-<episode_id>-skill-<skill>".

    Returns:
        Caminho do arquivo gravado.
    """
    caminho_svg = Path(caminho_svg)
    with matplotlib.rc_context({"svg.hashsalt": "skillflow", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 5))
        x0, y0, x1, y1 = maze.bounds
        ax.plot([x0, x1, x1, x0, x0], [y0, y0, y1, y1, y0], color="black", linewidth=2)
        for (ax_, ay_), (bx, by) in maze.walls:
            ax.plot([ax_, bx], [ay_, by], color="black", linewidth=2)

        for trajetoria in trajetorias:
            xs = [maze.start[0]] + list(trajetoria.posicoes[:, 0])
            ys = [maze.start[1]] + list(trajetoria.posicoes[:, 1])
            (linha,) = ax.plot(xs, ys, color=cor_da_skill(trajetoria.skill), linewidth=1, alpha=0.8)
            linha.set_gid(f"traj-{trajetoria.episode_id}-skill-{trajetoria.skill}")

        ax.plot([maze.start[0]], [maze.start[1]], "o", color="black", markersize=6)
        ax.set_xlim(x0, x1)
        ax.set_ylim(y0, y1)
        ax.set_aspect("equal")
        ax.set_xticks([])
        ax.set_yticks([])
        if titulo:
            ax.set_title(titulo)
        fig.savefig(caminho_svg, format="svg", metadata={"Date": None})
        plt.close(fig)
    return caminho_svg
