"""
Linha de comando do skillflow.

Subcomandos:

    pretrain   pré-treino de skills (uma execução por semente)
    finetune   ajuste fino numa tarefa de objetivo, com ou sem checkpoint
    ablate     varredura de skill_dim ou temperatura com tabela comparativa
    plot       SVG das trajetórias de avaliação de uma execução
    diag       relatório de diagnóstico (execução ou suítes sintéticas)

Uso:
    python -m agents.cli pretrain --config exemplo.conf --seed 1
    python -m agents.cli diag saidas/execucao saidas/diayn

Em caso de erro é escrita em stderr uma única linha JSON
{"status": "erro", "tipo": ..., "mensagem": ...}; o código de saída é 1
(2 para argumentos inválidos).
"""

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

# Adiciona a raiz do projeto ao PYTHONPATH
raiz_projeto = Path(__file__).parent.parent
sys.path.insert(0, str(raiz_projeto))

import numpy as np  # noqa: E402
from dotenv import dotenv_values, load_dotenv  # noqa: E402

from agents.diagnostico import diagnosticar_execucao, diagnostico_sintetico, tabela_comparativa  # noqa: E402
from agents.treino import avaliar_skills, finetune, pretrain  # noqa: E402
from core.labirinto import tarefa_padrao  # noqa: E402
from core.recompensas import Codificador  # noqa: E402
from models.schemas_treino import RunConfig, RunManifest  # noqa: E402
from tools.checkpoint import carregar_checkpoint, salvar_checkpoint  # noqa: E402
from tools.layout_reader import formatar_layout, ler_layout  # noqa: E402
from tools.metricas import EscritorMetricas  # noqa: E402
from tools.svg_plot import plotar_trajetorias  # noqa: E402
from tools.trajetorias import escrever_trajetorias, ler_trajetorias  # noqa: E402


logger = logging.getLogger("skillflow")

VERSAO = "0.1.0"


class ErroArgumentos(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ErroArgumentos(message)


# ----------------------------------------------------------------------
# Configuração e diretórios
# ----------------------------------------------------------------------


def carregar_config(caminho: Optional[Path] = None, overrides: Optional[Dict] = None) -> RunConfig:
    """
    Lê o arquivo `chave = valor`, aplica as sobreposições e valida.

    Args:
        caminho: Arquivo de configuração (None usa apenas os padrões).
        overrides: Valores vindos da linha de comando (None é ignorado).

    Returns:
        RunConfig validado.

    Raises:
        FileNotFoundError: Arquivo de configuração inexistente.
        ValueError: Chave desconhecida ou valor inválido.
    """
    dados: Dict = {}
    if caminho is not None:
        caminho = Path(caminho)
        if not caminho.exists():
            raise FileNotFoundError(f"Arquivo de configuração não encontrado: {caminho}")
        dados = {k: v for k, v in dotenv_values(caminho).items() if v is not None}
    if "out" not in dados and os.getenv("SKILLFLOW_SAIDA"):
        dados["out"] = os.getenv("SKILLFLOW_SAIDA")
    dados.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig(**dados)


def config_da_execucao(diretorio: Path) -> RunConfig:
    caminho = Path(diretorio) / "config.conf"
    if not caminho.exists():
        raise FileNotFoundError(f"Diretório de execução sem config.conf: {diretorio}")
    return carregar_config(caminho)


def diretorios_sementes(diretorio: Path) -> List[Path]:
    sementes = sorted(Path(diretorio).glob("seed_*"), key=lambda p: int(p.name.split("_")[1]))
    if not sementes:
        raise FileNotFoundError(f"Nenhum diretório seed_* em {diretorio}")
    return sementes


def preparar_diretorio(config: RunConfig, subdiretorio: Optional[str] = None) -> Path:
    """Cria <out>/<nome>[/<subdiretorio>] com config.conf e labirinto.txt."""
    maze = ler_layout(config.layout)
    diretorio = Path(config.out) / config.nome
    if subdiretorio:
        diretorio = diretorio / subdiretorio
    diretorio.mkdir(parents=True, exist_ok=True)
    (diretorio / "config.conf").write_text(config.para_texto(), encoding="utf-8")
    (diretorio / "labirinto.txt").write_text(formatar_layout(maze), encoding="utf-8")
    return diretorio


def escrever_manifesto(diretorio: Path, manifesto: RunManifest) -> Path:
    caminho = Path(diretorio) / "manifesto.json"
    temporario = caminho.with_suffix(".json.tmp")
    temporario.write_text(json.dumps(manifesto.model_dump(), indent=2, sort_keys=True), encoding="utf-8")
    os.replace(temporario, caminho)
    return caminho


def _executar(funcao, tarefas: Sequence[tuple], workers: int) -> List:
    """Executa as tarefas em sequência ou num pool de processos, preservando a ordem."""
    if workers <= 1 or len(tarefas) <= 1:
        return [funcao(*t) for t in tarefas]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futuros = [pool.submit(funcao, *t) for t in tarefas]
        return [f.result() for f in futuros]


# ----------------------------------------------------------------------
# pretrain
# ----------------------------------------------------------------------


def pretreinar_semente(config: RunConfig, seed: int, diretorio: Path) -> Dict:
    """Pré-treino de uma semente; grava checkpoint, métricas e trajetórias em seed_<s>/."""
    inicio = time.perf_counter()
    destino = Path(diretorio) / f"seed_{seed}"
    destino.mkdir(parents=True, exist_ok=True)
    maze = ler_layout(config.layout)
    treino = config.treino(seed)

    resultado = pretrain(treino, maze, config.reward_method, EscritorMetricas(destino / "metricas.jsonl"))
    salvar_checkpoint(destino / "checkpoint.json", resultado.redes(), config.config_hash())
    transicoes = avaliar_skills(resultado.agente, maze, treino.skill_dim, treino.trajetorias_por_skill)
    escrever_trajetorias(destino / "trajetorias.csv", transicoes)

    return {
        "seed": seed,
        "saidas": {
            nome: str(Path(destino.name) / nome)
            for nome in ("checkpoint.json", "metricas.jsonl", "trajetorias.csv")
        },
        "tempo": time.perf_counter() - inicio,
    }


def cmd_pretrain(config: RunConfig, workers: int = 1) -> Path:
    """
    Pré-treina todas as sementes da configuração.

    Returns:
        Diretório da execução.
    """
    diretorio = preparar_diretorio(config)
    print(f"Pré-treino '{config.nome}' ({config.reward_method}, {config.layout}, m={config.skill_dim})")
    print("=" * 80)

    resultados = _executar(pretreinar_semente, [(config, s, diretorio) for s in config.seeds], workers)

    manifesto = RunManifest(
        config_hash=config.config_hash(),
        versao_codigo=VERSAO,
        comando="pretrain",
        saidas={str(r["seed"]): r["saidas"] for r in resultados},
        tempos={str(r["seed"]): r["tempo"] for r in resultados},
    )
    escrever_manifesto(diretorio, manifesto)
    for r in resultados:
        print(f"  seed {r['seed']}: {r['tempo']:.1f}s")
    print(f"Execução gravada em {diretorio}")
    return diretorio


# ----------------------------------------------------------------------
# finetune
# ----------------------------------------------------------------------


def ajustar_semente(
    config: RunConfig, seed: int, skill_choice: str, checkpoint: Optional[Path], destino: Path
) -> Dict:
    inicio = time.perf_counter()
    destino = Path(destino)
    destino.mkdir(parents=True, exist_ok=True)
    maze = ler_layout(config.layout)
    treino = config.treino(seed)
    redes = None
    if checkpoint is not None:
        redes, hash_origem = carregar_checkpoint(checkpoint)
        if hash_origem and hash_origem != config.config_hash():
            logger.info("Checkpoint %s produzido por outra configuração (%s).", checkpoint, hash_origem[:12])

    resultado = finetune(
        treino, maze, tarefa_padrao(config.goal_index, config.reward_kind),
        checkpoint=redes, skill_choice=skill_choice,
        escritor=EscritorMetricas(destino / "metricas.jsonl"),
    )
    curva = {
        "seed": seed,
        "skill": resultado.skill,
        "pretreinado": checkpoint is not None,
        "curva": [{"frame": f, "retorno": r} for f, r in resultado.curva],
        "retorno_final": resultado.retorno_final,
        "frames_ate_limiar": resultado.frames_ate_limiar(treino.limiar_retorno),
    }
    (destino / "curva.json").write_text(json.dumps(curva, indent=2, sort_keys=True), encoding="utf-8")
    return {**curva, "destino": str(destino), "tempo": time.perf_counter() - inicio}


def cmd_finetune(
    config: RunConfig, checkpoint: Optional[Path] = None, todas_skills: bool = False, workers: int = 1
) -> Path:
    """
    Ajuste fino de todas as sementes (e de todas as skills com todas_skills).

    Returns:
        Diretório <out>/<nome>/ajuste.
    """
    diretorio = preparar_diretorio(config, "ajuste")
    origem = "do zero" if checkpoint is None else f"a partir de {checkpoint}"
    print(f"Ajuste fino '{config.nome}' {origem}, objetivo {config.goal_index} ({config.reward_kind})")
    print("=" * 80)

    escolhas = [str(k) for k in range(config.skill_dim)] if todas_skills else [config.skill_choice]
    tarefas = []
    for seed in config.seeds:
        for escolha in escolhas:
            destino = diretorio / f"seed_{seed}"
            if todas_skills:
                destino = destino / f"skill_{escolha}"
            tarefas.append((config, seed, escolha, checkpoint, destino))

    resultados = _executar(ajustar_semente, tarefas, workers)

    print(f"{'seed':>6}{'skill':>7}{'retorno final':>16}{'frames até limiar':>20}")
    for r in resultados:
        limiar = "-" if r["frames_ate_limiar"] is None else str(r["frames_ate_limiar"])
        print(f"{r['seed']:>6}{r['skill']:>7}{r['retorno_final']:>16.3f}{limiar:>20}")

    manifesto = RunManifest(
        config_hash=config.config_hash(),
        versao_codigo=VERSAO,
        comando="finetune",
        saidas={
            f"{r['seed']}/{r['skill']}": {
                "curva.json": str(Path(r["destino"]).relative_to(diretorio) / "curva.json"),
                "metricas.jsonl": str(Path(r["destino"]).relative_to(diretorio) / "metricas.jsonl"),
            }
            for r in resultados
        },
        tempos={f"{r['seed']}/{r['skill']}": r["tempo"] for r in resultados},
    )
    escrever_manifesto(diretorio, manifesto)
    return diretorio


# ----------------------------------------------------------------------
# plot
# ----------------------------------------------------------------------


def cmd_plot(diretorio: Path) -> List[Path]:
    """
    Um SVG por semente a partir de trajetorias.csv.

    Raises:
        FileNotFoundError: Execução sem sementes ou sem trajetórias.
    """
    diretorio = Path(diretorio)
    maze = ler_layout(diretorio / "labirinto.txt")
    gerados = []
    for semente in diretorios_sementes(diretorio):
        trajetorias = ler_trajetorias(semente / "trajetorias.csv")
        gerados.append(plotar_trajetorias(
            maze, trajetorias, semente / "trajetorias.svg", titulo=f"{diretorio.name} ({semente.name})"
        ))
        print(f"  {gerados[-1]}")
    return gerados


# ----------------------------------------------------------------------
# diag
# ----------------------------------------------------------------------


def diagnosticar_diretorio(diretorio: Path, mine_passos: int = 1000) -> Dict:
    """Diagnóstico de cada semente e médias; grava diagnostico.json."""
    diretorio = Path(diretorio)
    config = config_da_execucao(diretorio)
    maze = ler_layout(diretorio / "labirinto.txt")

    por_semente = {}
    for semente in diretorios_sementes(diretorio):
        seed = int(semente.name.split("_")[1])
        codificador = None
        caminho_checkpoint = semente / "checkpoint.json"
        if caminho_checkpoint.exists():
            redes, _ = carregar_checkpoint(caminho_checkpoint)
            if "codificador" in redes:
                codificador = Codificador(2, config.hidden_dim, config.feature_dim, np.random.default_rng(0))
                codificador.carregar_estado(redes["codificador"])
        por_semente[str(seed)] = diagnosticar_execucao(
            maze,
            ler_trajetorias(semente / "trajetorias.csv"),
            config.skill_dim,
            grid_size=config.grid_size,
            knn_k=config.knn_k,
            mine_passos=mine_passos,
            rng_seed=seed,
            codificador=codificador,
            kappa=config.kappa,
        )

    medias = {}
    for chave in ("coverage", "binned_mi", "particle_entropy", "mine_mi"):
        valores = [r[chave] for r in por_semente.values() if r.get(chave) is not None]
        medias[chave] = float(np.mean(valores)) if valores else None

    relatorio = {
        "status": "sucesso",
        "execucao": diretorio.name,
        "reward_method": config.reward_method,
        "skill_dim": config.skill_dim,
        "kappa": config.kappa,
        **medias,
        "sementes": por_semente,
        "observacoes": sorted({o for r in por_semente.values() for o in r["observacoes"]}),
    }
    (diretorio / "diagnostico.json").write_text(json.dumps(relatorio, indent=2, sort_keys=True), encoding="utf-8")
    return relatorio


def cmd_diag(
    diretorios: Sequence[Path], sintetico: bool = False, mine_passos: int = 1000, saida: Optional[Path] = None
) -> Dict:
    """
    Diagnóstico de execuções (tabela comparativa se houver mais de uma) ou
    das suítes teóricas (sintetico=True).

    Raises:
        ValueError: Nenhuma entrada informada.
    """
    if sintetico:
        relatorio = diagnostico_sintetico()
        if saida is not None:
            Path(saida).parent.mkdir(parents=True, exist_ok=True)
            Path(saida).write_text(json.dumps(relatorio, indent=2, sort_keys=True), encoding="utf-8")
        checks = relatorio["theorem_checks"]
        print(f"Margem mínima do limite: {checks['bound_margin']:.6f}")
        print(f"Gap máximo da identidade vMF: {checks['identity_gap']:.3e}")
        print(f"Gaps do limite em M: {checks['limit_gaps']}")
        return relatorio

    if not diretorios:
        raise ValueError("Informe ao menos um diretório de execução ou use --sintetico.")

    relatorios = {Path(d).name: diagnosticar_diretorio(Path(d), mine_passos) for d in diretorios}
    print(tabela_comparativa(relatorios, ("coverage", "binned_mi", "particle_entropy", "mine_mi")))
    return relatorios if len(relatorios) > 1 else next(iter(relatorios.values()))


# ----------------------------------------------------------------------
# ablate
# ----------------------------------------------------------------------


EIXOS = {"skill_dim": "skill_dim", "temperature": "kappa"}


def _celula_ablacao(config: RunConfig, seed: int, diretorio: Path, mine_passos: int) -> Dict:
    pretreinar_semente(config, seed, diretorio)
    maze = ler_layout(config.layout)
    return diagnosticar_execucao(
        maze,
        ler_trajetorias(Path(diretorio) / f"seed_{seed}" / "trajetorias.csv"),
        config.skill_dim,
        grid_size=config.grid_size,
        knn_k=config.knn_k,
        mine_passos=mine_passos,
        rng_seed=seed,
    )


def cmd_ablate(
    config: RunConfig, eixo: str, valores: Sequence[float], workers: int = 1, mine_passos: int = 0
) -> Dict:
    """
    Um pré-treino por valor e semente, com coverage e binned_mi agregados.

    Args:
        config: Configuração base.
        eixo: 'skill_dim' ou 'temperature'.
        valores: Valores do eixo.
        workers: Processos em paralelo.
        mine_passos: Passos do MINE nos diagnósticos (0 desativa).

    Returns:
        Relatório com as médias por valor ("valores") e os diagnósticos de cada
        semente ("por_semente"), também gravado em <out>/<nome>/ablacao.json.

    Raises:
        ValueError: Eixo desconhecido ou valor inválido para o eixo.
    """
    if eixo not in EIXOS:
        raise ValueError(f"Eixo de ablação desconhecido: {eixo!r} (use {', '.join(EIXOS)})")
    if not valores:
        raise ValueError("Nenhum valor de ablação informado.")

    raiz = Path(config.out) / config.nome
    variantes = []
    for valor in valores:
        if eixo == "skill_dim":
            if float(valor) != int(valor):
                raise ValueError(f"skill_dim deve ser inteiro: {valor}")
            valor = int(valor)
        else:
            valor = float(valor)
        dados = config.model_dump()
        dados[EIXOS[eixo]] = valor
        dados["nome"] = f"{eixo}_{valor}"
        dados["out"] = str(raiz)
        if dados["skill_choice"] != "random":
            dados["skill_choice"] = "random"
        variante = RunConfig(**dados)
        variantes.append((valor, variante, preparar_diretorio(variante)))

    print(f"Ablação '{config.nome}' sobre {eixo}: {', '.join(str(v) for v, _, _ in variantes)}")
    print("=" * 80)
    tarefas = [(v, s, d, mine_passos) for _, v, d in variantes for s in config.seeds]
    diagnosticos = _executar(_celula_ablacao, tarefas, workers)

    relatorio: Dict = {"status": "sucesso", "eixo": eixo, "valores": {}, "por_semente": {}, "observacoes": []}
    n = len(config.seeds)
    for i, (valor, _, _) in enumerate(variantes):
        celulas = diagnosticos[i * n:(i + 1) * n]
        relatorio["por_semente"][str(valor)] = {
            str(seed): {chave: c.get(chave) for chave in ("coverage", "binned_mi", "particle_entropy")}
            for seed, c in zip(config.seeds, celulas)
        }
        relatorio["valores"][str(valor)] = {
            chave: float(np.mean([c[chave] for c in celulas if c.get(chave) is not None]))
            for chave in ("coverage", "binned_mi", "particle_entropy")
            if any(c.get(chave) is not None for c in celulas)
        }
    raiz.mkdir(parents=True, exist_ok=True)
    (raiz / "ablacao.json").write_text(json.dumps(relatorio, indent=2, sort_keys=True), encoding="utf-8")
    print(tabela_comparativa({f"{eixo}={v}": r for v, r in relatorio["valores"].items()}))
    return relatorio


# ----------------------------------------------------------------------
# main
# ----------------------------------------------------------------------


def construir_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="skillflow", description="Descoberta de skills em labirintos 2D")
    parser.add_argument("--verbose", "-v", action="count", default=0, help="Mais mensagens de progresso")
    sub = parser.add_subparsers(dest="comando", required=True)

    def com_config(p):
        p.add_argument("--config", type=Path, help="Arquivo chave = valor")
        p.add_argument("--seed", type=int)
        p.add_argument("--reward-method", choices=["becl", "diayn", "entropy"])
        p.add_argument("--kappa", type=float)
        p.add_argument("--skill-dim", type=int)
        p.add_argument("--layout")
        p.add_argument("--out")
        return p

    p = com_config(sub.add_parser("pretrain", help="Pré-treino de skills"))
    p.add_argument("--workers", type=int, default=1)

    p = com_config(sub.add_parser("finetune", help="Ajuste fino numa tarefa"))
    p.add_argument("--checkpoint", type=Path, help="Checkpoint do pré-treino (ausente: do zero)")
    p.add_argument("--todas-skills", action="store_true", help="Um ajuste por skill")
    p.add_argument("--workers", type=int, default=1)

    p = com_config(sub.add_parser("ablate", help="Varredura de skill_dim ou temperatura"))
    p.add_argument("--eixo", required=True, choices=sorted(EIXOS))
    p.add_argument("--valores", required=True, help="Valores separados por vírgula")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--mine-passos", type=int, default=0)

    p = sub.add_parser("plot", help="SVG das trajetórias")
    p.add_argument("diretorio", type=Path)

    p = sub.add_parser("diag", help="Relatório de diagnóstico")
    p.add_argument("diretorios", type=Path, nargs="*")
    p.add_argument("--sintetico", action="store_true", help="Apenas as suítes teóricas")
    p.add_argument("--mine-passos", type=int, default=1000)
    p.add_argument("--saida", type=Path, help="Arquivo do relatório sintético")
    return parser


def _overrides(args: argparse.Namespace) -> Dict:
    return {
        "seeds": [args.seed] if args.seed is not None else None,
        "reward_method": args.reward_method,
        "kappa": args.kappa,
        "skill_dim": args.skill_dim,
        "layout": args.layout,
        "out": args.out,
    }


def _valores(texto: str) -> List[float]:
    try:
        return [float(v) for v in texto.split(",") if v.strip()]
    except ValueError as e:
        raise ErroArgumentos(f"--valores inválido: {texto!r}") from e


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Ponto de entrada principal da linha de comando."""
    load_dotenv()
    try:
        args = construir_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
            format="%(asctime)s %(name)s %(levelname)s %(message)s",
        )

        if args.comando == "pretrain":
            cmd_pretrain(carregar_config(args.config, _overrides(args)), args.workers)
        elif args.comando == "finetune":
            cmd_finetune(carregar_config(args.config, _overrides(args)), args.checkpoint, args.todas_skills, args.workers)
        elif args.comando == "ablate":
            cmd_ablate(carregar_config(args.config, _overrides(args)), args.eixo, _valores(args.valores), args.workers, args.mine_passos)
        elif args.comando == "plot":
            cmd_plot(args.diretorio)
        elif args.comando == "diag":
            cmd_diag(args.diretorios, args.sintetico, args.mine_passos, args.saida)
    except ErroArgumentos as e:
        print(json.dumps({"status": "erro", "tipo": "ErroArgumentos", "mensagem": str(e)}, ensure_ascii=False), file=sys.stderr)
        return 2
    except Exception as e:
        logger.debug("Falha no comando", exc_info=True)
        print(json.dumps({"status": "erro", "tipo": type(e).__name__, "mensagem": str(e)}, ensure_ascii=False), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
