import json
from functools import partial

import pytest

from agents import cli
from agents.cli import ErroArgumentos, _valores, carregar_config, main
from agents.diagnostico import diagnostico_sintetico
from tools.checkpoint import carregar_checkpoint
from tools.metricas import ler_metricas
from tools.trajetorias import ler_trajetorias


CONFIG_PEQUENA = """\
# execução curta para testes
nome = teste
layout = bottleneck
reward_method = becl
seeds = 1,2
batch_size = 16
seed_frames = 200
pretrain_frames = 400
finetune_frames = 200
update_frequency = 10
hidden_dim = 16
feature_dim = 4
buffer_capacity = 2000
skill_dim = 3
trajetorias_por_skill = 2
avaliacao_a_cada = 100
episodios_avaliacao = 1
knn_k = 3
"""


@pytest.fixture
def arquivo_config(tmp_path):
    caminho = tmp_path / "teste.conf"
    caminho.write_text(CONFIG_PEQUENA + f"out = {tmp_path / 'saidas'}\n", encoding="utf-8")
    return caminho


def erro_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


# ----------------------------------------------------------------------
# Configuração
# ----------------------------------------------------------------------


def test_carregar_config_com_sobreposicoes(arquivo_config):
    config = carregar_config(arquivo_config, {"kappa": 0.1, "skill_dim": None})
    assert config.seeds == [1, 2]
    assert config.kappa == 0.1
    assert config.skill_dim == 3


def test_saida_padrao_do_ambiente(tmp_path, monkeypatch):
    monkeypatch.setenv("SKILLFLOW_SAIDA", str(tmp_path / "ambiente"))
    assert carregar_config().out == str(tmp_path / "ambiente")


def test_chave_desconhecida(tmp_path):
    caminho = tmp_path / "ruim.conf"
    caminho.write_text("taxa_magica = 3\n", encoding="utf-8")
    with pytest.raises(ValueError):
        carregar_config(caminho)


def test_config_inexistente(tmp_path):
    with pytest.raises(FileNotFoundError):
        carregar_config(tmp_path / "nada.conf")


def test_valores_da_ablacao():
    assert _valores("1, 0.5,0.1") == [1.0, 0.5, 0.1]
    with pytest.raises(ErroArgumentos):
        _valores("1,dois")


# ----------------------------------------------------------------------
# Códigos de saída
# ----------------------------------------------------------------------


def test_sem_subcomando_sai_com_2(capsys):
    assert main([]) == 2
    assert erro_json(capsys)["tipo"] == "ErroArgumentos"


def test_metodo_invalido_sai_com_2(capsys, arquivo_config):
    assert main(["pretrain", "--config", str(arquivo_config), "--reward-method", "apt"]) == 2


def test_configuracao_inexistente_sai_com_1(capsys, tmp_path):
    assert main(["pretrain", "--config", str(tmp_path / "nada.conf")]) == 1
    erro = erro_json(capsys)
    assert erro["status"] == "erro"
    assert erro["tipo"] == "FileNotFoundError"


def test_valor_invalido_sai_com_1(capsys, arquivo_config):
    assert main(["pretrain", "--config", str(arquivo_config), "--kappa", "2.0"]) == 1
    assert erro_json(capsys)["tipo"] == "ValidationError"


def test_diag_sem_entradas_sai_com_1(capsys):
    assert main(["diag"]) == 1
    assert "sintetico" in erro_json(capsys)["mensagem"]


def test_plot_de_diretorio_sem_sementes(capsys, tmp_path):
    (tmp_path / "labirinto.txt").write_text("start 0.5 0.5\n", encoding="utf-8")
    assert main(["plot", str(tmp_path)]) == 1
    assert erro_json(capsys)["tipo"] == "FileNotFoundError"


# ----------------------------------------------------------------------
# Fluxo completo
# ----------------------------------------------------------------------


def test_pretrain_plot_diag_finetune(arquivo_config, tmp_path, capsys):
    assert main(["pretrain", "--config", str(arquivo_config)]) == 0
    execucao = tmp_path / "saidas" / "teste"
    manifesto = json.loads((execucao / "manifesto.json").read_text(encoding="utf-8"))
    assert manifesto["comando"] == "pretrain"
    assert set(manifesto["saidas"]) == {"1", "2"}
    assert (execucao / "config.conf").exists() and (execucao / "labirinto.txt").exists()

    semente = execucao / "seed_1"
    redes, config_hash = carregar_checkpoint(semente / "checkpoint.json")
    assert "codificador" in redes
    assert config_hash == manifesto["config_hash"]
    assert len(ler_trajetorias(semente / "trajetorias.csv")) == 3 * 2
    assert isinstance(ler_metricas(semente / "metricas.jsonl"), list)

    assert main(["plot", str(execucao)]) == 0
    assert (semente / "trajetorias.svg").exists()

    assert main(["diag", str(execucao), "--mine-passos", "0"]) == 0
    diagnostico = json.loads((execucao / "diagnostico.json").read_text(encoding="utf-8"))
    assert 0 <= diagnostico["coverage"] <= 1
    assert set(diagnostico["sementes"]) == {"1", "2"}
    assert "identity_gap" in diagnostico["sementes"]["1"]["theorem_checks"]

    assert main(["finetune", "--config", str(arquivo_config), "--seed", "1",
                 "--checkpoint", str(semente / "checkpoint.json")]) == 0
    curva = json.loads((execucao / "ajuste" / "seed_1" / "curva.json").read_text(encoding="utf-8"))
    assert curva["pretreinado"]
    assert [p["frame"] for p in curva["curva"]] == [0, 100, 200]
    # o ajuste não sobrescreve a configuração do pré-treino
    assert "seeds = 1,2" in (execucao / "config.conf").read_text(encoding="utf-8")


def test_finetune_todas_as_skills(arquivo_config, tmp_path):
    assert main(["finetune", "--config", str(arquivo_config), "--seed", "3", "--todas-skills"]) == 0
    ajuste = tmp_path / "saidas" / "teste" / "ajuste"
    assert sorted(p.name for p in (ajuste / "seed_3").iterdir()) == ["skill_0", "skill_1", "skill_2"]
    manifesto = json.loads((ajuste / "manifesto.json").read_text(encoding="utf-8"))
    assert set(manifesto["saidas"]) == {"3/0", "3/1", "3/2"}


def test_ablacao_de_skill_dim_fracionario(arquivo_config, tmp_path, capsys):
    assert main(["ablate", "--config", str(arquivo_config), "--seed", "1",
                 "--eixo", "skill_dim", "--valores", "4.5"]) == 1
    erro = erro_json(capsys)
    assert erro["tipo"] == "ValueError"
    assert "inteiro" in erro["mensagem"]
    assert not (tmp_path / "saidas" / "teste").exists()


def test_ablacao_de_skill_dim(arquivo_config, tmp_path):
    assert main(["ablate", "--config", str(arquivo_config), "--seed", "1",
                 "--eixo", "skill_dim", "--valores", "2,3"]) == 0
    relatorio = json.loads((tmp_path / "saidas" / "teste" / "ablacao.json").read_text(encoding="utf-8"))
    assert set(relatorio["valores"]) == {"2", "3"}
    assert all(0 <= v["coverage"] <= 1 for v in relatorio["valores"].values())
    assert set(relatorio["por_semente"]["2"]) == {"1"}


def test_diag_sintetico_grava_relatorio(tmp_path, monkeypatch):
    # suítes reduzidas; a versão completa fica em test_diagnostico
    monkeypatch.setattr(cli, "diagnostico_sintetico", partial(diagnostico_sintetico, 0, 5, 5, 3))
    saida = tmp_path / "relatorios" / "sintetico.json"
    assert main(["diag", "--sintetico", "--saida", str(saida)]) == 0
    relatorio = json.loads(saida.read_text(encoding="utf-8"))
    assert relatorio["theorem_checks"]["bound_violations"] == 0
