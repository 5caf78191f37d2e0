import argparse
import re

import numpy as np
import pytest

from taskrec.cli import build_parser, main
from taskrec.ifts import LatentModel
from taskrec.io import IdMaps, load_model, load_observations, save_model


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "--workers", 40, "--tasks", 30, "--n-features", 10, "--seed", 3,
               "--out-obs", d / "obs.csv", "--out-feat", d / "feat.csv", "--out-truth", d / "truth.csv") == 0
    assert run("split", "--observations", d / "obs.csv", "--seed", 1,
               "--train-out", d / "train.csv", "--test-out", d / "test.csv") == 0
    return d


def _train(d, model, out, *extra):
    return run("train", "--model", model, "--observations", d / "train.csv", "--features", d / "feat.csv",
               "--out", out, *extra)


# -- help --------------------------------------------------------------------


def test_help_lists_every_flag_with_default():
    parser = build_parser()
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sub in subparsers.choices.items():
        text = "".join(sub.format_help().split())
        for action in sub._actions:
            if action.dest == "help":
                continue
            assert action.help, (name, action.dest)
            assert action.option_strings[-1] in text
            assert f"(default:{action.default})".replace(" ", "") in text, (name, action.dest)


# -- split -------------------------------------------------------------------


def test_split_ten_entries(tmp_path):
    obs = tmp_path / "o.csv"
    obs.write_text("worker_id,task_id,count\n" + "".join(f"w{i},t{i},{i + 1}\n" for i in range(10)))
    for tag in ("a", "b"):
        assert run("split", "--observations", obs, "--train-out", tmp_path / f"{tag}.tr",
                   "--test-out", tmp_path / f"{tag}.te") == 0
    assert len((tmp_path / "a.tr").read_text().splitlines()) == 10
    assert len((tmp_path / "a.te").read_text().splitlines()) == 2
    for ext in ("tr", "te"):
        assert (tmp_path / f"a.{ext}").read_bytes() == (tmp_path / f"b.{ext}").read_bytes()


def test_split_bad_ratio_and_missing_file(tmp_path, capsys):
    obs = tmp_path / "o.csv"
    obs.write_text("worker_id,task_id,count\na,x,1\nb,y,1\n")
    with pytest.raises(SystemExit) as info:
        run("split", "--observations", obs, "--ratio", 1.5, "--train-out", tmp_path / "a", "--test-out", tmp_path / "b")
    assert info.value.code == 2
    assert run("split", "--observations", tmp_path / "nope.csv", "--train-out", tmp_path / "a",
               "--test-out", tmp_path / "b") == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("worker_id,task_id,count\na,x,0\n")
    assert run("split", "--observations", bad, "--train-out", tmp_path / "a", "--test-out", tmp_path / "b") == 2
    assert "bad.csv:2" in capsys.readouterr().err


# -- train -------------------------------------------------------------------


def test_train_feat_nnls_shape(data, tmp_path, capsys):
    assert _train(data, "feat-nnls", tmp_path / "m.txt") == 0
    model = load_model(tmp_path / "m.txt")
    assert model.x.shape == (len(model.ids["worker_ids"]), 10)
    assert capsys.readouterr().out.startswith("kind=feat-nnls dims=")


def test_train_als_neg_ignores_missing_features(data, tmp_path):
    assert run("train", "--model", "als-neg", "--observations", data / "train.csv", "--factors", 3,
               "--iters", 2, "--out", tmp_path / "m.txt") == 0
    assert load_model(tmp_path / "m.txt").kind == "als-neg"


def test_train_ifts_single_sweep(data, tmp_path, capsys):
    assert _train(data, "ifts", tmp_path / "m.txt", "--iters", 1, "--factors", 4) == 0
    assert "sweeps=1 " in capsys.readouterr().out
    assert len(load_model(tmp_path / "m.txt").objective_trace) == 1


def test_train_usage_errors(data, tmp_path):
    assert _train(data, "svd", tmp_path / "m.txt") == 2
    assert run("train", "--model", "ifts", "--observations", data / "train.csv", "--out", tmp_path / "m") == 2
    with pytest.raises(SystemExit) as info:
        _train(data, "ifts", tmp_path / "m.txt", "--lambda", 0)
    assert info.value.code == 2


# -- eval --------------------------------------------------------------------


def _oracle_model(d, path, test_path=None):
    """Latent model whose scores are exactly the held-out counts."""
    ids = IdMaps()
    load_observations(d / "train.csv", ids)
    test, _ = load_observations(test_path or d / "test.csv", ids)
    n_w, n_t = len(ids.workers), len(ids.tasks)
    u = np.zeros((n_w, n_t))
    u[: test.n_workers, : test.n_tasks] = test.to_dense()
    model = LatentModel(u=u, v=np.eye(n_t), alpha=0.0, lam=1.0, iterations=0, seed=0, kind="ifts")
    model.ids = {"worker_ids": IdMaps.ordered(ids.workers), "task_ids": IdMaps.ordered(ids.tasks)}
    save_model(path, model)


def _one_per_worker(d, path):
    ids = IdMaps()
    train, _ = load_observations(d / "train.csv", ids)
    load_observations(d / "test.csv", ids)
    dense = train.to_dense()
    workers, tasks = IdMaps.ordered(ids.workers), IdMaps.ordered(ids.tasks)
    lines = ["worker_id,task_id,count"]
    for w in range(dense.shape[0]):
        free = [t for t in range(len(tasks)) if t >= dense.shape[1] or dense[w, t] == 0]
        lines.append(f"{workers[w]},{tasks[free[-1]]},2")
    path.write_text("\n".join(lines) + "\n")


@pytest.mark.parametrize("sign, expected", [(1, "mpr=0.0"), (-1, "mpr=100.0")])
def test_eval_perfect_and_anti_oracle(data, tmp_path, sign, expected):
    _one_per_worker(data, tmp_path / "test.csv")
    _oracle_model(data, tmp_path / "oracle.txt", tmp_path / "test.csv")
    model = load_model(tmp_path / "oracle.txt")
    model.u *= sign
    save_model(tmp_path / "oracle.txt", model)
    assert run("eval", "--model-file", tmp_path / "oracle.txt", "--train", data / "train.csv",
               "--test", tmp_path / "test.csv", "--out", tmp_path / "r.txt") == 0
    assert expected in (tmp_path / "r.txt").read_text().splitlines()
    assert (tmp_path / "r.pr.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_eval_pr_only_writes_curve(data, tmp_path):
    _train(data, "feat-nnls", tmp_path / "m.txt")
    assert run("eval", "--model-file", tmp_path / "m.txt", "--train", data / "train.csv", "--test",
               data / "test.csv", "--features", data / "feat.csv", "--metric", "pr",
               "--out", tmp_path / "r.txt", "--no-plot") == 0
    curve = (tmp_path / "r.pr.csv").read_text().splitlines()
    assert curve[0] == "t_percent,precision,recall" and len(curve) == 101
    assert not any(line.startswith("mpr=") for line in (tmp_path / "r.txt").read_text().splitlines())
    assert not (tmp_path / "r.pr.png").exists()


def test_eval_task_count_mismatch(data, tmp_path, capsys):
    _train(data, "ifts", tmp_path / "m.txt", "--iters", 1, "--factors", 2)
    extra = tmp_path / "test.csv"
    extra.write_text((data / "test.csv").read_text() + "w0,t_unknown,1\n")
    code = run("eval", "--model-file", tmp_path / "m.txt", "--train", data / "train.csv",
               "--test", extra, "--out", tmp_path / "r.txt")
    assert code == 2 and "dimension mismatch" in capsys.readouterr().err


def test_eval_feature_count_mismatch(data, tmp_path):
    _train(data, "feat-nnls", tmp_path / "m.txt")
    feats = tmp_path / "f.csv"
    feats.write_text((data / "feat.csv").read_text() + "t0,brand_new\n")
    assert run("eval", "--model-file", tmp_path / "m.txt", "--train", data / "train.csv", "--test",
               data / "test.csv", "--features", feats, "--out", tmp_path / "r.txt") == 2


# -- recommend ---------------------------------------------------------------


def _recommend(d, model, worker, k, capsys, obs=None):
    capsys.readouterr()
    code = run("recommend", "--model-file", model, "--observations", obs or d / "train.csv",
               "--features", d / "feat.csv", "--worker", worker, "--top-k", k)
    return code, capsys.readouterr().out.splitlines()


def test_recommend_lists_all_candidates_deterministically(data, tmp_path, capsys):
    _train(data, "feat-nnls", tmp_path / "m.txt")
    code, lines = _recommend(data, tmp_path / "m.txt", "w0", 1000, capsys)
    ids = IdMaps()
    c, _ = load_observations(data / "train.csv", ids)
    done = {t for t, i in ids.tasks.items() if c.to_dense()[ids.workers["w0"], i] > 0}
    assert code == 0 and len(lines) == 30 - len(done)
    rows = [line.split(",") for line in lines]
    assert [int(r[0]) for r in rows] == list(range(1, len(rows) + 1))
    assert not done & {r[1] for r in rows}
    scores = [float(r[2]) for r in rows]
    assert scores == sorted(scores, reverse=True)
    assert _recommend(data, tmp_path / "m.txt", "w0", 1000, capsys)[1] == lines
    assert _recommend(data, tmp_path / "m.txt", "w0", 3, capsys)[1] == lines[:3]


def test_recommend_ties_break_by_task_order(data, tmp_path, capsys):
    _oracle_model(data, tmp_path / "m.txt")
    model = load_model(tmp_path / "m.txt")
    model.u[:] = 0.0
    save_model(tmp_path / "m.txt", model)
    code, lines = _recommend(data, tmp_path / "m.txt", "w1", 5, capsys)
    tasks = model.ids["task_ids"]
    printed = [tasks.index(line.split(",")[1]) for line in lines]
    assert code == 0 and printed == sorted(printed)


def test_recommend_saturated_worker_and_unknown(data, tmp_path, capsys):
    _train(data, "feat-nnls", tmp_path / "m.txt")
    ids = IdMaps()
    load_observations(data / "train.csv", ids)
    full = tmp_path / "full.csv"
    full.write_text((data / "train.csv").read_text() + "".join(f"w0,{t},1\n" for t in ids.tasks))
    code, lines = _recommend(data, tmp_path / "m.txt", "w0", 10, capsys, obs=full)
    assert code == 0 and lines == []
    assert _recommend(data, tmp_path / "m.txt", "nobody", 10, capsys)[0] == 2


# -- synth -------------------------------------------------------------------


def test_synth_writes_files_and_is_reproducible(tmp_path):
    for tag in ("a", "b"):
        assert run("synth", "--seed", 7, "--out-obs", tmp_path / f"{tag}.obs", "--out-feat",
                   tmp_path / f"{tag}.feat", "--out-truth", tmp_path / f"{tag}.truth") == 0
    for ext in ("obs", "feat", "truth"):
        assert (tmp_path / f"a.{ext}").stat().st_size > 0
        assert (tmp_path / f"a.{ext}").read_bytes() == (tmp_path / f"b.{ext}").read_bytes()


def test_synth_invalid(tmp_path):
    assert run("synth", "--n-features", 2, "--out-obs", tmp_path / "o", "--out-feat", tmp_path / "f") == 2
    with pytest.raises(SystemExit) as info:
        run("synth", "--intensity", -1, "--out-obs", tmp_path / "o", "--out-feat", tmp_path / "f")
    assert info.value.code == 2


# -- determinism and experiment ----------------------------------------------


@pytest.mark.parametrize("kind", ["feat-nnls", "feat-reg", "ifts", "als-neg"])
def test_outputs_identical_across_reruns_and_threads(data, tmp_path, kind):
    outputs = []
    for tag, threads in (("a", 1), ("b", 1), ("c", 8)):
        model = tmp_path / f"{tag}.model"
        assert _train(data, kind, model, "--threads", threads, "--factors", 4, "--iters", 3) == 0
        assert run("eval", "--model-file", model, "--train", data / "train.csv", "--test", data / "test.csv",
                   "--features", data / "feat.csv", "--threads", threads, "--out", tmp_path / f"{tag}.txt") == 0
        outputs.append([(tmp_path / f"{tag}{ext}").read_bytes() for ext in (".model", ".txt", ".pr.csv", ".pr.png")])
    assert outputs[0] == outputs[1] == outputs[2]


def test_experiment_outputs(data, tmp_path, capsys):
    assert run("experiment", "--observations", data / "obs.csv", "--features", data / "feat.csv",
               "--models", "feat-nnls,feat-reg", "--runs", 2, "--out-dir", tmp_path / "x") == 0
    out = capsys.readouterr().out
    assert re.search(r"^feat-nnls mpr=\d", out, re.M)
    rows = (tmp_path / "x" / "mpr.csv").read_text().splitlines()
    assert rows[0] == "model,mpr" and len(rows) == 3
    for name in ("feat-nnls.report.txt", "feat-reg.pr.csv", "pr_curves.png", "mpr.png"):
        assert (tmp_path / "x" / name).exists()
    assert run("experiment", "--observations", data / "obs.csv", "--models", "nope",
               "--out-dir", tmp_path / "y") == 2
