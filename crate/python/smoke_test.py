"""Smoke test for the `wsi` extension module.

Build and install it first, e.g. `pip install ./crates/python`, or copy
target/release/libwsi.so next to this script as wsi.so.
"""

import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import wsi  # noqa: E402


def write_fixture(tmp):
    # Two senses of "bank", each with its own vocabulary near +x or -x.
    river = [f"river{i}" for i in range(6)]
    money = [f"money{i}" for i in range(6)]
    vectors = {}
    for i, w in enumerate(river):
        vectors[w] = [1.0 + 0.1 * i, 0.05 * i, 0.0]
    for i, w in enumerate(money):
        vectors[w] = [-1.0 - 0.1 * i, 0.0, 0.05 * i]
    vectors["bank"] = [0.0, 1.0, 1.0]
    model = wsi.EmbeddingModel.from_dict(3, vectors)
    model_path = os.path.join(tmp, "model.bin")
    model.save(model_path)

    rows = ["context_id\tword\tgold_sense_id\tpredict_sense_id\tpositions\tcontext"]
    for c in range(20):
        vocab, sense = (river, "1") if c % 2 == 0 else (money, "2")
        words = [vocab[(c + j) % 6] for j in range(4)]
        text = " ".join(words[:2] + ["bank"] + words[2:])
        rows.append(f"c{c:02d}\tbank\t{sense}\t\t\t{text}")
    data_path = os.path.join(tmp, "train.tsv")
    with open(data_path, "w", encoding="utf-8") as f:
        f.write("\n".join(rows) + "\n")
    return model_path, data_path


def main():
    assert wsi.ari(["a", "a", "b", "b"], ["x", "x", "y", "y"]) == 1.0
    assert wsi.ari(["a", "b", "c"], ["x", "x", "x"]) == 0.0
    assert abs(wsi.chi2_statistic(8, 2, 2, 88) - 60.4938) < 1e-3
    assert wsi.porter_stem("caresses") == "caress"
    assert wsi.tokenize("The Bank, the BANKS!") == ["the", "bank", "the", "banks"]

    labels = wsi.label_by_translation({"a": ["jar"], "b": ["jar"], "c": ["bank"]})
    assert labels["a"] == labels["b"] != labels["c"]
    labels = wsi.label_by_translation({"a": ["banks"], "b": ["bank"]}, stemmer="porter")
    assert labels["a"] == labels["b"]

    blobs = [[0, 0], [0.1, 0], [100, 0], [100.1, 0], [0, 100], [0, 100.1]]
    res = wsi.cluster(blobs, algo="affinity_propagation")
    assert res["k"] == 3 and res["converged"], res
    res = wsi.cluster(blobs, k=3, linkage="average", metric="cosine")
    assert len(res["labels"]) == 6
    try:
        wsi.cluster(blobs, linkage="ward", metric="cosine")
    except ValueError as e:
        assert "euclidean" in str(e)
    else:
        raise AssertionError("ward with cosine was accepted")

    with tempfile.TemporaryDirectory() as tmp:
        model_path, data_path = write_fixture(tmp)
        model = wsi.EmbeddingModel.load(model_path)
        assert model.dim == 3 and len(model) == 13 and "river0" in model
        dataset = wsi.Dataset.load(data_path)
        assert len(dataset) == 20 and dataset.targets() == ["bank"]
        idf = wsi.IdfTable.from_dataset(dataset)
        chi2 = wsi.Chi2Table.build(dataset)

        # A single target word leaves chi-square without a contrast class,
        # so every chi2 weight is 0; keep the chi2 factor out.
        assert chi2.get("bank", "river0") == 0.0
        pred = wsi.induce_senses(dataset, model, idf, chi2, p_tfidf=1.0, p_chi2=0.0, k=2)
        report = wsi.evaluate(dataset, pred)
        assert report["aggregate_weighted"] == 1.0, report

        space = 'power_grid = [0.0, 1.0]\nalgorithms = ["agglomerative"]\nk_grid = [1, 2]\n'
        ranking = wsi.grid_search(dataset, model, idf, chi2, space)
        assert ranking[0]["ari_weighted"] == 1.0
        assert len(ranking) == 4 * 2 * 7

        out = os.path.join(tmp, "pred.tsv")
        dataset.write_predictions(pred, out)
        assert wsi.Dataset.load(out).context_ids() == dataset.context_ids()

    try:
        wsi.Dataset.load("/nonexistent/train.tsv")
    except OSError:
        pass
    else:
        raise AssertionError("missing file was accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
