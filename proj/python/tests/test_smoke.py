import json
import math

import pytest

import blm


def test_bpe_round_trip():
    model = blm.train_bpe(["salam dunya", "dunya bohat badi hai"], 300)
    ids = model.encode("Salam DUNYA")
    assert ids
    assert model.decode(ids) == "salam dunya"
    assert len(model.vocab) == 300


def test_augment_preserves_shared_ids():
    vy = blm.Vocabulary(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
                         "shared1", "onlyy2", "shared3"])
    vx = blm.Vocabulary(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
                         "shared1", "newx2", "shared3"])
    vz, mapping = blm.augment(vy, vx)
    assert vz.id_of("shared1") == vy.id_of("shared1")
    assert vz.id_of("shared3") == vy.id_of("shared3")
    assert vz.id_of("newx2") == vy.id_of("onlyy2")
    origins = {e.token: e.origin for e in mapping.entries}
    assert origins["newx2"] == blm.Origin.NewFromX

    report = blm.check_preconditions(vx, vy)
    assert report.precondition_eq1
    assert report.shared_count == 2


def test_augment_rejects_disjoint():
    vy = blm.Vocabulary(["aa", "bb"])
    vx = blm.Vocabulary(["cc", "dd"])
    with pytest.raises(RuntimeError):
        blm.augment(vy, vx)


def test_clean_and_transliterate():
    sentences = blm.clean("salam @x http://a.b dunya hai! kya haal hai?")
    assert sentences == ["salam dunya hai!", "kya haal hai?"]
    table = blm.TransliterationTable([("سلام", "salam")])
    text, coverage = blm.transliterate("سلام dunya", table)
    assert text == "salam dunya"
    assert coverage == 1.0


def test_param_count_base_preset():
    config = blm.ModelConfig.base_preset(30000)
    n = blm.param_count(config)
    assert abs(n - 110e6) / 110e6 < 0.05


def test_eval_report_json():
    report = blm.EvalReport.from_json(json.dumps({
        "mlm_accuracy": 0.5,
        "mlm_loss_nats": 1.0,
        "perplexity": math.e,
        "masked_token_count": 10,
        "pair_count": 0,
        "clamped": False,
    }))
    assert report.mlm_accuracy == 0.5
    assert report.perplexity == pytest.approx(math.e)


def test_synth_corpus_writes_files(tmp_path):
    hi = tmp_path / "hi.txt"
    lo = tmp_path / "lo.txt"
    blm.synth_bilingual_corpus(0.4, 100, 7, str(hi), str(lo))
    assert hi.read_text().strip()
    assert lo.read_text().strip()
