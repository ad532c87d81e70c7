#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "blm/augment.hpp"
#include "blm/bpe.hpp"
#include "blm/checkpoint.hpp"
#include "blm/corpus.hpp"
#include "blm/evaluation.hpp"
#include "blm/experiment.hpp"
#include "blm/model.hpp"
#include "blm/training.hpp"

namespace py = pybind11;
using namespace blm;

PYBIND11_MODULE(_blm, m) {
    m.doc() = "Bilingual language modeling via position-preserving vocabulary "
              "augmentation";

    // --- tokenizer ---
    py::class_<bpe::Vocabulary>(m, "Vocabulary")
        .def(py::init<std::vector<std::string>>())
        .def("id_of", &bpe::Vocabulary::id_of)
        .def("token", &bpe::Vocabulary::token)
        .def("__len__", &bpe::Vocabulary::size)
        .def_property_readonly("tokens", &bpe::Vocabulary::tokens)
        .def("save", &bpe::Vocabulary::save)
        .def_static("load", &bpe::Vocabulary::load);

    py::class_<bpe::BpeModel>(m, "BpeModel")
        .def("encode", &bpe::BpeModel::encode)
        .def("decode", &bpe::BpeModel::decode)
        .def_property_readonly("vocab", &bpe::BpeModel::vocab)
        .def_property_readonly("uncased", &bpe::BpeModel::uncased)
        .def("save", &bpe::BpeModel::save)
        .def_static("load", &bpe::BpeModel::load, py::arg("vocab_path"),
                    py::arg("merges_path"), py::arg("uncased") = true);

    m.def("train_bpe",
          [](const std::vector<std::string>& corpus, size_t vocab_size,
             bool uncased) {
              return bpe::train_bpe(corpus, vocab_size,
                                    bpe::default_special_tokens(), uncased);
          },
          py::arg("corpus"), py::arg("vocab_size"), py::arg("uncased") = true);

    // --- vocabulary augmentation ---
    py::enum_<augment::Origin>(m, "Origin")
        .value("Shared", augment::Origin::Shared)
        .value("NewFromX", augment::Origin::NewFromX)
        .value("RetainedFromY", augment::Origin::RetainedFromY);

    py::class_<augment::MapEntry>(m, "MapEntry")
        .def_readonly("token", &augment::MapEntry::token)
        .def_readonly("new_id", &augment::MapEntry::new_id)
        .def_readonly("origin", &augment::MapEntry::origin);

    py::class_<augment::AugmentationMap>(m, "AugmentationMap")
        .def_readonly("entries", &augment::AugmentationMap::entries)
        .def_readonly("shared_count", &augment::AugmentationMap::shared_count)
        .def_readonly("x_only_count", &augment::AugmentationMap::x_only_count)
        .def_readonly("y_only_count", &augment::AugmentationMap::y_only_count)
        .def("save_tsv", &augment::AugmentationMap::save_tsv)
        .def_static("load_tsv", &augment::AugmentationMap::load_tsv);

    py::class_<augment::AugmentationReport>(m, "AugmentationReport")
        .def_readonly("overlap_ratio", &augment::AugmentationReport::overlap_ratio)
        .def_readonly("precondition_eq1",
                      &augment::AugmentationReport::precondition_eq1)
        .def_readonly("precondition_eq2",
                      &augment::AugmentationReport::precondition_eq2)
        .def_readonly("shared_count", &augment::AugmentationReport::shared_count)
        .def_readonly("augmented_size",
                      &augment::AugmentationReport::augmented_size);

    m.def("check_preconditions", &augment::check_preconditions, py::arg("vx"),
          py::arg("vy"));
    m.def("augment", &augment::augment, py::arg("vy"), py::arg("vx"));

    // --- corpus pipeline ---
    m.def("clean", [](const std::string& raw) { return corpus::clean(raw); });

    py::class_<corpus::TransliterationTable>(m, "TransliterationTable")
        .def(py::init([](const std::vector<std::pair<std::string, std::string>>&
                             rules) {
            std::vector<corpus::TransliterationRule> rs;
            for (const auto& [s, t] : rules) rs.push_back({s, t});
            return corpus::TransliterationTable(std::move(rs));
        }))
        .def_static("load", &corpus::TransliterationTable::load);

    m.def("transliterate",
          [](const std::string& text, const corpus::TransliterationTable& table) {
              auto r = corpus::transliterate(text, table);
              return py::make_tuple(r.text, r.coverage);
          });

    // --- model / training / evaluation (driven by files, desk scale) ---
    py::class_<model::ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("layers", &model::ModelConfig::layers)
        .def_readwrite("hidden", &model::ModelConfig::hidden)
        .def_readwrite("heads", &model::ModelConfig::heads)
        .def_readwrite("max_seq_len", &model::ModelConfig::max_seq_len)
        .def_readwrite("vocab_size", &model::ModelConfig::vocab_size)
        .def_readwrite("ffn_multiplier", &model::ModelConfig::ffn_multiplier)
        .def_readwrite("dropout_rate", &model::ModelConfig::dropout_rate)
        .def_static("base_preset", &model::ModelConfig::base_preset,
                    py::arg("vocab_size") = 30000)
        .def_static("tiny_preset", &model::ModelConfig::tiny_preset,
                    py::arg("vocab_size") = 512, py::arg("max_seq_len") = 64);

    m.def("param_count", &model::param_count);

    py::class_<evaluation::EvalReport>(m, "EvalReport")
        .def_readonly("mlm_accuracy", &evaluation::EvalReport::mlm_accuracy)
        .def_readonly("pair_accuracy", &evaluation::EvalReport::pair_accuracy)
        .def_readonly("mlm_loss_nats", &evaluation::EvalReport::mlm_loss_nats)
        .def_readonly("perplexity", &evaluation::EvalReport::perplexity)
        .def_readonly("masked_token_count",
                      &evaluation::EvalReport::masked_token_count)
        .def_readonly("pair_count", &evaluation::EvalReport::pair_count)
        .def("to_json", &evaluation::EvalReport::to_json)
        .def_static("from_json", &evaluation::EvalReport::from_json);

    m.def("synth_bilingual_corpus",
          [](double shared_fraction, int64_t sentences, uint64_t seed,
             const std::string& hi_path, const std::string& lo_path) {
              auto [hi, lo] =
                  training::synth_bilingual_corpus(shared_fraction, sentences, seed);
              corpus::save_corpus(hi, hi_path);
              corpus::save_corpus(lo, lo_path);
          },
          py::arg("shared_fraction"), py::arg("sentences"), py::arg("seed"),
          py::arg("hi_path"), py::arg("lo_path"));

    py::class_<experiment::ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_readwrite("shared_fraction",
                       &experiment::ExperimentConfig::shared_fraction)
        .def_readwrite("sentences", &experiment::ExperimentConfig::sentences)
        .def_readwrite("steps", &experiment::ExperimentConfig::steps)
        .def_readwrite("base_steps", &experiment::ExperimentConfig::base_steps)
        .def_readwrite("seeds", &experiment::ExperimentConfig::seeds)
        .def_readwrite("vocab_size", &experiment::ExperimentConfig::vocab_size)
        .def_static("from_json", &experiment::ExperimentConfig::from_json)
        .def_static("from_json_file",
                    &experiment::ExperimentConfig::from_json_file)
        .def("to_json", &experiment::ExperimentConfig::to_json);

    m.def("reproduce_experiment",
          [](const experiment::ExperimentConfig& config,
             const std::string& out_dir) {
              auto result = experiment::reproduce_experiment(config, out_dir);
              py::dict d;
              for (const auto& [name, outcome] : result.regimes)
                  d[py::str(name)] = outcome.median;
              return py::make_tuple(d, result.comparison.render_text());
          },
          py::arg("config"), py::arg("out_dir"));
}
