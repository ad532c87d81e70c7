#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "blm/corpus.hpp"
#include "blm/evaluation.hpp"

using namespace blm;
namespace fs = std::filesystem;

namespace {

std::string cli() {
    const char* p = std::getenv("BLM_CLI");
    REQUIRE_MESSAGE(p != nullptr, "BLM_CLI must point at the blm binary");
    return p;
}

fs::path workdir() {
    static fs::path dir = [] {
        auto d = fs::temp_directory_path() / "blm_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    std::string cmd = "BLM_LOG=quiet " + cli() + " " + args + " >" +
                      (workdir() / "stdout.txt").string() + " 2>" +
                      (workdir() / "stderr.txt").string();
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("cli pipeline end to end") {
    auto dir = workdir();

    // Usage errors exit 1.
    CHECK(run("") == 1);
    CHECK(run("no-such-command") == 1);
    CHECK(run("train-bpe --corpus missing.txt") == 1);  // missing required opts

    // Data errors exit 2.
    CHECK(run("train-bpe --corpus " + (dir / "missing.txt").string() +
              " --vocab-size 300 --out " + (dir / "x").string()) == 2);

    // prepare-corpus
    auto raw_dir = dir / "raw";
    fs::create_directories(raw_dir);
    write_file(raw_dir / "a.txt",
               "salam dunya yahan hai. @spam http://x.yz kya haal hai aaj?\n"
               "mausam acha hai aaj. chalo bahar chalte hain abhi.");
    write_file(raw_dir / "b.txt",
               "kitab parhna acha hai. likhna bhi zaroori hai yahan.\n"
               "kaam khatam karo jaldi. phir aram karo sab log.");
    auto corpus_path = dir / "corpus.txt";
    CHECK(run("prepare-corpus --in " + raw_dir.string() + " --out " +
              corpus_path.string() + " --valid-frac 0.25 --seed 3") == 0);
    CHECK(fs::exists(corpus_path));
    CHECK(fs::exists(dir / "corpus.txt.valid"));
    CHECK(fs::exists(dir / "corpus.txt.manifest.json"));
    auto prepared = corpus::load_corpus(corpus_path.string());
    CHECK(prepared.stats().sentence_count > 0);
    CHECK(read_file(corpus_path).find("@spam") == std::string::npos);

    // train-bpe on two corpora (second shares some words with the first).
    corpus::Corpus other;
    other.documents.push_back({{"kitab parhna zaroori hai", "naya safar shuru",
                                "safar lamba hai dosto", "kitab acha dost hai"}});
    other.documents.push_back({{"dost ke saath chalo", "naya din naya kaam",
                                "kaam acha hai aaj", "dosto ke liye likhna"}});
    auto other_path = dir / "other.txt";
    corpus::save_corpus(other, other_path.string());

    CHECK(run("train-bpe --corpus " + corpus_path.string() +
              " --vocab-size 300 --out " + (dir / "hi").string()) == 0);
    CHECK(run("train-bpe --corpus " + other_path.string() +
              " --vocab-size 320 --out " + (dir / "lo").string()) == 0);
    CHECK(fs::exists(dir / "hi.vocab.txt"));
    CHECK(fs::exists(dir / "hi.merges.txt"));
    CHECK(fs::exists(dir / "lo.manifest.json"));

    // augment-vocab
    CHECK(run("augment-vocab --base " + (dir / "hi.vocab.txt").string() +
              " --new " + (dir / "lo.vocab.txt").string() + " --out " +
              (dir / "z.vocab.txt").string() + " --map " +
              (dir / "z.map.tsv").string()) == 0);
    CHECK(fs::exists(dir / "z.vocab.txt"));
    CHECK(read_file(dir / "z.map.tsv").rfind("token\tid\torigin", 0) == 0);

    // pretrain from scratch (tiny, a handful of steps)
    auto ckpt = dir / "base.blm";
    CHECK(run("pretrain --regime from-scratch --corpus " + corpus_path.string() +
              " --vocab " + (dir / "hi.vocab.txt").string() + " --merges " +
              (dir / "hi.merges.txt").string() + " --out " + ckpt.string() +
              " --steps 4 --batch-size 2 --seq-len 24 --layers 1 --hidden 32" +
              " --heads 2 --max-seq-len 24 --dropout 0 --objective mlm+nsp" +
              " --lr 1e-3 --seed 5 --eval-every 2") == 0);
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(dir / "base.blm.metrics.jsonl"));
    {
        std::string head = read_file(ckpt).substr(0, 4);
        CHECK(head == "BLM1");
    }

    // from-scratch with --base must be rejected as a data/config error.
    CHECK(run("pretrain --regime from-scratch --corpus " + corpus_path.string() +
              " --vocab " + (dir / "hi.vocab.txt").string() + " --merges " +
              (dir / "hi.merges.txt").string() + " --out " +
              (dir / "no.blm").string() + " --base " + ckpt.string() +
              " --steps 2 --batch-size 2 --seq-len 24") == 2);

    // bilingual continuation through the augmented vocabulary
    auto ckpt_bi = dir / "bi.blm";
    CHECK(run("pretrain --regime bilingual --corpus " + other_path.string() +
              " --vocab " + (dir / "z.vocab.txt").string() + " --merges " +
              (dir / "lo.merges.txt").string() + " --base " + ckpt.string() +
              " --map " + (dir / "z.map.tsv").string() + " --out " +
              ckpt_bi.string() +
              " --steps 4 --batch-size 2 --seq-len 24 --objective mlm+nsp" +
              " --lr 1e-3 --seed 5 --eval-every 2") == 0);
    CHECK(fs::exists(ckpt_bi));

    // evaluate both checkpoints
    CHECK(run("evaluate --ckpt " + ckpt.string() + " --corpus " +
              corpus_path.string() + " --vocab " + (dir / "hi.vocab.txt").string() +
              " --merges " + (dir / "hi.merges.txt").string() + " --out " +
              (dir / "scratch.json").string() + " --seq-len 24 --batch-size 2" +
              " --seed 1") == 0);
    CHECK(run("evaluate --ckpt " + ckpt_bi.string() + " --corpus " +
              other_path.string() + " --vocab " + (dir / "z.vocab.txt").string() +
              " --merges " + (dir / "lo.merges.txt").string() + " --out " +
              (dir / "bi.json").string() + " --seq-len 24 --batch-size 2" +
              " --seed 1") == 0);
    auto rep = evaluation::EvalReport::from_json(read_file(dir / "scratch.json"));
    CHECK(rep.masked_token_count > 0);

    // mismatched tokenizer is a data error
    CHECK(run("evaluate --ckpt " + ckpt.string() + " --corpus " +
              corpus_path.string() + " --vocab " + (dir / "z.vocab.txt").string() +
              " --merges " + (dir / "lo.merges.txt").string() + " --out " +
              (dir / "bad.json").string()) == 2);
    CHECK(read_file(dir / "stderr.txt").find("vocab/checkpoint mismatch") !=
          std::string::npos);

    // compare
    CHECK(run("compare --report scratch=" + (dir / "scratch.json").string() +
              " --report bilingual=" + (dir / "bi.json").string() + " --out " +
              (dir / "cmp").string()) == 0);
    CHECK(fs::exists(dir / "cmp.txt"));
    CHECK(fs::exists(dir / "cmp.json"));
    auto table = read_file(dir / "cmp.txt");
    CHECK(table.find("mlm_accuracy") != std::string::npos);
    CHECK(table.find("scratch") != std::string::npos);

    // determinism: re-running pretrain with the same seed reproduces the
    // metrics log byte for byte
    auto ckpt2 = dir / "base2.blm";
    CHECK(run("pretrain --regime from-scratch --corpus " + corpus_path.string() +
              " --vocab " + (dir / "hi.vocab.txt").string() + " --merges " +
              (dir / "hi.merges.txt").string() + " --out " + ckpt2.string() +
              " --steps 4 --batch-size 2 --seq-len 24 --layers 1 --hidden 32" +
              " --heads 2 --max-seq-len 24 --dropout 0 --objective mlm+nsp" +
              " --lr 1e-3 --seed 5 --eval-every 2") == 0);
    CHECK(read_file(dir / "base.blm.metrics.jsonl") ==
          read_file(dir / "base2.blm.metrics.jsonl"));
    CHECK(read_file(ckpt) == read_file(ckpt2));
}
