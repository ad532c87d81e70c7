#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "blm/checkpoint.hpp"

using namespace blm;

namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string temp_path(const std::string& name) {
    auto dir = fs::temp_directory_path() / "blm_ckpt";
    fs::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST_CASE("checkpoint container starts with magic and header length") {
    auto config = model::ModelConfig::tiny_preset(64, 16);
    auto params = model::init_params(config, 1);
    auto path = temp_path("magic.blm");
    model::save_checkpoint(path, params, config);

    std::string bytes = read_file(path);
    REQUIRE(bytes.size() > 8);
    CHECK(bytes.compare(0, 4, "BLM1") == 0);
    uint32_t header_len;
    std::memcpy(&header_len, bytes.data() + 4, 4);
    REQUIRE(8 + header_len < bytes.size());
    std::string header = bytes.substr(8, header_len);
    CHECK(header.find("\"tensors\"") != std::string::npos);
    CHECK(header.find("token_embeddings") != std::string::npos);
    // Payload is float32: total size minus prologue is a multiple of 4.
    CHECK((bytes.size() - 8 - header_len) % 4 == 0);
    CHECK((bytes.size() - 8 - header_len) / 4 ==
          static_cast<size_t>(model::param_count(config)));
}

TEST_CASE("round trip preserves config and quantizes once") {
    auto config = model::ModelConfig::tiny_preset(48, 12);
    config.dropout_rate = 0.07;
    auto params = model::init_params(config, 9);
    auto p1 = temp_path("rt1.blm");
    model::save_checkpoint(p1, params, config);
    auto loaded = model::load_checkpoint(p1);

    CHECK(loaded.config.layers == config.layers);
    CHECK(loaded.config.hidden == config.hidden);
    CHECK(loaded.config.heads == config.heads);
    CHECK(loaded.config.vocab_size == config.vocab_size);
    CHECK(loaded.config.max_seq_len == config.max_seq_len);
    CHECK(loaded.config.dropout_rate == config.dropout_rate);

    // Values come back as float32-rounded doubles.
    for (Eigen::Index i = 0; i < params.token_embeddings.size(); ++i) {
        double expect =
            static_cast<double>(static_cast<float>(params.token_embeddings.data()[i]));
        CHECK(loaded.params.token_embeddings.data()[i] == expect);
    }

    // A second save/load is a fixed point: byte-identical file.
    auto p2 = temp_path("rt2.blm");
    model::save_checkpoint(p2, loaded.params, loaded.config);
    CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("identical params produce byte-identical checkpoints") {
    auto config = model::ModelConfig::tiny_preset(32, 8);
    auto a = temp_path("det_a.blm");
    auto b = temp_path("det_b.blm");
    model::save_checkpoint(a, model::init_params(config, 77), config);
    model::save_checkpoint(b, model::init_params(config, 77), config);
    CHECK(read_file(a) == read_file(b));
}

TEST_CASE("corrupt files are rejected") {
    auto path = temp_path("bad.blm");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS(model::load_checkpoint(path));

    // Truncated tensor data.
    auto config = model::ModelConfig::tiny_preset(32, 8);
    auto good = temp_path("good.blm");
    model::save_checkpoint(good, model::init_params(config, 1), config);
    std::string bytes = read_file(good);
    auto trunc = temp_path("trunc.blm");
    {
        std::ofstream out(trunc, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 100));
    }
    CHECK_THROWS(model::load_checkpoint(trunc));

    CHECK_THROWS(model::load_checkpoint(temp_path("missing.blm")));
}
