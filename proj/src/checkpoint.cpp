#include "blm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace blm::model {

namespace {

constexpr char kMagic[4] = {'B', 'L', 'M', '1'};

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"layers", c.layers},
            {"hidden", c.hidden},
            {"heads", c.heads},
            {"max_seq_len", c.max_seq_len},
            {"vocab_size", c.vocab_size},
            {"ffn_multiplier", c.ffn_multiplier},
            {"dropout_rate", c.dropout_rate}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.layers = j.at("layers").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.heads = j.at("heads").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.ffn_multiplier = j.at("ffn_multiplier").get<int>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    return c;
}

void write_u32_le(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("truncated checkpoint header");
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
           (uint32_t(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const ModelConfig& config) {
    nlohmann::json manifest = nlohmann::json::array();
    uint64_t offset = 0;
    params.visit([&](const std::string& name, const Matrix& m) {
        manifest.push_back({{"name", name},
                            {"shape", {m.rows(), m.cols()}},
                            {"offset", offset}});
        offset += static_cast<uint64_t>(m.size()) * sizeof(float);
    });
    nlohmann::json header = {{"config", config_to_json(config)},
                             {"tensors", manifest}};
    std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(kMagic, 4);
    write_u32_le(out, static_cast<uint32_t>(header_str.size()));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    params.visit([&](const std::string&, const Matrix& m) {
        // Row-major storage; write row by row as float32 LE.
        std::vector<float> buf(static_cast<size_t>(m.size()));
        size_t k = 0;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                buf[k++] = static_cast<float>(m(i, j));
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    });
    if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    uint32_t header_len = read_u32_le(in);
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), header_len);
    if (!in) throw std::runtime_error("truncated checkpoint header");
    nlohmann::json header = nlohmann::json::parse(header_str);

    Checkpoint ckpt;
    ckpt.config = config_from_json(header.at("config"));
    ckpt.config.validate();
    // init_params gives the tensors the right shapes; contents are replaced.
    ckpt.params = init_params(ckpt.config, 0);

    size_t idx = 0;
    const auto& manifest = header.at("tensors");
    std::streampos data_start = in.tellg();
    ckpt.params.visit([&](const std::string& name, Matrix& m) {
        if (idx >= manifest.size())
            throw std::runtime_error("checkpoint manifest too short");
        const auto& entry = manifest[idx++];
        if (entry.at("name").get<std::string>() != name)
            throw std::runtime_error("checkpoint tensor order mismatch at " + name);
        auto shape = entry.at("shape");
        if (shape[0].get<Eigen::Index>() != m.rows() ||
            shape[1].get<Eigen::Index>() != m.cols())
            throw std::runtime_error("checkpoint tensor shape mismatch at " + name);
        in.seekg(data_start + static_cast<std::streamoff>(
                                  entry.at("offset").get<uint64_t>()));
        std::vector<float> buf(static_cast<size_t>(m.size()));
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in) throw std::runtime_error("truncated tensor data at " + name);
        size_t k = 0;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = static_cast<double>(buf[k++]);
    });
    if (idx != manifest.size())
        throw std::runtime_error("checkpoint manifest has extra tensors");
    return ckpt;
}

}  // namespace blm::model
