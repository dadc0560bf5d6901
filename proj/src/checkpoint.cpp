#include "rlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace rlab {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'L', 'A', 'B', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw EncoderError("checkpoint " + path.string() + ": truncated header");
    }
    return value;
}

}  // namespace

nlohmann::json encoder_config_to_json(const EncoderConfig& c) {
    nlohmann::json j = {{"vocab_size", c.vocab_size},
                        {"d_model", c.d_model},
                        {"d_intermediate", c.d_intermediate}};
    if (c.moe) {
        j["moe"] = {{"num_experts", c.moe->num_experts},
                    {"experts_per_token", c.moe->experts_per_token}};
    } else {
        j["moe"] = nullptr;
    }
    return j;
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.d_model = j.value("d_model", c.d_model);
    c.d_intermediate = j.value("d_intermediate", c.d_intermediate);
    if (j.contains("moe") && !j.at("moe").is_null()) {
        MoEConfig m;
        m.num_experts = j.at("moe").value("num_experts", m.num_experts);
        m.experts_per_token = j.at("moe").value("experts_per_token", m.experts_per_token);
        c.moe = m;
    }
    c.validate();
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const EncoderConfig& config,
                     const EncoderParams& params) {
    validate_params(params, config);
    nlohmann::json tensors = nlohmann::json::array();
    std::uint64_t offset = 0;
    params.for_each_tensor([&](const std::string& name, TensorKind, std::span<const double> t) {
        tensors.push_back({{"name", name}, {"length", t.size()}, {"offset", offset}});
        offset += t.size() * sizeof(double);
    });
    const std::string header =
        nlohmann::json{{"config", encoder_config_to_json(config)}, {"tensors", tensors}}.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw EncoderError("cannot open checkpoint for writing: " + path.string());
    }
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint64_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    params.for_each_tensor([&](const std::string&, TensorKind, std::span<const double> t) {
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    });
    if (!out) {
        throw EncoderError("failed writing checkpoint: " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw EncoderError("cannot open checkpoint: " + path.string());
    }
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw EncoderError("checkpoint " + path.string() + ": bad magic");
    }
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kVersion) {
        throw EncoderError("checkpoint " + path.string() + ": unsupported version " +
                           std::to_string(version));
    }
    const auto header_len = read_pod<std::uint64_t>(in, path);
    std::string header(header_len, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) {
        throw EncoderError("checkpoint " + path.string() + ": truncated header");
    }
    const auto j = nlohmann::json::parse(header);

    Checkpoint ck;
    ck.config = encoder_config_from_json(j.at("config"));
    // Shapes come from the config; the header only names tensors.
    ck.params = init_params(ck.config, 0);
    const auto& listed = j.at("tensors");
    std::size_t index = 0;
    ck.params.for_each_tensor([&](const std::string& name, TensorKind, std::span<double> t) {
        if (index >= listed.size() || listed[index].at("name") != name ||
            listed[index].at("length").get<std::size_t>() != t.size()) {
            throw EncoderError("checkpoint " + path.string() + ": tensor table mismatch at " + name);
        }
        if (!in.read(reinterpret_cast<char*>(t.data()),
                     static_cast<std::streamsize>(t.size() * sizeof(double)))) {
            throw EncoderError("checkpoint " + path.string() + ": truncated tensor " + name);
        }
        ++index;
    });
    if (index != listed.size()) {
        throw EncoderError("checkpoint " + path.string() + ": unexpected extra tensors");
    }
    validate_params(ck.params, ck.config);
    return ck;
}

}  // namespace rlab
