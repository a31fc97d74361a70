#include "jlvae/checkpoint.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "jlvae/csv.hpp"
#include "jlvae/error.hpp"

namespace jlvae {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kFloatEncoding = "decimal-17sig";

json doubles_to_json(std::span<const double> values) {
    json arr = json::array();
    for (const double v : values) arr.push_back(format_double(v));
    return arr;
}

std::vector<double> doubles_from_json(const json& arr) {
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& item : arr) {
        const std::string s = item.get<std::string>();
        char* endp = nullptr;
        const double v = std::strtod(s.c_str(), &endp);
        if (endp == s.c_str() || *endp != '\0') {
            throw IoError("checkpoint: bad float literal '" + s + "'");
        }
        out.push_back(v);
    }
    return out;
}

json sizes_to_json(const std::vector<std::size_t>& v) {
    json arr = json::array();
    for (auto x : v) arr.push_back(x);
    return arr;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) {
    json j;
    j["dim_x"] = config.dim_x;
    j["dim_c"] = config.dim_c;
    j["latent_x"] = config.latent_x;
    j["latent_c"] = config.latent_c;
    j["recognizer_x_hidden"] = sizes_to_json(config.recognizer_x_hidden);
    j["recognizer_c_hidden"] = sizes_to_json(config.recognizer_c_hidden);
    j["generator_x_hidden"] = sizes_to_json(config.generator_x_hidden);
    j["generator_c_hidden"] = sizes_to_json(config.generator_c_hidden);
    j["l1_lambda"] = config.l1_lambda;
    j["mc_samples_train"] = config.mc_samples_train;
    j["recon_loss"] = recon_loss_name(config.recon_loss);
    return j.dump();
}

namespace {

ModelConfig model_config_from(const json& j) {
    ModelConfig c;
    c.dim_x = j.at("dim_x").get<std::size_t>();
    c.dim_c = j.at("dim_c").get<std::size_t>();
    c.latent_x = j.at("latent_x").get<std::size_t>();
    c.latent_c = j.at("latent_c").get<std::size_t>();
    c.recognizer_x_hidden = j.at("recognizer_x_hidden").get<std::vector<std::size_t>>();
    c.recognizer_c_hidden = j.at("recognizer_c_hidden").get<std::vector<std::size_t>>();
    c.generator_x_hidden = j.at("generator_x_hidden").get<std::vector<std::size_t>>();
    c.generator_c_hidden = j.at("generator_c_hidden").get<std::vector<std::size_t>>();
    c.l1_lambda = j.at("l1_lambda").get<double>();
    c.mc_samples_train = j.at("mc_samples_train").get<std::size_t>();
    c.recon_loss = recon_loss_from_name(j.at("recon_loss").get<std::string>());
    c.validate();
    return c;
}

}  // namespace

ModelConfig model_config_from_json(const std::string& text) {
    return model_config_from(json::parse(text));
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    json j;
    j["format_version"] = kFormatVersion;
    j["float_encoding"] = kFloatEncoding;
    j["model_config"] = json::parse(model_config_to_json(ckpt.config));
    j["preprocess_fingerprint"] = ckpt.preprocess_fingerprint;

    json mlps;
    for (std::size_t mi = 0; mi < 4; ++mi) {
        const Mlp& mlp = ckpt.params.mlp(mi);
        json layers = json::array();
        for (const auto& layer : mlp.layers) {
            json jl;
            jl["rows"] = layer.weights.rows();
            jl["cols"] = layer.weights.cols();
            jl["weights"] = doubles_to_json(layer.weights.data());
            jl["bias"] = doubles_to_json(layer.bias);
            jl["activation"] = activation_name(layer.activation);
            layers.push_back(std::move(jl));
        }
        mlps[kMlpNames[mi]] = std::move(layers);
    }
    j["mlps"] = std::move(mlps);
    return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.at("format_version").get<int>() != kFormatVersion) {
        throw IoError("checkpoint: unsupported format_version");
    }
    if (j.at("float_encoding").get<std::string>() != kFloatEncoding) {
        throw IoError("checkpoint: unsupported float_encoding");
    }
    Checkpoint ckpt;
    ckpt.config = model_config_from(j.at("model_config"));
    ckpt.preprocess_fingerprint = j.at("preprocess_fingerprint").get<std::string>();

    const json& mlps = j.at("mlps");
    for (std::size_t mi = 0; mi < 4; ++mi) {
        Mlp& mlp = ckpt.params.mlp(mi);
        for (const auto& jl : mlps.at(kMlpNames[mi])) {
            MlpLayer layer;
            const std::size_t rows = jl.at("rows").get<std::size_t>();
            const std::size_t cols = jl.at("cols").get<std::size_t>();
            layer.weights = Matrix(rows, cols, doubles_from_json(jl.at("weights")));
            layer.bias = doubles_from_json(jl.at("bias"));
            layer.activation = activation_from_name(jl.at("activation").get<std::string>());
            mlp.layers.push_back(std::move(layer));
        }
        mlp.validate();
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    write_file_atomic(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
    try {
        return checkpoint_from_json(read_file(path));
    } catch (const json::exception& e) {
        throw IoError("checkpoint '" + path + "': " + e.what());
    }
}

}  // namespace jlvae
