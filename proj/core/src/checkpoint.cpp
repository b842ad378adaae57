#include "gazesearch/checkpoint.hpp"

#include "gazesearch/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <vector>

namespace gazesearch::checkpoint {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'G', 'Z', 'S', 'C', 'K', 'P', 'T', '1'};

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

class Writer {
public:
    explicit Writer(std::ofstream& out) : out_(out) {}
    template <class T>
    void put(T v) {
        v = to_little(v);
        out_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void bytes(const std::string& s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }

private:
    std::ofstream& out_;
};

class Reader {
public:
    Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
    template <class T>
    T get() {
        T v;
        if (!in_.read(reinterpret_cast<char*>(&v), sizeof v)) fail("truncated file");
        return to_little(v);
    }
    std::string bytes(std::uint32_t n) {
        std::string s(n, '\0');
        if (!in_.read(s.data(), n)) fail("truncated file");
        return s;
    }
    [[noreturn]] void fail(const std::string& what) const { throw DataError(path_ + ": " + what); }

private:
    std::ifstream& in_;
    std::string path_;
};

}  // namespace

std::string config_to_json(const model::ModelConfig& c) {
    json j = {
        {"image_size", c.image_size},
        {"embed_dim", c.embed_dim},
        {"decoder_layers", c.decoder_layers},
        {"embed_layers", c.embed_layers},
        {"num_queries", c.num_queries},
        {"heads", c.heads},
        {"max_length", c.max_length},
        {"mlp_layers", c.mlp_layers},
        {"focal_alpha", c.focal_alpha},
        {"focal_gamma", c.focal_gamma},
        {"heatmap_sigma", c.heatmap_sigma},
        {"reference_map", model::to_string(c.reference_map)},
        {"indexing_map", model::to_string(c.indexing_map)},
        {"termination_threshold", c.termination_threshold},
        {"positional_heatmap", c.positional_heatmap},
        {"center_duration", c.center_duration},
        {"learning_rate", c.learning_rate},
        {"weight_decay", c.weight_decay},
        {"seed", c.seed},
    };
    return j.dump(2);
}

model::ModelConfig config_from_json(const std::string& text) {
    model::ModelConfig c;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw DataError("model config must be a JSON object");
        for (const auto& [key, v] : j.items()) {
            if (key == "image_size") c.image_size = v.get<int>();
            else if (key == "embed_dim") c.embed_dim = v.get<int>();
            else if (key == "decoder_layers") c.decoder_layers = v.get<int>();
            else if (key == "embed_layers") c.embed_layers = v.get<int>();
            else if (key == "num_queries") c.num_queries = v.get<int>();
            else if (key == "heads") c.heads = v.get<int>();
            else if (key == "max_length") c.max_length = v.get<int>();
            else if (key == "mlp_layers") c.mlp_layers = v.get<int>();
            else if (key == "focal_alpha") c.focal_alpha = v.get<double>();
            else if (key == "focal_gamma") c.focal_gamma = v.get<double>();
            else if (key == "heatmap_sigma") c.heatmap_sigma = v.get<double>();
            else if (key == "reference_map") c.reference_map = model::map_choice_from_string(v.get<std::string>());
            else if (key == "indexing_map") c.indexing_map = model::map_choice_from_string(v.get<std::string>());
            else if (key == "termination_threshold") c.termination_threshold = v.get<double>();
            else if (key == "positional_heatmap") c.positional_heatmap = v.get<bool>();
            else if (key == "center_duration") c.center_duration = v.get<double>();
            else if (key == "learning_rate") c.learning_rate = v.get<double>();
            else if (key == "weight_decay") c.weight_decay = v.get<double>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else throw DataError("unknown model config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("model config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("model config: ") + e.what());
    }
    return c;
}

void save(const std::filesystem::path& path, const model::ChestSearch& model, long step) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    Writer w(out);
    out.write(kMagic, sizeof kMagic);

    json manifest = {{"format", 1},
                     {"config", json::parse(config_to_json(model.config()))},
                     {"seed", model.config().seed},
                     {"step", step}};
    const std::string m = manifest.dump();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.size()));
    w.bytes(m);

    const auto& params = model.params();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        w.put<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
        w.bytes(p.name);
        w.put<std::uint32_t>(2);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(p.value.rows()));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(p.value.cols()));
        for (Eigen::Index k = 0; k < p.value.size(); ++k) w.put<float>(static_cast<float>(p.value.data()[k]));
    }
    if (!out) throw DataError("write failed for " + path.string());
}

Loaded load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    Reader r(in, path.string());
    if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) r.fail("not a checkpoint (bad magic)");

    Manifest manifest;
    try {
        const json j = json::parse(r.bytes(r.get<std::uint32_t>()));
        if (j.at("format").get<int>() != 1) r.fail("unsupported checkpoint format");
        manifest.config = config_from_json(j.at("config").dump());
        manifest.seed = j.at("seed").get<std::uint64_t>();
        manifest.step = j.at("step").get<long>();
    } catch (const json::exception& e) {
        r.fail(std::string("manifest: ") + e.what());
    }
    try {
        model::check_config(manifest.config);
    } catch (const std::invalid_argument& e) {
        r.fail(std::string("manifest config: ") + e.what());
    }

    Loaded loaded{manifest, model::ChestSearch(manifest.config)};
    auto& params = loaded.model.params();
    const auto count = r.get<std::uint32_t>();
    std::set<std::string> seen;
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::string name = r.bytes(r.get<std::uint32_t>());
        auto* p = params.find(name);
        if (!p) r.fail("unknown tensor '" + name + "'");
        if (!seen.insert(name).second) r.fail("duplicate tensor '" + name + "'");
        if (r.get<std::uint32_t>() != 2) r.fail("tensor '" + name + "' must be 2-D");
        const auto rows = r.get<std::uint32_t>();
        const auto cols = r.get<std::uint32_t>();
        if (rows != p->value.rows() || cols != p->value.cols()) {
            r.fail("tensor '" + name + "' has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                   ", config expects " + std::to_string(p->value.rows()) + "x" +
                   std::to_string(p->value.cols()));
        }
        for (Eigen::Index k = 0; k < p->value.size(); ++k) p->value.data()[k] = r.get<float>();
    }
    if (seen.size() != params.size()) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!seen.count(params[i].name)) r.fail("missing tensor '" + params[i].name + "'");
        }
    }
    return loaded;
}

}  // namespace gazesearch::checkpoint
