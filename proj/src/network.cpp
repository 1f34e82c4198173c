#include "ecgattr/network.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include <json.hpp>

namespace ecgattr {

using nlohmann::json;

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv1d: return "conv1d";
        case LayerKind::BatchNorm1d: return "batchnorm1d";
        case LayerKind::Relu: return "relu";
        case LayerKind::AddResidual: return "add_residual";
        case LayerKind::GlobalAvgPool: return "global_avg_pool";
        case LayerKind::Dense: return "dense";
        case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
    static const std::map<std::string, LayerKind> table = {
        {"conv1d", LayerKind::Conv1d},
        {"batchnorm1d", LayerKind::BatchNorm1d},
        {"relu", LayerKind::Relu},
        {"add_residual", LayerKind::AddResidual},
        {"global_avg_pool", LayerKind::GlobalAvgPool},
        {"dense", LayerKind::Dense},
        {"softmax", LayerKind::Softmax},
    };
    auto it = table.find(name);
    if (it == table.end()) throw ConfigError("unknown layer kind: " + name);
    return it->second;
}

namespace {

[[noreturn]] void layer_error(int index, const LayerSpec& spec, const std::string& what) {
    throw ConfigError("layer " + std::to_string(index) + " (" + layer_kind_name(spec.kind) +
                      "): " + what);
}

int conv_out_len(const LayerSpec& s, int li) {
    return (li + 2 * s.pad - s.kernel) / s.stride + 1;
}

}  // namespace

std::pair<int, int> value_shape(const Network& net, int value_index) {
    int c = net.input_channels;
    int l = net.input_length;
    bool pooled = false;
    if (value_index < 0 || value_index > int(net.layers.size()))
        throw ConfigError("value index out of range: " + std::to_string(value_index));
    for (int i = 0; i < value_index; ++i) {
        const LayerSpec& s = net.layers[i];
        switch (s.kind) {
            case LayerKind::Conv1d:
                c = s.out_channels;
                l = conv_out_len(s, l);
                break;
            case LayerKind::BatchNorm1d:
            case LayerKind::Relu:
            case LayerKind::Softmax:
                break;
            case LayerKind::AddResidual:
                break;
            case LayerKind::GlobalAvgPool:
                pooled = true;
                l = 1;
                break;
            case LayerKind::Dense:
                c = s.out_features;
                l = 1;
                pooled = true;
                break;
        }
    }
    (void)pooled;
    return {c, l};
}

void validate_network(const Network& net) {
    int c = net.input_channels;
    int l = net.input_length;
    if (c <= 0 || l <= 0) throw ConfigError("network: input shape not set");
    bool pooled = false;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& s = net.layers[i];
        const LayerParams& p = net.params[i];
        switch (s.kind) {
            case LayerKind::Conv1d: {
                if (pooled) layer_error(int(i), s, "conv after pooling");
                if (s.kernel <= 0 || s.kernel % 2 == 0)
                    layer_error(int(i), s, "kernel length must be odd and positive");
                if (s.stride == 1 && s.pad != (s.kernel - 1) / 2)
                    layer_error(int(i), s, "padding must preserve length at stride 1");
                if (s.in_channels != c)
                    layer_error(int(i), s,
                                "expected input channels " + std::to_string(s.in_channels) +
                                    ", got " + std::to_string(c));
                const size_t want_w = size_t(s.out_channels) * s.in_channels * s.kernel;
                if (p.w.numel() != want_w || p.b.numel() != size_t(s.out_channels))
                    layer_error(int(i), s, "parameter shape mismatch");
                c = s.out_channels;
                l = conv_out_len(s, l);
                if (l <= 0) layer_error(int(i), s, "output length is non-positive");
                break;
            }
            case LayerKind::BatchNorm1d: {
                if (pooled) layer_error(int(i), s, "batchnorm after pooling");
                if (s.channels != c)
                    layer_error(int(i), s,
                                "expected channels " + std::to_string(s.channels) + ", got " +
                                    std::to_string(c));
                if (p.gamma.numel() != size_t(c) || p.beta.numel() != size_t(c) ||
                    p.run_mean.numel() != size_t(c) || p.run_var.numel() != size_t(c))
                    layer_error(int(i), s, "parameter shape mismatch");
                break;
            }
            case LayerKind::Relu:
                break;
            case LayerKind::AddResidual: {
                if (pooled) layer_error(int(i), s, "residual add after pooling");
                if (s.skip_from < 0 || s.skip_from > int(i))
                    layer_error(int(i), s, "skip source must be an earlier value");
                auto [sc, sl] = value_shape(net, s.skip_from);
                const int adj_c = sc + s.skip_pad_channels;
                const int adj_l = (sl + s.skip_stride - 1) / s.skip_stride;
                if (adj_c != c || adj_l != l)
                    layer_error(int(i), s,
                                "skip shape [" + std::to_string(adj_c) + "," +
                                    std::to_string(adj_l) + "] does not match main path [" +
                                    std::to_string(c) + "," + std::to_string(l) + "]");
                break;
            }
            case LayerKind::GlobalAvgPool:
                if (pooled) layer_error(int(i), s, "duplicate pooling");
                pooled = true;
                l = 1;
                break;
            case LayerKind::Dense: {
                // unpooled input is consumed flattened
                const int feats = pooled ? c : c * l;
                if (s.in_features != feats)
                    layer_error(int(i), s,
                                "expected input features " + std::to_string(s.in_features) +
                                    ", got " + std::to_string(feats));
                if (p.w.numel() != size_t(s.out_features) * s.in_features ||
                    p.b.numel() != size_t(s.out_features))
                    layer_error(int(i), s, "parameter shape mismatch");
                c = s.out_features;
                l = 1;
                pooled = true;
                break;
            }
            case LayerKind::Softmax:
                if (i + 1 != net.layers.size())
                    layer_error(int(i), s, "softmax must be the final layer");
                break;
        }
    }
    int softmax_count = 0;
    for (const LayerSpec& s : net.layers)
        if (s.kind == LayerKind::Softmax) ++softmax_count;
    if (!net.layers.empty() && softmax_count > 1)
        throw ConfigError("network: more than one softmax head");
}

int count_weighted_layers(const Network& net) {
    int n = 0;
    for (const LayerSpec& s : net.layers)
        if (s.kind == LayerKind::Conv1d || s.kind == LayerKind::Dense) ++n;
    return n;
}

Network fold_batchnorm(const Network& net) {
    Network out;
    out.class_names = net.class_names;
    out.input_channels = net.input_channels;
    out.input_length = net.input_length;
    out.num_classes = net.num_classes;

    // Maps old value indices to folded ones so skip_from stays correct.
    std::vector<int> value_map(net.layers.size() + 1, 0);
    value_map[0] = 0;

    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& s = net.layers[i];
        if (s.kind == LayerKind::BatchNorm1d) {
            if (out.layers.empty() || out.layers.back().kind != LayerKind::Conv1d)
                throw ConfigError("fold_batchnorm: batchnorm at layer " + std::to_string(i) +
                                  " is not preceded by a conv");
            const LayerParams& bn = net.params[i];
            LayerParams& conv = out.params.back();
            const LayerSpec& cs = out.layers.back();
            for (int co = 0; co < cs.out_channels; ++co) {
                const float inv = 1.0f / std::sqrt(bn.run_var.data[co] + 1e-5f);
                const float g = bn.gamma.data[co] * inv;
                float* wrow = conv.w.data.data() + size_t(co) * cs.in_channels * cs.kernel;
                for (int j = 0; j < cs.in_channels * cs.kernel; ++j) wrow[j] *= g;
                conv.b.data[co] =
                    (conv.b.data[co] - bn.run_mean.data[co]) * g + bn.beta.data[co];
            }
            // the bn output value collapses onto the conv output value
            value_map[i + 1] = int(out.layers.size());
            continue;
        }
        LayerSpec copy = s;
        if (s.kind == LayerKind::AddResidual) copy.skip_from = value_map[s.skip_from];
        out.layers.push_back(copy);
        out.params.push_back(net.params[i]);
        value_map[i + 1] = int(out.layers.size());
    }
    validate_network(out);
    return out;
}

namespace {

std::string blob_name(size_t index, const char* tag) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%04zu_%s.f32le", index, tag);
    return buf;
}

}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    json manifest;
    manifest["format_version"] = 1;
    manifest["class_names"] = net.class_names;
    manifest["input_channels"] = net.input_channels;
    manifest["input_length"] = net.input_length;
    manifest["num_classes"] = net.num_classes;
    json layers = json::array();
    size_t blob_idx = 0;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& s = net.layers[i];
        const LayerParams& p = net.params[i];
        json jl;
        jl["kind"] = layer_kind_name(s.kind);
        auto dump = [&](const Tensor& t, const char* tag) {
            const std::string name = blob_name(blob_idx++, tag);
            write_f32_blob(dir / name, t.data);
            jl["params"][tag] = name;
        };
        switch (s.kind) {
            case LayerKind::Conv1d:
                jl["in_channels"] = s.in_channels;
                jl["out_channels"] = s.out_channels;
                jl["kernel"] = s.kernel;
                jl["stride"] = s.stride;
                jl["pad"] = s.pad;
                dump(p.w, "w");
                dump(p.b, "b");
                break;
            case LayerKind::BatchNorm1d:
                jl["channels"] = s.channels;
                dump(p.gamma, "gamma");
                dump(p.beta, "beta");
                dump(p.run_mean, "running_mean");
                dump(p.run_var, "running_var");
                break;
            case LayerKind::Dense:
                jl["in_features"] = s.in_features;
                jl["out_features"] = s.out_features;
                dump(p.w, "w");
                dump(p.b, "b");
                break;
            case LayerKind::AddResidual:
                jl["skip_from"] = s.skip_from;
                jl["skip_stride"] = s.skip_stride;
                jl["skip_pad_channels"] = s.skip_pad_channels;
                break;
            default:
                break;
        }
        layers.push_back(jl);
    }
    manifest["layers"] = layers;
    write_text_file(dir / "checkpoint.json", manifest.dump(2) + "\n");
}

Network load_checkpoint(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = dir / "checkpoint.json";
    if (!fs::exists(manifest_path)) throw IoError("missing manifest: " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }

    Network net;
    try {
        net.class_names = manifest.at("class_names").get<std::vector<std::string>>();
        net.input_channels = manifest.at("input_channels").get<int>();
        net.input_length = manifest.at("input_length").get<int>();
        net.num_classes = manifest.at("num_classes").get<int>();

        auto load_blob = [&](const json& jl, const char* tag, std::vector<int> shape) {
            const std::string name = jl.at("params").at(tag).get<std::string>();
            const fs::path path = dir / name;
            if (!fs::exists(path)) throw IoError("checkpoint references missing blob: " + name);
            std::vector<float> data = read_f32_blob(path);
            const size_t want = Tensor::count(shape);
            if (data.size() != want)
                throw IoError("parameter blob " + name + ": expected " + std::to_string(want) +
                              " elements, got " + std::to_string(data.size()));
            return Tensor(std::move(shape), std::move(data));
        };

        for (const json& jl : manifest.at("layers")) {
            LayerSpec s;
            LayerParams p;
            s.kind = layer_kind_from_name(jl.at("kind").get<std::string>());
            switch (s.kind) {
                case LayerKind::Conv1d:
                    s.in_channels = jl.at("in_channels").get<int>();
                    s.out_channels = jl.at("out_channels").get<int>();
                    s.kernel = jl.at("kernel").get<int>();
                    s.stride = jl.at("stride").get<int>();
                    s.pad = jl.at("pad").get<int>();
                    p.w = load_blob(jl, "w", {s.out_channels, s.in_channels, s.kernel});
                    p.b = load_blob(jl, "b", {s.out_channels});
                    break;
                case LayerKind::BatchNorm1d:
                    s.channels = jl.at("channels").get<int>();
                    p.gamma = load_blob(jl, "gamma", {s.channels});
                    p.beta = load_blob(jl, "beta", {s.channels});
                    p.run_mean = load_blob(jl, "running_mean", {s.channels});
                    p.run_var = load_blob(jl, "running_var", {s.channels});
                    break;
                case LayerKind::Dense:
                    s.in_features = jl.at("in_features").get<int>();
                    s.out_features = jl.at("out_features").get<int>();
                    p.w = load_blob(jl, "w", {s.out_features, s.in_features});
                    p.b = load_blob(jl, "b", {s.out_features});
                    break;
                case LayerKind::AddResidual:
                    s.skip_from = jl.at("skip_from").get<int>();
                    s.skip_stride = jl.at("skip_stride").get<int>();
                    s.skip_pad_channels = jl.at("skip_pad_channels").get<int>();
                    break;
                default:
                    break;
            }
            net.layers.push_back(s);
            net.params.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    validate_network(net);
    return net;
}

}  // namespace ecgattr
