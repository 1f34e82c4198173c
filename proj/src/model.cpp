#include "ecgattr/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecgattr/engine.hpp"
#include "ecgattr/kernels.hpp"

namespace ecgattr::model {

NetworkConfig NetworkConfig::paper_preset() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::desk_preset() {
    NetworkConfig cfg;
    cfg.num_blocks = 3;
    return cfg;
}

NetworkConfig NetworkConfig::preset(const std::string& name) {
    if (name == "paper") return paper_preset();
    if (name == "desk") return desk_preset();
    throw ConfigError("unknown network preset: " + name);
}

std::vector<float> standardize(const std::vector<float>& signal) {
    if (signal.empty()) throw InputError("standardize: empty signal");
    if (signal.size() < 2) throw InputError("standardize: need at least 2 samples");
    const auto& K = kern::active();
    const double n = double(signal.size());
    const double mean = K.sum_f64(signal.data(), signal.size()) / n;
    const double sq = K.dot_f64(signal.data(), signal.data(), signal.size()) / n;
    const double var = std::max(0.0, sq - mean * mean);
    std::vector<float> out(signal.size());
    if (var < 1e-24) return out;  // constant input -> all zeros
    const float shift = float(mean);
    const float scale = float(1.0 / std::sqrt(var));
    for (size_t i = 0; i < signal.size(); ++i) out[i] = (signal[i] - shift) * scale;
    return out;
}

namespace {

Tensor uniform_tensor(std::vector<int> shape, float bound, Rng& rng) {
    Tensor t(std::move(shape));
    for (float& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

void push_conv(Network& net, int ci, int co, int k, int stride, Rng& rng) {
    LayerSpec s;
    s.kind = LayerKind::Conv1d;
    s.in_channels = ci;
    s.out_channels = co;
    s.kernel = k;
    s.stride = stride;
    s.pad = (k - 1) / 2;
    LayerParams p;
    const float bound = 1.0f / std::sqrt(float(ci * k));
    p.w = uniform_tensor({co, ci, k}, bound, rng);
    p.b = uniform_tensor({co}, bound, rng);
    net.layers.push_back(s);
    net.params.push_back(std::move(p));
}

void push_bn(Network& net, int channels) {
    LayerSpec s;
    s.kind = LayerKind::BatchNorm1d;
    s.channels = channels;
    LayerParams p;
    p.gamma = Tensor({channels});
    std::fill(p.gamma.data.begin(), p.gamma.data.end(), 1.0f);
    p.beta = Tensor({channels});
    p.run_mean = Tensor({channels});
    p.run_var = Tensor({channels});
    std::fill(p.run_var.data.begin(), p.run_var.data.end(), 1.0f);
    net.layers.push_back(s);
    net.params.push_back(std::move(p));
}

void push_simple(Network& net, LayerKind kind) {
    LayerSpec s;
    s.kind = kind;
    net.layers.push_back(s);
    net.params.emplace_back();
}

}  // namespace

Network build_network(const NetworkConfig& cfg, uint64_t seed) {
    if (cfg.kernel_length <= 0 || cfg.kernel_length % 2 == 0)
        throw ConfigError("build_network: kernel length must be odd");
    if (cfg.num_classes < 2) throw ConfigError("build_network: need at least 2 classes");
    Rng rng(Rng::derive(seed, 0xec6'1e7));

    Network net;
    net.class_names = {"normal", "PAC", "PVC"};
    net.class_names.resize(size_t(cfg.num_classes), "class");
    net.input_channels = 1;
    net.input_length = cfg.input_length;
    net.num_classes = cfg.num_classes;

    int ch = cfg.base_channels;
    push_conv(net, 1, ch, cfg.kernel_length, 1, rng);
    push_bn(net, ch);
    push_simple(net, LayerKind::Relu);

    for (int b = 0; b < cfg.num_blocks; ++b) {
        const bool down = b > 0 && cfg.downsample_every > 0 && b % cfg.downsample_every == 0;
        const int ci = ch;
        const int co = down ? ch * 2 : ch;
        const int stride = down ? 2 : 1;
        const int block_input = int(net.layers.size());  // value index of the block input

        push_conv(net, ci, co, cfg.kernel_length, stride, rng);
        push_bn(net, co);
        push_simple(net, LayerKind::Relu);
        push_conv(net, co, co, cfg.kernel_length, 1, rng);
        push_bn(net, co);

        LayerSpec add;
        add.kind = LayerKind::AddResidual;
        add.skip_from = block_input;
        add.skip_stride = stride;
        add.skip_pad_channels = co - ci;
        net.layers.push_back(add);
        net.params.emplace_back();

        push_simple(net, LayerKind::Relu);
        ch = co;
    }

    push_simple(net, LayerKind::GlobalAvgPool);
    {
        LayerSpec s;
        s.kind = LayerKind::Dense;
        s.in_features = ch;
        s.out_features = cfg.num_classes;
        LayerParams p;
        const float bound = 1.0f / std::sqrt(float(ch));
        p.w = uniform_tensor({cfg.num_classes, ch}, bound, rng);
        p.b = uniform_tensor({cfg.num_classes}, bound, rng);
        net.layers.push_back(s);
        net.params.push_back(std::move(p));
    }
    push_simple(net, LayerKind::Softmax);

    validate_network(net);
    return net;
}

namespace {

struct AdamSlot {
    std::vector<float> m, v;
};

void adam_step(std::vector<float>& param, const std::vector<float>& grad, AdamSlot& slot,
               const TrainConfig& cfg, int step) {
    if (slot.m.empty()) {
        slot.m.assign(param.size(), 0.0f);
        slot.v.assign(param.size(), 0.0f);
    }
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, step);
    const double bc2 = 1.0 - std::pow(b2, step);
    for (size_t i = 0; i < param.size(); ++i) {
        // weight decay folded into the gradient, classic Adam-with-L2
        const double g = double(grad[i]) + double(cfg.weight_decay) * double(param[i]);
        slot.m[i] = float(b1 * slot.m[i] + (1.0 - b1) * g);
        slot.v[i] = float(b2 * slot.v[i] + (1.0 - b2) * g * g);
        const double mhat = slot.m[i] / bc1;
        const double vhat = slot.v[i] / bc2;
        param[i] -= float(double(cfg.learning_rate) * mhat / (std::sqrt(vhat) + 1e-8));
    }
}

int label_index(data::BeatClass cls) { return int(cls); }

Tensor batch_tensor(const std::vector<std::vector<float>>& signals, const std::vector<int>& order,
                    size_t begin, size_t end, int length) {
    const int n = int(end - begin);
    Tensor x({n, 1, length});
    for (int i = 0; i < n; ++i)
        std::copy_n(signals[size_t(order[begin + size_t(i)])].data(), length,
                    x.data.data() + size_t(i) * length);
    return x;
}

double dataset_accuracy(Network& net, const std::vector<std::vector<float>>& signals,
                        const std::vector<int>& labels, int length) {
    size_t correct = 0;
    const size_t chunk = 64;
    std::vector<int> order(signals.size());
    std::iota(order.begin(), order.end(), 0);
    for (size_t b = 0; b < signals.size(); b += chunk) {
        const size_t e = std::min(signals.size(), b + chunk);
        Tensor x = batch_tensor(signals, order, b, e, length);
        Tensor logits = forward(net, x);
        const int k = logits.shape[1];
        for (size_t i = b; i < e; ++i) {
            const float* row = logits.data.data() + (i - b) * size_t(k);
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (row[j] > row[best]) best = j;
            if (best == labels[i]) ++correct;
        }
    }
    return signals.empty() ? 0.0 : double(correct) / double(signals.size());
}

}  // namespace

TrainHistory train(Network& net, const data::Dataset& dataset, const TrainConfig& cfg) {
    if (cfg.learning_rate < 0 || cfg.batch_size <= 0 || cfg.epochs < 0 || cfg.weight_decay < 0)
        throw ConfigError("train: rates and sizes must be non-negative, batch size positive");
    validate_network(net);
    const int length = net.input_length;
    const int k = net.num_classes;

    // per-class presence check
    std::vector<int> per_class(size_t(k), 0);
    for (const data::Example& ex : dataset.train) {
        const int y = label_index(ex.label);
        if (y >= 0 && y < k) ++per_class[size_t(y)];
    }
    for (int c = 0; c < k; ++c)
        if (per_class[size_t(c)] == 0)
            throw InputError("train: class " + std::to_string(c) + " has no training examples");

    // standardize once up front
    std::vector<std::vector<float>> train_sig, test_sig;
    std::vector<int> train_lab, test_lab;
    for (const data::Example& ex : dataset.train) {
        train_sig.push_back(standardize(ex.signal));
        train_lab.push_back(label_index(ex.label));
    }
    for (const data::Example& ex : dataset.test) {
        test_sig.push_back(standardize(ex.signal));
        test_lab.push_back(label_index(ex.label));
    }

    std::vector<AdamSlot> slots(net.layers.size() * 4);
    Rng shuffle_rng(Rng::derive(cfg.seed, 0x5baff1e));
    std::vector<int> order(train_sig.size());
    std::iota(order.begin(), order.end(), 0);

    TrainHistory history;
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        size_t correct = 0, seen = 0;
        for (size_t b = 0; b < order.size(); b += size_t(cfg.batch_size)) {
            const size_t e = std::min(order.size(), b + size_t(cfg.batch_size));
            const int n = int(e - b);
            Tensor x = batch_tensor(train_sig, order, b, e, length);
            Tape tape;
            Tensor logits = forward(net, x, &tape, /*training=*/true);

            // softmax cross-entropy; d_logits = (p - onehot) / n
            Tensor d_logits(logits.shape);
            for (int i = 0; i < n; ++i) {
                const float* row = logits.data.data() + size_t(i) * k;
                const int y = train_lab[size_t(order[b + size_t(i)])];
                std::vector<float> p = softmax(std::vector<float>(row, row + k));
                loss_sum += -std::log(std::max(1e-12, double(p[size_t(y)])));
                int best = 0;
                for (int j = 1; j < k; ++j)
                    if (row[j] > row[best]) best = j;
                if (best == y) ++correct;
                float* drow = d_logits.data.data() + size_t(i) * k;
                for (int j = 0; j < k; ++j)
                    drow[j] = (p[size_t(j)] - (j == y ? 1.0f : 0.0f)) / float(n);
            }
            seen += size_t(n);
            if (!std::isfinite(loss_sum))
                throw TrainError("train: loss became non-finite at epoch " +
                                 std::to_string(epoch));

            BackwardResult grads =
                backward(net, tape, d_logits, BackwardRule::Standard, /*want_param_grads=*/true);
            ++step;
            if (cfg.learning_rate == 0.0f) continue;  // still counts steps, changes nothing
            for (size_t li = 0; li < net.layers.size(); ++li) {
                ParamGrads& pg = grads.d_params[li];
                LayerParams& p = net.params[li];
                if (!pg.w.data.empty()) adam_step(p.w.data, pg.w.data, slots[li * 4], cfg, step);
                if (!pg.b.data.empty())
                    adam_step(p.b.data, pg.b.data, slots[li * 4 + 1], cfg, step);
                if (!pg.gamma.data.empty())
                    adam_step(p.gamma.data, pg.gamma.data, slots[li * 4 + 2], cfg, step);
                if (!pg.beta.data.empty())
                    adam_step(p.beta.data, pg.beta.data, slots[li * 4 + 3], cfg, step);
            }
        }

        EpochRecord rec;
        rec.train_loss = seen ? loss_sum / double(seen) : 0.0;
        rec.train_accuracy = seen ? double(correct) / double(seen) : 0.0;
        rec.test_accuracy = dataset_accuracy(net, test_sig, test_lab, length);
        history.push_back(rec);
    }
    return history;
}

std::vector<float> predict(const Network& net, const std::vector<float>& signal) {
    if (int(signal.size()) != net.input_length)
        throw InputError("predict: expected " + std::to_string(net.input_length) +
                         " samples, got " + std::to_string(signal.size()));
    Tensor x({1, net.input_length}, signal);
    const Tensor logits = forward(net, x);
    return softmax(logits.data);
}

std::vector<int> select_eval_examples(const Network& net,
                                      const std::vector<data::Example>& examples,
                                      double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw InputError("select_eval_examples: threshold must lie in (0, 1)");
    std::vector<int> kept;
    for (size_t i = 0; i < examples.size(); ++i) {
        const data::Example& ex = examples[i];
        if (ex.label == data::BeatClass::Normal) continue;
        const std::vector<float> p = predict(net, standardize(ex.signal));
        const int y = int(ex.label);
        int best = 0;
        for (size_t j = 1; j < p.size(); ++j)
            if (p[j] > p[size_t(best)]) best = int(j);
        if (best == y && double(p[size_t(y)]) > threshold) kept.push_back(int(i));
    }
    return kept;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            if (key == "learning_rate") base.learning_rate = std::stof(val);
            else if (key == "batch_size") base.batch_size = std::stoi(val);
            else if (key == "weight_decay") base.weight_decay = std::stof(val);
            else if (key == "epochs") base.epochs = std::stoi(val);
            else if (key == "seed") base.seed = std::stoull(val);
            else
                throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                                  ": unknown key " + key);
        } catch (const std::invalid_argument&) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad value for " +
                              key);
        }
    }
    return base;
}

}  // namespace ecgattr::model
