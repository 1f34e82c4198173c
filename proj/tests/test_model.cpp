#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ecgattr/engine.hpp"
#include "ecgattr/kernels.hpp"
#include "ecgattr/model.hpp"
#include "toy_nets.hpp"

using namespace ecgattr;
using namespace ecgattr::model;

namespace {

std::vector<float> flat_params(const Network& net) {
    std::vector<float> all;
    for (const LayerParams& p : net.params)
        for (const Tensor* t : {&p.w, &p.b, &p.gamma, &p.beta, &p.run_mean, &p.run_var})
            all.insert(all.end(), t->data.begin(), t->data.end());
    return all;
}

}  // namespace

TEST_CASE("standardize: fixed cases") {
    CHECK(standardize({1.0f, -1.0f}) == std::vector<float>{1.0f, -1.0f});
    CHECK(standardize({5.0f, 5.0f, 5.0f}) == std::vector<float>{0.0f, 0.0f, 0.0f});
    CHECK_THROWS_AS(standardize({}), InputError);

    const auto out = standardize({0.0f, 1.0f, 2.0f, 3.0f});
    double mean = 0.0, sq = 0.0;
    for (float v : out) {
        mean += v;
        sq += double(v) * v;
    }
    mean /= double(out.size());
    const double stdev = std::sqrt(sq / double(out.size()) - mean * mean);
    CHECK(std::fabs(mean) < 1e-5);
    CHECK(std::fabs(stdev - 1.0) < 1e-5);
}

TEST_CASE("build_network: paper preset has exactly 18 weighted layers") {
    const Network net = build_network(NetworkConfig::paper_preset(), 1);
    CHECK(count_weighted_layers(net) == 18);
    int softmax = 0;
    for (const LayerSpec& s : net.layers)
        if (s.kind == LayerKind::Softmax) ++softmax;
    CHECK(softmax == 1);
    for (const LayerSpec& s : net.layers)
        if (s.kind == LayerKind::Conv1d) CHECK(s.kernel == 7);
}

TEST_CASE("build_network: same seed gives identical parameter bytes") {
    const Network a = build_network(NetworkConfig::desk_preset(), 9);
    const Network b = build_network(NetworkConfig::desk_preset(), 9);
    CHECK(flat_params(a) == flat_params(b));
    const Network c = build_network(NetworkConfig::desk_preset(), 10);
    CHECK(flat_params(a) != flat_params(c));
}

TEST_CASE("build_network: desk preset maps 2049 samples to 3 logits") {
    Network net = build_network(NetworkConfig::desk_preset(), 4);
    CHECK(count_weighted_layers(net) == 8);
    Rng rng(1);
    const Tensor x({1, 2049}, toy::rand_vec(2049, rng));
    const Tensor logits = forward(net, x);
    CHECK(logits.numel() == 3);
}

TEST_CASE("checkpoint round trip preserves the network") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ecgattr_test_ckpt";
    fs::remove_all(dir);
    NetworkConfig cfg = NetworkConfig::desk_preset();
    cfg.input_length = 257;
    Network net = build_network(cfg, 5);
    save_checkpoint(net, dir);
    Network back = load_checkpoint(dir);
    CHECK(flat_params(back) == flat_params(net));
    REQUIRE(back.layers.size() == net.layers.size());

    Rng rng(2);
    const Tensor x({1, 257}, toy::rand_vec(257, rng));
    CHECK(forward(net, x).data == forward(back, x).data);

    // blob with the wrong size is rejected by name
    const Network probe = load_checkpoint(dir);  // manifest still valid
    write_f32_blob(dir / "t0000_w.f32le", std::vector<float>(3, 0.0f));
    CHECK_THROWS_WITH_AS(load_checkpoint(dir), doctest::Contains("t0000_w.f32le"), IoError);
    (void)probe;
}

namespace {

data::Dataset tiny_dataset(int n_per_class, uint64_t seed, int length = 512) {
    data::GeneratorParams p;
    p.example_length = length;
    return data::gen_dataset(n_per_class, seed, p);
}

NetworkConfig tiny_net_cfg(int length = 512) {
    NetworkConfig cfg = NetworkConfig::desk_preset();
    cfg.input_length = length;
    cfg.base_channels = 8;
    return cfg;
}

}  // namespace

TEST_CASE("train: 60-example set beats chance after 5 epochs") {
    const data::Dataset ds = tiny_dataset(20, 77);
    Network net = build_network(tiny_net_cfg(), 77);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 16;
    cfg.seed = 77;
    const TrainHistory hist = train(net, ds, cfg);
    REQUIRE(hist.size() == 5);
    CHECK(hist.back().train_accuracy > 0.5);
}

TEST_CASE("train: zero learning rate leaves parameters untouched") {
    const data::Dataset ds = tiny_dataset(2, 3);
    Network net = build_network(tiny_net_cfg(), 3);
    const std::vector<float> before = flat_params(net);
    TrainConfig cfg;
    cfg.learning_rate = 0.0f;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    train(net, ds, cfg);
    // batchnorm running stats move with forward passes; weights must not
    Network ref = build_network(tiny_net_cfg(), 3);
    for (size_t i = 0; i < net.layers.size(); ++i) {
        CHECK(net.params[i].w.data == ref.params[i].w.data);
        CHECK(net.params[i].b.data == ref.params[i].b.data);
        CHECK(net.params[i].gamma.data == ref.params[i].gamma.data);
        CHECK(net.params[i].beta.data == ref.params[i].beta.data);
    }
    (void)before;
}

TEST_CASE("train: equal seeds give identical histories and parameters") {
    const data::Dataset ds = tiny_dataset(4, 21);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.seed = 5;

    Network a = build_network(tiny_net_cfg(), 5);
    Network b = build_network(tiny_net_cfg(), 5);
    const TrainHistory ha = train(a, ds, cfg);
    const TrainHistory hb = train(b, ds, cfg);
    REQUIRE(ha.size() == hb.size());
    for (size_t i = 0; i < ha.size(); ++i) {
        CHECK(ha[i].train_loss == hb[i].train_loss);
        CHECK(ha[i].train_accuracy == hb[i].train_accuracy);
        CHECK(ha[i].test_accuracy == hb[i].test_accuracy);
    }
    CHECK(flat_params(a) == flat_params(b));
}

TEST_CASE("train: missing class is an input error") {
    data::Dataset ds = tiny_dataset(2, 9);
    std::erase_if(ds.train, [](const data::Example& e) { return e.label == data::BeatClass::Pvc; });
    Network net = build_network(tiny_net_cfg(), 9);
    TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train(net, ds, cfg), InputError);
}

TEST_CASE("predict: probabilities form a simplex point") {
    Network net = build_network(tiny_net_cfg(128), 31);
    net.input_length = 128;
    Rng rng(4);
    for (int i = 0; i < 5; ++i) {
        const auto p = predict(net, toy::rand_vec(128, rng));
        double sum = 0.0;
        for (float v : p) {
            CHECK(v >= 0.0f);
            sum += v;
        }
        CHECK(std::fabs(sum - 1.0) < 1e-5);
    }
    CHECK_THROWS_AS(predict(net, std::vector<float>(64, 0.0f)), InputError);
}

TEST_CASE("select_eval_examples: rules and threshold boundary") {
    // a rigged 1-weight network is awkward here; instead run a trained tiny
    // net and verify the selection predicate against predict() directly
    const data::Dataset ds = tiny_dataset(12, 55);
    Network net = build_network(tiny_net_cfg(), 55);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 16;
    cfg.seed = 55;
    train(net, ds, cfg);

    const double threshold = 0.6;
    const std::vector<int> kept = select_eval_examples(net, ds.test, threshold);
    std::vector<bool> kept_mask(ds.test.size(), false);
    for (int i : kept) kept_mask[size_t(i)] = true;
    for (size_t i = 0; i < ds.test.size(); ++i) {
        const data::Example& ex = ds.test[i];
        const auto p = predict(net, standardize(ex.signal));
        int best = 0;
        for (size_t j = 1; j < p.size(); ++j)
            if (p[j] > p[size_t(best)]) best = int(j);
        const bool expect = ex.label != data::BeatClass::Normal && best == int(ex.label) &&
                            double(p[size_t(ex.label)]) > threshold;
        CHECK(kept_mask[i] == expect);
        if (ex.label == data::BeatClass::Normal) CHECK(!kept_mask[i]);
    }

    // strict inequality at the boundary: a synthetic check through the API
    // contract (threshold equal to the probability must exclude)
    for (int idx : kept) {
        const auto p = predict(net, standardize(ds.test[size_t(idx)].signal));
        const double top = double(p[size_t(ds.test[size_t(idx)].label)]);
        const std::vector<int> tighter = select_eval_examples(net, ds.test, top);
        for (int j : tighter) CHECK(double(predict(net, standardize(ds.test[size_t(j)].signal))
                                               [size_t(ds.test[size_t(j)].label)]) > top);
        break;
    }
}

TEST_CASE("select_eval_examples: monotone in the threshold") {
    const data::Dataset ds = tiny_dataset(6, 66);
    Network net = build_network(tiny_net_cfg(), 66);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 66;
    train(net, ds, cfg);
    const auto loose = select_eval_examples(net, ds.test, 0.4);
    const auto tight = select_eval_examples(net, ds.test, 0.8);
    for (int i : tight) CHECK(std::count(loose.begin(), loose.end(), i) == 1);
    CHECK(tight.size() <= loose.size());
}

TEST_CASE("load_train_config parses key=value files") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "ecgattr_train_cfg.txt";
    write_text_file(path, "# comment\nlearning_rate=0.01\nepochs=3\nbatch_size=32\nseed=12\n");
    const TrainConfig cfg = load_train_config(path);
    CHECK(cfg.learning_rate == doctest::Approx(0.01f));
    CHECK(cfg.epochs == 3);
    CHECK(cfg.batch_size == 32);
    CHECK(cfg.seed == 12);
    write_text_file(path, "bogus_key=1\n");
    CHECK_THROWS_AS(load_train_config(path), ConfigError);
}
