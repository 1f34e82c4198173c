#pragma once
// The 1D residual beat classifier: presets, training, prediction, and
// evaluation-example selection.

#include <cstdint>
#include <vector>

#include "ecgattr/data.hpp"
#include "ecgattr/network.hpp"

namespace ecgattr::model {

struct NetworkConfig {
    int num_blocks = 8;        // residual blocks of two convs each
    int base_channels = 16;
    int kernel_length = 7;
    int num_classes = 3;
    int input_length = 2049;
    int downsample_every = 2;  // stride-2 + channel doubling at blocks 2, 4, ...

    // stem + 2 convs per block + dense head = 18 weighted layers
    static NetworkConfig paper_preset();
    // 3 blocks -> 8 weighted layers; trains in minutes
    static NetworkConfig desk_preset();
    static NetworkConfig preset(const std::string& name);
};

struct TrainConfig {
    float learning_rate = 5e-4f;
    int batch_size = 128;
    float weight_decay = 1e-7f;
    int epochs = 50;
    float adam_beta1 = 0.9f;
    float adam_beta2 = 0.999f;
    uint64_t seed = 0;
};

struct EpochRecord {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;

// Zero mean, unit population standard deviation; constant input maps to
// all-zeros. Throws InputError for fewer than 2 samples.
std::vector<float> standardize(const std::vector<float>& signal);

Network build_network(const NetworkConfig& cfg, uint64_t seed);

// Cross-entropy + Adam over pre-standardized copies of the dataset signals.
// Shuffling and initialization depend only on cfg.seed. Throws TrainError
// naming the epoch if the loss turns non-finite.
TrainHistory train(Network& net, const data::Dataset& dataset, const TrainConfig& cfg);

// Probability vector for a signal already in model (standardized) space.
std::vector<float> predict(const Network& net, const std::vector<float>& signal);

// Indices into `examples` of those truly PAC/PVC, predicted correctly, with
// predicted true-class probability strictly above the threshold. Signals are
// standardized internally.
std::vector<int> select_eval_examples(const Network& net,
                                      const std::vector<data::Example>& examples,
                                      double threshold = 0.9);

// key=value file (one per line, '#' comments) overriding TrainConfig fields.
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});

}  // namespace ecgattr::model
