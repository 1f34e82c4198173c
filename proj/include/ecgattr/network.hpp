#pragma once
// Layer graph of the 1D residual classifier plus checkpoint I/O.
//
// The graph is a flat layer list over a value chain: values[0] is the input,
// values[i+1] is layer i's output. Residual adds name their skip source by
// value index and carry a parameter-free shortcut adjustment (temporal
// subsampling and channel zero-padding) so downsampling blocks keep the
// weighted-layer count at exactly stem + 2*blocks + head.

#include <filesystem>
#include <string>
#include <vector>

#include "ecgattr/tensor.hpp"

namespace ecgattr {

enum class LayerKind {
    Conv1d,
    BatchNorm1d,
    Relu,
    AddResidual,
    GlobalAvgPool,
    Dense,
    Softmax,
};

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
    LayerKind kind{};
    // conv1d
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int pad = 0;
    // batchnorm1d
    int channels = 0;
    // dense
    int in_features = 0;
    int out_features = 0;
    // add-residual: skip source as a value index, plus shortcut adjustment
    int skip_from = -1;
    int skip_stride = 1;
    int skip_pad_channels = 0;
};

// Parameter slots per layer; unused tensors stay empty.
struct LayerParams {
    Tensor w, b;                                 // conv1d / dense
    Tensor gamma, beta, run_mean, run_var;       // batchnorm1d
};

struct Network {
    std::vector<LayerSpec> layers;
    std::vector<LayerParams> params;
    std::vector<std::string> class_names;
    int input_channels = 1;
    int input_length = 0;
    int num_classes = 0;

    bool empty() const { return layers.empty(); }
};

// Shape-checks the whole graph; throws ConfigError naming the offending layer.
void validate_network(const Network& net);

// Convs + dense layers, i.e. what the 18-layer count refers to.
int count_weighted_layers(const Network& net);

// Output [channels, length] of the value at `value_index` ([features, 1]
// after pooling). value 0 is the network input.
std::pair<int, int> value_shape(const Network& net, int value_index);

// Folds every batchnorm into its preceding conv using the frozen running
// statistics; the returned network contains no batchnorm layers.
Network fold_batchnorm(const Network& net);

// Checkpoint directory: checkpoint.json manifest + one f32le blob per
// parameter tensor.
void save_checkpoint(const Network& net, const std::filesystem::path& dir);
Network load_checkpoint(const std::filesystem::path& dir);

}  // namespace ecgattr
