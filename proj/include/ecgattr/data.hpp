#pragma once
// Beat-annotated synthetic ECG examples with the Icentia11K task geometry:
// 2049 samples at 250 Hz, beats delimited by R-peak midpoints, example label
// derived from the beat labels. Also defines the on-disk dataset format and
// a small CSV import path for real excerpts.

#include <filesystem>
#include <string>
#include <vector>

#include "ecgattr/common.hpp"

namespace ecgattr::data {

enum class BeatClass { Normal, Pac, Pvc };

const char* beat_class_name(BeatClass cls);  // "normal" / "PAC" / "PVC"
BeatClass beat_class_from_name(const std::string& name);

struct BeatAnnotation {
    int r_peak = 0;
    int start = 0;  // half-open [start, end)
    int end = 0;
    BeatClass cls = BeatClass::Normal;
};

struct Example {
    std::vector<float> signal;
    std::vector<BeatAnnotation> beats;
    BeatClass label = BeatClass::Normal;
};

// One Gaussian bump: amp * exp(-(t - offset)^2 / (2 width^2)), times in
// seconds relative to the R peak.
struct WaveComponent {
    float amp = 0.0f;
    float width_s = 0.01f;
    float offset_s = 0.0f;
};

struct BeatMorph {
    WaveComponent p, q, r, s, t;
};

BeatMorph normal_morph_defaults();
BeatMorph pac_morph_defaults();
BeatMorph pvc_morph_defaults();

struct GeneratorParams {
    float sampling_rate_hz = 250.0f;
    int example_length = 2049;
    float mean_rr_s = 0.8f;
    float rr_jitter_s = 0.05f;
    BeatMorph normal_morph = normal_morph_defaults();
    BeatMorph pac_morph = pac_morph_defaults();
    BeatMorph pvc_morph = pvc_morph_defaults();
    float pac_prematurity = 0.65f;  // preceding-RR scale
    float pvc_prematurity = 0.75f;
    float pac_pause_scale = 1.10f;  // following-RR scale
    float pvc_pause_scale = 1.40f;  // compensatory pause
    int min_abnormal = 1;
    int max_abnormal = 3;
    float noise_amp = 0.03f;
    float wander_amp = 0.06f;
    uint64_t seed = 0;
};

struct BeatTemplate {
    std::vector<float> wave;
    int r_offset = 0;             // index of the R peak within wave
    float rr_before_scale = 1.0f; // timing of this beat relative to the mean RR
    float rr_after_scale = 1.0f;
    bool compensatory_pause = false;
};

BeatTemplate gen_beat(BeatClass cls, float rr_before_s, const GeneratorParams& params);

// Fig.-2 style example labeling: normal iff all beats normal, otherwise the
// abnormal class present. A PAC/PVC mixture is rejected.
BeatClass derive_example_label(const std::vector<BeatClass>& beat_classes);
BeatClass derive_example_label(const std::vector<BeatAnnotation>& beats);

Example gen_example(BeatClass cls, const GeneratorParams& params, Rng& rng);

// Throws InputError naming the offending beat when annotations violate the
// midpoint-tiling invariants or the label rule.
void validate_example(const Example& ex, int expected_length);

// Sorted sample indices covered by abnormal beats.
std::vector<int> ground_truth_indices(const Example& ex);

struct Dataset {
    std::vector<Example> train;
    std::vector<Example> test;
    float sampling_rate_hz = 250.0f;
    int example_length = 2049;
    std::vector<std::string> class_names = {"normal", "PAC", "PVC"};
};

// Balanced train/test splits, n_per_class each per split, with disjoint
// per-example seed streams.
Dataset gen_dataset(int n_per_class, uint64_t seed, const GeneratorParams& base = {});

// Dataset directory: manifest.json + signals.f32le.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

// CSV import: one sample value per row, plus a sidecar annotation CSV with
// rows "r_peak,start,end,class". Headers are optional.
Example import_example_csv(const std::filesystem::path& signal_csv,
                           const std::filesystem::path& annotation_csv);

}  // namespace ecgattr::data
