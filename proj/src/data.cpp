#include "ecgattr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <json.hpp>

namespace ecgattr::data {

using nlohmann::json;

const char* beat_class_name(BeatClass cls) {
    switch (cls) {
        case BeatClass::Normal: return "normal";
        case BeatClass::Pac: return "PAC";
        case BeatClass::Pvc: return "PVC";
    }
    return "?";
}

BeatClass beat_class_from_name(const std::string& name) {
    if (name == "normal" || name == "N") return BeatClass::Normal;
    if (name == "PAC") return BeatClass::Pac;
    if (name == "PVC") return BeatClass::Pvc;
    throw InputError("unknown beat class: " + name);
}

BeatMorph normal_morph_defaults() {
    return {{0.12f, 0.025f, -0.16f},
            {-0.08f, 0.010f, -0.030f},
            {1.00f, 0.012f, 0.0f},
            {-0.18f, 0.012f, 0.028f},
            {0.30f, 0.050f, 0.22f}};
}

BeatMorph pac_morph_defaults() {
    // premature beat: inverted, earlier P; QRS close to normal
    return {{-0.09f, 0.018f, -0.10f},
            {-0.08f, 0.010f, -0.030f},
            {0.95f, 0.012f, 0.0f},
            {-0.18f, 0.012f, 0.028f},
            {0.24f, 0.045f, 0.21f}};
}

BeatMorph pvc_morph_defaults() {
    // wide large QRS, no P wave, discordant T
    return {{0.0f, 0.020f, -0.16f},
            {-0.10f, 0.020f, -0.060f},
            {1.35f, 0.032f, 0.0f},
            {-0.45f, 0.030f, 0.055f},
            {-0.35f, 0.060f, 0.24f}};
}

namespace {

const BeatMorph& morph_for(BeatClass cls, const GeneratorParams& p) {
    switch (cls) {
        case BeatClass::Normal: return p.normal_morph;
        case BeatClass::Pac: return p.pac_morph;
        case BeatClass::Pvc: return p.pvc_morph;
    }
    return p.normal_morph;
}

void add_wave(std::vector<float>& out, float fs, int center, const WaveComponent& w) {
    if (w.amp == 0.0f) return;
    const float sigma = w.width_s * fs;
    const int reach = int(std::ceil(4.0f * sigma));
    const int c = center + int(std::lround(w.offset_s * fs));
    const int lo = std::max(0, c - reach);
    const int hi = std::min(int(out.size()) - 1, c + reach);
    for (int i = lo; i <= hi; ++i) {
        const float d = float(i - c) / sigma;
        out[i] += w.amp * std::exp(-0.5f * d * d);
    }
}

}  // namespace

BeatTemplate gen_beat(BeatClass cls, float rr_before_s, const GeneratorParams& params) {
    if (rr_before_s <= 0.0f) throw InputError("gen_beat: rr_before must be positive");
    const float fs = params.sampling_rate_hz;
    BeatTemplate tpl;
    const int before = int(std::lround(0.35f * fs));
    const int after = int(std::lround(0.45f * fs));
    tpl.wave.assign(size_t(before + after + 1), 0.0f);
    tpl.r_offset = before;
    const BeatMorph& m = morph_for(cls, params);
    add_wave(tpl.wave, fs, tpl.r_offset, m.p);
    add_wave(tpl.wave, fs, tpl.r_offset, m.q);
    add_wave(tpl.wave, fs, tpl.r_offset, m.r);
    add_wave(tpl.wave, fs, tpl.r_offset, m.s);
    add_wave(tpl.wave, fs, tpl.r_offset, m.t);
    switch (cls) {
        case BeatClass::Normal:
            break;
        case BeatClass::Pac:
            tpl.rr_before_scale = params.pac_prematurity;
            tpl.rr_after_scale = params.pac_pause_scale;
            break;
        case BeatClass::Pvc:
            tpl.rr_before_scale = params.pvc_prematurity;
            tpl.rr_after_scale = params.pvc_pause_scale;
            tpl.compensatory_pause = true;
            break;
    }
    return tpl;
}

BeatClass derive_example_label(const std::vector<BeatClass>& beat_classes) {
    if (beat_classes.empty()) throw InputError("derive_example_label: no beats");
    bool pac = false, pvc = false;
    for (BeatClass c : beat_classes) {
        pac = pac || c == BeatClass::Pac;
        pvc = pvc || c == BeatClass::Pvc;
    }
    if (pac && pvc)
        throw InputError("derive_example_label: example mixes PAC and PVC beats");
    if (pvc) return BeatClass::Pvc;
    if (pac) return BeatClass::Pac;
    return BeatClass::Normal;
}

BeatClass derive_example_label(const std::vector<BeatAnnotation>& beats) {
    std::vector<BeatClass> classes;
    classes.reserve(beats.size());
    for (const BeatAnnotation& b : beats) classes.push_back(b.cls);
    return derive_example_label(classes);
}

void validate_example(const Example& ex, int expected_length) {
    if (int(ex.signal.size()) != expected_length)
        throw InputError("example: expected " + std::to_string(expected_length) +
                         " samples, got " + std::to_string(ex.signal.size()));
    if (ex.beats.empty()) throw InputError("example: no beat annotations");
    const int n = int(ex.beats.size());
    for (int i = 0; i < n; ++i) {
        const BeatAnnotation& b = ex.beats[i];
        if (!(b.start <= b.r_peak && b.r_peak < b.end))
            throw InputError("beat " + std::to_string(i) + ": r_peak " +
                             std::to_string(b.r_peak) + " outside [" + std::to_string(b.start) +
                             "," + std::to_string(b.end) + ")");
        if (b.start < 0 || b.end > expected_length)
            throw InputError("beat " + std::to_string(i) + ": interval out of bounds");
        if (i > 0) {
            const BeatAnnotation& prev = ex.beats[i - 1];
            if (b.start != prev.end)
                throw InputError("beat " + std::to_string(i) +
                                 ": intervals do not tile (start " + std::to_string(b.start) +
                                 " != previous end " + std::to_string(prev.end) + ")");
            const int mid = (prev.r_peak + b.r_peak) / 2;
            if (b.start != mid)
                throw InputError("beat " + std::to_string(i) + ": boundary " +
                                 std::to_string(b.start) + " is not the R-peak midpoint " +
                                 std::to_string(mid));
        }
    }
    if (ex.beats.front().start != 0)
        throw InputError("beat 0: first interval must start at sample 0");
    if (ex.beats.back().end != expected_length)
        throw InputError("beat " + std::to_string(n - 1) + ": last interval must end at " +
                         std::to_string(expected_length));
    if (derive_example_label(ex.beats) != ex.label)
        throw InputError("example: label does not match beat classes");
}

std::vector<int> ground_truth_indices(const Example& ex) {
    std::vector<int> idx;
    for (const BeatAnnotation& b : ex.beats)
        if (b.cls != BeatClass::Normal)
            for (int i = b.start; i < b.end; ++i) idx.push_back(i);
    return idx;
}

Example gen_example(BeatClass cls, const GeneratorParams& params, Rng& rng) {
    const float fs = params.sampling_rate_hz;
    const int length = params.example_length;
    const float mean_rr = params.mean_rr_s;
    const int est_beats = std::max(3, int(std::floor(float(length) / (fs * mean_rr))));

    for (int attempt = 0; attempt < 100; ++attempt) {
        // choose abnormal slots among interior positions
        std::vector<BeatClass> slot_class(size_t(est_beats) + 4, BeatClass::Normal);
        if (cls != BeatClass::Normal) {
            const int span = params.max_abnormal - params.min_abnormal + 1;
            int want = params.min_abnormal + (span > 1 ? rng.next_int(span) : 0);
            want = std::min(want, est_beats - 2);
            std::vector<int> interior;
            for (int i = 1; i <= est_beats - 2; ++i) interior.push_back(i);
            rng.shuffle(interior);
            for (int i = 0; i < want; ++i) slot_class[size_t(interior[i])] = cls;
        }

        // place R peaks with per-beat RR modifiers
        std::vector<int> r_peaks;
        std::vector<BeatClass> classes;
        float t = (0.35f + 0.25f * rng.next_float()) * mean_rr;  // first R
        float pending_pause = 1.0f;
        for (size_t i = 0; i < slot_class.size(); ++i) {
            if (i > 0) {
                BeatTemplate timing = gen_beat(slot_class[i], mean_rr, params);
                float rr = mean_rr + params.rr_jitter_s * rng.uniform(-1.0f, 1.0f);
                rr *= timing.rr_before_scale * pending_pause;
                pending_pause = timing.rr_after_scale;
                t += rr;
            }
            const int r = int(std::lround(t * fs));
            if (r >= length) break;
            if (r < 0) continue;
            r_peaks.push_back(r);
            classes.push_back(slot_class[i]);
        }
        if (r_peaks.size() < 3) continue;

        // the requested class must survive clipping
        bool ok_classes = true;
        try {
            ok_classes = derive_example_label(classes) == cls;
        } catch (const InputError&) {
            ok_classes = false;
        }
        if (!ok_classes) continue;

        Example ex;
        ex.signal.assign(size_t(length), 0.0f);
        for (size_t i = 0; i < r_peaks.size(); ++i) {
            const BeatMorph& m = morph_for(classes[i], params);
            add_wave(ex.signal, fs, r_peaks[i], m.p);
            add_wave(ex.signal, fs, r_peaks[i], m.q);
            add_wave(ex.signal, fs, r_peaks[i], m.r);
            add_wave(ex.signal, fs, r_peaks[i], m.s);
            add_wave(ex.signal, fs, r_peaks[i], m.t);
        }

        // baseline wander + noise
        const float wander_amp = params.wander_amp * rng.uniform(0.5f, 1.5f);
        const float wander_hz = rng.uniform(0.10f, 0.35f);
        const float phase = rng.uniform(0.0f, 6.2831853f);
        for (int i = 0; i < length; ++i)
            ex.signal[i] += wander_amp * std::sin(6.2831853f * wander_hz * float(i) / fs + phase);
        for (int i = 0; i < length; ++i) ex.signal[i] += params.noise_amp * rng.normal();

        // boundaries: floor midpoints between adjacent R peaks, edges clamped
        for (size_t i = 0; i < r_peaks.size(); ++i) {
            BeatAnnotation b;
            b.r_peak = r_peaks[i];
            b.cls = classes[i];
            b.start = i == 0 ? 0 : (r_peaks[i - 1] + r_peaks[i]) / 2;
            b.end = i + 1 == r_peaks.size() ? length : (r_peaks[i] + r_peaks[i + 1]) / 2;
            ex.beats.push_back(b);
        }
        ex.label = cls;
        try {
            validate_example(ex, length);
        } catch (const InputError&) {
            continue;
        }
        return ex;
    }
    throw InputError("gen_example: could not generate a valid example (params too tight?)");
}

Dataset gen_dataset(int n_per_class, uint64_t seed, const GeneratorParams& base) {
    if (n_per_class < 1) throw InputError("gen_dataset: n_per_class must be >= 1");
    Dataset ds;
    ds.sampling_rate_hz = base.sampling_rate_hz;
    ds.example_length = base.example_length;
    const BeatClass classes[3] = {BeatClass::Normal, BeatClass::Pac, BeatClass::Pvc};
    for (int split = 0; split < 2; ++split) {
        std::vector<Example>& out = split == 0 ? ds.train : ds.test;
        for (int ci = 0; ci < 3; ++ci) {
            for (int i = 0; i < n_per_class; ++i) {
                const uint64_t stream =
                    (uint64_t(split) << 40) | (uint64_t(ci) << 32) | uint64_t(i);
                Rng rng(Rng::derive(seed, stream));
                out.push_back(gen_example(classes[ci], base, rng));
            }
        }
    }
    return ds;
}

namespace {

json example_record(const Example& ex, size_t offset) {
    json j;
    j["offset"] = offset;
    j["length"] = ex.signal.size();
    j["label"] = beat_class_name(ex.label);
    json beats = json::array();
    for (const BeatAnnotation& b : ex.beats)
        beats.push_back({b.r_peak, b.start, b.end, beat_class_name(b.cls)});
    j["beats"] = beats;
    return j;
}

Example example_from_record(const json& j, const std::vector<float>& blob, size_t example_index,
                            int expected_length) {
    Example ex;
    const size_t offset = j.at("offset").get<size_t>();
    const size_t length = j.at("length").get<size_t>();
    if (offset + length > blob.size())
        throw IoError("example " + std::to_string(example_index) +
                      ": signal range exceeds blob (truncated signals.f32le?)");
    ex.signal.assign(blob.begin() + offset, blob.begin() + offset + length);
    ex.label = beat_class_from_name(j.at("label").get<std::string>());
    for (const json& jb : j.at("beats")) {
        BeatAnnotation b;
        b.r_peak = jb.at(0).get<int>();
        b.start = jb.at(1).get<int>();
        b.end = jb.at(2).get<int>();
        b.cls = beat_class_from_name(jb.at(3).get<std::string>());
        ex.beats.push_back(b);
    }
    try {
        validate_example(ex, expected_length);
    } catch (const InputError& e) {
        throw InputError("example " + std::to_string(example_index) + ": " + e.what());
    }
    return ex;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<float> blob;
    json manifest;
    manifest["format_version"] = 1;
    manifest["sampling_rate_hz"] = ds.sampling_rate_hz;
    manifest["example_length"] = ds.example_length;
    manifest["class_names"] = ds.class_names;
    manifest["signals_file"] = "signals.f32le";
    for (int split = 0; split < 2; ++split) {
        const std::vector<Example>& exs = split == 0 ? ds.train : ds.test;
        json records = json::array();
        for (const Example& ex : exs) {
            records.push_back(example_record(ex, blob.size()));
            blob.insert(blob.end(), ex.signal.begin(), ex.signal.end());
        }
        manifest["splits"][split == 0 ? "train" : "test"] = records;
    }
    write_f32_blob(dir / "signals.f32le", blob);
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw IoError("missing manifest: " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    Dataset ds;
    try {
        ds.sampling_rate_hz = manifest.at("sampling_rate_hz").get<float>();
        ds.example_length = manifest.at("example_length").get<int>();
        ds.class_names = manifest.at("class_names").get<std::vector<std::string>>();
        const std::string blob_name = manifest.at("signals_file").get<std::string>();
        const fs::path blob_path = dir / blob_name;
        if (!fs::exists(blob_path))
            throw IoError("manifest references missing blob: " + blob_name);
        const std::vector<float> blob = read_f32_blob(blob_path);
        for (int split = 0; split < 2; ++split) {
            const char* key = split == 0 ? "train" : "test";
            std::vector<Example>& out = split == 0 ? ds.train : ds.test;
            size_t idx = 0;
            for (const json& j : manifest.at("splits").at(key))
                out.push_back(example_from_record(j, blob, idx++, ds.example_length));
        }
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    return ds;
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

bool is_number(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end && *end == '\0';
}

}  // namespace

Example import_example_csv(const std::filesystem::path& signal_csv,
                           const std::filesystem::path& annotation_csv) {
    Example ex;
    auto sig_rows = read_csv_rows(signal_csv);
    for (size_t i = 0; i < sig_rows.size(); ++i) {
        const std::string& cell = sig_rows[i].at(0);
        if (i == 0 && !is_number(cell)) continue;  // header
        if (!is_number(cell))
            throw InputError("signal csv row " + std::to_string(i) + ": not a number: " + cell);
        ex.signal.push_back(std::strtof(cell.c_str(), nullptr));
    }
    auto ann_rows = read_csv_rows(annotation_csv);
    size_t beat_idx = 0;
    for (size_t i = 0; i < ann_rows.size(); ++i) {
        const auto& cells = ann_rows[i];
        if (i == 0 && !cells.empty() && !is_number(cells[0])) continue;  // header
        if (cells.size() != 4)
            throw InputError("annotation csv row " + std::to_string(i) +
                             ": expected 4 columns (r_peak,start,end,class)");
        BeatAnnotation b;
        b.r_peak = int(std::strtol(cells[0].c_str(), nullptr, 10));
        b.start = int(std::strtol(cells[1].c_str(), nullptr, 10));
        b.end = int(std::strtol(cells[2].c_str(), nullptr, 10));
        b.cls = beat_class_from_name(cells[3]);
        // reject overlap immediately, naming the offending beat
        if (!ex.beats.empty() && b.start < ex.beats.back().end)
            throw InputError("annotation beat " + std::to_string(beat_idx) +
                             ": overlaps previous beat interval");
        ex.beats.push_back(b);
        ++beat_idx;
    }
    ex.label = derive_example_label(ex.beats);
    validate_example(ex, int(ex.signal.size()));
    return ex;
}

}  // namespace ecgattr::data
