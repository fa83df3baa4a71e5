#pragma once

#include "toxedge/audio.hpp"
#include "toxedge/checkpoint.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace toxedge {

// Inference time divided by audio duration.
double rtf(double inference_s, double audio_s);

struct LatencyStats {
    std::vector<double> samples; // one per (rep, clip), warmup excluded
    double mean_s = 0.0;
    double median_s = 0.0;
    double p95_s = 0.0;
    double total_s = 0.0; // mean wall time of one pass over all clips
};

// Times `run(clip)` with a monotonic clock: `warmup` untimed passes over the
// clips, then `reps` timed passes.
LatencyStats measure_latency(const std::function<void(const Waveform&)>& run, const std::vector<Waveform>& clips,
                             std::size_t warmup = 1, std::size_t reps = 5);

struct BenchVariant {
    std::string name;
    std::filesystem::path path;
};

struct BenchResult {
    std::string variant;
    double macro_f1 = 0.0;
    std::size_t model_size_bytes = 0;
    std::size_t peak_ram_bytes = 0; // tracked tensor high-water mark
    double total_inference_s = 0.0;
    double mean_per_utterance_s = 0.0;
    double rtf = 0.0;
    std::size_t clip_count = 0;
    double total_audio_s = 0.0;
    // "f32", "quantized", "student" or "quantized-student", judged from the
    // checkpoint against the first variant; selects the reference ratios.
    std::string technique;
};

struct BenchOptions {
    std::size_t warmup = 1;
    std::size_t reps = 5;
};

struct BenchReport {
    std::vector<BenchResult> rows;
};

// Reference compression figures for the full-size model, printed beside
// the measured ratios.
struct ReferenceRatio {
    const char* variant;
    double size_ratio;
    double ram_ratio;
};
inline constexpr ReferenceRatio kReferenceRatios[] = {
    {"quantized", 377.9 / 95.2, 2.6 / 0.8},
    {"student", 3.7, 1.9},
    {"quantized-student", 377.9 / 25.9, 4.3},
};

// For each variant: load, evaluate macro F1 on `testset`, record on-disk
// size, tracked peak RAM of load + one inference pass, latency and RTF.
BenchReport bench_suite(const std::vector<BenchVariant>& variants, const std::vector<LabeledUtterance>& testset,
                        const BenchOptions& options = {});

inline constexpr const char* kBenchCsvHeader = "variant,macro_f1,size_bytes,peak_ram_bytes,total_s,mean_s,rtf,clips,audio_s";

void write_csv(const BenchReport& report, std::ostream& out);
// Aligned table plus size/RAM ratios against the first row, with the
// reference ratios alongside.
void write_table(const BenchReport& report, std::ostream& out);

} // namespace toxedge
