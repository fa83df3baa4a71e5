#include "toxedge/bench.hpp"

#include "toxedge/error.hpp"
#include "toxedge/memory.hpp"
#include "toxedge/metrics.hpp"
#include "toxedge/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace toxedge {

double rtf(double inference_s, double audio_s) {
    if (!(audio_s > 0.0)) fail(ErrorKind::Parameter, "audio duration must be positive");
    return inference_s / audio_s;
}

LatencyStats measure_latency(const std::function<void(const Waveform&)>& run, const std::vector<Waveform>& clips,
                             std::size_t warmup, std::size_t reps) {
    if (clips.empty()) fail(ErrorKind::Parameter, "measure_latency needs at least one clip");
    if (reps == 0) fail(ErrorKind::Parameter, "measure_latency needs reps >= 1");
    if (ParallelRegion::active()) fail(ErrorKind::UnsupportedNesting, "latency measurement inside a parallel region");
    using clock = std::chrono::steady_clock;
    for (std::size_t w = 0; w < warmup; ++w)
        for (const Waveform& c : clips) run(c);

    LatencyStats s;
    double sum = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        for (const Waveform& c : clips) {
            const auto t0 = clock::now();
            run(c);
            const double dt = std::chrono::duration<double>(clock::now() - t0).count();
            s.samples.push_back(dt);
            sum += dt;
        }
    }
    std::vector<double> sorted = s.samples;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    s.mean_s = sum / static_cast<double>(n);
    s.median_s = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    s.p95_s = sorted[std::min(n - 1, static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1)];
    s.total_s = sum / static_cast<double>(reps);
    return s;
}

BenchReport bench_suite(const std::vector<BenchVariant>& variants, const std::vector<LabeledUtterance>& testset,
                        const BenchOptions& options) {
    if (testset.empty()) fail(ErrorKind::Parameter, "bench needs a non-empty test set");
    std::vector<Waveform> clips;
    std::vector<int> labels;
    double audio_s = 0.0;
    for (const LabeledUtterance& u : testset) {
        clips.push_back(normalize(u.waveform));
        labels.push_back(static_cast<int>(u.label));
        audio_s += u.waveform.duration_s();
    }

    BenchReport report;
    ModelConfig reference;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        const BenchVariant& variant = variants[v];
        BenchResult row;
        row.variant = variant.name;
        row.model_size_bytes = model_size_bytes(variant.path);
        row.clip_count = clips.size();
        row.total_audio_s = audio_s;

        std::vector<int> preds;
        row.peak_ram_bytes = peak_memory([&] {
            const Checkpoint ckpt = load(variant.path);
            if (v == 0) reference = ckpt.config;
            const bool student = ckpt.config.num_layers < reference.num_layers;
            row.technique = ckpt.has_int8() ? (student ? "quantized-student" : "quantized") : (student ? "student" : "f32");
            if (ckpt.config.vocab_size != reference.vocab_size || ckpt.config.num_classes != reference.num_classes) {
                fail(ErrorKind::Config, "variant " + variant.name + " differs in vocabulary or class count");
            }
            for (const Waveform& w : clips) {
                const auto z = forward(w, ckpt).toxicity_logits;
                preds.push_back(z[1] > z[0] ? 1 : 0);
            }
        });
        row.macro_f1 = classification_metrics(labels, preds).macro_f1;

        const Checkpoint ckpt = load(variant.path);
        const LatencyStats lat =
            measure_latency([&](const Waveform& w) { (void)forward(w, ckpt); }, clips, options.warmup, options.reps);
        row.total_inference_s = lat.total_s;
        row.mean_per_utterance_s = lat.total_s / static_cast<double>(clips.size());
        row.rtf = rtf(row.total_inference_s, audio_s);
        report.rows.push_back(row);
    }
    return report;
}

void write_csv(const BenchReport& report, std::ostream& out) {
    out << kBenchCsvHeader << '\n';
    char buf[512];
    for (const BenchResult& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%zu,%zu,%.6f,%.6f,%.6f,%zu,%.3f\n", r.variant.c_str(), r.macro_f1,
                      r.model_size_bytes, r.peak_ram_bytes, r.total_inference_s, r.mean_per_utterance_s, r.rtf,
                      r.clip_count, r.total_audio_s);
        out << buf;
    }
}

void write_table(const BenchReport& report, std::ostream& out) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%-20s %9s %14s %16s %11s %11s %9s\n", "variant", "macro_f1", "size_bytes",
                  "tracked_peak_ram", "total_s", "mean_s", "rtf");
    out << buf;
    for (const BenchResult& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%-20s %9.4f %14zu %16zu %11.4f %11.5f %9.5f\n", r.variant.c_str(),
                      r.macro_f1, r.model_size_bytes, r.peak_ram_bytes, r.total_inference_s, r.mean_per_utterance_s,
                      r.rtf);
        out << buf;
    }
    out << "peak RAM = high-water mark of live tensor allocations (not OS resident set)\n";
    if (report.rows.size() < 2) return;

    const BenchResult& base = report.rows.front();
    out << "\nratios vs " << base.variant << ":\n";
    std::snprintf(buf, sizeof(buf), "%-20s %-18s %9s %11s %9s %10s\n", "variant", "technique", "size_x", "ref_size_x",
                  "ram_x", "ref_ram_x");
    out << buf;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        const BenchResult& r = report.rows[i];
        const double size_x = static_cast<double>(base.model_size_bytes) / static_cast<double>(r.model_size_bytes);
        const double ram_x = r.peak_ram_bytes
                                 ? static_cast<double>(base.peak_ram_bytes) / static_cast<double>(r.peak_ram_bytes)
                                 : 0.0;
        const ReferenceRatio* ref = nullptr;
        for (const ReferenceRatio& p : kReferenceRatios) {
            if (r.technique == p.variant) ref = &p;
        }
        char ref_size[32] = "-", ref_ram[32] = "-";
        if (ref) {
            std::snprintf(ref_size, sizeof(ref_size), "%.2f", ref->size_ratio);
            std::snprintf(ref_ram, sizeof(ref_ram), "%.2f", ref->ram_ratio);
        }
        std::snprintf(buf, sizeof(buf), "%-20s %-18s %9.2f %11s %9.2f %10s\n", r.variant.c_str(), r.technique.c_str(),
                      size_x, ref_size, ram_x, ref_ram);
        out << buf;
    }
}

} // namespace toxedge
