#pragma once

#include "toxedge/config.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace toxedge {

inline constexpr int kSampleRate = 16000;

struct Waveform {
    std::vector<float> samples;
    int sample_rate = kSampleRate;

    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
    bool operator==(const Waveform&) const = default;
};

enum class Label : int { NonToxic = 0, Toxic = 1 };

struct LabeledUtterance {
    Waveform waveform;
    Label label = Label::NonToxic;
    std::vector<int> transcript; // token ids in [1, vocab - 1]
    std::string path;            // manifest-relative path, empty if in-memory

    bool operator==(const LabeledUtterance&) const = default;
};

// RIFF/WAVE, PCM16, mono, 16 kHz only. Samples are scaled by 1/32768.
Waveform read_wav(const std::filesystem::path& path);
Waveform parse_wav(const std::vector<std::uint8_t>& bytes);

// Writes PCM16 mono 16 kHz; samples are clamped to [-1, 1) and rounded.
void write_wav(const std::filesystem::path& path, const Waveform& w);
std::vector<std::uint8_t> encode_wav(const Waveform& w);

// Per-utterance zero mean / unit variance (variance floored at 1e-7).
Waveform normalize(const Waveform& w);

// Deterministic labelled tone-sequence corpus with a 3:1 non-toxic:toxic
// balance. Each clip is a sequence of tone segments, one per transcript
// token; toxic clips draw tokens from the upper half of the vocabulary and
// add a second harmonic, so both heads have signal to learn.
std::vector<LabeledUtterance> synth_dataset(std::uint64_t seed, std::size_t n, double duration_s,
                                            const ModelConfig& cfg);

// Number of toxic clips synth_dataset emits for n clips.
std::size_t synth_toxic_count(std::size_t n);

// Dataset directories hold WAV files plus `manifest.jsonl`, one JSON object
// per line: {"label":0|1,"path":"clip.wav","transcript":"3 1 2"}.
inline constexpr const char* kManifestName = "manifest.jsonl";

void write_dataset(const std::filesystem::path& dir, std::vector<LabeledUtterance>& items);
std::vector<LabeledUtterance> load_dataset(const std::filesystem::path& dir);

} // namespace toxedge
