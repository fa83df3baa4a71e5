#include "toxedge/audio.hpp"

#include "toxedge/error.hpp"
#include "toxedge/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

namespace toxedge {

namespace {

std::uint16_t u16le(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

} // namespace

Waveform parse_wav(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12) fail(ErrorKind::Parse, "WAV truncated: missing RIFF header");
    if (std::memcmp(bytes.data(), "RIFF", 4) != 0) fail(ErrorKind::Format, "WAV container: expected RIFF");
    if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) fail(ErrorKind::Format, "WAV container: expected WAVE");

    bool have_fmt = false;
    std::size_t pos = 12;
    while (true) {
        if (pos + 8 > bytes.size()) fail(ErrorKind::Parse, "WAV truncated: no data chunk");
        const std::uint8_t* chunk = bytes.data() + pos;
        const std::uint32_t size = u32le(chunk + 4);
        const std::size_t body = pos + 8;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16 || body + 16 > bytes.size()) fail(ErrorKind::Parse, "WAV truncated: short fmt chunk");
            const std::uint8_t* f = bytes.data() + body;
            const std::uint16_t format = u16le(f);
            const std::uint16_t channels = u16le(f + 2);
            const std::uint32_t rate = u32le(f + 4);
            const std::uint16_t bits = u16le(f + 14);
            if (format != 1) fail(ErrorKind::Format, "WAV audio_format=" + std::to_string(format) + " (expected 1, PCM)");
            if (channels != 1) fail(ErrorKind::Format, "WAV channels=" + std::to_string(channels) + " (expected 1)");
            if (rate != kSampleRate) {
                fail(ErrorKind::Format, "WAV sample_rate=" + std::to_string(rate) + " (expected 16000)");
            }
            if (bits != 16) fail(ErrorKind::Format, "WAV bits_per_sample=" + std::to_string(bits) + " (expected 16)");
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            if (!have_fmt) fail(ErrorKind::Format, "WAV data chunk precedes fmt chunk");
            if (body + size > bytes.size()) fail(ErrorKind::Parse, "WAV truncated: data chunk overruns file");
            if (size % 2 != 0) fail(ErrorKind::Parse, "WAV data chunk has odd byte count");
            if (size == 0) fail(ErrorKind::Format, "WAV data chunk is empty");
            Waveform w;
            w.samples.resize(size / 2);
            const std::uint8_t* d = bytes.data() + body;
            for (std::size_t i = 0; i < w.samples.size(); ++i) {
                const auto s = static_cast<std::int16_t>(u16le(d + 2 * i));
                w.samples[i] = static_cast<float>(s) / 32768.0f;
            }
            return w;
        }
        pos = body + size + (size & 1u);
    }
}

Waveform read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open WAV file: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_wav(bytes);
    } catch (const Error& e) {
        fail(e.kind(), path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_wav(const Waveform& w) {
    const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, 1);
    put_u16(out, 1);
    put_u32(out, kSampleRate);
    put_u32(out, kSampleRate * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    put_tag(out, "data");
    put_u32(out, data_bytes);
    for (float s : w.samples) {
        const double scaled = std::nearbyint(static_cast<double>(s) * 32768.0);
        const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
        put_u16(out, static_cast<std::uint16_t>(q));
    }
    return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
    const auto bytes = encode_wav(w);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write WAV file: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "short write: " + path.string());
}

Waveform normalize(const Waveform& w) {
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.resize(w.samples.size());
    if (w.samples.empty()) return out;
    double mean = 0.0;
    for (float s : w.samples) mean += s;
    mean /= static_cast<double>(w.samples.size());
    double var = 0.0;
    for (float s : w.samples) var += (s - mean) * (s - mean);
    var /= static_cast<double>(w.samples.size());
    const double inv = 1.0 / std::sqrt(std::max(var, 1e-7));
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        out.samples[i] = static_cast<float>((w.samples[i] - mean) * inv);
    }
    return out;
}

std::size_t synth_toxic_count(std::size_t n) {
    auto toxic = static_cast<std::size_t>(std::lround(static_cast<double>(n) / 4.0));
    return std::clamp<std::size_t>(toxic, 1, n - 1);
}

std::vector<LabeledUtterance> synth_dataset(std::uint64_t seed, std::size_t n, double duration_s,
                                            const ModelConfig& cfg) {
    if (n < 2) fail(ErrorKind::Parameter, "synth_dataset needs n >= 2");
    if (!(duration_s >= 0.25)) fail(ErrorKind::Parameter, "synth_dataset needs duration >= 0.25 s");
    if (cfg.vocab_size < 2) fail(ErrorKind::Config, "vocabulary needs at least one non-blank token");

    const std::size_t toxic = synth_toxic_count(n);
    std::vector<Label> labels(n, Label::NonToxic);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(toxic), Label::Toxic);
    Rng order(derive_seed(seed, 0));
    order.shuffle(labels);

    const int tokens = static_cast<int>(cfg.vocab_size) - 1;
    const int half = (tokens + 1) / 2;
    const int lo_max = std::max(1, half);
    const int hi_min = tokens > 1 ? std::min(tokens, half + 1) : 1;
    auto frequency = [tokens](int token) {
        return tokens == 1 ? 600.0 : 200.0 + (token - 1) * (3400.0 / (tokens - 1));
    };

    const auto total = static_cast<std::size_t>(std::lround(duration_s * kSampleRate));
    const std::size_t segments = std::max<std::size_t>(1, static_cast<std::size_t>(duration_s / 0.25));
    const std::size_t seg_len = total / segments;

    std::vector<LabeledUtterance> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, i + 1));
        LabeledUtterance& u = out[i];
        u.label = labels[i];
        const bool is_toxic = u.label == Label::Toxic;
        const int first = is_toxic ? hi_min : 1;
        const int last = is_toxic ? tokens : lo_max;

        int prev = -1;
        for (std::size_t s = 0; s < segments; ++s) {
            int tok = first + static_cast<int>(rng.index(static_cast<std::uint64_t>(last - first + 1)));
            if (tok == prev && last > first) tok = tok == last ? first : tok + 1;
            u.transcript.push_back(tok);
            prev = tok;
        }

        u.waveform.samples.assign(total, 0.0f);
        for (std::size_t s = 0; s < segments; ++s) {
            const double f = frequency(u.transcript[s]);
            const double amp = rng.uniform(0.3, 0.6);
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const std::size_t begin = s * seg_len;
            const std::size_t end = s + 1 == segments ? total : begin + seg_len;
            const double len = static_cast<double>(end - begin);
            for (std::size_t t = begin; t < end; ++t) {
                const double x = static_cast<double>(t - begin);
                const double env = std::sin(std::numbers::pi * (x + 0.5) / len);
                const double arg = 2.0 * std::numbers::pi * f * static_cast<double>(t) / kSampleRate + phase;
                double v = std::sin(arg);
                if (is_toxic) v += 0.8 * std::sin(2.0 * arg) + 0.5 * std::sin(3.0 * arg);
                u.waveform.samples[t] += static_cast<float>(amp * env * v);
            }
        }
        for (float& v : u.waveform.samples) {
            v = std::clamp(v + static_cast<float>(0.05 * rng.normal()), -0.999f, 0.999f);
        }
    }
    return out;
}

void write_dataset(const std::filesystem::path& dir, std::vector<LabeledUtterance>& items) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create dataset directory " + dir.string() + ": " + ec.message());
    std::ofstream manifest(dir / kManifestName);
    if (!manifest) fail(ErrorKind::Io, "cannot write manifest in " + dir.string());
    for (std::size_t i = 0; i < items.size(); ++i) {
        LabeledUtterance& u = items[i];
        char name[32];
        std::snprintf(name, sizeof(name), "clip_%05zu.wav", i);
        u.path = name;
        write_wav(dir / u.path, u.waveform);
        std::string transcript;
        for (std::size_t k = 0; k < u.transcript.size(); ++k) {
            if (k) transcript += ' ';
            transcript += std::to_string(u.transcript[k]);
        }
        nlohmann::json rec = {{"path", u.path}, {"label", static_cast<int>(u.label)}, {"transcript", transcript}};
        manifest << rec.dump() << '\n';
    }
    if (!manifest) fail(ErrorKind::Io, "short write on manifest in " + dir.string());
}

std::vector<LabeledUtterance> load_dataset(const std::filesystem::path& dir) {
    std::ifstream manifest(dir / kManifestName);
    if (!manifest) fail(ErrorKind::Io, "no " + std::string(kManifestName) + " in " + dir.string());
    std::vector<LabeledUtterance> items;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = (dir / kManifestName).string() + ":" + std::to_string(line_no);
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Parse, where + ": " + e.what());
        }
        if (!rec.is_object() || !rec.contains("path") || !rec.contains("label") || !rec.contains("transcript")) {
            fail(ErrorKind::Format, where + ": record needs path, label and transcript");
        }
        LabeledUtterance u;
        try {
            u.path = rec.at("path").get<std::string>();
            const int label = rec.at("label").get<int>();
            if (label != 0 && label != 1) fail(ErrorKind::Format, where + ": label must be 0 or 1");
            u.label = static_cast<Label>(label);
            std::istringstream tokens(rec.at("transcript").get<std::string>());
            int tok = 0;
            while (tokens >> tok) u.transcript.push_back(tok);
            if (!tokens.eof()) fail(ErrorKind::Format, where + ": transcript must be integer token ids");
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Format, where + ": " + e.what());
        }
        if (u.transcript.empty()) fail(ErrorKind::Format, where + ": empty transcript");
        u.waveform = read_wav(dir / u.path);
        items.push_back(std::move(u));
    }
    return items;
}

} // namespace toxedge
