#include "toxedge/checkpoint.hpp"

#include "toxedge/error.hpp"
#include "toxedge/rng.hpp"

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <set>

namespace toxedge {

static_assert(std::endian::native == std::endian::little, "TOXW payloads are written in host order");

using nlohmann::json;

namespace {

std::uint32_t crc_update(std::uint32_t crc, const void* data, std::size_t n) {
    auto p = static_cast<const Bytef*>(data);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = static_cast<std::uint32_t>(::crc32(crc, p, chunk));
        p += chunk;
        n -= chunk;
    }
    return crc;
}

std::size_t align_up(std::size_t v) { return (v + kPayloadAlignment - 1) / kPayloadAlignment * kPayloadAlignment; }

std::string scheme_name(QuantScheme s) {
    return s == QuantScheme::SymmetricPerChannel ? "symmetric-per-channel" : "affine-per-tensor";
}

QuantScheme parse_scheme(const std::string& s) {
    if (s == "symmetric-per-channel") return QuantScheme::SymmetricPerChannel;
    if (s == "affine-per-tensor") return QuantScheme::AffinePerTensor;
    fail(ErrorKind::Format, "unknown quantization scheme '" + s + "'");
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

json config_to_json(const ModelConfig& cfg) {
    json conv = json::array();
    for (const ConvSpec& c : cfg.conv_layers) conv.push_back({c.channels, c.kernel, c.stride});
    return {{"preset", cfg.preset},        {"conv_layers", conv},         {"hidden_dim", cfg.hidden_dim},
            {"num_layers", cfg.num_layers}, {"num_heads", cfg.num_heads},   {"ffn_dim", cfg.ffn_dim},
            {"vocab_size", cfg.vocab_size}, {"num_classes", cfg.num_classes}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.preset = j.at("preset").get<std::string>();
    for (const json& c : j.at("conv_layers")) {
        cfg.conv_layers.push_back({c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>(), c.at(2).get<std::size_t>()});
    }
    cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    cfg.num_layers = j.at("num_layers").get<std::size_t>();
    cfg.num_heads = j.at("num_heads").get<std::size_t>();
    cfg.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
    cfg.num_classes = j.at("num_classes").get<std::size_t>();
    return cfg;
}

// A contiguous payload span, offset relative to the start of the data section.
struct Region {
    std::size_t offset = 0;
    std::size_t nbytes = 0;
    const void* src = nullptr;
    void* dst = nullptr;
};

struct Layout {
    std::string header;
    std::vector<Region> regions;
    std::size_t data_base = 0;
    std::size_t data_len = 0;

    std::size_t file_size() const { return data_base + data_len + 4; }
};

Layout plan(const Checkpoint& ckpt) {
    Layout layout;
    json table = json::array();
    std::size_t cursor = 0;
    auto place = [&](const void* src, std::size_t nbytes) {
        cursor = align_up(cursor);
        layout.regions.push_back({cursor, nbytes, src, nullptr});
        const std::size_t at = cursor;
        cursor += nbytes;
        return at;
    };
    for (const auto& [name, stored] : ckpt.tensors) {
        json entry = {{"name", name}, {"shape", shape_of(stored)}, {"dtype", dtype_name(dtype_of(stored))}};
        if (const auto* t = std::get_if<Tensor>(&stored)) {
            entry["nbytes"] = t->size() * sizeof(float);
            entry["offset"] = place(t->data(), t->size() * sizeof(float));
        } else {
            const auto& q = std::get<QTensor>(stored);
            entry["nbytes"] = q.values.size();
            entry["offset"] = place(q.values.data(), q.values.size());
            json quant = {{"scheme", scheme_name(q.params.scheme)}, {"bits", q.params.bits},
                          {"count", q.params.scales.size()}};
            quant["scales_offset"] = place(q.params.scales.data(), q.params.scales.size() * sizeof(float));
            quant["zero_points_offset"] =
                place(q.params.zero_points.data(), q.params.zero_points.size() * sizeof(std::int32_t));
            entry["quant"] = quant;
        }
        table.push_back(entry);
    }
    json header = {{"config", config_to_json(ckpt.config)},
                   {"provenance",
                    {{"seed", ckpt.provenance.seed},
                     {"parent_checksum", hex32(ckpt.provenance.parent_checksum)},
                     {"history", ckpt.provenance.history}}},
                   {"tensors", table}};
    layout.header = header.dump();
    // Space padding to a block boundary keeps payload offsets, and so the
    // file size, stable when only provenance text changes.
    const std::size_t padded = (16 + layout.header.size() + kHeaderBlock - 1) / kHeaderBlock * kHeaderBlock;
    layout.header.resize(padded - 16, ' ');
    layout.data_base = align_up(16 + layout.header.size());
    layout.data_len = cursor;
    return layout;
}

// Emits the serialized image (without the CRC trailer) through `sink`.
void emit(const Layout& layout, const std::function<void(const void*, std::size_t)>& sink) {
    static const std::uint8_t zeros[kPayloadAlignment] = {};
    std::uint8_t prefix[16];
    std::memcpy(prefix, kCheckpointMagic, 4);
    const std::uint32_t version = kCheckpointVersion;
    std::memcpy(prefix + 4, &version, 4);
    const std::uint64_t header_len = layout.header.size();
    std::memcpy(prefix + 8, &header_len, 8);
    sink(prefix, sizeof(prefix));
    sink(layout.header.data(), layout.header.size());
    std::size_t pos = 16 + layout.header.size();
    auto pad_to = [&](std::size_t target) {
        while (pos < target) {
            const std::size_t n = std::min(target - pos, kPayloadAlignment);
            sink(zeros, n);
            pos += n;
        }
    };
    pad_to(layout.data_base);
    for (const Region& r : layout.regions) {
        pad_to(layout.data_base + r.offset);
        if (r.nbytes) sink(r.src, r.nbytes);
        pos += r.nbytes;
    }
}

std::uint32_t crc_of_tensors(const Checkpoint& ckpt, const std::function<bool(const std::string&)>& pick) {
    std::uint32_t crc = 0;
    for (const auto& [name, stored] : ckpt.tensors) {
        if (!pick(name)) continue;
        crc = crc_update(crc, name.data(), name.size());
        if (const auto* t = std::get_if<Tensor>(&stored)) {
            crc = crc_update(crc, t->data(), t->size() * sizeof(float));
        } else {
            const auto& q = std::get<QTensor>(stored);
            crc = crc_update(crc, q.values.data(), q.values.size());
            crc = crc_update(crc, q.params.scales.data(), q.params.scales.size() * sizeof(float));
        }
    }
    return crc;
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

} // namespace

DType dtype_of(const StoredTensor& t) noexcept {
    return std::holds_alternative<Tensor>(t) ? DType::F32 : DType::Int8;
}

const Shape& shape_of(const StoredTensor& t) noexcept {
    if (const auto* f = std::get_if<Tensor>(&t)) return f->shape();
    return std::get<QTensor>(t).shape;
}

std::string dtype_name(DType d) { return d == DType::F32 ? "f32" : "int8"; }

const StoredTensor& Checkpoint::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) fail(ErrorKind::Config, "checkpoint has no tensor '" + name + "'");
    return it->second;
}

const Tensor& Checkpoint::f32(const std::string& name) const {
    const StoredTensor& s = at(name);
    if (const auto* t = std::get_if<Tensor>(&s)) return *t;
    fail(ErrorKind::Config, "tensor '" + name + "' is int8, expected f32");
}

Tensor& Checkpoint::f32_mut(const std::string& name) {
    return const_cast<Tensor&>(static_cast<const Checkpoint&>(*this).f32(name));
}

bool Checkpoint::has_int8() const {
    return std::any_of(tensors.begin(), tensors.end(),
                       [](const auto& kv) { return dtype_of(kv.second) == DType::Int8; });
}

std::size_t Checkpoint::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, stored] : tensors) n += shape_size(shape_of(stored));
    return n;
}

std::uint32_t Checkpoint::checksum() const {
    const Layout layout = plan(*this);
    std::uint32_t crc = 0;
    emit(layout, [&](const void* p, std::size_t n) { crc = crc_update(crc, p, n); });
    return crc;
}

std::uint32_t Checkpoint::encoder_checksum() const {
    return crc_of_tensors(*this, [](const std::string& n) { return is_encoder_tensor(n); });
}

std::uint32_t Checkpoint::head_checksum(const std::string& head) const {
    const std::string prefix = head + ".";
    return crc_of_tensors(*this, [&](const std::string& n) { return starts_with(n, prefix); });
}

Checkpoint init_checkpoint(const ModelConfig& cfg, std::uint64_t seed) {
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.provenance.seed = seed;
    ckpt.provenance.history.push_back("init preset=" + cfg.preset + " seed=" + std::to_string(seed));
    Rng rng(seed);
    for (const TensorSpec& spec : parameter_inventory(cfg)) {
        Tensor t(spec.shape);
        if (spec.name.ends_with(".gamma")) {
            std::fill(t.values().begin(), t.values().end(), 1.0f);
        } else if (is_weight_tensor(spec.name)) {
            const double fan_in = static_cast<double>(t.cols());
            double stddev = 0.02;
            if (starts_with(spec.name, "conv.")) stddev = std::sqrt(2.0 / fan_in);
            if (spec.name == "proj.weight") stddev = 1.0 / std::sqrt(fan_in);
            for (float& v : t.values()) v = static_cast<float>(rng.normal(0.0, stddev));
        }
        ckpt.tensors.emplace(spec.name, std::move(t));
    }
    return ckpt;
}

void check_inventory(const Checkpoint& ckpt) {
    std::string problems;
    std::set<std::string> expected;
    for (const TensorSpec& spec : parameter_inventory(ckpt.config)) {
        expected.insert(spec.name);
        auto it = ckpt.tensors.find(spec.name);
        if (it == ckpt.tensors.end()) {
            problems += " missing " + spec.name + ";";
        } else if (shape_of(it->second) != spec.shape) {
            problems += " " + spec.name + " has shape " + shape_string(shape_of(it->second)) + ", expected " +
                        shape_string(spec.shape) + ";";
        }
    }
    for (const auto& [name, stored] : ckpt.tensors) {
        if (!expected.count(name)) problems += " extra " + name + ";";
    }
    if (!problems.empty()) fail(ErrorKind::Config, "tensor inventory mismatch:" + problems);
}

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
    const Layout layout = plan(ckpt);
    std::vector<std::uint8_t> out;
    out.reserve(layout.file_size());
    emit(layout, [&](const void* p, std::size_t n) {
        auto b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    });
    const std::uint32_t crc = crc_update(0, out.data(), out.size());
    const auto* c = reinterpret_cast<const std::uint8_t*>(&crc);
    out.insert(out.end(), c, c + 4);
    return out;
}

std::size_t save(const Checkpoint& ckpt, const std::filesystem::path& path) {
    check_inventory(ckpt);
    const Layout layout = plan(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open for writing: " + path.string());
    std::uint32_t crc = 0;
    std::size_t written = 0;
    emit(layout, [&](const void* p, std::size_t n) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        crc = crc_update(crc, p, n);
        written += n;
    });
    out.write(reinterpret_cast<const char*>(&crc), 4);
    out.flush();
    if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
    return written + 4;
}

namespace {

bool file_crc_ok(const std::filesystem::path& path, std::size_t file_size) {
    if (file_size < 4) return false;
    std::ifstream in(path, std::ios::binary);
    std::vector<char> buf(1 << 16);
    std::uint32_t crc = 0;
    std::size_t left = file_size - 4;
    while (left > 0 && in) {
        const std::size_t n = std::min(left, buf.size());
        in.read(buf.data(), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) return false;
        crc = crc_update(crc, buf.data(), n);
        left -= n;
    }
    std::uint32_t stored = 0;
    in.read(reinterpret_cast<char*>(&stored), 4);
    return in.gcount() == 4 && stored == crc;
}

} // namespace

Checkpoint load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open checkpoint: " + path.string());
    std::error_code ec;
    const std::size_t file_size = std::filesystem::file_size(path, ec);
    if (ec) fail(ErrorKind::Io, "cannot stat " + path.string() + ": " + ec.message());

    std::uint32_t crc = 0;
    std::size_t pos = 0;
    auto read_exact = [&](void* dst, std::size_t n) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) {
            fail(ErrorKind::Parse, path.string() + ": truncated at byte " + std::to_string(pos));
        }
        crc = crc_update(crc, dst, n);
        pos += n;
    };

    std::uint8_t prefix[16];
    read_exact(prefix, sizeof(prefix));
    if (std::memcmp(prefix, kCheckpointMagic, 4) != 0) fail(ErrorKind::Magic, path.string() + ": not a TOXW checkpoint");
    std::uint32_t version = 0;
    std::memcpy(&version, prefix + 4, 4);
    if (version != kCheckpointVersion) {
        fail(ErrorKind::Version, path.string() + ": format version " + std::to_string(version) +
                                     " unsupported (this build reads " + std::to_string(kCheckpointVersion) + ")");
    }
    std::uint64_t header_len = 0;
    std::memcpy(&header_len, prefix + 8, 8);
    if (header_len > file_size) fail(ErrorKind::Parse, path.string() + ": header length exceeds file size");
    std::string header_text(header_len, '\0');
    read_exact(header_text.data(), header_text.size());

    // A damaged header usually fails to parse before the payload CRC is
    // reached; blame the CRC when the whole file does not check out.
    auto fail_structural = [&](ErrorKind kind, const std::string& msg) {
        if (!file_crc_ok(path, file_size)) fail(ErrorKind::Crc, msg + " (CRC mismatch)");
        fail(kind, msg);
    };

    Checkpoint ckpt;
    std::vector<Region> regions;
    std::size_t data_len = 0;
    try {
        const json header = json::parse(header_text);
        ckpt.config = config_from_json(header.at("config"));
        const json& prov = header.at("provenance");
        ckpt.provenance.seed = prov.at("seed").get<std::uint64_t>();
        ckpt.provenance.parent_checksum =
            static_cast<std::uint32_t>(std::stoul(prov.at("parent_checksum").get<std::string>(), nullptr, 16));
        ckpt.provenance.history = prov.at("history").get<std::vector<std::string>>();
        for (const json& entry : header.at("tensors")) {
            const auto name = entry.at("name").get<std::string>();
            const auto shape = entry.at("shape").get<Shape>();
            const auto dtype = entry.at("dtype").get<std::string>();
            const auto offset = entry.at("offset").get<std::size_t>();
            const auto nbytes = entry.at("nbytes").get<std::size_t>();
            if (ckpt.tensors.count(name)) fail(ErrorKind::Format, "duplicate tensor '" + name + "'");
            if (dtype == "f32") {
                if (nbytes != shape_size(shape) * sizeof(float)) fail(ErrorKind::Format, "bad byte count for " + name);
                auto [it, ok] = ckpt.tensors.emplace(name, Tensor(shape));
                regions.push_back({offset, nbytes, nullptr, std::get<Tensor>(it->second).data()});
            } else if (dtype == "int8") {
                if (nbytes != shape_size(shape)) fail(ErrorKind::Format, "bad byte count for " + name);
                const json& quant = entry.at("quant");
                QTensor q;
                q.shape = shape;
                q.values.resize(nbytes);
                q.params.scheme = parse_scheme(quant.at("scheme").get<std::string>());
                q.params.bits = quant.at("bits").get<int>();
                const auto count = quant.at("count").get<std::size_t>();
                q.params.scales.resize(count);
                q.params.zero_points.resize(count);
                auto [it, ok] = ckpt.tensors.emplace(name, std::move(q));
                auto& stored = std::get<QTensor>(it->second);
                regions.push_back({offset, nbytes, nullptr, stored.values.data()});
                regions.push_back({quant.at("scales_offset").get<std::size_t>(), count * sizeof(float), nullptr,
                                   stored.params.scales.data()});
                regions.push_back({quant.at("zero_points_offset").get<std::size_t>(),
                                   count * sizeof(std::int32_t), nullptr, stored.params.zero_points.data()});
            } else {
                fail(ErrorKind::Format, "tensor '" + name + "' has unknown dtype '" + dtype + "'");
            }
        }
    } catch (const json::exception& e) {
        fail_structural(ErrorKind::Parse, path.string() + ": malformed header: " + e.what());
    } catch (const Error& e) {
        fail_structural(e.kind(), path.string() + ": " + e.what());
    }

    std::sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) { return a.offset < b.offset; });
    for (std::size_t i = 0; i < regions.size(); ++i) {
        if (i > 0 && regions[i].offset < regions[i - 1].offset + regions[i - 1].nbytes) {
            fail_structural(ErrorKind::Format, path.string() + ": overlapping tensor payloads");
        }
        data_len = std::max(data_len, regions[i].offset + regions[i].nbytes);
    }
    const std::size_t data_base = align_up(16 + header_len);
    if (data_base + data_len + 4 != file_size) {
        fail_structural(ErrorKind::Parse, path.string() + ": file is " + std::to_string(file_size) + " bytes, layout needs " +
                                   std::to_string(data_base + data_len + 4));
    }

    std::uint8_t scratch[kPayloadAlignment];
    auto skip_to = [&](std::size_t target) {
        while (pos < target) {
            const std::size_t n = std::min(target - pos, sizeof(scratch));
            read_exact(scratch, n);
        }
    };
    skip_to(data_base);
    for (const Region& r : regions) {
        skip_to(data_base + r.offset);
        if (r.nbytes) read_exact(r.dst, r.nbytes);
    }
    const std::uint32_t computed = crc;
    std::uint32_t stored_crc = 0;
    read_exact(&stored_crc, 4);
    if (computed != stored_crc) {
        fail(ErrorKind::Crc, path.string() + ": CRC mismatch (stored " + hex32(stored_crc) + ", computed " +
                                 hex32(computed) + ")");
    }

    try {
        ckpt.config.validate();
        check_inventory(ckpt);
    } catch (const Error& e) {
        fail(e.kind(), path.string() + ": " + e.what());
    }
    return ckpt;
}

std::size_t model_size_bytes(const std::filesystem::path& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) fail(ErrorKind::Io, "cannot stat " + path.string() + ": " + ec.message());
    return static_cast<std::size_t>(size);
}

} // namespace toxedge
