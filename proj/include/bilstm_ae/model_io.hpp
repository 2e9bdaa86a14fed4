#pragma once

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace bilstm_ae {

/**
 * Binary model container, all integers little-endian:
 *
 *   magic      8 bytes  "BLAEMODL"
 *   version    u32      kModelFormatVersion
 *   cfg_len    u32      byte length of the config block
 *   config     lookback u64, features u64, bidirectional u8, seed u64,
 *              n_enc u32, n_enc x u64 widths, n_dec u32, n_dec x u64 widths
 *   hdr_crc    u32      CRC-32 of every byte before it
 *   count      u64      number of parameters
 *   params     count x f64 (IEEE-754 bits), canonical tensor order
 *   body_crc   u32      CRC-32 of count + params
 *
 * See docs/model_format.md.
 */
inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr char kModelMagic[8] = {'B', 'L', 'A', 'E', 'M', 'O', 'D', 'L'};

namespace detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int k = 0; k < 4; ++k) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void u64(std::uint64_t v) {
        for (int k = 0; k < 8; ++k) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    std::size_t size() const { return bytes_.size(); }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return b_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) throw ModelTruncatedError(std::string("model file truncated while reading ") + what);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return b_[pos_++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * k);
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * k);
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

private:
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; model files stay far below 4 GiB but chunk anyway.
    std::size_t off = 0;
    while (off < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
        crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

} // namespace detail

inline std::vector<std::uint8_t> serialize_model(const ModelParams& model) {
    detail::ByteWriter w;
    const ModelConfig& c = model.config;
    w.raw(kModelMagic, sizeof kModelMagic);
    w.u32(kModelFormatVersion);

    detail::ByteWriter cfg;
    cfg.u64(c.lookback);
    cfg.u64(c.features);
    cfg.u8(c.bidirectional ? 1 : 0);
    cfg.u64(c.seed);
    cfg.u32(static_cast<std::uint32_t>(c.encoder_widths.size()));
    for (auto v : c.encoder_widths) cfg.u64(v);
    cfg.u32(static_cast<std::uint32_t>(c.decoder_widths.size()));
    for (auto v : c.decoder_widths) cfg.u64(v);

    w.u32(static_cast<std::uint32_t>(cfg.size()));
    auto& out = w.bytes();
    out.insert(out.end(), cfg.bytes().begin(), cfg.bytes().end());
    w.u32(detail::crc32_of(out));

    const std::size_t body_start = out.size();
    w.u64(parameter_count(model));
    for_each_tensor(model, [&w](std::span<const double> t) {
        for (double v : t) w.f64(v);
    });
    w.u32(detail::crc32_of(std::span<const std::uint8_t>(out).subspan(body_start)));
    return std::move(out);
}

inline ModelParams deserialize_model(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    r.need(sizeof kModelMagic, "magic");
    if (std::memcmp(bytes.data(), kModelMagic, sizeof kModelMagic) != 0) {
        throw ModelCorruptError("not a model file (bad magic bytes)");
    }
    for (std::size_t k = 0; k < sizeof kModelMagic; ++k) r.u8("magic");
    const std::uint32_t version = r.u32("version");
    if (version != kModelFormatVersion) {
        throw ModelVersionError("unsupported model format version " + std::to_string(version) + " (expected " +
                                std::to_string(kModelFormatVersion) + ")");
    }
    const std::uint32_t cfg_len = r.u32("config length");
    r.need(static_cast<std::size_t>(cfg_len) + 4, "config block");
    const std::size_t header_end = r.pos() + cfg_len;
    {
        detail::ByteReader peek(bytes.subspan(header_end, 4));
        const std::uint32_t stored = peek.u32("header checksum");
        if (stored != detail::crc32_of(bytes.first(header_end))) {
            throw ModelCorruptError("model header checksum mismatch");
        }
    }

    ModelConfig c;
    c.lookback = r.u64("lookback");
    c.features = r.u64("features");
    const std::uint8_t bidi = r.u8("direction flag");
    if (bidi > 1) throw ModelCorruptError("invalid direction flag in model header");
    c.bidirectional = bidi == 1;
    c.seed = r.u64("seed");
    auto read_widths = [&r](const char* what) {
        const std::uint32_t n = r.u32(what);
        r.need(static_cast<std::size_t>(n) * 8, what);
        std::vector<std::size_t> widths(n);
        for (auto& v : widths) v = r.u64(what);
        return widths;
    };
    c.encoder_widths = read_widths("encoder widths");
    c.decoder_widths = read_widths("decoder widths");
    if (r.pos() != header_end) throw ModelCorruptError("model config block length mismatch");
    r.u32("header checksum");

    ModelParams model;
    try {
        model = zero_model(c);
    } catch (const std::invalid_argument& e) {
        throw ModelShapeError(std::string("model header describes an invalid architecture: ") + e.what());
    }

    const std::size_t body_start = r.pos();
    const std::uint64_t count = r.u64("parameter count");
    if (count != parameter_count(model)) {
        throw ModelShapeError("model file holds " + std::to_string(count) + " parameters but its config implies " +
                              std::to_string(parameter_count(model)));
    }
    r.need(count * 8 + 4, "parameters");
    for_each_tensor(model, [&r](std::span<double> t) {
        for (double& v : t) v = r.f64("parameters");
    });
    const std::size_t body_end = r.pos();
    const std::uint32_t body_crc = r.u32("body checksum");
    if (body_crc != detail::crc32_of(bytes.subspan(body_start, body_end - body_start))) {
        throw ModelCorruptError("model parameter checksum mismatch");
    }
    if (r.remaining() != 0) throw ModelCorruptError("trailing bytes after model payload");
    return model;
}

inline void save_model(const ModelParams& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline ModelParams load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelLoadError("cannot open model file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

} // namespace bilstm_ae
