#include "biolite/weights.hpp"

#include <cstring>
#include <fstream>

#include <zlib.h>

namespace biolite {

namespace {

constexpr char kMagic[4] = {'B', 'L', 'U', '1'};
constexpr uint16_t kVersion = 1;

void put_u16(std::vector<uint8_t>& buf, uint16_t v) {
    buf.push_back(static_cast<uint8_t>(v & 0xff));
    buf.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<uint8_t>& buf, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

uint32_t crc_of(const std::vector<uint8_t>& buf, std::size_t len) {
    return static_cast<uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(len)));
}

// Bounds-checked cursor over the raw file bytes.
class Reader {
public:
    Reader(const std::vector<uint8_t>& buf, const std::string& path)
        : buf_(buf), path_(path) {}

    std::size_t pos() const { return pos_; }

    void need(std::size_t n, const std::string& what) {
        if (pos_ + n > buf_.size()) {
            throw FormatError("weights file " + path_ + ": truncated while reading " + what +
                              " at byte offset " + std::to_string(pos_));
        }
    }

    uint16_t u16(const std::string& what) {
        need(2, what);
        uint16_t v = static_cast<uint16_t>(buf_[pos_] | (buf_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    uint32_t u32(const std::string& what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    uint8_t u8(const std::string& what) {
        need(1, what);
        return buf_[pos_++];
    }

    float f32(const std::string& what) {
        uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string str(std::size_t n, const std::string& what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    void f32_block(float* dst, std::size_t count, const std::string& what) {
        need(count * 4, what);
        std::memcpy(dst, buf_.data() + pos_, count * 4);
        pos_ += count * 4;
    }

private:
    const std::vector<uint8_t>& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

} // namespace

void save_weights(const std::filesystem::path& path, const ModelParams& params,
                  const NormConstants& norm) {
    std::vector<uint8_t> buf;
    buf.reserve(64 + static_cast<std::size_t>(count_params(params.config)) * 4 + 512);
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u16(buf, kVersion);
    put_u16(buf, 0); // reserved

    const ArchConfig& c = params.config;
    put_u32(buf, static_cast<uint32_t>(c.in_channels));
    put_u32(buf, static_cast<uint32_t>(c.num_classes));
    put_u32(buf, static_cast<uint32_t>(c.enc_channels[0]));
    put_u32(buf, static_cast<uint32_t>(c.enc_channels[1]));
    put_u32(buf, static_cast<uint32_t>(c.bottleneck_channels));
    put_u32(buf, static_cast<uint32_t>(c.dec_channels[0]));
    put_u32(buf, static_cast<uint32_t>(c.dec_channels[1]));
    for (int i = 0; i < 3; ++i) put_f32(buf, norm.mean[i]);
    for (int i = 0; i < 3; ++i) put_f32(buf, norm.std[i]);

    auto entries = param_entries(const_cast<ModelParams&>(params));
    put_u32(buf, static_cast<uint32_t>(entries.size()));
    for (const auto& e : entries) {
        put_u16(buf, static_cast<uint16_t>(e.name.size()));
        buf.insert(buf.end(), e.name.begin(), e.name.end());
        buf.push_back(0); // dtype f32
        buf.push_back(static_cast<uint8_t>(e.dims.size()));
        for (int d : e.dims) put_u32(buf, static_cast<uint32_t>(d));
        const std::size_t bytes = e.size * 4;
        const std::size_t off = buf.size();
        buf.resize(off + bytes);
        std::memcpy(buf.data() + off, e.data, bytes);
    }

    put_u32(buf, crc_of(buf, buf.size()));

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open weights file for writing: " + path.string());
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw DataError("failed writing weights file: " + path.string());
}

LoadedModel load_weights(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open weights file: " + path.string());
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
    const std::string p = path.string();
    if (buf.size() < 68) {
        throw FormatError("weights file " + p + ": too small (" + std::to_string(buf.size()) +
                          " bytes) to be a BLU1 file");
    }

    Reader r(buf, p);
    const std::string magic = r.str(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
        throw FormatError("weights file " + p + ": bad magic at byte offset 0");
    }
    const uint16_t version = r.u16("version");
    if (version != kVersion) {
        throw FormatError("weights file " + p + ": unsupported format version " +
                          std::to_string(version) + " at byte offset 4 (expected " +
                          std::to_string(kVersion) + ")");
    }
    r.u16("reserved");

    ArchConfig config;
    config.in_channels = static_cast<int>(r.u32("arch config"));
    config.num_classes = static_cast<int>(r.u32("arch config"));
    config.enc_channels[0] = static_cast<int>(r.u32("arch config"));
    config.enc_channels[1] = static_cast<int>(r.u32("arch config"));
    config.bottleneck_channels = static_cast<int>(r.u32("arch config"));
    config.dec_channels[0] = static_cast<int>(r.u32("arch config"));
    config.dec_channels[1] = static_cast<int>(r.u32("arch config"));
    try {
        config.validate();
    } catch (const Error& e) {
        throw FormatError("weights file " + p + ": invalid arch config: " + e.what());
    }

    LoadedModel out;
    for (int i = 0; i < 3; ++i) out.norm.mean[i] = r.f32("norm constants");
    for (int i = 0; i < 3; ++i) out.norm.std[i] = r.f32("norm constants");

    out.params = zero_params<float>(config);
    auto entries = param_entries(out.params);

    const uint32_t layer_count = r.u32("layer count");
    if (layer_count != entries.size()) {
        throw FormatError("weights file " + p + ": layer count " + std::to_string(layer_count) +
                          " does not match the " + std::to_string(entries.size()) +
                          " tensors implied by the arch config");
    }
    for (auto& e : entries) {
        const std::size_t rec_off = r.pos();
        const uint16_t name_len = r.u16("record name length for layer '" + e.name + "'");
        const std::string name = r.str(name_len, "record name for layer '" + e.name + "'");
        if (name != e.name) {
            throw FormatError("weights file " + p + ": record at byte offset " +
                              std::to_string(rec_off) + " names layer '" + name +
                              "', expected '" + e.name + "'");
        }
        const uint8_t dtype = r.u8("dtype of layer '" + e.name + "'");
        if (dtype != 0) {
            throw FormatError("weights file " + p + ": layer '" + e.name +
                              "': unsupported dtype tag " + std::to_string(dtype));
        }
        const uint8_t rank = r.u8("rank of layer '" + e.name + "'");
        if (rank != e.dims.size()) {
            throw FormatError("weights file " + p + ": layer '" + e.name + "': rank " +
                              std::to_string(rank) + ", expected " +
                              std::to_string(e.dims.size()));
        }
        for (std::size_t d = 0; d < e.dims.size(); ++d) {
            const uint32_t dim = r.u32("shape of layer '" + e.name + "'");
            if (dim != static_cast<uint32_t>(e.dims[d])) {
                throw FormatError("weights file " + p + ": layer '" + e.name +
                                  "': dimension " + std::to_string(d) + " is " +
                                  std::to_string(dim) + ", expected " +
                                  std::to_string(e.dims[d]));
            }
        }
        r.f32_block(e.data, e.size, "payload of layer '" + e.name + "'");
    }

    const std::size_t crc_off = r.pos();
    const uint32_t stored_crc = r.u32("crc32");
    if (crc_off + 4 != buf.size()) {
        throw FormatError("weights file " + p + ": " +
                          std::to_string(buf.size() - crc_off - 4) +
                          " unexpected trailing bytes after byte offset " +
                          std::to_string(crc_off + 4));
    }
    const uint32_t actual_crc = crc_of(buf, crc_off);
    if (stored_crc != actual_crc) {
        throw FormatError("weights file " + p + ": crc32 mismatch at byte offset " +
                          std::to_string(crc_off) + " (file is corrupted)");
    }
    return out;
}

} // namespace biolite
