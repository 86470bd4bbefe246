#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "moce/errors.hpp"
#include "moce/model.hpp"

namespace moce::model {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'O', 'C', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    const std::vector<unsigned char>& buffer() const { return buf_; }

private:
    std::vector<unsigned char> buf_;
};

class Reader {
public:
    Reader(std::span<const unsigned char> data, std::string path) : data_(data), path_(std::move(path)) {}

    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw ParseError("checkpoint " + path_ + ": truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint64_t n = u64();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    std::span<const unsigned char> data_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string file_checksum(const std::string& path) {
    const auto data = read_file(path);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(data)));
    return hex;
}

void save_checkpoint(const std::string& path, const MoceModel& model, const std::string& metadata) {
    Writer w;
    w.bytes(kMagic.data(), kMagic.size());
    w.u32(kVersion);
    w.str(model.config().to_json());
    w.str(metadata);
    const auto params = model.parameters();
    w.u64(params.size());
    for (const auto& p : params) {
        w.str(p.name);
        const auto& shape = p.tensor.shape();
        w.u32(static_cast<std::uint32_t>(shape.size()));
        for (std::size_t d : shape) w.u64(d);
        for (double v : p.tensor.values()) w.f64(v);
    }
    const std::uint64_t checksum = fnv1a64(w.buffer());
    w.u64(checksum);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write checkpoint " + path);
    out.write(reinterpret_cast<const char*>(w.buffer().data()),
              static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw InputError("failed writing checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    const auto data = read_file(path);
    if (data.size() < kMagic.size() + 4 + 8 ||
        std::memcmp(data.data(), kMagic.data(), kMagic.size()) != 0) {
        throw ParseError("checkpoint " + path + ": bad magic");
    }
    const std::span<const unsigned char> body(data.data(), data.size() - 8);
    Reader tail(std::span<const unsigned char>(data).subspan(data.size() - 8), path);
    if (tail.u64() != fnv1a64(body)) throw ChecksumError("checkpoint " + path + ": checksum mismatch");

    Reader r(body, path);
    r.u64();  // magic, checked above
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw ParseError("checkpoint " + path + ": unsupported version " + std::to_string(version));
    }
    const ModelConfig config = ModelConfig::from_json(r.str());
    config.validate();
    std::string metadata = r.str();

    std::map<std::string, std::pair<num::Shape, std::vector<double>>> stored;
    const std::uint64_t count = r.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = r.str();
        const std::uint32_t rank = r.u32();
        num::Shape shape(rank);
        for (auto& d : shape) d = r.u64();
        std::vector<double> values(num::shape_numel(shape));
        for (double& v : values) v = r.f64();
        stored.emplace(std::move(name), std::make_pair(std::move(shape), std::move(values)));
    }
    if (r.pos() != body.size()) throw ParseError("checkpoint " + path + ": trailing bytes");

    MoceModel model = MoceModel::create(config, 0);
    const auto params = model.parameters();
    if (params.size() != stored.size()) {
        throw ParseError("checkpoint " + path + ": expected " + std::to_string(params.size()) +
                         " tensors, found " + std::to_string(stored.size()));
    }
    for (const auto& p : params) {
        const auto it = stored.find(p.name);
        if (it == stored.end()) throw ParseError("checkpoint " + path + ": missing tensor " + p.name);
        if (it->second.first != p.tensor.shape()) {
            throw ParseError("checkpoint " + path + ": tensor " + p.name + " has shape " +
                             num::shape_str(it->second.first) + ", expected " +
                             num::shape_str(p.tensor.shape()));
        }
        auto dst = p.tensor.mutable_values();
        std::copy(it->second.second.begin(), it->second.second.end(), dst.begin());
    }
    return LoadedCheckpoint{std::move(model), std::move(metadata)};
}

}  // namespace moce::model
