#include "statiocl/num/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "statiocl/error.hpp"

namespace statiocl::num {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'T', 'C', 'L', 'C', 'K', 'P', 'T'};

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
    void raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
    void tensor_values(const Tensor& t) {
        for (double v : t.data()) f64(v);
    }
    [[nodiscard]] const std::vector<char>& bytes() const { return bytes_; }

private:
    void le(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::vector<char> bytes_;
};

class Reader {
public:
    Reader(std::vector<char> bytes, std::string source)
        : bytes_(std::move(bytes)), source_(std::move(source)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(le(8)); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    [[nodiscard]] bool at_end() const { return pos_ == bytes_.size(); }
    [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw LoadError("checkpoint " + source_ + ": truncated at byte " + std::to_string(pos_));
        }
    }
    std::uint64_t le(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    std::vector<char> bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    Writer w;
    w.raw(kMagic.data(), kMagic.size());
    w.u32(kCheckpointVersion);
    w.u64(checkpoint.epoch);
    w.u32(static_cast<std::uint32_t>(checkpoint.params.size()));
    for (const auto& p : checkpoint.params) {
        w.u32(static_cast<std::uint32_t>(p.name.size()));
        w.raw(p.name.data(), p.name.size());
        w.u32(static_cast<std::uint32_t>(p.value.rank()));
        for (std::size_t d : p.value.shape()) w.u64(d);
        w.tensor_values(p.value);
    }
    w.u8(checkpoint.adam ? 1 : 0);
    if (checkpoint.adam) {
        const AdamState& s = *checkpoint.adam;
        if (s.first_moment.size() != checkpoint.params.size() ||
            s.second_moment.size() != checkpoint.params.size()) {
            throw ContractError("save_checkpoint: optimizer state does not match parameter list");
        }
        w.u64(s.step);
        for (const auto& m : s.first_moment) w.tensor_values(m);
        for (const auto& v : s.second_moment) w.tensor_values(v);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw LoadError("cannot open checkpoint for writing: " + path.string());
    }
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) {
        throw LoadError("failed writing checkpoint: " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open checkpoint: " + path.string());
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(std::move(bytes), path.string());

    if (r.str(kMagic.size()) != std::string(kMagic.data(), kMagic.size())) {
        throw LoadError("checkpoint " + path.string() + ": bad magic bytes");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw LoadError("checkpoint " + path.string() + ": unsupported version " +
                        std::to_string(version) + " (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint ck;
    ck.epoch = r.u64();
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor p;
        p.name = r.str(r.u32());
        const std::uint32_t rank = r.u32();
        Shape shape(rank);
        for (auto& d : shape) d = r.u64();
        const std::size_t n = shape_size(shape);
        if (n > r.remaining() / 8) {
            throw LoadError("checkpoint " + path.string() + ": parameter '" + p.name +
                            "' larger than file");
        }
        std::vector<double> values(n);
        for (double& v : values) v = r.f64();
        p.value = Tensor(std::move(shape), std::move(values));
        ck.params.push_back(std::move(p));
    }
    const std::uint8_t has_adam = r.u8();
    if (has_adam > 1) {
        throw LoadError("checkpoint " + path.string() + ": bad optimizer flag");
    }
    if (has_adam == 1) {
        AdamState s;
        s.step = r.u64();
        for (auto* moments : {&s.first_moment, &s.second_moment}) {
            for (const auto& p : ck.params) {
                std::vector<double> values(p.value.size());
                for (double& v : values) v = r.f64();
                moments->emplace_back(p.value.shape(), std::move(values));
            }
        }
        ck.adam = std::move(s);
    }
    if (!r.at_end()) {
        throw LoadError("checkpoint " + path.string() + ": trailing bytes");
    }
    return ck;
}

void require_matching_layout(const ParameterSet& expected, const ParameterSet& loaded) {
    if (expected.size() != loaded.size()) {
        throw DimensionError("parameter count mismatch: expected " + std::to_string(expected.size()) +
                             ", checkpoint has " + std::to_string(loaded.size()));
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (expected[i].name != loaded[i].name) {
            throw DimensionError("parameter " + std::to_string(i) + " is '" + loaded[i].name +
                                 "', expected '" + expected[i].name + "'");
        }
        if (expected[i].value.shape() != loaded[i].value.shape()) {
            throw DimensionError("parameter '" + expected[i].name + "' has shape " +
                                 shape_string(loaded[i].value.shape()) + ", expected " +
                                 shape_string(expected[i].value.shape()));
        }
    }
}

}  // namespace statiocl::num
