#include "dame/param_vector.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dame/common.hpp"

namespace dame {

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

ParamVector::ParamVector(std::vector<ParamSegment> layout)
    : layout_(std::move(layout)) {
    std::size_t total = 0;
    for (auto& seg : layout_) {
        seg.offset = total;
        total += seg.size();
    }
    values_.assign(total, 0.0);
}

void ParamVector::require_same_layout(const ParamVector& o, const char* where) const {
    if (!same_layout(o)) {
        throw std::invalid_argument(std::string(where) + ": parameter layout mismatch");
    }
}

double* ParamVector::segment(const std::string& name) {
    return values_.data() + segment_info(name).offset;
}

const double* ParamVector::segment(const std::string& name) const {
    return values_.data() + segment_info(name).offset;
}

const ParamSegment& ParamVector::segment_info(const std::string& name) const {
    for (const auto& seg : layout_) {
        if (seg.name == name) return seg;
    }
    throw std::invalid_argument("ParamVector: no segment named '" + name + "'");
}

ParamVector& ParamVector::operator+=(const ParamVector& o) {
    require_same_layout(o, "ParamVector::operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
}

ParamVector& ParamVector::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

void ParamVector::set_zero() {
    for (double& v : values_) v = 0.0;
}

bool ParamVector::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double ParamVector::norm2() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
}

double ParamVector::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::fabs(v));
    return m;
}

ParamVector ParamVector::linear(double a, const ParamVector& x, double b,
                                const ParamVector& y) {
    x.require_same_layout(y, "ParamVector::linear");
    ParamVector out = x;
    for (std::size_t i = 0; i < out.values_.size(); ++i) {
        out.values_[i] = a * x.values_[i] + b * y.values_[i];
    }
    return out;
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& buf, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
    }
}

template <typename T>
T get(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size()) {
        throw std::runtime_error("ParamVector::deserialize: truncated buffer");
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
    }
    pos += sizeof(T);
    return static_cast<T>(v);
}

constexpr char kMagic[8] = {'D', 'A', 'M', 'E', 'P', 'V', '0', '1'};

} // namespace

std::vector<std::uint8_t> ParamVector::serialize() const {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + 8);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(layout_.size()));
    for (const auto& seg : layout_) {
        put<std::uint16_t>(buf, static_cast<std::uint16_t>(seg.name.size()));
        buf.insert(buf.end(), seg.name.begin(), seg.name.end());
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(seg.shape.size()));
        for (std::size_t d : seg.shape) put<std::uint64_t>(buf, d);
    }
    put<std::uint64_t>(buf, values_.size());
    for (double v : values_) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put<std::uint64_t>(buf, bits);
    }
    return buf;
}

std::size_t ParamVector::serialized_size() const {
    std::size_t n = 8 + 4;
    for (const auto& seg : layout_) n += 2 + seg.name.size() + 4 + 8 * seg.shape.size();
    return n + 8 + 8 * values_.size();
}

ParamVector ParamVector::deserialize(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw std::runtime_error("ParamVector::deserialize: bad magic");
    }
    pos = 8;
    auto n_seg = get<std::uint32_t>(bytes, pos);
    std::vector<ParamSegment> layout(n_seg);
    for (auto& seg : layout) {
        auto name_len = get<std::uint16_t>(bytes, pos);
        if (pos + name_len > bytes.size()) {
            throw std::runtime_error("ParamVector::deserialize: truncated name");
        }
        seg.name.assign(bytes.begin() + pos, bytes.begin() + pos + name_len);
        pos += name_len;
        auto ndims = get<std::uint32_t>(bytes, pos);
        seg.shape.resize(ndims);
        for (auto& d : seg.shape) d = get<std::uint64_t>(bytes, pos);
    }
    ParamVector out(std::move(layout));
    auto total = get<std::uint64_t>(bytes, pos);
    if (total != out.size()) {
        throw std::runtime_error("ParamVector::deserialize: value count does not match layout");
    }
    for (std::size_t i = 0; i < total; ++i) {
        std::uint64_t bits = get<std::uint64_t>(bytes, pos);
        std::memcpy(&out.values_[i], &bits, 8);
    }
    return out;
}

void ParamVector::save(const std::string& path) const {
    auto bytes = serialize();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw data_error("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

ParamVector ParamVector::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw data_error("cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

} // namespace dame
