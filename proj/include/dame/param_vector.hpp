#ifndef DAME_PARAM_VECTOR_HPP
#define DAME_PARAM_VECTOR_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dame {

// One named tensor inside the flat parameter vector.
struct ParamSegment {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0; // start index into values

    std::size_t size() const {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }
    bool operator==(const ParamSegment& o) const {
        return name == o.name && shape == o.shape && offset == o.offset;
    }
};

// Flat, shape-annotated parameter vector. All aggregation arithmetic in the
// federation happens on these; two vectors may be combined only when their
// layouts are identical.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::vector<ParamSegment> layout);

    const std::vector<ParamSegment>& layout() const { return layout_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    std::size_t size() const { return values_.size(); }

    bool same_layout(const ParamVector& o) const { return layout_ == o.layout_; }
    void require_same_layout(const ParamVector& o, const char* where) const;

    double* segment(const std::string& name);
    const double* segment(const std::string& name) const;
    const ParamSegment& segment_info(const std::string& name) const;

    // Layout-preserving elementwise arithmetic.
    ParamVector& operator+=(const ParamVector& o);
    ParamVector& operator*=(double s);
    void set_zero();
    bool all_finite() const;
    double norm2() const;
    double max_abs() const;

    // this = a*x + b*y (layouts must all match).
    static ParamVector linear(double a, const ParamVector& x, double b,
                              const ParamVector& y);

    // Little-endian binary format: header of named shapes, then raw doubles.
    std::vector<std::uint8_t> serialize() const;
    static ParamVector deserialize(const std::vector<std::uint8_t>& bytes);
    std::size_t serialized_size() const;

    void save(const std::string& path) const;
    static ParamVector load(const std::string& path);

private:
    std::vector<ParamSegment> layout_;
    std::vector<double> values_;
};

} // namespace dame

#endif
