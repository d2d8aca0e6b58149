#include "morphguard/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "morphguard/error.hpp"

namespace morphguard {

namespace {

constexpr std::string_view kMagic = "MGCKPT01";

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
    void f64s(const std::vector<double>& v) {
        for (double x : v) f64(x);
    }
    void raw(std::string_view s) { out_.append(s); }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64(const char* what) {
        need(8, what);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(bits);
    }
    void f64s(std::vector<double>& v, const char* what) {
        need(8 * v.size(), what);
        for (double& x : v) x = f64(what);
    }
    std::string_view raw(std::size_t n, const char* what) {
        need(n, what);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const char* what) {
        if (remaining() < n) throw FormatError(std::string("truncated checkpoint while reading ") + what, pos_);
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t narrow(std::size_t v) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("dimension does not fit in u32");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string encode_checkpoint(const DualHeadModel& model) {
    model.validate();
    Writer w;
    w.raw(kMagic);
    w.u32(narrow(model.input_dim()));
    w.u32(narrow(model.embedding_dim()));
    w.u32(narrow(model.classes()));
    w.u32(narrow(model.layers.size()));
    for (const auto& layer : model.layers) {
        w.u32(narrow(layer.weight.rows));
        w.u32(narrow(layer.weight.cols));
        w.f64s(layer.weight.data);
        w.f64s(layer.bias);
    }
    w.f64s(model.head1.data);
    w.f64s(model.head2.data);
    return w.take();
}

DualHeadModel decode_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (r.raw(kMagic.size(), "magic") != kMagic) throw FormatError("bad checkpoint magic", 0);
    const std::size_t header_at = r.pos();
    const std::uint32_t input_dim = r.u32("input_dim");
    const std::uint32_t d = r.u32("embedding dim");
    const std::uint32_t classes = r.u32("class count");
    const std::uint32_t layer_count = r.u32("layer count");
    if (input_dim == 0 || d == 0 || classes == 0 || layer_count == 0)
        throw FormatError("zero dimension in checkpoint header", header_at);

    DualHeadModel model;
    std::size_t expect_cols = input_dim;
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        const std::size_t at = r.pos();
        const std::uint32_t rows = r.u32("layer rows");
        const std::uint32_t cols = r.u32("layer cols");
        if (rows == 0 || cols != expect_cols) throw FormatError("layer shape does not chain", at);
        if (static_cast<std::uint64_t>(rows) * cols * 8 > r.remaining())
            throw FormatError("layer larger than remaining file", at);
        DenseLayer layer{Matrix(rows, cols), Vec(rows)};
        r.f64s(layer.weight.data, "layer weights");
        r.f64s(layer.bias, "layer bias");
        model.layers.push_back(std::move(layer));
        expect_cols = rows;
    }
    if (expect_cols != d) throw FormatError("last layer width does not match embedding dim", r.pos());
    if (static_cast<std::uint64_t>(classes) * d * 16 != r.remaining())
        throw FormatError("head block size mismatch", r.pos());
    model.head1 = Matrix(classes, d);
    model.head2 = Matrix(classes, d);
    r.f64s(model.head1.data, "head1");
    r.f64s(model.head2.data, "head2");
    return model;
}

void save_checkpoint(const DualHeadModel& model, const std::filesystem::path& path) {
    const std::string bytes = encode_checkpoint(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

DualHeadModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace morphguard
