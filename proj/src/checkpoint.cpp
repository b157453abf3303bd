#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "anomet/encoder.hpp"
#include "anomet/errors.hpp"

namespace anomet {

namespace {

// 8-byte magic; the trailing digit doubles as a hint but the real format
// version is the explicit field after it.
constexpr char kMagic[8] = {'A', 'N', 'O', 'M', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

// All integers and reals are stored little-endian regardless of host order.

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    put_u64(out, std::bit_cast<uint64_t>(d));
}

class Reader {
  public:
    Reader(std::string bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

    void expect_magic() {
        if (bytes_.size() < sizeof(kMagic) || std::memcmp(bytes_.data(), kMagic, sizeof(kMagic)) != 0) {
            throw ValidationError(name_ + ": not a checkpoint file (bad magic)");
        }
        pos_ = sizeof(kMagic);
    }

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte(pos_ + i)) << (8 * i);
        pos_ += 4;
        return v;
    }

    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(byte(pos_ + i)) << (8 * i);
        pos_ += 8;
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    void expect_end() const {
        if (pos_ != bytes_.size()) {
            throw ValidationError(name_ + ": trailing bytes after checkpoint payload");
        }
    }

  private:
    unsigned char byte(size_t i) const { return static_cast<unsigned char>(bytes_[i]); }

    void need(size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw ValidationError(name_ + ": truncated checkpoint (needed " + std::to_string(n) +
                                  " more bytes at offset " + std::to_string(pos_) + ")");
        }
    }

    std::string bytes_;
    std::string name_;
    size_t pos_ = 0;
};

void put_mat(std::string& out, const Mat& m) {
    for (double d : m.data) put_f64(out, d);
}

Mat read_mat(Reader& r, size_t rows, size_t cols) {
    Mat m(rows, cols);
    for (double& d : m.data) d = r.f64();
    return m;
}

} // namespace

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, kVersion);
    put_u64(out, params.seed);

    const EncoderDims& d = params.dims;
    put_u32(out, static_cast<uint32_t>(d.input_dim));
    put_u32(out, static_cast<uint32_t>(d.hidden_dims.size()));
    for (size_t h : d.hidden_dims) put_u32(out, static_cast<uint32_t>(h));
    put_u32(out, static_cast<uint32_t>(d.embed_dim));
    put_u32(out, static_cast<uint32_t>(d.head_hidden_dim));
    put_u32(out, static_cast<uint32_t>(d.proj_dim));

    for (const DenseLayer& layer : params.layers) {
        put_mat(out, layer.w);
        for (double b : layer.b) put_f64(out, b);
    }
    put_mat(out, params.head_w1);
    put_mat(out, params.head_w2);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot open " + path.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    f.flush();
    if (!f) throw ValidationError("failed writing checkpoint to " + path.string());
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open checkpoint " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r(std::move(bytes), path.string());
    r.expect_magic();
    const uint32_t version = r.u32();
    if (version != kVersion) {
        throw ValidationError(path.string() + ": unsupported checkpoint version " +
                              std::to_string(version));
    }

    EncoderParams params;
    params.seed = r.u64();
    params.dims.input_dim = r.u32();
    const uint32_t n_hidden = r.u32();
    // A width list longer than any plausible network means a corrupt header;
    // bail before trying to allocate from it.
    if (n_hidden > 1024) {
        throw ValidationError(path.string() + ": implausible hidden layer count " +
                              std::to_string(n_hidden));
    }
    params.dims.hidden_dims.resize(n_hidden);
    for (uint32_t i = 0; i < n_hidden; ++i) params.dims.hidden_dims[i] = r.u32();
    params.dims.embed_dim = r.u32();
    params.dims.head_hidden_dim = r.u32();
    params.dims.proj_dim = r.u32();

    const EncoderDims& d = params.dims;
    if (d.input_dim == 0 || d.embed_dim == 0 || d.head_hidden_dim == 0 || d.proj_dim == 0) {
        throw ValidationError(path.string() + ": checkpoint declares zero-width layer");
    }

    size_t fan_in = d.input_dim;
    std::vector<size_t> widths = d.hidden_dims;
    widths.push_back(d.embed_dim);
    for (size_t width : widths) {
        DenseLayer layer;
        layer.w = read_mat(r, width, fan_in);
        layer.b.resize(width);
        for (double& b : layer.b) b = r.f64();
        params.layers.push_back(std::move(layer));
        fan_in = width;
    }
    params.head_w1 = read_mat(r, d.head_hidden_dim, d.embed_dim);
    params.head_w2 = read_mat(r, d.proj_dim, d.head_hidden_dim);
    r.expect_end();
    return params;
}

} // namespace anomet
