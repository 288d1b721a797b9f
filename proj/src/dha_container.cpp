#include "crowdperc/dha_container.hpp"

#include "crowdperc/errors.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace crowdperc {

namespace {

constexpr char kMagic[4] = {'D', 'H', 'A', '1'};

std::uint32_t le32(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
    return v;
}

class Writer {
public:
    explicit Writer(ContainerKind kind, std::uint32_t tensors) {
        buf_.append(kMagic, 4);
        u32(static_cast<std::uint32_t>(kind));
        u32(tensors);
    }
    void u32(std::uint32_t v) {
        v = le32(v);
        buf_.append(reinterpret_cast<const char*>(&v), 4);
    }
    void tensor(std::initializer_list<Eigen::Index> dims, const float* data) {
        u32(static_cast<std::uint32_t>(dims.size()));
        std::size_t n = 1;
        for (auto d : dims) {
            u32(static_cast<std::uint32_t>(d));
            n *= static_cast<std::size_t>(d);
        }
        for (std::size_t i = 0; i < n; ++i) u32(std::bit_cast<std::uint32_t>(data[i]));
    }
    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {
        const std::size_t head = std::min<std::size_t>(bytes_.size(), 4);
        if (std::memcmp(bytes_.data(), kMagic, head) != 0) throw MalformedFile("not a DHA1 container (bad magic)");
        if (bytes_.size() < 12) {
            throw TruncatedFile("DHA1 header needs 12 bytes, got " + std::to_string(bytes_.size()));
        }
        pos_ = 4;
    }
    std::uint32_t u32() {
        if (pos_ + 4 > bytes_.size()) throw TruncatedFile("DHA1 container truncated at byte " + std::to_string(pos_));
        std::uint32_t v;
        std::memcpy(&v, bytes_.data() + pos_, 4);
        pos_ += 4;
        return le32(v);
    }
    std::vector<std::uint32_t> dims() {
        const auto rank = u32();
        if (rank == 0 || rank > 4) throw MalformedFile("DHA1 tensor rank " + std::to_string(rank) + " unsupported");
        std::vector<std::uint32_t> d(rank);
        for (auto& x : d) x = u32();
        return d;
    }
    void payload(float* out, std::size_t n) {
        if (pos_ + 4 * n > bytes_.size()) throw TruncatedFile("DHA1 payload truncated");
        for (std::size_t i = 0; i < n; ++i) out[i] = std::bit_cast<float>(u32());
    }
    void expect_end() const {
        if (pos_ != bytes_.size()) throw MalformedFile("DHA1 container has trailing bytes");
    }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

void expect_dims(const std::vector<std::uint32_t>& got, std::initializer_list<std::uint32_t> want,
                 const char* what) {
    if (!std::equal(got.begin(), got.end(), want.begin(), want.end())) {
        throw MalformedFile(std::string("DHA1 tensor '") + what + "' has unexpected shape");
    }
}

ScoreMap<float> read_matrix(Reader& r, const char* what) {
    const auto d = r.dims();
    if (d.size() != 2) throw MalformedFile(std::string("DHA1 tensor '") + what + "' must be rank 2");
    ScoreMap<float> m(d[0], d[1]);
    r.payload(m.data(), static_cast<std::size_t>(m.size()));
    return m;
}

void expect_kind(Reader& r, ContainerKind kind) {
    const auto k = r.u32();
    if (k != static_cast<std::uint32_t>(kind)) {
        throw MalformedFile("DHA1 container kind " + std::to_string(k) + ", expected " +
                            std::to_string(static_cast<std::uint32_t>(kind)));
    }
}

}  // namespace

ContainerKind peek_container_kind(const std::string& bytes) {
    Reader r(bytes);
    const auto k = r.u32();
    if (k != 1 && k != 2) throw MalformedFile("DHA1 container kind " + std::to_string(k) + " unknown");
    return static_cast<ContainerKind>(k);
}

std::string encode_attention(const AttentionWeights<float>& w) {
    if (!w.valid()) throw ShapeMismatch("attention weights must be finite C x C matrices");
    Writer out(ContainerKind::AttentionWeights, 3);
    for (const auto* m : {&w.query, &w.key, &w.value}) out.tensor({m->rows(), m->cols()}, m->data());
    return out.take();
}

AttentionWeights<float> decode_attention(const std::string& bytes) {
    Reader r(bytes);
    expect_kind(r, ContainerKind::AttentionWeights);
    if (r.u32() != 3) throw MalformedFile("DHA1 attention container must hold 3 tensors");
    AttentionWeights<float> w;
    w.query = read_matrix(r, "query");
    w.key = read_matrix(r, "key");
    w.value = read_matrix(r, "value");
    r.expect_end();
    if (!w.valid()) throw MalformedFile("DHA1 attention weights are not matching C x C matrices");
    return w;
}

std::string encode_pyramid(const HeatmapPyramid<float>& p) {
    const auto& fine = p.score(HeatmapLevel::Fine);
    for (const auto& plane : p.regression) {
        if (plane.rows() != fine.rows() || plane.cols() != fine.cols()) {
            throw ShapeMismatch("regression planes must match the fine score map");
        }
    }
    Writer out(ContainerKind::HeatmapPyramid, 4);
    for (auto level : kHeatmapLevels) {
        const auto& m = p.score(level);
        out.tensor({m.rows(), m.cols()}, m.data());
    }
    ScoreMap<float> stacked(static_cast<Eigen::Index>(kRegressionChannels) * fine.rows(), fine.cols());
    for (int c = 0; c < kRegressionChannels; ++c) {
        stacked.middleRows(c * fine.rows(), fine.rows()) = p.regression[static_cast<std::size_t>(c)];
    }
    out.tensor({kRegressionChannels, fine.rows(), fine.cols()}, stacked.data());
    return out.take();
}

HeatmapPyramid<float> decode_pyramid(const std::string& bytes) {
    Reader r(bytes);
    expect_kind(r, ContainerKind::HeatmapPyramid);
    if (r.u32() != 4) throw MalformedFile("DHA1 pyramid container must hold 4 tensors");
    HeatmapPyramid<float> p;
    for (auto level : kHeatmapLevels) p.score(level) = read_matrix(r, level_name(level));
    const auto& fine = p.score(HeatmapLevel::Fine);
    const auto d = r.dims();
    expect_dims(d,
                {static_cast<std::uint32_t>(kRegressionChannels), static_cast<std::uint32_t>(fine.rows()),
                 static_cast<std::uint32_t>(fine.cols())},
                "regression");
    ScoreMap<float> stacked(static_cast<Eigen::Index>(kRegressionChannels) * fine.rows(), fine.cols());
    r.payload(stacked.data(), static_cast<std::size_t>(stacked.size()));
    for (int c = 0; c < kRegressionChannels; ++c) {
        p.regression[static_cast<std::size_t>(c)] = stacked.middleRows(c * fine.rows(), fine.rows());
    }
    r.expect_end();
    return p;
}

std::string read_binary_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_binary_file(const std::string& bytes, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace crowdperc
