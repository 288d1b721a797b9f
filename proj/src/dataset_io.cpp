#include "crowdperc/dataset_io.hpp"

#include "crowdperc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <future>
#include <limits>
#include <set>
#include <sstream>

namespace crowdperc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_atomic(const std::string& text, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << text;
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::size_t line_of_byte(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw MalformedFile(origin, line_of_byte(text, e.byte), e.what());
    }
}

// Schema navigation with JSON-pointer diagnostics.
class Reader {
public:
    Reader(const json& node, std::string ptr, const std::string& origin)
        : node_(node), ptr_(std::move(ptr)), origin_(origin) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw SchemaViolation(origin_, ptr_.empty() ? "/" : ptr_, what);
    }

    Reader at(const std::string& key) const {
        if (!node_.is_object()) fail("expected object");
        auto it = node_.find(key);
        if (it == node_.end()) {
            throw SchemaViolation(origin_, ptr_ + "/" + key, "missing field");
        }
        return Reader(*it, ptr_ + "/" + key, origin_);
    }
    bool has(const std::string& key) const {
        return node_.is_object() && node_.contains(key) && !node_.at(key).is_null();
    }
    Reader at(std::size_t i) const {
        return Reader(node_.at(i), ptr_ + "/" + std::to_string(i), origin_);
    }
    std::size_t array_size() const {
        if (!node_.is_array()) fail("expected array");
        return node_.size();
    }
    double number() const {
        if (!node_.is_number()) fail("expected number");
        const double v = node_.get<double>();
        if (!std::isfinite(v)) fail("non-finite number");
        return v;
    }
    double positive() const {
        const double v = number();
        if (!(v > 0)) fail("must be > 0");
        return v;
    }
    std::int64_t integer() const {
        if (!node_.is_number_integer()) fail("expected integer");
        return node_.get<std::int64_t>();
    }
    std::int64_t non_negative() const {
        const auto v = integer();
        if (v < 0) fail("must be >= 0");
        return v;
    }
    std::string string() const {
        if (!node_.is_string()) fail("expected string");
        return node_.get<std::string>();
    }

private:
    const json& node_;
    std::string ptr_;
    const std::string& origin_;
};

Box3D read_box3d(const Reader& r) {
    Box3D b;
    b.x = r.at("x").number();
    b.y = r.at("y").number();
    b.z = r.at("z").number();
    b.l = r.at("l").positive();
    b.w = r.at("w").positive();
    b.h = r.at("h").positive();
    b.theta = normalize_angle(r.at("theta").number());
    return b;
}

Box2D read_box2d(const Reader& r) {
    return {r.at("x").number(), r.at("y").number(), r.at("w").positive(), r.at("h").positive()};
}

Instance read_instance(const Reader& r) {
    Instance inst;
    inst.track_id = r.at("track_id").non_negative();
    inst.box3d = read_box3d(r.at("box3d"));
    if (r.has("box2d")) inst.box2d = read_box2d(r.at("box2d"));
    const auto occ = r.at("occlusion");
    const auto level = occ.integer();
    if (level < 0 || level > 2) occ.fail("occlusion must be 0, 1 or 2, got " + std::to_string(level));
    inst.occlusion = static_cast<OcclusionLevel>(level);
    inst.num_points = r.at("num_points").non_negative();
    return inst;
}

json box3d_json(const Box3D& b) {
    return {{"x", b.x}, {"y", b.y}, {"z", b.z}, {"l", b.l},
            {"w", b.w}, {"h", b.h}, {"theta", b.theta}};
}

}  // namespace

Sequence parse_sequence(const std::string& text, const std::string& origin) {
    const json doc = parse_json(text, origin);
    const Reader root(doc, "", origin);
    if (!doc.is_object()) root.fail("expected object");

    Sequence seq;
    seq.sequence_id = root.at("sequence_id").string();
    const auto meta = root.at("meta");
    seq.meta.weather = meta.at("weather").string();
    seq.meta.scene = meta.at("scene").string();

    if (root.has("calibration")) {
        const auto cal = root.at("calibration");
        if (cal.array_size() != 12) cal.fail("calibration must hold 12 numbers");
        ProjectionMatrix p;
        for (int i = 0; i < 12; ++i) p.data()[i] = cal.at(static_cast<std::size_t>(i)).number();
        seq.calibration = p;
    }

    const auto frames = root.at("frames");
    const std::size_t nf = frames.array_size();
    seq.frames.reserve(nf);
    for (std::size_t i = 0; i < nf; ++i) {
        const auto fr = frames.at(i);
        Frame f;
        f.frame_index = fr.at("frame_index").integer();
        f.timestamp = fr.at("timestamp").number();
        f.pointcloud_ref = fr.at("pointcloud").string();
        const auto insts = fr.at("instances");
        const std::size_t ni = insts.array_size();
        f.instances.reserve(ni);
        for (std::size_t k = 0; k < ni; ++k) f.instances.push_back(read_instance(insts.at(k)));
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

Sequence load_sequence(const fs::path& path) {
    return parse_sequence(read_text(path), path.string());
}

std::string serialize_sequence(const Sequence& seq) {
    json doc;
    doc["sequence_id"] = seq.sequence_id;
    doc["meta"] = {{"weather", seq.meta.weather}, {"scene", seq.meta.scene}};
    if (seq.calibration) {
        json cal = json::array();
        for (int i = 0; i < 12; ++i) cal.push_back(seq.calibration->data()[i]);
        doc["calibration"] = std::move(cal);
    }
    json frames = json::array();
    for (const auto& f : seq.frames) {
        json insts = json::array();
        for (const auto& inst : f.instances) {
            json j = {{"track_id", inst.track_id},
                      {"box3d", box3d_json(inst.box3d)},
                      {"occlusion", static_cast<int>(inst.occlusion)},
                      {"num_points", inst.num_points}};
            if (inst.box2d) {
                j["box2d"] = {{"x", inst.box2d->x}, {"y", inst.box2d->y},
                              {"w", inst.box2d->w}, {"h", inst.box2d->h}};
            }
            insts.push_back(std::move(j));
        }
        frames.push_back({{"frame_index", f.frame_index},
                          {"timestamp", f.timestamp},
                          {"pointcloud", f.pointcloud_ref},
                          {"instances", std::move(insts)}});
    }
    doc["frames"] = std::move(frames);
    return doc.dump(1) + "\n";
}

void write_sequence(const Sequence& seq, const fs::path& path) {
    write_text_atomic(serialize_sequence(seq), path);
}

// ---------------------------------------------------------------------------

namespace {

static_assert(sizeof(float) == 4);

float from_le(std::uint32_t bits) {
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    return std::bit_cast<float>(bits);
}

std::uint32_t to_le(float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    return bits;
}

}  // namespace

PointCloud load_pointcloud(const fs::path& path) {
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec) throw Error("cannot stat " + path.string() + ": " + ec.message());
    if (size % kPointRecordBytes != 0) {
        throw TruncatedFile(path.string() + ": size " + std::to_string(size) +
                            " is not a multiple of " + std::to_string(kPointRecordBytes));
    }
    const auto n = static_cast<Eigen::Index>(size / kPointRecordBytes);
    std::vector<std::uint32_t> raw(static_cast<std::size_t>(n) * 4);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
    if (in.gcount() != static_cast<std::streamsize>(size)) {
        throw TruncatedFile(path.string() + ": short read");
    }

    PointCloud pc;
    pc.points.resize(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int c = 0; c < 4; ++c) {
            const float v = from_le(raw[static_cast<std::size_t>(i * 4 + c)]);
            if (!std::isfinite(v)) throw NonFiniteValue(path.string(), static_cast<std::size_t>(i));
            pc.points(i, c) = v;
        }
    }
    return pc;
}

void write_pointcloud(const PointCloud& pc, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::vector<std::uint32_t> raw(static_cast<std::size_t>(pc.size()) * 4);
    for (Eigen::Index i = 0; i < pc.size(); ++i) {
        for (int c = 0; c < 4; ++c) raw[static_cast<std::size_t>(i * 4 + c)] = to_le(pc.points(i, c));
    }
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(raw.data()),
                  static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------

std::string DatasetLayout::pointcloud_ref(const std::string& id, std::int64_t frame_index) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06lld.bin", static_cast<long long>(frame_index));
    return "pointclouds/" + id + "/" + name;
}

Splits load_splits(const fs::path& path) {
    const std::string origin = path.string();
    const std::string text = read_text(path);
    const json doc = parse_json(text, origin);
    const Reader root(doc, "", origin);
    if (!doc.is_object()) root.fail("expected object");
    Splits splits;
    for (const auto& [name, ids] : doc.items()) {
        const auto r = root.at(name);
        const std::size_t n = r.array_size();
        auto& out = splits[name];
        for (std::size_t i = 0; i < n; ++i) out.push_back(r.at(i).string());
    }
    return splits;
}

void write_splits(const Splits& splits, const fs::path& path) {
    write_text_atomic(json(splits).dump(1) + "\n", path);
}

std::vector<std::string> list_sequences(const fs::path& root) {
    std::vector<std::string> ids;
    const DatasetLayout layout{root};
    if (!fs::is_directory(layout.sequences_dir())) return ids;
    for (const auto& entry : fs::directory_iterator(layout.sequences_dir())) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            ids.push_back(entry.path().stem().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers; results stay indexed.
template <typename Fn>
auto parallel_map(std::size_t n, int threads, Fn fn) {
    using R = decltype(fn(std::size_t{0}));
    std::vector<R> out(n);
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::future<R>> pending;
    std::size_t next = 0;
    while (next < n || !pending.empty()) {
        while (next < n && pending.size() < static_cast<std::size_t>(threads)) {
            pending.push_back(std::async(std::launch::async, fn, next++));
        }
        const std::size_t done = next - pending.size();
        out[done] = pending.front().get();
        pending.erase(pending.begin());
    }
    return out;
}

}  // namespace

std::vector<Sequence> load_dataset(const fs::path& root, int threads) {
    const DatasetLayout layout{root};
    const auto ids = list_sequences(root);
    return parallel_map(ids.size(), threads,
                        [&](std::size_t i) { return load_sequence(layout.sequence_file(ids[i])); });
}

namespace {

void check_sequence(const DatasetLayout& layout, const std::string& id,
                    const ValidationOptions& opts, ValidationReport& report) {
    const auto file = layout.sequence_file(id);
    const std::string loc = file.string();
    Sequence seq;
    try {
        seq = load_sequence(file);
    } catch (const Error& e) {
        report.errors.push_back({loc, e.what()});
        return;
    }
    report.sequences_checked++;
    report.frames_checked += seq.frames.size();

    if (seq.sequence_id != id) {
        report.errors.push_back({loc, "sequence_id '" + seq.sequence_id + "' does not match file name"});
    }
    if (seq.frames.size() < opts.min_frames || seq.frames.size() > opts.max_frames) {
        report.warnings.push_back({loc, "frame count " + std::to_string(seq.frames.size()) +
                                            " outside [" + std::to_string(opts.min_frames) + ", " +
                                            std::to_string(opts.max_frames) + "]"});
    }

    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        const Frame& f = seq.frames[i];
        const std::string floc = loc + "#/frames/" + std::to_string(i);
        if (f.frame_index != seq.frames.front().frame_index + static_cast<std::int64_t>(i)) {
            report.errors.push_back({floc, "frame index " + std::to_string(f.frame_index) + " breaks the contiguous run"});
        }
        if (i > 0) {
            const Frame& prev = seq.frames[i - 1];
            const double dt = f.timestamp - prev.timestamp;
            if (!(dt > 0)) {
                report.errors.push_back({floc, "timestamps not strictly increasing"});
            } else if (std::abs(dt - opts.nominal_frame_spacing) >
                       opts.spacing_tolerance * opts.nominal_frame_spacing + 1e-12) {
                report.warnings.push_back({floc, "frame spacing " + std::to_string(dt) +
                                                     " s deviates more than 10% from nominal"});
            }
        }

        const auto cloud = layout.resolve(f.pointcloud_ref);
        std::error_code ec;
        if (!fs::is_regular_file(cloud, ec)) {
            report.errors.push_back({floc, "missing point cloud " + f.pointcloud_ref});
        } else if (fs::file_size(cloud, ec) % kPointRecordBytes != 0) {
            report.errors.push_back({floc, "truncated point cloud " + f.pointcloud_ref});
        }

        std::set<std::int64_t> ids_in_frame;
        for (std::size_t k = 0; k < f.instances.size(); ++k) {
            const Instance& inst = f.instances[k];
            const std::string iloc = floc + "/instances/" + std::to_string(k);
            if (!ids_in_frame.insert(inst.track_id).second) {
                report.errors.push_back({iloc, "duplicate track_id " + std::to_string(inst.track_id)});
            }
            if (inst.num_points < kMinAnnotatedPoints) {
                report.warnings.push_back({iloc, "num_points " + std::to_string(inst.num_points) +
                                                     " below annotation floor of 15"});
            }
        }
    }
}

}  // namespace

ValidationReport validate_dataset(const fs::path& root, const ValidationOptions& opts) {
    ValidationReport report;
    const DatasetLayout layout{root};
    if (!fs::is_directory(layout.sequences_dir())) {
        report.errors.push_back({layout.sequences_dir().string(), "missing sequences directory"});
        return report;
    }
    const auto ids = list_sequences(root);
    auto partial = parallel_map(ids.size(), opts.threads, [&](std::size_t i) {
        ValidationReport r;
        check_sequence(layout, ids[i], opts, r);
        return r;
    });
    for (auto& r : partial) {
        report.sequences_checked += r.sequences_checked;
        report.frames_checked += r.frames_checked;
        report.errors.insert(report.errors.end(), r.errors.begin(), r.errors.end());
        report.warnings.insert(report.warnings.end(), r.warnings.begin(), r.warnings.end());
    }

    if (fs::exists(layout.splits_file())) {
        try {
            const std::set<std::string> known(ids.begin(), ids.end());
            for (const auto& [name, members] : load_splits(layout.splits_file())) {
                for (const auto& id : members) {
                    if (!known.count(id)) {
                        report.errors.push_back({layout.splits_file().string(),
                                                 "split '" + name + "' references unknown sequence " + id});
                    }
                }
            }
        } catch (const Error& e) {
            report.errors.push_back({layout.splits_file().string(), e.what()});
        }
    }
    return report;
}

}  // namespace crowdperc

namespace crowdperc {

std::optional<Box2D> project_box(const ProjectionMatrix& p, const Box3D& b, double width, double height) {
    const auto corners = box_corners_bev(b);
    double u0 = std::numeric_limits<double>::infinity(), v0 = u0;
    double u1 = -u0, v1 = -u0;
    for (const auto& c : corners) {
        for (double dz : {-0.5 * b.h, 0.5 * b.h}) {
            const Eigen::Vector3d uvw = p * Eigen::Vector4d(c.x(), c.y(), b.z + dz, 1.0);
            if (!(uvw.z() > 1e-6)) return std::nullopt;
            const double u = uvw.x() / uvw.z(), v = uvw.y() / uvw.z();
            u0 = std::min(u0, u);
            v0 = std::min(v0, v);
            u1 = std::max(u1, u);
            v1 = std::max(v1, v);
        }
    }
    u0 = std::max(u0, 0.0);
    v0 = std::max(v0, 0.0);
    u1 = std::min(u1, width);
    v1 = std::min(v1, height);
    if (!(u1 > u0) || !(v1 > v0)) return std::nullopt;
    return Box2D{u0, v0, u1 - u0, v1 - v0};
}

}  // namespace crowdperc
