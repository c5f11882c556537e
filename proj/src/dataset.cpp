#include "pointcolor/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "pointcolor/geometry_io.hpp"
#include "pointcolor/tensor_io.hpp"

namespace pointcolor {

namespace {
constexpr char kFrameMagic[8] = {'P', 'C', 'F', 'R', 'A', 'M', 'E', '1'};
} // namespace

std::vector<std::uint8_t> encode_colored_frame(const PointSample& sample) {
    sample.check_consistent();
    if (sample.colors.size() != sample.points.size()) {
        throw data_error("colored frame: colors required for every point");
    }
    std::vector<std::uint8_t> bytes;
    bytes.reserve(8 + 4 + sample.size() * 15);
    bytes.insert(bytes.end(), kFrameMagic, kFrameMagic + 8);
    const std::uint32_t n = static_cast<std::uint32_t>(sample.size());
    const std::uint8_t* np = reinterpret_cast<const std::uint8_t*>(&n);
    bytes.insert(bytes.end(), np, np + 4);
    for (const auto& p : sample.points) {
        for (int axis = 0; axis < 3; ++axis) {
            const float v = static_cast<float>(p(axis));
            const std::uint8_t* vp = reinterpret_cast<const std::uint8_t*>(&v);
            bytes.insert(bytes.end(), vp, vp + 4);
        }
    }
    for (const Color& c : sample.colors) {
        for (int ch = 0; ch < 3; ++ch) {
            const double scaled = std::round(c[ch] * 255.0);
            if (!(scaled >= 0.0 && scaled <= 255.0)) {
                throw data_error("colored frame: color channel outside [0, 1]");
            }
            bytes.push_back(static_cast<std::uint8_t>(scaled));
        }
    }
    return bytes;
}

void save_colored_frame(const PointSample& sample, const std::filesystem::path& path) {
    write_file_atomic(path, encode_colored_frame(sample));
}

PointSample load_colored_frame(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kFrameMagic, 8) != 0) {
        throw io_error("colored frame " + path.string() + ": bad magic");
    }
    std::uint32_t n;
    std::memcpy(&n, bytes.data() + 8, 4);
    const std::size_t expected = 12 + static_cast<std::size_t>(n) * 15;
    if (bytes.size() != expected) {
        throw io_error("colored frame " + path.string() + ": truncated or oversized");
    }
    PointSample sample;
    sample.points.resize(n);
    sample.colors.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        float v[3];
        std::memcpy(v, bytes.data() + 12 + 12 * i, 12);
        sample.points[i] = Eigen::Vector3d(v[0], v[1], v[2]);
    }
    const std::size_t color_base = 12 + static_cast<std::size_t>(n) * 12;
    for (std::uint32_t i = 0; i < n; ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            sample.colors[i][ch] = bytes[color_base + 3 * i + ch] / 255.0;
        }
    }
    return sample;
}

void save_label_sidecar(const std::vector<int>& labels, const std::vector<int>& instance_ids,
                        const std::filesystem::path& path) {
    if (labels.size() != instance_ids.size()) {
        throw data_error("label sidecar: label/instance length mismatch");
    }
    std::vector<std::uint8_t> bytes;
    bytes.reserve(labels.size() * 4);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] > 0xffff || instance_ids[i] < 0 ||
            instance_ids[i] > 0xffff) {
            throw data_error("label sidecar: value outside u16 range");
        }
        const std::uint16_t pair[2] = {static_cast<std::uint16_t>(labels[i]),
                                       static_cast<std::uint16_t>(instance_ids[i])};
        const std::uint8_t* p = reinterpret_cast<const std::uint8_t*>(pair);
        bytes.insert(bytes.end(), p, p + 4);
    }
    write_file_atomic(path, bytes);
}

void load_label_sidecar(const std::filesystem::path& path, std::vector<int>& labels,
                        std::vector<int>& instance_ids) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() % 4 != 0) {
        throw io_error("label sidecar " + path.string() + ": length not a multiple of 4");
    }
    const std::size_t n = bytes.size() / 4;
    labels.resize(n);
    instance_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint16_t pair[2];
        std::memcpy(pair, bytes.data() + 4 * i, 4);
        labels[i] = pair[0];
        instance_ids[i] = pair[1];
    }
}

std::vector<std::string> list_frame_ids(const std::filesystem::path& dir,
                                        const std::string& extension) {
    std::vector<std::string> ids;
    if (!std::filesystem::is_directory(dir)) {
        return ids;
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) {
            ids.push_back(entry.path().stem().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<PointSample> load_dataset(const std::filesystem::path& dir) {
    std::vector<PointSample> frames;
    for (const std::string& id : list_frame_ids(dir, ".pcf")) {
        frames.push_back(load_colored_frame(dir / (id + ".pcf")));
    }
    for (const std::string& id : list_frame_ids(dir, ".bin")) {
        const PointCloud cloud = parse_point_bin(read_file_bytes(dir / (id + ".bin")));
        PointSample sample;
        sample.points = cloud.points;
        const std::filesystem::path sidecar = dir / (id + ".lbl");
        if (std::filesystem::exists(sidecar)) {
            load_label_sidecar(sidecar, sample.labels, sample.instance_ids);
            if (sample.labels.size() != sample.points.size()) {
                throw io_error("frame " + id + ": sidecar length != point count");
            }
        }
        frames.push_back(std::move(sample));
    }
    if (frames.empty()) {
        throw data_error("load_dataset: no frames in " + dir.string());
    }
    return frames;
}

} // namespace pointcolor
