#include "pointcolor/tensor_io.hpp"

#include <atomic>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pointcolor/common.hpp"

namespace pointcolor {

namespace {
constexpr char kTensorMagic[6] = {'P', 'C', 'T', 'E', 'N', 'S'};
constexpr std::uint8_t kTensorVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw io_error("tensor stream truncated");
    }
    return v;
}
} // namespace

void write_tensor_block(std::ostream& out, const Eigen::MatrixXd& tensor, TensorDType dtype) {
    write_pod(out, static_cast<std::uint8_t>(dtype));
    write_pod(out, static_cast<std::uint32_t>(2));
    write_pod(out, static_cast<std::uint64_t>(tensor.rows()));
    write_pod(out, static_cast<std::uint64_t>(tensor.cols()));
    if (dtype == TensorDType::F64) {
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(sizeof(double) * tensor.size()));
    } else {
        const Eigen::MatrixXf f32 = tensor.cast<float>();
        out.write(reinterpret_cast<const char*>(f32.data()),
                  static_cast<std::streamsize>(sizeof(float) * f32.size()));
    }
}

Eigen::MatrixXd read_tensor_block(std::istream& in) {
    const auto dtype = read_pod<std::uint8_t>(in);
    const auto rank = read_pod<std::uint32_t>(in);
    if (rank != 2) {
        throw io_error("tensor block: unsupported rank " + std::to_string(rank));
    }
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    Eigen::MatrixXd tensor(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (dtype == static_cast<std::uint8_t>(TensorDType::F64)) {
        in.read(reinterpret_cast<char*>(tensor.data()),
                static_cast<std::streamsize>(sizeof(double) * tensor.size()));
    } else if (dtype == static_cast<std::uint8_t>(TensorDType::F32)) {
        Eigen::MatrixXf f32(tensor.rows(), tensor.cols());
        in.read(reinterpret_cast<char*>(f32.data()),
                static_cast<std::streamsize>(sizeof(float) * f32.size()));
        tensor = f32.cast<double>();
    } else {
        throw io_error("tensor block: unknown dtype " + std::to_string(dtype));
    }
    if (!in) {
        throw io_error("tensor block truncated");
    }
    return tensor;
}

void save_tensor(const Eigen::MatrixXd& tensor, const std::filesystem::path& path,
                 TensorDType dtype) {
    std::ostringstream out(std::ios::binary);
    out.write(kTensorMagic, sizeof(kTensorMagic));
    write_pod(out, kTensorVersion);
    write_tensor_block(out, tensor, dtype);
    write_file_atomic(path, out.str());
}

Eigen::MatrixXd load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open tensor file " + path.string());
    }
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, kTensorMagic, 6) != 0) {
        throw io_error("tensor file " + path.string() + ": bad magic");
    }
    if (read_pod<std::uint8_t>(in) != kTensorVersion) {
        throw io_error("tensor file " + path.string() + ": unsupported version");
    }
    return read_tensor_block(in);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    const std::filesystem::path dir =
        path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::filesystem::create_directories(dir);
    static std::atomic<unsigned> salt{0};
    const std::filesystem::path tmp =
        dir / (path.filename().string() + ".tmp" + std::to_string(salt.fetch_add(1)));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw io_error("cannot open " + tmp.string() + " for writing");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            std::filesystem::remove(tmp);
            throw io_error("short write to " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    write_file_atomic(path,
                      std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

std::string read_file_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open " + path.string());
    }
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace pointcolor
