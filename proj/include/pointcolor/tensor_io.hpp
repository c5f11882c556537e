#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pointcolor {

// Little-endian binary tensor block: dtype byte (0 = f32, 1 = f64),
// rank u32, dims as u64, then the payload in storage order.
enum class TensorDType : std::uint8_t { F32 = 0, F64 = 1 };

void write_tensor_block(std::ostream& out, const Eigen::MatrixXd& tensor, TensorDType dtype);
Eigen::MatrixXd read_tensor_block(std::istream& in);

// Standalone tensor file: magic "PCTENS", version byte, one tensor block.
void save_tensor(const Eigen::MatrixXd& tensor, const std::filesystem::path& path,
                 TensorDType dtype = TensorDType::F32);
Eigen::MatrixXd load_tensor(const std::filesystem::path& path);

// Atomic file write: the payload lands under a temporary name in the
// target directory and is renamed into place, so failed runs leave no
// partial output behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

} // namespace pointcolor
