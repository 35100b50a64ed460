#pragma once

// Versioned binary container for named f64 tensors plus string metadata.
//
// Layout (little-endian):
//   magic    8 bytes  "LGTCKPT\0"
//   version  u32
//   ntensor  u32, then per tensor:
//     name_len u32, name bytes, rows u64, cols u64, rows*cols f64 (column-major)
//   nmeta    u32, then per entry:
//     key_len u32, key bytes, value_len u64, value bytes

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace toolife::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Checkpoint {
    std::map<std::string, Eigen::MatrixXd> tensors;
    std::map<std::string, std::string> meta;

    /// Throws VersionError naming the missing entry.
    const Eigen::MatrixXd& tensor(const std::string& name) const;
    const std::string& value(const std::string& key) const;
};

void write(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read(std::istream& in);

/// Writes to a temporary sibling and renames it into place.
void write_file(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_file(const std::string& path);

}  // namespace toolife::checkpoint
