#include "toolife/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "toolife/error.hpp"

namespace toolife::checkpoint {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'L', 'G', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint64_t kMaxBlob = 1ull << 32;

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw VersionError("checkpoint is truncated");
    return v;
}

std::string get_string(std::istream& in, std::uint64_t len) {
    if (len > kMaxBlob) throw VersionError("checkpoint entry length is implausible");
    std::string s(len, '\0');
    if (len > 0 && !in.read(s.data(), static_cast<std::streamsize>(len))) {
        throw VersionError("checkpoint is truncated");
    }
    return s;
}

}  // namespace

const Eigen::MatrixXd& Checkpoint::tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw VersionError("checkpoint has no tensor '" + name + "'");
    return it->second;
}

const std::string& Checkpoint::value(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw VersionError("checkpoint has no metadata '" + key + "'");
    return it->second;
}

void write(std::ostream& out, const Checkpoint& ckpt) {
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kFormatVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, m] : ckpt.tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
        put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
        out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.meta.size()));
    for (const auto& [key, value] : ckpt.meta) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(key.size()));
        out.write(key.data(), static_cast<std::streamsize>(key.size()));
        put<std::uint64_t>(out, value.size());
        out.write(value.data(), static_cast<std::streamsize>(value.size()));
    }
    if (!out) throw Error("checkpoint write failed");
}

Checkpoint read(std::istream& in) {
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw VersionError("not a checkpoint file");
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kFormatVersion) {
        throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported");
    }
    Checkpoint ckpt;
    const auto ntensor = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < ntensor; ++i) {
        std::string name = get_string(in, get<std::uint32_t>(in));
        const auto rows = get<std::uint64_t>(in);
        const auto cols = get<std::uint64_t>(in);
        if (rows * cols > kMaxBlob / sizeof(double)) throw VersionError("checkpoint tensor is implausibly large");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        if (m.size() > 0 &&
            !in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
            throw VersionError("checkpoint is truncated");
        }
        ckpt.tensors.emplace(std::move(name), std::move(m));
    }
    const auto nmeta = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < nmeta; ++i) {
        std::string key = get_string(in, get<std::uint32_t>(in));
        std::string value = get_string(in, get<std::uint64_t>(in));
        ckpt.meta.emplace(std::move(key), std::move(value));
    }
    return ckpt;
}

void write_file(const std::string& path, const Checkpoint& ckpt) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write checkpoint " + tmp);
        write(out, ckpt);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw ConfigError("cannot move checkpoint into place at " + path);
    }
}

Checkpoint read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint " + path);
    return read(in);
}

}  // namespace toolife::checkpoint
