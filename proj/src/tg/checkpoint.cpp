#include "cosmo/tg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tg {

namespace {

constexpr char kMagic[4] = {'T', 'G', 'C', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

Tensor Checkpoint::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
    return it->second;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    os.write(kMagic, 4);
    write_pod<uint32_t>(os, kVersion);
    write_pod<uint64_t>(os, meta.size());
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    write_pod<uint64_t>(os, tensors_.size());
    for (const auto& [name, t] : tensors_) {
        write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<uint8_t>(os, sizeof(Scalar) == 8 ? 0 : 1);
        write_pod<uint32_t>(os, static_cast<uint32_t>(t.shape().size()));
        for (int d : t.shape()) write_pod<uint32_t>(os, static_cast<uint32_t>(d));
        os.write(reinterpret_cast<const char*>(t.data().data()),
                 static_cast<std::streamsize>(t.data().size() * sizeof(Scalar)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint32_t version = read_pod<uint32_t>(is);
    if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version");
    Checkpoint ck;
    uint64_t meta_len = read_pod<uint64_t>(is);
    ck.meta.resize(meta_len);
    is.read(ck.meta.data(), static_cast<std::streamsize>(meta_len));
    uint64_t n = read_pod<uint64_t>(is);
    for (uint64_t i = 0; i < n; ++i) {
        uint32_t name_len = read_pod<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        uint8_t dtype = read_pod<uint8_t>(is);
        if (dtype != (sizeof(Scalar) == 8 ? 0 : 1))
            throw std::runtime_error("checkpoint: scalar width mismatch");
        uint32_t ndim = read_pod<uint32_t>(is);
        std::vector<int> shape(ndim);
        int64_t numel = 1;
        for (auto& d : shape) {
            d = static_cast<int>(read_pod<uint32_t>(is));
            numel *= d;
        }
        std::vector<Scalar> data(static_cast<size_t>(numel));
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(Scalar)));
        if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
        ck.tensors_[name] = Tensor::from_data(shape, std::move(data));
    }
    return ck;
}

uint64_t Checkpoint::file_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    uint64_t h = 1469598103934665603ULL;
    char buf[4096];
    while (is) {
        is.read(buf, sizeof(buf));
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace tg
