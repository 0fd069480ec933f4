#include "ismo/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace ismo {

namespace {

constexpr char kMagic[8] = {'I', 'S', 'M', 'O', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.ndim()));
    for (int d : t.shape()) write_pod<std::int32_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::string& path, nn::Module& module, std::uint64_t config_hash) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, 8);
    write_pod(os, kVersion);
    write_pod(os, config_hash);
    auto params = module.params();
    auto buffers = module.buffers();
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size() + buffers.size()));
    for (nn::Param* p : params) write_tensor(os, p->name, p->value);
    for (auto& [name, t] : buffers) write_tensor(os, name, *t);
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::uint64_t load_checkpoint(const std::string& path, nn::Module& module) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    if (read_pod<std::uint32_t>(is) != kVersion)
        throw std::runtime_error("checkpoint: unsupported version in " + path);
    const std::uint64_t hash = read_pod<std::uint64_t>(is);
    const std::uint32_t count = read_pod<std::uint32_t>(is);

    std::map<std::string, Tensor*> targets;
    for (nn::Param* p : module.params()) targets[p->name] = &p->value;
    for (auto& [name, t] : module.buffers()) targets[name] = t;

    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = read_pod<std::uint32_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        const std::uint32_t ndim = read_pod<std::uint32_t>(is);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = read_pod<std::int32_t>(is);
        auto it = targets.find(name);
        if (it == targets.end())
            throw std::runtime_error("checkpoint: unknown tensor '" + name + "' in " + path);
        if (it->second->shape() != shape)
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "' in " + path);
        is.read(reinterpret_cast<char*>(it->second->data()),
                static_cast<std::streamsize>(it->second->size() * sizeof(double)));
        targets.erase(it);
    }
    if (!is) throw std::runtime_error("checkpoint: truncated file: " + path);
    if (!targets.empty())
        throw std::runtime_error("checkpoint: missing tensor '" + targets.begin()->first +
                                 "' in " + path);
    return hash;
}

}  // namespace ismo
