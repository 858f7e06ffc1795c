#include "omake/param_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>

#include "omake/errors.hpp"

namespace omake::numerics {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

Tensor& ParamStore::create(const std::string& name, Tensor init) {
    if (contains(name)) throw ContractError("param store: duplicate parameter '" + name + "'");
    entries_.emplace_back(name, std::move(init));
    return entries_.back().second;
}

Tensor& ParamStore::ensure(const std::string& name, const Shape& shape,
                           const std::function<Tensor()>& init) {
    if (contains(name)) {
        Tensor& t = get(name);
        if (t.shape() != shape) {
            throw DimensionError("param store: '" + name + "' has shape " +
                                 shape_str(t.shape()) + ", expected " + shape_str(shape));
        }
        return t;
    }
    Tensor t = init();
    if (t.shape() != shape) {
        throw DimensionError("param store: init for '" + name + "' produced shape " +
                             shape_str(t.shape()) + ", expected " + shape_str(shape));
    }
    return create(name, std::move(t));
}

bool ParamStore::contains(const std::string& name) const {
    for (const auto& [n, _] : entries_)
        if (n == name) return true;
    return false;
}

std::size_t ParamStore::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].first == name) return i;
    throw LookupError("param store: unknown parameter '" + name + "'");
}

Tensor& ParamStore::get(const std::string& name) { return entries_[index_of(name)].second; }

const Tensor& ParamStore::get(const std::string& name) const {
    return entries_[index_of(name)].second;
}

std::size_t ParamStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.size();
    return n;
}

namespace {

template <typename T>
void write_pod(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("checkpoint: truncated file");
    return v;
}

} // namespace

void ParamStore::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot open '" + path.string() + "' for writing");
    os.write("OMKE", 4);
    write_pod<std::uint32_t>(os, kCheckpointVersion);
    for (const auto& [name, t] : entries_) {
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) write_pod<std::uint64_t>(os, d);
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!os) throw IoError("checkpoint: write to '" + path.string() + "' failed");
}

ParamStore ParamStore::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open '" + path.string() + "'");
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "OMKE", 4) != 0) {
        throw ParseError("checkpoint: bad magic in '" + path.string() + "'");
    }
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
        throw ParseError("checkpoint: unsupported version " + std::to_string(version));
    }
    ParamStore store;
    while (true) {
        std::uint32_t name_len = 0;
        is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        if (is.eof()) break;
        if (!is) throw IoError("checkpoint: truncated record header");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto rank = read_pod<std::uint32_t>(is);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!is) throw IoError("checkpoint: truncated payload for '" + name + "'");
        store.create(name, std::move(t));
    }
    return store;
}

} // namespace omake::numerics
