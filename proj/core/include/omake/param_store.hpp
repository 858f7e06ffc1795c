#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "omake/tensor.hpp"

namespace omake::numerics {

// Named model parameters in a fixed (insertion) order. The order determines
// checkpoint layout and optimizer state slots, so it must be deterministic.
class ParamStore {
public:
    Tensor& create(const std::string& name, Tensor init);
    // create() if missing, otherwise verify the stored shape and return it.
    Tensor& ensure(const std::string& name, const Shape& shape,
                   const std::function<Tensor()>& init);

    bool contains(const std::string& name) const;
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;

    std::size_t count() const { return entries_.size(); }
    std::size_t total_elements() const;
    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
    std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }

    // Checkpoint file: magic "OMKE", version u32, then per-parameter records
    // (u32 name length, name bytes, u32 rank, u64 dims, float64 payload),
    // all little-endian.
    void save(const std::filesystem::path& path) const;
    static ParamStore load(const std::filesystem::path& path);

private:
    std::size_t index_of(const std::string& name) const; // throws LookupError
    std::vector<std::pair<std::string, Tensor>> entries_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

} // namespace omake::numerics
