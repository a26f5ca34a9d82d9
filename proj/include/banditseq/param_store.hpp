#pragma once

#include "banditseq/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace banditseq {

// Named parameters, each paired with a gradient accumulator of the same
// shape. Entry order is insertion order and is part of the checkpoint format.
class ParamStore {
  public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
    };

    // Entry references stay valid until the next add().
    Entry& add(std::string name, Tensor init);

    bool contains(std::string_view name) const;
    Entry& at(std::string_view name);
    const Entry& at(std::string_view name) const;

    std::span<Entry> entries() { return entries_; }
    std::span<const Entry> entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    // Total number of scalar parameters.
    std::size_t parameter_count() const;

    void zero_grad();

    // Little-endian "BSQ1" checkpoint. Gradients are not stored.
    void save(std::ostream& out) const;
    static ParamStore load(std::istream& in);
    void save_file(const std::filesystem::path& path) const;
    static ParamStore load_file(const std::filesystem::path& path);

    // Bit-level equality of names, shapes and values.
    bool same_values(const ParamStore& other) const;

  private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

} // namespace banditseq
