#include "banditseq/param_store.hpp"

#include "banditseq/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace banditseq {

namespace {

constexpr std::array<char, 4> kMagic{'B', 'S', 'Q', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
    if (!in) {
        throw IoError("checkpoint truncated");
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

} // namespace

ParamStore::Entry& ParamStore::add(std::string name, Tensor init) {
    require(!name.empty(), "parameter name must be non-empty");
    require(!contains(name), "duplicate parameter name: " + name);
    Tensor grad(init.shape(), 0.0);
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{std::move(name), std::move(init), std::move(grad)});
    return entries_.back();
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

ParamStore::Entry& ParamStore::at(std::string_view name) {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter: " + std::string(name));
    return entries_[it->second];
}

const ParamStore::Entry& ParamStore::at(std::string_view name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter: " + std::string(name));
    return entries_[it->second];
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        n += e.value.size();
    }
    return n;
}

void ParamStore::zero_grad() {
    for (auto& e : entries_) {
        e.grad.fill(0.0);
    }
}

void ParamStore::save(std::ostream& out) const {
    out.write(kMagic.data(), kMagic.size());
    write_le<std::uint32_t>(out, kVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
        for (std::size_t d : e.value.shape()) {
            write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        }
        for (double v : e.value.values()) {
            write_le<double>(out, v);
        }
    }
    if (!out) {
        throw IoError("failed writing checkpoint");
    }
}

ParamStore ParamStore::load(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) {
        throw IoError("not a BSQ1 checkpoint");
    }
    const auto version = read_le<std::uint32_t>(in);
    if (version != kVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = read_le<std::uint32_t>(in);
    ParamStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_le<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rank = read_le<std::uint32_t>(in);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) {
            d = read_le<std::uint32_t>(in);
        }
        std::vector<double> values(element_count(shape));
        for (auto& v : values) {
            v = read_le<double>(in);
        }
        store.add(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    return store;
}

void ParamStore::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    save(out);
}

ParamStore ParamStore::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return load(in);
}

bool ParamStore::same_values(const ParamStore& other) const {
    if (entries_.size() != other.entries_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& a = entries_[i];
        const auto& b = other.entries_[i];
        if (a.name != b.name || !a.value.same_shape(b.value) ||
            std::memcmp(a.value.data(), b.value.data(), a.value.size() * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

} // namespace banditseq
