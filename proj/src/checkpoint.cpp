#include "tpt/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "tpt/errors.hpp"

namespace tpt::ckpt {

namespace {

constexpr std::array<char, 8> kMagic = {'T', 'P', 'T', 'A', 'R', 'C', 'H', '\0'};

template <class U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> buf{};
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf.data(), buf.size());
}

template <class U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!is) throw LoadError("archive truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

std::string get_bytes(std::istream& is, std::size_t n) {
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw LoadError("archive truncated");
  return s;
}

}  // namespace

const Entry* Archive::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError("cannot open '" + path.string() + "' for writing");
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, archive.version);
  put_le<std::uint64_t>(os, archive.metadata.size());
  os.write(archive.metadata.data(), static_cast<std::streamsize>(archive.metadata.size()));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(archive.entries.size()));
  for (const auto& e : archive.entries) {
    if (ad::numel(e.shape) != e.values.size()) {
      throw DimensionError("archive entry '" + e.name + "' has inconsistent shape");
    }
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put_le<std::uint64_t>(os, d);
    for (double v : e.values) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw LoadError("write to '" + path.string() + "' failed");
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open '" + path.string() + "'");
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw LoadError("'" + path.string() + "' is not a TPT archive");
  Archive a;
  a.version = get_le<std::uint32_t>(is);
  if (a.version != kFormatVersion) {
    throw LoadError("archive format version " + std::to_string(a.version) + ", expected " +
                    std::to_string(kFormatVersion));
  }
  a.metadata = get_bytes(is, get_le<std::uint64_t>(is));
  const auto count = get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = get_bytes(is, get_le<std::uint32_t>(is));
    const auto rank = get_le<std::uint32_t>(is);
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(get_le<std::uint64_t>(is));
    e.values.resize(ad::numel(e.shape));
    for (auto& v : e.values) v = std::bit_cast<double>(get_le<std::uint64_t>(is));
    a.entries.push_back(std::move(e));
  }
  return a;
}

void append_parameters(Archive& archive, const ad::ParameterStore& store) {
  for (const auto* p : store.all()) {
    archive.entries.push_back({p->name(), p->shape(), {p->values().begin(), p->values().end()}});
  }
}

void load_parameters(const Archive& archive, ad::ParameterStore& store) {
  for (auto* p : store.all()) {
    const Entry* e = archive.find(p->name());
    if (!e) throw LoadError("checkpoint lacks parameter '" + p->name() + "'");
    if (e->shape != p->shape()) {
      throw LoadError("checkpoint parameter '" + p->name() + "' has shape " +
                      ad::shape_str(e->shape) + ", model expects " + ad::shape_str(p->shape()));
    }
    std::copy(e->values.begin(), e->values.end(), p->values().begin());
  }
}

}  // namespace tpt::ckpt
