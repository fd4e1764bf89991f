#include "segtrm/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <vector>

namespace segtrm {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian");

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}

  template <typename U>
  void Pod(U v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(U));
  }
  void String(const std::string& s) {
    Pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <typename T>
  void Values(const Tensor<T>& t) {
    out_.write(reinterpret_cast<const char*>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(T)));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

  template <typename U>
  U Pod() {
    U v{};
    Read(reinterpret_cast<char*>(&v), sizeof(U));
    return v;
  }
  std::string String() {
    const auto n = Pod<std::uint64_t>();
    if (n > (1ull << 32)) Fail("implausible string length");
    std::string s(n, '\0');
    Read(s.data(), n);
    return s;
  }
  template <typename T>
  void Values(Tensor<T>& t) {
    Read(reinterpret_cast<char*>(t.data()), t.size() * sizeof(T));
  }
  [[noreturn]] void Fail(const std::string& what) const {
    throw std::runtime_error("checkpoint " + path_.string() + ": " + what);
  }

 private:
  void Read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) Fail("truncated file");
  }

  std::ifstream& in_;
  const std::filesystem::path& path_;
};

}  // namespace

template <typename T>
void SaveCheckpoint(const std::filesystem::path& path, const ParamStore<T>& params,
                    std::uint64_t step, const std::map<std::string, std::string>& metadata) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    Writer w(out);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.Pod<std::uint32_t>(kCheckpointVersion);
    w.Pod<std::uint32_t>(sizeof(T));
    w.Pod<std::uint64_t>(step);
    w.Pod<std::uint64_t>(metadata.size());
    for (const auto& [key, value] : metadata) {
      w.String(key);
      w.String(value);
    }
    w.Pod<std::uint64_t>(params.size());
    for (const auto& [name, p] : params) {
      w.String(name);
      w.Pod<std::uint8_t>(p.decay ? 1 : 0);
      w.Pod<std::uint64_t>(p.value.shape().size());
      for (std::size_t d : p.value.shape()) w.Pod<std::uint64_t>(d);
      w.Values(p.value);
      for (const Tensor<T>* moment : {&p.first_moment, &p.second_moment}) {
        if (moment->size() == p.value.size()) {
          w.Values(*moment);
        } else {
          w.Values(Tensor<T>(p.value.shape()));
        }
      }
    }
    out.flush();
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
Checkpoint<T> LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  Reader r(in, path);
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    r.Fail("bad magic");
  }
  const auto version = r.Pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    r.Fail("version " + std::to_string(version) + ", expected " +
           std::to_string(kCheckpointVersion));
  }
  const auto width = r.Pod<std::uint32_t>();
  if (width != sizeof(T)) {
    r.Fail("stored with " + std::to_string(width) + "-byte scalars, expected " +
           std::to_string(sizeof(T)));
  }
  Checkpoint<T> ckpt;
  ckpt.header.step = r.Pod<std::uint64_t>();
  const auto entries = r.Pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < entries; ++i) {
    std::string key = r.String();
    ckpt.header.metadata[key] = r.String();
  }
  const auto count = r.Pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.String();
    const bool decay = r.Pod<std::uint8_t>() != 0;
    const auto rank = r.Pod<std::uint64_t>();
    if (rank > 8) r.Fail("implausible rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = r.Pod<std::uint64_t>();
    if (NumElements(shape) > (1ull << 32)) r.Fail("implausible size for " + name);
    Param<T>& p = ckpt.params.Add(name, Tensor<T>(shape), decay);
    r.Values(p.value);
    p.first_moment = Tensor<T>(shape);
    p.second_moment = Tensor<T>(shape);
    r.Values(p.first_moment);
    r.Values(p.second_moment);
  }
  if (in.peek() != std::ifstream::traits_type::eof()) r.Fail("trailing bytes");
  return ckpt;
}

template <typename T>
CheckpointHeader RestoreCheckpoint(const std::filesystem::path& path, ParamStore<T>& params) {
  Checkpoint<T> ckpt = LoadCheckpoint<T>(path);
  if (ckpt.params.size() != params.size()) {
    throw std::runtime_error("checkpoint " + path.string() + " holds " +
                             std::to_string(ckpt.params.size()) + " tensors, expected " +
                             std::to_string(params.size()));
  }
  for (const auto& [name, p] : params) {
    if (!ckpt.params.contains(name)) {
      throw std::runtime_error("checkpoint " + path.string() + " lacks " + name);
    }
    const Shape& got = ckpt.params.at(name).value.shape();
    if (got != p.value.shape()) {
      throw std::runtime_error("checkpoint " + path.string() + ": " + name + " has shape " +
                               ShapeToString(got) + ", expected " + ShapeToString(p.value.shape()));
    }
  }
  for (auto& [name, p] : params) {
    Param<T>& src = ckpt.params.at(name);
    p.value = std::move(src.value);
    p.first_moment = std::move(src.first_moment);
    p.second_moment = std::move(src.second_moment);
    p.grad = Tensor<T>(p.value.shape());
  }
  return ckpt.header;
}

template void SaveCheckpoint(const std::filesystem::path&, const ParamStore<float>&, std::uint64_t,
                             const std::map<std::string, std::string>&);
template void SaveCheckpoint(const std::filesystem::path&, const ParamStore<double>&, std::uint64_t,
                             const std::map<std::string, std::string>&);
template Checkpoint<float> LoadCheckpoint(const std::filesystem::path&);
template Checkpoint<double> LoadCheckpoint(const std::filesystem::path&);
template CheckpointHeader RestoreCheckpoint(const std::filesystem::path&, ParamStore<float>&);
template CheckpointHeader RestoreCheckpoint(const std::filesystem::path&, ParamStore<double>&);

}  // namespace segtrm
