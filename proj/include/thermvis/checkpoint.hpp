#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "thermvis/error.hpp"
#include "thermvis/layers.hpp"
#include "thermvis/tensor.hpp"

namespace thermvis {

/// Named-array archive.
///
/// Layout: 8-byte magic "THERMVISCK1", little-endian uint64 header length, a
/// JSON header, then the raw little-endian array payloads. The header holds
/// free-form metadata under "meta" and an index under "arrays":
/// [{"name", "dtype": "f32"|"f64", "shape": [n,c,h,w], "offset", "nbytes"}].
/// Array names follow the network layer paths, e.g.
/// "G.main.res1.conv1.weight" or "opt.gen.m.G.main.stem.conv.weight".
class Archive {
 public:
  static constexpr char kMagic[8] = {'I', 'R', '2', 'V', 'I', 'C', 'K', '1'};

  nlohmann::json meta = nlohmann::json::object();

  template <typename T>
  static const char* dtype() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? "f32" : "f64";
  }

  template <typename T>
  void put(const std::string& name, const Tensor<T>& t) {
    Record r{dtype<T>(), t.shape(), {}};
    r.bytes.resize(t.size() * sizeof(T));
    if (!r.bytes.empty()) std::memcpy(r.bytes.data(), t.data(), r.bytes.size());
    arrays_[name] = std::move(r);
  }

  bool contains(const std::string& name) const { return arrays_.count(name) > 0; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : arrays_) out.push_back(k);
    return out;
  }

  Shape shape(const std::string& name) const { return record(name).shape; }

  template <typename T>
  Tensor<T> get(const std::string& name) const {
    const Record& r = record(name);
    if (r.dtype != dtype<T>()) {
      throw CheckpointError("array '" + name + "' has dtype " + r.dtype + ", expected " +
                            dtype<T>());
    }
    Tensor<T> t(r.shape);
    if (!r.bytes.empty()) std::memcpy(t.data(), r.bytes.data(), r.bytes.size());
    return t;
  }

  /// Copies into an existing tensor, requiring an identical shape.
  template <typename T>
  void get_into(const std::string& name, Tensor<T>& dst) const {
    Tensor<T> t = get<T>(name);
    if (!(t.shape() == dst.shape())) {
      throw CheckpointError("array '" + name + "' has shape " + t.shape().str() +
                            ", expected " + dst.shape().str());
    }
    dst = std::move(t);
  }

  void save(const std::filesystem::path& path) const {
    nlohmann::json index = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, r] : arrays_) {
      index.push_back({{"name", name},
                       {"dtype", r.dtype},
                       {"shape", {r.shape.n, r.shape.c, r.shape.h, r.shape.w}},
                       {"offset", offset},
                       {"nbytes", r.bytes.size()}});
      offset += r.bytes.size();
    }
    const std::string header = nlohmann::json{{"meta", meta}, {"arrays", index}}.dump();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw CheckpointError("cannot open '" + tmp.string() + "' for writing");
      out.write(kMagic, sizeof(kMagic));
      write_u64(out, header.size());
      out.write(header.data(), static_cast<std::streamsize>(header.size()));
      for (const auto& [name, r] : arrays_) {
        out.write(r.bytes.data(), static_cast<std::streamsize>(r.bytes.size()));
      }
      out.flush();
      if (!out) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw CheckpointError("write failed for '" + path.string() + "' (disk full?)");
      }
    }
    std::filesystem::rename(tmp, path);
  }

  static Archive load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
      throw CheckpointError("'" + path.string() + "' is not a checkpoint archive");
    }
    const std::uint64_t header_len = read_u64(in);
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw CheckpointError("truncated checkpoint header in '" + path.string() + "'");
    Archive a;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(header);
      a.meta = j.at("meta");
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
    }
    const auto data_start = in.tellg();
    for (const auto& e : j.at("arrays")) {
      Record r;
      r.dtype = e.at("dtype").get<std::string>();
      const auto& s = e.at("shape");
      r.shape = Shape{s[0].get<int>(), s[1].get<int>(), s[2].get<int>(), s[3].get<int>()};
      r.bytes.resize(e.at("nbytes").get<std::size_t>());
      in.seekg(data_start + static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
      in.read(r.bytes.data(), static_cast<std::streamsize>(r.bytes.size()));
      if (!in) throw CheckpointError("truncated checkpoint payload in '" + path.string() + "'");
      a.arrays_[e.at("name").get<std::string>()] = std::move(r);
    }
    return a;
  }

 private:
  struct Record {
    std::string dtype;
    Shape shape;
    std::vector<char> bytes;
  };

  const Record& record(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw CheckpointError("checkpoint has no array '" + name + "'");
    return it->second;
  }

  static void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
  }
  static std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw CheckpointError("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  std::map<std::string, Record> arrays_;
};

/// Stores every parameter and buffer of a network under `prefix`.
template <typename T>
void put_state(Archive& a, const std::string& prefix, const StateView<T>& view) {
  for (const auto& [name, p] : view.params) a.put(prefix + "." + name, p->value);
  for (const auto& [name, b] : view.buffers) a.put(prefix + "." + name, *b);
}

template <typename T>
void get_state(const Archive& a, const std::string& prefix, StateView<T>& view) {
  for (auto& [name, p] : view.params) a.get_into(prefix + "." + name, p->value);
  for (auto& [name, b] : view.buffers) a.get_into(prefix + "." + name, *b);
}

}  // namespace thermvis
