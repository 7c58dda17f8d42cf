#include "reposer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace reposer {

namespace {

constexpr char kMagic[8] = {'R', 'P', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::uint64_t fnv1a(const char* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const Tensor& t : tensors)
    if (t.name == name) return t;
  throw CheckpointError("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const Tensor& t : tensors)
    if (t.name == name) return true;
  return false;
}

void Checkpoint::add(std::string name, std::vector<std::int64_t> shape, std::vector<float> data) {
  Tensor t{std::move(name), std::move(shape), std::move(data), {}, false};
  if (t.numel() != t.f32.size()) throw std::invalid_argument("tensor '" + t.name + "': shape/data mismatch");
  tensors.push_back(std::move(t));
}

void Checkpoint::add(std::string name, std::vector<std::int64_t> shape, std::vector<double> data) {
  Tensor t{std::move(name), std::move(shape), {}, std::move(data), true};
  if (t.numel() != t.f64.size()) throw std::invalid_argument("tensor '" + t.name + "': shape/data mismatch");
  tensors.push_back(std::move(t));
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json manifest = ckpt.manifest;
  nlohmann::ordered_json index = nlohmann::ordered_json::array();
  std::string data;
  for (const Tensor& t : ckpt.tensors) {
    const std::size_t offset = data.size();
    if (t.is_f64) {
      data.append(reinterpret_cast<const char*>(t.f64.data()), t.f64.size() * sizeof(double));
    } else {
      data.append(reinterpret_cast<const char*>(t.f32.data()), t.f32.size() * sizeof(float));
    }
    index.push_back({{"name", t.name},
                     {"dtype", t.is_f64 ? "f64" : "f32"},
                     {"shape", t.shape},
                     {"offset", offset},
                     {"nbytes", data.size() - offset}});
  }
  manifest["tensors"] = index;
  const std::string m = manifest.dump(1);

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, 0);
  put<std::uint64_t>(out, m.size());
  out += m;
  out += data;

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open '" + tmp.string() + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    f.flush();
    if (!f) {
      f.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw CheckpointError("failed writing checkpoint '" + tmp.string() + "' (disk full?)");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < 24 || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("'" + path.string() + "' is not a checkpoint (bad magic)");
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(in, pos);
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " in '" + path.string() + "'");
  get<std::uint32_t>(in, pos);
  const auto mlen = get<std::uint64_t>(in, pos);
  if (pos + mlen > in.size()) throw CheckpointError("checkpoint manifest truncated");
  Checkpoint ck;
  try {
    ck.manifest = nlohmann::ordered_json::parse(in.substr(pos, mlen));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  pos += mlen;
  const std::size_t data_start = pos;
  if (!ck.manifest.contains("tensors")) throw CheckpointError("checkpoint manifest lacks a tensor index");
  for (const auto& e : ck.manifest["tensors"]) {
    Tensor t;
    t.name = e.at("name").get<std::string>();
    t.shape = e.at("shape").get<std::vector<std::int64_t>>();
    t.is_f64 = e.at("dtype").get<std::string>() == "f64";
    const std::size_t offset = e.at("offset").get<std::size_t>();
    const std::size_t nbytes = e.at("nbytes").get<std::size_t>();
    const std::size_t elem = t.is_f64 ? sizeof(double) : sizeof(float);
    if (nbytes != t.numel() * elem || data_start + offset + nbytes > in.size())
      throw CheckpointError("checkpoint tensor '" + t.name + "' is truncated or malformed");
    if (t.is_f64) {
      t.f64.resize(t.numel());
      std::memcpy(t.f64.data(), in.data() + data_start + offset, nbytes);
    } else {
      t.f32.resize(t.numel());
      std::memcpy(t.f32.data(), in.data() + data_start + offset, nbytes);
    }
    ck.tensors.push_back(std::move(t));
  }
  ck.manifest.erase("tensors");
  return ck;
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open '" + path.string() + "' for hashing");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    h = fnv1a(buf, static_cast<std::size_t>(f.gcount()), h);
  }
  return hex64(h);
}

std::string string_hash(const std::string& s) { return hex64(fnv1a(s.data(), s.size())); }

}  // namespace reposer
