#include "gpl/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

namespace gpl::nn {

namespace {

constexpr char kMagic[8] = {'G', 'P', 'L', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint8_t kArrayTag = 0;
constexpr std::uint8_t kTextTag = 1;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void write_pod(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated or corrupt");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t product(const std::vector<std::uint64_t>& shape) {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

void Checkpoint::put_array(const std::string& name, std::vector<std::uint64_t> shape,
                           std::vector<double> data) {
  if (product(shape) != data.size()) {
    throw std::invalid_argument("checkpoint entry '" + name +
                                "': data length does not match shape");
  }
  entries_[name] = ArrayEntry{std::move(shape), std::move(data)};
}

void Checkpoint::put_matrix(const std::string& name, const Matrix<double>& m) {
  put_array(name, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
            std::vector<double>(m.data(), m.data() + m.size()));
}

void Checkpoint::put_vector(const std::string& name, std::span<const double> v) {
  put_array(name, {v.size()}, std::vector<double>(v.begin(), v.end()));
}

void Checkpoint::put_scalar(const std::string& name, double v) { put_array(name, {}, {v}); }

void Checkpoint::put_text(const std::string& name, std::string text) {
  entries_[name] = std::move(text);
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

const ArrayEntry& Checkpoint::array(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw CheckpointError("checkpoint has no entry '" + name + "'");
  const auto* a = std::get_if<ArrayEntry>(&it->second);
  if (a == nullptr) throw CheckpointError("checkpoint entry '" + name + "' is not an array");
  return *a;
}

Matrix<double> Checkpoint::matrix(const std::string& name) const {
  const ArrayEntry& a = array(name);
  if (a.shape.size() != 2) throw CheckpointError("checkpoint entry '" + name + "' is not 2-D");
  return Eigen::Map<const Matrix<double>>(a.data.data(), static_cast<Index>(a.shape[0]),
                                          static_cast<Index>(a.shape[1]));
}

std::vector<double> Checkpoint::vector(const std::string& name) const { return array(name).data; }

double Checkpoint::scalar(const std::string& name) const {
  const ArrayEntry& a = array(name);
  if (a.data.size() != 1) throw CheckpointError("checkpoint entry '" + name + "' is not scalar");
  return a.data[0];
}

const std::string& Checkpoint::text(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw CheckpointError("checkpoint has no entry '" + name + "'");
  const auto* s = std::get_if<std::string>(&it->second);
  if (s == nullptr) throw CheckpointError("checkpoint entry '" + name + "' is not text");
  return *s;
}

void Checkpoint::put_params(const std::string& prefix, const ParamStore<double>& store) {
  for (std::size_t i = 0; i < store.count(); ++i) {
    put_matrix(prefix + "/" + store.entry(i).name, store.value(i));
  }
}

void Checkpoint::get_params(const std::string& prefix, ParamStore<double>& store) const {
  for (std::size_t i = 0; i < store.count(); ++i) {
    const auto& e = store.entry(i);
    const std::string key = prefix + "/" + e.name;
    Matrix<double> m = matrix(key);
    if (m.rows() != e.rows || m.cols() != e.cols) {
      throw CheckpointError("checkpoint entry '" + key + "' has shape " + shape_str(m) +
                            ", expected " + shape_str(e.rows, e.cols));
    }
    store.value(i) = m;
  }
}

void Checkpoint::put_adam(const std::string& prefix, const AdamState<double>& state) {
  put_vector(prefix + "/m", state.first_moment);
  put_vector(prefix + "/v", state.second_moment);
  put_scalar(prefix + "/step", static_cast<double>(state.step));
  put_vector(prefix + "/hyper", std::vector<double>{state.options.lr, state.options.beta1,
                                                    state.options.beta2, state.options.epsilon});
}

void Checkpoint::get_adam(const std::string& prefix, AdamState<double>& state) const {
  auto m = vector(prefix + "/m");
  auto v = vector(prefix + "/v");
  auto h = vector(prefix + "/hyper");
  if (m.size() != state.size() || v.size() != state.size() || h.size() != 4) {
    throw CheckpointError("optimizer state '" + prefix + "' does not match the model");
  }
  state.first_moment = std::move(m);
  state.second_moment = std::move(v);
  state.step = static_cast<std::int64_t>(scalar(prefix + "/step"));
  state.options = AdamOptions{h[0], h[1], h[2], h[3]};
}

void Checkpoint::put_mlp(const std::string& prefix, const EnsembleMlp<double>& net) {
  put_params(prefix, net.params());
  const auto& sn = net.spectral_state();
  for (std::size_t l = 0; l < sn.size(); ++l) {
    for (std::size_t m = 0; m < sn[l].u.size(); ++m) {
      const auto& u = sn[l].u[m];
      put_vector(prefix + "/spectral" + std::to_string(l) + "/" + std::to_string(m),
                 std::span<const double>(u.data(), static_cast<std::size_t>(u.size())));
    }
  }
}

void Checkpoint::get_mlp(const std::string& prefix, EnsembleMlp<double>& net) const {
  get_params(prefix, net.params());
  auto& sn = net.spectral_state();
  for (std::size_t l = 0; l < sn.size(); ++l) {
    for (std::size_t m = 0; m < sn[l].u.size(); ++m) {
      auto v = vector(prefix + "/spectral" + std::to_string(l) + "/" + std::to_string(m));
      if (static_cast<Index>(v.size()) != sn[l].u[m].size()) {
        throw CheckpointError("spectral state size mismatch under '" + prefix + "'");
      }
      sn[l].u[m] = Eigen::Map<const Vector<double>>(v.data(), static_cast<Index>(v.size()));
    }
  }
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::string out(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kFormatVersion);
  write_pod<std::uint64_t>(out, entries_.size());
  for (const auto& [name, entry] : entries_) {
    const bool is_array = std::holds_alternative<ArrayEntry>(entry);
    write_pod<std::uint8_t>(out, is_array ? kArrayTag : kTextTag);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    if (is_array) {
      const auto& a = std::get<ArrayEntry>(entry);
      write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
      for (auto d : a.shape) write_pod<std::uint64_t>(out, d);
      out.append(reinterpret_cast<const char*>(a.data.data()), a.data.size() * sizeof(double));
    } else {
      const auto& s = std::get<std::string>(entry);
      write_pod<std::uint64_t>(out, s.size());
      out += s;
    }
  }
  write_pod<std::uint64_t>(out, fnv1a(out));

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open '" + tmp.string() + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("'" + path.string() + "' is not a checkpoint (bad magic or truncated)");
  }
  const std::string body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
  if (stored != fnv1a(body)) {
    throw CheckpointError("checkpoint '" + path.string() + "' is truncated or corrupt");
  }
  Reader r(body);
  r.str(sizeof(kMagic));
  const auto version = r.pod<std::uint32_t>();
  if (version != kFormatVersion) {
    throw CheckpointError("checkpoint '" + path.string() + "' has format version " +
                          std::to_string(version) + ", expected " +
                          std::to_string(kFormatVersion));
  }
  Checkpoint c;
  const auto count = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto tag = r.pod<std::uint8_t>();
    const std::string name = r.str(r.pod<std::uint32_t>());
    if (tag == kArrayTag) {
      ArrayEntry a;
      a.shape.resize(r.pod<std::uint32_t>());
      for (auto& d : a.shape) d = r.pod<std::uint64_t>();
      const std::string raw = r.str(product(a.shape) * sizeof(double));
      a.data.resize(product(a.shape));
      std::memcpy(a.data.data(), raw.data(), raw.size());
      c.entries_[name] = std::move(a);
    } else if (tag == kTextTag) {
      c.entries_[name] = r.str(r.pod<std::uint64_t>());
    } else {
      throw CheckpointError("checkpoint '" + path.string() + "' has unknown entry kind");
    }
  }
  if (r.pos() != body.size()) throw CheckpointError("checkpoint has trailing bytes");
  return c;
}

}  // namespace gpl::nn
