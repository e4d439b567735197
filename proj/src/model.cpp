#include "pmvc/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "pmvc/error.hpp"

namespace pmvc {

namespace {

constexpr char kMagic[4] = {'P', 'M', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;

void put_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}
void put_u16(std::string& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>(v >> 8)};
  put_bytes(out, b, 2);
}
void put_u32(std::string& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 4);
}
void put_f32(std::string& out, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(out, u);
}

struct Reader {
  const unsigned char* p;
  std::size_t n, off = 0;
  void need(std::size_t k) const {
    require(off + k <= n, ErrorKind::kFormat, "truncated checkpoint");
  }
  void bytes(void* dst, std::size_t k) {
    need(k);
    std::memcpy(dst, p + off, k);
    off += k;
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(p[off] | (p[off + 1] << 8));
    off += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[off + i]) << (8 * i);
    off += 4;
    return v;
  }
  float f32() {
    std::uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
};

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

Parameter& ModelState::add(const std::string& name, Tensor init) {
  require(index_.find(name) == index_.end(), ErrorKind::kContract,
          "duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = std::move(init);
  p->trainable = name_is_trainable(name);
  Parameter& ref = *p;
  index_.emplace(name, p.get());
  order_.push_back(std::move(p));
  return ref;
}

Parameter& ModelState::at(const std::string& name) {
  Parameter* p = find(name);
  require(p != nullptr, ErrorKind::kContract, "unknown parameter: " + name);
  return *p;
}
const Parameter& ModelState::at(const std::string& name) const {
  const Parameter* p = find(name);
  require(p != nullptr, ErrorKind::kContract, "unknown parameter: " + name);
  return *p;
}
Parameter* ModelState::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}
const Parameter* ModelState::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

void ModelState::zero_grads() {
  for (auto& p : order_) p->grad = Tensor();
}

bool ModelState::name_is_trainable(const std::string& name) {
  auto ends_with = [&](const char* sfx) {
    const std::size_t k = std::strlen(sfx);
    return name.size() >= k && name.compare(name.size() - k, k, sfx) == 0;
  };
  return !ends_with(".running_mean") && !ends_with(".running_var");
}

std::uint64_t ModelState::content_hash() const {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const auto& p : order_) {
    h = fnv1a(h, p->name.data(), p->name.size());
    const std::uint32_t rank = static_cast<std::uint32_t>(p->value.rank());
    h = fnv1a(h, &rank, 4);
    for (int i = 0; i < p->value.rank(); ++i) {
      const std::uint32_t d = static_cast<std::uint32_t>(p->value.dim(i));
      h = fnv1a(h, &d, 4);
    }
    h = fnv1a(h, p->value.data(), p->value.size() * sizeof(float));
  }
  return h;
}

void ModelState::save(const std::string& path, bool with_moments) const {
  std::string out;
  put_bytes(out, kMagic, 4);
  put_u16(out, kVersion);
  out.push_back(with_moments ? 1 : 0);
  put_u32(out, static_cast<std::uint32_t>(order_.size()));
  for (const auto& p : order_) {
    require(p->name.size() < 0x10000, ErrorKind::kContract, "parameter name too long");
    put_u16(out, static_cast<std::uint16_t>(p->name.size()));
    put_bytes(out, p->name.data(), p->name.size());
    out.push_back(static_cast<char>(p->value.rank()));
    for (int i = 0; i < p->value.rank(); ++i)
      put_u32(out, static_cast<std::uint32_t>(p->value.dim(i)));
    for (std::size_t i = 0; i < p->value.size(); ++i) put_f32(out, p->value.data()[i]);
    if (with_moments && p->trainable) {
      const Tensor& m = p->m.defined() ? p->m : Tensor(p->value.shape());
      const Tensor& v = p->v.defined() ? p->v : Tensor(p->value.shape());
      for (std::size_t i = 0; i < m.size(); ++i) put_f32(out, m.data()[i]);
      for (std::size_t i = 0; i < v.size(); ++i) put_f32(out, v.data()[i]);
      put_u32(out, static_cast<std::uint32_t>(p->step));
    }
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  require(f != nullptr, ErrorKind::kIo, "cannot open for write: " + path);
  const std::size_t written = std::fwrite(out.data(), 1, out.size(), f);
  std::fclose(f);
  require(written == out.size(), ErrorKind::kIo, "short write: " + path);
}

ModelState ModelState::load(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  require(f != nullptr, ErrorKind::kIo, "cannot open checkpoint: " + path);
  std::string buf;
  char chunk[65536];
  std::size_t got;
  while ((got = std::fread(chunk, 1, sizeof(chunk), f)) > 0) buf.append(chunk, got);
  std::fclose(f);

  Reader r{reinterpret_cast<const unsigned char*>(buf.data()), buf.size()};
  char magic[4];
  r.bytes(magic, 4);
  require(std::memcmp(magic, kMagic, 4) == 0, ErrorKind::kFormat,
          "not a checkpoint file (bad magic)");
  const std::uint16_t version = r.u16();
  require(version == kVersion, ErrorKind::kFormat,
          "unsupported checkpoint version " + std::to_string(version));
  unsigned char flags;
  r.bytes(&flags, 1);
  const bool with_moments = (flags & 1) != 0;
  const std::uint32_t count = r.u32();

  ModelState model;
  for (std::uint32_t idx = 0; idx < count; ++idx) {
    const std::uint16_t name_len = r.u16();
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    unsigned char rank;
    r.bytes(&rank, 1);
    require(rank >= 1 && rank <= 4, ErrorKind::kFormat, "bad parameter rank");
    std::vector<int> shape(rank);
    std::size_t total = 1;
    for (int i = 0; i < rank; ++i) {
      const std::uint32_t d = r.u32();
      require(d > 0 && d < (1u << 24), ErrorKind::kFormat, "bad parameter extent");
      shape[static_cast<std::size_t>(i)] = static_cast<int>(d);
      total *= d;
    }
    std::vector<float> values(total);
    for (std::size_t i = 0; i < total; ++i) values[i] = r.f32();
    Parameter& p = model.add(name, Tensor::from(shape, std::move(values)));
    if (with_moments && p.trainable) {
      std::vector<float> m(total), v(total);
      for (std::size_t i = 0; i < total; ++i) m[i] = r.f32();
      for (std::size_t i = 0; i < total; ++i) v[i] = r.f32();
      p.m = Tensor::from(shape, std::move(m));
      p.v = Tensor::from(shape, std::move(v));
      p.step = r.u32();
    }
  }
  require(r.off == r.n, ErrorKind::kFormat, "trailing bytes in checkpoint");
  return model;
}

void adam_step(ModelState& model, float lr, float beta1, float beta2, float eps) {
  for (auto& p : model.entries()) {
    if (!p->trainable || !p->grad.defined()) continue;
    require(p->grad.all_finite(), ErrorKind::kContract,
            "non-finite gradient for parameter " + p->name);
    if (!p->m.defined()) p->m = Tensor(p->value.shape());
    if (!p->v.defined()) p->v = Tensor(p->value.shape());
    p->step += 1;
    const double b1t = 1.0 - std::pow(static_cast<double>(beta1), static_cast<double>(p->step));
    const double b2t = 1.0 - std::pow(static_cast<double>(beta2), static_cast<double>(p->step));
    float* w = p->value.data();
    float* m = p->m.data();
    float* v = p->v.data();
    const float* g = p->grad.data();
    const std::size_t n = p->value.size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
      const double mhat = m[i] / b1t;
      const double vhat = v[i] / b2t;
      w[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

Tensor kaiming_init(std::vector<int> shape, int fan_in, Rng& rng) {
  require(fan_in > 0, ErrorKind::kContract, "fan_in must be positive");
  Tensor t(std::move(shape));
  const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0f, stddev);
  return t;
}

}  // namespace pmvc
