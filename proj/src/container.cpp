#include "gnssr/container.hpp"

#include <cstring>
#include <numeric>
#include <stdexcept>

#include "gnssr/bytes.hpp"
#include "gnssr/fsutil.hpp"
#include "gnssr/hashing.hpp"

namespace gnssr::io {

namespace {
constexpr char kMagic[8] = {'G', 'S', 'D', 'C', '0', '0', '0', '1'};

template <typename T>
const T* typed(const Variable& v, DType want) {
  if (v.dtype != want) {
    throw std::runtime_error("variable '" + v.name + "' is " +
                             dtype_name(v.dtype) + ", not " +
                             dtype_name(want));
  }
  return reinterpret_cast<const T*>(v.raw.data());
}
}  // namespace

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::kF64: return 8;
    case DType::kF32: return 4;
    case DType::kI64: return 8;
    case DType::kI32: return 4;
    case DType::kU8: return 1;
  }
  throw std::runtime_error("unknown dtype code");
}

const char* dtype_name(DType t) {
  switch (t) {
    case DType::kF64: return "f64";
    case DType::kF32: return "f32";
    case DType::kI64: return "i64";
    case DType::kI32: return "i32";
    case DType::kU8: return "u8";
  }
  return "?";
}

std::size_t Variable::elements() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

const double* Variable::f64() const { return typed<double>(*this, DType::kF64); }
double* Variable::f64() {
  return const_cast<double*>(typed<double>(*this, DType::kF64));
}
const float* Variable::f32() const { return typed<float>(*this, DType::kF32); }
float* Variable::f32() {
  return const_cast<float*>(typed<float>(*this, DType::kF32));
}
const std::int64_t* Variable::i64() const {
  return typed<std::int64_t>(*this, DType::kI64);
}
std::int64_t* Variable::i64() {
  return const_cast<std::int64_t*>(typed<std::int64_t>(*this, DType::kI64));
}
const std::int32_t* Variable::i32() const {
  return typed<std::int32_t>(*this, DType::kI32);
}
std::int32_t* Variable::i32() {
  return const_cast<std::int32_t*>(typed<std::int32_t>(*this, DType::kI32));
}
const std::uint8_t* Variable::u8() const {
  return typed<std::uint8_t>(*this, DType::kU8);
}
std::uint8_t* Variable::u8() {
  return const_cast<std::uint8_t*>(typed<std::uint8_t>(*this, DType::kU8));
}

std::vector<double> Variable::to_f64() const {
  std::vector<double> out(elements());
  switch (dtype) {
    case DType::kF64:
      std::memcpy(out.data(), raw.data(), raw.size());
      break;
    case DType::kF32:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = f32()[i];
      break;
    case DType::kI64:
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<double>(i64()[i]);
      break;
    case DType::kI32:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = i32()[i];
      break;
    case DType::kU8:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = u8()[i];
      break;
  }
  return out;
}

double ArrayFile::attr_f64(const std::string& name) const {
  const auto it = attrs_.find(name);
  if (it == attrs_.end()) throw std::runtime_error("missing attribute: " + name);
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&it->second))
    return static_cast<double>(*i);
  throw std::runtime_error("attribute is not numeric: " + name);
}

std::int64_t ArrayFile::attr_i64(const std::string& name) const {
  const auto it = attrs_.find(name);
  if (it == attrs_.end()) throw std::runtime_error("missing attribute: " + name);
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  throw std::runtime_error("attribute is not an integer: " + name);
}

std::string ArrayFile::attr_str(const std::string& name) const {
  const auto it = attrs_.find(name);
  if (it == attrs_.end()) throw std::runtime_error("missing attribute: " + name);
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw std::runtime_error("attribute is not a string: " + name);
}

Variable& ArrayFile::add(const std::string& name, DType dtype,
                         std::vector<std::uint64_t> shape) {
  if (index_.count(name)) {
    throw std::runtime_error("duplicate variable: " + name);
  }
  if (shape.empty()) {
    throw std::runtime_error("variable '" + name + "' has empty shape");
  }
  Variable v;
  v.name = name;
  v.dtype = dtype;
  v.shape = std::move(shape);
  v.raw.assign(v.elements() * dtype_size(dtype), std::byte{0});
  index_[name] = vars_.size();
  vars_.push_back(std::move(v));
  return vars_.back();
}

Variable& ArrayFile::add_f64(const std::string& name,
                             std::span<const double> data) {
  Variable& v = add(name, DType::kF64, {data.size()});
  if (!data.empty()) std::memcpy(v.raw.data(), data.data(), data.size_bytes());
  return v;
}

Variable& ArrayFile::add_f64(const std::string& name,
                             const Eigen::VectorXd& vec) {
  return add_f64(name, std::span<const double>(vec.data(),
                                               static_cast<std::size_t>(
                                                   vec.size())));
}

Variable& ArrayFile::add_i64(const std::string& name,
                             std::span<const std::int64_t> data) {
  Variable& v = add(name, DType::kI64, {data.size()});
  if (!data.empty()) std::memcpy(v.raw.data(), data.data(), data.size_bytes());
  return v;
}

Variable& ArrayFile::add_u8(const std::string& name,
                            std::span<const std::uint8_t> data) {
  Variable& v = add(name, DType::kU8, {data.size()});
  if (!data.empty()) std::memcpy(v.raw.data(), data.data(), data.size_bytes());
  return v;
}

bool ArrayFile::has_var(const std::string& name) const {
  return index_.count(name) > 0;
}

const Variable& ArrayFile::var(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::runtime_error("missing variable: " + name);
  }
  return vars_[it->second];
}

Variable& ArrayFile::var(const std::string& name) {
  return const_cast<Variable&>(
      static_cast<const ArrayFile*>(this)->var(name));
}

std::vector<std::byte> ArrayFile::serialize() const {
  ByteWriter w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(static_cast<std::uint32_t>(attrs_.size()));
  for (const auto& [name, value] : attrs_) {
    w.str(name);
    if (const auto* d = std::get_if<double>(&value)) {
      w.u8(0);
      w.f64(*d);
    } else if (const auto* i = std::get_if<std::int64_t>(&value)) {
      w.u8(1);
      w.i64(*i);
    } else {
      w.u8(2);
      const auto& s = std::get<std::string>(value);
      w.u32(static_cast<std::uint32_t>(s.size()));
      w.raw(s.data(), s.size());
    }
  }
  w.u32(static_cast<std::uint32_t>(vars_.size()));
  for (const Variable& v : vars_) {
    w.str(v.name);
    w.u8(static_cast<std::uint8_t>(v.dtype));
    w.u8(static_cast<std::uint8_t>(v.shape.size()));
    for (const std::uint64_t d : v.shape) w.u64(d);
    w.raw(v.raw.data(), v.raw.size());
  }
  const std::uint64_t sum = fnv1a(w.bytes().data(), w.size());
  w.u64(sum);
  return w.take();
}

void ArrayFile::write(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  write_bytes_atomic(path, bytes);
}

ArrayFile ArrayFile::deserialize(std::span<const std::byte> bytes,
                                 const std::string& origin) {
  if (bytes.size() < sizeof kMagic + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not an array container: " + origin);
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (fnv1a(bytes.data(), body) != stored) {
    throw std::runtime_error("checksum mismatch (truncated or corrupted): " +
                             origin);
  }
  ByteReader r(bytes.subspan(0, body));
  char magic[8];
  r.raw(magic, sizeof magic);
  ArrayFile f;
  const std::uint32_t n_attrs = r.u32();
  for (std::uint32_t i = 0; i < n_attrs; ++i) {
    const std::string name = r.str();
    const std::uint8_t kind = r.u8();
    switch (kind) {
      case 0: f.attrs_[name] = r.f64(); break;
      case 1: f.attrs_[name] = r.i64(); break;
      case 2: {
        const std::uint32_t len = r.u32();
        std::string s(len, '\0');
        r.raw(s.data(), len);
        f.attrs_[name] = std::move(s);
        break;
      }
      default:
        throw std::runtime_error("unknown attribute kind in " + origin);
    }
  }
  const std::uint32_t n_vars = r.u32();
  for (std::uint32_t i = 0; i < n_vars; ++i) {
    const std::string name = r.str();
    const std::uint8_t code = r.u8();
    if (code > 4) {
      throw std::runtime_error("unknown dtype for variable '" + name +
                               "' in " + origin);
    }
    const std::uint8_t ndim = r.u8();
    if (ndim == 0 || ndim > 4) {
      throw std::runtime_error("bad rank for variable '" + name + "' in " +
                               origin);
    }
    std::vector<std::uint64_t> shape(ndim);
    for (auto& d : shape) d = r.u64();
    Variable& v = f.add(name, static_cast<DType>(code), std::move(shape));
    r.raw(v.raw.data(), v.raw.size());
  }
  if (r.remaining() != 0) {
    throw std::runtime_error("trailing bytes in " + origin);
  }
  return f;
}

ArrayFile ArrayFile::read(const std::filesystem::path& path) {
  return deserialize(read_bytes(path), path.string());
}

}  // namespace gnssr::io
