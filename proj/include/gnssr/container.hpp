#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace gnssr::io {

// Self-describing binary array container: global attributes plus named,
// typed, shaped variables, with a whole-file checksum. This is the on-disk
// format for every gridded/tabular artifact the system writes; the layout is
// documented in README.md and convertible to netCDF with tools/to_netcdf.py.

enum class DType : std::uint8_t { kF64 = 0, kF32 = 1, kI64 = 2, kI32 = 3, kU8 = 4 };

std::size_t dtype_size(DType t);
const char* dtype_name(DType t);

struct Variable {
  std::string name;
  DType dtype = DType::kF64;
  std::vector<std::uint64_t> shape;
  std::vector<std::byte> raw;  // row-major

  std::size_t elements() const;

  // Typed element access; dtype must match exactly.
  const double* f64() const;
  double* f64();
  const float* f32() const;
  float* f32();
  const std::int64_t* i64() const;
  std::int64_t* i64();
  const std::int32_t* i32() const;
  std::int32_t* i32();
  const std::uint8_t* u8() const;
  std::uint8_t* u8();

  // Copies out as doubles whatever the numeric dtype.
  std::vector<double> to_f64() const;
};

using AttrValue = std::variant<double, std::int64_t, std::string>;

class ArrayFile {
 public:
  void set_attr(const std::string& name, double v) { attrs_[name] = v; }
  void set_attr(const std::string& name, std::int64_t v) { attrs_[name] = v; }
  void set_attr(const std::string& name, const std::string& v) {
    attrs_[name] = v;
  }
  void set_attr(const std::string& name, const char* v) {
    attrs_[name] = std::string(v);
  }

  bool has_attr(const std::string& name) const { return attrs_.count(name); }
  double attr_f64(const std::string& name) const;
  std::int64_t attr_i64(const std::string& name) const;
  std::string attr_str(const std::string& name) const;
  const std::map<std::string, AttrValue>& attrs() const { return attrs_; }

  // Adds a zero-filled variable and returns it for filling. Throws if the
  // name already exists or the shape is empty.
  Variable& add(const std::string& name, DType dtype,
                std::vector<std::uint64_t> shape);

  Variable& add_f64(const std::string& name, std::span<const double> data);
  Variable& add_f64(const std::string& name, const Eigen::VectorXd& v);
  Variable& add_i64(const std::string& name,
                    std::span<const std::int64_t> data);
  Variable& add_u8(const std::string& name, std::span<const std::uint8_t> data);

  bool has_var(const std::string& name) const;
  const Variable& var(const std::string& name) const;
  Variable& var(const std::string& name);
  const std::vector<Variable>& vars() const { return vars_; }

  std::vector<std::byte> serialize() const;
  void write(const std::filesystem::path& path) const;
  static ArrayFile deserialize(std::span<const std::byte> bytes,
                               const std::string& origin = "<memory>");
  static ArrayFile read(const std::filesystem::path& path);

 private:
  std::map<std::string, AttrValue> attrs_;
  std::vector<Variable> vars_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace gnssr::io
