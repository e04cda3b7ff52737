#pragma once

#include <Eigen/Core>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gnssr/container.hpp"
#include "gnssr/geogrid.hpp"

namespace gnssr::io {

// Multi-layer gridded field over a rectangular window of a global grid.
// Reads outside the window (or of never-written cells) yield the sentinel.
template <typename T>
class Raster {
 public:
  using Layer = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  Raster() = default;

  Raster(grid::GridSpec spec, long row0, long col0, long nrows, long ncols,
         int layers, T sentinel)
      : spec_(spec),
        row0_(row0),
        col0_(col0),
        nrows_(nrows),
        ncols_(ncols),
        sentinel_(sentinel) {
    if (nrows <= 0 || ncols <= 0 || layers <= 0) {
      throw std::invalid_argument("raster window must be non-empty");
    }
    if (row0 < 0 || col0 < 0 || row0 + nrows > spec.rows ||
        col0 + ncols > spec.cols) {
      throw std::invalid_argument("raster window outside grid");
    }
    layers_.assign(static_cast<std::size_t>(layers),
                   Layer::Constant(nrows, ncols, sentinel));
  }

  static Raster full(grid::GridSpec spec, int layers, T sentinel) {
    return Raster(spec, 0, 0, spec.rows, spec.cols, layers, sentinel);
  }

  const grid::GridSpec& spec() const { return spec_; }
  long row0() const { return row0_; }
  long col0() const { return col0_; }
  long window_rows() const { return nrows_; }
  long window_cols() const { return ncols_; }
  int layers() const { return static_cast<int>(layers_.size()); }
  T sentinel() const { return sentinel_; }
  bool is_missing(T v) const { return v == sentinel_; }

  bool covers(const grid::CellIndex& c) const {
    return c.row >= row0_ && c.row < row0_ + nrows_ && c.col >= col0_ &&
           c.col < col0_ + ncols_;
  }

  T at(const grid::CellIndex& c, int layer = 0) const {
    check_layer(layer);
    if (!covers(c)) return sentinel_;
    return layers_[static_cast<std::size_t>(layer)](c.row - row0_,
                                                    c.col - col0_);
  }

  void set(const grid::CellIndex& c, T value, int layer = 0) {
    check_layer(layer);
    if (!covers(c)) {
      throw std::out_of_range("cell (" + std::to_string(c.row) + ", " +
                              std::to_string(c.col) +
                              ") outside raster window");
    }
    layers_[static_cast<std::size_t>(layer)](c.row - row0_, c.col - col0_) =
        value;
  }

  Layer& layer(int i) {
    check_layer(i);
    return layers_[static_cast<std::size_t>(i)];
  }
  const Layer& layer(int i) const {
    check_layer(i);
    return layers_[static_cast<std::size_t>(i)];
  }

  void write(const std::filesystem::path& path) const {
    ArrayFile f;
    f.set_attr("kind", "raster");
    f.set_attr("grid",
               spec_.kind == grid::GridKind::kEase2Global ? "ease2" : "degree");
    f.set_attr("cell_km", static_cast<std::int64_t>(spec_.nominal_cell_km));
    f.set_attr("degree_step", spec_.degree_step);
    f.set_attr("rows", static_cast<std::int64_t>(spec_.rows));
    f.set_attr("cols", static_cast<std::int64_t>(spec_.cols));
    f.set_attr("window_row0", static_cast<std::int64_t>(row0_));
    f.set_attr("window_col0", static_cast<std::int64_t>(col0_));
    f.set_attr("window_rows", static_cast<std::int64_t>(nrows_));
    f.set_attr("window_cols", static_cast<std::int64_t>(ncols_));
    f.set_attr("layers", static_cast<std::int64_t>(layers_.size()));
    f.set_attr("sentinel", static_cast<double>(sentinel_));
    Variable& v = f.add("data", dtype_of(),
                        {static_cast<std::uint64_t>(layers_.size()),
                         static_cast<std::uint64_t>(nrows_),
                         static_cast<std::uint64_t>(ncols_)});
    T* out = reinterpret_cast<T*>(v.raw.data());
    for (const Layer& l : layers_) {
      for (long r = 0; r < nrows_; ++r) {
        for (long c = 0; c < ncols_; ++c) *out++ = l(r, c);
      }
    }
    f.write(path);
  }

  static Raster read(const std::filesystem::path& path) {
    const ArrayFile f = ArrayFile::read(path);
    if (!f.has_attr("kind") || f.attr_str("kind") != "raster") {
      throw std::runtime_error("not a raster file: " + path.string());
    }
    grid::GridSpec spec;
    if (f.attr_str("grid") == "ease2") {
      spec = grid::GridSpec::ease2(static_cast<int>(f.attr_i64("cell_km")));
    } else {
      spec = grid::GridSpec::degree_regular(f.attr_f64("degree_step"));
    }
    if (spec.rows != f.attr_i64("rows") || spec.cols != f.attr_i64("cols")) {
      throw std::runtime_error("grid dimensions mismatch in " + path.string());
    }
    Raster r(spec, f.attr_i64("window_row0"), f.attr_i64("window_col0"),
             f.attr_i64("window_rows"), f.attr_i64("window_cols"),
             static_cast<int>(f.attr_i64("layers")),
             static_cast<T>(f.attr_f64("sentinel")));
    const Variable& v = f.var("data");
    if (v.dtype != dtype_of()) {
      throw std::runtime_error("raster dtype mismatch in " + path.string());
    }
    if (v.raw.size() != r.layers_.size() * static_cast<std::size_t>(r.nrows_) *
                            static_cast<std::size_t>(r.ncols_) * sizeof(T)) {
      throw std::runtime_error("raster payload size mismatch in " +
                               path.string());
    }
    const T* in = reinterpret_cast<const T*>(v.raw.data());
    for (Layer& l : r.layers_) {
      for (long rr = 0; rr < r.nrows_; ++rr) {
        for (long cc = 0; cc < r.ncols_; ++cc) l(rr, cc) = *in++;
      }
    }
    return r;
  }

 private:
  static DType dtype_of() {
    if constexpr (std::is_same_v<T, double>) return DType::kF64;
    else if constexpr (std::is_same_v<T, float>) return DType::kF32;
    else if constexpr (std::is_same_v<T, std::uint8_t>) return DType::kU8;
    else if constexpr (std::is_same_v<T, std::int32_t>) return DType::kI32;
    else static_assert(sizeof(T) == 0, "unsupported raster scalar");
  }

  void check_layer(int i) const {
    if (i < 0 || i >= layers()) {
      throw std::out_of_range("raster layer out of range: " +
                              std::to_string(i));
    }
  }

  grid::GridSpec spec_;
  long row0_ = 0, col0_ = 0, nrows_ = 0, ncols_ = 0;
  T sentinel_{};
  std::vector<Layer> layers_;
};

}  // namespace gnssr::io
