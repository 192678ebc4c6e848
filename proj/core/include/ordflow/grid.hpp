#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ordflow {

using Point = std::vector<double>;

enum class Monotonicity { none, increasing, decreasing };

const char* to_string(Monotonicity tag);

// Uniform rectangular grid; axis 0 varies fastest in the flat node index.
class Grid {
 public:
  Grid(std::vector<double> origin, std::vector<double> spacing, std::vector<std::size_t> counts);

  static Grid box(const Point& lower, const Point& upper, const std::vector<std::size_t>& counts);
  static Grid line(double lower, double upper, std::size_t n);
  // Node counts chosen so that the spacing is h on every axis (box edges must be multiples of h).
  static Grid with_spacing(const Point& lower, const Point& upper, double h);

  std::size_t dim() const { return origin_.size(); }
  std::size_t size() const { return size_; }
  std::size_t count(std::size_t axis) const { return counts_[axis]; }
  double spacing(std::size_t axis) const { return spacing_[axis]; }
  double lower(std::size_t axis) const { return origin_[axis]; }
  double upper(std::size_t axis) const;
  std::size_t stride(std::size_t axis) const { return strides_[axis]; }
  double cell_volume() const;
  double min_spacing() const;
  double max_spacing() const;
  Point lower_corner() const { return origin_; }
  Point upper_corner() const;

  double coord(std::size_t axis, std::size_t i) const {
    return origin_[axis] + static_cast<double>(i) * spacing_[axis];
  }
  void coords(std::size_t index, std::span<double> out) const;
  Point node(std::size_t index) const;
  std::size_t axis_index(std::size_t index, std::size_t axis) const {
    return (index / strides_[axis]) % counts_[axis];
  }
  std::size_t flat_index(std::span<const std::size_t> multi) const;

  bool contains(std::span<const double> x, double tol = 0.0) const;
  std::size_t nearest(std::size_t axis, double x) const;
  // Multi-index of the node at p; throws DomainError unless p is a node within 1e-9 cells.
  std::vector<std::size_t> aligned_node(const Point& p) const;
  // Sub-grid formed by the nodes of the grid-aligned box [lo, hi].
  Grid sub_grid(const Point& lo, const Point& hi) const;

  bool operator==(const Grid& other) const = default;

 private:
  std::vector<double> origin_;
  std::vector<double> spacing_;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

// Open axis-aligned box, used as a set mask.
struct Box {
  Point lower;
  Point upper;

  bool contains(std::span<const double> x) const;
  double volume() const;
  std::size_t dim() const { return lower.size(); }
};

using ScalarFn = std::function<double(std::span<const double>)>;
using VectorFn = std::function<void(std::span<const double>, std::span<double>)>;

// Samples of an R^m-valued function on a grid, node-major (all components of a node adjacent).
class GridFunction {
 public:
  GridFunction(Grid grid, std::vector<double> values, std::size_t width = 1,
               Monotonicity tag = Monotonicity::none);

  static GridFunction constant(const Grid& grid, double c, std::size_t width = 1);
  static GridFunction sample(const Grid& grid, const ScalarFn& fn,
                             Monotonicity tag = Monotonicity::none);
  static GridFunction sample(const Grid& grid, std::size_t width, const VectorFn& fn,
                             Monotonicity tag = Monotonicity::none);
  // Identity map x -> x, tagged increasing.
  static GridFunction identity(const Grid& grid);

  const Grid& grid() const { return grid_; }
  std::size_t width() const { return width_; }
  std::size_t nodes() const { return grid_.size(); }
  Monotonicity tag() const { return tag_; }

  double operator()(std::size_t node, std::size_t comp = 0) const {
    return values_[node * width_ + comp];
  }
  std::span<const double> values() const { return values_; }
  std::span<const double> at_node(std::size_t node) const {
    return std::span<const double>(values_).subspan(node * width_, width_);
  }

  GridFunction component(std::size_t comp) const;
  // Copy carrying a new tag; throws DomainError if the data does not have it.
  GridFunction with_tag(Monotonicity tag) const;
  GridFunction map(const std::function<double(double)>& fn,
                   Monotonicity tag = Monotonicity::none) const;

  // Multilinear interpolation with constant extension outside the grid.
  double interpolate(std::span<const double> x, std::size_t comp = 0) const;
  void interpolate(std::span<const double> x, std::span<double> out) const;

  double min(std::size_t comp = 0) const;
  double max(std::size_t comp = 0) const;

 private:
  Grid grid_;
  std::vector<double> values_;
  std::size_t width_;
  Monotonicity tag_;
};

// h^d * sum |f - g|^p over nodes (optionally restricted to a box); width must match.
double lp_distance(const GridFunction& f, const GridFunction& g, double p = 1.0,
                   const Box* box = nullptr);
double lp_norm(const GridFunction& f, double p = 1.0, const Box* box = nullptr);

}  // namespace ordflow
