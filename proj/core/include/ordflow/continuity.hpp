#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ordflow/flow.hpp"
#include "ordflow/grid.hpp"
#include "ordflow/transport.hpp"
#include "ordflow/velocity.hpp"

namespace ordflow {

// Weighted point cloud; positions are particle-major with stride dim.
struct ParticleEnsemble {
  std::size_t dim = 0;
  std::vector<double> positions;
  std::vector<double> weights;
  double mass = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return weights.size(); }
  std::span<const double> position(std::size_t p) const { return {positions.data() + p * dim, dim}; }
};

struct PushforwardOptions {
  std::size_t particles = 10000;
  std::uint64_t seed = 0;
  FlowSide side = FlowSide::upper;  // maximal and minimal flows agree a.e.
  double eps = 0.0;                 // 0: one grid cell
  double dt = 0.0;
  double cfl = 0.5;
  double bin_width = 0.0;           // 0: two grid cells
  double smoothing = 0.0;           // 0: four grid cells
  std::optional<Grid> field_grid;   // default covers every reachable point
  bool validate = true;
};

struct DensitySolution {
  std::vector<double> times;
  std::vector<GridFunction> slices;    // histograms on the bin grid
  std::vector<GridFunction> smoothed;  // bump-kernel densities on the bin grid
  std::vector<ParticleEnsemble> ensembles;
  double bin_width = 0.0;
  double smoothing = 0.0;
  double mass = 0.0;

  const Grid& grid() const { return slices.front().grid(); }
  std::size_t index_of(double t) const;
  const GridFunction& at(double t) const { return slices[index_of(t)]; }
};

// Stratified draw from a nonnegative density: grid cells are chosen by inverse CDF of the
// midpoint values, positions are uniform inside the cell, weights are equal.
ParticleEnsemble sample_particles(const Grid& grid, const ScalarFn& f0, std::size_t n, std::uint64_t seed);

// Same positions as sample_particles for f0 = 1 on the grid box, with weights f(x) |box| / n.
ParticleEnsemble weighted_uniform_particles(const Grid& grid, const ScalarFn& f, std::size_t n, std::uint64_t seed);

// Moves every particle along the regularized flow from s to each requested time.
std::vector<ParticleEnsemble> advect(const VelocityField& b, const ParticleEnsemble& start, double s,
                                     std::span<const double> times, const Grid& grid,
                                     const PushforwardOptions& options = {});

GridFunction histogram(const ParticleEnsemble& e, const Grid& bins);
GridFunction smoothed_density(const ParticleEnsemble& e, const Grid& bins, double width);

// Bin grid with the given width over the box of grid.
Grid bin_grid(const Grid& grid, double width);

// Histograms and smoothed densities for ensembles already moved to the given times.
DensitySolution make_density(std::vector<ParticleEnsemble> ensembles, std::vector<double> times, const Grid& grid,
                             double bin_width = 0.0, double smoothing = 0.0);

DensitySolution pushforward_solve(const VelocityField& b, const Grid& grid, const ScalarFn& f0,
                                  std::span<const double> times, const PushforwardOptions& options = {});

// Signed data as the difference of two nonnegative parts.
DensitySolution pushforward_signed(const VelocityField& b, const Grid& grid, const ScalarFn& f_plus,
                                   const ScalarFn& f_minus, std::span<const double> times,
                                   const PushforwardOptions& options = {});

struct DualityReport {
  double pushed = 0.0;   // int ubar f(t0), read off the particles
  double pulled = 0.0;   // int S(0,t0) ubar f0 on the grid
  double residual = 0.0;
};

DualityReport duality_check(const DensitySolution& density, const FieldPtr& b, const ScalarFn& f0,
                            const Grid& grid, const ScalarFn& ubar, double t0,
                            const TransportOptions& transport = {});

struct JacobianField {
  std::vector<double> times;
  std::vector<GridFunction> slices;
  Box sampling_box;  // enlarged box whose image covers the grid
};

// Pushforward of Lebesgue measure restricted to a box large enough that no mass can enter
// the grid box from outside it by the final time.
JacobianField jacobian(const VelocityField& b, const Grid& grid, std::span<const double> times,
                       const PushforwardOptions& options = {});

// max over bins and slices of |S*(t,0) f0| - sup|f0| J, from one shared ensemble; <= 0 certifies.
double domination_excess(const VelocityField& b, const Grid& grid, const ScalarFn& f0,
                         std::span<const double> times, const PushforwardOptions& options = {});

struct OverlapReport {
  double overlap = 0.0;  // int (phi_# 1_{A+}) (phi_# 1_{A-})
  double mass_plus = 0.0;
  double mass_minus = 0.0;
};

OverlapReport renormalization_overlap(const VelocityField& b, const Grid& grid, const ScalarFn& a_plus,
                                      const ScalarFn& a_minus, double s, double t,
                                      const PushforwardOptions& options = {});

struct DensityLpReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double radius = 0.0;
};

// int_{B_R} |f(t)|^p against e^{d (p-1) omega1} int_{B_R'} |f0|^p with R' = R + (1+R)(e^{omega0}-1).
DensityLpReport density_lp_bound(const DensitySolution& density, const VelocityField& b, const ScalarFn& f0,
                                 const Grid& grid, double R, double t, double p);

}  // namespace ordflow
