#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "susytb/closed_form.hpp"
#include "susytb/common.hpp"

namespace susytb {

enum class BoundaryKind { dirichlet_zero, absorbing_layer };

struct Boundary {
  BoundaryKind kind = BoundaryKind::dirichlet_zero;
  double width = 4.0;     // absorbing layer thickness
  double strength = 1.0;  // peak of the quartic -i ramp
};

// Nodes x_i = -L + i dx, dx = 2L / (nx - 1); the two end nodes are the
// Dirichlet walls and stay zero.
struct PropagationGrid {
  double half_width = 20.0;
  int nx = 2048;
  double dz = 0.01;
  Boundary boundary;

  void validate() const;
  double dx() const { return 2.0 * half_width / (nx - 1); }
  std::vector<double> nodes() const;
  // Non-fatal diagnostics (dz > dx).
  std::vector<std::string> warnings() const;
};

struct FieldSnapshot {
  double z = 0.0;
  std::vector<cplx> samples;
};

using PotentialFn = std::function<void(double z, std::span<const double> x, std::span<cplx> out)>;

PotentialFn system_potential(std::shared_ptr<const WaveguideSystem> system,
                             std::span<const double> x);
PotentialFn zero_potential();

// One Crank-Nicolson step of i psi_z = (-d_xx + V) psi with V averaged over
// the step.  `v0` and `v1` are V at z and z + dz on the grid nodes.
void cn_step(std::vector<cplx>& field, std::span<const cplx> v0, std::span<const cplx> v1,
             const PropagationGrid& grid);

// Propagates from z_out.front() and records snapshots at every z_out entry;
// each output interval is split into equal steps no longer than dz.
// Throws SolverError when the power grows by more than 1e6.
std::vector<FieldSnapshot> propagate(std::vector<cplx> initial, const PotentialFn& V,
                                     const PropagationGrid& grid,
                                     const std::vector<double>& z_out);

// Discrete L2 norm on the grid (trapezoid weights).
double grid_norm(std::span<const cplx> f, double dx);
// ||a - b|| / ||b||.
double relative_l2_error(std::span<const cplx> a, std::span<const cplx> b, double dx);

struct ResidualGrid {
  double x_min = -10.0;
  double x_max = 10.0;
  int nx = 4096;
  std::vector<double> z_samples = {0.0};
  double hz = 0.0;  // z stencil step; 0 uses the x spacing
};

// max over interior nodes and z samples of |i psi_z + psi_xx - V psi| with
// fourth-order central stencils in x and z.
double pde_residual(const std::function<cplx(double, double)>& psi,
                    const std::function<cplx(double, double)>& V, const ResidualGrid& grid);

}  // namespace susytb
