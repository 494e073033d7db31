#pragma once

#include <functional>

namespace rfp {

// Treatment of the two momentum edges. The xi = -1 and xi = +1 edges always
// carry zero flux; their guards are filled by reflection.
enum class PBoundaryKind {
  Dirichlet,  // f~ prescribed on the face, linear ghost extrapolation
  Neumann,    // mirrored guards, zero normal derivative; advective inflow carries f = 0
  Exact,      // guards set pointwise from a known solution
  ZeroFlux,   // mirrored guards and the face flux forced to zero
};

struct BoundarySpec {
  PBoundaryKind left = PBoundaryKind::Dirichlet;
  PBoundaryKind right = PBoundaryKind::Neumann;
  // f~(p, xi, t). Dirichlet evaluates it on the face, Exact at guard centers.
  std::function<double(double, double, double)> left_value;
  std::function<double(double, double, double)> right_value;
};

}  // namespace rfp
