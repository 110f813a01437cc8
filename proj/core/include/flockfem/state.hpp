#pragma once

#include <string>

#include "flockfem/fem.hpp"

namespace flockfem {

/// Alignment model family.
///  - CuckerSmale: weight frozen at its initial field (w == 1 for classic CS).
///  - MotschTadmor: weight replaced by 1 / rho_phi at every step.
///  - SModel: weight transported along the Favre velocity.
enum class Variant { CuckerSmale, MotschTadmor, SModel };

std::string to_string(Variant v);
/// Accepts "cucker_smale", "motsch_tadmor", "s_model".
Variant parse_variant(const std::string& name);

/// Discrete unknowns at time t: density and weight in P3, velocity in P2.
struct SimState {
  FEFunction rho;
  FEFunction w;
  FEFunction u;
  double t = 0.0;
};

}  // namespace flockfem
