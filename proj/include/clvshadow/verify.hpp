#pragma once

#include "clvshadow/adjoint.hpp"
#include "clvshadow/shadowing.hpp"

#include <string>
#include <vector>

namespace clvshadow {

/// One named check of the property suite: a measured worst case against a
/// fixed threshold. Names are stable identifiers for downstream scripts.
struct PropertyCheck {
    std::string name;
    double measured = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

struct VerifyOptions {
    int samples = 100;              ///< random samples per property
    std::uint64_t seed = 0xa5a5a5u;
};

/// Randomized checks of the structural identities behind the construction
/// (propagation/projection commutation, projection norm bounds, pairing
/// constancy, biorthogonality, neutral-projection formula, adjoint growth
/// rates) plus the defining diagnostics of the supplied shadowing direction.
std::vector<PropertyCheck> property_suite(const SystemSpec& spec, const Trajectory& traj,
                                          const ClvBasis& clv, const AdjointClvBasis& adj,
                                          const AdjointShadowing& shadow,
                                          const VerifyOptions& opts = {});
std::vector<PropertyCheck> property_suite(const MapSpec& spec, const Trajectory& traj,
                                          const ClvBasis& clv, const AdjointClvBasis& adj,
                                          const MapShadowing& shadow,
                                          const VerifyOptions& opts = {});

bool all_pass(const std::vector<PropertyCheck>& checks);

} // namespace clvshadow
