#pragma once

#include "piham/gradient.hpp"
#include "piham/types.hpp"

#include <optional>

namespace piham {

// One block of the block-diagonal Hessian of the log posterior. matrix is
// symmetrized; asymmetry records the relative skew of the raw finite
// difference before symmetrization.
struct HessianBlock {
  BlockSpan span;
  Matrix matrix;
  double asymmetry = 0.0;
};

using BlockSelector = std::function<bool(const BlockSpan&)>;

// Second derivatives restricted to each selected block (other coordinates
// held fixed), by central finite differences of the analytic gradient with
// the given step. Blocks are independent; n_threads > 1 parallelizes over
// them with deterministic output.
std::vector<HessianBlock> block_hessian(const HeterogeneousDataset& data,
                                        const LatentState& state,
                                        const ObservationMask& mask,
                                        const ModelConfig& config,
                                        const BlockSelector& select = nullptr,
                                        double step = 1e-4, int n_threads = 1);

}  // namespace piham
