#include "piham/hessian.hpp"

#include "piham/parallel.hpp"

namespace piham {

std::vector<HessianBlock> block_hessian(const HeterogeneousDataset& data,
                                        const LatentState& state,
                                        const ObservationMask& mask,
                                        const ModelConfig& config,
                                        const BlockSelector& select,
                                        double step, int n_threads) {
  std::vector<BlockSpan> selected;
  for (const BlockSpan& span : block_spans(config, data.n_nodes))
    if (!select || select(span)) selected.push_back(span);

  const Vector base = pack(state);
  std::vector<HessianBlock> blocks(selected.size());
  parallel_for(static_cast<Index>(selected.size()), n_threads, [&](Index b) {
    const BlockSpan& span = selected[b];
    Matrix raw(span.size, span.size);
    Vector grad_plus, grad_minus;
    for (Index c = 0; c < span.size; ++c) {
      Vector plus = base;
      Vector minus = base;
      plus(span.offset + c) += step;
      minus(span.offset + c) -= step;
      log_posterior_with_gradient(data, unpack(plus, config, data.n_nodes),
                                  mask, config, grad_plus);
      log_posterior_with_gradient(data, unpack(minus, config, data.n_nodes),
                                  mask, config, grad_minus);
      raw.col(c) = (grad_plus.segment(span.offset, span.size) -
                    grad_minus.segment(span.offset, span.size)) /
                   (2.0 * step);
    }
    double scale = std::max(1.0, raw.cwiseAbs().maxCoeff());
    HessianBlock block;
    block.span = span;
    block.asymmetry = (raw - raw.transpose()).cwiseAbs().maxCoeff() / scale;
    block.matrix = 0.5 * (raw + raw.transpose());
    blocks[b] = std::move(block);
  });
  return blocks;
}

}  // namespace piham
