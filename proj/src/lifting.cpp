#include "hisop/lifting.hpp"

#include <algorithm>
#include <cmath>

#include "hisop/errors.hpp"

namespace hisop {

DenseArray depth_confidence(const DenseArray& depth_logits) {
  require_rank(depth_logits, 3, "depth_confidence");
  const std::size_t D = depth_logits.extent(0), H = depth_logits.extent(1), W = depth_logits.extent(2);
  if (D < 2) throw ShapeError("depth_confidence: need at least 2 depth hypotheses");
  const DenseArray prob = softmax(depth_logits, 0);
  DenseArray conf({H, W});
  const std::size_t plane = H * W;
  for (std::size_t i = 0; i < plane; ++i) {
    double best = prob[i];
    for (std::size_t d = 1; d < D; ++d) best = std::max(best, prob[d * plane + i]);
    conf[i] = best;
  }
  return conf;
}

DenseArray global_context(const DenseArray& keys, const DenseArray& values) {
  require_rank(keys, 2, "global_context keys");
  require_rank(values, 2, "global_context values");
  const std::size_t Nk = keys.extent(0), Ck = keys.extent(1), Cv = values.extent(1);
  if (values.extent(0) != Nk)
    throw ShapeError("linear_cross_attention: " + std::to_string(Nk) + " keys vs " +
                     std::to_string(values.extent(0)) + " values");
  const DenseArray phi_k = softmax(keys, 0);
  DenseArray g({Ck, Cv});
  for (std::size_t n = 0; n < Nk; ++n)
    for (std::size_t i = 0; i < Ck; ++i) {
      const double a = phi_k[n * Ck + i];
      for (std::size_t j = 0; j < Cv; ++j) g[i * Cv + j] += a * values[n * Cv + j];
    }
  return g;
}

DenseArray linear_cross_attention(const DenseArray& queries, const DenseArray& keys,
                                  const DenseArray& values, std::span<const double> confidence) {
  require_rank(queries, 2, "linear_cross_attention queries");
  require_rank(keys, 2, "linear_cross_attention keys");
  const std::size_t Nq = queries.extent(0), Ck = queries.extent(1);
  if (keys.extent(1) != Ck)
    throw ShapeError("linear_cross_attention: query channels " + std::to_string(Ck) +
                     " vs key channels " + std::to_string(keys.extent(1)));
  if (confidence.size() != Nq)
    throw ShapeError("linear_cross_attention: confidence length " + std::to_string(confidence.size()) +
                     " vs " + std::to_string(Nq) + " queries");
  const DenseArray g = global_context(keys, values);
  const std::size_t Cv = g.extent(1);
  const DenseArray phi_q = softmax(queries, 1);
  DenseArray out({Nq, Cv});
  for (std::size_t n = 0; n < Nq; ++n) {
    double* row = &out[n * Cv];
    for (std::size_t i = 0; i < Ck; ++i) {
      const double a = phi_q[n * Ck + i];
      for (std::size_t j = 0; j < Cv; ++j) row[j] += a * g[i * Cv + j];
    }
    for (std::size_t j = 0; j < Cv; ++j) row[j] *= confidence[n];
  }
  return out;
}

namespace {

void check_lift_shapes(const DenseArray& context, const DenseArray& depth_logits) {
  require_rank(context, 3, "lift context");
  require_rank(depth_logits, 3, "lift depth logits");
  if (context.extent(1) != depth_logits.extent(1) || context.extent(2) != depth_logits.extent(2))
    throw ShapeError("lift: context " + to_string(context.shape()) + " and depth " +
                     to_string(depth_logits.shape()) + " disagree on image extents");
}

DenseArray outer_product(const DenseArray& context, const DenseArray& dist) {
  const std::size_t C = context.extent(0), D = dist.extent(0), H = dist.extent(1), W = dist.extent(2);
  const std::size_t plane = H * W;
  DenseArray volume({C, D, H, W});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t d = 0; d < D; ++d) {
      double* dst = &volume[(c * D + d) * plane];
      const double* p = &dist[d * plane];
      const double* f = &context[c * plane];
      for (std::size_t i = 0; i < plane; ++i) dst[i] = f[i] * p[i];
    }
  return volume;
}

}  // namespace

LiftResult lift_to_voxel_volume(const DenseArray& context, const DenseArray& depth_logits,
                                const DenseArray& confidence) {
  check_lift_shapes(context, depth_logits);
  require_rank(confidence, 2, "lift confidence");
  const std::size_t C = context.extent(0), D = depth_logits.extent(0), H = depth_logits.extent(1),
                    W = depth_logits.extent(2);
  if (confidence.extent(0) != H || confidence.extent(1) != W)
    throw ShapeError("lift: confidence " + to_string(confidence.shape()) + " does not match image extents");
  const std::size_t plane = H * W;

  const DenseArray prob = softmax(depth_logits, 0);
  DenseArray tokens({plane, C});  // keys and values
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < plane; ++i) tokens[i * C + c] = context[c * plane + i];

  DenseArray queries({D * plane, C});
  std::vector<double> token_conf(D * plane);
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t q = d * plane + i;
      for (std::size_t c = 0; c < C; ++c) queries[q * C + c] = prob[q] * tokens[i * C + c];
      token_conf[q] = confidence[i];
    }

  const DenseArray attended = linear_cross_attention(queries, tokens, tokens, token_conf);

  DenseArray interacted({D, H, W});
  for (std::size_t q = 0; q < D * plane; ++q) {
    double acc = 0.0;
    for (std::size_t c = 0; c < C; ++c) acc += attended[q * C + c];
    interacted[q] = depth_logits[q] + acc / static_cast<double>(C);
  }
  DenseArray dist = softmax(interacted, 0);
  DenseArray volume = outer_product(context, dist);
  return {std::move(volume), std::move(dist), std::move(interacted)};
}

LiftResult lift_plain(const DenseArray& context, const DenseArray& depth_logits) {
  check_lift_shapes(context, depth_logits);
  DenseArray dist = softmax(depth_logits, 0);
  DenseArray volume = outer_product(context, dist);
  return {std::move(volume), std::move(dist), depth_logits};
}

}  // namespace hisop
