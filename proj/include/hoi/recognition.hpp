#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hoi/features.hpp"
#include "hoi/labels.hpp"
#include "hoi/pairing.hpp"

namespace hoi {

// Binary predicate feasibility per object category: rows[object][predicate].
struct AttentionMask {
  int num_predicates = 0;
  std::vector<std::vector<std::uint8_t>> rows;

  bool allowed(int object, int predicate) const { return rows[object][predicate] != 0; }

  static AttentionMask all_ones(int num_objects, int num_predicates);

  friend bool operator==(const AttentionMask&, const AttentionMask&) = default;
};

// A predicate is feasible for an object category iff the pair occurs at least
// once in `annotations`.
AttentionMask build_mask(std::span<const HoiLabel> annotations, const LabelSpace& labels);

enum class FeatureKind : std::uint8_t { kBehavior = 0, kMotion = 1, kSemantic = 2 };

struct RecognitionConfig {
  int hidden = 64;
  double learning_rate = 0.2;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 7;
  double score_threshold = 0.5;
  int top_k = 10;
  bool score_with_confidence = false;  // multiply instance scores by trajectory scores

  // Ablation switches; all on is the full method.
  bool use_behavior = true;  // behavior descriptor branch
  bool use_mask = true;      // object-conditioned hard mask
  bool late_fusion = true;   // one classifier per feature type, scores averaged
  bool factorized = true;    // predicate-only outputs; false = joint <predicate, object>

  void validate() const;
};

// Two-layer perceptron: relu(w1 x + b1) -> w2 h + b2.
struct Mlp {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  Eigen::Index input_size() const { return w1.cols(); }
  Eigen::Index output_size() const { return w2.rows(); }
  Eigen::Index parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }
};

// One independent classifier over the concatenation of `inputs`, after
// per-dimension standardization fitted on the training set.
struct Branch {
  std::vector<FeatureKind> inputs;
  Eigen::VectorXd mean;
  Eigen::VectorXd inv_std;
  Mlp mlp;
};

struct InteractionModel {
  LabelSpace labels;
  AttentionMask mask;
  RecognitionConfig config;
  std::vector<Branch> branches;

  // |predicates| when factorized, |objects| * |predicates| otherwise; joint
  // index = object * |predicates| + predicate.
  int output_size() const;

  // 0/1 weights over the output slots for a pair whose object trajectory has
  // category `object`.
  std::vector<double> output_mask(int object) const;

  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> params);
};

// Per-branch probabilities, already masked.
struct BranchScores {
  std::vector<std::vector<double>> per_branch;
};

BranchScores predict_segment(const FeatureBundle& bundle, int object,
                             const InteractionModel& model);

// Element-wise arithmetic mean of the branch scores.
std::vector<double> fuse_scores(std::span<const std::vector<double>> scores);

inline constexpr double kProbabilityEpsilon = 1e-7;

// Binary cross entropy summed over branches and unmasked entries, on sigmoid
// probabilities clamped to [eps, 1 - eps]. Throws DataError if a target is 1
// on a masked entry.
double bce_loss(std::span<const std::vector<double>> logits,
                std::span<const double> targets, std::span<const double> mask);

// Same loss and its gradient with respect to each branch's logits. Entries
// whose probability is clamped get zero gradient.
double bce_loss_gradient(std::span<const std::vector<double>> logits,
                         std::span<const double> targets,
                         std::span<const double> mask,
                         std::vector<std::vector<double>>& grad);

// Training example: features of one candidate segment built from annotated
// trajectories, the object category, and the multi-hot predicate targets
// (all zero for a non-interacting segment).
struct TrainingSample {
  FeatureBundle features;
  int object = 0;
  std::vector<std::uint8_t> targets;
};

// Samples laid out per branch, inputs standardized, ready for batched passes.
struct PreparedBatch {
  std::vector<Eigen::MatrixXd> inputs;  // per branch: input_size x n
  Eigen::MatrixXd targets;              // output_size x n
  Eigen::MatrixXd mask;                 // output_size x n
  Eigen::Index size() const { return targets.cols(); }
};

PreparedBatch prepare_batch(const InteractionModel& model,
                            std::span<const TrainingSample> samples);

// Mean per-sample loss over the batch.
double batch_loss(const InteractionModel& model, const PreparedBatch& batch);

// Mean loss and its gradient, flattened in flat_parameters() order.
double batch_loss_gradient(const InteractionModel& model, const PreparedBatch& batch,
                           std::vector<double>& gradient);

// Architecture, mask and standardization from the samples; parameters drawn
// uniformly in +-1/sqrt(fan_in) from the seeded generator.
InteractionModel initialize_model(std::span<const TrainingSample> samples,
                                  const LabelSpace& labels, const RecognitionConfig& cfg);

struct TrainResult {
  InteractionModel model;
  std::vector<double> loss_curve;  // mean per-sample loss of each epoch
};

// Mini-batch gradient descent with a fixed learning rate. Deterministic for a
// fixed seed.
TrainResult train(std::span<const TrainingSample> samples, const LabelSpace& labels,
                  const RecognitionConfig& cfg);

// Scores of one candidate segment; `object_category` is the category the
// scores refer to (the object trajectory's category when factorized).
struct ScoredSegment {
  std::size_t pair = 0;
  Span span;
  int object_category = 0;
  std::vector<double> scores;  // one per predicate
};

// Joins maximal runs of temporally consecutive segments of the same pair and
// object category whose score for a predicate reaches the threshold (and is
// among the segment's top_k) into instances. Instance score is the mean
// segment score. Output is sorted by score descending.
std::vector<HoiInstance> associate_instances(std::span<const ScoredSegment> segments,
                                             const std::vector<CandidatePair>& pairs,
                                             const std::vector<Trajectory>& trajectories,
                                             const RecognitionConfig& cfg);

}  // namespace hoi
