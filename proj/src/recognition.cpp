#include "hoi/recognition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <tuple>

#include "hoi/errors.hpp"

namespace hoi {

AttentionMask AttentionMask::all_ones(int num_objects, int num_predicates) {
  AttentionMask m;
  m.num_predicates = num_predicates;
  m.rows.assign(num_objects, std::vector<std::uint8_t>(num_predicates, 1));
  return m;
}

AttentionMask build_mask(std::span<const HoiLabel> annotations, const LabelSpace& labels) {
  AttentionMask m;
  m.num_predicates = labels.num_predicates();
  m.rows.assign(labels.num_objects(), std::vector<std::uint8_t>(m.num_predicates, 0));
  for (const HoiLabel& a : annotations) {
    if (a.object < 0 || a.object >= labels.num_objects()) {
      throw DataError("annotation object category " + std::to_string(a.object) +
                      " is not in the label space");
    }
    if (a.predicate < 0 || a.predicate >= labels.num_predicates()) {
      throw DataError("annotation predicate " + std::to_string(a.predicate) +
                      " is not in the label space");
    }
    m.rows[a.object][a.predicate] = 1;
  }
  return m;
}

void RecognitionConfig::validate() const {
  if (hidden < 1) throw ValidationError("recognition.hidden must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("recognition.learning_rate must be positive");
  }
  if (epochs < 1) throw ValidationError("recognition.epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("recognition.batch_size must be >= 1");
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw ValidationError("recognition.score_threshold must lie in [0, 1]");
  }
  if (top_k < 1) throw ValidationError("recognition.top_k must be >= 1");
}

int InteractionModel::output_size() const {
  return config.factorized ? labels.num_predicates()
                           : labels.num_objects() * labels.num_predicates();
}

std::vector<double> InteractionModel::output_mask(int object) const {
  const int np = labels.num_predicates();
  if (config.factorized) {
    std::vector<double> out(np, 1.0);
    if (config.use_mask) {
      for (int p = 0; p < np; ++p) out[p] = mask.allowed(object, p) ? 1.0 : 0.0;
    }
    return out;
  }
  // Joint outputs: the mask restricts slots to HOI categories seen in training.
  std::vector<double> out(static_cast<std::size_t>(output_size()), 1.0);
  if (config.use_mask) {
    for (int o = 0; o < labels.num_objects(); ++o) {
      for (int p = 0; p < np; ++p) out[o * np + p] = mask.allowed(o, p) ? 1.0 : 0.0;
    }
  }
  return out;
}

std::vector<double> InteractionModel::flat_parameters() const {
  std::vector<double> flat;
  for (const Branch& b : branches) {
    const Mlp& m = b.mlp;
    flat.insert(flat.end(), m.w1.data(), m.w1.data() + m.w1.size());
    flat.insert(flat.end(), m.b1.data(), m.b1.data() + m.b1.size());
    flat.insert(flat.end(), m.w2.data(), m.w2.data() + m.w2.size());
    flat.insert(flat.end(), m.b2.data(), m.b2.data() + m.b2.size());
  }
  return flat;
}

void InteractionModel::set_flat_parameters(std::span<const double> params) {
  std::size_t pos = 0;
  const auto take = [&](double* dst, Eigen::Index n) {
    if (pos + static_cast<std::size_t>(n) > params.size()) {
      throw DataError("parameter vector too short");
    }
    std::copy_n(params.data() + pos, n, dst);
    pos += static_cast<std::size_t>(n);
  };
  for (Branch& b : branches) {
    Mlp& m = b.mlp;
    take(m.w1.data(), m.w1.size());
    take(m.b1.data(), m.b1.size());
    take(m.w2.data(), m.w2.size());
    take(m.b2.data(), m.b2.size());
  }
  if (pos != params.size()) throw DataError("parameter vector too long");
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

const std::vector<double>& feature_of(const FeatureBundle& b, FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kBehavior: return b.behavior;
    case FeatureKind::kMotion: return b.motion;
    case FeatureKind::kSemantic: return b.semantic;
  }
  return b.motion;
}

Eigen::VectorXd assemble(const FeatureBundle& bundle, const Branch& branch) {
  Eigen::Index n = 0;
  for (FeatureKind k : branch.inputs) n += static_cast<Eigen::Index>(feature_of(bundle, k).size());
  Eigen::VectorXd x(n);
  Eigen::Index pos = 0;
  for (FeatureKind k : branch.inputs) {
    const auto& f = feature_of(bundle, k);
    for (double v : f) x[pos++] = v;
  }
  return x;
}

struct MlpGrad {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
};

// Mean loss over the batch; fills per-branch gradients when `grads` is given.
double forward_backward(const InteractionModel& model, const PreparedBatch& batch,
                        std::vector<MlpGrad>* grads) {
  const double n = static_cast<double>(batch.size());
  const double eps = kProbabilityEpsilon;
  double loss = 0.0;
  if (grads) grads->resize(model.branches.size());
  for (std::size_t bi = 0; bi < model.branches.size(); ++bi) {
    const Mlp& m = model.branches[bi].mlp;
    const Eigen::MatrixXd& x = batch.inputs[bi];
    const Eigen::MatrixXd pre = (m.w1 * x).colwise() + m.b1;
    const Eigen::MatrixXd hid = pre.cwiseMax(0.0);
    const Eigen::MatrixXd logits = (m.w2 * hid).colwise() + m.b2;

    Eigen::MatrixXd dlogits(logits.rows(), logits.cols());
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double w = batch.mask(i, j);
        if (w == 0.0) {
          dlogits(i, j) = 0.0;
          continue;
        }
        const double p = sigmoid(logits(i, j));
        const double pc = std::clamp(p, eps, 1.0 - eps);
        const double y = batch.targets(i, j);
        loss -= w * (y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
        const bool clamped = p < eps || p > 1.0 - eps;
        dlogits(i, j) = clamped ? 0.0 : w * (p - y) / n;
      }
    }
    if (!grads) continue;
    MlpGrad& g = (*grads)[bi];
    g.w2 = dlogits * hid.transpose();
    g.b2 = dlogits.rowwise().sum();
    const Eigen::MatrixXd dpre =
        (m.w2.transpose() * dlogits).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    g.w1 = dpre * x.transpose();
    g.b1 = dpre.rowwise().sum();
  }
  return loss / n;
}

void apply(InteractionModel& model, const std::vector<MlpGrad>& grads, double lr) {
  for (std::size_t bi = 0; bi < model.branches.size(); ++bi) {
    Mlp& m = model.branches[bi].mlp;
    m.w1 -= lr * grads[bi].w1;
    m.b1 -= lr * grads[bi].b1;
    m.w2 -= lr * grads[bi].w2;
    m.b2 -= lr * grads[bi].b2;
  }
}

void fill_uniform(double* data, Eigen::Index n, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < n; ++i) data[i] = dist(rng);
}

PreparedBatch select_columns(const PreparedBatch& all, std::span<const Eigen::Index> cols) {
  PreparedBatch out;
  const std::vector<Eigen::Index> idx(cols.begin(), cols.end());
  out.inputs.reserve(all.inputs.size());
  for (const auto& x : all.inputs) out.inputs.push_back(x(Eigen::all, idx));
  out.targets = all.targets(Eigen::all, idx);
  out.mask = all.mask(Eigen::all, idx);
  return out;
}

}  // namespace

BranchScores predict_segment(const FeatureBundle& bundle, int object,
                             const InteractionModel& model) {
  if (object < 0 || object >= model.labels.num_objects()) {
    throw DataError("object category " + std::to_string(object) + " outside the model label space");
  }
  const std::vector<double> slot_mask = model.output_mask(object);
  BranchScores out;
  for (const Branch& b : model.branches) {
    const Eigen::VectorXd raw = assemble(bundle, b);
    if (raw.size() != b.mlp.input_size()) {
      throw DataError("feature length " + std::to_string(raw.size()) +
                      " does not match model input size " +
                      std::to_string(b.mlp.input_size()));
    }
    const Eigen::VectorXd x = (raw - b.mean).cwiseProduct(b.inv_std);
    const Eigen::VectorXd hid = (b.mlp.w1 * x + b.mlp.b1).cwiseMax(0.0);
    const Eigen::VectorXd logits = b.mlp.w2 * hid + b.mlp.b2;
    std::vector<double> p(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      p[i] = slot_mask[i] == 0.0 ? 0.0 : sigmoid(logits[i]);
    }
    out.per_branch.push_back(std::move(p));
  }
  return out;
}

std::vector<double> fuse_scores(std::span<const std::vector<double>> scores) {
  if (scores.empty()) return {};
  std::vector<double> out(scores[0].size(), 0.0);
  for (const auto& s : scores) {
    if (s.size() != out.size()) throw DataError("fused score vectors differ in length");
    for (std::size_t i = 0; i < s.size(); ++i) out[i] += s[i];
  }
  const double n = static_cast<double>(scores.size());
  for (double& v : out) v /= n;
  return out;
}

double bce_loss_gradient(std::span<const std::vector<double>> logits,
                         std::span<const double> targets, std::span<const double> mask,
                         std::vector<std::vector<double>>& grad) {
  const double eps = kProbabilityEpsilon;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] != 0.0 && mask[i] == 0.0) {
      throw DataError("target set on masked entry " + std::to_string(i));
    }
  }
  double loss = 0.0;
  grad.assign(logits.size(), {});
  for (std::size_t t = 0; t < logits.size(); ++t) {
    if (logits[t].size() != targets.size() || mask.size() != targets.size()) {
      throw DataError("logit, target and mask lengths differ");
    }
    grad[t].assign(targets.size(), 0.0);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (mask[i] == 0.0) continue;
      const double p = sigmoid(logits[t][i]);
      const double pc = std::clamp(p, eps, 1.0 - eps);
      const double y = targets[i];
      loss -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
      if (p >= eps && p <= 1.0 - eps) grad[t][i] = p - y;
    }
  }
  return loss;
}

double bce_loss(std::span<const std::vector<double>> logits, std::span<const double> targets,
                std::span<const double> mask) {
  std::vector<std::vector<double>> unused;
  return bce_loss_gradient(logits, targets, mask, unused);
}

PreparedBatch prepare_batch(const InteractionModel& model,
                            std::span<const TrainingSample> samples) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  const int out = model.output_size();
  const int np = model.labels.num_predicates();
  PreparedBatch batch;
  for (const Branch& b : model.branches) {
    batch.inputs.emplace_back(b.mlp.input_size(), n);
  }
  batch.targets = Eigen::MatrixXd::Zero(out, n);
  batch.mask = Eigen::MatrixXd::Zero(out, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const TrainingSample& s = samples[j];
    if (static_cast<int>(s.targets.size()) != np) {
      throw DataError("training target length differs from the predicate count");
    }
    for (std::size_t bi = 0; bi < model.branches.size(); ++bi) {
      const Branch& b = model.branches[bi];
      const Eigen::VectorXd raw = assemble(s.features, b);
      if (raw.size() != b.mlp.input_size()) {
        throw DataError("training feature length does not match the model");
      }
      batch.inputs[bi].col(j) = (raw - b.mean).cwiseProduct(b.inv_std);
    }
    const std::vector<double> m = model.output_mask(s.object);
    const int offset = model.config.factorized ? 0 : s.object * np;
    for (int i = 0; i < out; ++i) batch.mask(i, j) = m[i];
    for (int p = 0; p < np; ++p) {
      if (!s.targets[p]) continue;
      if (m[offset + p] == 0.0) {
        throw DataError("training target '" + model.labels.predicates[p] +
                        "' is masked for object '" + model.labels.objects[s.object] + "'");
      }
      batch.targets(offset + p, j) = 1.0;
    }
  }
  return batch;
}

double batch_loss(const InteractionModel& model, const PreparedBatch& batch) {
  return forward_backward(model, batch, nullptr);
}

double batch_loss_gradient(const InteractionModel& model, const PreparedBatch& batch,
                           std::vector<double>& gradient) {
  std::vector<MlpGrad> grads;
  const double loss = forward_backward(model, batch, &grads);
  gradient.clear();
  for (const MlpGrad& g : grads) {
    gradient.insert(gradient.end(), g.w1.data(), g.w1.data() + g.w1.size());
    gradient.insert(gradient.end(), g.b1.data(), g.b1.data() + g.b1.size());
    gradient.insert(gradient.end(), g.w2.data(), g.w2.data() + g.w2.size());
    gradient.insert(gradient.end(), g.b2.data(), g.b2.data() + g.b2.size());
  }
  return loss;
}

InteractionModel initialize_model(std::span<const TrainingSample> samples,
                                  const LabelSpace& labels, const RecognitionConfig& cfg) {
  cfg.validate();
  labels.validate();
  if (samples.empty()) throw DataError("no training samples");

  InteractionModel model;
  model.labels = labels;
  model.config = cfg;
  if (cfg.use_mask) {
    std::vector<HoiLabel> seen;
    for (const auto& s : samples) {
      for (int p = 0; p < labels.num_predicates() && p < static_cast<int>(s.targets.size()); ++p) {
        if (s.targets[p]) seen.push_back({p, s.object});
      }
    }
    model.mask = build_mask(seen, labels);
  } else {
    model.mask = AttentionMask::all_ones(labels.num_objects(), labels.num_predicates());
  }

  std::vector<std::vector<FeatureKind>> layout;
  if (cfg.late_fusion) {
    if (cfg.use_behavior) layout.push_back({FeatureKind::kBehavior});
    layout.push_back({FeatureKind::kMotion});
    layout.push_back({FeatureKind::kSemantic});
  } else {
    std::vector<FeatureKind> all;
    if (cfg.use_behavior) all.push_back(FeatureKind::kBehavior);
    all.push_back(FeatureKind::kMotion);
    all.push_back(FeatureKind::kSemantic);
    layout.push_back(all);
  }

  std::mt19937_64 rng(cfg.seed);
  const int out = model.output_size();
  for (auto& inputs : layout) {
    Branch b;
    b.inputs = inputs;
    const Eigen::VectorXd first = assemble(samples[0].features, b);
    const Eigen::Index dim = first.size();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
    for (const auto& s : samples) {
      const Eigen::VectorXd x = assemble(s.features, b);
      if (x.size() != dim) throw DataError("training samples have inconsistent feature lengths");
      sum += x;
      sq += x.cwiseProduct(x);
    }
    const double n = static_cast<double>(samples.size());
    b.mean = sum / n;
    b.inv_std.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double var = std::max(0.0, sq[i] / n - b.mean[i] * b.mean[i]);
      const double sd = std::sqrt(var);
      b.inv_std[i] = sd > 1e-9 ? 1.0 / sd : 1.0;
    }

    Mlp& m = b.mlp;
    m.w1.resize(cfg.hidden, dim);
    m.b1.resize(cfg.hidden);
    m.w2.resize(out, cfg.hidden);
    m.b2.resize(out);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(dim));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    fill_uniform(m.w1.data(), m.w1.size(), bound1, rng);
    fill_uniform(m.b1.data(), m.b1.size(), bound1, rng);
    fill_uniform(m.w2.data(), m.w2.size(), bound2, rng);
    fill_uniform(m.b2.data(), m.b2.size(), bound2, rng);
    model.branches.push_back(std::move(b));
  }
  return model;
}

TrainResult train(std::span<const TrainingSample> samples, const LabelSpace& labels,
                  const RecognitionConfig& cfg) {
  TrainResult result;
  result.model = initialize_model(samples, labels, cfg);
  InteractionModel& model = result.model;
  const PreparedBatch all = prepare_batch(model, samples);

  // Separate stream from initialization so parameter draws do not depend on
  // the number of epochs.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(samples.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<MlpGrad> grads;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t count = std::min(bs, order.size() - start);
      const PreparedBatch mini =
          select_columns(all, std::span<const Eigen::Index>(order.data() + start, count));
      total += forward_backward(model, mini, &grads) * static_cast<double>(count);
      apply(model, grads, cfg.learning_rate);
    }
    result.loss_curve.push_back(total / static_cast<double>(samples.size()));
  }
  return result;
}

std::vector<HoiInstance> associate_instances(std::span<const ScoredSegment> segments,
                                             const std::vector<CandidatePair>& pairs,
                                             const std::vector<Trajectory>& trajectories,
                                             const RecognitionConfig& cfg) {
  std::map<std::pair<std::size_t, int>, std::vector<const ScoredSegment*>> groups;
  for (const ScoredSegment& s : segments) groups[{s.pair, s.object_category}].push_back(&s);

  std::vector<HoiInstance> out;
  for (auto& [key, list] : groups) {
    std::stable_sort(list.begin(), list.end(), [](const ScoredSegment* a, const ScoredSegment* b) {
      return a->span.begin < b->span.begin;
    });
    const CandidatePair& pair = pairs.at(key.first);
    const Trajectory& human = trajectories.at(pair.human);
    const Trajectory& object = trajectories.at(pair.object);
    const std::size_t np = list.front()->scores.size();

    // Predicates eligible on each segment: score over threshold and in its top-k.
    std::vector<std::vector<std::uint8_t>> eligible(list.size(), std::vector<std::uint8_t>(np, 0));
    for (std::size_t s = 0; s < list.size(); ++s) {
      const auto& sc = list[s]->scores;
      std::vector<std::size_t> idx(np);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return sc[a] > sc[b]; });
      const std::size_t k = std::min<std::size_t>(np, static_cast<std::size_t>(cfg.top_k));
      for (std::size_t r = 0; r < k; ++r) {
        if (sc[idx[r]] >= cfg.score_threshold) eligible[s][idx[r]] = 1;
      }
    }

    for (std::size_t p = 0; p < np; ++p) {
      std::size_t s = 0;
      while (s < list.size()) {
        if (!eligible[s][p]) {
          ++s;
          continue;
        }
        std::size_t e = s;
        double sum = list[s]->scores[p];
        while (e + 1 < list.size() && eligible[e + 1][p] &&
               list[e + 1]->span.begin == list[e]->span.end + 1) {
          ++e;
          sum += list[e]->scores[p];
        }
        HoiInstance inst;
        inst.predicate = static_cast<int>(p);
        inst.object_category = key.second;
        inst.span = {list[s]->span.begin, list[e]->span.end};
        inst.subject = human.crop(inst.span);
        inst.object = object.crop(inst.span);
        inst.score = sum / static_cast<double>(e - s + 1);
        if (cfg.score_with_confidence) inst.score *= human.score * object.score;
        out.push_back(std::move(inst));
        s = e + 1;
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), instance_rank_less);
  return out;
}

}  // namespace hoi
