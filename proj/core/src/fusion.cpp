// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusionforge/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fusionforge/error.hpp"

namespace fusionforge {

// ---- GroupSpec -------------------------------------------------------------

GroupSpec::GroupSpec(std::vector<ModalityId> modalities) : modalities_(std::move(modalities)) {
  if (modalities_.empty()) throw ConfigError("group spec: needs at least one modality");
  std::set<ModalityId> seen;
  for (const ModalityId& m : modalities_) {
    if (!seen.insert(m).second) {
      throw ConfigError("group spec: modality '" + m.str() + "' listed twice");
    }
  }
}

GroupSpec GroupSpec::parse(std::string_view text) {
  std::vector<ModalityId> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find_first_of(",+", start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view part = text.substr(start, end - start);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    if (part.empty()) throw ConfigError("group spec: empty modality in '" + std::string(text) + "'");
    out.emplace_back(std::string(part));
    start = end + 1;
  }
  return GroupSpec(std::move(out));
}

std::string GroupSpec::name() const {
  std::string out;
  for (const ModalityId& m : modalities_) {
    if (!out.empty()) out += '+';
    out += m.str();
  }
  return out;
}

std::vector<Token> group_features(const Dataset& dataset, std::string_view sample_id,
                                  const GroupSpec& spec) {
  std::vector<Token> tokens;
  tokens.reserve(spec.size());
  for (const ModalityId& m : spec.modalities()) {
    auto values = dataset.features(m, sample_id);
    tokens.push_back({m, std::vector<double>(values.begin(), values.end())});
  }
  return tokens;
}

std::vector<double> concatenate(std::span<const Token> tokens) {
  std::vector<double> out;
  for (const Token& t : tokens) out.insert(out.end(), t.values.begin(), t.values.end());
  return out;
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "attention") return FusionMode::kAttention;
  if (name == "concat") return FusionMode::kConcat;
  throw ConfigError("unknown fusion mode '" + std::string(name) + "' (expected attention or concat)");
}

std::string_view to_string(FusionMode mode) {
  return mode == FusionMode::kAttention ? "attention" : "concat";
}

// ---- forward pass ----------------------------------------------------------

namespace {

struct AttentionCache {
  Matrix h;  // M × d projected tokens
  Matrix q, k, v;
  Matrix a;  // M × M attention weights
  Matrix o;  // M × d attended tokens
};

// out = a · b
Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

// out = a · bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      auto ar = a.row(i);
      auto br = b.row(j);
      for (std::size_t k = 0; k < a.cols(); ++k) s += ar[k] * br[k];
      out(i, j) = s;
    }
  }
  return out;
}

// acc += aᵀ · b
void add_matmul_tn(Matrix& acc, const Matrix& a, const Matrix& b) {
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto ar = a.row(k);
    auto br = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ar[i];
      if (aki == 0.0) continue;
      auto accrow = acc.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) accrow[j] += aki * br[j];
    }
  }
}

void softmax_rows(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& x : row) {
      x = std::exp(x - mx);
      sum += x;
    }
    for (double& x : row) x /= sum;
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> attention_forward(std::span<const Token> tokens, const AttentionParams& params,
                                      AttentionCache* cache) {
  const std::size_t m = tokens.size();
  const std::size_t d = params.d_model;
  if (m == 0) throw ValidationError("attention_fuse: no tokens");

  Matrix h(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    auto it = params.projections.find(tokens[i].modality);
    if (it == params.projections.end()) {
      throw ConfigError("attention_fuse: no projection for modality '" +
                        tokens[i].modality.str() + "'");
    }
    const Projection& p = it->second;
    const auto& x = tokens[i].values;
    if (x.size() != p.weight.rows()) {
      throw ValidationError("attention_fuse: token '" + tokens[i].modality.str() + "' has length " +
                            std::to_string(x.size()) + ", projection expects " +
                            std::to_string(p.weight.rows()));
    }
    auto hrow = h.row(i);
    for (std::size_t c = 0; c < d; ++c) hrow[c] = p.bias(0, c);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double xk = x[k];
      if (xk == 0.0) continue;
      auto wrow = p.weight.row(k);
      for (std::size_t c = 0; c < d; ++c) hrow[c] += xk * wrow[c];
    }
  }

  Matrix q = matmul(h, params.query);
  Matrix k = matmul(h, params.key);
  Matrix v = matmul(h, params.value);
  Matrix a = matmul_nt(q, k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& s : a.flat()) s *= scale;
  softmax_rows(a);
  Matrix o = matmul(a, v);

  std::vector<double> fused(d, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    auto orow = o.row(i);
    for (std::size_t c = 0; c < d; ++c) fused[c] += orow[c];
  }
  for (double& f : fused) f /= static_cast<double>(m);

  if (cache) {
    cache->h = std::move(h);
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->a = std::move(a);
    cache->o = std::move(o);
  }
  return fused;
}

void attention_backward(std::span<const Token> tokens, const AttentionParams& params,
                        const AttentionCache& cache, std::span<const double> d_fused,
                        AttentionParams& grad) {
  const std::size_t m = tokens.size();
  const std::size_t d = params.d_model;

  Matrix d_o(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < d; ++c) d_o(i, c) = d_fused[c] / static_cast<double>(m);
  }

  Matrix d_a = matmul_nt(d_o, cache.v);  // M × M
  Matrix d_v(m, d);
  add_matmul_tn(d_v, cache.a, d_o);

  // Row-softmax Jacobian, folded with the 1/sqrt(d) score scale.
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix d_s(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < m; ++j) dot += cache.a(i, j) * d_a(i, j);
    for (std::size_t j = 0; j < m; ++j) d_s(i, j) = cache.a(i, j) * (d_a(i, j) - dot) * scale;
  }

  Matrix d_q = matmul(d_s, cache.k);
  Matrix d_k(m, d);
  add_matmul_tn(d_k, d_s, cache.q);

  add_matmul_tn(grad.query, cache.h, d_q);
  add_matmul_tn(grad.key, cache.h, d_k);
  add_matmul_tn(grad.value, cache.h, d_v);

  Matrix d_h = matmul_nt(d_q, params.query);
  {
    Matrix t = matmul_nt(d_k, params.key);
    for (std::size_t i = 0; i < t.size(); ++i) d_h.flat()[i] += t.flat()[i];
    t = matmul_nt(d_v, params.value);
    for (std::size_t i = 0; i < t.size(); ++i) d_h.flat()[i] += t.flat()[i];
  }

  for (std::size_t i = 0; i < m; ++i) {
    Projection& gp = grad.projections.at(tokens[i].modality);
    const auto& x = tokens[i].values;
    auto dh = d_h.row(i);
    for (std::size_t c = 0; c < d; ++c) gp.bias(0, c) += dh[c];
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double xk = x[k];
      if (xk == 0.0) continue;
      auto grow = gp.weight.row(k);
      for (std::size_t c = 0; c < d; ++c) grow[c] += xk * dh[c];
    }
  }
}

// z = fused · W_z + b_z ; logits = z · W_smax + b_smax
void head_logits(std::span<const double> fused, const FusionHead& head, std::vector<double>& z,
                 std::vector<double>& logits) {
  const std::size_t in = head.w_z.rows();
  const std::size_t dz = head.w_z.cols();
  const std::size_t k = head.w_smax.cols();
  if (fused.size() != in) {
    throw ValidationError("forward: input has length " + std::to_string(fused.size()) +
                          ", head expects " + std::to_string(in));
  }
  z.assign(head.b_z.flat().begin(), head.b_z.flat().end());
  for (std::size_t i = 0; i < in; ++i) {
    const double fi = fused[i];
    if (fi == 0.0) continue;
    auto wrow = head.w_z.row(i);
    for (std::size_t j = 0; j < dz; ++j) z[j] += fi * wrow[j];
  }
  logits.assign(head.b_smax.flat().begin(), head.b_smax.flat().end());
  for (std::size_t j = 0; j < dz; ++j) {
    const double zj = z[j];
    auto wrow = head.w_smax.row(j);
    for (std::size_t c = 0; c < k; ++c) logits[c] += zj * wrow[c];
  }
}

double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

std::vector<double> attention_fuse(std::span<const Token> tokens, const AttentionParams& params) {
  return attention_forward(tokens, params, nullptr);
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Prediction forward(std::span<const double> fused, const FusionHead& head) {
  if (!all_finite(fused)) throw NumericError("forward: non-finite input");
  std::vector<double> z;
  std::vector<double> logits;
  head_logits(fused, head, z, logits);
  if (!all_finite(logits)) throw NumericError("forward: non-finite logits");
  Prediction pred;
  pred.probs = softmax(logits);
  pred.label = argmax(pred.probs);
  return pred;
}

// ---- FusionParams / FusionModel --------------------------------------------

FusionParams FusionParams::zeros_like() const {
  FusionParams out = *this;
  std::vector<ModalityId> order;
  if (out.attention) {
    for (const auto& [id, _] : out.attention->projections) order.push_back(id);
  }
  out.visit(order, [](const std::string&, Matrix& m, bool) { m.fill(0.0); });
  return out;
}

FusionModel::FusionModel(std::vector<std::string> label_vocab, GroupSpec spec,
                         std::vector<std::size_t> dims, FusionMode mode, FusionParams params)
    : label_vocab_(std::move(label_vocab)),
      spec_(std::move(spec)),
      dims_(std::move(dims)),
      mode_(mode),
      params_(std::move(params)) {
  if (label_vocab_.empty()) throw ConfigError("model: empty label vocabulary");
  if (dims_.size() != spec_.size()) throw ConfigError("model: dims do not match group spec");
  const std::size_t k = label_vocab_.size();
  const FusionHead& h = params_.head;
  std::size_t in = 0;
  if (mode_ == FusionMode::kAttention) {
    if (!params_.attention) throw ConfigError("model: attention mode without attention params");
    const AttentionParams& a = *params_.attention;
    const std::size_t d = a.d_model;
    if (d == 0) throw ConfigError("model: d_model must be positive");
    if (a.projections.size() != spec_.size()) throw ConfigError("model: projection count mismatch");
    for (std::size_t i = 0; i < spec_.size(); ++i) {
      auto it = a.projections.find(spec_.modalities()[i]);
      if (it == a.projections.end() || it->second.weight.rows() != dims_[i] ||
          it->second.weight.cols() != d || it->second.bias.rows() != 1 ||
          it->second.bias.cols() != d) {
        throw ConfigError("model: bad projection for '" + spec_.modalities()[i].str() + "'");
      }
    }
    for (const Matrix* m : {&a.query, &a.key, &a.value}) {
      if (m->rows() != d || m->cols() != d) throw ConfigError("model: bad attention matrix shape");
    }
    in = d;
  } else {
    if (params_.attention) throw ConfigError("model: concat mode with attention params");
    for (std::size_t dim : dims_) in += dim;
  }
  const std::size_t dz = h.w_z.cols();
  if (h.w_z.rows() != in || dz == 0 || h.b_z.rows() != 1 || h.b_z.cols() != dz ||
      h.w_smax.rows() != dz || h.w_smax.cols() != k || h.b_smax.rows() != 1 ||
      h.b_smax.cols() != k) {
    throw ConfigError("model: head shapes do not agree");
  }
  visit_parameters([](const std::string& name, const Matrix& m, bool) {
    if (!all_finite(m.flat())) throw NumericError("model: non-finite values in " + name);
  });
}

std::size_t FusionModel::d_model() const noexcept {
  return params_.attention ? params_.attention->d_model : 0;
}

void FusionModel::check_tokens(std::span<const Token> tokens) const {
  if (tokens.size() != spec_.size()) {
    throw ValidationError("model " + spec_.name() + ": expected " + std::to_string(spec_.size()) +
                          " tokens, got " + std::to_string(tokens.size()));
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].modality != spec_.modalities()[i]) {
      throw ValidationError("model " + spec_.name() + ": token " + std::to_string(i) + " is '" +
                            tokens[i].modality.str() + "', expected '" +
                            spec_.modalities()[i].str() + "'");
    }
    if (tokens[i].values.size() != dims_[i]) {
      throw ValidationError("model " + spec_.name() + ": token '" + tokens[i].modality.str() +
                            "' has length " + std::to_string(tokens[i].values.size()) +
                            ", expected " + std::to_string(dims_[i]));
    }
  }
}

std::vector<double> FusionModel::fuse(std::span<const Token> tokens) const {
  check_tokens(tokens);
  for (const Token& t : tokens) {
    if (!all_finite(t.values)) throw NumericError("model: non-finite input in " + t.modality.str());
  }
  if (mode_ == FusionMode::kAttention) return attention_forward(tokens, *params_.attention, nullptr);
  return concatenate(tokens);
}

Prediction FusionModel::predict(std::span<const Token> tokens) const {
  return forward(fuse(tokens), params_.head);
}

std::size_t FusionModel::parameter_count() const {
  std::size_t n = 0;
  visit_parameters([&](const std::string&, const Matrix& m, bool) { n += m.size(); });
  return n;
}

bool FusionModel::same_parameters(const FusionModel& other) const {
  if (label_vocab_ != other.label_vocab_ || spec_ != other.spec_ || dims_ != other.dims_ ||
      mode_ != other.mode_) {
    return false;
  }
  std::vector<const Matrix*> mine;
  std::vector<const Matrix*> theirs;
  visit_parameters([&](const std::string&, const Matrix& m, bool) { mine.push_back(&m); });
  other.visit_parameters([&](const std::string&, const Matrix& m, bool) { theirs.push_back(&m); });
  if (mine.size() != theirs.size()) return false;
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (!(*mine[i] == *theirs[i])) return false;
  }
  return true;
}

// ---- loss and gradient -----------------------------------------------------

double loss_and_gradient(const FusionModel& model, const Example& example, FusionParams& grad) {
  model.check_tokens(example.tokens);
  if (example.label >= model.num_classes()) {
    throw ValidationError("loss: label " + std::to_string(example.label) + " out of range");
  }
  const FusionParams& p = model.params();

  AttentionCache cache;
  std::vector<double> fused = model.mode() == FusionMode::kAttention
                                  ? attention_forward(example.tokens, *p.attention, &cache)
                                  : concatenate(example.tokens);
  std::vector<double> z;
  std::vector<double> logits;
  head_logits(fused, p.head, z, logits);
  const double lse = log_sum_exp(logits);
  const double loss_value = lse - logits[example.label];

  const std::size_t k = logits.size();
  const std::size_t dz = z.size();
  std::vector<double> d_logits(k);
  for (std::size_t c = 0; c < k; ++c) d_logits[c] = std::exp(logits[c] - lse);
  d_logits[example.label] -= 1.0;

  FusionHead& gh = grad.head;
  std::vector<double> d_z(dz, 0.0);
  for (std::size_t j = 0; j < dz; ++j) {
    auto grow = gh.w_smax.row(j);
    auto wrow = p.head.w_smax.row(j);
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      grow[c] += z[j] * d_logits[c];
      acc += wrow[c] * d_logits[c];
    }
    d_z[j] = acc;
  }
  for (std::size_t c = 0; c < k; ++c) gh.b_smax(0, c) += d_logits[c];

  std::vector<double> d_fused(fused.size(), 0.0);
  for (std::size_t i = 0; i < fused.size(); ++i) {
    auto grow = gh.w_z.row(i);
    auto wrow = p.head.w_z.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < dz; ++j) {
      grow[j] += fused[i] * d_z[j];
      acc += wrow[j] * d_z[j];
    }
    d_fused[i] = acc;
  }
  for (std::size_t j = 0; j < dz; ++j) gh.b_z(0, j) += d_z[j];

  if (model.mode() == FusionMode::kAttention) {
    attention_backward(example.tokens, *p.attention, cache, d_fused, *grad.attention);
  }
  return loss_value;
}

double loss(const FusionModel& model, const Example& example) {
  if (example.label >= model.num_classes()) {
    throw ValidationError("loss: label " + std::to_string(example.label) + " out of range");
  }
  const std::vector<double> fused = model.fuse(example.tokens);
  std::vector<double> z;
  std::vector<double> logits;
  head_logits(fused, model.params().head, z, logits);
  return log_sum_exp(logits) - logits[example.label];
}

// ---- gradient check --------------------------------------------------------

GradCheckReport compare_gradient(const FusionModel& model, const Example& example,
                                 double epsilon, const FusionParams& analytic) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-2)) {
    throw DomainError("grad_check: epsilon must lie in [1e-6, 1e-2]");
  }
  // Below this magnitude both gradients are treated as zero and compared
  // absolutely; central differences cannot resolve smaller values.
  constexpr double kFloor = 1e-7;

  GradCheckReport report;
  FusionModel probe = model;
  std::vector<Matrix*> probe_params;
  std::vector<std::string> names;
  probe.mutable_params().visit(model.spec().modalities(),
                               [&](const std::string& name, Matrix& m, bool) {
                                 probe_params.push_back(&m);
                                 names.push_back(name);
                               });
  std::vector<const Matrix*> grads;
  analytic.visit(model.spec().modalities(),
                 [&](const std::string&, const Matrix& m, bool) { grads.push_back(&m); });
  if (grads.size() != probe_params.size()) {
    throw ValidationError("grad_check: gradient layout does not match the model");
  }

  for (std::size_t t = 0; t < probe_params.size(); ++t) {
    Matrix& param = *probe_params[t];
    if (grads[t]->size() != param.size()) {
      throw ValidationError("grad_check: gradient shape mismatch for " + names[t]);
    }
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double saved = param.flat()[i];
      param.flat()[i] = saved + epsilon;
      const double up = loss(probe, example);
      param.flat()[i] = saved - epsilon;
      const double down = loss(probe, example);
      param.flat()[i] = saved;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = grads[t]->flat()[i];
      const double scale = std::max({std::abs(a), std::abs(numeric), kFloor});
      const double rel = std::abs(a - numeric) / scale;
      report.max_abs_analytic = std::max(report.max_abs_analytic, std::abs(a));
      report.max_abs_numeric = std::max(report.max_abs_numeric, std::abs(numeric));
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = names[t] + "[" + std::to_string(i) + "]";
      }
      ++report.checked;
    }
  }
  return report;
}

GradCheckReport grad_check(const FusionModel& model, const Example& example, double epsilon) {
  FusionParams grad = model.params().zeros_like();
  loss_and_gradient(model, example, grad);
  return compare_gradient(model, example, epsilon, grad);
}

}  // namespace fusionforge
