#include "streamrec/dwmoe.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "streamrec/error.hpp"
#include "streamrec/tensor_archive.hpp"

namespace streamrec {

void ModelConfig::validate() const {
  if (n_experts == 0) throw ConfigError("model.n_experts must be >= 1");
  if (embedding_dim == 0) throw ConfigError("model.embedding_dim must be >= 1");
  if (expert_widths.empty()) throw ConfigError("model.expert_widths needs at least one layer");
  for (auto w : expert_widths) {
    if (w == 0) throw ConfigError("model.expert_widths entries must be >= 1");
  }
  if (user_rows == 0 || item_rows == 0) throw ConfigError("model tables need at least one user and one item row");
  if (!(init_scale > 0.0)) throw ConfigError("model.init_scale must be > 0");
  if (output_activation == nn::Activation::kSoftmax) throw ConfigError("softmax over a single output is constant");
}

ExpertNet::ExpertNet(const std::string& name, std::size_t rows, const ModelConfig& config)
    : embedding(name + ".embedding", rows, config.embedding_dim) {
  std::size_t in = config.embedding_dim;
  for (std::size_t l = 0; l < config.expert_widths.size(); ++l) {
    const bool last = l + 1 == config.expert_widths.size();
    mlp.layers.emplace_back(name + ".layer" + std::to_string(l), in, config.expert_widths[l],
                            last ? config.expert_output_activation : config.expert_activation);
    in = config.expert_widths[l];
  }
}

nn::Vec ExpertNet::forward(std::size_t id) const { return mlp.forward(embedding.lookup(id)); }

nn::Vec ExpertNet::forward(std::size_t id, Trace& trace) const {
  trace.id = id;
  return mlp.forward(embedding.lookup(id), trace.layers);
}

void ExpertNet::backward(const Trace& trace, std::span<const double> upstream, ExpertNet& grads) const {
  const nn::Vec d_embed = mlp.backward(trace.layers, upstream, grads.mlp);
  grads.embedding.accumulate(trace.id, d_embed);
}

GatingNet::GatingNet(const std::string& name, std::size_t rows, std::size_t other_dim, const ModelConfig& config)
    : embedding(name + ".embedding", rows, config.embedding_dim),
      interference(name + ".interference", other_dim, config.resolved_interference_dim(), config.gate_activation),
      softmax_layer(name + ".softmax", config.embedding_dim + config.resolved_interference_dim(), config.n_experts,
                    nn::Activation::kSoftmax) {}

namespace {

nn::Vec concat(std::span<const double> a, std::span<const double> b) {
  nn::Vec out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

nn::Vec GatingNet::forward(std::size_t own_id, std::span<const double> other_embedding) const {
  const nn::Vec inter = interference.forward(other_embedding);
  return softmax_layer.forward(concat(embedding.lookup(own_id), inter));
}

nn::Vec GatingNet::forward(std::size_t own_id, std::span<const double> other_embedding, Trace& trace) const {
  trace.own_id = own_id;
  const nn::Vec inter = interference.forward(other_embedding, trace.interference);
  return softmax_layer.forward(concat(embedding.lookup(own_id), inter), trace.softmax);
}

nn::Vec GatingNet::backward(const Trace& trace, std::span<const double> d_gates, GatingNet& grads) const {
  const nn::Vec d_concat = softmax_layer.backward(trace.softmax, d_gates, grads.softmax_layer);
  const std::size_t d = embedding.dim();
  grads.embedding.accumulate(trace.own_id, std::span<const double>(d_concat).first(d));
  return interference.backward(trace.interference, std::span<const double>(d_concat).subspan(d), grads.interference);
}

nn::Vec fuse(std::span<const nn::Vec> expert_outputs, std::span<const double> gates) {
  if (expert_outputs.size() != gates.size() || expert_outputs.empty()) {
    throw DimensionError("fuse: " + std::to_string(expert_outputs.size()) + " expert outputs but " +
                         std::to_string(gates.size()) + " gates");
  }
  nn::Vec out(expert_outputs.front().size(), 0.0);
  for (std::size_t i = 0; i < gates.size(); ++i) {
    if (expert_outputs[i].size() != out.size()) throw DimensionError("fuse: expert output widths differ");
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += gates[i] * expert_outputs[i][k];
  }
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine: length mismatch");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double interact(const nn::DenseLayer& output, std::span<const double> user_vec, std::span<const double> item_vec) {
  const double c = cosine(user_vec, item_vec);
  return output.forward(std::span<const double>(&c, 1))[0];
}

DwmoeModel::DwmoeModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.embedding_dim;
  for (std::size_t i = 0; i < config_.n_experts; ++i) {
    user_.experts.emplace_back("user.expert" + std::to_string(i), config_.user_rows, config_);
    item_.experts.emplace_back("item.expert" + std::to_string(i), config_.item_rows, config_);
  }
  // Each gate's interference reads the other wing's gate embedding.
  user_.gate = GatingNet("user.gate", config_.user_rows, d, config_);
  item_.gate = GatingNet("item.gate", config_.item_rows, d, config_);
  output_ = nn::DenseLayer("output", 1, 1, config_.output_activation);
}

DwmoeModel::DwmoeModel(const ModelConfig& config, Rng& rng) : DwmoeModel(config) {
  for (auto* p : parameters()) {
    const bool is_bias = p->name.size() >= 5 && p->name.compare(p->name.size() - 5, 5, ".bias") == 0;
    if (is_bias) {
      p->fill(0.0);
    } else {
      p->fill_uniform(rng, -config_.init_scale, config_.init_scale);
    }
  }
}

DwmoeModel DwmoeModel::zeros_like() const { return DwmoeModel(config_); }

void DwmoeModel::set_zero() {
  for (auto* p : parameters()) p->fill(0.0);
}

double DwmoeModel::predict(UserId user, ItemId item) const {
  const auto& pu = user_.gate.embedding.lookup(user);
  const auto& qv = item_.gate.embedding.lookup(item);
  std::vector<nn::Vec> user_out;
  std::vector<nn::Vec> item_out;
  for (const auto& e : user_.experts) user_out.push_back(e.forward(user));
  for (const auto& e : item_.experts) item_out.push_back(e.forward(item));
  const nn::Vec gu = user_.gate.forward(user, qv);
  const nn::Vec gi = item_.gate.forward(item, pu);
  return interact(output_, fuse(user_out, gu), fuse(item_out, gi));
}

double DwmoeModel::predict(UserId user, ItemId item, PredictionTrace& trace) const {
  const auto& pu = user_.gate.embedding.lookup(user);
  const auto& qv = item_.gate.embedding.lookup(item);
  auto run_wing = [](const Wing& wing, std::size_t id, std::span<const double> other,
                     PredictionTrace::WingTrace& t) {
    const std::size_t n = wing.experts.size();
    t.experts.resize(n);
    t.expert_outputs.resize(n);
    for (std::size_t i = 0; i < n; ++i) t.expert_outputs[i] = wing.experts[i].forward(id, t.experts[i]);
    t.gates = wing.gate.forward(id, other, t.gate);
    t.fused = fuse(t.expert_outputs, t.gates);
  };
  run_wing(user_, user, qv, trace.user);
  run_wing(item_, item, pu, trace.item);
  trace.cosine = cosine(trace.user.fused, trace.item.fused);
  trace.prediction = output_.forward(std::span<const double>(&trace.cosine, 1), trace.output)[0];
  return trace.prediction;
}

std::vector<double> DwmoeModel::score_candidates(UserId user, std::span<const ItemId> items) const {
  const auto& pu = user_.gate.embedding.lookup(user);
  std::vector<nn::Vec> user_out;
  for (const auto& e : user_.experts) user_out.push_back(e.forward(user));

  std::vector<double> scores;
  scores.reserve(items.size());
  std::vector<nn::Vec> item_out(item_.experts.size());
  for (const ItemId v : items) {
    const auto& qv = item_.gate.embedding.lookup(v);
    for (std::size_t j = 0; j < item_.experts.size(); ++j) item_out[j] = item_.experts[j].forward(v);
    const nn::Vec gu = user_.gate.forward(user, qv);
    const nn::Vec gi = item_.gate.forward(v, pu);
    scores.push_back(interact(output_, fuse(user_out, gu), fuse(item_out, gi)));
  }
  return scores;
}

namespace {

/// d cos(a, b) / d a, zero when either norm vanishes.
nn::Vec cosine_grad(std::span<const double> a, std::span<const double> b, double cos_ab) {
  double na2 = 0.0;
  double nb2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na2 += a[i] * a[i];
    nb2 += b[i] * b[i];
  }
  nn::Vec g(a.size(), 0.0);
  if (na2 == 0.0 || nb2 == 0.0) return g;
  const double inv = 1.0 / (std::sqrt(na2) * std::sqrt(nb2));
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = b[i] * inv - cos_ab * a[i] / na2;
  return g;
}

}  // namespace

void DwmoeModel::backward(const PredictionTrace& trace, const OutputGradient& upstream, DwmoeModel& grads) const {
  const double d_pred = upstream.d_prediction;
  const nn::Vec d_cos_vec = output_.backward(trace.output, std::span<const double>(&d_pred, 1), grads.output_);
  const double d_cos = d_cos_vec[0];

  // Gate embeddings receive gradient from their own gate and, through the
  // interference layer, from the other wing's gate.
  auto wing_backward = [&](const Wing& wing, Wing& gwing, const PredictionTrace::WingTrace& t,
                           std::span<const double> d_fused, const nn::Vec& d_gates_extra) {
    const std::size_t n = wing.experts.size();
    nn::Vec d_gates(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& out = t.expert_outputs[i];
      nn::Vec d_out(out.size());
      double dot = 0.0;
      for (std::size_t k = 0; k < out.size(); ++k) {
        d_out[k] = t.gates[i] * d_fused[k];
        dot += out[k] * d_fused[k];
      }
      d_gates[i] = dot;
      wing.experts[i].backward(t.experts[i], d_out, gwing.experts[i]);
    }
    if (!d_gates_extra.empty()) {
      for (std::size_t i = 0; i < n; ++i) d_gates[i] += d_gates_extra[i];
    }
    return wing.gate.backward(t.gate, d_gates, gwing.gate);
  };

  nn::Vec d_user_fused = cosine_grad(trace.user.fused, trace.item.fused, trace.cosine);
  nn::Vec d_item_fused = cosine_grad(trace.item.fused, trace.user.fused, trace.cosine);
  for (auto& x : d_user_fused) x *= d_cos;
  for (auto& x : d_item_fused) x *= d_cos;

  const nn::Vec d_item_gate_embed = wing_backward(user_, grads.user_, trace.user, d_user_fused, upstream.d_user_gates);
  const nn::Vec d_user_gate_embed = wing_backward(item_, grads.item_, trace.item, d_item_fused, upstream.d_item_gates);
  grads.item_.gate.embedding.accumulate(trace.item.gate.own_id, d_item_gate_embed);
  grads.user_.gate.embedding.accumulate(trace.user.gate.own_id, d_user_gate_embed);
}

nn::ParameterList DwmoeModel::parameters() {
  nn::ParameterList out;
  auto add_wing = [&out](Wing& w) {
    for (auto& e : w.experts) {
      out.push_back(&e.embedding.values());
      for (auto& l : e.mlp.layers) {
        out.push_back(&l.weights());
        out.push_back(&l.bias());
      }
    }
    out.push_back(&w.gate.embedding.values());
    out.push_back(&w.gate.interference.weights());
    out.push_back(&w.gate.interference.bias());
    out.push_back(&w.gate.softmax_layer.weights());
    out.push_back(&w.gate.softmax_layer.bias());
  };
  add_wing(user_);
  add_wing(item_);
  out.push_back(&output_.weights());
  out.push_back(&output_.bias());
  return out;
}

nn::ConstParameterList DwmoeModel::parameters() const {
  auto mutable_list = const_cast<DwmoeModel*>(this)->parameters();
  return nn::ConstParameterList(mutable_list.begin(), mutable_list.end());
}

namespace {

std::string join_widths(const std::vector<std::size_t>& widths) {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i) s += (i ? "," : "") + std::to_string(widths[i]);
  return s;
}

std::vector<std::size_t> split_widths(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoul(tok));
  return out;
}

}  // namespace

void DwmoeModel::save(std::ostream& out) const {
  std::ostringstream scale;
  scale.precision(17);
  scale << config_.init_scale;
  const std::vector<std::pair<std::string, std::string>> meta{
      {"model", "dwmoe"},
      {"n_experts", std::to_string(config_.n_experts)},
      {"embedding_dim", std::to_string(config_.embedding_dim)},
      {"expert_widths", join_widths(config_.expert_widths)},
      {"expert_activation", nn::to_string(config_.expert_activation)},
      {"expert_output_activation", nn::to_string(config_.expert_output_activation)},
      {"gate_activation", nn::to_string(config_.gate_activation)},
      {"interference_dim", std::to_string(config_.resolved_interference_dim())},
      {"output_activation", nn::to_string(config_.output_activation)},
      {"init_scale", scale.str()},
      {"user_rows", std::to_string(config_.user_rows)},
      {"item_rows", std::to_string(config_.item_rows)},
  };
  nn::write_archive(out, meta, parameters());
}

DwmoeModel DwmoeModel::load(std::istream& in) {
  const nn::TensorArchive archive = nn::read_archive(in);
  auto need = [&archive](const char* key) -> const std::string& {
    const std::string* v = archive.find_meta(key);
    if (!v) throw std::runtime_error(std::string("model archive is missing '") + key + "'");
    return *v;
  };
  if (need("model") != "dwmoe") throw std::runtime_error("archive does not hold a dwmoe model");
  ModelConfig cfg;
  cfg.n_experts = std::stoul(need("n_experts"));
  cfg.embedding_dim = std::stoul(need("embedding_dim"));
  cfg.expert_widths = split_widths(need("expert_widths"));
  cfg.expert_activation = nn::parse_activation(need("expert_activation"));
  cfg.expert_output_activation = nn::parse_activation(need("expert_output_activation"));
  cfg.gate_activation = nn::parse_activation(need("gate_activation"));
  cfg.interference_dim = std::stoul(need("interference_dim"));
  cfg.output_activation = nn::parse_activation(need("output_activation"));
  cfg.init_scale = std::stod(need("init_scale"));
  cfg.user_rows = std::stoul(need("user_rows"));
  cfg.item_rows = std::stoul(need("item_rows"));

  DwmoeModel model(cfg);
  for (auto* p : model.parameters()) {
    const nn::Tensor* t = archive.find_tensor(p->name);
    if (!t) throw std::runtime_error("model archive is missing tensor " + p->name);
    if (!t->same_shape(*p)) throw DimensionError("model archive tensor " + p->name + " has the wrong shape");
    p->data = t->data;
  }
  return model;
}

}  // namespace streamrec
