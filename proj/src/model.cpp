#include "aim/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "aim/errors.hpp"

namespace aim {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::AIM: return "aim";
    case Variant::IM: return "im";
    case Variant::AIM_T: return "aim_t";
    case Variant::AIM_C: return "aim_c";
    case Variant::AIM_CONCAT: return "aim_concat";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "aim") return Variant::AIM;
  if (name == "im") return Variant::IM;
  if (name == "aim_t") return Variant::AIM_T;
  if (name == "aim_c") return Variant::AIM_C;
  if (name == "aim_concat") return Variant::AIM_CONCAT;
  throw ConfigError("unknown variant '" + name + "'");
}

void ModelConfig::validate() const {
  if (feature_dim <= 0 || hidden <= 0 || proj <= 0) {
    throw ConfigError("feature_dim, hidden and proj must be positive");
  }
  if (uses_attention() && window < 1) {
    throw ConfigError("window size K must be >= 1 for attention variants");
  }
  if (lambda < 0.0 || lambda > 1.0) {
    throw ConfigError("lambda must lie in [0, 1]");
  }
}

ModelParams::ModelParams(const ModelConfig& cfg)
    : gru(static_cast<std::size_t>(cfg.hidden), static_cast<std::size_t>(cfg.feature_dim)),
      w_x(static_cast<std::size_t>(cfg.proj), static_cast<std::size_t>(cfg.hidden)),
      w_o(1, static_cast<std::size_t>(cfg.rep_dim())),
      b_o(0.0) {}

void ModelParams::fill(double v) {
  gru.fill(v);
  w_x.fill(v);
  w_o.fill(v);
  b_o = v;
}

std::vector<TensorRef> model_tensors(ModelParams& p) {
  std::vector<TensorRef> t = gru_tensors(p.gru);
  t.push_back({"proj.w_x", p.w_x.data(), p.w_x.size()});
  t.push_back({"out.w_o", p.w_o.data(), p.w_o.size()});
  t.push_back({"out.b_o", &p.b_o, 1});
  return t;
}

ModelParams init_params(std::uint64_t seed, const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p(cfg);
  Rng rng(seed);
  glorot_init(p.gru.w_z, rng);
  glorot_init(p.gru.w_r, rng);
  glorot_init(p.gru.w_h, rng);
  glorot_init(p.gru.u_z, rng);
  glorot_init(p.gru.u_r, rng);
  glorot_init(p.gru.u_h, rng);
  glorot_init(p.w_x, rng);
  glorot_init(p.w_o, rng);
  return p;
}

EncodeResult encode(const Conversation& conv, const ModelParams& params) {
  EncodeResult result;
  const std::size_t n = conv.turns.size();
  result.h.reserve(n);
  result.cache.reserve(n);
  Vec h_prev(params.gru.hidden(), 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    auto [h, cache] = gru_cell_forward(conv.turns[t].features, h_prev, params.gru);
    result.h.push_back(h);
    result.cache.push_back(std::move(cache));
    h_prev = std::move(h);
  }
  return result;
}

std::vector<int> influence_window(int i, const ModelConfig& cfg, const Conversation& conv) {
  std::vector<int> window;
  if (cfg.variant == Variant::IM) return window;

  const int k = cfg.window;
  if (cfg.variant == Variant::AIM || cfg.variant == Variant::AIM_CONCAT) {
    for (int j = std::max(1, i - k); j < i; ++j) window.push_back(j);
    return window;
  }

  const Speaker wanted = cfg.variant == Variant::AIM_T ? Speaker::Therapist : Speaker::Client;
  if (cfg.window_mode == SpeakerWindowMode::WithinLastK) {
    for (int j = std::max(1, i - k); j < i; ++j) {
      if (conv.turns[j - 1].speaker == wanted) window.push_back(j);
    }
    return window;
  }
  for (int j = i - 1; j >= 1 && static_cast<int>(window.size()) < k; --j) {
    if (conv.turns[j - 1].speaker == wanted) window.push_back(j);
  }
  std::reverse(window.begin(), window.end());
  return window;
}

namespace {

Vec project_turn(const Vec& h, const ModelParams& params) {
  Vec u = matvec(params.w_x, h);
  for (double& x : u) x = std::tanh(x);
  return u;
}

}  // namespace

AttendResult attend(int i, const std::vector<int>& window, const std::vector<Vec>& h,
                    const ModelParams& params) {
  if (window.empty()) throw EmptyWindow();
  const Vec u_i = project_turn(h[i - 1], params);

  AttendResult res;
  res.scores.reserve(window.size());
  for (int j : window) {
    res.scores.push_back(dot(project_turn(h[j - 1], params), u_i));
  }
  res.alpha = softmax(res.scores);
  res.v.assign(h[i - 1].size(), 0.0);
  for (std::size_t k = 0; k < window.size(); ++k) {
    axpy(res.v, res.alpha[k], h[window[k] - 1]);
  }
  return res;
}

Vec refine(const Vec& h_i, const std::optional<Vec>& v, const ModelConfig& cfg) {
  if (cfg.variant == Variant::IM) return h_i;
  if (cfg.variant == Variant::AIM_CONCAT) {
    Vec rep(h_i);
    if (v) {
      rep.insert(rep.end(), v->begin(), v->end());
    } else {
      rep.resize(2 * h_i.size(), 0.0);
    }
    return rep;
  }
  Vec rep(h_i.size());
  for (std::size_t k = 0; k < h_i.size(); ++k) {
    rep[k] = (1.0 - cfg.lambda) * h_i[k] + (v ? cfg.lambda * (*v)[k] : 0.0);
  }
  return rep;
}

double turn_probability(const Vec& rep, const ModelParams& params) {
  require_size(rep, params.w_o.cols(), "turn_probability representation");
  double logit = params.b_o;
  for (std::size_t k = 0; k < rep.size(); ++k) logit += params.w_o(0, k) * rep[k];
  return sigmoid(logit);
}

namespace {

// Stable argsort by (value, position); shared by value and gradient paths
// so both sides pick the same middle elements under ties.
std::vector<std::size_t> argsort_stable(const Vec& probs) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
  return order;
}

}  // namespace

double median_fuse(const Vec& probs) {
  if (probs.empty()) throw EmptyConversation();
  const auto order = argsort_stable(probs);
  const std::size_t n = probs.size();
  if (n % 2 == 1) return probs[order[n / 2]];
  return 0.5 * (probs[order[n / 2 - 1]] + probs[order[n / 2]]);
}

std::vector<std::pair<std::size_t, double>> median_fuse_backward(const Vec& probs) {
  if (probs.empty()) throw EmptyConversation();
  const auto order = argsort_stable(probs);
  const std::size_t n = probs.size();
  if (n % 2 == 1) return {{order[n / 2], 1.0}};
  return {{order[n / 2 - 1], 0.5}, {order[n / 2], 0.5}};
}

std::vector<int> encoding_context(int i, const ModelConfig& cfg, const Conversation& conv) {
  int start = std::max(1, i - cfg.window);
  // same-speaker windows can reach further back than K turns
  const std::vector<int> window = influence_window(i, cfg, conv);
  if (!window.empty()) start = std::min(start, window.front());
  std::vector<int> context;
  context.reserve(static_cast<std::size_t>(i - start) + 1);
  for (int j = start; j <= i; ++j) context.push_back(j);
  return context;
}

std::pair<double, ForwardTrace> forward_conversation(const Conversation& conv,
                                                     const ModelParams& params,
                                                     const ModelConfig& cfg) {
  cfg.validate();
  ForwardTrace trace;
  trace.config = cfg;
  trace.num_turns = conv.turns.size();

  Vec probs;
  for (int i : conv.therapist_turns()) {
    TherapistTurnRecord rec;
    rec.turn_index = i;
    rec.window = influence_window(i, cfg, conv);
    rec.context = encoding_context(i, cfg, conv);

    // fresh chain over the context, h_0 = 0
    Vec h_prev(params.gru.hidden(), 0.0);
    for (int j : rec.context) {
      auto [h, cache] = gru_cell_forward(conv.turns[static_cast<std::size_t>(j - 1)].features,
                                         h_prev, params.gru);
      rec.h.push_back(h);
      rec.cache.push_back(std::move(cache));
      h_prev = std::move(h);
    }
    const Vec& h_target = rec.h.back();

    std::optional<Vec> v;
    if (cfg.uses_attention()) {
      rec.u.reserve(rec.context.size());
      for (const Vec& h : rec.h) rec.u.push_back(project_turn(h, params));
      rec.v.assign(h_target.size(), 0.0);
      if (!rec.window.empty()) {
        const Vec& query = rec.u.back();
        rec.scores.reserve(rec.window.size());
        std::vector<std::size_t> positions;
        for (int j : rec.window) {
          const std::size_t pos = static_cast<std::size_t>(j - rec.context.front());
          positions.push_back(pos);
          rec.scores.push_back(dot(rec.u[pos], query));
        }
        rec.alpha = softmax(rec.scores);
        for (std::size_t k = 0; k < positions.size(); ++k) {
          axpy(rec.v, rec.alpha[k], rec.h[positions[k]]);
        }
      }
      v = rec.v;
    }

    rec.rep = refine(h_target, v, cfg);
    rec.logit = params.b_o;
    for (std::size_t k = 0; k < rec.rep.size(); ++k) rec.logit += params.w_o(0, k) * rec.rep[k];
    rec.y = sigmoid(rec.logit);
    probs.push_back(rec.y);
    trace.therapist.push_back(std::move(rec));
  }

  trace.y_est = median_fuse(probs);
  return {trace.y_est, trace};
}

ModelParams backward_conversation(const ForwardTrace& trace, const Conversation& conv,
                                  const ModelParams& params, const ModelConfig& cfg,
                                  double d_y_est) {
  if (trace.num_turns != conv.turns.size()) {
    throw TraceMismatch("trace covers " + std::to_string(trace.num_turns) +
                        " turns, conversation has " + std::to_string(conv.turns.size()));
  }
  if (trace.config.variant != cfg.variant || trace.config.hidden != cfg.hidden ||
      trace.config.feature_dim != cfg.feature_dim || trace.config.proj != cfg.proj ||
      trace.config.window != cfg.window || trace.config.lambda != cfg.lambda) {
    throw TraceMismatch("trace was produced under a different model configuration");
  }
  if (!trace.therapist.empty() && trace.therapist.front().h.back().size() != params.gru.hidden()) {
    throw TraceMismatch("trace hidden size does not match parameters");
  }

  ModelParams grads(cfg);
  grads.fill(0.0);
  const std::size_t h_dim = params.gru.hidden();

  Vec probs;
  probs.reserve(trace.therapist.size());
  for (const auto& rec : trace.therapist) probs.push_back(rec.y);
  Vec dy(probs.size(), 0.0);
  for (const auto& [pos, weight] : median_fuse_backward(probs)) dy[pos] = weight * d_y_est;

  for (std::size_t t = 0; t < trace.therapist.size(); ++t) {
    if (dy[t] == 0.0) continue;
    const TherapistTurnRecord& rec = trace.therapist[t];
    const std::size_t chain = rec.context.size();
    std::vector<Vec> dh(chain, Vec(h_dim, 0.0));
    std::vector<Vec> du;
    if (cfg.uses_attention()) du.assign(chain, Vec(params.w_x.rows(), 0.0));

    const double d_logit = dy[t] * rec.y * (1.0 - rec.y);
    for (std::size_t k = 0; k < rec.rep.size(); ++k) {
      grads.w_o(0, k) += d_logit * rec.rep[k];
    }
    grads.b_o += d_logit;

    Vec d_rep(rec.rep.size());
    for (std::size_t k = 0; k < rec.rep.size(); ++k) d_rep[k] = params.w_o(0, k) * d_logit;

    Vec dv;
    if (cfg.variant == Variant::IM) {
      axpy(dh.back(), 1.0, d_rep);
    } else if (cfg.variant == Variant::AIM_CONCAT) {
      for (std::size_t k = 0; k < h_dim; ++k) dh.back()[k] += d_rep[k];
      dv.assign(d_rep.begin() + static_cast<std::ptrdiff_t>(h_dim), d_rep.end());
    } else {
      axpy(dh.back(), 1.0 - cfg.lambda, d_rep);
      dv.resize(h_dim);
      for (std::size_t k = 0; k < h_dim; ++k) dv[k] = cfg.lambda * d_rep[k];
    }

    if (!dv.empty() && !rec.window.empty()) {
      // v = sum_k alpha_k h_k over the window positions of the chain
      std::vector<std::size_t> positions;
      for (int j : rec.window) {
        positions.push_back(static_cast<std::size_t>(j - rec.context.front()));
      }
      Vec d_alpha(rec.window.size());
      for (std::size_t k = 0; k < positions.size(); ++k) {
        d_alpha[k] = dot(dv, rec.h[positions[k]]);
        axpy(dh[positions[k]], rec.alpha[k], dv);
      }
      double weighted = 0.0;
      for (std::size_t k = 0; k < positions.size(); ++k) weighted += rec.alpha[k] * d_alpha[k];
      for (std::size_t k = 0; k < positions.size(); ++k) {
        const double d_score = rec.alpha[k] * (d_alpha[k] - weighted);
        axpy(du[positions[k]], d_score, rec.u.back());
        axpy(du.back(), d_score, rec.u[positions[k]]);
      }
    }

    if (cfg.uses_attention()) {
      for (std::size_t p = 0; p < chain; ++p) {
        bool nonzero = false;
        for (double x : du[p]) {
          if (x != 0.0) { nonzero = true; break; }
        }
        if (!nonzero) continue;
        Vec d_pre(du[p].size());
        for (std::size_t k = 0; k < du[p].size(); ++k) {
          d_pre[k] = du[p][k] * (1.0 - rec.u[p][k] * rec.u[p][k]);
        }
        add_outer(grads.w_x, 1.0, d_pre, rec.h[p]);
        axpy(dh[p], 1.0, matvec_t(params.w_x, d_pre));
      }
    }

    // backprop through the context chain
    Vec carry(h_dim, 0.0);
    for (std::size_t p = chain; p-- > 0;) {
      Vec dh_total = dh[p];
      axpy(dh_total, 1.0, carry);
      auto [dx, dh_prev] = gru_cell_backward(rec.cache[p], params.gru, dh_total, grads.gru);
      carry = std::move(dh_prev);
    }
  }

  return grads;
}

void dump_trace(const ForwardTrace& trace, std::ostream& out) {
  char buf[64];
  for (const auto& rec : trace.therapist) {
    out << "turn " << rec.turn_index << " window ";
    if (rec.window.empty()) {
      out << '-';
    } else {
      for (std::size_t k = 0; k < rec.window.size(); ++k) {
        if (k) out << ',';
        out << rec.window[k];
      }
    }
    out << " alpha ";
    if (rec.alpha.empty()) {
      out << '-';
    } else {
      for (std::size_t k = 0; k < rec.alpha.size(); ++k) {
        if (k) out << ',';
        std::snprintf(buf, sizeof(buf), "%.6f", rec.alpha[k]);
        out << buf;
      }
    }
    std::snprintf(buf, sizeof(buf), "%.6f", rec.y);
    out << " y " << buf << '\n';
  }
  std::snprintf(buf, sizeof(buf), "%.6f", trace.y_est);
  out << "median " << buf << '\n';
}

namespace {

std::string hex_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

const char* window_mode_name(SpeakerWindowMode m) {
  return m == SpeakerWindowMode::KMostRecent ? "recent" : "within_k";
}

SpeakerWindowMode parse_window_mode(const std::string& s) {
  if (s == "recent") return SpeakerWindowMode::KMostRecent;
  if (s == "within_k") return SpeakerWindowMode::WithinLastK;
  throw ConfigError("unknown window mode '" + s + "'");
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const ModelConfig& cfg, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out << "AIMCKPT 1\n";
  out << "variant " << variant_name(cfg.variant) << '\n';
  out << "dim " << cfg.feature_dim << '\n';
  out << "hidden " << cfg.hidden << '\n';
  out << "proj " << cfg.proj << '\n';
  out << "window " << cfg.window << '\n';
  out << "lambda " << hex_double(cfg.lambda) << '\n';
  out << "window_mode " << window_mode_name(cfg.window_mode) << '\n';
  out << "seed " << seed << '\n';
  ModelParams& mutable_params = const_cast<ModelParams&>(params);
  for (const TensorRef& t : model_tensors(mutable_params)) {
    out << "tensor " << t.name << ' ' << t.size << '\n';
    for (std::size_t i = 0; i < t.size; ++i) {
      out << hex_double(t.data[i]) << ((i + 1) % 8 == 0 || i + 1 == t.size ? '\n' : ' ');
    }
  }
  out << "end\n";
  if (!out) throw Error("failed while writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "AIMCKPT" || version != 1) {
    throw Error("'" + path + "' is not a version-1 checkpoint");
  }

  Checkpoint ck;
  std::string key;
  std::string value;
  ModelConfig& cfg = ck.config;
  while (in >> key) {
    if (key == "tensor" || key == "end") break;
    in >> value;
    if (key == "variant") cfg.variant = parse_variant(value);
    else if (key == "dim") cfg.feature_dim = std::stoi(value);
    else if (key == "hidden") cfg.hidden = std::stoi(value);
    else if (key == "proj") cfg.proj = std::stoi(value);
    else if (key == "window") cfg.window = std::stoi(value);
    else if (key == "lambda") cfg.lambda = std::strtod(value.c_str(), nullptr);
    else if (key == "window_mode") cfg.window_mode = parse_window_mode(value);
    else if (key == "seed") ck.seed = std::stoull(value);
    else throw Error("unknown checkpoint field '" + key + "'");
  }
  cfg.validate();

  ck.params = ModelParams(cfg);
  for (const TensorRef& t : model_tensors(ck.params)) {
    if (key != "tensor") throw Error("checkpoint '" + path + "' is truncated before " + t.name);
    std::string name;
    std::size_t size = 0;
    in >> name >> size;
    if (name != t.name || size != t.size) {
      throw Error("checkpoint tensor mismatch: expected " + t.name + "[" + std::to_string(t.size) +
                  "], got " + name + "[" + std::to_string(size) + "]");
    }
    for (std::size_t i = 0; i < t.size; ++i) {
      in >> value;
      t.data[i] = std::strtod(value.c_str(), nullptr);
    }
    in >> key;
  }
  if (key != "end" || !in) throw Error("checkpoint '" + path + "' is truncated");
  return ck;
}

}  // namespace aim
