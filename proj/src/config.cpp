#include "tpt/config.hpp"

#include <fstream>
#include <sstream>

#include "tpt/errors.hpp"
#include "tpt/text.hpp"

namespace tpt {

namespace {

losses::OrderLoss parse_order_loss(const std::string& s) {
  if (s == "rank") return losses::OrderLoss::rank;
  if (s == "diversity") return losses::OrderLoss::diversity;
  if (s == "none") return losses::OrderLoss::none;
  throw ConfigError("unknown order loss '" + s + "'");
}

std::string to_string(losses::OrderLoss o) {
  switch (o) {
    case losses::OrderLoss::rank: return "rank";
    case losses::OrderLoss::diversity: return "diversity";
    case losses::OrderLoss::none: return "none";
  }
  return "rank";
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  using text::parse_bool;
  using text::parse_double;
  using text::parse_size;
  auto& t = model.tpt;
  auto& w = objective.weights;
  auto& a = objective.attention;
  if (key.rfind("data.", 0) == 0) {
    if (!data::set_generator_field(data, key.substr(5), value)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  } else if (key == "seed") seed = text::parse_u64(value, key);
  else if (key == "output_dir") output_dir = value;
  else if (key == "model.K") t.queries = parse_size(value, key);
  else if (key == "model.d") t.model_dim = parse_size(value, key);
  else if (key == "model.layers") t.layers = parse_size(value, key);
  else if (key == "model.ffn_dim") t.ffn_dim = parse_size(value, key);
  else if (key == "model.heads") t.heads = parse_size(value, key);
  else if (key == "model.tau_init") t.tau_init = parse_double(value, key);
  else if (key == "model.positional") t.positional = model::parse_positional_mode(value);
  else if (key == "model.norm") t.norm = model::parse_norm_placement(value);
  else if (key == "model.order") t.order = model::parse_sublayer_order(value);
  else if (key == "model.generator") model.generator = model::parse_part_generator(value);
  else if (key == "model.B") model.groups = parse_size(value, key);
  else if (key == "model.fusion") model.fusion = regress::parse_fusion_mode(value);
  else if (key == "loss.cls") w.cls = parse_double(value, key);
  else if (key == "loss.reg") w.reg = parse_double(value, key);
  else if (key == "loss.rank") w.rank = parse_double(value, key);
  else if (key == "loss.sparsity") w.sparsity = parse_double(value, key);
  else if (key == "loss.margin") a.margin = parse_double(value, key);
  else if (key == "loss.order") a.order = parse_order_loss(value);
  else if (key == "loss.sigma") a.sigma = parse_double(value, key);
  else if (key == "loss.detach_center") a.detach_centers = parse_bool(value, key);
  else if (key == "optim.lr_backbone") optim.lr_backbone = parse_double(value, key);
  else if (key == "optim.lr_head") optim.lr_head = parse_double(value, key);
  else if (key == "optim.beta1") optim.beta1 = parse_double(value, key);
  else if (key == "optim.beta2") optim.beta2 = parse_double(value, key);
  else if (key == "optim.eps") optim.eps = parse_double(value, key);
  else if (key == "train.batch") batch_size = parse_size(value, key);
  else if (key == "train.epochs") epochs = parse_size(value, key);
  else if (key == "eval.exemplars") exemplars = parse_size(value, key);
  else if (key == "eval.fusion") exemplar_fusion = regress::parse_exemplar_fusion(value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::set_assignment(const std::string& assignment) {
  auto [k, v] = text::split_kv(assignment);
  set(k, v);
}

void RunConfig::finalize() {
  data.validate();
  model.tpt.input_dim = data.feature_dim;
  model.clips = data.clips;
  model.validate();
  const auto& w = objective.weights;
  if (w.cls < 0 || w.reg < 0 || w.rank < 0 || w.sparsity < 0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (!(objective.attention.sigma > 0.0)) throw ConfigError("loss.sigma must be positive");
  if (batch_size == 0) throw ConfigError("train.batch must be >= 1");
  if (exemplars == 0) throw ConfigError("eval.exemplars must be >= 1");
  if (data.num_train < 2) throw ConfigError("need at least two training videos");
}

std::string RunConfig::to_text() const {
  using text::format_double;
  std::ostringstream os;
  os << "seed=" << seed << '\n';
  std::istringstream data_lines(data::config_echo(data));
  for (std::string line; std::getline(data_lines, line);) os << "data." << line << '\n';
  const auto& t = model.tpt;
  os << "model.K=" << t.queries << '\n'
     << "model.d=" << t.model_dim << '\n'
     << "model.layers=" << t.layers << '\n'
     << "model.ffn_dim=" << t.ffn_dim << '\n'
     << "model.heads=" << t.heads << '\n'
     << "model.tau_init=" << format_double(t.tau_init) << '\n'
     << "model.positional=" << model::to_string(t.positional) << '\n'
     << "model.norm=" << model::to_string(t.norm) << '\n'
     << "model.order=" << model::to_string(t.order) << '\n'
     << "model.generator=" << model::to_string(model.generator) << '\n'
     << "model.B=" << model.groups << '\n'
     << "model.fusion=" << regress::to_string(model.fusion) << '\n';
  const auto& w = objective.weights;
  const auto& a = objective.attention;
  os << "loss.cls=" << format_double(w.cls) << '\n'
     << "loss.reg=" << format_double(w.reg) << '\n'
     << "loss.rank=" << format_double(w.rank) << '\n'
     << "loss.sparsity=" << format_double(w.sparsity) << '\n'
     << "loss.margin=" << format_double(a.margin) << '\n'
     << "loss.order=" << to_string(a.order) << '\n'
     << "loss.sigma=" << format_double(a.sigma) << '\n'
     << "loss.detach_center=" << (a.detach_centers ? "true" : "false") << '\n';
  os << "optim.lr_backbone=" << format_double(optim.lr_backbone) << '\n'
     << "optim.lr_head=" << format_double(optim.lr_head) << '\n'
     << "optim.beta1=" << format_double(optim.beta1) << '\n'
     << "optim.beta2=" << format_double(optim.beta2) << '\n'
     << "optim.eps=" << format_double(optim.eps) << '\n'
     << "train.batch=" << batch_size << '\n'
     << "train.epochs=" << epochs << '\n'
     << "eval.exemplars=" << exemplars << '\n'
     << "eval.fusion=" << regress::to_string(exemplar_fusion) << '\n'
     << "output_dir=" << output_dir << '\n';
  return os.str();
}

std::string RunConfig::hash() const {
  std::string t = to_text();
  t = t.substr(0, t.rfind("output_dir="));
  return text::hex64(text::fnv1a(t));
}

RunConfig RunConfig::from_text(const std::string& body) {
  RunConfig c;
  std::istringstream is(body);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    try {
      c.set_assignment(trimmed);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return from_text(ss.str());
}

RunConfig tiny_config() {
  RunConfig c;
  c.data.clips = 6;
  c.data.feature_dim = 8;
  c.data.phases = 3;
  c.data.num_train = 8;
  c.data.num_val = 2;
  c.data.num_test = 2;
  c.data.noise_std = 0.1;
  c.model.tpt.queries = 3;
  c.model.tpt.model_dim = 16;
  c.model.tpt.layers = 2;
  c.model.tpt.ffn_dim = 16;
  c.model.tpt.heads = 2;
  c.model.groups = 4;
  c.batch_size = 2;
  c.epochs = 1;
  c.exemplars = 3;
  c.finalize();
  return c;
}

}  // namespace tpt
