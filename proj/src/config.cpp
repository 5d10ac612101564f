#include "semsec/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

namespace semsec {

void DataConfig::validate() const {
  if (source != "synthetic" && source != "cifar10" && source != "flat_u8") {
    throw ConfigError("data.source must be synthetic, cifar10 or flat_u8 (got '" + source + "')");
  }
  if (height <= 0 || width <= 0 || channels <= 0) throw ConfigError("data image dims must be positive");
  if (train_size <= 0 || test_size <= 0) throw ConfigError("data.train_size and data.test_size must be positive");
  if (source != "synthetic" && (train_path.empty() || test_path.empty())) {
    throw ConfigError("data.train_path and data.test_path are required for source " + source);
  }
  if (source == "cifar10" && (height != 32 || width != 32 || channels != 3)) {
    throw ConfigError("cifar10 images are 32x32x3");
  }
}

void ExperimentConfig::validate() const {
  env.validate();
  plan.validate();
  agent.validate();
  data.validate();
  if (!(scale > 0.0)) throw ConfigError("scale must be > 0");
  if (sweep.snr_grid.empty() || sweep.cu_grid.empty()) {
    throw ConfigError("sweep grids must be nonempty");
  }
  for (int cu : sweep.cu_grid)
    if (cu < 1) throw ConfigError("sweep.cu_grid entries must be >= 1");
  if (agent.action_dim != 3 * static_cast<Index>(env.channel.n_m) * env.channel.n_n) {
    throw ConfigError("agent.action_dim must equal 3 * n_m * n_n");
  }
  // Fails early on image sizes the frame mapping cannot split.
  code_shape(env.cu, data.height, data.width, data.channels, env.channel.n_m);
}

ExperimentConfig ExperimentConfig::defaults() { return {}; }

ExperimentConfig ExperimentConfig::ci() {
  ExperimentConfig c;
  c.scale = 0.04;
  c.plan.decision_steps = 60;
  c.plan.epochs_per_decision = 5;
  c.agent.batch = 32;
  c.sweep.snr_grid = {0, 10, 20};
  return c;
}

namespace {

// Visits every config field as (section, key, reference, help). Section ""
// means top level. Used for both parsing and rendering so the two can
// never drift apart.
template <class Cfg, class Visitor>
void visit_fields(Cfg& c, Visitor&& v) {
  v("", "seed", c.seed, "master seed; every RNG stream derives from it");
  v("", "scale", c.scale, "multiplier on stage 1-3 and stage 5 epoch counts");
  v("", "out_dir", c.out_dir, "output directory for CSVs, plots and checkpoints");

  v("channel", "n_m", c.env.channel.n_m, "transmit antennas");
  v("channel", "n_n", c.env.channel.n_n, "receive antennas (must equal n_m)");
  v("channel", "power", c.env.channel.power, "transmit power P");
  v("channel", "snr_leg_db", c.env.channel.snr_leg_db, nullptr);
  v("channel", "snr_eve_db", c.env.channel.snr_eve_db, nullptr);

  v("env", "cu", c.env.cu, "channel uses; compression ratio = cu/96");
  v("env", "minibatch", c.env.minibatch, nullptr);
  v("env", "redraw_channel_per_frame", c.env.redraw_channel_per_frame, "false: one H per epoch");
  v("env", "eval_size", c.env.eval_size, "held-out images used for the agent's state and reward");

  v("arch", "encoder_hidden", c.env.arch.encoder_hidden, nullptr);
  v("arch", "decoder_hidden", c.env.arch.decoder_hidden, nullptr);
  v("arch", "text_hidden", c.env.arch.text_hidden, nullptr);
  v("arch", "gauss_hidden", c.env.arch.gauss_hidden, nullptr);
  v("arch", "embed_dim", c.env.arch.embed_dim, nullptr);
  v("arch", "text_len", c.env.arch.text_len, "tokens per jamming sentence");
  v("arch", "vocab", c.env.arch.vocab, "hashed vocabulary size");

  v("plan", "epochs1", c.plan.epochs1, nullptr);
  v("plan", "epochs2", c.plan.epochs2, nullptr);
  v("plan", "epochs3", c.plan.epochs3, nullptr);
  v("plan", "epochs5", c.plan.epochs5, nullptr);
  v("plan", "decision_steps", c.plan.decision_steps, "T");
  v("plan", "epochs_per_decision", c.plan.epochs_per_decision, "K");
  v("plan", "lr1", c.plan.lr1, nullptr);
  v("plan", "lr2", c.plan.lr2, nullptr);
  v("plan", "lr3", c.plan.lr3, nullptr);
  v("plan", "lr4", c.plan.lr4, nullptr);
  v("plan", "lr5", c.plan.lr5, nullptr);
  v("plan", "lambda_r", c.plan.lambda_r, "weight of Eve's term in the loss and reward");

  v("agent", "hidden", c.agent.hidden, nullptr);
  v("agent", "action_dim", c.agent.action_dim, "3 * n_m * n_n");
  v("agent", "gamma", c.agent.gamma, nullptr);
  v("agent", "tau", c.agent.tau, nullptr);
  v("agent", "buffer_capacity", c.agent.buffer_capacity, nullptr);
  v("agent", "batch", c.agent.batch, nullptr);
  v("agent", "actor_lr", c.agent.actor_lr, nullptr);
  v("agent", "critic_lr", c.agent.critic_lr, nullptr);
  v("agent", "weight_decay", c.agent.weight_decay, nullptr);
  v("agent", "ou_theta", c.agent.ou_theta, nullptr);
  v("agent", "ou_sigma", c.agent.ou_sigma, nullptr);
  v("agent", "ou_dt", c.agent.ou_dt, nullptr);
  v("agent", "noise_decay_fraction", c.agent.noise_decay_fraction, "exploration decays to 0 over this tail");

  v("data", "source", c.data.source, "synthetic | cifar10 | flat_u8");
  v("data", "train_path", c.data.train_path, nullptr);
  v("data", "test_path", c.data.test_path, nullptr);
  v("data", "height", c.data.height, nullptr);
  v("data", "width", c.data.width, nullptr);
  v("data", "channels", c.data.channels, nullptr);
  v("data", "train_size", c.data.train_size, nullptr);
  v("data", "test_size", c.data.test_size, nullptr);
  v("data", "seed", c.data.seed, "synthetic image generator seed");
  v("data", "corpus_path", c.data.corpus_path, "empty: bundled corpus");

  v("sweep", "snr_grid", c.sweep.snr_grid, "dB, applied to both receivers");
  v("sweep", "cu_grid", c.sweep.cu_grid, nullptr);
  v("sweep", "seeds", c.sweep.seeds, "empty: the master seed");
}

std::string fmt_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + '"';
}

template <class T>
std::string render_value(const T& value) {
  if constexpr (std::is_same_v<T, bool>) {
    return value ? "true" : "false";
  } else if constexpr (std::is_same_v<T, double>) {
    return fmt_double(value);
  } else if constexpr (std::is_same_v<T, std::string>) {
    return quote(value);
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(value);
  } else {
    std::string out = "[";
    for (std::size_t i = 0; i < value.size(); ++i) out += (i ? ", " : "") + render_value(value[i]);
    return out + "]";
  }
}

ConfigError located(const std::string& origin, const YAML::Mark& mark, const std::string& what) {
  if (mark.is_null()) return ConfigError(origin + ": " + what);
  return ConfigError(origin + ":" + std::to_string(mark.line + 1) + ": " + what);
}

template <class T>
void assign(T& field, const YAML::Node& node, const std::string& origin, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!node.IsScalar()) throw YAML::BadConversion(node.Mark());
      field = node.Scalar();
    } else if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      // yaml-cpp accepts "-1" for unsigned targets and wraps; reject it here.
      if (node.IsScalar() && !node.Scalar().empty() && node.Scalar().front() == '-') throw YAML::BadConversion(node.Mark());
      field = node.as<T>();
    } else {
      field = node.as<T>();
    }
  } catch (const YAML::Exception&) {
    throw located(origin, node.Mark(), "bad value for '" + key + "'");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw located(origin, e.mark, e.msg);
  }
  ExperimentConfig cfg = ExperimentConfig::defaults();
  if (root.IsNull()) {
    cfg.validate();
    return cfg;
  }
  if (!root.IsMap()) throw located(origin, root.Mark(), "top level must be a mapping");

  std::set<std::string> sections, top_keys;
  visit_fields(cfg, [&](const char* section, const char* key, auto&, const char*) {
    if (*section) sections.insert(section);
    else top_keys.insert(key);
  });

  for (const auto& entry : root) {
    const auto name = entry.first.as<std::string>();
    if (top_keys.count(name)) continue;
    if (!sections.count(name)) throw located(origin, entry.first.Mark(), "unknown key '" + name + "'");
    if (!entry.second.IsMap()) throw located(origin, entry.second.Mark(), "section '" + name + "' must be a mapping");
    for (const auto& item : entry.second) {
      const auto key = item.first.as<std::string>();
      bool known = false;
      visit_fields(cfg, [&](const char* section, const char* k, auto&, const char*) {
        if (name == section && key == k) known = true;
      });
      if (!known) throw located(origin, item.first.Mark(), "unknown key '" + name + "." + key + "'");
    }
  }

  visit_fields(cfg, [&](const char* section, const char* key, auto& field, const char*) {
    const YAML::Node node = *section ? root[section][key] : root[key];
    if (!node.IsDefined() || node.IsNull()) return;
    assign(field, node, origin, *section ? std::string(section) + "." + key : std::string(key));
  });

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  std::string current = "";
  out << "# semsec experiment configuration\n";
  visit_fields(cfg, [&](const char* section, const char* key, const auto& field, const char* help) {
    if (current != section) {
      current = section;
      out << "\n" << current << ":\n";
    }
    if (*section) out << "  ";
    out << key << ": " << render_value(field);
    if (help) out << "  # " << help;
    out << "\n";
  });
  return out.str();
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + item + "' in list '" + text + "'");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos) throw ConfigError("bad number '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_double_list(text)) {
    if (v != static_cast<int>(v)) throw ConfigError("expected integers in '" + text + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

}  // namespace semsec
