#include "run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "native/error.hpp"

namespace native::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string unquote(std::string_view v) {
  v = trim(v);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  return std::string(v);
}

std::size_t parse_size(std::string_view key, std::string_view v) {
  const std::string s = unquote(v);
  std::size_t out = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc{} || end != s.data() + s.size()) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + s + "'");
  }
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  const std::string s = unquote(v);
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc{} || end != s.data() + s.size()) {
    throw ConfigError(std::string(key) + ": expected an unsigned 64-bit integer, got '" + s + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s = unquote(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(out)) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + s + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  const std::string s = unquote(v);
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + s + "'");
}

std::vector<std::string> parse_list(std::string_view v) {
  std::vector<std::string> out;
  std::string s = unquote(v);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string t = unquote(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string boolean(bool b) { return b ? "true" : "false"; }

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define NATIVE_SIZE(sec, name, member)                                                           \
  Field {                                                                                        \
    sec, name, [](RunConfig& c, std::string_view k, std::string_view v) { member = parse_size(k, v); }, \
        [](const RunConfig& c) { return std::to_string(member); }                                \
  }
#define NATIVE_DOUBLE(sec, name, member)                                                           \
  Field {                                                                                          \
    sec, name, [](RunConfig& c, std::string_view k, std::string_view v) { member = parse_double(k, v); }, \
        [](const RunConfig& c) { return number(member); }                                          \
  }
#define NATIVE_BOOL(sec, name, member)                                                           \
  Field {                                                                                        \
    sec, name, [](RunConfig& c, std::string_view k, std::string_view v) { member = parse_bool(k, v); }, \
        [](const RunConfig& c) { return boolean(member); }                                       \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      Field{"run", "data_dir",
            [](RunConfig& c, std::string_view, std::string_view v) { c.data_dir = unquote(v); },
            [](const RunConfig& c) { return quote(c.data_dir.string()); }},
      Field{"run", "seed", [](RunConfig& c, std::string_view k, std::string_view v) { c.seed = parse_u64(k, v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      Field{"run", "modalities",
            [](RunConfig& c, std::string_view, std::string_view v) { c.modalities = parse_list(v); },
            [](const RunConfig& c) {
              std::string s;
              for (const auto& m : c.modalities) s += (s.empty() ? "" : ",") + m;
              return quote(s);
            }},
      NATIVE_SIZE("run", "save_every", c.save_every),
      NATIVE_SIZE("run", "threads", c.threads),
      NATIVE_SIZE("redaf", "dim", c.hp.dim),
      NATIVE_BOOL("redaf", "no_relation_guidance", c.no_relation_guidance),
      NATIVE_DOUBLE("train", "gamma", c.hp.gamma),
      NATIVE_DOUBLE("train", "beta", c.hp.beta),
      NATIVE_SIZE("train", "negatives", c.hp.negatives),
      NATIVE_DOUBLE("train", "lr_d", c.hp.lr_d),
      NATIVE_DOUBLE("train", "lr_g", c.hp.lr_g),
      NATIVE_SIZE("train", "batch_size", c.hp.batch_size),
      NATIVE_SIZE("train", "epochs", c.hp.epochs),
      NATIVE_SIZE("train", "n_critic", c.hp.n_critic),
      NATIVE_DOUBLE("comat", "lambda1", c.hp.lambda1),
      NATIVE_DOUBLE("comat", "lambda2", c.hp.lambda2),
      NATIVE_SIZE("comat", "noise_dim", c.hp.noise_dim),
      NATIVE_BOOL("comat", "no_comat", c.no_comat),
      NATIVE_BOOL("comat", "no_gp", c.no_gp),
      NATIVE_BOOL("comat", "vanilla_gan", c.vanilla_gan),
      NATIVE_BOOL("comat", "mlp_discriminator", c.mlp_discriminator),
      Field{"comat", "gp_sign",
            [](RunConfig& c, std::string_view, std::string_view v) { c.gp_sign = parse_gp_sign(unquote(v)); },
            [](const RunConfig& c) { return quote(to_string(c.gp_sign)); }},
  };
  return all;
}

#undef NATIVE_SIZE
#undef NATIVE_DOUBLE
#undef NATIVE_BOOL

const Field* find_field(std::string_view section, std::string_view key) {
  for (const Field& f : fields()) {
    if (section == f.section && key == f.key) return &f;
  }
  return nullptr;
}

}  // namespace

RunConfig RunConfig::preset(std::string_view name) {
  RunConfig c;
  if (name == "full") return c;
  if (name == "desk") {
    c.hp = HyperParams::desk();
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected full or desk)");
}

void RunConfig::set(std::string_view dotted_key, std::string_view value) {
  const std::size_t dot = dotted_key.find('.');
  if (dot == std::string_view::npos) {
    throw ConfigError("'" + std::string(dotted_key) + "': expected section.key");
  }
  const Field* f = find_field(dotted_key.substr(0, dot), dotted_key.substr(dot + 1));
  if (f == nullptr) throw ConfigError("unknown config key '" + std::string(dotted_key) + "'");
  f->set(*this, dotted_key, value);
}

void RunConfig::apply_text(std::string_view text, std::string_view origin) {
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::stringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
    std::string_view line = raw;
    // Comments run to the end of the line unless inside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "run" && section != "redaf" && section != "train" && section != "comat") {
        throw ConfigError(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of a section");
    const std::string key = section + "." + std::string(trim(line.substr(0, eq)));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot read config file");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str(), path.string());
}

void RunConfig::validate() const {
  hp.validate();
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (mlp_discriminator && no_comat) throw ConfigError("mlp_discriminator needs CoMAT; drop no_comat");
}

ComatOptions RunConfig::comat_options() const {
  ComatOptions o;
  o.enabled = !no_comat;
  o.gradient_penalty = !no_gp;
  o.loss = vanilla_gan ? AdversarialLoss::vanilla : AdversarialLoss::wasserstein;
  o.critic = mlp_discriminator ? CriticKind::mlp : CriticKind::score;
  o.gp_sign = gp_sign;
  o.relation_guidance = !no_relation_guidance;
  return o;
}

std::string RunConfig::to_text() const {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    if (section != f.section) {
      section = f.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(*this) + "\n";
  }
  return out;
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  for (const Field& f : fields()) {
    std::string v = f.get(*this);
    if (v.size() >= 2 && v.front() == '"') {
      j[f.section][f.key] = v.substr(1, v.size() - 2);
    } else {
      j[f.section][f.key] = nlohmann::ordered_json::parse(v);
    }
  }
  return j;
}

std::vector<std::string> resolve_modalities(std::span<const std::string> wanted,
                                            std::span<const ModalityInfo> available) {
  auto lower = [](std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  std::vector<std::string> out;
  for (const std::string& w : wanted) {
    if (w == kStructuralModality) continue;
    std::vector<std::string> hits;
    for (const ModalityInfo& m : available) {
      if (m.name == w) {
        hits = {m.name};
        break;
      }
      if (lower(m.name).rfind(lower(w), 0) == 0) hits.push_back(m.name);
    }
    if (hits.empty()) throw ConfigError("modality '" + w + "' is not in the dataset");
    if (hits.size() > 1) throw ConfigError("modality '" + w + "' is ambiguous");
    if (std::find(out.begin(), out.end(), hits[0]) != out.end()) {
      throw ConfigError("modality '" + w + "' listed twice");
    }
    out.push_back(hits[0]);
  }
  // Dataset order, whatever order the filter was written in.
  std::vector<std::string> ordered;
  for (const ModalityInfo& m : available) {
    if (std::find(out.begin(), out.end(), m.name) != out.end()) ordered.push_back(m.name);
  }
  return ordered;
}

}  // namespace native::cli
