#include "mcrn/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mcrn {

LossConfig ExperimentConfig::loss_config() const {
  LossConfig lc;
  lc.tau = tau;
  lc.scope = scope;
  lc.synthesis = synthesis;
  lc.alpha = alpha;
  lc.beta_lo = beta_lo;
  lc.beta_hi = beta_hi;
  lc.shared_beta = shared_beta;
  lc.positive = positive;
  lc.negative = negative;
  return lc;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw std::runtime_error("config line " + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& v, std::size_t line) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    fail(line, "expected a number, got '" + v + "'");
  }
  return out;
}

int parse_int(const std::string& v, std::size_t line) {
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    fail(line, "expected an integer, got '" + v + "'");
  }
  return out;
}

uint64_t parse_u64(const std::string& v, std::size_t line) {
  uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    fail(line, "expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& v, std::size_t line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(line, "expected true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v, std::size_t line) {
  std::vector<int> out;
  std::istringstream in(v);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) fail(line, "empty list element");
    out.push_back(parse_int(tok, line));
  }
  if (out.empty()) fail(line, "expected a comma-separated integer list");
  return out;
}

template <typename T>
T parse_choice(const std::string& v, std::size_t line,
               const std::vector<std::pair<std::string, T>>& table) {
  for (const auto& [name, value] : table) {
    if (v == name) return value;
  }
  std::string names;
  for (const auto& [name, value] : table) {
    if (!names.empty()) names += '|';
    names += name;
  }
  fail(line, "expected one of {" + names + "}, got '" + v + "'");
}

const std::vector<std::pair<std::string, Representation>> kRepresentations = {
    {"multi", Representation::Multi}, {"uni", Representation::Uni}};
const std::vector<std::pair<std::string, PositiveStrategy>> kPositives = {
    {"moderate", PositiveStrategy::Moderate},
    {"most", PositiveStrategy::Most},
    {"least", PositiveStrategy::Least}};
const std::vector<std::pair<std::string, NegativeStrategy>> kNegatives = {
    {"mean", NegativeStrategy::Mean}, {"all", NegativeStrategy::All}};
const std::vector<std::pair<std::string, LossScope>> kScopes = {
    {"dscl", LossScope::Dscl}, {"ucl", LossScope::Ucl}};
const std::vector<std::pair<std::string, SynthesisMethod>> kSyntheses = {
    {"soni", SynthesisMethod::Soni},
    {"qnni", SynthesisMethod::Qnni},
    {"rnni", SynthesisMethod::Rnni},
    {"none", SynthesisMethod::None}};

using Setter = std::function<void(ExperimentConfig&, const std::string&,
                                  std::size_t)>;

std::map<std::string, Setter> build_setters() {
  std::map<std::string, Setter> s;
  auto dbl = [](double ExperimentConfig::* field) {
    return [field](ExperimentConfig& c, const std::string& v, std::size_t ln) {
      c.*field = parse_double(v, ln);
    };
  };
  auto integer = [](int ExperimentConfig::* field) {
    return [field](ExperimentConfig& c, const std::string& v, std::size_t ln) {
      c.*field = parse_int(v, ln);
    };
  };
  auto domain_dbl = [](DomainSpec ExperimentConfig::* spec,
                       double DomainSpec::* field) {
    return [spec, field](ExperimentConfig& c, const std::string& v,
                         std::size_t ln) {
      c.*spec.*field = parse_double(v, ln);
    };
  };
  auto domain_int = [](DomainSpec ExperimentConfig::* spec,
                       int DomainSpec::* field) {
    return [spec, field](ExperimentConfig& c, const std::string& v,
                         std::size_t ln) {
      c.*spec.*field = parse_int(v, ln);
    };
  };

  s["run.seed"] = [](ExperimentConfig& c, const std::string& v,
                     std::size_t ln) { c.seed = parse_u64(v, ln); };
  s["run.epochs"] = integer(&ExperimentConfig::epochs);
  s["run.iterations"] = integer(&ExperimentConfig::iterations);

  s["data.input_dim"] = integer(&ExperimentConfig::input_dim);
  s["data.augment_sigma"] = dbl(&ExperimentConfig::augment_sigma);
  s["data.query_fraction"] = dbl(&ExperimentConfig::query_fraction);
  s["data.import"] = [](ExperimentConfig& c, const std::string& v,
                        std::size_t) { c.import_path = v; };
  s["data.export"] = [](ExperimentConfig& c, const std::string& v,
                        std::size_t) { c.export_path = v; };

  for (const auto& [prefix, spec] :
       std::vector<std::pair<std::string, DomainSpec ExperimentConfig::*>>{
           {"data.source.", &ExperimentConfig::source},
           {"data.target.", &ExperimentConfig::target}}) {
    s[prefix + "identities"] = domain_int(spec, &DomainSpec::n_identities);
    s[prefix + "samples"] = domain_int(spec, &DomainSpec::samples_per_identity);
    s[prefix + "spread"] = domain_dbl(spec, &DomainSpec::center_spread);
    s[prefix + "noise"] = domain_dbl(spec, &DomainSpec::noise_sigma);
    s[prefix + "shift"] = domain_dbl(spec, &DomainSpec::shift);
    s[prefix + "distortion"] = domain_dbl(spec, &DomainSpec::distortion);
    s[prefix + "twins"] = domain_int(spec, &DomainSpec::twin_pairs);
    s[prefix + "twin_cos"] = domain_dbl(spec, &DomainSpec::twin_cos);
    s[prefix + "modes"] = domain_int(spec, &DomainSpec::modes);
    s[prefix + "mode_spread"] = domain_dbl(spec, &DomainSpec::mode_spread);
  }

  s["encoder.hidden"] = [](ExperimentConfig& c, const std::string& v,
                           std::size_t ln) {
    c.hidden_dims = parse_int_list(v, ln);
  };
  s["encoder.feature_dim"] = integer(&ExperimentConfig::feature_dim);

  s["cluster.eps"] = dbl(&ExperimentConfig::dbscan_eps);
  s["cluster.min_pts"] = integer(&ExperimentConfig::dbscan_min_pts);
  s["cluster.source_merge_pairs"] = integer(&ExperimentConfig::source_merge_pairs);
  s["cluster.source_split_classes"] =
      integer(&ExperimentConfig::source_split_classes);
  s["cluster.target_merge_pairs"] = integer(&ExperimentConfig::target_merge_pairs);
  s["cluster.target_split_classes"] =
      integer(&ExperimentConfig::target_split_classes);

  s["memory.k"] = integer(&ExperimentConfig::k);
  s["memory.momentum"] = dbl(&ExperimentConfig::momentum);
  s["memory.representation"] = [](ExperimentConfig& c, const std::string& v,
                                  std::size_t ln) {
    c.representation = parse_choice(v, ln, kRepresentations);
  };
  s["memory.positive"] = [](ExperimentConfig& c, const std::string& v,
                            std::size_t ln) {
    c.positive = parse_choice(v, ln, kPositives);
  };
  s["memory.negative"] = [](ExperimentConfig& c, const std::string& v,
                            std::size_t ln) {
    c.negative = parse_choice(v, ln, kNegatives);
  };

  s["loss.temperature"] = dbl(&ExperimentConfig::tau);
  s["loss.scope"] = [](ExperimentConfig& c, const std::string& v,
                       std::size_t ln) {
    c.scope = parse_choice(v, ln, kScopes);
  };
  s["loss.synthesis"] = [](ExperimentConfig& c, const std::string& v,
                           std::size_t ln) {
    c.synthesis = parse_choice(v, ln, kSyntheses);
  };
  s["loss.alpha"] = dbl(&ExperimentConfig::alpha);
  s["loss.beta_low"] = dbl(&ExperimentConfig::beta_lo);
  s["loss.beta_high"] = dbl(&ExperimentConfig::beta_hi);
  s["loss.shared_beta"] = [](ExperimentConfig& c, const std::string& v,
                             std::size_t ln) {
    c.shared_beta = parse_bool(v, ln);
  };

  s["optim.lr"] = dbl(&ExperimentConfig::lr);
  s["optim.lr_decay"] = dbl(&ExperimentConfig::lr_decay);
  s["optim.lr_decay_every"] = integer(&ExperimentConfig::lr_decay_every);
  s["optim.weight_decay"] = dbl(&ExperimentConfig::weight_decay);
  s["optim.adam_beta1"] = dbl(&ExperimentConfig::adam_beta1);
  s["optim.adam_beta2"] = dbl(&ExperimentConfig::adam_beta2);
  s["optim.adam_eps"] = dbl(&ExperimentConfig::adam_eps);

  s["batch.p"] = integer(&ExperimentConfig::p);
  return s;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = build_setters();
  return table;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail(line_no, "empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    if (section.empty()) fail(line_no, "key outside any section");
    const std::string full = section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) fail(line_no, "unknown key '" + full + "'");
    it->second(config, value, line_no);
  }
  validate_config(config);
  return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

namespace {

void emit_domain(std::ostringstream& out, const char* name,
                 const DomainSpec& spec) {
  out << "[data." << name << "]\n";
  out << "identities = " << spec.n_identities << '\n';
  out << "samples = " << spec.samples_per_identity << '\n';
  out << "spread = " << fmt_double(spec.center_spread) << '\n';
  out << "noise = " << fmt_double(spec.noise_sigma) << '\n';
  out << "shift = " << fmt_double(spec.shift) << '\n';
  out << "distortion = " << fmt_double(spec.distortion) << '\n';
  out << "twins = " << spec.twin_pairs << '\n';
  out << "twin_cos = " << fmt_double(spec.twin_cos) << '\n';
  out << "modes = " << spec.modes << '\n';
  out << "mode_spread = " << fmt_double(spec.mode_spread) << '\n';
}

}  // namespace

std::string canonical_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[run]\n";
  out << "seed = " << c.seed << '\n';
  out << "epochs = " << c.epochs << '\n';
  out << "iterations = " << c.iterations << '\n';
  out << "[data]\n";
  out << "input_dim = " << c.input_dim << '\n';
  out << "augment_sigma = " << fmt_double(c.augment_sigma) << '\n';
  out << "query_fraction = " << fmt_double(c.query_fraction) << '\n';
  out << "import = " << c.import_path << '\n';
  out << "export = " << c.export_path << '\n';
  emit_domain(out, "source", c.source);
  emit_domain(out, "target", c.target);
  out << "[encoder]\n";
  out << "hidden = ";
  for (std::size_t i = 0; i < c.hidden_dims.size(); ++i) {
    if (i > 0) out << ',';
    out << c.hidden_dims[i];
  }
  out << '\n';
  out << "feature_dim = " << c.feature_dim << '\n';
  out << "[cluster]\n";
  out << "eps = " << fmt_double(c.dbscan_eps) << '\n';
  out << "min_pts = " << c.dbscan_min_pts << '\n';
  out << "source_merge_pairs = " << c.source_merge_pairs << '\n';
  out << "source_split_classes = " << c.source_split_classes << '\n';
  out << "target_merge_pairs = " << c.target_merge_pairs << '\n';
  out << "target_split_classes = " << c.target_split_classes << '\n';
  out << "[memory]\n";
  out << "k = " << c.k << '\n';
  out << "momentum = " << fmt_double(c.momentum) << '\n';
  out << "representation = " << to_string(c.representation) << '\n';
  out << "positive = " << to_string(c.positive) << '\n';
  out << "negative = " << to_string(c.negative) << '\n';
  out << "[loss]\n";
  out << "temperature = " << fmt_double(c.tau) << '\n';
  out << "scope = " << to_string(c.scope) << '\n';
  out << "synthesis = " << to_string(c.synthesis) << '\n';
  out << "alpha = " << fmt_double(c.alpha) << '\n';
  out << "beta_low = " << fmt_double(c.beta_lo) << '\n';
  out << "beta_high = " << fmt_double(c.beta_hi) << '\n';
  out << "shared_beta = " << (c.shared_beta ? "true" : "false") << '\n';
  out << "[optim]\n";
  out << "lr = " << fmt_double(c.lr) << '\n';
  out << "lr_decay = " << fmt_double(c.lr_decay) << '\n';
  out << "lr_decay_every = " << c.lr_decay_every << '\n';
  out << "weight_decay = " << fmt_double(c.weight_decay) << '\n';
  out << "adam_beta1 = " << fmt_double(c.adam_beta1) << '\n';
  out << "adam_beta2 = " << fmt_double(c.adam_beta2) << '\n';
  out << "adam_eps = " << fmt_double(c.adam_eps) << '\n';
  out << "[batch]\n";
  out << "p = " << c.p << '\n';
  return out.str();
}

uint64_t config_hash(const ExperimentConfig& config) {
  return fnv1a64(canonical_config(config));
}

void validate_config(ExperimentConfig& c) {
  if (c.epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (c.iterations < 0) {
    throw std::invalid_argument("config: iterations must be >= 0");
  }
  if (c.input_dim < 1) throw std::invalid_argument("config: input_dim must be >= 1");
  if (c.feature_dim < 1) {
    throw std::invalid_argument("config: feature_dim must be >= 1");
  }
  if (c.augment_sigma < 0.0) {
    throw std::invalid_argument("config: augment_sigma must be >= 0");
  }
  if (c.query_fraction <= 0.0 || c.query_fraction >= 1.0) {
    throw std::invalid_argument("config: query_fraction must be in (0, 1)");
  }
  if (c.dbscan_eps < 0.0) throw std::invalid_argument("config: eps must be >= 0");
  if (c.dbscan_min_pts < 1) {
    throw std::invalid_argument("config: min_pts must be >= 1");
  }
  if (c.k < 1) throw std::invalid_argument("config: k must be >= 1");
  if (c.momentum < 0.0 || c.momentum > 1.0) {
    throw std::invalid_argument("config: momentum must lie in [0, 1]");
  }
  if (c.tau <= 0.0) throw std::invalid_argument("config: temperature must be > 0");
  if (c.alpha < 0.0) throw std::invalid_argument("config: alpha must be >= 0");
  if (c.beta_lo > c.beta_hi) {
    throw std::invalid_argument("config: beta_low must be <= beta_high");
  }
  if (c.lr <= 0.0) throw std::invalid_argument("config: lr must be > 0");
  if (c.lr_decay_every < 1) {
    throw std::invalid_argument("config: lr_decay_every must be >= 1");
  }
  if (c.p < 1) throw std::invalid_argument("config: p must be >= 1");
  for (const DomainSpec* spec : {&c.source, &c.target}) {
    if (spec->twin_pairs < 0 || 2 * spec->twin_pairs > spec->n_identities) {
      throw std::invalid_argument(
          "config: twins needs two identities per pair");
    }
    if (spec->twin_cos < 0.0 || spec->twin_cos >= 1.0) {
      throw std::invalid_argument("config: twin_cos must lie in [0, 1)");
    }
    if (spec->modes < 1) {
      throw std::invalid_argument("config: modes must be >= 1");
    }
    if (spec->mode_spread < 0.0) {
      throw std::invalid_argument("config: mode_spread must be >= 0");
    }
  }

  // The uni-centroid ablation is a single-slot memory with the (then
  // degenerate) moderate positive.
  if (c.representation == Representation::Uni) {
    c.k = 1;
    c.positive = PositiveStrategy::Moderate;
  }

  c.source.input_dim = c.input_dim;
  c.target.input_dim = c.input_dim;
}

const char* to_string(Representation v) {
  return v == Representation::Multi ? "multi" : "uni";
}
const char* to_string(PositiveStrategy v) {
  switch (v) {
    case PositiveStrategy::Moderate: return "moderate";
    case PositiveStrategy::Most: return "most";
    case PositiveStrategy::Least: return "least";
  }
  return "?";
}
const char* to_string(NegativeStrategy v) {
  return v == NegativeStrategy::Mean ? "mean" : "all";
}
const char* to_string(LossScope v) {
  return v == LossScope::Dscl ? "dscl" : "ucl";
}
const char* to_string(SynthesisMethod v) {
  switch (v) {
    case SynthesisMethod::Soni: return "soni";
    case SynthesisMethod::Qnni: return "qnni";
    case SynthesisMethod::Rnni: return "rnni";
    case SynthesisMethod::None: return "none";
  }
  return "?";
}

}  // namespace mcrn
