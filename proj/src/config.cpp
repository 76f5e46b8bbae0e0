#include "latcap/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "latcap/error.hpp"

namespace latcap {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string_view rest(s);
  while (true) {
    const auto at = rest.find(sep);
    parts.push_back(trim(rest.substr(0, at)));
    if (at == std::string_view::npos) break;
    rest.remove_prefix(at + 1);
  }
  return parts;
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ParseError("line " + std::to_string(line) + ": " + msg, line);
}

double to_double(const std::string& s, int line) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    fail(line, "'" + s + "' is not a number");
  }
  return v;
}

int to_int(const std::string& s, int line) {
  int v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) fail(line, "'" + s + "' is not an integer");
  return v;
}

std::vector<double> to_doubles(const std::string& s, int line) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto& part : split(s, ',')) out.push_back(to_double(part, line));
  return out;
}

std::vector<std::string> to_names(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  for (auto& part : split(s, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char ch : s) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.')) return false;
  }
  return true;
}

// Parses "l<k>" or "lambda<k>"; returns 0-based index or -1.
int lambda_reference(const std::string& s) {
  std::string digits;
  if (s.rfind("lambda", 0) == 0) {
    digits = s.substr(6);
  } else if (s.rfind("l", 0) == 0) {
    digits = s.substr(1);
  } else {
    return -1;
  }
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) return -1;
  return std::stoi(digits) - 1;
}

// term := factor ('*' factor)*, with exactly one lambda reference, at most
// one numeric factor and at most one covariate name.
LinearTerm parse_term(const std::string& text, double sign, int line) {
  LinearTerm term;
  term.scale = sign;
  bool have_lambda = false;
  bool have_number = false;
  for (const auto& factor : split(text, '*')) {
    if (factor.empty()) fail(line, "empty factor in '" + text + "'");
    const int l = lambda_reference(factor);
    if (l >= 0) {
      if (have_lambda) fail(line, "term '" + text + "' has more than one lambda");
      term.lambda = l;
      have_lambda = true;
    } else if (std::isdigit(static_cast<unsigned char>(factor[0])) || factor[0] == '.') {
      if (have_number) fail(line, "term '" + text + "' has more than one number");
      term.scale *= to_double(factor, line);
      have_number = true;
    } else if (is_identifier(factor)) {
      if (!term.covariate.empty()) fail(line, "term '" + text + "' has more than one covariate");
      term.covariate = factor;
    } else {
      fail(line, "cannot read factor '" + factor + "'");
    }
  }
  if (!have_lambda) fail(line, "term '" + text + "' has no lambda reference (l1, l2, ...)");
  return term;
}

LinearForm parse_linear_form(const std::string& text, int line) {
  LinearForm form;
  const std::string s = trim(text);
  if (s == "0") return form;
  if (s.empty()) fail(line, "empty restriction");
  std::size_t pos = 0;
  double sign = 1.0;
  if (s[0] == '+' || s[0] == '-') {
    sign = s[0] == '-' ? -1.0 : 1.0;
    pos = 1;
  }
  while (pos <= s.size()) {
    std::size_t next = s.find_first_of("+-", pos);
    // An exponent sign inside a number such as 1e-3 is not an operator.
    while (next != std::string::npos && next > 0 && (s[next - 1] == 'e' || s[next - 1] == 'E') &&
           next >= 2 && std::isdigit(static_cast<unsigned char>(s[next - 2]))) {
      next = s.find_first_of("+-", next + 1);
    }
    const std::string piece = trim(s.substr(pos, next == std::string::npos ? std::string::npos
                                                                            : next - pos));
    if (piece.empty()) fail(line, "dangling operator in '" + s + "'");
    form.push_back(parse_term(piece, sign, line));
    if (next == std::string::npos) break;
    sign = s[next] == '-' ? -1.0 : 1.0;
    pos = next + 1;
  }
  return form;
}

const ConfigSection* find_section(const std::vector<ConfigSection>& sections,
                                  const std::string& name) {
  for (const auto& sec : sections) {
    if (sec.name == name) return &sec;
  }
  return nullptr;
}

ModelSpec model_from_sections(const std::vector<ConfigSection>& sections) {
  ModelSpec spec;
  const ConfigSection* model = find_section(sections, "model");
  if (!model) throw ParseError("missing [model] section", 0);

  bool family_set = false;
  bool lambda_set = false;
  int lambda_line = model->line;
  for (const auto& e : model->entries) {
    if (e.key == "classes") {
      spec.classes = to_int(e.value, e.line);
      if (spec.classes < 1) fail(e.line, "classes must be at least 1");
    } else if (e.key == "family") {
      if (e.value == "recursive") {
        spec.family = Family::Recursive;
      } else if (e.value == "loglinear") {
        spec.family = Family::LogLinear;
      } else {
        fail(e.line, "family must be 'recursive' or 'loglinear', got '" + e.value + "'");
      }
      family_set = true;
    } else if (e.key == "partition") {
      spec.partition = e.value;
      if (e.value != "table") {
        try {
          partition_by_name(e.value);
        } catch (const DomainError& err) {
          fail(e.line, err.what());
        }
      }
    } else if (e.key == "interactions") {
      for (const auto& pair : to_names(e.value)) {
        const auto ends = split(pair, '-');
        if (ends.size() != 2) fail(e.line, "interaction '" + pair + "' is not of the form a-b");
        spec.interactions.emplace_back(to_int(ends[0], e.line) - 1, to_int(ends[1], e.line) - 1);
      }
    } else if (e.key == "lambda") {
      spec.lambda_dim = to_int(e.value, e.line);
      lambda_set = true;
      lambda_line = e.line;
    } else {
      fail(e.line, "unknown key '" + e.key + "' in [model]");
    }
  }
  if (!family_set) fail(model->line, "[model] needs a 'family'");
  if (spec.family == Family::LogLinear && spec.partition != "none") {
    fail(model->line, "partition applies to the recursive family only");
  }
  if (spec.family == Family::Recursive && !spec.interactions.empty()) {
    fail(model->line, "interactions apply to the loglinear family only");
  }

  if (const auto* latent = find_section(sections, "latent")) {
    for (const auto& e : latent->entries) {
      if (e.key != "covariates") fail(e.line, "unknown key '" + e.key + "' in [latent]");
      spec.latent_covariates = to_names(e.value);
    }
  }

  if (const auto* part = find_section(sections, "partition")) {
    if (spec.partition != "table") fail(part->line, "[partition] requires 'partition = table'");
    for (const auto& e : part->entries) {
      if (e.key == "classes") {
        spec.partition_classes = to_int(e.value, e.line);
      } else if (e.key == "default") {
        spec.partition_default = to_int(e.value, e.line);
      } else if (e.key == "start") {
        spec.partition_table[""] = to_int(e.value, e.line);
      } else if (e.key.find_first_not_of("01") == std::string::npos) {
        if (!spec.partition_table.emplace(e.key, to_int(e.value, e.line)).second) {
          fail(e.line, "partial history '" + e.key + "' listed twice");
        }
      } else {
        fail(e.line, "unknown key '" + e.key + "' in [partition]");
      }
    }
    if (spec.partition_classes < 1) fail(part->line, "[partition] needs 'classes'");
    for (const auto& [key, v] : spec.partition_table) {
      if (v < 1 || v > spec.partition_classes) {
        fail(part->line, "partial history '" + key + "' mapped outside 1.." +
                             std::to_string(spec.partition_classes));
      }
    }
  } else if (spec.partition == "table") {
    fail(model->line, "'partition = table' needs a [partition] section");
  }

  if (const auto* restr = find_section(sections, "restriction")) {
    if (!lambda_set) fail(restr->line, "[restriction] requires 'lambda' in [model]");
    if (spec.lambda_dim < 1) fail(lambda_line, "lambda must be positive");
    std::vector<std::vector<std::pair<LinearForm, bool>>> cells(spec.classes);
    int delta_rows = 0;
    std::vector<std::pair<int, ConfigEntry>> parsed;
    for (const auto& e : restr->entries) {
      const auto dot = e.key.find('.');
      const std::string cls = e.key.substr(0, dot);
      const std::string del = dot == std::string::npos ? "" : e.key.substr(dot + 1);
      if (cls.rfind("class", 0) != 0 || del.rfind("delta", 0) != 0) {
        fail(e.line, "restriction key must look like classC.deltaR, got '" + e.key + "'");
      }
      const int c = to_int(cls.substr(5), e.line);
      const int r = to_int(del.substr(5), e.line);
      if (c < 1 || c > spec.classes) fail(e.line, "class " + std::to_string(c) + " out of range");
      if (r < 1) fail(e.line, "delta index must be positive");
      delta_rows = std::max(delta_rows, r);
      auto& row = cells[c - 1];
      if (static_cast<int>(row.size()) < r) row.resize(r);
      if (row[r - 1].second) fail(e.line, "'" + e.key + "' defined twice");
      row[r - 1] = {parse_linear_form(e.value, e.line), true};
      for (const auto& term : row[r - 1].first) {
        if (term.lambda >= spec.lambda_dim) {
          fail(e.line, "l" + std::to_string(term.lambda + 1) + " exceeds lambda = " +
                           std::to_string(spec.lambda_dim));
        }
      }
    }
    spec.restriction.assign(spec.classes, {});
    for (int c = 0; c < spec.classes; ++c) {
      cells[c].resize(delta_rows);
      for (int r = 0; r < delta_rows; ++r) {
        if (!cells[c][r].second) {
          fail(restr->line, "class" + std::to_string(c + 1) + ".delta" + std::to_string(r + 1) +
                                " is not defined");
        }
        spec.restriction[c].push_back(cells[c][r].first);
      }
    }
  } else if (lambda_set) {
    fail(lambda_line, "'lambda' is only meaningful with a [restriction] section");
  }
  return spec;
}

const std::set<std::string> kModelSections = {"model", "latent", "partition", "restriction"};

}  // namespace

std::vector<ConfigSection> parse_config_text(std::istream& in) {
  std::vector<ConfigSection> sections;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(std::string_view(raw).substr(0, hash));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') fail(line, "unterminated section header");
      const std::string name = trim(std::string_view(text).substr(1, text.size() - 2));
      if (name.empty()) fail(line, "empty section name");
      for (const auto& sec : sections) {
        if (sec.name == name) fail(line, "section [" + name + "] appears twice");
      }
      sections.push_back({name, line, {}});
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value'");
    if (sections.empty()) fail(line, "entry before any [section]");
    ConfigEntry entry{trim(std::string_view(text).substr(0, eq)),
                      trim(std::string_view(text).substr(eq + 1)), line};
    if (entry.key.empty()) fail(line, "empty key");
    auto& entries = sections.back().entries;
    if (entry.key != "entry") {
      for (const auto& e : entries) {
        if (e.key == entry.key) fail(line, "key '" + entry.key + "' repeated");
      }
    }
    entries.push_back(std::move(entry));
  }
  return sections;
}

ModelSpec parse_model_config(std::istream& in) {
  const auto sections = parse_config_text(in);
  for (const auto& sec : sections) {
    if (!kModelSections.count(sec.name)) fail(sec.line, "unknown section [" + sec.name + "]");
  }
  return model_from_sections(sections);
}

ModelSpec load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model config '" + path + "'");
  try {
    return parse_model_config(in);
  } catch (const ParseError& err) {
    throw ParseError(path + ": " + err.what(), err.line(), err.column());
  }
}

SimulationSpec parse_simulation_spec(std::istream& in) {
  const auto sections = parse_config_text(in);
  for (const auto& sec : sections) {
    if (!kModelSections.count(sec.name) && sec.name != "truth" && sec.name != "pool") {
      fail(sec.line, "unknown section [" + sec.name + "]");
    }
  }
  SimulationSpec sim;
  sim.model = model_from_sections(sections);

  const auto* truth = find_section(sections, "truth");
  if (!truth) throw ParseError("simulation spec needs a [truth] section", 0);
  std::vector<double> zeta;
  std::vector<double> lambda;
  for (const auto& e : truth->entries) {
    if (e.key == "lists") {
      sim.lists = to_int(e.value, e.line);
    } else if (e.key == "zeta") {
      zeta = to_doubles(e.value, e.line);
    } else if (e.key == "lambda") {
      lambda = to_doubles(e.value, e.line);
    } else {
      fail(e.line, "unknown key '" + e.key + "' in [truth]");
    }
  }
  if (sim.lists < 2) fail(truth->line, "[truth] needs 'lists' of at least 2");
  sim.beta.resize(static_cast<Eigen::Index>(zeta.size() + lambda.size()));
  for (std::size_t t = 0; t < zeta.size(); ++t) sim.beta[static_cast<Eigen::Index>(t)] = zeta[t];
  for (std::size_t t = 0; t < lambda.size(); ++t) {
    sim.beta[static_cast<Eigen::Index>(zeta.size() + t)] = lambda[t];
  }

  if (const auto* pool = find_section(sections, "pool")) {
    for (const auto& e : pool->entries) {
      if (e.key == "covariates") {
        sim.covariate_names = to_names(e.value);
      } else if (e.key == "entry") {
        const auto at = e.value.find('@');
        if (at == std::string::npos) fail(e.line, "pool entry needs '@ weight'");
        sim.pool.push_back(to_doubles(trim(e.value.substr(0, at)), e.line));
        const double w = to_double(trim(e.value.substr(at + 1)), e.line);
        if (!(w > 0)) fail(e.line, "pool weight must be positive");
        sim.weights.push_back(w);
        if (sim.pool.back().size() != sim.covariate_names.size()) {
          fail(e.line, "pool entry has " + std::to_string(sim.pool.back().size()) +
                           " values but " + std::to_string(sim.covariate_names.size()) +
                           " covariates are declared");
        }
      } else {
        fail(e.line, "unknown key '" + e.key + "' in [pool]");
      }
    }
    if (sim.pool.empty()) fail(pool->line, "[pool] has no entries");
  } else {
    sim.pool.push_back({});
    sim.weights.push_back(1.0);
  }
  double total = 0.0;
  for (double w : sim.weights) total += w;
  for (double& w : sim.weights) w /= total;

  try {
    const Model model(sim.model, sim.lists, sim.covariate_names);
    if (model.beta_dim() != sim.beta.size()) {
      fail(truth->line, "[truth] gives " + std::to_string(sim.beta.size()) +
                            " parameters, the model has " + std::to_string(model.beta_dim()) +
                            " (" + std::to_string(model.zeta_dim()) + " zeta, " +
                            std::to_string(model.lambda_dim()) + " lambda)");
    }
  } catch (const DomainError& err) {
    fail(truth->line, err.what());
  } catch (const DimensionError& err) {
    fail(truth->line, err.what());
  }
  return sim;
}

SimulationSpec load_simulation_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open simulation spec '" + path + "'");
  try {
    return parse_simulation_spec(in);
  } catch (const ParseError& err) {
    throw ParseError(path + ": " + err.what(), err.line(), err.column());
  }
}

}  // namespace latcap
