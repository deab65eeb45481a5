#include "cli.hpp"

#include <CLI11.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "lqspec/lqspec.hpp"

namespace lqspec::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

double parse_decimal(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw InvalidParams("empty number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
    throw InvalidParams("not a number: '" + t + "'");
  return v;
}

std::string fmt17(double x) { return format_double(x); }

std::string fmt9(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", x);
  return buf;
}

// "2^-4", "0.125" or "1/8"
double parse_scale(const std::string& token) {
  const auto caret = token.find('^');
  if (caret == std::string::npos) return parse_number(token);
  return std::pow(parse_decimal(token.substr(0, caret)), parse_decimal(token.substr(caret + 1)));
}

// Comma list of scales; "2^-4..2^-11" expands to every integer exponent in between.
std::vector<double> parse_scales(const std::string& text) {
  std::vector<double> out;
  for (const std::string& tok : split(text, ',')) {
    const auto dots = tok.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_scale(tok));
      continue;
    }
    const std::string a = tok.substr(0, dots), b = tok.substr(dots + 2);
    const auto ca = a.find('^'), cb = b.find('^');
    if (ca == std::string::npos || cb == std::string::npos) throw InvalidParams("scale ranges need the form B^i..B^j");
    const double base = parse_decimal(a.substr(0, ca));
    if (base != parse_decimal(b.substr(0, cb))) throw InvalidParams("scale range bases differ");
    const long i = std::lround(parse_decimal(a.substr(ca + 1))), j = std::lround(parse_decimal(b.substr(cb + 1)));
    for (long k = i; i <= j ? k <= j : k >= j; k += i <= j ? 1 : -1) out.push_back(std::pow(base, k));
  }
  return out;
}

std::vector<double> default_scales() {
  std::vector<double> h;
  for (int k = 4; k <= 11; ++k) h.push_back(std::ldexp(1.0, -k));
  return h;
}

// Key/value record printed as text lines or one JSON object.
struct Record {
  nlohmann::ordered_json json = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, std::string>> text;

  void add(const std::string& key, const nlohmann::ordered_json& value, const std::string& shown) {
    json[key] = value;
    text.emplace_back(key, shown);
  }
  void print(std::ostream& os, const std::string& format) const {
    if (format == "json") {
      os << json.dump(2) << '\n';
      return;
    }
    for (const auto& [k, v] : text) os << k << '=' << v << '\n';
  }
};

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string join(const std::vector<std::string>& parts, const std::string& sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::string index_label(const MeasureMatrixSpec& spec, int i) {
  return i < static_cast<int>(spec.labels.size()) ? spec.labels[i] : std::to_string(i + 1);
}

double require_q(const RunConfig& c) {
  if (!c.q) throw InvalidParams("--q is required");
  if (!(*c.q >= 0.0)) throw InvalidParams("q must be >= 0");
  return *c.q;
}

// Writes to --output when set, otherwise to out.
void emit(const RunConfig& c, std::ostream& out, const std::function<void(std::ostream&)>& body) {
  if (c.output.empty()) {
    body(out);
    return;
  }
  std::ofstream f(c.output, std::ios::binary);
  if (!f) throw InvalidParams("cannot open output file " + c.output);
  body(f);
}

int cmd_solve(const RunConfig& c, std::ostream& out) {
  const double q = require_q(c);
  const FamilyMatrix fm = build_family_matrix(to_family_params(c));
  const TauResult t = tau(fm.spec, q);
  Record rec;
  rec.add("q", q, fmt17(q));
  rec.add("tau", t.alpha, fmt9(t.alpha));
  nlohmann::ordered_json roots = nlohmann::ordered_json::array();
  std::vector<std::string> shown;
  for (const auto& r : t.classification.roots) {
    roots.push_back(opt_json(r));
    shown.push_back(r ? fmt17(*r) : "none");
  }
  rec.add("roots", roots, join(shown));
  nlohmann::ordered_json basic = nlohmann::ordered_json::array();
  shown.clear();
  for (int b : t.classification.basic_classes()) {
    basic.push_back(b + 1);
    shown.push_back(std::to_string(b + 1));
  }
  rec.add("basic_classes", basic, join(shown));
  emit(c, out, [&](std::ostream& os) { rec.print(os, c.format); });
  return 0;
}

int cmd_curve(const RunConfig& c, std::ostream& out) {
  const FamilyMatrix fm = build_family_matrix(to_family_params(c));
  const SpectrumCurve curve = tau_curve(fm.spec, c.q_min, c.q_max, c.steps);
  emit(c, out, [&](std::ostream& os) { write_curve_csv(os, curve); });
  return 0;
}

int cmd_derivative(const RunConfig& c, std::ostream& out) {
  const double q = require_q(c);
  const FamilyParams fp = to_family_params(c);
  const FamilyMatrix fm = build_family_matrix(fp);
  const double fd = tau_prime_fd(fm.spec, q, c.step);
  const ClosedFormFamily cf = make_closed_form(fp);
  const DerivativeReport d = tau_prime_closed(cf, q);
  Record rec;
  rec.add("q", q, fmt17(q));
  rec.add("tau", d.tau, fmt17(d.tau));
  rec.add("closed_form", d.termwise, fmt17(d.termwise));
  rec.add("finite_difference", fd, fmt17(fd));
  rec.add("difference", std::abs(d.termwise - fd), fmt17(std::abs(d.termwise - fd)));
  rec.add("factor", cf.factors[d.factor].name, cf.factors[d.factor].name);
  rec.add("verbatim", opt_json(d.verbatim), d.verbatim ? fmt17(*d.verbatim) : "none");
  rec.add("verbatim_discrepancy", opt_json(d.discrepancy), d.discrepancy ? fmt17(*d.discrepancy) : "none");
  if (!d.verbatim_note.empty()) rec.add("verbatim_note", d.verbatim_note, d.verbatim_note);
  emit(c, out, [&](std::ostream& os) { rec.print(os, c.format); });
  return 0;
}

SpectrumCurve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParams("cannot open curve file " + path);
  SpectrumCurve curve;
  std::string line;
  if (!std::getline(in, line) || trim(line) != "q,alpha") throw InvalidParams("curve file must start with 'q,alpha'");
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto parts = split(line, ',');
    if (parts.size() != 2) throw InvalidParams("bad curve row: " + line);
    curve.q.push_back(parse_decimal(parts[0]));
    curve.alpha.push_back(parse_decimal(parts[1]));
  }
  return curve;
}

int cmd_legendre(const RunConfig& c, std::ostream& out, std::ostream& err) {
  SpectrumCurve curve;
  if (!c.curve.empty()) {
    curve = read_curve_csv(c.curve);
  } else {
    curve = tau_curve(build_family_matrix(to_family_params(c)).spec, c.q_min, c.q_max, c.steps);
  }
  const LegendreCurve l = legendre(curve);
  if (l.degenerate) err << "warning: degenerate curve, f is defined at a single slope only\n";
  emit(c, out, [&](std::ostream& os) { write_legendre_csv(os, l); });
  return 0;
}

int cmd_classify(const RunConfig& c, std::ostream& out) {
  const double q = c.q.value_or(1.0);
  if (!(q >= 0.0)) throw InvalidParams("q must be >= 0");
  const MeasureMatrixSpec spec = build_family_matrix(to_family_params(c)).spec;
  const ClassificationResult res = classify(spec, q, c.tie_tol);
  const ClassDecomposition& d = res.decomposition;
  nlohmann::ordered_json j;
  j["q"] = q;
  j["tau"] = res.tau;
  j["classes"] = nlohmann::ordered_json::array();
  std::ostringstream text;
  text << "q=" << fmt17(q) << "\ntau=" << fmt17(res.tau) << '\n';
  for (std::size_t k = 0; k < d.classes.size(); ++k) {
    std::vector<std::string> idx;
    for (int i : d.classes[k]) idx.push_back(index_label(spec, i));
    nlohmann::ordered_json cj;
    cj["class"] = k + 1;
    cj["indices"] = idx;
    cj["root"] = opt_json(res.roots[k]);
    cj["basic"] = static_cast<bool>(res.basic[k]);
    cj["height"] = res.height[k];
    cj["final"] = static_cast<bool>(d.final_flags[k]);
    std::string lattice = "none";
    if (res.lattice[k]) {
      lattice = res.lattice[k]->lattice ? "lattice(span=" + fmt17(res.lattice[k]->span) + ")" : "nonlattice";
      cj["lattice"] = res.lattice[k]->lattice;
      cj["span"] = res.lattice[k]->lattice ? nlohmann::ordered_json(res.lattice[k]->span) : nullptr;
    } else {
      cj["lattice"] = nullptr;
      cj["span"] = nullptr;
    }
    j["classes"].push_back(cj);
    text << "class " << k + 1 << ": indices=" << join(idx) << " root="
         << (res.roots[k] ? fmt17(*res.roots[k]) : "none") << " basic=" << (res.basic[k] ? "yes" : "no")
         << " height=" << res.height[k] << " lattice=" << lattice << '\n';
  }
  j["tags"] = nlohmann::ordered_json::object();
  for (int i = 0; i < spec.n; ++i) {
    const std::string tag = to_string(res.tags[i]);
    j["tags"][index_label(spec, i)] = tag;
    text << 'l' << index_label(spec, i) << ": " << tag << '\n';
  }
  emit(c, out, [&](std::ostream& os) {
    if (c.format == "json")
      os << j.dump(2) << '\n';
    else
      os << text.str();
  });
  return 0;
}

ScalingFit run_estimate(const RunConfig& c, const FamilyParams& fp, double q) {
  const Gifs g = build_example(fp);
  if (c.samples < 1) throw InvalidParams("--samples must be >= 1");
  const long per_vertex = std::max(1L, c.samples / g.num_vertices);
  return estimate_tau(g, q, c.scales.empty() ? default_scales() : c.scales, per_vertex, c.seed, c.depth_eps,
                      c.threads);
}

int cmd_estimate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const double q = require_q(c);
  const ScalingFit fit = run_estimate(c, to_family_params(c), q);
  Record rec;
  rec.add("q", q, fmt17(q));
  rec.add("tau_emp", fit.slope, fmt17(fit.slope));
  rec.add("stderr", fit.stderr_slope, fmt17(fit.stderr_slope));
  rec.add("intercept", fit.intercept, fmt17(fit.intercept));
  if (c.output.empty()) {
    write_fit_csv(out, fit);
    rec.print(err, c.format);
  } else {
    emit(c, out, [&](std::ostream& os) { write_fit_csv(os, fit); });
    rec.print(out, c.format);
  }
  return 0;
}

int cmd_compare(const RunConfig& c, std::ostream& out) {
  const double q = require_q(c);
  const FamilyParams fp = to_family_params(c);
  const double t = tau(build_family_matrix(fp).spec, q).alpha;
  const ScalingFit fit = run_estimate(c, fp, q);
  Record rec;
  rec.add("q", q, fmt17(q));
  rec.add("tau", t, fmt17(t));
  rec.add("tau_emp", fit.slope, fmt17(fit.slope));
  rec.add("abs_diff", std::abs(fit.slope - t), fmt17(std::abs(fit.slope - t)));
  rec.add("stderr", fit.stderr_slope, fmt17(fit.stderr_slope));
  rec.add("samples", c.samples, std::to_string(c.samples));
  rec.add("seed", c.seed, std::to_string(c.seed));
  emit(c, out, [&](std::ostream& os) { rec.print(os, c.format); });
  return 0;
}

// String-valued flags, applied on top of the config file when given.
struct Flags {
  std::string config, family, rho, r, t, s, probs, q, q_min, q_max, step, scales, depth_eps, tie_tol, format,
      output, curve;
  int steps = 0, threads = 0;
  long samples = 0;
  std::uint64_t seed = 0;
};

void add_options(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file with the same field names as the flags");
  sub->add_option("--family", f.family, "strong-r | strong-r2 | nonstrong-r-basic | nonstrong-r-heights | nonstrong-r2");
  sub->add_option("--rho", f.rho, "contraction ratio rho (decimal or a/b)");
  sub->add_option("--r", f.r, "contraction ratio r");
  sub->add_option("--t", f.t, "nonstrong-r2 parameter t");
  sub->add_option("--s", f.s, "nonstrong-r2 parameter s");
  sub->add_option("--probs", f.probs, "uniform | symmetric | e1=1/3,e2=... (optionally after a base keyword)");
  sub->add_option("--format", f.format, "text | json")->check(CLI::IsMember({"text", "json"}));
  sub->add_option("--output", f.output, "write the main output to this file");
}

}  // namespace

double parse_number(const std::string& text) {
  const std::string t = trim(text);
  const auto slash = t.find('/');
  if (slash == std::string::npos) return parse_decimal(t);
  const double den = parse_decimal(t.substr(slash + 1));
  if (den == 0.0) throw InvalidParams("zero denominator in '" + t + "'");
  return parse_decimal(t.substr(0, slash)) / den;
}

std::map<std::string, double> parse_probs(const std::string& text, std::string& base) {
  std::map<std::string, double> out;
  base = "explicit";
  const auto parts = split(text, ',');
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& p = parts[i];
    if (i == 0 && (p == "uniform" || p == "symmetric")) {
      base = p;
      continue;
    }
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw InvalidParams("probability entries must look like e1=1/3, got '" + p + "'");
    out[trim(p.substr(0, eq))] = parse_number(p.substr(eq + 1));
  }
  return out;
}

FamilyParams to_family_params(const RunConfig& c) {
  FamilyParams fp;
  fp.family = family_from_string(c.family);
  fp = canonical_params(fp.family);
  if (fp.family == FamilyId::StrongR2) {
    if (c.rho && std::abs(*c.rho - kGoldenRho) > 1e-12) throw InvalidParams("strong-r2 fixes rho=(sqrt(5)-1)/2");
  } else if (c.rho) {
    fp.rho = *c.rho;
  }
  if (c.r) fp.r = *c.r;
  if (c.t) fp.t = *c.t;
  if (c.s) fp.s = *c.s;
  const int m = family_edge_count(fp.family);
  for (const auto& [k, v] : c.probs) {
    bool known = false;
    for (int i = 1; i <= m; ++i) known = known || k == "e" + std::to_string(i);
    if (!known) throw InvalidParams("unknown edge " + k + " for family " + c.family);
  }
  if (c.probs_base == "uniform") {
    for (const auto& [k, v] : c.probs) fp.probs[k] = v;
  } else if (c.probs_base == "symmetric") {
    fp.probs = symmetric_probabilities(fp.family, c.probs);
  } else if (c.probs_base == "explicit") {
    fp.probs = c.probs;
    for (int i = 1; i <= m; ++i)
      if (!fp.probs.count("e" + std::to_string(i))) throw InvalidParams("missing probability for e" + std::to_string(i));
  } else {
    throw InvalidParams("unknown probability base " + c.probs_base);
  }
  const ValidationReport rep = validate_gifs(build_example(fp));
  if (!rep.ok) throw InvalidParams(rep.violations.front());
  return fp;
}

RunConfig config_from_params(const FamilyParams& fp, RunConfig base) {
  base.family = to_string(fp.family);
  base.rho = fp.rho;
  base.r = fp.r;
  base.t = fp.t;
  base.s = fp.s;
  base.probs_base = "explicit";
  base.probs = fp.probs;
  return base;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  j["family"] = c.family;
  j["rho"] = opt(c.rho);
  j["r"] = opt(c.r);
  j["t"] = opt(c.t);
  j["s"] = opt(c.s);
  j["probs_base"] = c.probs_base;
  j["probs"] = c.probs;
  j["q"] = opt(c.q);
  j["q_min"] = c.q_min;
  j["q_max"] = c.q_max;
  j["steps"] = c.steps;
  j["step"] = c.step;
  j["scales"] = c.scales;
  j["samples"] = c.samples;
  j["seed"] = c.seed;
  j["depth_eps"] = c.depth_eps;
  j["tie_tol"] = c.tie_tol;
  j["threads"] = c.threads;
  j["format"] = c.format;
  j["output"] = c.output;
  j["curve"] = c.curve;
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidParams("config must be a JSON object");
  RunConfig c;
  auto num = [](const nlohmann::json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_number(v.get<std::string>());
    throw InvalidParams("expected a number or a rational string");
  };
  auto opt = [&](const char* key, std::optional<double>& dst) {
    if (j.contains(key) && !j[key].is_null()) dst = num(j[key]);
  };
  static const std::set<std::string> known = {"family", "rho", "r", "t", "s", "probs_base", "probs", "q",
                                              "q_min", "q_max", "steps", "step", "scales", "samples", "seed",
                                              "depth_eps", "tie_tol", "threads", "format", "output", "curve"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw InvalidParams("unknown config field " + k);
  try {
    if (j.contains("family")) c.family = j["family"].get<std::string>();
    opt("rho", c.rho);
    opt("r", c.r);
    opt("t", c.t);
    opt("s", c.s);
    opt("q", c.q);
    if (j.contains("probs")) {
      const auto& p = j["probs"];
      if (p.is_string()) {
        c.probs = parse_probs(p.get<std::string>(), c.probs_base);
      } else if (p.is_object()) {
        c.probs_base = "explicit";
        for (const auto& [k, v] : p.items()) c.probs[k] = num(v);
      } else {
        throw InvalidParams("probs must be a string or an object");
      }
    }
    if (j.contains("probs_base")) c.probs_base = j["probs_base"].get<std::string>();
    if (j.contains("q_min")) c.q_min = num(j["q_min"]);
    if (j.contains("q_max")) c.q_max = num(j["q_max"]);
    if (j.contains("steps")) c.steps = j["steps"].get<int>();
    if (j.contains("step")) c.step = num(j["step"]);
    if (j.contains("scales")) {
      const auto& s = j["scales"];
      if (s.is_string()) {
        c.scales = parse_scales(s.get<std::string>());
      } else {
        for (const auto& v : s) c.scales.push_back(num(v));
      }
    }
    if (j.contains("samples")) c.samples = j["samples"].get<long>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("depth_eps")) c.depth_eps = num(j["depth_eps"]);
    if (j.contains("tie_tol")) c.tie_tol = num(j["tie_tol"]);
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("format")) c.format = j["format"].get<std::string>();
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    if (j.contains("curve")) c.curve = j["curve"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidParams(std::string("config: ") + e.what());
  }
  return c;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"L^q-spectra of graph-directed self-similar measures"};
  app.name("lqspec");
  app.require_subcommand(1);
  Flags f;
  struct Command {
    CLI::App* app;
    std::function<int(const RunConfig&)> fn;
  };
  std::vector<Command> commands;
  auto add = [&](const std::string& name, const std::string& help, std::function<int(const RunConfig&)> fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_options(sub, f);
    commands.push_back({sub, std::move(fn)});
    return sub;
  };
  auto q_opt = [&](CLI::App* sub) { sub->add_option("--q", f.q, "moment order q >= 0"); };
  auto grid = [&](CLI::App* sub) {
    sub->add_option("--q-min", f.q_min, "first grid point (default 0)");
    sub->add_option("--q-max", f.q_max, "last grid point (default 10)");
    sub->add_option("--steps", f.steps, "number of grid points (default 101)");
  };
  auto sampling = [&](CLI::App* sub) {
    q_opt(sub);
    sub->add_option("--scales", f.scales, "box sides, e.g. 2^-4..2^-11 (default) or 0.0625,0.03125,...");
    sub->add_option("--samples", f.samples, "total sample count N (default 10^6)");
    sub->add_option("--seed", f.seed, "random seed (default 42)");
    sub->add_option("--depth-eps", f.depth_eps, "walk truncation ratio (default 1e-9)");
    sub->add_option("--threads", f.threads, "worker threads (default: all, capped by LQSPEC_THREADS)");
  };

  q_opt(add("solve", "tau(q) with per-class roots", [&](const RunConfig& c) { return cmd_solve(c, out); }));
  grid(add("curve", "tau on a q grid as q,alpha CSV", [&](const RunConfig& c) { return cmd_curve(c, out); }));
  {
    CLI::App* sub = add("derivative", "closed-form and finite-difference tau'(q)",
                        [&](const RunConfig& c) { return cmd_derivative(c, out); });
    q_opt(sub);
    sub->add_option("--step", f.step, "central-difference step (default 1e-4)");
  }
  {
    CLI::App* sub = add("legendre", "Legendre transform alpha,f,q_conj CSV",
                        [&](const RunConfig& c) { return cmd_legendre(c, out, err); });
    grid(sub);
    sub->add_option("--curve", f.curve, "read the q,alpha CSV from this file instead of solving");
  }
  {
    CLI::App* sub = add("classify", "communication classes, heights, lattice verdicts and asymptotic tags",
                        [&](const RunConfig& c) { return cmd_classify(c, out); });
    q_opt(sub);
    sub->add_option("--tie-tol", f.tie_tol, "class root tie tolerance (default 1e-9)");
  }
  sampling(add("estimate", "Monte Carlo box-counting estimate of tau(q)",
               [&](const RunConfig& c) { return cmd_estimate(c, out, err); }));
  sampling(add("compare", "solver tau(q) against the Monte Carlo estimate",
               [&](const RunConfig& c) { return cmd_compare(c, out); }));

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  for (const Command& cmd : commands) {
    if (!cmd.app->parsed()) continue;
    auto given = [&](const char* name) { return cmd.app->get_option(name)->count() > 0; };
    auto has = [&](const char* name) {
      try {
        return cmd.app->get_option(name)->count() > 0;
      } catch (const CLI::OptionNotFound&) {
        return false;
      }
    };
    try {
      RunConfig c;
      if (given("--config")) {
        std::ifstream in(f.config);
        if (!in) throw InvalidParams("cannot open config file " + f.config);
        nlohmann::json j;
        try {
          in >> j;
        } catch (const nlohmann::json::exception& e) {
          throw InvalidParams("config file " + f.config + ": " + e.what());
        }
        c = config_from_json(j);
      }
      if (given("--family")) c.family = f.family;
      if (given("--rho")) c.rho = parse_number(f.rho);
      if (given("--r")) c.r = parse_number(f.r);
      if (given("--t")) c.t = parse_number(f.t);
      if (given("--s")) c.s = parse_number(f.s);
      if (given("--probs")) c.probs = parse_probs(f.probs, c.probs_base);
      if (given("--format")) c.format = f.format;
      if (given("--output")) c.output = f.output;
      if (has("--q")) c.q = parse_number(f.q);
      if (has("--q-min")) c.q_min = parse_number(f.q_min);
      if (has("--q-max")) c.q_max = parse_number(f.q_max);
      if (has("--steps")) c.steps = f.steps;
      if (has("--step")) c.step = parse_number(f.step);
      if (has("--curve")) c.curve = f.curve;
      if (has("--tie-tol")) c.tie_tol = parse_number(f.tie_tol);
      if (has("--scales")) c.scales = parse_scales(f.scales);
      if (has("--samples")) c.samples = f.samples;
      if (has("--seed")) c.seed = f.seed;
      if (has("--depth-eps")) c.depth_eps = parse_number(f.depth_eps);
      if (has("--threads")) c.threads = f.threads;
      if (c.format != "text" && c.format != "json") throw InvalidParams("format must be text or json");
      return cmd.fn(c);
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return e.is_config_error() ? 2 : 3;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 3;
    }
  }
  return 2;
}

}  // namespace lqspec::cli
