// Batch front end: classify equations, run rate experiments, execute the
// verification suites, and emit CSV / gnuplot data.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdelab/sdelab.hpp"

using nlohmann::json;
using namespace sdelab;

namespace {

constexpr int kConfigVersion = 1;

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

SdeSpec spec_from_json(const json& j) {
  const std::string family = j.at("family").get<std::string>();
  const double x0 = j.value("x0", 1.0);
  if (family == "cir")
    return make_cir(j.value("delta", 1.0), j.value("beta", 0.0), j.value("sigma", 2.0), x0);
  if (family == "squared_bessel") return make_squared_bessel(x0);
  if (family == "quintic") return make_quintic(x0);
  if (family == "gbm") return make_gbm(j.value("alpha", 0.0), j.value("beta", 1.0), x0);
  if (family == "sgn_drift") return make_sgn_drift(x0);
  if (family == "sgn_drift_plain") return make_sgn_drift_plain(x0);
  throw CLI::ValidationError("unknown family '" + family + "'");
}

SchemeId scheme_from_string(const std::string& s) {
  static const std::map<std::string, SchemeId> table{
      {"euler", SchemeId::euler},
      {"milstein", SchemeId::milstein},
      {"wagner_platen_truncated", SchemeId::wagner_platen_truncated},
      {"tamed_euler", SchemeId::tamed_euler},
      {"tamed_milstein", SchemeId::tamed_milstein},
      {"drift_implicit_sqrt", SchemeId::drift_implicit_sqrt}};
  const auto it = table.find(s);
  if (it == table.end()) throw CLI::ValidationError("unknown scheme '" + s + "'");
  return it->second;
}

ErrorMetric metric_from_json(const json& j) {
  ErrorMetric m;
  const std::string kind = j.value("kind", "endpoint");
  if (kind == "endpoint") m.kind = MetricKind::endpoint;
  else if (kind == "lp" || kind == "Lp") m.kind = MetricKind::lp;
  else if (kind == "sup") m.kind = MetricKind::sup;
  else if (kind == "max_pointwise") m.kind = MetricKind::max_pointwise;
  else throw CLI::ValidationError("unknown metric kind '" + kind + "'");
  m.p = j.value("p", 1.0);
  m.resolution = j.value("resolution", m.kind == MetricKind::endpoint ? 1 : 1024);
  return m;
}

TheoremId theorem_from_string(const std::string& s) {
  if (s == "pointwise") return TheoremId::pointwise;
  if (s == "sup") return TheoremId::sup;
  if (s == "lp" || s == "Lp") return TheoremId::lp;
  throw CLI::ValidationError("unknown theorem '" + s + "'");
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("cannot open config '" + path + "'");
  json cfg = json::parse(in);
  const int v = cfg.value("version", 0);
  if (v != kConfigVersion)
    throw CLI::ValidationError("config version " + std::to_string(v) + " unsupported (want " +
                               std::to_string(kConfigVersion) + ")");
  return cfg;
}

void ensure_out(const std::string& dir) { std::filesystem::create_directories(dir); }

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

struct ClassifyRow {
  std::string label;
  SdeSpec spec;
  Interval interval{0.5, 2.0};
  double t0 = 0.5;
  std::vector<TheoremId> theorems{TheoremId::pointwise, TheoremId::sup, TheoremId::lp};
};

std::vector<ClassifyRow> default_classify_battery() {
  std::vector<ClassifyRow> rows;
  for (double delta : {0.5, 1.0, 2.0, 5.0})
    for (double beta : {0.0, 1.0}) {
      ClassifyRow r;
      r.label = "cir(delta=" + std::to_string(delta).substr(0, 3) +
                ",beta=" + std::to_string(beta).substr(0, 1) + ")";
      r.spec = make_cir(delta, beta);
      rows.push_back(r);
    }
  rows.push_back({"gbm(0.5,1)", make_gbm(0.5, 1.0)});
  rows.push_back({"quintic", make_quintic()});
  rows.push_back({"sgn_drift", make_sgn_drift(), Interval{0.5, 2.0}});
  rows.push_back({"sgn_drift_plain", make_sgn_drift_plain(), Interval{0.5, 2.0}});
  return rows;
}

int run_classify(const std::string& config, const std::string& out_dir, bool dry_run) {
  std::vector<ClassifyRow> rows;
  if (config.empty()) {
    rows = default_classify_battery();
  } else {
    const json cfg = load_config(config);
    for (const json& rj : cfg.at("classify")) {
      ClassifyRow r;
      r.spec = spec_from_json(rj);
      r.label = rj.value("label", r.spec.name);
      if (rj.contains("interval"))
        r.interval = {rj["interval"].at(0).get<double>(), rj["interval"].at(1).get<double>()};
      r.t0 = rj.value("t0", 0.5);
      if (rj.contains("theorems")) {
        r.theorems.clear();
        for (const json& t : rj["theorems"]) r.theorems.push_back(theorem_from_string(t.get<std::string>()));
      }
      rows.push_back(r);
    }
  }

  if (dry_run) {
    std::printf("classify plan: %zu equation(s)\n", rows.size());
    for (const ClassifyRow& r : rows)
      std::printf("  %-20s on (%g, %g), t0 = %g, %zu theorem(s)\n", r.label.c_str(),
                  r.interval.lo, r.interval.hi, r.t0, r.theorems.size());
    return 0;
  }

  json out = json::array();
  std::printf("%-22s %-10s %-10s %s\n", "equation", "theorem", "verdict", "detail");
  for (const ClassifyRow& r : rows)
    for (TheoremId th : r.theorems) {
      const ConditionReport rep = check_conditions(r.spec, th, r.interval, r.t0);
      std::printf("%-22s %-10s %-10s %s\n", r.label.c_str(), to_string(th),
                  to_string(rep.verdict), rep.detail.c_str());
      out.push_back({{"equation", r.label},
                     {"theorem", to_string(th)},
                     {"verdict", to_string(rep.verdict)},
                     {"interval", {rep.interval.lo, rep.interval.hi}},
                     {"t0", rep.t0},
                     {"min_abs_diffusion", rep.min_abs_diffusion},
                     {"min_abs_gap", rep.min_abs_gap},
                     {"detail", rep.detail}});
    }
  if (!out_dir.empty()) {
    ensure_out(out_dir);
    std::ofstream f(out_dir + "/classify.json");
    f << out.dump(2) << "\n";
    std::printf("wrote %s/classify.json\n", out_dir.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// rates
// ---------------------------------------------------------------------------

struct Experiment {
  SdeSpec spec;
  RatePlan plan;
};

Experiment packaged_experiment(const std::string& name) {
  Experiment e;
  e.plan.label = name;
  if (name == "gbm_milstein_endpoint") {
    e.spec = make_gbm(0.5, 1.0);
    e.plan.scheme = {SchemeId::milstein, 0};
    e.plan.metric = {MetricKind::endpoint, 1.0, 1};
    e.plan.target = -1.0;
    e.plan.band = 0.15;
  } else if (name == "cir_delta5_endpoint") {
    e.spec = make_cir(5.0, 1.0);
    e.plan.scheme = {SchemeId::drift_implicit_sqrt, 0};
    e.plan.metric = {MetricKind::endpoint, 1.0, 2048};
    e.plan.target = -1.0;
    e.plan.band = 0.25;
  } else if (name == "quintic_tamed_milstein_endpoint") {
    e.spec = make_quintic();
    e.plan.scheme = {SchemeId::tamed_milstein, 0};
    e.plan.metric = {MetricKind::endpoint, 1.0, 2048};
    e.plan.target = -1.0;
    e.plan.band = 0.25;
  } else if (name == "quintic_tamed_euler_l1") {
    e.spec = make_quintic();
    e.plan.scheme = {SchemeId::tamed_euler, 0};
    e.plan.metric = {MetricKind::lp, 1.0, 1024};
    e.plan.M = 2000;
    e.plan.target = -0.5;
    e.plan.band = 0.15;
    e.plan.ref_multiplier = 128;
  } else if (name == "quintic_tamed_euler_sup") {
    e.spec = make_quintic();
    e.plan.scheme = {SchemeId::tamed_euler, 0};
    e.plan.metric = {MetricKind::sup, 1.0, 1024};
    e.plan.M = 2000;
    e.plan.target = -0.5;
    e.plan.band = 0.15;
    e.plan.log_corrected = true;
    e.plan.ref_multiplier = 256;
  } else if (name == "sgn_drift_euler_l1") {
    e.spec = make_sgn_drift();
    e.plan.scheme = {SchemeId::euler, 0};
    e.plan.metric = {MetricKind::lp, 1.0, 1024};
    e.plan.M = 2000;
    e.plan.target = -0.5;
    e.plan.band = 0.15;
    e.plan.ref_multiplier = 128;
  } else {
    throw CLI::ValidationError("unknown packaged experiment '" + name + "'");
  }
  return e;
}

const std::vector<std::string> kPackagedNames{
    "gbm_milstein_endpoint",         "cir_delta5_endpoint", "quintic_tamed_milstein_endpoint",
    "quintic_tamed_euler_l1",        "quintic_tamed_euler_sup", "sgn_drift_euler_l1"};

std::vector<Experiment> resolve_experiments(const std::vector<std::string>& names,
                                            const std::string& config) {
  std::vector<Experiment> exps;
  const auto add_named = [&exps](const std::string& n) {
    if (n == "quintic_all_metrics") {
      exps.push_back(packaged_experiment("quintic_tamed_milstein_endpoint"));
      exps.push_back(packaged_experiment("quintic_tamed_euler_l1"));
      exps.push_back(packaged_experiment("quintic_tamed_euler_sup"));
    } else {
      exps.push_back(packaged_experiment(n));
    }
  };
  for (const std::string& n : names) add_named(n);
  if (!config.empty()) {
    const json cfg = load_config(config);
    for (const json& ej : cfg.value("experiments", json::array())) {
      if (ej.contains("packaged")) {
        add_named(ej["packaged"].get<std::string>());
        continue;
      }
      Experiment e;
      e.spec = spec_from_json(ej.at("spec"));
      e.plan.label = ej.value("label", e.spec.name);
      e.plan.scheme = {scheme_from_string(ej.at("scheme").get<std::string>()), 0};
      e.plan.metric = metric_from_json(ej.value("metric", json::object()));
      if (ej.contains("ns")) e.plan.ns = ej["ns"].get<std::vector<int>>();
      e.plan.M = ej.value("M", e.plan.M);
      e.plan.target = ej.value("target", e.plan.target);
      e.plan.band = ej.value("band", e.plan.band);
      e.plan.log_corrected = ej.value("log_corrected", false);
      e.plan.ref_multiplier = ej.value("ref_multiplier", e.plan.ref_multiplier);
      e.plan.relax_gate = ej.value("relax_gate", false);
      exps.push_back(e);
    }
  }
  return exps;
}

void write_report(const std::string& out_dir, const RateReport& rep) {
  ensure_out(out_dir);
  const std::string base = out_dir + "/" + rep.label;
  json j{{"label", rep.label},
         {"spec", rep.spec_name},
         {"scheme", rep.scheme},
         {"metric", rep.metric},
         {"ns", rep.ns},
         {"means", rep.means},
         {"ses", rep.ses},
         {"slope", rep.fit.slope},
         {"slope_se", rep.fit.slope_se},
         {"slope_ci", {rep.fit.slope_lo, rep.fit.slope_hi}},
         {"intercept", rep.fit.intercept},
         {"plain_slope", rep.plain_fit.slope},
         {"log_corrected", rep.log_corrected},
         {"target", rep.target},
         {"band", rep.band},
         {"within", rep.within},
         {"gate_ok", rep.gate_ok},
         {"gate_factor", std::isfinite(rep.gate_factor) ? json(rep.gate_factor) : json("inf")},
         {"note", rep.note},
         {"M", rep.M},
         {"seed", rep.seed},
         {"runtime_seconds", rep.runtime_seconds}};
  std::ofstream(base + ".json") << j.dump(2) << "\n";

  std::ofstream csv(base + ".csv");
  csv << "n,mean,se,M,seed\n";
  for (std::size_t i = 0; i < rep.ns.size(); ++i)
    csv << rep.ns[i] << "," << rep.means[i] << "," << rep.ses[i] << "," << rep.M << ","
        << rep.seed << "\n";

  std::ofstream dat(base + ".dat");
  dat << "# n  mean_error   (" << rep.label << ")\n";
  for (std::size_t i = 0; i < rep.ns.size(); ++i)
    dat << rep.ns[i] << " " << rep.means[i] << "\n";
}

int run_rates(const std::vector<std::string>& names, const std::string& config,
              const std::string& out_dir, std::uint64_t seed, int jobs, bool dry_run) {
  std::vector<Experiment> exps = resolve_experiments(names, config);
  if (exps.empty()) {
    std::printf("no experiments selected; packaged names:\n");
    for (const std::string& n : kPackagedNames) std::printf("  %s\n", n.c_str());
    std::printf("  quintic_all_metrics (bundle)\n");
    return 1;
  }
  if (dry_run) {
    std::printf("rates plan: %zu experiment(s), seed %llu, jobs %d\n", exps.size(),
                static_cast<unsigned long long>(seed), jobs);
    for (const Experiment& e : exps)
      std::printf("  %-34s %s / %s / %s, M=%d, target %g +/- %g, ref x%d%s\n",
                  e.plan.label.c_str(), e.spec.name.c_str(), to_string(e.plan.scheme.id),
                  to_string(e.plan.metric.kind), e.plan.M, e.plan.target, e.plan.band,
                  e.plan.ref_multiplier, e.plan.log_corrected ? ", log-corrected" : "");
    return 0;
  }
  bool all_ok = true;
  for (Experiment& e : exps) {
    e.plan.jobs = jobs;  // results are independent of the job count
    const RateReport rep = rate_experiment(e.spec, e.plan, seed);
    const bool ok = rep.within && rep.gate_ok;
    all_ok = all_ok && ok;
    std::printf("[%s] %-34s slope %+.3f (target %g +/- %g), gate %s, %.1fs\n",
                ok ? "ok" : "FAIL", rep.label.c_str(), rep.fit.slope, rep.target, rep.band,
                rep.gate_ok ? "ok" : "FAIL", rep.runtime_seconds);
    write_report(out_dir, rep);
  }
  std::printf("reports written to %s/\n", out_dir.c_str());
  return all_ok ? 0 : 2;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

bool verify_identities() {
  const SdeSpec q =
      localize(make_quintic(), Interval{0.25, 4.0}, Interval{0.5, 2.0}, Interval{0.75, 1.5});
  for (int k : {8, 32})
    for (std::uint64_t rep = 0; rep < 200; ++rep) {
      PathState p(21, rep * 100 + static_cast<std::uint64_t>(k));
      const AuxIdentity id = aux_identity(build_aux_scheme(q, p, k));
      const double scale = std::max({1.0, std::abs(id.lhs), std::abs(id.rhs)});
      if (std::abs(id.lhs - id.rhs) > 1e-10 * scale) return false;
    }
  // zero-gap equation: the correction process vanishes
  const SdeSpec g = make_gbm(0.6, 1.1);
  PathState pg(22, 0);
  const AuxState st = build_aux_scheme(g, pg, 16);
  for (std::size_t l = 0; l < st.aux.size(); ++l)
    if (std::abs(st.aux[l] - st.weights.x[l]) > 1e-12) return false;
  return true;
}

bool verify_coupling() {
  // near the cutoff: exit and bitwise agreement must be the same event
  const SdeSpec q = make_quintic();
  const Interval inner{0.2, 4.0};
  const SdeSpec loc = localize(q, Interval{0.05, 8.0}, Interval{0.198, 4.02}, inner);
  int stays = 0, exits = 0;
  for (std::uint64_t rep = 0; rep < 300; ++rep) {
    PathState p(31, rep);
    const CouplingResult res = coupled_simulate(q, loc, inner, {SchemeId::tamed_euler, 64}, p);
    if (res.stayed != res.full_agreement) return false;
    res.stayed ? ++stays : ++exits;
  }
  if (stays == 0 || exits == 0) return false;
  // far from the cutoff: coupling is total
  const SdeSpec c = make_cir(5.0, 1.0, 2.0, 5.0);
  const SdeSpec cl = localize(c, Interval{1e-4, 1e5}, Interval{1e-3, 1e4}, Interval{1e-2, 1e3});
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    PathState p(32, rep);
    const CouplingResult res =
        coupled_simulate(c, cl, Interval{1e-2, 1e3}, {SchemeId::euler, 32}, p);
    if (!res.stayed || !res.full_agreement) return false;
  }
  return true;
}

bool verify_gaussian() {
  std::uint64_t s = 40;
  for (double eps : {0.1, 0.5, 0.9})
    for (double sigma : {1.0, 2.0})
      for (double mu : {0.0, 3.0})
        if (!anderson_tail_check(mu, sigma, sigma, eps, 20000, ++s).pass) return false;
  const std::vector<double> grid{1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01};
  return bridge_l1_passing_constant(8, 0.1, 10000, 41, grid) > 0.0;
}

bool verify_oracle() {
  const int reps = 20000;
  // bridge midpoint variance = 1/4
  double s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    PathState p(51, static_cast<std::uint64_t>(r));
    const double w1 = p.evaluate(1.0);
    const double cc = p.evaluate(0.5) - 0.5 * w1;
    s2 += cc * cc;
  }
  if (std::abs(s2 / reps - 0.25) > 3.0 * 0.25 * std::sqrt(2.0 / reps)) return false;
  // span time-integral variance = h^3 / 12
  const double h = 1.0 / 64.0;
  double s2i = 0.0;
  int ndraws = 0;
  for (int r = 0; r < 400; ++r) {
    PathState p(52, static_cast<std::uint64_t>(r));
    for (int j = 1; j <= 64; ++j) p.evaluate(j * h);
    for (int j = 0; j < 64; ++j) {
      const double d = p.span_time_integral(j * h, (j + 1) * h);
      s2i += d * d;
      ++ndraws;
    }
  }
  const double truth = h * h * h / 12.0;
  if (std::abs(s2i / ndraws - truth) > 3.0 * truth * std::sqrt(2.0 / ndraws)) return false;
  // covariance of out-of-order queries = min(s, t)
  const std::vector<double> ts{0.7, 0.3, 1.2, 0.5};
  std::vector<std::vector<double>> w(4, std::vector<double>(reps));
  for (int r = 0; r < reps; ++r) {
    PathState p(53, static_cast<std::uint64_t>(r));
    for (std::size_t i = 0; i < 4; ++i) w[i][static_cast<std::size_t>(r)] = p.evaluate(ts[i]);
  }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i; j < 4; ++j) {
      std::vector<double> prod(reps);
      for (int r = 0; r < reps; ++r)
        prod[static_cast<std::size_t>(r)] =
            w[i][static_cast<std::size_t>(r)] * w[j][static_cast<std::size_t>(r)];
      const MeanSe ms = mean_se(prod);
      if (std::abs(ms.mean - std::min(ts[i], ts[j])) > 3.0 * ms.se) return false;
    }
  return true;
}

int run_verify(const std::string& suite) {
  struct Entry {
    const char* name;
    bool (*fn)();
  };
  const std::vector<Entry> suites{{"identities", verify_identities},
                                  {"coupling", verify_coupling},
                                  {"gaussian", verify_gaussian},
                                  {"oracle", verify_oracle}};
  int fails = 0, ran = 0;
  for (const Entry& e : suites) {
    if (!suite.empty() && suite != e.name) continue;
    ++ran;
    const bool ok = e.fn();
    std::printf("[%s] %s\n", ok ? "ok" : "FAIL", e.name);
    if (!ok) ++fails;
  }
  if (ran == 0) {
    std::printf("unknown suite '%s' (choose identities|coupling|gaussian|oracle)\n",
                suite.c_str());
    return 1;
  }
  return fails == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sdelab: strong-approximation laboratory for scalar SDEs"};
  app.require_subcommand(1);

  std::string config, out_dir = "out", suite;
  std::uint64_t seed = 1;
  int jobs = 1;
  bool dry_run = false;
  std::vector<std::string> experiments;

  app.add_option("--config", config, "JSON config file (schema version 1)");
  app.add_option("--seed", seed, "base RNG seed");
  app.add_option("--jobs", jobs, "worker threads (results do not depend on this)");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--dry-run", dry_run, "print the resolved plan without sampling");

  CLI::App* classify = app.add_subcommand("classify", "theorem-condition verdicts per equation");
  classify->fallthrough();
  CLI::App* rates = app.add_subcommand("rates", "strong-error rate experiments");
  rates->fallthrough();
  rates->add_option("--experiment", experiments, "packaged experiment name (repeatable)");
  CLI::App* verify = app.add_subcommand("verify", "fixed-seed invariant suites");
  verify->fallthrough();
  verify->add_option("suite", suite, "identities|coupling|gaussian|oracle (default: all)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(classify)) return run_classify(config, out_dir, dry_run);
    if (app.got_subcommand(rates))
      return run_rates(experiments, config, out_dir, seed, jobs, dry_run);
    if (app.got_subcommand(verify)) return run_verify(suite);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
