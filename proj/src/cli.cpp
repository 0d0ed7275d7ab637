#include "ncmac/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ncmac/constructions.hpp"
#include "ncmac/errors.hpp"
#include "ncmac/io.hpp"
#include "ncmac/metrics.hpp"
#include "ncmac/optimizer.hpp"
#include "ncmac/parallel.hpp"
#include "ncmac/pep.hpp"
#include "ncmac/power.hpp"
#include "ncmac/simulator.hpp"

namespace ncmac::cli {

using nlohmann::json;

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

namespace {

double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidInput("bad " + what + " '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw InvalidInput("bad " + what + " '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::vector<int> broadcast(const std::vector<int>& v, int K, const std::string& name) {
  if (v.size() == 1) return std::vector<int>(K, v[0]);
  if (static_cast<int>(v.size()) != K)
    throw InvalidInput("--" + name + " needs one value or one per user (" + std::to_string(K) + ")");
  return v;
}

std::vector<std::size_t> sizes_of(const std::vector<int>& bits) {
  std::vector<std::size_t> s;
  for (int b : bits) {
    if (b < 1 || b > 20) throw InvalidInput("bits per user must be in [1, 20]");
    s.push_back(std::size_t{1} << b);
  }
  return s;
}

void emit_json(const json& j, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << j.dump(2) << '\n';
}

template <class F>
void emit_text(const std::string& path, std::ostream& out, F&& write) {
  if (path.empty()) {
    write(out);
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  write(f);
}

struct Shape {
  int T = 0, K = 1;
  std::vector<int> M{1}, bits{1};
  double snr_db = 0.0;
  std::uint64_t seed = 1;
};

void add_shape(CLI::App* sub, Shape& s) {
  sub->add_option("--T", s.T, "coherence time")->required()->check(CLI::PositiveNumber);
  sub->add_option("--K", s.K, "number of users")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--M", s.M, "antennas per user (one value or one per user)")->capture_default_str();
  sub->add_option("--bits", s.bits, "bits per user and block (one value or one per user)")->required();
  sub->add_option("--snr-db", s.snr_db, "per-user power budget P in dB")->required();
  sub->add_option("--seed", s.seed, "random seed")->capture_default_str();
}

ChannelConfig config_of(Shape& s) {
  ChannelConfig c;
  c.T = s.T;
  c.K = s.K;
  c.M = broadcast(s.M, s.K, "M");
  s.bits = broadcast(s.bits, s.K, "bits");
  c.P = db_to_linear(s.snr_db);
  c.N = 1;
  c.validate();
  return c;
}

UstmMode ustm_mode(const std::string& s) { return s == "random" ? UstmMode::Random : UstmMode::Optimized; }

JointConstellation construct(const std::string& type, Shape& shape, const std::string& strategy,
                             const std::string& ustm, int qam, std::ostream& err) {
  const ChannelConfig cfg = config_of(shape);
  const auto sizes = sizes_of(shape.bits);
  const bool equal_m = std::all_of(cfg.M.begin(), cfg.M.end(), [&](int m) { return m == cfg.M[0]; });
  std::vector<std::string> warnings;
  JointConstellation c;
  if (type == "random-ustm") {
    c.config = cfg;
    for (int k = 0; k < cfg.K; ++k) {
      Rng rng = Rng::stream(shape.seed, static_cast<std::uint64_t>(k));
      UserConstellation u = ustm_single_user(cfg.T, cfg.M[k], sizes[k], UstmMode::Random, rng);
      const double g = std::sqrt(cfg.P * cfg.T / cfg.M[k]);
      for (auto& x : u.symbols) x *= g;
      u.power = cfg.P;
      u.bits = shape.bits[k];
      c.users.push_back(std::move(u));
    }
  } else if (type == "partition") {
    if (!equal_m) throw InvalidInput("partition construction needs equal M per user");
    Rng rng = Rng::stream(shape.seed, 0);
    std::size_t total = 0;
    for (auto s : sizes) total += s;
    const auto pool = ustm_single_user(cfg.T, cfg.M[0], total, ustm_mode(ustm), rng, &warnings).symbols;
    c = partition_construct(pool, cfg, sizes,
                            strategy == "random" ? PartitionStrategy::Random : PartitionStrategy::GreedySwap, rng);
  } else if (type == "precode-1" || type == "precode-2") {
    if (!equal_m) throw InvalidInput("precoding construction needs equal M per user");
    const auto pre = build_precoder(cfg.T, cfg.K, cfg.M[0], type == "precode-1" ? PrecoderType::I : PrecoderType::II);
    std::vector<std::vector<CMatrix>> sets;
    for (int k = 0; k < cfg.K; ++k) {
      Rng rng = Rng::stream(shape.seed, static_cast<std::uint64_t>(k));
      sets.push_back(ustm_single_user(static_cast<int>(pre[k].U.cols()), cfg.M[0], sizes[k], ustm_mode(ustm), rng,
                                      &warnings)
                         .symbols);
    }
    c = precode_construct(sets, pre, std::vector<double>(cfg.K, cfg.P), cfg);
  } else if (type == "pilot") {
    if (!equal_m) throw InvalidInput("pilot construction needs equal M per user");
    const int M = cfg.M[0];
    if (qam == 0) {
      const int data = (cfg.T - cfg.K * M) * M;
      if (data <= 0) throw InvalidInput("pilot construction needs T > K M");
      for (int b : shape.bits)
        if (b != shape.bits[0]) throw InvalidInput("pilot construction needs equal bits per user");
      if (shape.bits[0] % data != 0)
        throw InvalidInput("bits must be a multiple of the " + std::to_string(data) + " data entries, or pass --qam");
      qam = 1 << (shape.bits[0] / data);
    }
    c = pilot_based(cfg.T, cfg.K, M, qam, cfg.P);
  } else {
    throw InvalidInput("unknown construction type '" + type + "'");
  }
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  return c;
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& s, std::size_t size) {
  const auto parts = split(s, ',');
  if (parts.size() != 2) throw InvalidInput("--pair expects i,j");
  std::size_t ij[2];
  for (int t = 0; t < 2; ++t) {
    const double v = parse_number(parts[t], "pair index");
    if (v < 0 || v != std::floor(v) || v >= static_cast<double>(size))
      throw InvalidInput("pair index '" + parts[t] + "' outside [0, " + std::to_string(size) + ")");
    ij[t] = static_cast<std::size_t>(v);
  }
  if (ij[0] == ij[1]) throw InvalidInput("--pair needs two distinct symbols");
  return {ij[0], ij[1]};
}

}  // namespace

std::vector<double> parse_grid(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() == 1) return {parse_number(parts[0], "SNR value")};
  if (parts.size() != 3) throw InvalidInput("SNR grid must be a single value or a:step:b");
  const double a = parse_number(parts[0], "SNR start"), step = parse_number(parts[1], "SNR step"),
               b = parse_number(parts[2], "SNR end");
  if (step <= 0) throw InvalidInput("SNR step must be positive");
  if (b < a) throw InvalidInput("SNR grid end lies below its start");
  const double span = (b - a) / step;
  if (span > 1e5) throw InvalidInput("SNR grid has too many points");
  const long n = static_cast<long>(std::floor(span + 1e-9));
  std::vector<double> g;
  for (long i = 0; i <= n; ++i) g.push_back(a + static_cast<double>(i) * step);
  return g;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint constellation design for the noncoherent MIMO multiple-access channel", "ncmac"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0: all cores)")->capture_default_str()->check(CLI::NonNegativeNumber);

  // construct
  auto* cons = app.add_subcommand("construct", "build a structured or random constellation");
  Shape cshape;
  std::string ctype, cstrategy = "greedy", custm = "optimized", cout_path;
  int cqam = 0;
  cons->add_option("--type", ctype, "construction")
      ->required()
      ->check(CLI::IsMember({"random-ustm", "partition", "precode-1", "precode-2", "pilot"}));
  add_shape(cons, cshape);
  cons->add_option("--strategy", cstrategy, "partition assignment")
      ->capture_default_str()
      ->check(CLI::IsMember({"random", "greedy"}));
  cons->add_option("--ustm", custm, "single-user set for partition and precoding")
      ->capture_default_str()
      ->check(CLI::IsMember({"random", "optimized"}));
  cons->add_option("--qam", cqam, "QAM order for pilot (default from --bits)");
  cons->add_option("--out", cout_path, "constellation JSON")->required();

  // optimize
  auto* opt = app.add_subcommand("optimize", "optimize a constellation by Riemannian conjugate gradient");
  Shape oshape;
  std::string crit, init_text = "random", oout, trace_path;
  OptimizerOptions oopts;
  int oN = 4, cycles = 10;
  bool alternating = false;
  opt->add_option("--criterion", crit, "design criterion")->required()->check(CLI::IsMember({"J", "d", "e", "m1", "m2"}));
  add_shape(opt, oshape);
  opt->add_option("--epsilon", oopts.epsilon, "log-sum-exp smoothing")->capture_default_str();
  opt->add_option("--init", init_text, "initializers, e.g. precoding,partitioning,pilot,random:3")->capture_default_str();
  opt->add_flag("--alternating", alternating, "optimize one user at a time (starts from one random point)");
  opt->add_option("--cycles", cycles, "alternating cycles")->capture_default_str()->check(CLI::PositiveNumber);
  opt->add_option("--max-iters", oopts.max_iters, "CG iterations per run")->capture_default_str();
  opt->add_option("--grad-tol", oopts.grad_tol, "relative gradient tolerance")->capture_default_str();
  opt->add_option("--N", oN, "receive antennas for m2")->capture_default_str()->check(CLI::PositiveNumber);
  opt->add_option("--out", oout, "constellation JSON")->required();
  opt->add_option("--trace", trace_path, "optimizer trace CSV");

  // metrics
  auto* met = app.add_subcommand("metrics", "evaluate design metrics of a saved constellation");
  std::string min_path, kinds_text = "b,J:0.5,d,e,m1,m2:4,coherence", mid, mout;
  std::optional<double> msnr;
  met->add_option("--in", min_path, "constellation JSON")->required();
  met->add_option("--kinds", kinds_text, "comma-separated metrics")->capture_default_str();
  met->add_option("--snr-db", msnr, "rescale to this power budget before evaluating");
  met->add_option("--id", mid, "constellation id column (default: file stem)");
  met->add_option("--out", mout, "CSV output (default: stdout)");

  // pep
  auto* pep = app.add_subcommand("pep", "pairwise error probability of two joint symbols");
  std::string pin, pair_text, method = "closed", pout;
  int pN = 1;
  std::uint64_t ptrials = 1000000, pseed = 1;
  double ps = 0.5;
  pep->add_option("--in", pin, "constellation JSON")->required();
  pep->add_option("--pair", pair_text, "joint flat indices i,j (x_i sent, x_j competing)")->required();
  pep->add_option("--N", pN, "receive antennas")->capture_default_str()->check(CLI::PositiveNumber);
  pep->add_option("--method", method, "computation")
      ->capture_default_str()
      ->check(CLI::IsMember({"mc", "closed", "chernoff", "bounds"}));
  pep->add_option("--trials", ptrials, "Monte Carlo trials")->capture_default_str();
  pep->add_option("--seed", pseed, "random seed")->capture_default_str();
  pep->add_option("--s", ps, "Chernoff parameter")->capture_default_str();
  pep->add_option("--out", pout, "JSON output (default: stdout)");

  // power
  auto* pow_ = app.add_subcommand("power", "optimize per-user transmit powers");
  std::string win, mode = "golden", wmetric = "d", wout;
  std::optional<double> wsnr;
  double wtol = 1e-4;
  pow_->add_option("--in", win, "constellation JSON")->required();
  pow_->add_option("--mode", mode, "search")->capture_default_str()->check(CLI::IsMember({"cubic", "golden", "nelder"}));
  pow_->add_option("--metric", wmetric, "metric to maximize (golden, nelder)")->capture_default_str();
  pow_->add_option("--snr-db", wsnr, "power budget P in dB (default: largest power in the file)");
  pow_->add_option("--tol", wtol, "search tolerance")->capture_default_str();
  pow_->add_option("--out", wout, "JSON output (default: stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo symbol error rate of the joint ML detector");
  std::string sin, grid_text, sout;
  SimPlan plan;
  sim->add_option("--in", sin, "constellation JSON")->required();
  sim->add_option("--N", plan.N, "receive antennas")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--snr-db", grid_text, "SNR grid a:step:b (inclusive) or a single value")->required();
  sim->add_option("--trials", plan.max_trials, "maximum trials per SNR")->capture_default_str();
  sim->add_option("--target-errors", plan.target_errors, "stop after this many errors (0: never)")->capture_default_str();
  sim->add_option("--seed", plan.seed, "random seed")->capture_default_str();
  sim->add_option("--out", sout, "CSV output (default: stdout)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    set_thread_count(threads);
    if (cons->parsed()) {
      const JointConstellation c = construct(ctype, cshape, cstrategy, custm, cqam, err);
      c.validate();
      save_constellation(cout_path, c, {ctype, cshape.snr_db, cshape.seed});
    } else if (opt->parsed()) {
      ChannelConfig cfg = config_of(oshape);
      oopts.seed = oshape.seed;
      oopts.validate();
      const MetricKind kind = crit == "J" ? MetricKind::J(0.5) : crit == "m2" ? MetricKind::m2(oN) : MetricKind::parse(crit);
      std::ofstream trace_file;
      TraceCallback trace;
      int trace_iter = 0;
      if (!trace_path.empty()) {
        trace_file.open(trace_path);
        if (!trace_file) throw Error("cannot open '" + trace_path + "' for writing");
        write_trace_header(trace_file);
        trace = [&](int, double f, double g, double step) { write_trace_row(trace_file, trace_iter++, f, g, step); };
      }
      JointConstellation best;
      if (alternating) {
        const AlternatingResult r = alternating_optimize(kind, cfg, oshape.bits, oopts, cycles, nullptr, trace);
        best = r.constellation;
        out << "alternating cycles=" << r.cycles << " rejected=" << r.rejected_steps
            << " metric=" << format_double(r.metric_trace.back()) << '\n';
      } else {
        const MultiStartResult r = multi_start_optimize(kind, cfg, oshape.bits, InitSpec::parse_list(init_text), oopts, trace);
        for (const auto& w : r.warnings) err << "warning: " << w << '\n';
        for (std::size_t i = 0; i < r.runs.size(); ++i) {
          const auto& run = r.runs[i];
          out << run.label << " initial=" << format_double(run.initial_metric)
              << " final=" << format_double(run.final_metric) << " iters=" << run.iterations << " stop=" << run.stop_reason
              << (i == r.best_run ? " best" : "") << '\n';
        }
        best = r.best;
      }
      for (std::size_t k = 0; k < best.users.size(); ++k) best.users[k].bits = oshape.bits[k];
      save_constellation(oout, best, {kind.label(), oshape.snr_db, oshape.seed});
    } else if (met->parsed()) {
      JointConstellation c = load_constellation(min_path);
      if (msnr) c = scaled_to_budget(c, db_to_linear(*msnr));
      std::vector<MetricReport> reports;
      for (const auto& k : split(kinds_text, ',')) {
        const MetricKind kind = MetricKind::parse(k);
        reports.push_back(evaluate_metric(kind, c));
        for (const auto& d : reports.back().diagnostics) err << "note: " << kind.label() << ": " << d << '\n';
      }
      const std::string id = mid.empty() ? std::filesystem::path(min_path).stem().string() : mid;
      emit_text(mout, out, [&](std::ostream& os) { write_metrics_csv(os, id, reports); });
    } else if (pep->parsed()) {
      const JointConstellation c = load_constellation(pin);
      const auto [i, j] = parse_pair(pair_text, c.size());
      const CMatrix x = c.joint_symbol(i), xp = c.joint_symbol(j);
      json r;
      r["pair"] = {i, j};
      r["N"] = pN;
      r["method"] = method;
      if (method == "closed") {
        const PepResult p = pep_closed_form(x, xp, pN);
        r["value"] = p.value;
        if (p.clamped) r["clamped"] = true;
      } else if (method == "mc") {
        if (ptrials == 0) throw InvalidInput("--trials must be positive");
        Rng rng(pseed);
        const PepResult p = pep_monte_carlo(x, xp, pN, ptrials, rng);
        r["value"] = p.value;
        r["stderr"] = p.std_error;
        r["trials"] = p.trials;
      } else if (method == "chernoff") {
        if (!(ps > 0 && ps < 1)) throw InvalidInput("--s must lie in (0, 1)");
        r["s"] = ps;
        r["value"] = pep_chernoff(x, xp, pN, ps);
      } else {
        const auto [lo, hi] = exponent_bounds(x, xp);
        const double upper = std::min({1.0, std::exp(-pN * lo), pep_chernoff(x, xp, pN, 0.5)});
        r["value"] = {std::exp(-pN * hi), upper};
      }
      emit_json(r, pout, out);
    } else if (pow_->parsed()) {
      const JointConstellation c = load_constellation(win);
      const double P = wsnr ? db_to_linear(*wsnr) : c.config.P;
      const MetricKind kind = MetricKind::parse(wmetric);
      PowerSearchResult res;
      if (mode == "cubic") {
        if (kind.type != MetricKind::Type::D) throw InvalidInput("cubic mode solves the d metric only");
        res = theta_star_enumerate(c, P);
      } else if (mode == "golden") {
        res = theta_golden(kind, c, P, wtol);
      } else {
        NelderMeadOptions nm;
        nm.tol = wtol;
        res = powers_neldermead(kind, c, P, nm);
      }
      for (const auto& d : res.diagnostics) err << "note: " << d << '\n';
      json r;
      r["method"] = res.method;
      if (mode == "nelder")
        r["theta_or_powers"] = res.powers;
      else
        r["theta_or_powers"] = res.theta;
      r["metric"] = mode == "cubic" ? "min_k d_k" : kind.label();
      r["value"] = res.value;
      r["evaluations"] = res.evaluations;
      if (res.flat) r["flat"] = true;
      emit_json(r, wout, out);
    } else if (sim->parsed()) {
      const JointConstellation c = load_constellation(sin);
      plan.constellation = &c;
      plan.snr_db = parse_grid(grid_text);
      if (plan.max_trials == 0) throw InvalidInput("--trials must be positive");
      const SimResult r = simulate_ser(plan);
      for (const auto& d : r.diagnostics) err << "note: " << d << '\n';
      emit_text(sout, out, [&](std::ostream& os) { write_sim_csv(os, r); });
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace ncmac::cli
