#include "ncmac/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "ncmac/errors.hpp"
#include "ncmac/parallel.hpp"

namespace ncmac {

namespace {

constexpr std::uint64_t kBlock = 4096;

}  // namespace

SimResult simulate_ser(const SimPlan& plan) {
  if (!plan.constellation) throw InvalidInput("simulation plan has no constellation");
  if (plan.snr_db.empty()) throw InvalidInput("SNR grid is empty");
  if (plan.max_trials < 1) throw InvalidInput("trials must be at least 1");
  if (plan.N < 1) throw InvalidInput("N must be at least 1");
  const JointConstellation& base = *plan.constellation;
  base.validate();
  SimResult res;
  if (!check_identifiability(base, 1e-9).empty())
    res.diagnostics.push_back("constellation is not identifiable; SER will not vanish at high SNR");
  const std::size_t count = base.size();
  const std::uint64_t blocks = (plan.max_trials + kBlock - 1) / kBlock;
  const std::size_t wave = static_cast<std::size_t>(std::max(1, thread_count()));

  for (std::size_t si = 0; si < plan.snr_db.size(); ++si) {
    const double P = std::pow(10.0, plan.snr_db[si] / 10.0);
    const JointConstellation c = scaled_to_budget(base, P);
    const std::vector<CMatrix> xs = c.joint_symbols();
    const MlDetector det(c, plan.N);
    SimPoint pt;
    pt.snr_db = plan.snr_db[si];
    std::uint64_t next = 0;
    bool stop = false;
    while (next < blocks && !stop) {
      const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(wave, blocks - next));
      std::vector<std::uint64_t> errs(n, 0), runs(n, 0);
      parallel_for(n, [&](std::size_t w) {
        const std::uint64_t b = next + w;
        Rng rng = Rng::stream(plan.seed, si, b);
        MlDetector local = det;  // the detector keeps a scratch buffer
        const std::uint64_t todo = std::min<std::uint64_t>(kBlock, plan.max_trials - b * kBlock);
        std::uint64_t e = 0;
        for (std::uint64_t t = 0; t < todo; ++t) {
          const std::size_t sent = static_cast<std::size_t>(rng.below(count));
          const CMatrix Y = sample_channel_output(xs[sent], plan.N, rng);
          if (local.detect_flat(Y) != sent) ++e;
        }
        errs[w] = e;
        runs[w] = todo;
      });
      for (std::size_t w = 0; w < n && !stop; ++w) {
        pt.errors += errs[w];
        pt.trials += runs[w];
        if (plan.target_errors > 0 && pt.errors >= plan.target_errors) stop = true;
      }
      next += n;
    }
    pt.ser = static_cast<double>(pt.errors) / static_cast<double>(pt.trials);
    pt.std_error = std::sqrt(pt.ser * (1.0 - pt.ser) / static_cast<double>(pt.trials));
    res.points.push_back(pt);
  }
  return res;
}

PepResult simulate_pep_empirical(const CMatrix& x, const CMatrix& xp, int N, std::uint64_t trials,
                                 std::uint64_t seed) {
  if (trials < 1) throw InvalidInput("trials must be at least 1");
  if (x.rows() != xp.rows() || x.cols() != xp.cols()) throw DimensionMismatch("symbols must have equal shape");
  // both candidates through the same detector cache
  JointConstellation c;
  c.config.T = static_cast<int>(x.rows());
  c.config.K = 1;
  c.config.M = {static_cast<int>(x.cols())};
  c.config.N = N;
  c.config.P = 1.0;
  c.users.push_back({{x, xp}, 1.0, -1});
  const MlDetector det(c, N);
  const std::uint64_t blocks = (trials + kBlock - 1) / kBlock;
  std::vector<std::uint64_t> hits(blocks, 0);
  parallel_for(blocks, [&](std::size_t b) {
    Rng rng = Rng::stream(seed, b);
    const std::uint64_t todo = std::min<std::uint64_t>(kBlock, trials - b * kBlock);
    std::uint64_t h = 0;
    for (std::uint64_t t = 0; t < todo; ++t) {
      const CMatrix Y = sample_channel_output(x, N, rng);
      if (det.log_likelihood(Y, 0) <= det.log_likelihood(Y, 1)) ++h;
    }
    hits[b] = h;
  });
  PepResult r;
  r.method = "channel-mc";
  r.trials = trials;
  std::uint64_t total = 0;
  for (auto h : hits) total += h;
  r.value = static_cast<double>(total) / static_cast<double>(trials);
  r.std_error = std::sqrt(r.value * (1.0 - r.value) / static_cast<double>(trials));
  if ((x * x.adjoint() - xp * xp.adjoint()).norm() <= 1e-12 * std::max(1.0, x.squaredNorm()))
    r.diagnostics.push_back("non-identifiable pair");
  return r;
}

}  // namespace ncmac
