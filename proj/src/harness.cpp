#include "cbus/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "cbus/json_io.hpp"
#include "cbus/oracle.hpp"

namespace cbus {

int thread_cap() {
  if (const char* env = std::getenv("CBUS_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(n, thread_cap());
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.T < 8) throw ConfigError("config: T must be >= 8");
  if (cfg.replications < 1) throw ConfigError("config: replications must be >= 1");
  if (!cfg.generator && cfg.instance_path.empty()) {
    throw ConfigError("config: missing instance (generator spec or file path)");
  }
}

namespace {

constexpr char kCsvHeader[] =
    "t,context,action,reward,xi,z,inst_reg_r,inst_reg_c,cum_reg_r,cum_reg_c,"
    "n_surviving,active_mu,lambda";

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  out += buf;
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  os << kCsvHeader << '\n';
  std::string line;
  for (const auto& r : traj.rows) {
    line.clear();
    line += std::to_string(r.t);
    line += ',';
    line += std::to_string(r.context);
    line += ',';
    line += std::to_string(r.action);
    line += ',';
    append_double(line, r.reward);
    line += ',';
    line += r.xi ? '1' : '0';
    line += ',';
    line += r.z ? '1' : '0';
    line += ',';
    append_double(line, r.inst_reg_r);
    line += ',';
    append_double(line, r.inst_reg_c);
    line += ',';
    append_double(line, r.cum_reg_r);
    line += ',';
    append_double(line, r.cum_reg_c);
    line += ',';
    line += std::to_string(r.n_surviving);
    line += ',';
    append_double(line, r.active_mu);
    line += ',';
    append_double(line, r.lambda);
    line += '\n';
    os << line;
  }
}

Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) {
    throw std::runtime_error("trajectory csv: missing or unexpected header");
  }
  Trajectory traj;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    TrajectoryRow r;
    int xi = 0, z = 0;
    const int got = std::sscanf(
        line.c_str(),
        "%lld,%d,%d,%lf,%d,%d,%lf,%lf,%lf,%lf,%d,%lf,%lf", &r.t, &r.context,
        &r.action, &r.reward, &xi, &z, &r.inst_reg_r, &r.inst_reg_c,
        &r.cum_reg_r, &r.cum_reg_c, &r.n_surviving, &r.active_mu, &r.lambda);
    if (got != 13) throw std::runtime_error("trajectory csv: malformed row");
    r.xi = xi != 0;
    r.z = z != 0;
    if (r.z) ++traj.total_z;
    traj.rows.push_back(r);
  }
  return traj;
}

namespace {

SummaryStat stat_of(std::span<const double> xs) {
  SummaryStat s;
  const int n = static_cast<int>(xs.size());
  if (n == 0) return s;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  s.mean = mean;
  if (n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    s.ci95 = 1.96 * std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
  }
  return s;
}

}  // namespace

ExperimentSummary summarize(std::span<const Trajectory> trajectories,
                            long long T) {
  ExperimentSummary s;
  s.replications = static_cast<int>(trajectories.size());
  s.T = T;
  std::vector<double> rr, rc, zz, qq;
  for (const auto& t : trajectories) {
    rr.push_back(t.final_cum_reg_r());
    rc.push_back(t.final_cum_reg_c());
    zz.push_back(static_cast<double>(t.total_z));
    qq.push_back(static_cast<double>(t.total_queries));
  }
  s.final_cum_reg_r = stat_of(rr);
  s.final_cum_reg_c = stat_of(rc);
  s.total_z = stat_of(zz);
  s.total_queries = stat_of(qq);
  return s;
}

Instance load_instance(const ExperimentConfig& cfg) {
  if (cfg.generator) return make_instance(*cfg.generator);
  std::ifstream in(cfg.instance_path);
  if (!in) throw ConfigError("config: cannot open instance file " + cfg.instance_path);
  return instance_from_json(nlohmann::json::parse(in));
}

Trajectory run_single(const Instance& inst, const ExperimentConfig& cfg,
                      std::uint64_t seed) {
  SplitMix64 rng(seed);
  switch (cfg.algo) {
    case AlgoKind::efbo:
      return run_efbo(inst, cfg.efbo_cfg, cfg.T, rng);
    case AlgoKind::corral:
      return run_corral(inst, cfg.estimator_cfg, cfg.corral_cfg, cfg.T, rng);
  }
  throw ConfigError("config: unknown algorithm");
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg,
                                 std::vector<Trajectory>* out_trajectories) {
  validate_config(cfg);
  const Instance inst = load_instance(cfg);

  std::vector<Trajectory> trajs(cfg.replications);
  parallel_for(cfg.replications, [&](int i) {
    trajs[i] = run_single(inst, cfg, cfg.seed + static_cast<std::uint64_t>(i));
  });

  const ExperimentSummary summary = summarize(trajs, cfg.T);
  if (!cfg.out.empty()) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw ConfigError("config: cannot create output directory " + cfg.out);
    for (int i = 0; i < cfg.replications; ++i) {
      const auto path = fs::path(cfg.out) /
                        ("rep_" + std::to_string(cfg.seed + i) + ".csv");
      std::ofstream os(path);
      if (!os) throw ConfigError("config: cannot write " + path.string());
      write_trajectory_csv(trajs[i], os);
    }
    std::ofstream js(fs::path(cfg.out) / "summary.json");
    js << summary_to_json(summary).dump(2) << '\n';
  }
  if (out_trajectories) *out_trajectories = std::move(trajs);
  return summary;
}

FitResult fit_scaling_exponent(
    std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) {
    throw std::invalid_argument("fit_scaling_exponent: need at least 3 points");
  }
  std::vector<std::pair<double, double>> logs;
  logs.reserve(points.size());
  for (const auto& [x, y] : points) {
    if (x <= 0.0 || y <= 0.0) {
      throw std::invalid_argument("fit_scaling_exponent: values must be positive");
    }
    logs.emplace_back(std::log(x), std::log(y));
  }
  const double n = static_cast<double>(logs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : logs) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  FitResult f;
  const double denom = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / n;
  for (const auto& [x, y] : logs) {
    const double e = y - (f.intercept + f.slope * x);
    ss_res += e * e;
    ss_tot += (y - ybar) * (y - ybar);
  }
  f.r2 = ss_tot < 1e-30 ? 1.0 : 1.0 - ss_res / ss_tot;
  return f;
}

double linear_slope(std::span<const std::pair<double, double>> points) {
  const double n = static_cast<double>(points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

// Uniform exploration for t0 rounds on rewards only, then commit to the
// importance-weighted reward argmax; constraint feedback is never consulted.
Trajectory run_never_probe(const Instance& inst, long long T, long long t0,
                           SplitMix64& rng) {
  const RegretAccountant acct(inst);
  const int k = inst.n_actions();
  Trajectory traj;
  traj.rows.reserve(T);
  double cum_r = 0.0, cum_c = 0.0;
  const RegretPair unif = acct.of_uniform_action();

  std::vector<RewardSample> batch;
  batch.reserve(t0);
  long long t = 1;
  for (; t <= t0 && t <= T; ++t) {
    const int x = rng.categorical(inst.contexts.probs);
    const Feedback fb = env_step(inst, x, rng.next_below(k), false, rng);
    batch.push_back({x, fb.action, fb.reward});
    cum_r += unif.reg_r;
    cum_c += unif.reg_c;
    traj.rows.push_back({t, fb.context, fb.action, fb.reward, fb.xi, fb.z,
                         unif.reg_r, unif.reg_c, cum_r, cum_c,
                         inst.n_policies(), 0.0, 0.0});
  }
  int best = 0;
  double best_val = -1.0;
  for (int p = 0; p < inst.n_policies(); ++p) {
    const double v = ips_reward_estimate(batch, inst.policies, p, k);
    if (v > best_val) {
      best_val = v;
      best = p;
    }
  }
  std::vector<double> point(inst.n_policies(), 0.0);
  point[best] = 1.0;
  const RegretPair commit = acct.of_policy_dist(point);
  for (; t <= T; ++t) {
    const int x = rng.categorical(inst.contexts.probs);
    const Feedback fb =
        env_step(inst, x, inst.policies.action(best, x), false, rng);
    cum_r += commit.reg_r;
    cum_c += commit.reg_c;
    traj.rows.push_back({t, fb.context, fb.action, fb.reward, fb.xi, fb.z,
                         commit.reg_r, commit.reg_c, cum_r, cum_c,
                         inst.n_policies(), 0.0, 0.0});
  }
  return traj;
}

// Plays a fixed policy for the whole horizon.
Trajectory run_fixed_policy(const Instance& inst, long long T, int policy,
                            SplitMix64& rng) {
  const RegretAccountant acct(inst);
  std::vector<double> point(inst.n_policies(), 0.0);
  point[policy] = 1.0;
  const RegretPair reg = acct.of_policy_dist(point);
  Trajectory traj;
  traj.rows.reserve(T);
  double cum_r = 0.0, cum_c = 0.0;
  for (long long t = 1; t <= T; ++t) {
    const int x = rng.categorical(inst.contexts.probs);
    const Feedback fb =
        env_step(inst, x, inst.policies.action(policy, x), false, rng);
    cum_r += reg.reg_r;
    cum_c += reg.reg_c;
    traj.rows.push_back({t, fb.context, fb.action, fb.reward, fb.xi, fb.z,
                         reg.reg_r, reg.reg_c, cum_r, cum_c, inst.n_policies(),
                         0.0, 0.0});
  }
  return traj;
}

Trajectory run_variant(const Instance& inst, const TradeoffVariant& v,
                       long long T, std::uint64_t seed) {
  SplitMix64 rng(seed);
  switch (v.kind) {
    case TradeoffVariant::never_probe:
      return run_never_probe(inst, T, v.t0, rng);
    case TradeoffVariant::commit_pi2:
      return run_fixed_policy(inst, T, 1, rng);
    case TradeoffVariant::efbo: {
      EfboConfig cfg;
      cfg.T0 = v.t0;
      return run_efbo(inst, cfg, T, rng);
    }
  }
  throw std::logic_error("run_variant: unknown kind");
}

}  // namespace

std::vector<TradeoffVariant> default_tradeoff_variants(long long T) {
  const long long t0 = static_cast<long long>(
      std::ceil(std::pow(static_cast<double>(T), 2.0 / 3.0)));
  return {
      {"never_probe", TradeoffVariant::never_probe, t0},
      {"commit_pi2", TradeoffVariant::commit_pi2, 0},
      {"efbo_half_budget", TradeoffVariant::efbo, t0 / 2},
      {"efbo", TradeoffVariant::efbo, t0},
      {"efbo_double_budget", TradeoffVariant::efbo, std::min(t0 * 2, T / 4)},
  };
}

std::vector<TradeoffRow> tradeoff_sweep(std::span<const double> gamma_grid,
                                        double c, long long T,
                                        std::span<const TradeoffVariant> variants,
                                        int replications,
                                        std::uint64_t seed) {
  std::vector<TradeoffRow> rows;
  for (double gamma : gamma_grid) {
    for (const auto& variant : variants) {
      TradeoffRow row;
      row.variant = variant.name;
      row.gamma = gamma;
      double worst_r = -std::numeric_limits<double>::infinity();
      double worst_c = -std::numeric_limits<double>::infinity();
      for (UserStrategy strat : {UserStrategy::S1, UserStrategy::S2}) {
        const Instance inst =
            make_lower_bound({c, gamma, strat}, gamma / 2.0);
        std::vector<double> final_r(replications), final_c(replications);
        std::vector<double> mean_curve(T, 0.0);
        std::vector<std::vector<double>> curves(replications);
        parallel_for(replications, [&](int i) {
          const Trajectory traj = run_variant(
              inst, variant, T, seed + static_cast<std::uint64_t>(i));
          final_r[i] = traj.final_cum_reg_r();
          final_c[i] = traj.final_cum_reg_c();
          std::vector<double> curve(T);
          for (long long t = 0; t < T; ++t) curve[t] = traj.rows[t].cum_reg_c;
          curves[i] = std::move(curve);
        });
        for (int i = 0; i < replications; ++i) {
          for (long long t = 0; t < T; ++t) mean_curve[t] += curves[i][t];
        }
        for (long long t = 0; t < T; ++t) mean_curve[t] /= replications;
        double mr = 0.0, mc = 0.0;
        for (int i = 0; i < replications; ++i) {
          mr += final_r[i];
          mc += final_c[i];
        }
        mr /= replications;
        mc /= replications;
        worst_r = std::max(worst_r, mr);
        worst_c = std::max(worst_c, mc);
        if (strat == UserStrategy::S2) {
          row.reg_c_s2 = mc;
          std::vector<std::pair<double, double>> pts;
          pts.reserve(T);
          for (long long t = 0; t < T; ++t) {
            pts.emplace_back(static_cast<double>(t + 1), mean_curve[t]);
          }
          row.regc_slope_s2 = linear_slope(pts);
        }
      }
      row.reg_r_worst = worst_r;
      row.reg_c_worst = worst_c;
      row.product = worst_r * std::sqrt(std::max(row.reg_c_s2, 0.0));
      row.regr_rate_worst = worst_r / static_cast<double>(T);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace cbus
