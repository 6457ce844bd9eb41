#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>

#include "covflow/config.hpp"
#include "covflow/io.hpp"
#include "covflow/rng.hpp"

namespace covflow {

namespace {

using nlohmann::json;

std::string fmt_i(std::int64_t v) { return std::to_string(v); }

std::string utc_now() {
  std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json fit_to_json(const RateFit& fit) {
  json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["r_squared"] = fit.r_squared;
  j["valid"] = fit.valid;
  if (!fit.note.empty()) j["note"] = fit.note;
  return j;
}

struct Artifacts {
  std::string csv;
  std::string dat;
  json manifest_extra;  // study-specific manifest fields (fits, references)
};

std::optional<InputPair> build_pair(const RunConfig& cfg) {
  if (cfg.c0) {
    if (*cfg.c0 == 0.0) {
      if (cfg.study == "theory") return std::nullopt;  // f table only
      throw ConfigError(
          "config key \"c0\": must be nonzero (orthogonal inputs are outside "
          "the standing assumptions) except for the theory study");
    }
    if (cfg.d < 2)
      throw ConfigError("config key \"d\": must be >= 2 when c0 is given");
    return InputPair::synthetic(*cfg.c0, cfg.d);
  }
  return InputPair::random_unit(cfg.d,
                                rng::derive(cfg.master_seed, 0x70616972ull));
}

StudyParams study_params(const RunConfig& cfg) {
  StudyParams p;
  p.d = cfg.d;
  p.trials = cfg.trials;
  p.seed = cfg.master_seed;
  p.workers = cfg.workers;
  p.flow_step = cfg.step;
  p.series_tol = cfg.tol;
  return p;
}

Artifacts run_theory(const RunConfig& cfg) {
  CsvBuilder csv({"c", "f", "f_prime"});
  std::string dat =
      "# ReLU dual correlation map f(c) = (1/pi)(c asin c + sqrt(1-c^2)) + "
      "c/2 and its derivative\n# columns: c f f_prime\n";
  std::vector<double> grid;
  for (int i = -100; i <= 100; ++i) grid.push_back(i / 100.0);
  if (cfg.c0) {
    bool present = false;
    for (double c : grid)
      if (c == *cfg.c0) present = true;
    if (!present) {
      grid.push_back(*cfg.c0);
      std::sort(grid.begin(), grid.end());
    }
  }
  for (double c : grid) {
    double f = relu_dual(c);
    double fp = relu_dual_prime(c, /*endpoint_limit=*/true);
    csv.add_row({format_double(c), format_double(f), format_double(fp)});
    dat += format_double(c) + " " + format_double(f) + " " +
           format_double(fp) + "\n";
  }
  return {csv.text(), dat, json::object()};
}

Artifacts run_simulate(const RunConfig& cfg, const InputPair& pair) {
  ArchConfig ac = make_arch_config(cfg);
  std::int64_t n = cfg.n_list.front();
  std::int64_t L = cfg.L_list.front();
  NetworkSpec spec = ac.make_spec(n, L, cfg.d);

  std::vector<KernelTriple> mean(static_cast<std::size_t>(L) + 1);
  std::uint64_t key = rng::derive(
      rng::derive(rng::derive(cfg.master_seed,
                              static_cast<std::uint64_t>(ac.arch) + 1),
                  static_cast<std::uint64_t>(n)),
      static_cast<std::uint64_t>(L));
  for (std::int64_t t = 0; t < cfg.trials; ++t) {
    TrialTrace trace =
        simulate_pair(spec, pair, rng::derive(key, static_cast<std::uint64_t>(t)));
    for (std::size_t l = 0; l < mean.size(); ++l) {
      mean[l].q_aa += trace.layers[l].q_aa;
      mean[l].q_ab += trace.layers[l].q_ab;
      mean[l].q_bb += trace.layers[l].q_bb;
    }
  }
  double inv = 1.0 / static_cast<double>(cfg.trials);
  for (auto& m : mean) {
    m.q_aa *= inv;
    m.q_ab *= inv;
    m.q_bb *= inv;
  }

  std::vector<KernelTriple> theory;
  if (ac.arch == Arch::ScaledResNet)
    theory = infinite_width_trace(*ac.seq, L, pair);

  CsvBuilder csv({"layer", "mean_q_aa", "mean_q_ab", "mean_q_bb",
                  "theory_q_aa", "theory_q_ab", "theory_q_bb"});
  std::string dat =
      "# per-layer neural covariance: Monte Carlo mean over " +
      fmt_i(cfg.trials) + " trials vs the infinite-width recursion\n"
      "# arch=" + cfg.arch + " n=" + fmt_i(n) + " L=" + fmt_i(L) +
      "\n# columns: layer mean_q_ab theory_q_ab\n";
  for (std::size_t l = 0; l < mean.size(); ++l) {
    std::string taa = "nan", tab = "nan", tbb = "nan";
    if (!theory.empty()) {
      taa = format_double(theory[l].q_aa);
      tab = format_double(theory[l].q_ab);
      tbb = format_double(theory[l].q_bb);
    }
    csv.add_row({fmt_i(static_cast<std::int64_t>(l)),
                 format_double(mean[l].q_aa), format_double(mean[l].q_ab),
                 format_double(mean[l].q_bb), taa, tab, tbb});
    dat += fmt_i(static_cast<std::int64_t>(l)) + " " +
           format_double(mean[l].q_ab) + " " + tab + "\n";
  }
  return {csv.text(), dat, json::object()};
}

std::string sweep_csv(const SweepResult& sweep) {
  CsvBuilder csv({"n", "L", "trials", "mean_q", "std_q", "l2_error",
                  "theory_q"});
  for (const SweepRow& r : sweep.rows)
    csv.add_row({fmt_i(r.n), fmt_i(r.L), fmt_i(r.trials),
                 format_double(r.mean_q), format_double(r.std_q),
                 format_double(r.l2_error), format_double(r.theory_q)});
  return csv.text();
}

std::string sweep_dat(const SweepResult& sweep, const std::string& title) {
  std::string dat = "# " + title +
                    "\n# columns: n L trials mean_q std_q l2_error theory_q\n";
  for (const SweepRow& r : sweep.rows)
    dat += fmt_i(r.n) + " " + fmt_i(r.L) + " " + fmt_i(r.trials) + " " +
           format_double(r.mean_q) + " " + format_double(r.std_q) + " " +
           format_double(r.l2_error) + " " + format_double(r.theory_q) + "\n";
  return dat;
}

Artifacts run_grid(const RunConfig& cfg, const InputPair& pair) {
  SweepResult sweep = grid_study(make_arch_config(cfg), cfg.n_list, cfg.L_list,
                                 pair, study_params(cfg));
  return {sweep_csv(sweep),
          sweep_dat(sweep,
                    "width/depth sweep of the final-layer neural covariance "
                    "against its deterministic limit"),
          json::object()};
}

Artifacts run_depth_rate(const RunConfig& cfg, const InputPair& pair) {
  DepthRateResult res = depth_rate_study(cfg.L_list, pair, cfg.step);
  CsvBuilder csv({"L", "delta"});
  std::string dat =
      "# deterministic depth-convergence gap |q_L - q_flow(1)| for the "
      "1/sqrt(L) scaled ResNet kernel\n# log-log slope " +
      format_double(res.fit.slope) + " (r^2 " +
      format_double(res.fit.r_squared) + ")\n# columns: L delta\n";
  for (std::size_t i = 0; i < res.L_list.size(); ++i) {
    csv.add_row({fmt_i(res.L_list[i]), format_double(res.delta[i])});
    dat += fmt_i(res.L_list[i]) + " " + format_double(res.delta[i]) + "\n";
  }
  json extra;
  extra["fit"] = fit_to_json(res.fit);
  return {csv.text(), dat, extra};
}

Artifacts run_width_rate(const RunConfig& cfg, const InputPair& pair) {
  WidthRateResult res = width_rate_study(make_arch_config(cfg), cfg.n_list,
                                         cfg.L_list.front(), pair,
                                         study_params(cfg));
  json extra;
  extra["fit"] = fit_to_json(res.fit);
  return {sweep_csv(res.table),
          sweep_dat(res.table,
                    "L2 error of the final-layer covariance vs width at "
                    "fixed depth, with log-log rate fit " +
                        format_double(res.fit.slope)),
          extra};
}

Artifacts run_joint(const RunConfig& cfg, const InputPair& pair) {
  std::vector<ArchConfig> archs;
  if (cfg.arch == "all") {
    ArchConfig res;
    res.arch = Arch::ScaledResNet;
    res.seq = parse_scaling(cfg.scaling);
    archs.push_back(res);
    archs.push_back({Arch::ShapedMlp, std::nullopt, cfg.beta});
    archs.push_back({Arch::ShapedResNet, std::nullopt, cfg.beta});
  } else {
    archs.push_back(make_arch_config(cfg));
  }
  std::vector<JointRow> rows =
      joint_diagonal_study(archs, cfg.n_list, pair, study_params(cfg));
  CsvBuilder csv({"arch", "n", "trials", "mean", "std", "q05", "q25", "q50",
                  "q75", "q95", "reference", "reference_only"});
  std::string dat =
      "# distribution of the final-layer covariance in the proportional "
      "regime L = n\n# reference_only = 1 marks the width-first recursion "
      "used as a visual reference, not a proven limit\n"
      "# columns: arch n trials mean std q05 q25 q50 q75 q95 reference "
      "reference_only\n";
  for (const JointRow& r : rows) {
    std::string name = arch_name(r.arch);
    std::vector<std::string> cells = {
        name,
        fmt_i(r.n),
        fmt_i(r.trials),
        format_double(r.mean),
        format_double(r.std_dev),
        format_double(r.q05),
        format_double(r.q25),
        format_double(r.q50),
        format_double(r.q75),
        format_double(r.q95),
        format_double(r.reference),
        r.reference_only ? "1" : "0"};
    csv.add_row(cells);
    for (std::size_t i = 0; i < cells.size(); ++i)
      dat += (i ? " " : "") + cells[i];
    dat += "\n";
  }
  return {csv.text(), dat, json::object()};
}

}  // namespace

int run(const RunConfig& cfg) {
  try {
    std::optional<InputPair> pair = build_pair(cfg);

    Artifacts art;
    if (cfg.study == "theory") art = run_theory(cfg);
    else if (cfg.study == "simulate") art = run_simulate(cfg, *pair);
    else if (cfg.study == "grid") art = run_grid(cfg, *pair);
    else if (cfg.study == "depth-rate") art = run_depth_rate(cfg, *pair);
    else if (cfg.study == "width-rate") art = run_width_rate(cfg, *pair);
    else if (cfg.study == "joint") art = run_joint(cfg, *pair);
    else throw ConfigError("unknown study \"" + cfg.study + "\"");

    namespace fs = std::filesystem;
    fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);  // best-effort; writes check for real

    std::string base = cfg.study;
    std::replace(base.begin(), base.end(), '-', '_');

    json manifest;
    manifest["config"] = to_json(cfg);
    manifest["master_seed"] = cfg.master_seed;
    manifest["version"] = "0.1.0";
    manifest["generated_utc"] = utc_now();
    if (pair) {
      json inputs;
      inputs["a"] = std::vector<double>(pair->a().data(),
                                        pair->a().data() + pair->a().size());
      inputs["b"] = std::vector<double>(pair->b().data(),
                                        pair->b().data() + pair->b().size());
      manifest["inputs"] = inputs;
    }
    for (const auto& [key, value] : art.manifest_extra.items())
      manifest[key] = value;

    write_text_atomic((dir / (base + ".csv")).string(), art.csv);
    write_text_atomic((dir / (base + ".dat")).string(), art.dat);
    write_text_atomic((dir / "manifest.json").string(), manifest.dump(2) + "\n");
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const InstabilityError& e) {
    std::cerr << "error: instability: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace covflow
