//
// ... Standard header files
//
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

//
// ... Vendored libraries
//
#include <CLI11.hpp>
#include <json.hpp>

//
// ... rks header files
//
#include <rks/baseline.hpp>
#include <rks/run.hpp>

namespace rks::cli {

  namespace {

    using nlohmann::json;

    const char* selector_name(Selector s) {
      switch (s) {
        case Selector::LargestModulus: return "lm";
        case Selector::SmallestModulus: return "sm";
        case Selector::LargestReal: return "lr";
        case Selector::SmallestReal: return "sr";
      }
      return "lm";
    }

    const char* kind_name(SyntheticKind k) {
      switch (k) {
        case SyntheticKind::Exponential: return "exponential";
        case SyntheticKind::Logarithmic: return "logarithmic";
        case SyntheticKind::HarmonicRoots: return "harmonic_roots";
        case SyntheticKind::GeometricDecay: return "geometric_decay";
      }
      return "exponential";
    }

    json result_to_json(const SolverResult& r, const RunSpec& spec,
                        double wall_s) {
      json evals = json::array();
      for (const auto& v : r.values) {
        evals.push_back({{"re", v.real()}, {"im", v.imag()}});
      }
      json out{
        {"eigenvalues", evals},
        {"residual_estimates", r.residual_estimates},
        {"residual_exact", r.residual_exact},
        {"counters",
         {{"spmv", r.counters.spmv_count},
          {"big_axpy", r.counters.big_axpy_count},
          {"big_dot", r.counters.big_dot_count},
          {"sketch", r.counters.sketch_count},
          {"restarts", r.counters.restarts}}},
        {"converged", r.converged},
        {"locked", r.locked_count},
        {"perturbation_bound", r.perturbation_bound},
        {"wall_time_s", wall_s},
        {"seed", spec.cfg.seed},
      };
      return out;
    }

    json config_echo(const RunSpec& spec) {
      json cfg{
        {"k", spec.cfg.k},
        {"m", spec.cfg.m},
        {"eta", spec.cfg.eta},
        {"which", selector_name(spec.cfg.selector)},
        {"sketch_dim",
         spec.cfg.sketch_dim == 0 ? 2 * spec.cfg.m : spec.cfg.sketch_dim},
        {"zeta", spec.cfg.zeta},
        {"seed", spec.cfg.seed},
        {"max_restarts", spec.cfg.max_restarts},
        {"fixed_restarts", spec.cfg.fixed_restarts},
        {"deflation",
         spec.cfg.deflation == DeflationMode::Lock ? "lock" : "off"},
      };
      if (spec.use_synthetic) {
        cfg["source"] = {{"synthetic", kind_name(spec.synthetic.kind)},
                         {"n", spec.synthetic.n},
                         {"noise", spec.synthetic.noise_scale},
                         {"matrix_seed", spec.synthetic.seed}};
      } else {
        cfg["source"] = {{"matrix", spec.matrix_path}};
      }
      return cfg;
    }

    /// Greedy nearest-neighbor matching in the complex plane after
    /// sorting both sets by selector order; max relative difference
    /// over the matched pairs.
    double eigenvalue_set_distance(std::vector<std::complex<double>> a,
                                   std::vector<std::complex<double>> b,
                                   Selector sel) {
      auto order = [sel](const std::complex<double>& x,
                         const std::complex<double>& y) {
        return selector_prefers(sel, x, y);
      };
      std::sort(a.begin(), a.end(), order);
      std::sort(b.begin(), b.end(), order);
      const size_t count = std::min(a.size(), b.size());
      std::vector<char> used(b.size(), 0);
      double dist = 0.0;
      for (size_t i = 0; i < count; ++i) {
        size_t best = b.size();
        double best_d = 0.0;
        for (size_t j = 0; j < b.size(); ++j) {
          if (used[j]) { continue; }
          const double dd = std::abs(a[i] - b[j]);
          if (best == b.size() || dd < best_d) {
            best = j;
            best_d = dd;
          }
        }
        if (best == b.size()) { break; }
        used[best] = 1;
        const double scale =
          std::max({std::abs(a[i]), std::abs(b[best]), 1e-300});
        dist = std::max(dist, best_d / scale);
      }
      return dist;
    }

    void write_history_csv(const std::string& path,
                           const std::map<std::string, std::vector<double>>&
                             histories) {
      std::ofstream out(path);
      out << "restart";
      size_t rows = 0;
      for (const auto& [name, h] : histories) {
        out << "," << name;
        rows = std::max(rows, h.size());
      }
      out << "\n";
      out.precision(17);
      for (size_t r = 0; r < rows; ++r) {
        out << r;
        for (const auto& [name, h] : histories) {
          out << ",";
          if (r < h.size()) { out << h[r]; }
        }
        out << "\n";
      }
    }

    void write_result_csv(const std::string& path,
                          const std::map<std::string, SolverResult>& runs) {
      std::ofstream out(path);
      out << "method,index,re,im,residual_estimate,residual_exact\n";
      out.precision(17);
      for (const auto& [name, r] : runs) {
        for (size_t i = 0; i < r.values.size(); ++i) {
          out << name << "," << i << "," << r.values[i].real() << ","
              << r.values[i].imag() << "," << r.residual_estimates[i] << ",";
          if (i < r.residual_exact.size()) { out << r.residual_exact[i]; }
          out << "\n";
        }
      }
    }

  } // namespace

  int run(const RunSpec& spec) {
    CsrMatrix a;
    try {
      if (spec.use_synthetic) {
        a = make_synthetic(spec.synthetic);
      } else {
        a = read_matrix_market(spec.matrix_path);
      }
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    }

    if (!(spec.cfg.k > 0 && spec.cfg.k < spec.cfg.m && spec.cfg.m <= a.n)) {
      std::cerr << "error: need 0 < k < m <= n (n = " << a.n << ")\n";
      return 2;
    }

    std::map<std::string, SolverResult> runs;
    std::map<std::string, double> walls;
    try {
      if (spec.method == Method::Rks || spec.method == Method::Both) {
        const auto t0 = std::chrono::steady_clock::now();
        runs["rks"] = solve(a, spec.cfg);
        walls["rks"] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
      }
      if (spec.method == Method::Ks || spec.method == Method::Both) {
        const auto t0 = std::chrono::steady_clock::now();
        runs["ks"] = solve_deterministic(a, spec.cfg);
        walls["ks"] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
      }
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    }

    json result{{"config", config_echo(spec)}, {"runs", json::object()}};
    std::map<std::string, std::vector<double>> histories;
    bool all_converged = true;
    for (const auto& [name, r] : runs) {
      result["runs"][name] = result_to_json(r, spec, walls[name]);
      histories[name] = r.residual_history;
      all_converged = all_converged && r.converged;
    }
    {
      std::ofstream out(spec.out_prefix + ".result.json");
      out << result.dump(2) << "\n";
    }
    write_history_csv(spec.out_prefix + ".history.csv", histories);
    if (spec.format == OutputFormat::Csv) {
      write_result_csv(spec.out_prefix + ".result.csv", runs);
    }

    if (spec.method == Method::Both) {
      json cmp{{"eigenvalue_set_distance",
                eigenvalue_set_distance(runs["rks"].values, runs["ks"].values,
                                        spec.cfg.selector)}};
      for (const auto& [name, r] : runs) {
        cmp[name] = {{"spmv", r.counters.spmv_count},
                     {"big_axpy", r.counters.big_axpy_count},
                     {"big_dot", r.counters.big_dot_count},
                     {"sketch", r.counters.sketch_count},
                     {"restarts", r.counters.restarts},
                     {"wall_time_s", walls[name]},
                     {"converged", r.converged}};
      }
      std::ofstream out(spec.out_prefix + ".compare.json");
      out << cmp.dump(2) << "\n";
    }

    return all_converged ? 0 : 4;
  }

  int main(int argc, const char* const* argv) {
    CLI::App app{"Sparse eigensolver benchmark: randomized Krylov-Schur "
                 "(rks) vs deterministic Krylov-Schur (ks)"};

    std::string matrix_path;
    std::string synthetic_desc;
    std::string which = "lm";
    std::string method = "rks";
    std::string deflation = "off";
    std::string format = "json";
    RunSpec spec;
    spec.cfg.eta = 1e-10;
    spec.cfg.max_restarts = 300;
    spec.cfg.zeta = 8;

    auto* src = app.add_option_group("source");
    src->add_option("--matrix", matrix_path,
                    "Matrix Market file (coordinate real)");
    src->add_option("--synthetic", synthetic_desc,
                    "kind,n[,noise,seed] with kind in "
                    "{exponential,logarithmic,harmonic,geometric}");
    src->require_option(1);

    app.add_option("--k", spec.cfg.k, "wanted eigenpair count")->required();
    app.add_option("--m", spec.cfg.m, "Krylov dimension (k < m <= n)")
      ->required();
    app.add_option("--eta", spec.cfg.eta, "residual tolerance");
    app.add_option("--which", which, "lm|sm|lr|sr");
    app.add_option("--method", method, "rks|ks|both");
    app.add_option("--sketch-dim", spec.cfg.sketch_dim,
                   "sketch dimension (default 2*m)");
    app.add_option("--zeta", spec.cfg.zeta, "nonzeros per sketch column");
    app.add_option("--seed", spec.cfg.seed, "RNG seed");
    app.add_option("--max-restarts", spec.cfg.max_restarts, "restart cap");
    app.add_option("--fixed-restarts", spec.cfg.fixed_restarts,
                   "run exactly this many restarts (cost benchmarking)");
    app.add_option("--deflation", deflation, "off|lock");
    app.add_option("--out", spec.out_prefix, "output path prefix");
    app.add_option("--format", format, "json|csv");

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app.exit(e) == 0 ? 0 : 2;
    }

    if (which == "lm") {
      spec.cfg.selector = Selector::LargestModulus;
    } else if (which == "sm") {
      spec.cfg.selector = Selector::SmallestModulus;
    } else if (which == "lr") {
      spec.cfg.selector = Selector::LargestReal;
    } else if (which == "sr") {
      spec.cfg.selector = Selector::SmallestReal;
    } else {
      std::cerr << "error: unknown --which '" << which << "'\n";
      return 2;
    }

    if (method == "rks") {
      spec.method = Method::Rks;
    } else if (method == "ks") {
      spec.method = Method::Ks;
    } else if (method == "both") {
      spec.method = Method::Both;
    } else {
      std::cerr << "error: unknown --method '" << method << "'\n";
      return 2;
    }

    if (deflation == "off") {
      spec.cfg.deflation = DeflationMode::Off;
    } else if (deflation == "lock") {
      spec.cfg.deflation = DeflationMode::Lock;
    } else {
      std::cerr << "error: unknown --deflation '" << deflation << "'\n";
      return 2;
    }

    if (format == "json") {
      spec.format = OutputFormat::Json;
    } else if (format == "csv") {
      spec.format = OutputFormat::Csv;
    } else {
      std::cerr << "error: unknown --format '" << format << "'\n";
      return 2;
    }

    if (!synthetic_desc.empty()) {
      spec.use_synthetic = true;
      std::stringstream ss(synthetic_desc);
      std::string tok;
      std::vector<std::string> parts;
      while (std::getline(ss, tok, ',')) {
        parts.push_back(tok);
      }
      if (parts.size() < 2 || parts.size() > 4) {
        std::cerr << "error: --synthetic wants kind,n[,noise,seed]\n";
        return 2;
      }
      const std::string& kind = parts[0];
      if (kind == "exponential" || kind == "exp") {
        spec.synthetic.kind = SyntheticKind::Exponential;
      } else if (kind == "logarithmic" || kind == "log") {
        spec.synthetic.kind = SyntheticKind::Logarithmic;
      } else if (kind == "harmonic" || kind == "harmonic_roots") {
        spec.synthetic.kind = SyntheticKind::HarmonicRoots;
      } else if (kind == "geometric" || kind == "geometric_decay") {
        spec.synthetic.kind = SyntheticKind::GeometricDecay;
      } else {
        std::cerr << "error: unknown synthetic kind '" << kind << "'\n";
        return 2;
      }
      try {
        spec.synthetic.n = std::stoull(parts[1]);
        spec.synthetic.noise_scale =
          parts.size() > 2 ? std::stod(parts[2]) : 0.01;
        spec.synthetic.seed = parts.size() > 3 ? std::stoull(parts[3]) : 0;
      } catch (const std::exception&) {
        std::cerr << "error: malformed --synthetic '" << synthetic_desc
                  << "'\n";
        return 2;
      }
    } else {
      spec.matrix_path = matrix_path;
    }

    return run(spec);
  }

} // namespace rks::cli
