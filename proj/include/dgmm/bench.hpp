#pragma once

// Per-evaluation timing of the tensor-free objective against the dense
// explicit objective across dimensions and sample sizes.

#include <dgmm/io.hpp>

#include <chrono>
#include <fstream>

namespace dgmm {

struct BenchConfig {
  std::vector<int> dims{4, 8, 16, 32};
  std::vector<Index> sample_sizes{5000};
  int K = 2;
  int R_max = 2;
  int L = 3;
  std::uint64_t seed = 1;
  double min_seconds = 0.2;  // timing budget per (path, d, N)
  int min_repeats = 3;
  bool run_explicit = true;
  int threads = 1;
};

struct BenchRow {
  int d = 0;
  Index N = 0;
  double implicit_seconds = 0.0;  // median per evaluation (objective + gradient)
  double implicit_setup_seconds = 0.0;
  bool explicit_available = false;
  double explicit_seconds = std::numeric_limits<double>::quiet_NaN();
  double explicit_setup_seconds = std::numeric_limits<double>::quiet_NaN();
  std::string explicit_note;  // reason when unavailable
};

/// Median wall time of fn() over at least `min_repeats` calls and `min_seconds`.
template <class Fn>
double median_seconds(Fn&& fn, double min_seconds, int min_repeats) {
  using Clock = std::chrono::steady_clock;
  std::vector<double> t;
  double total = 0.0;
  while (static_cast<int>(t.size()) < min_repeats || total < min_seconds) {
    const auto a = Clock::now();
    fn();
    const double s = std::chrono::duration<double>(Clock::now() - a).count();
    t.push_back(s);
    total += s;
  }
  std::sort(t.begin(), t.end());
  const std::size_t n = t.size();
  return n % 2 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
}

inline std::vector<BenchRow> benchmark_scaling(const BenchConfig& cfg) {
  require(!cfg.dims.empty() && !cfg.sample_sizes.empty(), Errc::invalid_argument,
          "benchmark needs at least one d and one N");
  using Clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  for (Index N : cfg.sample_sizes) {
    for (int d : cfg.dims) {
      GroundTruthSpec spec;
      spec.K = cfg.K;
      spec.d = d;
      spec.R_max = std::min(cfg.R_max, d);
      spec.seed = cfg.seed;
      const MixtureParams truth = generate_ground_truth(spec);
      const Matrix data = sample_mixture(truth, N, cfg.seed + 1000).data;
      const PackedTheta theta = pack(default_initialization(cfg.K, d, spec.R_max, cfg.seed + 2000));
      const Vector w = Vector::Ones(cfg.L);
      BenchRow row;
      row.d = d;
      row.N = N;
      Vector g;
      double sink = 0.0;
      {
        const auto t0 = Clock::now();
        const KernelSumCache cache = exact_kernel_sums(data, cfg.L, std::max<Index>(N, kDefaultExactGuard));
        row.implicit_setup_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        ImplicitObjective obj(data, cache, cfg.L, w, theta, cfg.threads);
        row.implicit_seconds =
            median_seconds([&] { sink += obj(theta.values, g); }, cfg.min_seconds, cfg.min_repeats);
      }
      if (cfg.run_explicit) {
        try {
          const auto t0 = Clock::now();
          const ExplicitMoments em = explicit_moments(data, cfg.L);
          row.explicit_setup_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
          const auto obj = ExplicitObjective::diagonal(em, w, theta);
          row.explicit_seconds =
              median_seconds([&] { sink += obj(theta.values, g); }, cfg.min_seconds, cfg.min_repeats);
          row.explicit_available = true;
        } catch (const Error& e) {
          row.explicit_note = e.what();
        }
      } else {
        row.explicit_note = "disabled";
      }
      require(std::isfinite(sink), Errc::non_finite, "benchmark objective became non-finite");
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline void write_bench_table(const std::string& path, const std::vector<BenchRow>& rows) {
  std::ofstream out(path);
  require(static_cast<bool>(out), Errc::io, "cannot open '" + path + "' for writing");
  out << "d,N,implicit_seconds,implicit_setup_seconds,explicit_seconds,explicit_setup_seconds,"
         "explicit_over_implicit,note\n";
  for (const auto& r : rows) {
    out << r.d << ',' << r.N << ',' << format_double(r.implicit_seconds) << ','
        << format_double(r.implicit_setup_seconds) << ',';
    if (r.explicit_available) {
      out << format_double(r.explicit_seconds) << ',' << format_double(r.explicit_setup_seconds) << ','
          << format_double(r.explicit_seconds / r.implicit_seconds) << ',';
    } else {
      out << ",,,";
    }
    std::string note = r.explicit_note;
    std::replace(note.begin(), note.end(), ',', ';');
    out << note << '\n';
  }
  require(static_cast<bool>(out), Errc::io, "write to '" + path + "' failed");
}

}  // namespace dgmm
