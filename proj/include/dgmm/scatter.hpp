#pragma once

// Projection of samples and fitted components onto the first two
// coordinates, written as a delimited text table and optionally as a
// standalone SVG with 2-sigma ellipses.
//
// Table columns:
//   kind,set,component,x,y,weight,s11,s12,s22,axis_major,axis_minor,angle
// `kind` is "sample" (one row per sample; component is the label or -1) or
// "center" (one row per component and parameter set). For centers, s11, s12
// and s22 hold the leading 2x2 block of the covariance, axis_major and
// axis_minor the 2-sigma semi-axes of its ellipse and angle the major-axis
// direction in radians.

#include <dgmm/io.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace dgmm {

struct NamedParams {
  std::string name;
  MixtureParams params;
};

struct Ellipse2 {
  double s11 = 0.0, s12 = 0.0, s22 = 0.0;
  double major = 0.0, minor = 0.0, angle = 0.0;
};

/// 2-sigma ellipse of the leading 2x2 covariance block.
inline Ellipse2 leading_ellipse(const Matrix& sigma) {
  Ellipse2 e;
  e.s11 = sigma(0, 0);
  e.s12 = 0.5 * (sigma(0, 1) + sigma(1, 0));
  e.s22 = sigma(1, 1);
  Eigen::Matrix2d B;
  B << e.s11, e.s12, e.s12, e.s22;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(B);
  const Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0);
  e.major = 2.0 * std::sqrt(ev[1]);
  e.minor = 2.0 * std::sqrt(ev[0]);
  e.angle = std::atan2(es.eigenvectors()(1, 1), es.eigenvectors()(0, 1));
  return e;
}

struct ScatterOptions {
  bool svg = false;
  Index max_svg_points = 5000;  // samples drawn in the SVG (evenly strided)
};

/// Writes <prefix>.csv and, when requested, <prefix>.svg.
inline void export_scatter(const Matrix& data, const std::vector<int>& labels,
                           const std::vector<NamedParams>& sets, const std::string& prefix,
                           const ScatterOptions& opt = {}) {
  require(data.cols() >= 2, Errc::invalid_argument, "scatter export needs d >= 2");
  require(labels.empty() || static_cast<Index>(labels.size()) == data.rows(), Errc::shape_mismatch,
          "label count differs from sample count");
  for (const auto& s : sets) {
    require(s.params.dim() == data.cols(), Errc::shape_mismatch,
            "parameter set '" + s.name + "' has a different dimension from the data");
  }
  const std::string csv_path = prefix + ".csv";
  std::ofstream out(csv_path);
  require(static_cast<bool>(out), Errc::io, "cannot open '" + csv_path + "' for writing");
  out << "kind,set,component,x,y,weight,s11,s12,s22,axis_major,axis_minor,angle\n";
  for (Index n = 0; n < data.rows(); ++n) {
    out << "sample,data," << (labels.empty() ? -1 : labels[static_cast<std::size_t>(n)]) << ','
        << format_double(data(n, 0)) << ',' << format_double(data(n, 1)) << ",,,,,,,\n";
  }
  for (const auto& s : sets) {
    for (int j = 0; j < s.params.components(); ++j) {
      const auto& mu = s.params.centers[static_cast<std::size_t>(j)];
      const Ellipse2 e = leading_ellipse(s.params.covariance(j));
      out << "center," << s.name << ',' << j << ',' << format_double(mu[0]) << ','
          << format_double(mu[1]) << ',' << format_double(s.params.weights[j]) << ','
          << format_double(e.s11) << ',' << format_double(e.s12) << ',' << format_double(e.s22) << ','
          << format_double(e.major) << ',' << format_double(e.minor) << ',' << format_double(e.angle)
          << '\n';
    }
  }
  require(static_cast<bool>(out), Errc::io, "write to '" + csv_path + "' failed");
  if (!opt.svg) return;

  const Index stride = std::max<Index>(1, (data.rows() + opt.max_svg_points - 1) / opt.max_svg_points);
  double x0 = data.col(0).minCoeff(), x1 = data.col(0).maxCoeff();
  double y0 = data.col(1).minCoeff(), y1 = data.col(1).maxCoeff();
  for (const auto& s : sets) {
    for (int j = 0; j < s.params.components(); ++j) {
      const auto& mu = s.params.centers[static_cast<std::size_t>(j)];
      const double r = leading_ellipse(s.params.covariance(j)).major;
      x0 = std::min(x0, mu[0] - r);
      x1 = std::max(x1, mu[0] + r);
      y0 = std::min(y0, mu[1] - r);
      y1 = std::max(y1, mu[1] + r);
    }
  }
  const double size = 800.0, margin = 20.0;
  const double span = std::max({x1 - x0, y1 - y0, 1e-12});
  const double scale = (size - 2.0 * margin) / span;
  auto px = [&](double x) { return margin + (x - x0) * scale; };
  auto py = [&](double y) { return size - margin - (y - y0) * scale; };
  static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  const std::string svg_path = prefix + ".svg";
  std::ofstream svg(svg_path);
  require(static_cast<bool>(svg), Errc::io, "cannot open '" + svg_path + "' for writing");
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size + 20.0
      << "\" viewBox=\"0 0 " << size << ' ' << size + 20.0 << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g fill=\"#888\" fill-opacity=\"0.35\">\n";
  for (Index n = 0; n < data.rows(); n += stride) {
    svg << "<circle cx=\"" << px(data(n, 0)) << "\" cy=\"" << py(data(n, 1)) << "\" r=\"1.2\"/>\n";
  }
  svg << "</g>\n";
  for (std::size_t si = 0; si < sets.size(); ++si) {
    const char* color = palette[si % (sizeof palette / sizeof *palette)];
    const auto& p = sets[si].params;
    svg << "<g stroke=\"" << color << "\" fill=\"none\" stroke-width=\"2\">\n";
    for (int j = 0; j < p.components(); ++j) {
      const auto& mu = p.centers[static_cast<std::size_t>(j)];
      const Ellipse2 e = leading_ellipse(p.covariance(j));
      // SVG y points down, so the rotation angle flips sign.
      svg << "<ellipse cx=\"" << px(mu[0]) << "\" cy=\"" << py(mu[1]) << "\" rx=\""
          << std::max(e.major * scale, 0.5) << "\" ry=\"" << std::max(e.minor * scale, 0.5)
          << "\" transform=\"rotate(" << -e.angle * 180.0 / M_PI << ' ' << px(mu[0]) << ' '
          << py(mu[1]) << ")\"/>\n"
          << "<circle cx=\"" << px(mu[0]) << "\" cy=\"" << py(mu[1]) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    svg << "</g>\n<text x=\"" << margin + 150.0 * static_cast<double>(si) << "\" y=\"" << size + 12.0
        << "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"" << color << "\">" << sets[si].name
        << "</text>\n";
  }
  svg << "</svg>\n";
  require(static_cast<bool>(svg), Errc::io, "write to '" + svg_path + "' failed");
}

}  // namespace dgmm
