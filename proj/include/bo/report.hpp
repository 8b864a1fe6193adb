#pragma once

#include "bo/chart.hpp"
#include "bo/finite_gap.hpp"
#include "bo/fourier.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace bo {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON schemas
// ---------------------------------------------------------------------------

/// {"M": int, "re": [...], "im": [...], "is_real": bool}, index order -M..M.
inline json to_json(const FourierSeries& u) {
  json j;
  j["M"] = u.M;
  std::vector<double> re, im;
  for (int n = -u.M; n <= u.M; ++n) {
    re.push_back(u.at(n).real());
    im.push_back(u.at(n).imag());
  }
  j["re"] = re;
  j["im"] = im;
  j["is_real"] = u.is_real;
  return j;
}

inline FourierSeries fourier_from_json(const json& j) {
  FourierSeries u(j.at("M").get<int>());
  auto re = j.at("re").get<std::vector<double>>();
  auto im = j.at("im").get<std::vector<double>>();
  if (int(re.size()) != 2 * u.M + 1 || im.size() != re.size())
    throw std::invalid_argument("FourierSeries json: length mismatch");
  for (int n = -u.M; n <= u.M; ++n) u.at(n) = cplx(re[n + u.M], im[n + u.M]);
  u.detect_flags();
  if (j.contains("is_real")) u.is_real = j["is_real"].get<bool>();
  return u;
}

/// {"Mz": int, "pos_re": [...], "pos_im": [...]}, n >= 1 only.
inline json to_json(const BirkhoffVector& z) {
  json j;
  j["Mz"] = z.Mz;
  std::vector<double> re, im;
  for (int n = 1; n <= z.Mz; ++n) {
    re.push_back(z.pos[n - 1].real());
    im.push_back(z.pos[n - 1].imag());
  }
  j["pos_re"] = re;
  j["pos_im"] = im;
  return j;
}

inline BirkhoffVector birkhoff_from_json(const json& j) {
  BirkhoffVector z(j.at("Mz").get<int>());
  auto re = j.at("pos_re").get<std::vector<double>>();
  auto im = j.at("pos_im").get<std::vector<double>>();
  if (int(re.size()) != z.Mz || im.size() != re.size())
    throw std::invalid_argument("BirkhoffVector json: length mismatch");
  for (int n = 1; n <= z.Mz; ++n) z.pos[n - 1] = cplx(re[n - 1], im[n - 1]);
  return z;
}

/// {"r": [...], "alpha": [...]}.
inline json to_json(const FiniteGapParams& p) {
  return json{{"r", p.r}, {"alpha", p.alpha}};
}

inline FiniteGapParams finite_gap_from_json(const json& j) {
  FiniteGapParams p;
  p.r = j.at("r").get<std::vector<double>>();
  p.alpha = j.at("alpha").get<std::vector<double>>();
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// run summary: {job, config_hash, checks: [{name, value, tol, pass}]}
// ---------------------------------------------------------------------------

struct Check {
  std::string name;
  double value = 0;
  double tol = 0;
  bool pass = false;
  /// when true, pass means value >= tol instead of value <= tol
  bool lower_bound = false;
};

inline Check check_le(const std::string& name, double value, double tol) {
  return {name, value, tol, value <= tol, false};
}
inline Check check_ge(const std::string& name, double value, double tol) {
  return {name, value, tol, value >= tol, true};
}

struct Summary {
  std::string job;
  json config;
  std::vector<Check> checks;

  bool all_pass() const {
    for (auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  json to_json() const {
    json j;
    j["job"] = job;
    j["config_hash"] = hash_hex(config.dump());
    j["config"] = config;
    json arr = json::array();
    for (auto& c : checks)
      arr.push_back({{"name", c.name},
                     {"value", c.value},
                     {"tol", c.tol},
                     {"bound", c.lower_bound ? "ge" : "le"},
                     {"pass", c.pass}});
    j["checks"] = arr;
    j["pass"] = all_pass();
    return j;
  }

  static std::string hash_hex(const std::string& s) { // FNV-1a, stable across runs
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
  }
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// static SVG line plots
// ---------------------------------------------------------------------------

struct SvgSeries {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
};

/// Minimal static plot: polylines with axes; log-scale flags apply log10 to
/// the data before ranging.
inline std::string svg_plot(const std::vector<SvgSeries>& series, const std::string& title,
                            bool logx = false, bool logy = false) {
  const double W = 640, H = 420, L = 70, R = 20, T = 36, B = 48;
  auto tf = [&](double v, bool lg) { return lg ? std::log10(std::max(v, 1e-300)) : v; };
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, tf(s.x[i], logx));
      xmax = std::max(xmax, tf(s.x[i], logx));
      ymin = std::min(ymin, tf(s.y[i], logy));
      ymax = std::max(ymax, tf(s.y[i], logy));
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  auto px = [&](double v) { return L + (tf(v, logx) - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double v) { return H - B - (tf(v, logy) - ymin) / (ymax - ymin) * (H - T - B); };
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='15'>" << title
     << "</text>\n";
  os << "<line x1='" << L << "' y1='" << H - B << "' x2='" << W - R << "' y2='" << H - B
     << "' stroke='black'/>\n";
  os << "<line x1='" << L << "' y1='" << T << "' x2='" << L << "' y2='" << H - B
     << "' stroke='black'/>\n";
  for (int k = 0; k <= 4; ++k) {
    double vx = xmin + k * (xmax - xmin) / 4, vy = ymin + k * (ymax - ymin) / 4;
    os << "<text x='" << L + k * (W - L - R) / 4 << "' y='" << H - B + 18
       << "' text-anchor='middle' font-size='11'>" << std::setprecision(3) << vx
       << (logx ? "(log)" : "") << "</text>\n";
    os << "<text x='" << L - 6 << "' y='" << H - B - k * (H - T - B) / 4 + 4
       << "' text-anchor='end' font-size='11'>" << std::setprecision(3) << vy
       << (logy ? "(log)" : "") << "</text>\n";
  }
  int li = 0;
  for (auto& s : series) {
    os << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
    for (size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    os << "'/>\n";
    os << "<text x='" << W - R - 8 << "' y='" << T + 16 + 16 * li++
       << "' text-anchor='end' font-size='12' fill='" << s.color << "'>" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline std::string csv_from_columns(const std::vector<std::string>& headers,
                                    const std::vector<std::vector<double>>& cols) {
  std::ostringstream os;
  os.precision(15);
  for (size_t i = 0; i < headers.size(); ++i) os << headers[i] << (i + 1 < headers.size() ? "," : "\n");
  size_t rows = cols.empty() ? 0 : cols[0].size();
  for (size_t r = 0; r < rows; ++r)
    for (size_t i = 0; i < cols.size(); ++i) os << cols[i][r] << (i + 1 < cols.size() ? "," : "\n");
  return os.str();
}

} // namespace bo
