#include "harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace capa::cli {

using nlohmann::json;

namespace {

std::string format_double(double v, const char* fmt = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> names{"proposed", "fourier", "spda", "spda-wmmse"};
  return names;
}

std::vector<std::string> parse_methods(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    item = b == std::string::npos ? "" : item.substr(b, e - b + 1);
    const auto& known = known_methods();
    if (std::find(known.begin(), known.end(), item) == known.end()) {
      throw ConfigError("unknown method '" + item + "' (expected proposed, fourier, spda, spda-wmmse)");
    }
    out.push_back(item);
  }
  if (out.empty()) throw ConfigError("no methods given");
  return out;
}

MethodOutcome run_method(const std::string& method, const Scenario& scenario,
                         const ChannelSet& eval, const MethodOptions& options) {
  MethodOutcome out;
  out.method = method;
  const double spacing = options.spacing > 0.0 ? options.spacing : scenario.wavelength / 2.0;
  try {
    if (method == "proposed") {
      const auto start = std::chrono::steady_clock::now();
      const ChannelSet ch = build_channel_set(scenario);
      const RunResult rr = run(ch, scenario.streams, scenario.budget, scenario.noise_variance,
                               options.solver, scenario.seed);
      out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const RateReport se = evaluate_se(rr.state.v, eval, scenario.noise_variance);
      out.per_user = se.per_user;
      out.sum = se.sum;
      out.iterations = rr.iterations;
      out.converged = rr.converged;
    } else if (method == "fourier") {
      const int nf = options.nf >= 0 ? options.nf : default_fourier_order(scenario);
      const FourierResult fr = run_fourier(scenario, eval, nf, options.solver);
      out.per_user = fr.se.per_user;
      out.sum = fr.se.sum;
      out.iterations = fr.iterations;
      out.converged = fr.converged;
      out.seconds = fr.seconds;
    } else if (method == "spda" || method == "spda-wmmse") {
      const SpdaMode mode = method == "spda" ? SpdaMode::SvdWaterfill : SpdaMode::Wmmse;
      const SpdaResult sr = run_spda(scenario, eval, spacing, mode, options.solver);
      out.per_user = sr.se.per_user;
      out.sum = sr.se.sum;
      out.iterations = sr.iterations;
      out.converged = mode == SpdaMode::SvdWaterfill || sr.iterations < options.solver.max_iters;
      out.seconds = sr.seconds;
    } else {
      throw ConfigError("unknown method '" + method + "'");
    }
    out.ok = true;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

SweepSpec sweep_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("sweep: top-level value must be a JSON object");
  SweepSpec spec;
  if (!j.contains("variable") || !j.at("variable").is_string()) {
    throw ConfigError("sweep field 'variable': expected a string");
  }
  spec.variable = j.at("variable").get<std::string>();
  if (spec.variable != "budget" && spec.variable != "user_aperture_size" &&
      spec.variable != "bs_aperture_size") {
    throw ConfigError("sweep field 'variable': unknown variable '" + spec.variable + "'");
  }
  if (!j.contains("values") || !j.at("values").is_array() || j.at("values").empty()) {
    throw ConfigError("sweep field 'values': expected a non-empty array");
  }
  for (const auto& v : j.at("values")) {
    if (!v.is_number()) throw ConfigError("sweep field 'values': expected numbers");
    const double x = v.get<double>();
    if (!spec.values.empty() && !(x > spec.values.back())) {
      throw ConfigError("sweep field 'values': must be strictly increasing");
    }
    spec.values.push_back(x);
  }
  if (j.contains("repetitions")) {
    if (!j.at("repetitions").is_number_integer() || j.at("repetitions").get<int>() < 1) {
      throw ConfigError("sweep field 'repetitions': expected an integer >= 1");
    }
    spec.repetitions = j.at("repetitions").get<int>();
  }
  if (j.contains("methods")) {
    if (!j.at("methods").is_array()) throw ConfigError("sweep field 'methods': expected an array");
    std::string joined;
    for (const auto& m : j.at("methods")) {
      if (!m.is_string()) throw ConfigError("sweep field 'methods': expected strings");
      joined += (joined.empty() ? "" : ",") + m.get<std::string>();
    }
    spec.methods = parse_methods(joined);
  } else {
    spec.methods = {"proposed"};
  }
  if (j.contains("scenario") == j.contains("scenario_file")) {
    throw ConfigError("sweep: exactly one of 'scenario' / 'scenario_file' is required");
  }
  if (j.contains("scenario")) {
    spec.base = j.at("scenario");
  } else {
    std::filesystem::path p = j.at("scenario_file").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    spec.base = read_json(p);
  }
  // fail early on a bad base scenario
  sweep_scenario(spec, spec.values.front(), base_seed(spec));
  return spec;
}

std::uint64_t base_seed(const SweepSpec& spec) {
  return spec.base.contains("seed") ? spec.base.at("seed").get<std::uint64_t>() : 1;
}

Scenario sweep_scenario(const SweepSpec& spec, double value, std::uint64_t seed) {
  json j = spec.base;
  j["seed"] = seed;
  if (spec.variable == "budget") {
    j["budget"] = value;
  } else if (spec.variable == "user_aperture_size") {
    if (j.contains("placement")) {
      j["placement"]["lx"] = value;
      j["placement"]["ly"] = value;
    } else if (j.contains("users") && j["users"].is_array()) {
      for (auto& u : j["users"]) {
        u["lx"] = value;
        u["ly"] = value;
      }
    }
  } else {
    if (!j.contains("bs")) j["bs"] = {{"center", {0.0, 0.0, 0.0}}};
    j["bs"]["lx"] = value;
    j["bs"]["ly"] = value;
  }
  return scenario_from_json(j);
}

ResultRow to_row(const MethodOutcome& outcome, std::uint64_t seed, double value) {
  ResultRow row;
  row.method = outcome.method;
  row.seed = seed;
  row.value = value;
  row.ok = outcome.ok;
  row.error = outcome.error;
  row.iterations = outcome.iterations;
  row.seconds = outcome.seconds;
  for (double r : outcome.per_user) {
    row.per_user_bits.push_back(r / std::numbers::ln2);
    row.sum_bits += row.per_user_bits.back();
  }
  return row;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out, bool timing) {
  out << "method,seed,value,status,sum_se_bits,per_user_se_bits,iterations,seconds,error\r\n";
  for (const auto& r : rows) {
    std::string per_user;
    for (std::size_t k = 0; k < r.per_user_bits.size(); ++k) {
      per_user += (k ? ";" : "") + format_double(r.per_user_bits[k]);
    }
    out << csv_field(r.method) << ',' << r.seed << ',' << format_double(r.value) << ','
        << (r.ok ? "ok" : "failed") << ',' << (r.ok ? format_double(r.sum_bits) : "") << ','
        << csv_field(per_user) << ',' << r.iterations << ','
        << (timing ? format_double(r.seconds, "%.6f") : "0") << ',' << csv_field(r.error)
        << "\r\n";
  }
}

void write_svg_plot(const std::vector<Series>& series, const std::string& title,
                    const std::string& x_label, const std::string& y_label, std::ostream& out) {
  const double width = 640, height = 420;
  const double left = 70, right = 150, top = 40, bottom = 55;
  const double pw = width - left - right, ph = height - top - bottom;

  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4.0;
    const double yv = y0 + (y1 - y0) * t / 4.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 18
        << "\" text-anchor=\"middle\">" << format_double(xv, "%.4g") << "</text>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
        << format_double(yv, "%.4g") << "</text>\n";
    out << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << py(yv) << "\" y2=\""
        << py(yv) << "\" stroke=\"#ddd\"/>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  out << "<text transform=\"translate(18," << top + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = colors[i % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t p = 0; p < s.x.size(); ++p) {
      if (!std::isfinite(s.y[p])) continue;
      out << px(s.x[p]) << ',' << py(s.y[p]) << ' ';
    }
    out << "\"/>\n";
    for (std::size_t p = 0; p < s.x.size(); ++p) {
      if (!std::isfinite(s.y[p])) continue;
      out << "<circle cx=\"" << px(s.x[p]) << "\" cy=\"" << py(s.y[p]) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    }
    const double ly = top + 14 + 18 * static_cast<double>(i);
    out << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 36 << "\" y1=\"" << ly
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.name)
        << "</text>\n";
  }
  out << "</svg>\n";
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace capa::cli
