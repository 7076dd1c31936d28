#include "parahom/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "parahom/error.hpp"

#ifndef PARAHOM_VERSION
#define PARAHOM_VERSION "0.0.0"
#endif

namespace parahom {

const char* version() { return PARAHOM_VERSION; }

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void dump(const ojson& j, int indent, std::string& out) {
  const std::string pad(std::size_t(indent) * 2, ' ');
  const std::string inner(std::size_t(indent + 1) * 2, ' ');
  switch (j.type()) {
    case ojson::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += inner + ojson(k).dump() + ": ";
        dump(v, indent + 1, out);
      }
      out += "\n" + pad + "}";
      return;
    }
    case ojson::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& v : j) flat = flat && !v.is_structured();
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump(j[i], indent + 1, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        dump(j[i], indent + 1, out);
      }
      out += "\n" + pad + "]";
      return;
    }
    case ojson::value_t::number_float:
      out += num(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const ojson& j) {
  std::string out;
  dump(j, 0, out);
  out += "\n";
  return out;
}

std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += std::isfinite(row[i]) ? num(row[i]) : std::string("nan");
    }
    out += "\n";
  }
  return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + tmp.string());
    f.write(content.data(), std::streamsize(content.size()));
    f.flush();
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename to " + path.string() + ": " + ec.message());
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ojson to_json(const Matrix& m) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

ojson to_json(const LineFit& f) { return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}}; }

ojson to_json(const RateReport& r) {
  ojson j;
  j["parameter"] = r.parameter;
  ojson samples = ojson::array();
  for (const auto& s : r.samples)
    samples.push_back({{"param", s.param}, {"error", s.error}, {"below_floor", s.below_floor}, {"nx", s.nx}, {"nt", s.nt}});
  j["samples"] = samples;
  j["fit"] = to_json(r.fit);
  j["refit"] = r.refit ? to_json(*r.refit) : ojson(nullptr);
  j["slope"] = r.slope();
  j["predicted_exponent"] = r.predicted_exponent;
  j["slope_tol"] = r.slope_tol;
  j["floor_tol"] = r.floor_tol;
  j["degenerate"] = r.degenerate;
  j["pass"] = r.pass;
  return j;
}

ojson to_json(const EffectiveTensor& t) {
  ojson j;
  j["matrix"] = to_json(t.matrix);
  j["provenance"] = to_string(t.provenance);
  j["lambda"] = t.lambda;
  j["mu_cert"] = t.mu_cert;
  j["corrector_energy"] = t.corrector_energy;
  j["inputs_digest"] = hex64(t.inputs_digest);
  j["probe_seed"] = t.probe_seed;
  return j;
}

ojson to_json(const LambdaSweepReport& s) {
  ojson j;
  j["lambdas"] = s.lambdas;
  j["distances_to_infinity"] = s.distances_to_infinity;
  j["distances_to_zero"] = s.distances_to_zero;
  j["corrector_distance_infinity"] = s.corrector_distance_infinity;
  j["corrector_distance_zero"] = s.corrector_distance_zero;
  j["slope_high"] = s.slope_high;
  j["slope_low"] = s.slope_low;
  j["slope_corrector_high"] = s.slope_corrector_high;
  j["slope_corrector_low"] = s.slope_corrector_low;
  j["degenerate"] = s.degenerate;
  j["a_infinity"] = to_json(s.a_infinity);
  j["a_zero"] = to_json(s.a_zero);
  j["probe_seed"] = s.probe_seed;
  return j;
}

ojson to_json(const LipschitzProfile& p) {
  return {{"radii", p.radii},           {"energy", p.energy},     {"normalizer", p.normalizer}, {"p", p.p},
          {"ratio", p.ratio},           {"max_ratio", p.max_ratio}, {"flatness", p.flatness}};
}

ojson to_json(const ExcessProfile& p) {
  ojson j;
  j["order"] = p.order;
  j["radii"] = p.radii;
  j["excess"] = p.excess;
  j["energy"] = p.energy;
  j["coefficients"] = p.coefficients;
  if (p.order == 2) j["e0"] = p.e0;
  j["decay"] = to_json(p.decay);
  return j;
}

std::string rate_csv(const RateReport& r) {
  std::vector<std::vector<double>> rows;
  for (const auto& s : r.samples) rows.push_back({s.param, s.error, std::log(s.param), std::log(s.error)});
  return to_csv({"param", "error", "log_param", "log_error"}, rows);
}

std::string rate_svg(const RateReport& r, const std::string& title) {
  std::vector<double> lx, ly;
  for (const auto& s : r.samples)
    if (s.error > 0.0) {
      lx.push_back(std::log10(s.param));
      ly.push_back(std::log10(s.error));
    }
  const double W = 480, H = 360, M = 50;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  if (lx.size() < 2) {
    os << "</svg>\n";
    return os.str();
  }
  auto [x0, x1] = std::minmax_element(lx.begin(), lx.end());
  auto [y0, y1] = std::minmax_element(ly.begin(), ly.end());
  const double xa = *x0 - 0.1, xb = *x1 + 0.1, ya = *y0 - 0.3, yb = *y1 + 0.3;
  auto X = [&](double v) { return M + (v - xa) / (xb - xa) * (W - 2 * M); };
  auto Y = [&](double v) { return H - M - (v - ya) / (yb - ya) * (H - 2 * M); };
  os << "<rect x=\"" << M << "\" y=\"" << M << "\" width=\"" << W - 2 * M << "\" height=\"" << H - 2 * M
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < lx.size(); ++i)
    os << "<circle cx=\"" << X(lx[i]) << "\" cy=\"" << Y(ly[i]) << "\" r=\"4\" fill=\"steelblue\"/>\n";
  if (std::isfinite(r.slope())) {
    const LineFit& f = r.refit ? *r.refit : r.fit;
    // Natural-log intercept to base 10: log10 e = slope log10 p + b / ln 10.
    const double b = f.intercept / std::log(10.0);
    os << "<line x1=\"" << X(xa) << "\" y1=\"" << Y(f.slope * xa + b) << "\" x2=\"" << X(xb) << "\" y2=\""
       << Y(f.slope * xb + b) << "\" stroke=\"steelblue\"/>\n";
  }
  const double g = ly.front() - r.predicted_exponent * lx.front();
  os << "<line x1=\"" << X(xa) << "\" y1=\"" << Y(r.predicted_exponent * xa + g) << "\" x2=\"" << X(xb) << "\" y2=\""
     << Y(r.predicted_exponent * xb + g) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n"
     << "<text x=\"" << M << "\" y=\"" << H - 15 << "\" font-size=\"12\">log10 " << r.parameter
     << "; fitted slope " << num(r.slope()) << ", predicted " << num(r.predicted_exponent) << "</text>\n"
     << "</svg>\n";
  return os.str();
}

}  // namespace parahom
