#include "xqr/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xqr/error.hpp"

namespace xqr {

namespace {

using Json = nlohmann::ordered_json;

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                          : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

bool is_missing(const std::string& cell) {
  if (cell.empty()) return true;
  std::string lower;
  for (char c : cell) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower == "na" || lower == "nan";
}

[[noreturn]] void data_error(const std::string& source, std::size_t line, const std::string& what) {
  std::ostringstream os;
  os << source << ":" << line << ": " << what;
  detail::fail(ErrorKind::Data, os.str());
}

double parse_cell(const std::string& cell, const std::string& source, std::size_t line,
                  const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    data_error(source, line, "column '" + column + "': cannot parse '" + cell + "' as a number");
  return v;
}

template <class T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) detail::fail(ErrorKind::Data, std::string("model file lacks field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    detail::fail(ErrorKind::Data, std::string("model field '") + key + "': " + e.what());
  }
}

}  // namespace

XYData parse_xy_csv(std::istream& in, const std::string& x_col, const std::string& y_col,
                    const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) detail::fail(ErrorKind::Data, source + ": empty file, no header row");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split(line);
  int xi = -1, yi = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = unquote(header[c]);
    if (name == x_col && xi < 0) xi = static_cast<int>(c);
    if (name == y_col && yi < 0) yi = static_cast<int>(c);
  }
  if (xi < 0) detail::fail(ErrorKind::Data, source + ": no column named '" + x_col + "'");
  if (yi < 0) detail::fail(ErrorKind::Data, source + ": no column named '" + y_col + "'");

  XYData data;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      std::ostringstream os;
      os << "expected " << header.size() << " fields, found " << cells.size();
      data_error(source, line_no, os.str());
    }
    ++data.rows;
    const auto& xc = cells[static_cast<std::size_t>(xi)];
    const auto& yc = cells[static_cast<std::size_t>(yi)];
    if (is_missing(xc) || is_missing(yc)) {
      ++data.dropped;
      continue;
    }
    data.x.push_back(parse_cell(xc, source, line_no, x_col));
    data.y.push_back(parse_cell(yc, source, line_no, y_col));
  }
  return data;
}

XYData read_xy_csv(const std::string& path, const std::string& x_col, const std::string& y_col) {
  std::ifstream in(path);
  if (!in) detail::fail(ErrorKind::Io, "cannot open '" + path + "' for reading");
  return parse_xy_csv(in, x_col, y_col, path);
}

std::string model_to_json(const QuantileFitModel& model) {
  Json j;
  j["schema_version"] = kModelSchemaVersion;
  j["kind"] = "quantile_fit";
  j["basis"] = {{"lower", model.basis.lower},
                {"upper", model.basis.upper},
                {"degree", model.basis.degree},
                {"interior", model.basis.interior},
                {"knots", model.basis.knots}};
  j["penalty_order"] = model.penalty_order;
  j["tau"] = model.tau;
  j["lambda"] = model.lambda;
  j["coefficients"] = std::vector<double>(model.coefficients.data(),
                                          model.coefficients.data() + model.coefficients.size());
  const auto& d = model.diagnostics;
  j["diagnostics"] = {{"iterations", d.iterations},
                      {"polish_iterations", d.polish_iterations},
                      {"inner_solves", d.inner_solves},
                      {"converged", d.converged},
                      {"final_alpha", d.final_alpha},
                      {"final_eta", d.final_eta},
                      {"initial_objective", d.initial_objective},
                      {"objective", d.objective},
                      {"last_step", d.last_step}};
  return j.dump(2) + "\n";
}

QuantileFitModel model_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    detail::fail(ErrorKind::Data, std::string("model file is not valid JSON: ") + e.what());
  }
  const int version = field<int>(j, "schema_version");
  if (version != kModelSchemaVersion) {
    std::ostringstream os;
    os << "model schema_version " << version << " is not supported (expected " << kModelSchemaVersion << ")";
    detail::fail(ErrorKind::Data, os.str());
  }
  const Json basis = field<Json>(j, "basis");
  QuantileFitModel m;
  m.basis = make_basis(field<double>(basis, "lower"), field<double>(basis, "upper"),
                       field<int>(basis, "interior"), field<int>(basis, "degree"));
  const auto knots = field<std::vector<double>>(basis, "knots");
  if (knots.size() != m.basis.knots.size())
    detail::fail(ErrorKind::Data, "model knots do not match the basis size");
  m.basis.knots = knots;
  m.penalty_order = field<int>(j, "penalty_order");
  m.tau = field<double>(j, "tau");
  m.lambda = field<double>(j, "lambda");
  const auto coef = field<std::vector<double>>(j, "coefficients");
  if (static_cast<int>(coef.size()) != m.basis.dimension())
    detail::fail(ErrorKind::Data, "model has the wrong number of coefficients");
  m.coefficients = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
  if (j.contains("diagnostics")) {
    const Json d = j.at("diagnostics");
    auto& g = m.diagnostics;
    g.iterations = d.value("iterations", 0);
    g.polish_iterations = d.value("polish_iterations", 0);
    g.inner_solves = d.value("inner_solves", 0);
    g.converged = d.value("converged", false);
    g.final_alpha = d.value("final_alpha", 0.0);
    g.final_eta = d.value("final_eta", 0.0);
    g.initial_objective = d.value("initial_objective", 0.0);
    g.objective = d.value("objective", 0.0);
    g.last_step = d.value("last_step", 0.0);
  }
  return m;
}

void save_model(const QuantileFitModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) detail::fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << model_to_json(model);
  if (!out) detail::fail(ErrorKind::Io, "failed writing '" + path + "'");
}

QuantileFitModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::fail(ErrorKind::Io, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace xqr
