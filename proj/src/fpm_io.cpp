#include <fstream>
#include <sstream>

#include <json.hpp>

#include "crstd/error.hpp"
#include "crstd/fpm.hpp"
#include "crstd/version.hpp"

namespace crstd {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string("model file: '") + what + "' is not a matrix");
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(n, n ? static_cast<Eigen::Index>(j[0].size()) : 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m.cols())
      throw ValidationError(std::string("model file: ragged matrix '") + what + "'");
    for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

json basis_to_json(const SplineBasis& b) {
  json j;
  j["knots"] = std::vector<double>(b.knots().values().begin(), b.knots().values().end());
  j["knot_source"] = b.knots().source() == KnotSource::Centile ? "centile" : "user";
  j["R"] = b.R() ? matrix_to_json(*b.R()) : json(nullptr);
  return j;
}

SplineBasis basis_from_json(const json& j) {
  const auto source =
      j.value("knot_source", std::string("user")) == "centile" ? KnotSource::Centile : KnotSource::User;
  KnotVector knots(j.at("knots").get<std::vector<double>>(), source);
  if (j.contains("R") && !j["R"].is_null()) return SplineBasis(std::move(knots), matrix_from_json(j["R"], "R"));
  return SplineBasis(std::move(knots));
}

}  // namespace

std::string fit_to_json(const FpmFit& fit) {
  const ModelSpec& s = fit.spec();
  json j;
  j["format"] = "crstd-fpm";
  j["format_version"] = kModelFormatVersion;
  j["software_version"] = kVersion;
  json spec;
  spec["covariates"] = s.covariates;
  spec["baseline_df"] = s.baseline_df;
  spec["tvc"] = json::array();
  for (const auto& t : s.tvc) spec["tvc"].push_back({{"covariate", t.covariate}, {"df", t.df}});
  spec["failure_code"] = s.failure_code;
  spec["exit_time"] = s.exit_time;
  spec["time_column"] = s.time_column;
  spec["event_column"] = s.event_column;
  spec["orthogonalize"] = s.orthogonalize;
  j["spec"] = spec;
  j["bases"]["baseline"] = basis_to_json(fit.bases().baseline);
  j["bases"]["tvc"] = json::array();
  for (const auto& b : fit.bases().tvc) j["bases"]["tvc"].push_back(basis_to_json(b));
  j["parameter_names"] = fit.parameter_names();
  j["theta"] = std::vector<double>(fit.theta().data(), fit.theta().data() + fit.theta().size());
  j["vcov"] = matrix_to_json(fit.vcov());
  j["loglik"] = fit.loglik;
  j["n_obs"] = fit.n_obs;
  j["n_events"] = fit.n_events;
  j["n_dropped"] = fit.n_dropped;
  j["iterations"] = fit.iterations;
  j["max_abs_gradient"] = fit.max_abs_gradient;
  j["max_event_time"] = fit.max_event_time;
  return j.dump(2);
}

FpmFit fit_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("corrupt model file: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != "crstd-fpm")
      throw ValidationError("not a crstd model file");
    if (j.value("format_version", -1) != kModelFormatVersion)
      throw ValidationError("model file format version " +
                            std::to_string(j.value("format_version", -1)) + " is not supported (expected " +
                            std::to_string(kModelFormatVersion) + ")");
    const json& js = j.at("spec");
    ModelSpec spec;
    spec.covariates = js.at("covariates").get<std::vector<std::string>>();
    spec.baseline_df = js.at("baseline_df").get<int>();
    for (const auto& t : js.at("tvc")) spec.tvc.push_back({t.at("covariate").get<std::string>(), t.at("df").get<int>()});
    spec.failure_code = js.at("failure_code").get<int>();
    spec.exit_time = js.at("exit_time").get<double>();
    spec.time_column = js.at("time_column").get<std::string>();
    spec.event_column = js.at("event_column").get<std::string>();
    spec.orthogonalize = js.at("orthogonalize").get<bool>();
    spec.validate();

    ModelBases bases;
    bases.baseline = basis_from_json(j.at("bases").at("baseline"));
    for (const auto& b : j.at("bases").at("tvc")) bases.tvc.push_back(basis_from_json(b));

    const auto theta_v = j.at("theta").get<std::vector<double>>();
    Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(theta_v.data(), static_cast<Eigen::Index>(theta_v.size()));
    Eigen::MatrixXd vcov = matrix_from_json(j.at("vcov"), "vcov");
    FpmFit fit(std::move(spec), std::move(bases), std::move(theta), std::move(vcov));
    fit.loglik = j.at("loglik").get<double>();
    fit.n_obs = j.value("n_obs", std::size_t{0});
    fit.n_events = j.value("n_events", std::size_t{0});
    fit.n_dropped = j.value("n_dropped", std::size_t{0});
    fit.iterations = j.value("iterations", 0);
    fit.max_abs_gradient = j.value("max_abs_gradient", 0.0);
    fit.max_event_time = j.value("max_event_time", 0.0);
    return fit;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("corrupt model file: ") + e.what());
  }
}

void save_fit(const FpmFit& fit, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << fit_to_json(fit) << '\n';
}

FpmFit load_fit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return fit_from_json(ss.str());
}

}  // namespace crstd
