#include "crstd/output.hpp"

#include <fstream>
#include <sstream>

#include <Eigen/Core>

#include "crstd/csv.hpp"
#include "crstd/error.hpp"
#include "crstd/version.hpp"

namespace crstd {

void write_series_csv(const StandardizedSeries& series, std::ostream& out) {
  out << "time,label,cause,estimate,se,lci,uci\n";
  for (const auto& r : series.rows) {
    const std::string cells[] = {csv::format_number(r.time), r.label, r.cause,
                                 csv::format_number(r.estimate), csv::format_number(r.se),
                                 csv::format_number(r.lci), csv::format_number(r.uci)};
    csv::write_row(out, cells);
  }
}

std::string series_csv(const StandardizedSeries& series) {
  std::ostringstream os;
  write_series_csv(series, os);
  return os.str();
}

nlohmann::ordered_json software_versions() {
  nlohmann::ordered_json v;
  v["crstd"] = kVersion;
  v["model_format"] = kModelFormatVersion;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
  return v;
}

nlohmann::ordered_json series_manifest(const StandardizeRequest& request,
                                       const StandardizedSeries& series) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json req;
  req["estimand"] = std::string(to_string(request.estimand));
  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (const auto& m : request.models) {
    nlohmann::ordered_json mj;
    mj["failure_code"] = m.spec().failure_code;
    mj["covariates"] = m.spec().covariates;
    mj["n_parameters"] = m.theta().size();
    mj["max_event_time"] = m.max_event_time;
    models.push_back(std::move(mj));
  }
  req["models"] = std::move(models);
  req["cause_labels"] = series.cause_labels;
  req["times"] = request.times;
  nlohmann::ordered_json scen = nlohmann::ordered_json::array();
  for (const auto& s : request.scenarios) {
    nlohmann::ordered_json sj;
    sj["label"] = s.label;
    nlohmann::ordered_json as = nlohmann::ordered_json::array();
    for (const auto& a : s.assignments) {
      nlohmann::ordered_json aj;
      aj["column"] = a.column;
      if (a.value)
        aj["value"] = *a.value;
      else
        aj["source"] = a.source;
      as.push_back(std::move(aj));
    }
    sj["assignments"] = std::move(as);
    scen.push_back(std::move(sj));
  }
  req["scenarios"] = std::move(scen);
  req["contrast"] = std::string(to_string(request.contrast));
  req["reference"] = request.reference;
  req["lincom"] = request.lincom;
  req["ci_level"] = request.ci_level;
  if (request.row)
    req["row"] = *request.row;
  else
    req["row"] = nullptr;
  j["request"] = std::move(req);
  j["quadrature_nodes"] = series.nodes;
  j["population"] = series.population;
  std::vector<double> flagged;
  for (const auto& r : series.rows)
    if (r.extrapolated && (flagged.empty() || flagged.back() != r.time)) flagged.push_back(r.time);
  j["extrapolated_times"] = flagged;
  j["versions"] = software_versions();
  return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

}  // namespace crstd
