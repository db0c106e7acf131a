#include "crstd/cli.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include "crstd/analysis.hpp"
#include "crstd/csv.hpp"
#include "crstd/dataset.hpp"
#include "crstd/error.hpp"
#include "crstd/fpm.hpp"
#include "crstd/nonparam.hpp"
#include "crstd/output.hpp"
#include "crstd/standardize.hpp"
#include "crstd/version.hpp"

namespace crstd {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

double number(const std::string& s, const std::string& what) {
  double v;
  if (!csv::parse_number(s, v) || !std::isfinite(v))
    throw ValidationError(what + ": '" + s + "' is not a number");
  return v;
}

int apply_thread_cap() {
  const char* env = std::getenv("CRSTD_THREADS");
  if (!env || !*env) return omp_get_max_threads();
  double v;
  if (!csv::parse_number(env, v) || v < 1 || v != std::floor(v))
    throw ValidationError("CRSTD_THREADS must be a positive integer");
  const int n = std::min(static_cast<int>(v), omp_get_num_procs() * 4);
  omp_set_num_threads(n);
  return n;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Run {
  std::string command;
  std::vector<std::string> args;
  int threads = 1;
  json details = json::object();

  json manifest() const {
    json j;
    j["command"] = command;
    j["arguments"] = args;
    j["threads"] = threads;
    j["created_utc"] = utc_timestamp();
    for (const auto& [k, v] : details.items()) j[k] = v;
    j["versions"] = software_versions();
    return j;
  }
};

void write_with_manifest(const fs::path& out, const std::string& content, const Run& run) {
  write_text_file(out, content);
  fs::path m = out;
  m += ".manifest.json";
  write_text_file(m, run.manifest().dump(2) + "\n");
}

std::vector<TvcTerm> parse_tvc(const std::vector<std::string>& items) {
  std::vector<TvcTerm> out;
  for (const auto& it : items) {
    const auto parts = split(it, ':');
    if (parts.size() != 2 || parts[0].empty())
      throw ValidationError("--tvc expects col:df, got '" + it + "'");
    const double df = number(parts[1], "--tvc df");
    if (df < 1 || df != std::floor(df)) throw ValidationError("--tvc df must be a positive integer");
    out.push_back({parts[0], static_cast<int>(df)});
  }
  return out;
}

std::vector<double> parse_timevar(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.size() != 3) throw ValidationError("--timevar expects start:stop:points");
  const double n = number(parts[2], "--timevar points");
  if (n < 1 || n != std::floor(n)) throw ValidationError("--timevar points must be a positive integer");
  return time_grid(number(parts[0], "--timevar start"), number(parts[1], "--timevar stop"),
                   static_cast<int>(n));
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Competing-risks regression standardisation with flexible parametric models",
               "crstd"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string data, output, group = "rx", time_col = "dtime", event_col = "eventType";
  double exit_time = 60.0;

  auto* prep = app.add_subcommand("prep", "Prepare the raw prostate trial data");
  prep->add_option("--data", data, "Raw CSV")->required();
  prep->add_option("--out", output, "Prepared CSV")->required();

  auto* km = app.add_subcommand("km", "Kaplan-Meier all-cause failure by group");
  auto* aj = app.add_subcommand("aj", "Aalen-Johansen cumulative incidence by group and cause");
  for (auto* sc : {km, aj}) {
    sc->add_option("--data", data, "Prepared CSV")->required();
    sc->add_option("--out", output, "Output CSV")->required();
    sc->add_option("--group", group, "Grouping column")->capture_default_str();
    sc->add_option("--exit-time", exit_time, "Administrative censoring time")->capture_default_str();
    sc->add_option("--time", time_col, "Time column")->capture_default_str();
    sc->add_option("--event", event_col, "Event code column")->capture_default_str();
  }

  int failure_code = 1, df = 3;
  std::string covariates;
  std::vector<std::string> tvc;
  auto* fitc = app.add_subcommand("fit", "Fit a cause-specific flexible parametric model");
  fitc->add_option("--data", data, "Prepared CSV")->required();
  fitc->add_option("--out", output, "Model JSON")->required();
  fitc->add_option("--failure-code", failure_code, "Event code counted as failure")->capture_default_str();
  fitc->add_option("--exit-time", exit_time, "Administrative censoring time")->capture_default_str();
  fitc->add_option("--covariates", covariates, "Comma-separated covariates");
  fitc->add_option("--df", df, "Baseline spline degrees of freedom")->capture_default_str();
  fitc->add_option("--tvc", tvc, "Time-varying effect col:df (repeatable)");
  fitc->add_option("--time", time_col, "Time column")->capture_default_str();
  fitc->add_option("--event", event_col, "Event code column")->capture_default_str();

  std::string models, estimand = "failure", contrast = "none", lincom_w, timevar, causes;
  std::vector<std::string> at;
  double t_star = 0.0, ci_level = 0.95;
  int nodes = 50, reference = 1;
  long row_index = -1;
  auto* ss = app.add_subcommand("standsurv", "Standardised survival, failure, CIF or RMFT");
  ss->add_option("--models", models, "Model JSON files, comma-separated")->required();
  ss->add_option("--data", data, "CSV holding the population to average over")->required();
  ss->add_option("--out", output, "Output CSV")->required();
  ss->add_option("--estimand", estimand, "survival|failure|cif|rmft")
      ->check(CLI::IsMember({"survival", "failure", "cif", "rmft"}))
      ->capture_default_str();
  ss->add_option("--at", at, "Scenario col=v,col=~src (repeatable)")->required();
  ss->add_option("--contrast", contrast, "difference|ratio")
      ->check(CLI::IsMember({"none", "difference", "ratio"}));
  ss->add_option("--reference", reference, "1-based reference scenario")->capture_default_str();
  ss->add_option("--lincom", lincom_w, "Weights over (scenario, cause)");
  auto* tv = ss->add_option("--timevar", timevar, "start:stop:points");
  auto* ts = ss->add_option("--t-star", t_star, "Single evaluation time");
  tv->excludes(ts);
  ss->add_option("--ci-level", ci_level, "Confidence level")->capture_default_str();
  ss->add_option("--nodes", nodes, "Gauss-Legendre nodes per integral")->capture_default_str();
  ss->add_option("--row-index", row_index, "0-based row for non-marginal prediction");
  ss->add_option("--causes", causes, "Cause labels, comma-separated");

  std::string recipe_name;
  auto* rc = app.add_subcommand("recipe", "Run a named analysis recipe");
  rc->add_option("name", recipe_name, "Recipe name")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>(recipe_names().begin(), recipe_names().end())));
  rc->add_option("--data", data, "Raw or prepared CSV")->required();
  rc->add_option("--out", output, "Output directory")->required();
  rc->add_option("--timevar", timevar, "start:stop:points");
  rc->add_option("--t-star", t_star, "RMFT horizon");
  rc->add_option("--nodes", nodes, "Gauss-Legendre nodes per integral")->capture_default_str();
  rc->add_option("--ci-level", ci_level, "Confidence level")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    Run run;
    for (int i = 1; i < argc; ++i) run.args.emplace_back(argv[i]);
    run.threads = apply_thread_cap();

    if (*prep) {
      run.command = "prep";
      const SurvivalFrame raw = load_csv(data, Schema::prostate_raw());
      const SurvivalFrame p = prepare_prostate(raw);
      std::ostringstream os;
      write_csv(p, os);
      run.details["input_rows"] = raw.n_rows();
      run.details["output_rows"] = p.n_rows();
      write_with_manifest(output, os.str(), run);
    } else if (*km || *aj) {
      run.command = *km ? "km" : "aj";
      const SurvivalFrame f = load_csv(data);
      std::ostringstream os;
      if (*km) {
        write_curves_csv(kaplan_meier_failure(f, exit_time, group, time_col, event_col), os);
      } else {
        const auto res = aalen_johansen_cif(f, exit_time, group, time_col, event_col);
        write_curves_csv(res.cif, os);
      }
      run.details["exit_time"] = exit_time;
      run.details["group"] = group;
      write_with_manifest(output, os.str(), run);
    } else if (*fitc) {
      run.command = "fit";
      ModelSpec spec;
      if (!covariates.empty()) spec.covariates = split(covariates, ',');
      spec.baseline_df = df;
      spec.tvc = parse_tvc(tvc);
      spec.failure_code = failure_code;
      spec.exit_time = exit_time;
      spec.time_column = time_col;
      spec.event_column = event_col;
      spec.validate();
      const SurvivalFrame f = load_csv(data);
      for (const auto& c : spec.covariates)
        if (!f.has_column(c)) throw ValidationError("covariate column '" + c + "' not in data");
      const FpmFit m = fit(spec, f);
      if (m.n_dropped) err << "dropped " << m.n_dropped << " rows with missing covariates\n";
      run.details["loglik"] = m.loglik;
      run.details["n_obs"] = m.n_obs;
      run.details["n_events"] = m.n_events;
      run.details["n_dropped"] = m.n_dropped;
      write_with_manifest(output, fit_to_json(m), run);
      out << "log likelihood " << csv::format_number(m.loglik) << ", " << m.n_obs << " obs, "
          << m.n_events << " events\n";
    } else if (*ss) {
      run.command = "standsurv";
      StandardizeRequest req;
      req.estimand = parse_estimand(estimand);
      req.contrast = parse_contrast(contrast);
      if (reference < 1) throw ValidationError("--reference is 1-based");
      req.reference = static_cast<std::size_t>(reference - 1);
      req.ci_level = ci_level;
      req.nodes = nodes;
      for (std::size_t i = 0; i < at.size(); ++i)
        req.scenarios.push_back(AtScenario::parse(at[i], "at" + std::to_string(i + 1)));
      if (!lincom_w.empty())
        for (const auto& w : split(lincom_w, ',')) req.lincom.push_back(number(w, "--lincom"));
      if (!causes.empty()) req.cause_labels = split(causes, ',');
      if (ss->count("--t-star")) {
        req.times = {t_star};
      } else if (!timevar.empty()) {
        req.times = parse_timevar(timevar);
      } else {
        throw ValidationError("one of --timevar or --t-star is required");
      }
      if (row_index >= 0) req.row = static_cast<std::size_t>(row_index);
      const auto paths = split(models, ',');
      if (paths.empty() || paths.size() > 2) throw ValidationError("--models takes one or two files");
      for (const auto& p : paths) req.models.push_back(load_fit(p));
      req.validate();
      const SurvivalFrame f = load_csv(data);
      const auto series = standardize(req, f);
      run.details["standardize"] = series_manifest(req, series);
      write_with_manifest(output, series_csv(series), run);
    } else if (*rc) {
      run.command = "recipe";
      RecipeOptions opt;
      if (!timevar.empty()) opt.grid = parse_timevar(timevar);
      if (rc->count("--t-star")) opt.t_star = t_star;
      opt.nodes = nodes;
      opt.ci_level = ci_level;
      const SurvivalFrame f = load_csv(data);
      const RecipeResult res = run_recipe(recipe_name, f, opt);
      const fs::path dir = output;
      for (const auto& [name, content] : res.files) write_text_file(dir / name, content);
      json m = run.manifest();
      m["recipe"] = res.manifest;
      write_text_file(dir / "manifest.json", m.dump(2) + "\n");
      out << "wrote " << res.files.size() << " files to " << dir.string() << '\n';
    }
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace crstd
