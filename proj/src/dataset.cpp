#include "crstd/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "crstd/csv.hpp"
#include "crstd/error.hpp"

namespace crstd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_missing_token(std::string_view cell) { return cell.empty() || cell == "NA"; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

Schema Schema::prostate_raw() {
  Schema s;
  s.required = {"rx", "status", "dtime", "hg", "age", "pf", "hx"};
  s.types = {{"rx", ColumnType::Text},    {"status", ColumnType::Text},
             {"dtime", ColumnType::Numeric}, {"hg", ColumnType::Numeric},
             {"age", ColumnType::Numeric},   {"pf", ColumnType::Text},
             {"hx", ColumnType::Numeric}};
  return s;
}

// ---------------------------------------------------------------------------
// SurvivalFrame

std::vector<std::string> SurvivalFrame::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns_.size());
  for (const auto& c : columns_) names.push_back(c.name);
  return names;
}

const SurvivalFrame::Column* SurvivalFrame::find(std::string_view name) const {
  for (const auto& c : columns_)
    if (c.name == name) return &c;
  return nullptr;
}

bool SurvivalFrame::has_column(std::string_view name) const { return find(name) != nullptr; }

bool SurvivalFrame::is_numeric(std::string_view name) const {
  const Column* c = find(name);
  return c && std::holds_alternative<std::vector<double>>(c->data);
}

const std::vector<double>& SurvivalFrame::numeric(std::string_view name) const {
  const Column* c = find(name);
  if (!c) throw ValidationError("missing column '" + std::string(name) + "'");
  if (auto* v = std::get_if<std::vector<double>>(&c->data)) return *v;
  throw ValidationError("column '" + std::string(name) + "' is not numeric");
}

const std::vector<std::string>& SurvivalFrame::text(std::string_view name) const {
  const Column* c = find(name);
  if (!c) throw ValidationError("missing column '" + std::string(name) + "'");
  if (auto* v = std::get_if<std::vector<std::string>>(&c->data)) return *v;
  throw ValidationError("column '" + std::string(name) + "' is not text");
}

SurvivalFrame SurvivalFrame::with_numeric(std::string name, std::vector<double> values) const {
  if (!columns_.empty() && values.size() != n_rows_) {
    throw ValidationError("column '" + name + "' has " + std::to_string(values.size()) +
                          " rows, frame has " + std::to_string(n_rows_));
  }
  SurvivalFrame out = *this;
  out.n_rows_ = values.size();
  for (auto& c : out.columns_) {
    if (c.name == name) {
      c.data = std::move(values);
      return out;
    }
  }
  out.columns_.push_back({std::move(name), std::move(values)});
  return out;
}

SurvivalFrame SurvivalFrame::with_text(std::string name, std::vector<std::string> values) const {
  if (!columns_.empty() && values.size() != n_rows_) {
    throw ValidationError("column '" + name + "' has " + std::to_string(values.size()) +
                          " rows, frame has " + std::to_string(n_rows_));
  }
  SurvivalFrame out = *this;
  out.n_rows_ = values.size();
  for (auto& c : out.columns_) {
    if (c.name == name) {
      c.data = std::move(values);
      return out;
    }
  }
  out.columns_.push_back({std::move(name), std::move(values)});
  return out;
}

SurvivalFrame SurvivalFrame::select_rows(std::span<const std::size_t> rows) const {
  SurvivalFrame out;
  out.n_rows_ = rows.size();
  for (const auto& c : columns_) {
    std::visit(
        [&](const auto& v) {
          std::decay_t<decltype(v)> picked;
          picked.reserve(rows.size());
          for (std::size_t r : rows) {
            if (r >= n_rows_) throw ValidationError("row index out of range");
            picked.push_back(v[r]);
          }
          out.columns_.push_back({c.name, std::move(picked)});
        },
        c.data);
  }
  return out;
}

SurvivalFrame SurvivalFrame::select_columns(std::span<const std::string> names) const {
  SurvivalFrame out;
  out.n_rows_ = n_rows_;
  for (const auto& n : names) {
    const Column* c = find(n);
    if (!c) throw ValidationError("missing column '" + n + "'");
    out.columns_.push_back(*c);
  }
  return out;
}

std::vector<std::size_t> SurvivalFrame::complete_rows(std::span<const std::string> names) const {
  std::vector<const Column*> cols;
  for (const auto& n : names) {
    const Column* c = find(n);
    if (!c) throw ValidationError("missing column '" + n + "'");
    cols.push_back(c);
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < n_rows_; ++r) {
    bool ok = true;
    for (const Column* c : cols) {
      if (auto* v = std::get_if<std::vector<double>>(&c->data)) {
        ok = ok && !std::isnan((*v)[r]);
      } else {
        ok = ok && !std::get<std::vector<std::string>>(c->data)[r].empty();
      }
    }
    if (ok) rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV I/O

SurvivalFrame parse_csv(std::istream& in, const Schema& schema, const std::string& source) {
  csv::Table table = csv::read(in, source);
  for (const auto& req : schema.required) {
    if (std::find(table.header.begin(), table.header.end(), req) == table.header.end()) {
      throw ValidationError(source + ": missing required column '" + req + "'");
    }
  }
  SurvivalFrame frame;
  const std::size_t n = table.rows.size();
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    const std::string& name = table.header[j];
    auto it = schema.types.find(name);
    std::optional<ColumnType> declared;
    if (it != schema.types.end()) declared = it->second;

    std::vector<double> values(n, kNaN);
    bool numeric = true;
    for (std::size_t r = 0; r < n; ++r) {
      const std::string& cell = table.rows[r][j];
      if (is_missing_token(cell)) continue;
      double v;
      if (csv::parse_number(cell, v)) {
        values[r] = v;
      } else {
        if (declared == ColumnType::Numeric) {
          throw ValidationError(source + ": non-numeric value '" + cell + "' in column '" + name +
                                "' at row " + std::to_string(r + 1));
        }
        numeric = false;
      }
    }
    if (declared == ColumnType::Text || !numeric) {
      std::vector<std::string> cells(n);
      for (std::size_t r = 0; r < n; ++r)
        cells[r] = is_missing_token(table.rows[r][j]) ? std::string() : table.rows[r][j];
      frame = frame.with_text(name, std::move(cells));
    } else {
      frame = frame.with_numeric(name, std::move(values));
    }
  }
  return frame;
}

SurvivalFrame load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return parse_csv(in, schema, path.string());
}

void write_csv(const SurvivalFrame& frame, std::ostream& out) {
  const auto names = frame.column_names();
  csv::write_row(out, names);
  std::vector<std::string> cells(names.size());
  for (std::size_t r = 0; r < frame.n_rows(); ++r) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      cells[j] = frame.is_numeric(names[j]) ? csv::format_number(frame.numeric(names[j])[r])
                                            : frame.text(names[j])[r];
    }
    csv::write_row(out, cells);
  }
}

void write_csv(const SurvivalFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_csv(frame, out);
}

// ---------------------------------------------------------------------------
// Prostate preparation

int status_to_event_code(std::string_view status) {
  double code;
  if (csv::parse_number(status, code)) return status_to_event_code(code);
  const std::string s = lower(status);
  if (s == "alive") return kAlive;
  if (s == "dead - prostatic ca") return kProstateDeath;
  static const std::array<std::string_view, 8> other = {
      "dead - heart or vascular",     "dead - cerebrovascular",
      "dead - pulmonary embolus",     "dead - other ca",
      "dead - respiratory disease",   "dead - other specific non-ca",
      "dead - unspecified non-ca",    "dead - unknown cause"};
  if (std::find(other.begin(), other.end(), s) != other.end()) return kOtherDeath;
  throw ValidationError("unknown status label '" + std::string(status) + "'");
}

int status_to_event_code(double code) {
  // Stata value labels: 1 alive, 2 prostatic ca, 3..10 other causes.
  if (code == 1) return kAlive;
  if (code == 2) return kProstateDeath;
  if (code >= 3 && code <= 10 && code == std::floor(code)) return kOtherDeath;
  throw ValidationError("unknown status code " + csv::format_number(code));
}

std::span<const std::string> prepared_prostate_columns() {
  static const std::vector<std::string> cols = {
      "rx",      "dtime",   "eventType", "allcause", "hg",        "hgBinary", "age",
      "ageCat",  "ageCat1", "ageCat2",   "ageCat3",  "normalAct", "hx"};
  return cols;
}

namespace {

// Arm code 1..4 from a label or a number.
double arm_code(const SurvivalFrame& raw, std::size_t r) {
  if (raw.is_numeric("rx")) return raw.numeric("rx")[r];
  const std::string s = lower(raw.text("rx")[r]);
  if (double v; csv::parse_number(s, v)) return v;
  if (s == "placebo") return 1;
  if (s == "0.2 mg estrogen") return 2;
  if (s == "1.0 mg estrogen") return 3;
  if (s == "5.0 mg estrogen") return 4;
  if (s.empty()) return kNaN;
  throw ValidationError("unknown rx label '" + raw.text("rx")[r] + "' at row " +
                        std::to_string(r + 1));
}

double activity_code(const SurvivalFrame& raw, std::size_t r) {
  if (raw.is_numeric("pf")) return raw.numeric("pf")[r];
  const std::string s = lower(raw.text("pf")[r]);
  if (double v; csv::parse_number(s, v)) return v;
  if (s == "normal activity") return 1;
  if (s == "in bed < 50% daytime") return 2;
  if (s == "in bed > 50% daytime") return 3;
  if (s == "confined to bed") return 4;
  if (s.empty()) return kNaN;
  throw ValidationError("unknown pf label '" + raw.text("pf")[r] + "' at row " +
                        std::to_string(r + 1));
}

int event_code_at(const SurvivalFrame& raw, std::size_t r) {
  if (raw.is_numeric("status")) {
    double v = raw.numeric("status")[r];
    if (std::isnan(v)) throw ValidationError("missing status at row " + std::to_string(r + 1));
    return status_to_event_code(v);
  }
  return status_to_event_code(std::string_view(raw.text("status")[r]));
}

// egen cut(age), at(0,60,75,100) then recoded 0/1/2.
double age_category(double age) {
  if (std::isnan(age) || age < 0 || age >= 100) return kNaN;
  if (age < 60) return 0;
  if (age < 75) return 1;
  return 2;
}

SurvivalFrame validate_prepared(const SurvivalFrame& frame) {
  const auto cols = prepared_prostate_columns();
  SurvivalFrame out = frame.select_columns(cols);
  const auto& rx = out.numeric("rx");
  const auto& dtime = out.numeric("dtime");
  const auto& ev = out.numeric("eventType");
  for (std::size_t r = 0; r < out.n_rows(); ++r) {
    if (!(rx[r] == 0 || rx[r] == 1))
      throw ValidationError("prepared frame: rx must be 0/1 at row " + std::to_string(r + 1));
    if (!(dtime[r] > 0))
      throw ValidationError("prepared frame: dtime must be > 0 at row " + std::to_string(r + 1));
    if (!(ev[r] == 0 || ev[r] == 1 || ev[r] == 2))
      throw ValidationError("prepared frame: eventType must be 0/1/2 at row " +
                            std::to_string(r + 1));
  }
  return out;
}

}  // namespace

SurvivalFrame prepare_prostate(const SurvivalFrame& raw) {
  if (raw.has_column("eventType") && !raw.has_column("status")) return validate_prepared(raw);

  for (const char* c : {"rx", "status", "dtime", "hg", "age", "pf", "hx"}) {
    if (!raw.has_column(c)) throw ValidationError(std::string("missing column '") + c + "'");
  }
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < raw.n_rows(); ++r) {
    const double arm = arm_code(raw, r);
    if (arm == 1 || arm == 4) keep.push_back(r);
  }

  const std::size_t n = keep.size();
  std::vector<double> rx(n), dtime(n), event(n), allcause(n), hg(n), hg_binary(n), age(n),
      age_cat(n), age1(n), age2(n), age3(n), normal_act(n), hx(n);
  const auto& raw_dtime = raw.numeric("dtime");
  const auto& raw_hg = raw.numeric("hg");
  const auto& raw_age = raw.numeric("age");
  const auto& raw_hx = raw.numeric("hx");
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = keep[i];
    rx[i] = arm_code(raw, r) == 1 ? 0.0 : 1.0;
    dtime[i] = raw_dtime[r] == 0 ? 0.5 : raw_dtime[r];
    const int code = event_code_at(raw, r);
    event[i] = code;
    allcause[i] = code != kAlive;
    hg[i] = raw_hg[r];
    // Stata comparison semantics: a missing value is never < 12.
    hg_binary[i] = raw_hg[r] < 12 ? 1.0 : 0.0;
    age[i] = raw_age[r];
    age_cat[i] = age_category(raw_age[r]);
    const bool known = !std::isnan(age_cat[i]);
    age1[i] = known ? double(age_cat[i] == 0) : kNaN;
    age2[i] = known ? double(age_cat[i] == 1) : kNaN;
    age3[i] = known ? double(age_cat[i] == 2) : kNaN;
    normal_act[i] = activity_code(raw, r) == 1 ? 1.0 : 0.0;
    hx[i] = raw_hx[r];
  }

  SurvivalFrame out;
  out = out.with_numeric("rx", std::move(rx))
            .with_numeric("dtime", std::move(dtime))
            .with_numeric("eventType", std::move(event))
            .with_numeric("allcause", std::move(allcause))
            .with_numeric("hg", std::move(hg))
            .with_numeric("hgBinary", std::move(hg_binary))
            .with_numeric("age", std::move(age))
            .with_numeric("ageCat", std::move(age_cat))
            .with_numeric("ageCat1", std::move(age1))
            .with_numeric("ageCat2", std::move(age2))
            .with_numeric("ageCat3", std::move(age3))
            .with_numeric("normalAct", std::move(normal_act))
            .with_numeric("hx", std::move(hx));
  return validate_prepared(out);
}

// ---------------------------------------------------------------------------
// Survival declaration

std::size_t SurvivalDeclaration::n_events() const {
  return static_cast<std::size_t>(std::count(d.begin(), d.end(), 1));
}

SurvivalDeclaration declare_survival(const SurvivalFrame& frame, int failure_code, double exit_time,
                                     std::string_view time_column, std::string_view event_column) {
  if (!(exit_time > 0)) throw ValidationError("exit time must be > 0");
  const auto& time = frame.numeric(time_column);
  const auto& event = frame.numeric(event_column);
  SurvivalDeclaration decl;
  decl.failure_code = failure_code;
  decl.exit_time = exit_time;
  decl.analysis_time.resize(frame.n_rows());
  decl.d.resize(frame.n_rows());
  for (std::size_t r = 0; r < frame.n_rows(); ++r) {
    if (!(time[r] > 0)) {
      throw ValidationError("non-positive or missing time in column '" + std::string(time_column) +
                            "' at row " + std::to_string(r + 1));
    }
    const double e = event[r];
    if (!(e >= 0) || e != std::floor(e)) {
      throw ValidationError("invalid event code in column '" + std::string(event_column) +
                            "' at row " + std::to_string(r + 1));
    }
    const bool within = time[r] <= exit_time;
    decl.analysis_time[r] = within ? time[r] : exit_time;
    decl.d[r] = (within && static_cast<int>(e) == failure_code) ? 1 : 0;
  }
  return decl;
}

}  // namespace crstd
