#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace crstd {

enum class ColumnType { Numeric, Text };

// Column typing for load_csv. Columns not listed are inferred: numeric when
// every non-empty cell parses as a number, text otherwise.
struct Schema {
  std::map<std::string, ColumnType, std::less<>> types;
  std::vector<std::string> required;

  // Raw columns the prostate preparation reads.
  static Schema prostate_raw();
};

// Rectangular table of named columns. Numeric columns use NaN for missing
// cells, text columns use the empty string. Frames are immutable: every
// transformation returns a new frame.
class SurvivalFrame {
 public:
  SurvivalFrame() = default;

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_columns() const { return columns_.size(); }
  std::vector<std::string> column_names() const;

  bool has_column(std::string_view name) const;
  bool is_numeric(std::string_view name) const;

  // Throw ValidationError when the column is absent or of the other type.
  const std::vector<double>& numeric(std::string_view name) const;
  const std::vector<std::string>& text(std::string_view name) const;

  SurvivalFrame with_numeric(std::string name, std::vector<double> values) const;
  SurvivalFrame with_text(std::string name, std::vector<std::string> values) const;
  SurvivalFrame select_rows(std::span<const std::size_t> rows) const;
  SurvivalFrame select_columns(std::span<const std::string> names) const;

  // Indices of rows with no missing value in any of `names`.
  std::vector<std::size_t> complete_rows(std::span<const std::string> names) const;

 private:
  struct Column {
    std::string name;
    std::variant<std::vector<double>, std::vector<std::string>> data;
  };
  const Column* find(std::string_view name) const;

  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
};

SurvivalFrame load_csv(const std::filesystem::path& path, const Schema& schema = {});
SurvivalFrame parse_csv(std::istream& in, const Schema& schema = {},
                        const std::string& source = "<stream>");
void write_csv(const SurvivalFrame& frame, std::ostream& out);
void write_csv(const SurvivalFrame& frame, const std::filesystem::path& path);

// Event codes used by the prepared prostate frame.
inline constexpr int kAlive = 0;
inline constexpr int kProstateDeath = 1;
inline constexpr int kOtherDeath = 2;

// Map a raw status cell (label or numeric code) to 0 / 1 / 2.
// Throws ValidationError for anything not in the shipped table.
int status_to_event_code(std::string_view status);
int status_to_event_code(double status_code);

// Column names of a prepared prostate frame, in output order.
std::span<const std::string> prepared_prostate_columns();

// Restrict to placebo and the high-dose arm, recode and derive the analysis
// covariates. Already-prepared frames (eventType present, status absent) are
// validated and returned restricted to the prepared columns.
SurvivalFrame prepare_prostate(const SurvivalFrame& raw);

// Per-row analysis time and event indicator for one cause, with
// administrative censoring at exit_time.
struct SurvivalDeclaration {
  int failure_code = 1;
  double exit_time = 0.0;
  std::vector<double> analysis_time;
  std::vector<int> d;

  std::size_t n_rows() const { return d.size(); }
  std::size_t n_events() const;
};

SurvivalDeclaration declare_survival(const SurvivalFrame& frame, int failure_code, double exit_time,
                                     std::string_view time_column = "dtime",
                                     std::string_view event_column = "eventType");

}  // namespace crstd
