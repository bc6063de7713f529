#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace deepalloc {

/// Calendar date with ISO-8601 (YYYY-MM-DD) text form.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days day) : day_(day) {}
  Date(int year, unsigned month, unsigned day);

  /// Parses strict `YYYY-MM-DD`; throws DataError(kParse) otherwise.
  static Date parse(std::string_view text);

  std::string iso() const;
  std::chrono::sys_days days() const { return day_; }
  std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{day_}; }

  /// Same day-of-month `months` later, clamped to the end of the target month.
  Date add_months(int months) const;
  Date add_days(int days) const { return Date{day_ + std::chrono::days{days}}; }
  bool is_weekend() const;

  friend auto operator<=>(const Date&, const Date&) = default;
  friend bool operator==(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days day_{};
};

}  // namespace deepalloc
