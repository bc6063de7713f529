#include "deepalloc/date.hpp"

#include <fmt/format.h>

#include <cctype>

#include "deepalloc/errors.hpp"

namespace deepalloc {

using namespace std::chrono;

Date::Date(int year, unsigned month, unsigned day) {
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                           std::chrono::day{day}};
  if (!ymd.ok()) {
    throw DataError(DataError::Kind::kParse,
                    fmt::format("invalid calendar date {}-{}-{}", year, month, day));
  }
  day_ = sys_days{ymd};
}

Date Date::parse(std::string_view text) {
  auto fail = [&] {
    return DataError(DataError::Kind::kParse,
                     fmt::format("invalid ISO-8601 date '{}'", text));
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw fail();
  auto digits = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (!std::isdigit(static_cast<unsigned char>(text[i]))) throw fail();
      v = v * 10 + (text[i] - '0');
    }
    return v;
  };
  const int y = digits(0, 4);
  const int m = digits(5, 2);
  const int d = digits(8, 2);
  const year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                           std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw fail();
  return Date{sys_days{ymd}};
}

std::string Date::iso() const {
  const auto d = ymd();
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()),
                     static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

Date Date::add_months(int months) const {
  const auto d = ymd();
  const year_month target = year_month{d.year(), d.month()} + std::chrono::months{months};
  const auto last = year_month_day_last{target.year(), month_day_last{target.month()}};
  const auto day = std::min(d.day(), last.day());
  return Date{sys_days{year_month_day{target.year(), target.month(), day}}};
}

bool Date::is_weekend() const {
  const weekday wd{day_};
  return wd == Saturday || wd == Sunday;
}

}  // namespace deepalloc
