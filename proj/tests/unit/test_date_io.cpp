#include <gtest/gtest.h>

#include "deepalloc/date.hpp"
#include "deepalloc/errors.hpp"
#include "deepalloc/io.hpp"
#include "fixtures.hpp"

namespace deepalloc {
namespace {

TEST(Date, ParsesAndFormatsIso) {
  const auto d = Date::parse("2006-12-31");
  EXPECT_EQ(d.iso(), "2006-12-31");
  EXPECT_EQ(d, Date(2006, 12, 31));
  EXPECT_LT(Date(2006, 12, 30), d);
}

TEST(Date, RejectsMalformedText) {
  for (const char* bad : {"2006-13-01", "2006-02-30", "06-12-31", "2006/12/31", "2006-12-31x", ""}) {
    EXPECT_THROW(Date::parse(bad), DataError) << bad;
  }
}

TEST(Date, AddMonthsClampsToMonthEnd) {
  EXPECT_EQ(Date(2007, 1, 31).add_months(1), Date(2007, 2, 28));
  EXPECT_EQ(Date(2006, 12, 31).add_months(12), Date(2007, 12, 31));
  EXPECT_EQ(Date(2006, 12, 31).add_months(14), Date(2008, 2, 29));
}

TEST(Date, BusinessDaysSkipWeekends) {
  const auto days = business_days(Date(2000, 1, 1), 3);  // Saturday
  ASSERT_EQ(days.size(), 3u);
  EXPECT_EQ(days[0], Date(2000, 1, 3));
  EXPECT_EQ(days[2], Date(2000, 1, 5));
  for (const auto& d : business_days(Date(2000, 1, 3), 50)) EXPECT_FALSE(d.is_weekend());
}

TEST(Io, FormatNumberRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.125, 0.0}) {
    EXPECT_EQ(io::parse_double(io::format_number(v)), v);
  }
}

TEST(Io, ParseDoubleRejectsGarbage) {
  EXPECT_THROW(io::parse_double("abc"), DataError);
  EXPECT_THROW(io::parse_double("1.0x"), DataError);
  EXPECT_THROW(io::parse_double("nan"), DataError);
  EXPECT_DOUBLE_EQ(io::parse_double(" 2.5 "), 2.5);
}

TEST(Io, AtomicWriteReplacesContentAndLeavesNoTemp) {
  const auto dir = testing::fresh_dir("atomic");
  io::write_file_atomic(dir / "f.txt", "one");
  io::write_file_atomic(dir / "f.txt", "two");
  EXPECT_EQ(io::read_file(dir / "f.txt"), "two");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 1u);
}

TEST(Io, ReadMissingFileIsDataError) {
  try {
    io::read_file("/nonexistent/deepalloc/file.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::kMissingFile);
  }
}

}  // namespace
}  // namespace deepalloc
