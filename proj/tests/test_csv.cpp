#include <gtest/gtest.h>

#include <sstream>

#include "snot/csv.hpp"
#include "snot/error.hpp"
#include "snot/measures.hpp"

using namespace snot;

TEST(Csv, RoundTripsDoublesExactly) {
  CsvTable t;
  t.header = {"a", "b"};
  t.rows = {{0.1, 1e-300}, {-3.0, 2.0 / 3.0}};
  std::stringstream ss;
  write_csv(ss, t, "generated now");
  EXPECT_EQ(ss.str().substr(0, 16), "# generated now\n");
  const CsvTable back = read_csv(ss);
  ASSERT_EQ(back.header, t.header);
  ASSERT_EQ(back.rows.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(back.rows[i][j], t.rows[i][j]);
  }
  EXPECT_EQ(back.column("b"), 1u);
}

TEST(Csv, RejectsRaggedRows) {
  std::stringstream ss("a,b\n1,2\n3\n");
  EXPECT_THROW(read_csv(ss), ConfigError);
}

TEST(Csv, MeasureRoundTrip) {
  DatasetSpec s;
  s.kind = DatasetKind::StandardGaussian;
  s.ambient_dim = 3;
  const EmpiricalMeasure m = sample(s, 7, 11);
  std::stringstream ss;
  write_measure_csv(ss, m);
  EXPECT_EQ(ss.str().substr(0, 9), "x0,x1,x2,");
  const EmpiricalMeasure back = read_measure_csv(ss);
  EXPECT_EQ(back.points, m.points);
  EXPECT_EQ(back.weights, m.weights);
}
